use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::tol::Tolerances;

use super::cone::canonical_directions;

/// `conv(points) + cone(rays)`; empty exactly when `points` is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeRep {
    dim: usize,
    points: Vec<Vector>,
    rays: Vec<Vector>,
}

fn dedup_points(ps: &[Vector]) -> Vec<Vector> {
    let mut out: Vec<Vector> = Vec::with_capacity(ps.len());
    for p in ps {
        let scale = p.norm().max(1.0);
        if !out.iter().any(|q| (q - p).norm() <= 1e-12 * scale) {
            out.push(p.clone());
        }
    }
    out
}

impl PolytopeRep {
    /// Duplicate points and zero or duplicate rays are removed.
    pub fn new(dim: usize, points: Vec<Vector>, rays: Vec<Vector>) -> Result<Self> {
        for p in points.iter().chain(rays.iter()) {
            Error::check_dim(dim, p.len())?;
        }
        Ok(Self {
            dim,
            points: dedup_points(&points),
            rays: canonical_directions(&rays),
        })
    }

    pub fn empty(dim: usize) -> Self {
        Self {
            dim,
            points: Vec::new(),
            rays: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }

    pub fn rays(&self) -> &[Vector] {
        &self.rays
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// A single point and no rays.
    pub fn is_singleton(&self) -> bool {
        self.points.len() == 1 && self.rays.is_empty()
    }

    /// Image under the linear map `x -> m x`.
    pub fn map(&self, m: &Matrix) -> Result<PolytopeRep> {
        Error::check_dim(self.dim, m.ncols())?;
        let pts = self.points.iter().map(|p| m * p).collect();
        let rays = self.rays.iter().map(|r| m * r).collect();
        PolytopeRep::new(m.nrows(), pts, rays)
    }

    /// Point with the given convex weights on points and conic weights on rays.
    pub fn combine(&self, point_weights: &[f64], ray_weights: &[f64]) -> Vector {
        let mut out = Vector::zeros(self.dim);
        for (p, w) in self.points.iter().zip(point_weights) {
            out.axpy(*w, p, 1.0);
        }
        for (r, w) in self.rays.iter().zip(ray_weights) {
            out.axpy(*w, r, 1.0);
        }
        out
    }

    /// LP feasibility of `v = sum l_j p_j + sum m_i r_i`, `l >= 0`, `sum l = 1`, `m >= 0`.
    pub fn member(&self, v: &Vector) -> Result<bool> {
        Error::check_dim(self.dim, v.len())?;
        if self.is_empty() {
            return Ok(false);
        }
        Ok(self.weight_lp(v, false).solve()?.is_feasible())
    }

    /// Optimal epsilon of the strictly-positive-weights LP, or `None` when
    /// `v` is not a member at all.
    pub fn ri_margin(&self, v: &Vector) -> Result<Option<f64>> {
        Error::check_dim(self.dim, v.len())?;
        if self.is_empty() {
            return Ok(None);
        }
        match self.weight_lp(v, true).solve()? {
            LpOutcome::Optimal { value, .. } => Ok(Some(value)),
            LpOutcome::Infeasible => Ok(None),
            LpOutcome::Unbounded => Err(Error::Inconsistency("ri LP unbounded despite eps <= 1".into())),
        }
    }

    /// Relative-interior membership: strictly positive weights on every generator.
    pub fn ri_member(&self, v: &Vector, tol: &Tolerances) -> Result<bool> {
        Ok(self.ri_margin(v)?.is_some_and(|eps| eps > tol.ri))
    }

    /// Weights `(point_weights, ray_weights)` expressing `v`, if it is a member.
    pub fn weights_of(&self, v: &Vector) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
        Error::check_dim(self.dim, v.len())?;
        if self.is_empty() {
            return Ok(None);
        }
        match self.weight_lp(v, false).solve()? {
            LpOutcome::Optimal { x, .. } => {
                let p = self.points.len();
                Ok(Some((x[..p].to_vec(), x[p..p + self.rays.len()].to_vec())))
            }
            _ => Ok(None),
        }
    }

    fn weight_lp(&self, v: &Vector, with_eps: bool) -> LinearProgram {
        let p = self.points.len();
        let q = self.rays.len();
        let nvar = p + q + usize::from(with_eps);
        let mut lp = LinearProgram::new(nvar);
        for i in 0..self.dim {
            let mut row = vec![0.0; nvar];
            for (j, pt) in self.points.iter().enumerate() {
                row[j] = pt[i];
            }
            for (j, r) in self.rays.iter().enumerate() {
                row[p + j] = r[i];
            }
            lp.constrain(&row, Relation::Eq, v[i]);
        }
        let mut row = vec![0.0; nvar];
        row[..p].iter_mut().for_each(|x| *x = 1.0);
        lp.constrain(&row, Relation::Eq, 1.0);
        if with_eps {
            let e = p + q;
            for j in 0..p + q {
                let mut row = vec![0.0; nvar];
                row[j] = 1.0;
                row[e] = -1.0;
                lp.constrain(&row, Relation::Ge, 0.0);
            }
            let mut row = vec![0.0; nvar];
            row[e] = 1.0;
            lp.constrain(&row, Relation::Le, 1.0);
            let mut c = vec![0.0; nvar];
            c[e] = 1.0;
            lp.maximize(&c);
        }
        lp
    }

    /// `min ||m w - y||_inf` over `w` in the polytope; `None` when empty.
    pub fn linf_distance_of_image(&self, m: &Matrix, y: &Vector) -> Result<Option<f64>> {
        Error::check_dim(self.dim, m.ncols())?;
        Error::check_dim(m.nrows(), y.len())?;
        if self.is_empty() {
            return Ok(None);
        }
        let p = self.points.len();
        let q = self.rays.len();
        let s = p + q;
        let nvar = s + 1;
        let mut lp = LinearProgram::new(nvar);
        let mapped_p: Vec<Vector> = self.points.iter().map(|x| m * x).collect();
        let mapped_r: Vec<Vector> = self.rays.iter().map(|x| m * x).collect();
        for i in 0..m.nrows() {
            let mut row = vec![0.0; nvar];
            for j in 0..p {
                row[j] = mapped_p[j][i];
            }
            for j in 0..q {
                row[p + j] = mapped_r[j][i];
            }
            // row . w - y_i <= s  and  y_i - row . w <= s
            let mut up = row.clone();
            up[s] = -1.0;
            lp.constrain(&up, Relation::Le, y[i]);
            let mut dn: Vec<f64> = row.iter().map(|x| -x).collect();
            dn[s] = -1.0;
            lp.constrain(&dn, Relation::Le, -y[i]);
        }
        let mut row = vec![0.0; nvar];
        row[..p].iter_mut().for_each(|x| *x = 1.0);
        lp.constrain(&row, Relation::Eq, 1.0);
        let mut c = vec![0.0; nvar];
        c[s] = -1.0;
        lp.maximize(&c);
        match lp.solve()? {
            LpOutcome::Optimal { value, .. } => Ok(Some((-value).max(0.0))),
            other => Err(Error::Inconsistency(format!("distance LP ended {other}"))),
        }
    }
}

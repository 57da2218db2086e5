use crate::error::{Error, Precondition, Result};
use crate::linalg::Vector;
use crate::lp::{LinearProgram, Relation};
use crate::tol::Tolerances;

use super::cone::ConeRep;
use super::polytope::PolytopeRep;

/// `g(z) = max_j (<a_j, z> - alpha_j)` on `{z : <b_i, z> <= beta_i}`, `+inf` elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyhedralFunction {
    m: usize,
    pieces: Vec<(Vector, f64)>,
    rows: Vec<(Vector, f64)>,
}

/// Active domain rows `i` and active pieces `j` at a point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSets {
    pub rows: Vec<usize>,
    pub pieces: Vec<usize>,
}

impl PolyhedralFunction {
    /// Checks dimensions and that the domain is nonempty (LP).
    pub fn new(m: usize, pieces: Vec<(Vector, f64)>, rows: Vec<(Vector, f64)>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::InvalidInput("a polyhedral function needs at least one piece".into()));
        }
        for (v, c) in pieces.iter().chain(rows.iter()) {
            Error::check_dim(m, v.len())?;
            if !c.is_finite() || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInput("non-finite coefficient".into()));
            }
        }
        if !rows.is_empty() {
            let mut lp = LinearProgram::new(m);
            for j in 0..m {
                lp.set_free(j);
            }
            for (b, beta) in &rows {
                lp.constrain(b.as_slice(), Relation::Le, *beta);
            }
            if !lp.solve()?.is_feasible() {
                return Err(Error::InvalidInput("domain rows describe an empty set".into()));
            }
        }
        Ok(Self { m, pieces, rows })
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn pieces(&self) -> &[(Vector, f64)] {
        &self.pieces
    }

    pub fn rows(&self) -> &[(Vector, f64)] {
        &self.rows
    }

    /// `r * g`: pieces scaled, domain unchanged.
    pub fn scaled(&self, r: f64) -> Self {
        Self {
            m: self.m,
            pieces: self.pieces.iter().map(|(a, al)| (a * r, al * r)).collect(),
            rows: self.rows.clone(),
        }
    }

    fn row_slack(&self, i: usize, z: &Vector) -> f64 {
        let (b, beta) = &self.rows[i];
        b.dot(z) - beta
    }

    fn row_scale(&self, i: usize, z: &Vector) -> f64 {
        let (b, beta) = &self.rows[i];
        1.0_f64.max(b.dot(z).abs()).max(beta.abs())
    }

    pub fn in_domain(&self, z: &Vector, tol: &Tolerances) -> bool {
        (0..self.rows.len()).all(|i| self.row_slack(i, z) <= tol.act * self.row_scale(i, z))
    }

    /// Max-affine value ignoring the domain.
    pub fn max_affine(&self, z: &Vector) -> f64 {
        self.pieces
            .iter()
            .map(|(a, al)| a.dot(z) - al)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn eval(&self, z: &Vector) -> Result<f64> {
        self.eval_with(z, &Tolerances::default())
    }

    pub fn eval_with(&self, z: &Vector, tol: &Tolerances) -> Result<f64> {
        Error::check_dim(self.m, z.len())?;
        if !self.in_domain(z, tol) {
            return Ok(f64::INFINITY);
        }
        Ok(self.max_affine(z))
    }

    pub fn active_sets(&self, z: &Vector, tol: &Tolerances) -> Result<ActiveSets> {
        Error::check_dim(self.m, z.len())?;
        if !self.in_domain(z, tol) {
            return Err(Error::pre(Precondition::NotInDomain, "point violates a domain row"));
        }
        let rows = (0..self.rows.len())
            .filter(|&i| self.row_slack(i, z).abs() <= tol.act * self.row_scale(i, z))
            .collect();
        let val = self.max_affine(z);
        let scale = val.abs().max(1.0);
        let pieces = self
            .pieces
            .iter()
            .enumerate()
            .filter(|(_, (a, al))| (a.dot(z) - al - val).abs() <= tol.act * scale)
            .map(|(j, _)| j)
            .collect();
        Ok(ActiveSets { rows, pieces })
    }

    /// `∂g(z) = conv{a_j : j active} + cone{b_i : i active}`.
    pub fn subdifferential(&self, z: &Vector, tol: &Tolerances) -> Result<PolytopeRep> {
        let act = self.active_sets(z, tol)?;
        Ok(self.subdifferential_of(&act))
    }

    pub fn subdifferential_of(&self, act: &ActiveSets) -> PolytopeRep {
        let pts = act.pieces.iter().map(|&j| self.pieces[j].0.clone()).collect();
        let rays = act.rows.iter().map(|&i| self.rows[i].0.clone()).collect();
        PolytopeRep::new(self.m, pts, rays).expect("dimensions checked at construction")
    }

    /// `K_g(z, λ)` in halfspace form, with generators filled by DD.
    pub fn critical_cone(&self, z: &Vector, lambda: &Vector, tol: &Tolerances) -> Result<ConeRep> {
        Error::check_dim(self.m, lambda.len())?;
        let act = self.active_sets(z, tol)?;
        if !self.subdifferential_of(&act).member(lambda)? {
            return Err(Error::pre(Precondition::NotSubgradient, "λ is not in ∂g(z)"));
        }
        self.critical_cone_of(&act, lambda).dd_convert(tol)
    }

    /// Halfspace form only, without membership check.
    pub(crate) fn critical_cone_of(&self, act: &ActiveSets, lambda: &Vector) -> ConeRep {
        let mut hs: Vec<Vector> = act.pieces.iter().map(|&j| &self.pieces[j].0 - lambda).collect();
        hs.extend(act.rows.iter().map(|&i| self.rows[i].0.clone()));
        ConeRep::from_halfspaces(self.m, hs).expect("dimensions checked at construction")
    }

    /// Directional derivative `dg(z)(w)`, `+inf` off the tangent cone of the domain.
    pub fn directional_derivative(&self, z: &Vector, w: &Vector, tol: &Tolerances) -> Result<f64> {
        Error::check_dim(self.m, w.len())?;
        let act = self.active_sets(z, tol)?;
        let wscale = w.norm().max(1.0);
        if act.rows.iter().any(|&i| self.rows[i].0.dot(w) > tol.act * wscale) {
            return Ok(f64::INFINITY);
        }
        Ok(act
            .pieces
            .iter()
            .map(|&j| self.pieces[j].0.dot(w))
            .fold(f64::NEG_INFINITY, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn abs() -> PolyhedralFunction {
        PolyhedralFunction::new(1, vec![(v(&[1.0]), 0.0), (v(&[-1.0]), 0.0)], vec![]).unwrap()
    }

    fn neg_halfline() -> PolyhedralFunction {
        PolyhedralFunction::new(1, vec![(v(&[0.0]), 0.0)], vec![(v(&[1.0]), 0.0)]).unwrap()
    }

    fn max2() -> PolyhedralFunction {
        PolyhedralFunction::new(2, vec![(v(&[1.0, 0.0]), 0.0), (v(&[0.0, 1.0]), 0.0)], vec![]).unwrap()
    }

    #[test]
    fn evaluation() {
        assert_eq!(abs().eval(&v(&[2.0])).unwrap(), 2.0);
        assert_eq!(neg_halfline().eval(&v(&[1.0])).unwrap(), f64::INFINITY);
        assert_eq!(max2().eval(&v(&[3.0, 5.0])).unwrap(), 5.0);
        assert!(abs().eval(&v(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn active_index_sets() {
        let t = Tolerances::default();
        let a = abs().active_sets(&v(&[0.0]), &t).unwrap();
        assert_eq!(a.pieces, vec![0, 1]);
        assert!(a.rows.is_empty());
        let a = neg_halfline().active_sets(&v(&[0.0]), &t).unwrap();
        assert_eq!((a.rows, a.pieces), (vec![0], vec![0]));
        let a = max2().active_sets(&v(&[3.0, 5.0]), &t).unwrap();
        assert_eq!(a.pieces, vec![1]);
        assert!(neg_halfline().active_sets(&v(&[1.0]), &t).is_err());
    }

    #[test]
    fn empty_domain_is_rejected() {
        let r = PolyhedralFunction::new(1, vec![(v(&[0.0]), 0.0)], vec![(v(&[1.0]), -1.0), (v(&[-1.0]), -1.0)]);
        assert!(r.is_err());
    }

    #[test]
    fn subgradient_inequality_on_grid() {
        // oracle: g(y) >= g(0) + v y for every listed subgradient and grid point
        let t = Tolerances::default();
        let g = abs();
        let sd = g.subdifferential(&v(&[0.0]), &t).unwrap();
        for k in -20..=20 {
            let s = k as f64 / 20.0;
            let y_ok = (-10..=10).all(|i| {
                let y = i as f64 * 0.3;
                g.eval(&v(&[y])).unwrap() >= s * y - 1e-12
            });
            assert_eq!(sd.member(&v(&[s])).unwrap(), y_ok, "s = {s}");
        }
        let sd = max2().subdifferential(&v(&[0.0, 0.0]), &t).unwrap();
        assert!(sd.member(&v(&[0.3, 0.7])).unwrap());
        assert!(!sd.member(&v(&[0.5, 0.6])).unwrap());
        let sd = neg_halfline().subdifferential(&v(&[0.0]), &t).unwrap();
        assert!(sd.member(&v(&[12.0])).unwrap());
        assert!(!sd.member(&v(&[-0.1])).unwrap());
    }

    #[test]
    fn critical_cones() {
        let t = Tolerances::default();
        let k = abs().critical_cone(&v(&[0.0]), &v(&[0.0]), &t).unwrap();
        assert!(k.generators().unwrap().is_empty());
        let k = abs().critical_cone(&v(&[0.0]), &v(&[1.0]), &t).unwrap();
        assert_eq!(k.generators().unwrap(), &[v(&[1.0])]);
        let k = neg_halfline().critical_cone(&v(&[0.0]), &v(&[1.0]), &t).unwrap();
        assert!(k.generators().unwrap().is_empty());
        assert!(abs().critical_cone(&v(&[0.0]), &v(&[2.0]), &t).is_err());
    }

    #[test]
    fn critical_cone_matches_directional_derivative() {
        let t = Tolerances::default();
        let g = max2();
        let z = v(&[0.0, 0.0]);
        let lam = v(&[0.25, 0.75]);
        let k = g.critical_cone(&z, &lam, &t).unwrap();
        for i in 0..24 {
            let th = i as f64 * std::f64::consts::PI / 12.0;
            let w = v(&[th.cos(), th.sin()]);
            let on = (g.directional_derivative(&z, &w, &t).unwrap() - lam.dot(&w)).abs() <= 1e-12;
            assert_eq!(k.contains(&w, &t).unwrap(), on);
        }
    }
}

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::tol::Tolerances;

use super::dd::generators_of_halfspaces;

/// A finitely generated closed convex cone in R^dim.
///
/// Either representation may be absent (`None`); an empty list is a real
/// representation (no generators is the cone `{0}`, no halfspaces is R^dim).
/// Each halfspace `h` stands for `<h, x> <= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeRep {
    dim: usize,
    generators: Option<Vec<Vector>>,
    halfspaces: Option<Vec<Vector>>,
}

/// A linear subspace given by an orthonormal basis (columns of `basis`).
#[derive(Debug, Clone, PartialEq)]
pub struct LinSubspace {
    basis: Matrix,
}

/// Normalize to unit length, drop zero vectors and duplicates.
pub(crate) fn canonical_directions(vs: &[Vector]) -> Vec<Vector> {
    let mut out: Vec<Vector> = Vec::with_capacity(vs.len());
    for v in vs {
        let n = v.norm();
        if n <= 1e-12 {
            continue;
        }
        let u = v / n;
        if !out.iter().any(|w| (w - &u).norm() <= 1e-9) {
            out.push(u);
        }
    }
    out
}

fn check_lengths(vs: &[Vector], dim: usize) -> Result<()> {
    for v in vs {
        Error::check_dim(dim, v.len())?;
    }
    Ok(())
}

impl ConeRep {
    pub fn from_generators(dim: usize, generators: Vec<Vector>) -> Result<Self> {
        check_lengths(&generators, dim)?;
        Ok(Self {
            dim,
            generators: Some(canonical_directions(&generators)),
            halfspaces: None,
        })
    }

    pub fn from_halfspaces(dim: usize, halfspaces: Vec<Vector>) -> Result<Self> {
        check_lengths(&halfspaces, dim)?;
        Ok(Self {
            dim,
            generators: None,
            halfspaces: Some(canonical_directions(&halfspaces)),
        })
    }

    /// The trivial cone `{0}`.
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            generators: Some(Vec::new()),
            halfspaces: None,
        }
    }

    /// The whole space.
    pub fn whole(dim: usize) -> Self {
        Self {
            dim,
            generators: None,
            halfspaces: Some(Vec::new()),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generators(&self) -> Option<&[Vector]> {
        self.generators.as_deref()
    }

    pub fn halfspaces(&self) -> Option<&[Vector]> {
        self.halfspaces.as_deref()
    }

    /// Fill whichever representation is missing by double description.
    pub fn dd_convert(&self, tol: &Tolerances) -> Result<ConeRep> {
        if self.generators.is_some() && self.halfspaces.is_some() {
            return Ok(self.clone());
        }
        if self.dim > tol.dd_max_dim {
            return Err(Error::DimensionBound {
                dim: self.dim,
                bound: tol.dd_max_dim,
            });
        }
        match (&self.generators, &self.halfspaces) {
            (Some(g), None) => {
                let h = generators_of_halfspaces(g, self.dim, tol.rank);
                Ok(Self {
                    dim: self.dim,
                    generators: Some(g.clone()),
                    halfspaces: Some(canonical_directions(&h)),
                })
            }
            (None, Some(h)) => {
                let g = generators_of_halfspaces(h, self.dim, tol.rank);
                Ok(Self {
                    dim: self.dim,
                    generators: Some(canonical_directions(&g)),
                    halfspaces: Some(h.clone()),
                })
            }
            _ => Err(Error::InvalidInput("cone has no representation".into())),
        }
    }

    fn generators_filled(&self, tol: &Tolerances) -> Result<Vec<Vector>> {
        match &self.generators {
            Some(g) => Ok(g.clone()),
            None => Ok(self.dd_convert(tol)?.generators.unwrap_or_default()),
        }
    }

    fn halfspaces_filled(&self, tol: &Tolerances) -> Result<Vec<Vector>> {
        match &self.halfspaces {
            Some(h) => Ok(h.clone()),
            None => Ok(self.dd_convert(tol)?.halfspaces.unwrap_or_default()),
        }
    }

    /// Membership; uses the halfspace form when present, an LP otherwise.
    pub fn contains(&self, x: &Vector, tol: &Tolerances) -> Result<bool> {
        Error::check_dim(self.dim, x.len())?;
        let scale = x.norm().max(1.0);
        if let Some(hs) = &self.halfspaces {
            return Ok(hs.iter().all(|h| h.dot(x) <= tol.act * scale));
        }
        let gens = self.generators.as_deref().unwrap_or_default();
        generator_combination_feasible(gens, x)
    }

    /// Membership decided from the generator list by LP, ignoring halfspaces.
    pub fn contains_by_generators(&self, x: &Vector, tol: &Tolerances) -> Result<bool> {
        Error::check_dim(self.dim, x.len())?;
        let gens = self.generators_filled(tol)?;
        generator_combination_feasible(&gens, x)
    }

    /// Polar cone: generators and halfspaces swap roles.
    pub fn polar(&self, tol: &Tolerances) -> Result<ConeRep> {
        let full = self.dd_convert(tol)?;
        Ok(ConeRep {
            dim: self.dim,
            generators: full.halfspaces,
            halfspaces: full.generators,
        })
    }

    /// Linear span of the cone, i.e. `K - K`.
    pub fn span(&self, tol: &Tolerances) -> Result<LinSubspace> {
        let gens = self.generators_filled(tol)?;
        Ok(LinSubspace::span_of(&gens, self.dim, tol.rank))
    }

    /// True when the cone equals its negative.
    pub fn is_subspace(&self, tol: &Tolerances) -> Result<bool> {
        let full = self.dd_convert(tol)?;
        let gens = full.generators.as_deref().unwrap_or_default();
        for g in gens {
            if !full.contains(&(-g), tol)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Normal cone `N_K(w) = {h in K* : <h, w> = 0}` in both forms.
    pub fn normal_cone_at(&self, w: &Vector, tol: &Tolerances) -> Result<ConeRep> {
        Error::check_dim(self.dim, w.len())?;
        let full = self.dd_convert(tol)?;
        if !full.contains(w, tol)? {
            return Err(Error::InvalidInput("normal cone requested at a point outside the cone".into()));
        }
        let mut hs = full.generators.clone().unwrap_or_default();
        hs.push(w.clone());
        hs.push(-w);
        ConeRep::from_halfspaces(self.dim, hs)?.dd_convert(tol)
    }

    /// True iff `K ∩ L = {0}`.
    pub fn meets_subspace_trivially(&self, l: &LinSubspace, tol: &Tolerances) -> Result<bool> {
        Error::check_dim(self.dim, l.ambient())?;
        let mut hs = self.halfspaces_filled(tol)?;
        let comp = l.complement();
        for c in comp.basis.column_iter() {
            let c = c.into_owned();
            hs.push(-&c);
            hs.push(c);
        }
        let both = ConeRep::from_halfspaces(self.dim, hs)?.dd_convert(tol)?;
        Ok(both.generators.as_deref().unwrap_or_default().is_empty())
    }
}

fn generator_combination_feasible(gens: &[Vector], x: &Vector) -> Result<bool> {
    let d = x.len();
    if gens.is_empty() {
        return Ok(x.norm() <= 1e-9 * x.norm().max(1.0));
    }
    let mut lp = LinearProgram::new(gens.len());
    for i in 0..d {
        let row: Vec<f64> = gens.iter().map(|g| g[i]).collect();
        lp.constrain(&row, Relation::Eq, x[i]);
    }
    Ok(lp.solve()? != LpOutcome::Infeasible)
}

impl LinSubspace {
    /// Subspace with the given orthonormal basis columns.
    pub fn from_orthonormal(basis: Matrix) -> Self {
        Self { basis }
    }

    pub fn span_of(vectors: &[Vector], ambient: usize, rank_tol: f64) -> Self {
        let m = linalg::columns(vectors, ambient);
        Self {
            basis: linalg::range_basis(&m, rank_tol),
        }
    }

    pub fn trivial(ambient: usize) -> Self {
        Self {
            basis: Matrix::zeros(ambient, 0),
        }
    }

    pub fn whole(ambient: usize) -> Self {
        Self {
            basis: Matrix::identity(ambient, ambient),
        }
    }

    /// Kernel of a matrix, as a subspace of R^{ncols}.
    pub fn kernel_of(a: &Matrix, rank_tol: f64) -> Self {
        Self {
            basis: linalg::null_space(a, rank_tol),
        }
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &Matrix {
        &self.basis
    }

    pub fn basis_vectors(&self) -> Vec<Vector> {
        self.basis.column_iter().map(|c| c.into_owned()).collect()
    }

    pub fn complement(&self) -> LinSubspace {
        LinSubspace {
            basis: linalg::orthogonal_complement(&self.basis, self.ambient()),
        }
    }

    pub fn projector(&self) -> Matrix {
        linalg::projector(&self.basis)
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        let p = &self.basis * (self.basis.transpose() * x);
        (x - p).norm() <= tol * x.norm().max(1.0)
    }
}

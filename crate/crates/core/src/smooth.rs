//! Smooth maps: exact polynomial maps and a hook for user-supplied maps.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Precondition, Result};
use crate::linalg::{Matrix, Vector};
use crate::polyhedral::PolyhedralFunction;
use crate::tol::Tolerances;

/// A C² map R^n -> R^m with exact first and second derivatives.
pub trait SmoothMap: Send + Sync + fmt::Debug {
    fn n_in(&self) -> usize;
    fn n_out(&self) -> usize;
    fn eval(&self, x: &Vector) -> Vector;
    fn jacobian(&self, x: &Vector) -> Matrix;
    /// One `n x n` Hessian per output component.
    fn hessians(&self, x: &Vector) -> Vec<Matrix>;

    /// `∇²<λ, Φ>(x) = Σ λ_k ∇²Φ_k(x)`.
    fn hessian_lambda(&self, x: &Vector, lambda: &Vector) -> Matrix {
        let mut h = Matrix::zeros(self.n_in(), self.n_in());
        for (k, hk) in self.hessians(x).iter().enumerate() {
            h += hk * lambda[k];
        }
        h
    }
}

/// Sum of `coeff * x^exps` terms.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    n: usize,
    terms: Vec<(f64, Vec<u32>)>,
}

impl Polynomial {
    pub fn new(n: usize, terms: Vec<(f64, Vec<u32>)>) -> Result<Self> {
        for (c, e) in &terms {
            Error::check_dim(n, e.len())?;
            if !c.is_finite() {
                return Err(Error::InvalidInput("non-finite polynomial coefficient".into()));
            }
        }
        Ok(Self { n, terms })
    }

    pub fn zero(n: usize) -> Self {
        Self { n, terms: Vec::new() }
    }

    pub fn n_vars(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> &[(f64, Vec<u32>)] {
        &self.terms
    }

    fn monomial(x: &Vector, e: &[u32]) -> f64 {
        e.iter().enumerate().map(|(i, &p)| x[i].powi(p as i32)).product()
    }

    // d/dx_i of x^e as (factor, reduced exponents)
    fn deriv(e: &[u32], i: usize) -> Option<(f64, Vec<u32>)> {
        if e[i] == 0 {
            return None;
        }
        let mut d = e.to_vec();
        d[i] -= 1;
        Some((e[i] as f64, d))
    }

    pub fn eval(&self, x: &Vector) -> f64 {
        self.terms.iter().map(|(c, e)| c * Self::monomial(x, e)).sum()
    }

    pub fn gradient(&self, x: &Vector) -> Vector {
        let mut g = Vector::zeros(self.n);
        for (c, e) in &self.terms {
            for i in 0..self.n {
                if let Some((f, d)) = Self::deriv(e, i) {
                    g[i] += c * f * Self::monomial(x, &d);
                }
            }
        }
        g
    }

    pub fn hessian(&self, x: &Vector) -> Matrix {
        let mut h = Matrix::zeros(self.n, self.n);
        for (c, e) in &self.terms {
            for i in 0..self.n {
                let Some((fi, di)) = Self::deriv(e, i) else { continue };
                for j in i..self.n {
                    if let Some((fj, dij)) = Self::deriv(&di, j) {
                        let val = c * fi * fj * Self::monomial(x, &dij);
                        h[(i, j)] += val;
                        if i != j {
                            h[(j, i)] += val;
                        }
                    }
                }
            }
        }
        h
    }
}

/// Vector of polynomials R^n -> R^m.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMap {
    n_in: usize,
    components: Vec<Polynomial>,
}

impl PolyMap {
    pub fn new(n_in: usize, components: Vec<Polynomial>) -> Result<Self> {
        for p in &components {
            Error::check_dim(n_in, p.n_vars())?;
        }
        Ok(Self { n_in, components })
    }

    /// `x -> x` on R^n.
    pub fn identity(n: usize) -> Self {
        Self::linear(&Matrix::identity(n, n))
    }

    /// `x -> m x`.
    pub fn linear(m: &Matrix) -> Self {
        let n = m.ncols();
        let components = (0..m.nrows())
            .map(|k| {
                let terms = (0..n)
                    .filter(|&i| m[(k, i)] != 0.0)
                    .map(|i| {
                        let mut e = vec![0; n];
                        e[i] = 1;
                        (m[(k, i)], e)
                    })
                    .collect();
                Polynomial { n, terms }
            })
            .collect();
        Self { n_in: n, components }
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }
}

impl SmoothMap for PolyMap {
    fn n_in(&self) -> usize {
        self.n_in
    }

    fn n_out(&self) -> usize {
        self.components.len()
    }

    fn eval(&self, x: &Vector) -> Vector {
        Vector::from_iterator(self.components.len(), self.components.iter().map(|p| p.eval(x)))
    }

    fn jacobian(&self, x: &Vector) -> Matrix {
        let mut j = Matrix::zeros(self.components.len(), self.n_in);
        for (k, p) in self.components.iter().enumerate() {
            j.set_row(k, &p.gradient(x).transpose());
        }
        j
    }

    fn hessians(&self, x: &Vector) -> Vec<Matrix> {
        self.components.iter().map(|p| p.hessian(x)).collect()
    }
}

type ValueFn = dyn Fn(&Vector) -> Vector + Send + Sync;
type JacFn = dyn Fn(&Vector) -> Matrix + Send + Sync;
type HessFn = dyn Fn(&Vector) -> Vec<Matrix> + Send + Sync;

/// User-supplied smooth map with hand-written derivatives. Library only;
/// the problem-file format does not carry these.
#[derive(Clone)]
pub struct FnMap {
    n_in: usize,
    n_out: usize,
    value: Arc<ValueFn>,
    jac: Arc<JacFn>,
    hess: Arc<HessFn>,
}

impl FnMap {
    pub fn new(
        n_in: usize,
        n_out: usize,
        value: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        jac: impl Fn(&Vector) -> Matrix + Send + Sync + 'static,
        hess: impl Fn(&Vector) -> Vec<Matrix> + Send + Sync + 'static,
    ) -> Self {
        Self {
            n_in,
            n_out,
            value: Arc::new(value),
            jac: Arc::new(jac),
            hess: Arc::new(hess),
        }
    }
}

impl fmt::Debug for FnMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnMap({} -> {})", self.n_in, self.n_out)
    }
}

impl SmoothMap for FnMap {
    fn n_in(&self) -> usize {
        self.n_in
    }
    fn n_out(&self) -> usize {
        self.n_out
    }
    fn eval(&self, x: &Vector) -> Vector {
        (self.value)(x)
    }
    fn jacobian(&self, x: &Vector) -> Matrix {
        (self.jac)(x)
    }
    fn hessians(&self, x: &Vector) -> Vec<Matrix> {
        (self.hess)(x)
    }
}

/// Largest deviations between exact and central-difference derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    pub jacobian_dev: f64,
    pub hessian_dev: f64,
}

/// Central differences: Jacobian from values, Hessians from the exact Jacobian.
pub fn fd_validate(map: &dyn SmoothMap, x: &Vector, h: f64) -> Result<FdReport> {
    Error::check_dim(map.n_in(), x.len())?;
    if !(h > 0.0) {
        return Err(Error::InvalidInput("step must be positive".into()));
    }
    let n = map.n_in();
    let jac = map.jacobian(x);
    let hess = map.hessians(x);
    let mut jdev = 0.0_f64;
    let mut hdev = 0.0_f64;
    for i in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let col = (map.eval(&xp) - map.eval(&xm)) / (2.0 * h);
        jdev = jdev.max((col - jac.column(i)).amax());
        let dj = (map.jacobian(&xp) - map.jacobian(&xm)) / (2.0 * h);
        for (k, hk) in hess.iter().enumerate() {
            for j in 0..n {
                hdev = hdev.max((dj[(k, j)] - hk[(j, i)]).abs());
            }
        }
    }
    Ok(FdReport {
        jacobian_dev: jdev,
        hessian_dev: hdev,
    })
}

/// `φ = g ∘ Φ`, optionally with a certified base pair `v̄ ∈ ∂φ(x̄)`.
#[derive(Debug, Clone)]
pub struct CompositeProblem {
    g: PolyhedralFunction,
    phi: Arc<dyn SmoothMap>,
    base: Option<(Vector, Vector)>,
}

impl CompositeProblem {
    pub fn new(g: PolyhedralFunction, phi: impl SmoothMap + 'static) -> Result<Self> {
        Self::from_arc(g, Arc::new(phi))
    }

    pub fn from_arc(g: PolyhedralFunction, phi: Arc<dyn SmoothMap>) -> Result<Self> {
        Error::check_dim(g.dim(), phi.n_out())?;
        Ok(Self { g, phi, base: None })
    }

    /// Attach `(x̄, v̄)` after checking `v̄ ∈ ∇Φ(x̄)*∂g(Φ(x̄))` by LP.
    pub fn with_base(mut self, x: Vector, v: Vector, tol: &Tolerances) -> Result<Self> {
        Error::check_dim(self.n(), x.len())?;
        Error::check_dim(self.n(), v.len())?;
        if !self.subdifferential(&x, tol)?.member(&v)? {
            return Err(Error::pre(Precondition::NotSubgradient, "v̄ is not a subgradient of φ at x̄"));
        }
        self.base = Some((x, v));
        Ok(self)
    }

    pub fn g(&self) -> &PolyhedralFunction {
        &self.g
    }

    pub fn phi(&self) -> &dyn SmoothMap {
        self.phi.as_ref()
    }

    pub fn phi_arc(&self) -> Arc<dyn SmoothMap> {
        Arc::clone(&self.phi)
    }

    pub fn base(&self) -> Option<(&Vector, &Vector)> {
        self.base.as_ref().map(|(x, v)| (x, v))
    }

    /// Base pair, or a precondition error naming what is missing.
    pub fn require_base(&self) -> Result<(&Vector, &Vector)> {
        self.base()
            .ok_or_else(|| Error::InvalidInput("problem has no base point (x̄, v̄)".into()))
    }

    /// Input dimension n.
    pub fn n(&self) -> usize {
        self.phi.n_in()
    }

    /// Dimension m of the polyhedral argument.
    pub fn m(&self) -> usize {
        self.g.dim()
    }

    /// `φ(x)`, `+inf` outside the domain.
    pub fn value(&self, x: &Vector) -> Result<f64> {
        Error::check_dim(self.n(), x.len())?;
        self.g.eval(&self.phi.eval(x))
    }

    pub fn value_with(&self, x: &Vector, tol: &Tolerances) -> Result<f64> {
        Error::check_dim(self.n(), x.len())?;
        self.g.eval_with(&self.phi.eval(x), tol)
    }

    /// `∇Φ(x)* ∂g(Φ(x))`; equals `∂φ(x)` under BCQ.
    pub fn subdifferential(&self, x: &Vector, tol: &Tolerances) -> Result<crate::polyhedral::PolytopeRep> {
        Error::check_dim(self.n(), x.len())?;
        let z = self.phi.eval(x);
        let sd = self.g.subdifferential(&z, tol)?;
        sd.map(&self.phi.jacobian(x).transpose())
    }

    /// Same problem with `g` replaced by `r g`.
    pub fn scaled(&self, r: f64) -> Self {
        Self {
            g: self.g.scaled(r),
            phi: Arc::clone(&self.phi),
            base: self.base.as_ref().map(|(x, v)| (x.clone(), v * r)),
        }
    }
}

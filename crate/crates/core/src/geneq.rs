//! Stability of solutions to `ū ∈ f(x) + ∂φ(x)`: nondegeneracy, the three
//! metric-regularity criteria, the localization Jacobian and numeric probes.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Precondition, Result};
use crate::kkt::{face_patterns, restore, Inclusion};
use crate::linalg::{self, Matrix, Vector};
use crate::polyhedral::ConeRep;
use crate::second_order::{self, local, NondegeneracyReport};
use crate::smooth::{CompositeProblem, SmoothMap};
use crate::tol::Tolerances;

/// `ū ∈ f(x) + ∂φ(x)` with `f: R^n -> R^n`.
#[derive(Debug, Clone)]
pub struct GeneralizedEquation {
    f: Arc<dyn SmoothMap>,
    cp: CompositeProblem,
    u_bar: Vector,
}

impl GeneralizedEquation {
    pub fn new(f: impl SmoothMap + 'static, cp: CompositeProblem, u_bar: Vector) -> Result<Self> {
        Self::from_arc(Arc::new(f), cp, u_bar)
    }

    pub fn from_arc(f: Arc<dyn SmoothMap>, cp: CompositeProblem, u_bar: Vector) -> Result<Self> {
        Error::check_dim(cp.n(), f.n_in())?;
        Error::check_dim(cp.n(), f.n_out())?;
        Error::check_dim(cp.n(), u_bar.len())?;
        Ok(Self { f, cp, u_bar })
    }

    pub fn f(&self) -> &dyn SmoothMap {
        self.f.as_ref()
    }

    pub fn f_arc(&self) -> Arc<dyn SmoothMap> {
        Arc::clone(&self.f)
    }

    pub fn cp(&self) -> &CompositeProblem {
        &self.cp
    }

    pub fn u_bar(&self) -> &Vector {
        &self.u_bar
    }

    pub fn n(&self) -> usize {
        self.cp.n()
    }

    fn inclusion(&self) -> Inclusion<'_> {
        Inclusion {
            f: self.f.as_ref(),
            cp: &self.cp,
        }
    }

    /// `dist_∞(y, G(x))` with `G = f + ∂φ`; `+inf` outside the domain.
    pub fn residual(&self, y: &Vector, x: &Vector, tol: &Tolerances) -> Result<f64> {
        Error::check_dim(self.n(), y.len())?;
        Error::check_dim(self.n(), x.len())?;
        Ok(self.inclusion().residual(y, x, tol)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionCheck {
    /// `ū - f(x̄)`.
    pub v: Vector,
    pub nondegenerate: bool,
    pub nondegeneracy: NondegeneracyReport,
}

/// `ū - f(x̄) ∈ ∂φ(x̄)` and whether it lies in the relative interior.
pub fn check_solution(ge: &GeneralizedEquation, x: &Vector, tol: &Tolerances) -> Result<SolutionCheck> {
    Error::check_dim(ge.n(), x.len())?;
    let v = &ge.u_bar - ge.f.eval(x);
    let sub = ge.cp.subdifferential(x, tol)?;
    if !sub.member(&v)? {
        return Err(Error::pre(Precondition::NotSolution, "ū - f(x̄) is not in ∂φ(x̄)"));
    }
    let nondegeneracy = second_order::nondegeneracy_check(&ge.cp, x, &v, tol)?;
    Ok(SolutionCheck {
        nondegenerate: nondegeneracy.verdict,
        v,
        nondegeneracy,
    })
}

/// Verdicts of the three equivalent metric-regularity tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MrCriteria {
    /// `w ∈ K̄, A* w ∈ K̄⊥ ⟹ w = 0`.
    pub kernel: bool,
    /// `A K̄ + K̄⊥ = R^n`.
    pub sum: bool,
    /// `B* A B` nonsingular.
    pub reduced: bool,
}

impl MrCriteria {
    pub fn agree(&self) -> bool {
        self.kernel == self.sum && self.sum == self.reduced
    }
}

/// The three tests for a matrix `a` and an orthonormal basis `b` of `K̄`.
pub fn mr_criteria(a: &Matrix, b: &Matrix, tol: &Tolerances) -> Result<MrCriteria> {
    let n = a.nrows();
    Error::check_dim(n, a.ncols())?;
    Error::check_dim(n, b.nrows())?;
    let s = b.ncols();
    let c = linalg::orthogonal_complement(b, n);
    let mut stacked = Matrix::zeros(n, n);
    stacked.view_mut((0, 0), (n - s, n)).copy_from(&c.transpose());
    stacked.view_mut((n - s, 0), (s, n)).copy_from(&(b.transpose() * a.transpose()));
    let kernel = linalg::rank(&stacked, tol.rank) == n;
    let mut sum_m = Matrix::zeros(n, n);
    sum_m.view_mut((0, 0), (n, s)).copy_from(&(a * b));
    sum_m.view_mut((0, s), (n, n - s)).copy_from(&c);
    let sum = linalg::rank(&sum_m, tol.rank) == n;
    let red = b.transpose() * a * b;
    let reduced = s == 0 || linalg::rank(&red, tol.rank) == s;
    Ok(MrCriteria { kernel, sum, reduced })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub nondegenerate: bool,
    pub lambda: Vector,
    /// `∇f(x̄) + ∇²<λ̄, Φ>(x̄)`.
    pub a: Matrix,
    pub k_bar: ConeRep,
    /// Orthonormal basis of `K̄`.
    pub b: Matrix,
    pub criteria: MrCriteria,
    pub mr: bool,
    pub smr: bool,
    /// `B (B* A B)⁻¹ B*`, present iff `mr`.
    pub sigma_jacobian: Option<Matrix>,
}

/// Metric regularity at a nondegenerate solution, by three criteria that must agree.
pub fn mr_check(ge: &GeneralizedEquation, x: &Vector, tol: &Tolerances) -> Result<StabilityReport> {
    let sol = check_solution(ge, x, tol)?;
    if !sol.nondegenerate {
        return Err(Error::pre(Precondition::Degenerate, "the solution is degenerate"));
    }
    let data = second_order::second_order_data(&ge.cp, x, &sol.v, tol)?;
    let a = ge.f.jacobian(x) + &data.hess;
    let k_bar = second_order::pullback_cone(&ge.cp, &data.loc, &data.lambda, tol)?;
    let b = k_bar.span(tol)?.basis().clone();
    let criteria = mr_criteria(&a, &b, tol)?;
    if !criteria.agree() {
        return Err(Error::Inconsistency(format!("metric-regularity criteria disagree: {criteria:?}")));
    }
    let mr = criteria.reduced;
    let sigma_jacobian = if mr { Some(reduced_inverse(&a, &b, tol)?) } else { None };
    Ok(StabilityReport {
        nondegenerate: true,
        lambda: data.lambda,
        a,
        k_bar,
        b,
        criteria,
        mr,
        // metric and strong metric regularity coincide at nondegenerate solutions
        smr: mr,
        sigma_jacobian,
    })
}

/// `B (B* A B)⁻¹ B*`; zero for an empty basis.
pub(crate) fn reduced_inverse(a: &Matrix, b: &Matrix, tol: &Tolerances) -> Result<Matrix> {
    let n = a.nrows();
    if b.ncols() == 0 {
        return Ok(Matrix::zeros(n, n));
    }
    let red = b.transpose() * a * b;
    if linalg::rank(&red, tol.rank) < b.ncols() {
        return Err(Error::Inconsistency("B* A B is singular".into()));
    }
    let inv = red
        .try_inverse()
        .ok_or_else(|| Error::Inconsistency("B* A B is singular".into()))?;
    Ok(b * inv * b.transpose())
}

/// Jacobian of the single-valued localization of the solution mapping at `ū`.
pub fn localization_jacobian(ge: &GeneralizedEquation, x: &Vector, tol: &Tolerances) -> Result<Matrix> {
    let rep = mr_check(ge, x, tol)?;
    rep.sigma_jacobian
        .ok_or_else(|| Error::pre(Precondition::NotMetricallyRegular, "the solution is not metrically regular"))
}

/// A solution of `u ∈ f(x) + ∂φ(x)` nearest to `x0` among those found.
pub fn solve_ge(ge: &GeneralizedEquation, u: &Vector, x0: &Vector, tol: &Tolerances) -> Result<Vector> {
    Error::check_dim(ge.n(), u.len())?;
    Error::check_dim(ge.n(), x0.len())?;
    let found = ge.inclusion().solve_all(u, std::slice::from_ref(x0), tol)?;
    found
        .into_iter()
        .min_by(|a, b| (a - x0).norm().total_cmp(&(b - x0).norm()))
        .ok_or_else(|| Error::SolveFailed(format!("no active pattern converged for u = {:?}", u.as_slice())))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationProbe {
    pub fd_jacobian: Matrix,
    pub formula: Matrix,
    pub deviation: f64,
    /// `max ‖σ(u) - σ(u')‖ / ‖u - u'‖` over sampled and stencil points.
    pub lipschitz: f64,
    pub samples: usize,
}

/// Central differences of `u ↦ σ(u)` with step `radius`, plus random solves.
pub fn localization_probe(
    ge: &GeneralizedEquation,
    x: &Vector,
    radius: f64,
    count: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<LocalizationProbe> {
    let formula = localization_jacobian(ge, x, tol)?;
    let n = ge.n();
    let sigma = |u: &Vector| -> Result<Vector> {
        solve_ge(ge, u, x, tol).map_err(|e| match e {
            Error::SolveFailed(d) => Error::SolveFailed(format!("{d} (radius too large or theorem violated)")),
            e => e,
        })
    };
    let mut fd = Matrix::zeros(n, n);
    let mut pts: Vec<(Vector, Vector)> = vec![(ge.u_bar.clone(), sigma(&ge.u_bar)?)];
    for i in 0..n {
        let mut e = Vector::zeros(n);
        e[i] = radius;
        let up = &ge.u_bar + &e;
        let dn = &ge.u_bar - &e;
        let (sp, sm) = (sigma(&up)?, sigma(&dn)?);
        fd.set_column(i, &((&sp - &sm) / (2.0 * radius)));
        pts.push((up, sp));
        pts.push((dn, sm));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..count {
        let d = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let u = &ge.u_bar + d * (radius / (n as f64).sqrt());
        let s = sigma(&u)?;
        pts.push((u, s));
    }
    let mut lipschitz = 0.0_f64;
    for i in 0..pts.len() {
        for j in 0..i {
            let du = (&pts[i].0 - &pts[j].0).norm();
            if du > 0.0 {
                lipschitz = lipschitz.max((&pts[i].1 - &pts[j].1).norm() / du);
            }
        }
    }
    Ok(LocalizationProbe {
        deviation: linalg::max_abs(&(&fd - &formula)),
        fd_jacobian: fd,
        formula,
        lipschitz,
        samples: pts.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MrEstimateReport {
    pub kappa: f64,
    pub tested: usize,
    pub violations: usize,
    /// Largest `dist(x, S(y)) / dist(y, G(x))` on the test sample.
    pub worst_ratio: f64,
}

// x near x̄ (half restored onto faces through x̄), y near ū
fn estimate_pairs(ge: &GeneralizedEquation, x: &Vector, radius: f64, count: usize, seed: u64, tol: &Tolerances) -> Result<Vec<(Vector, Vector)>> {
    let n = ge.n();
    let loc = local(&ge.cp, x, tol)?;
    let pats = face_patterns(&loc.act.pieces, &loc.act.rows, tol)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ball = |rng: &mut ChaCha8Rng| loop {
        let u = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if u.norm() <= 1.0 {
            return u * radius;
        }
    };
    let mut out = Vec::with_capacity(count);
    let mut k = 0;
    while out.len() < count {
        let mut xs = x + ball(&mut rng);
        if k % 2 == 0 && !pats.is_empty() {
            let p = &pats[rng.random_range(0..pats.len())];
            if let Some(r) = restore(&ge.cp, &xs, p, tol) {
                if (&r - x).norm() <= radius {
                    xs = r;
                }
            }
        }
        let y = &ge.u_bar + ball(&mut rng);
        out.push((xs, y));
        k += 1;
    }
    Ok(out)
}

fn dist_to_solutions(ge: &GeneralizedEquation, xs: &Vector, y: &Vector, x: &Vector, tol: &Tolerances) -> Result<f64> {
    let found = ge.inclusion().solve_all(y, &[xs.clone(), x.clone()], tol)?;
    found
        .iter()
        .map(|s| (s - xs).norm())
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::SolveFailed(format!("S(y) empty near y = {:?}", y.as_slice())))
}

/// Spot check of `dist(x, S(y)) <= κ dist(y, G(x))` near `(x̄, ū)`.
/// `κ` is twice the empirical modulus: the localization Lipschitz constant or the
/// largest ratio on a calibration sample, whichever is larger; the test sample is disjoint.
pub fn mr_estimate_check(
    ge: &GeneralizedEquation,
    x: &Vector,
    radius: f64,
    count: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<MrEstimateReport> {
    let probe = localization_probe(ge, x, radius, 8, seed, tol)?;
    let ratio = |xs: &Vector, y: &Vector| -> Result<Option<f64>> {
        let dy = ge.residual(y, xs, tol)?;
        let dx = dist_to_solutions(ge, xs, y, x, tol)?;
        Ok(if dy.is_infinite() {
            None
        } else if dy == 0.0 {
            Some(if dx <= 1e-12 { 0.0 } else { f64::INFINITY })
        } else {
            Some(dx / dy)
        })
    };
    let mut modulus = probe.lipschitz;
    for (xs, y) in estimate_pairs(ge, x, radius, count, seed ^ 0xCA11_B8A7, tol)? {
        if let Some(r) = ratio(&xs, &y)? {
            modulus = modulus.max(r);
        }
    }
    let kappa = 2.0 * modulus;
    let mut violations = 0;
    let mut worst = 0.0_f64;
    let tested = estimate_pairs(ge, x, radius, count, seed, tol)?;
    for (xs, y) in &tested {
        let dy = ge.residual(y, xs, tol)?;
        if dy.is_infinite() {
            continue;
        }
        let dx = dist_to_solutions(ge, xs, y, x, tol)?;
        if dy > 0.0 {
            worst = worst.max(dx / dy);
        }
        if dx > kappa * dy + 1e-12 {
            violations += 1;
        }
    }
    Ok(MrEstimateReport {
        kappa,
        tested: tested.len(),
        violations,
        worst_ratio: worst,
    })
}

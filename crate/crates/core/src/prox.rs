//! Proximal mapping and Moreau envelope of `φ = g ∘ Φ`, the C¹ test for the
//! prox and its Jacobian, and projection Jacobians onto smooth manifolds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Precondition, Result};
use crate::geneq::reduced_inverse;
use crate::kkt::Inclusion;
use crate::linalg::{self, Matrix, Vector};
use crate::second_order::{self, local};
use crate::smooth::{CompositeProblem, PolyMap};
use crate::tol::Tolerances;

/// `prox_{rφ}` near `x̄ + r v̄`.
#[derive(Debug, Clone)]
pub struct ProxProblem {
    cp: CompositeProblem,
    scaled: CompositeProblem,
    r: f64,
    x_bar: Vector,
    v_bar: Vector,
    rho: f64,
    eps: f64,
}

impl ProxProblem {
    /// Defaults: `ρ = 1`, `ε = 0.5 max(1, ‖(x̄, v̄)‖)`.
    pub fn new(cp: CompositeProblem, r: f64, x_bar: Vector, v_bar: Vector, tol: &Tolerances) -> Result<Self> {
        let scale = (x_bar.norm_squared() + v_bar.norm_squared()).sqrt();
        Self::with_params(cp, r, x_bar, v_bar, 1.0, 0.5 * scale.max(1.0), tol)
    }

    /// `rho` is the prox-regularity bound (`0` for convex `φ`), `eps` the localization radius.
    pub fn with_params(
        cp: CompositeProblem,
        r: f64,
        x_bar: Vector,
        v_bar: Vector,
        rho: f64,
        eps: f64,
        tol: &Tolerances,
    ) -> Result<Self> {
        Error::check_dim(cp.n(), x_bar.len())?;
        Error::check_dim(cp.n(), v_bar.len())?;
        if !(rho >= 0.0) || !(eps > 0.0) {
            return Err(Error::pre(Precondition::ParameterOutOfRange, "need ρ >= 0 and ε > 0"));
        }
        if !(r > 0.0) || r * rho >= 1.0 {
            return Err(Error::pre(
                Precondition::ParameterOutOfRange,
                format!("r = {r} is outside (0, 1/ρ) with ρ = {rho}"),
            ));
        }
        if !cp.subdifferential(&x_bar, tol)?.member(&v_bar)? {
            return Err(Error::pre(Precondition::NotSubgradient, "v̄ is not a subgradient of φ at x̄"));
        }
        if !prox_bounded(&cp, &x_bar, r, tol)? {
            return Err(Error::pre(
                Precondition::NotProxBounded,
                format!("φ decays faster than -‖x‖²/(2r) for r = {r}"),
            ));
        }
        Ok(Self {
            scaled: cp.scaled(r),
            cp,
            r,
            x_bar,
            v_bar,
            rho,
            eps,
        })
    }

    pub fn cp(&self) -> &CompositeProblem {
        &self.cp
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn x_bar(&self) -> &Vector {
        &self.x_bar
    }

    pub fn v_bar(&self) -> &Vector {
        &self.v_bar
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `x̄ + r v̄`.
    pub fn center(&self) -> Vector {
        &self.x_bar + &self.v_bar * self.r
    }

    fn objective(&self, w: &Vector, x: &Vector, tol: &Tolerances) -> f64 {
        let f = self.cp.value_with(w, tol).unwrap_or(f64::INFINITY);
        f + (w - x).norm_squared() / (2.0 * self.r)
    }
}

// liminf φ(x)/‖x‖² > -1/(2r) along sampled rays (infinite values are ignored)
fn prox_bounded(cp: &CompositeProblem, x: &Vector, r: f64, tol: &Tolerances) -> Result<bool> {
    let n = cp.n();
    let mut dirs = Vec::new();
    for i in 0..n {
        let mut e = Vector::zeros(n);
        e[i] = 1.0;
        dirs.push(-&e);
        dirs.push(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..16 {
        let d = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if d.norm() > 1e-3 {
            dirs.push(d.normalize());
        }
    }
    let big = 1e3;
    let worst = dirs
        .iter()
        .filter_map(|d| {
            let f = cp.value_with(&(x + d * big), tol).ok()?;
            f.is_finite().then_some(f / (big * big))
        })
        .fold(f64::INFINITY, f64::min);
    Ok(worst > -1.0 / (2.0 * r))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxResult {
    pub point: Vector,
    pub objective: f64,
    /// `dist_∞((x - p)/r, ∂φ(p))`.
    pub residual: f64,
    /// A certified stationary point outside the localization has a lower objective.
    pub global_differs: bool,
    pub candidates: usize,
}

/// Localized `prox_{rφ}(x)`: the best certified stationary point within `ε` of `x̄`.
pub fn prox_compute(pp: &ProxProblem, x: &Vector, tol: &Tolerances) -> Result<ProxResult> {
    Error::check_dim(pp.cp.n(), x.len())?;
    let c = pp.center();
    if (x - &c).norm() > pp.eps {
        return Err(Error::pre(
            Precondition::OutsideLocalization,
            format!("‖x - (x̄ + r v̄)‖ = {:.3e} exceeds ε = {:.3e}", (x - &c).norm(), pp.eps),
        ));
    }
    let id = PolyMap::identity(pp.cp.n());
    let inc = Inclusion {
        f: &id,
        cp: &pp.scaled,
    };
    let starts = [x.clone(), pp.x_bar.clone(), &pp.x_bar + (x - &c)];
    let found = inc.solve_all(x, &starts, tol)?;
    let scored: Vec<(Vector, f64)> = found
        .into_iter()
        .map(|w| {
            let o = pp.objective(&w, x, tol);
            (w, o)
        })
        .filter(|(_, o)| o.is_finite())
        .collect();
    let candidates = scored.len();
    let local_best = scored
        .iter()
        .filter(|(w, _)| (w - &pp.x_bar).norm() <= pp.eps)
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .cloned();
    let Some((point, objective)) = local_best else {
        return Err(Error::SolveFailed(format!(
            "no certified prox candidate near x̄ for x = {:?}",
            x.as_slice()
        )));
    };
    let global_differs = scored
        .iter()
        .any(|(w, o)| (w - &pp.x_bar).norm() > pp.eps && *o < objective - 1e-12 * (1.0 + objective.abs()));
    let target = (x - &point) / pp.r;
    let loc = local(&pp.cp, &point, tol)?;
    let residual = loc
        .sub_g
        .linf_distance_of_image(&loc.jac.transpose(), &target)?
        .unwrap_or(f64::INFINITY);
    Ok(ProxResult {
        point,
        objective,
        residual,
        global_differs,
        candidates,
    })
}

/// Moreau envelope `e_r φ(x) = min_w φ(w) + ‖w - x‖²/(2r)` (localized).
pub fn moreau_envelope(pp: &ProxProblem, x: &Vector, tol: &Tolerances) -> Result<f64> {
    Ok(prox_compute(pp, x, tol)?.objective)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoreauGradient {
    /// `(x - prox(x)) / r`.
    pub gradient: Vector,
    /// Central differences of the envelope, step `h`.
    pub fd_gradient: Vector,
    pub h: f64,
    pub deviation: f64,
}

pub fn moreau_gradient(pp: &ProxProblem, x: &Vector, tol: &Tolerances) -> Result<MoreauGradient> {
    let p = prox_compute(pp, x, tol)?.point;
    let gradient = (x - p) / pp.r;
    let h = 1e-4;
    let n = pp.cp.n();
    let mut fd = Vector::zeros(n);
    for i in 0..n {
        let mut e = Vector::zeros(n);
        e[i] = h;
        fd[i] = (moreau_envelope(pp, &(x + &e), tol)? - moreau_envelope(pp, &(x - &e), tol)?) / (2.0 * h);
    }
    Ok(MoreauGradient {
        deviation: (&gradient - &fd).amax(),
        gradient,
        fd_gradient: fd,
        h,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum C1Verdict {
    C1,
    NotC1,
    Inconclusive,
}

impl C1Verdict {
    pub fn name(self) -> &'static str {
        match self {
            C1Verdict::C1 => "C1",
            C1Verdict::NotC1 => "notC1",
            C1Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct C1Report {
    pub verdict: C1Verdict,
    /// `v̄ ∈ ri ∂φ(x̄)`.
    pub formula_c1: bool,
    /// Largest Jacobian jump located along the stencil segments.
    pub max_jump: f64,
    pub jump_location: Option<Vector>,
    pub stencil_points: usize,
}

const PROBE_H: f64 = 1e-7;
const BRACKET: f64 = 1e-5;

// FD Jacobian of the prox with a tightened Newton tolerance
fn fd_jacobian(pp: &ProxProblem, x: &Vector, tol: &Tolerances) -> Result<Matrix> {
    let n = pp.cp.n();
    let mut j = Matrix::zeros(n, n);
    for i in 0..n {
        let mut e = Vector::zeros(n);
        e[i] = PROBE_H;
        let a = prox_compute(pp, &(x + &e), tol)?.point;
        let b = prox_compute(pp, &(x - &e), tol)?.point;
        j.set_column(i, &((a - b) / (2.0 * PROBE_H)));
    }
    Ok(j)
}

/// Formula verdict `v̄ ∈ ri ∂φ(x̄)`, corroborated by Jacobian jumps on segments through `x̄ + r v̄`.
pub fn prox_c1_check(pp: &ProxProblem, tol: &Tolerances) -> Result<C1Report> {
    if !second_order::soqc_check(&pp.cp, &pp.x_bar, tol)?.holds {
        return Err(Error::pre(Precondition::Soqc, "second-order qualification condition fails at x̄"));
    }
    let formula_c1 = second_order::nondegeneracy_check(&pp.cp, &pp.x_bar, &pp.v_bar, tol)?.verdict;
    let mut ptol = tol.clone();
    ptol.res = tol.res.min(1e-14);
    let n = pp.cp.n();
    let c = pp.center();
    let half = 0.5 * pp.r;
    let mut dirs: Vec<Vector> = (0..n)
        .map(|i| {
            let mut e = Vector::zeros(n);
            e[i] = 1.0;
            e
        })
        .collect();
    for i in 0..n {
        for k in i + 1..n {
            let mut d = Vector::zeros(n);
            d[i] = 1.0;
            d[k] = 1.0;
            dirs.push(d.normalize());
        }
    }
    const STEPS: usize = 20;
    let ds = 2.0 * half / STEPS as f64;
    let mut max_jump = 0.0_f64;
    let mut jump_location = None;
    let mut stencil_points = 0;
    for d in &dirs {
        // offset keeps stencil points off the center
        let pts: Vec<Vector> = (0..STEPS).map(|k| &c + d * (-half + (k as f64 + 0.37) * ds)).collect();
        let jacs = pts.iter().map(|p| fd_jacobian(pp, p, &ptol)).collect::<Result<Vec<_>>>()?;
        stencil_points += pts.len();
        for k in 0..STEPS - 1 {
            if linalg::max_abs(&(&jacs[k + 1] - &jacs[k])) <= 1e-9 {
                continue;
            }
            let (mut a, mut b) = (0.0, ds);
            let base = &pts[k];
            let (mut ja, mut jb) = (jacs[k].clone(), jacs[k + 1].clone());
            while b - a > BRACKET {
                let m = 0.5 * (a + b);
                let jm = fd_jacobian(pp, &(base + d * m), &ptol)?;
                if linalg::max_abs(&(&jm - &ja)) > linalg::max_abs(&(&jm - &jb)) {
                    b = m;
                    jb = jm;
                } else {
                    a = m;
                    ja = jm;
                }
            }
            let len = b - a;
            let left = fd_jacobian(pp, &(base + d * (a - len)), &ptol)?;
            let right = fd_jacobian(pp, &(base + d * (b + len)), &ptol)?;
            let jump = linalg::max_abs(&(right - left));
            if jump > max_jump {
                max_jump = jump;
                jump_location = Some(base + d * (0.5 * (a + b)));
            }
        }
    }
    let verdict = match (formula_c1, max_jump) {
        (true, j) if j <= tol.jump => C1Verdict::C1,
        (false, j) if j >= 10.0 * tol.jump => C1Verdict::NotC1,
        (true, j) if j >= 10.0 * tol.jump => {
            return Err(Error::Inconsistency(format!("prox should be C1 but a Jacobian jump of {j:.3e} was found")));
        }
        (false, j) if j <= tol.jump => {
            return Err(Error::Inconsistency(format!(
                "prox should have a kink but the largest Jacobian jump is {j:.3e}"
            )));
        }
        _ => C1Verdict::Inconclusive,
    };
    Ok(C1Report {
        verdict,
        formula_c1,
        max_jump,
        jump_location,
        stencil_points,
    })
}

/// `∇prox_{rφ}(x̄ + r v̄) = B (B*(I + r H̄) B)⁻¹ B*` with `B` a basis of `K_φ(x̄, v̄)`.
pub fn prox_jacobian(pp: &ProxProblem, tol: &Tolerances) -> Result<Matrix> {
    let nd = second_order::nondegeneracy_check(&pp.cp, &pp.x_bar, &pp.v_bar, tol)?;
    if !nd.verdict {
        return Err(Error::pre(Precondition::NotC1, "v̄ is not in ri ∂φ(x̄)"));
    }
    let data = second_order::second_order_data(&pp.cp, &pp.x_bar, &pp.v_bar, tol)?;
    let n = pp.cp.n();
    let a = Matrix::identity(n, n) + &data.hess * pp.r;
    let k = second_order::pullback_cone(&pp.cp, &data.loc, &data.lambda, tol)?;
    let b = k.span(tol)?.basis().clone();
    reduced_inverse(&a, &b, tol).map_err(|_| {
        Error::pre(
            Precondition::ParameterOutOfRange,
            format!("B*(I + rH)B is singular; r = {} is not admissible", pp.r),
        )
    })
}

/// Projector onto `ker ∇Φ(x̄)` for `φ = δ_{point} ∘ Φ` with `∇Φ(x̄)` of full row rank.
pub fn manifold_projection_jacobian(cp: &CompositeProblem, x: &Vector, tol: &Tolerances) -> Result<Matrix> {
    Error::check_dim(cp.n(), x.len())?;
    let g = cp.g();
    let m = cp.m();
    let flat = g.pieces().iter().all(|(a, _)| a.amax() == 0.0);
    let normals: Vec<Vector> = g.rows().iter().map(|(b, _)| b.clone()).collect();
    let row_cone = crate::polyhedral::ConeRep::from_generators(m, normals)?.dd_convert(tol)?;
    let pinned = row_cone.is_subspace(tol)? && row_cone.span(tol)?.dim() == m;
    if !flat || !pinned {
        return Err(Error::pre(Precondition::NotManifold, "g is not the indicator of a single point"));
    }
    let z = cp.phi().eval(x);
    if !g.in_domain(&z, tol) {
        return Err(Error::pre(Precondition::NotInDomain, "Φ(x̄) is not the pinned point"));
    }
    let jac = cp.phi().jacobian(x);
    if linalg::rank(&jac, tol.rank) < m {
        return Err(Error::pre(Precondition::NotManifold, "∇Φ(x̄) lacks full row rank"));
    }
    let p = linalg::projector(&linalg::null_space(&jac, tol.rank));
    let pp = ProxProblem::with_params(cp.clone(), 1.0, x.clone(), Vector::zeros(cp.n()), 0.0, 1.0, tol)?;
    let via_prox = prox_jacobian(&pp, tol)?;
    let dev = linalg::max_abs(&(&p - &via_prox));
    if dev > 1e-10 {
        return Err(Error::Inconsistency(format!(
            "projector and prox Jacobian differ by {dev:.3e}"
        )));
    }
    Ok(p)
}

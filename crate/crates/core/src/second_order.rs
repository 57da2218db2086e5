//! Multipliers, qualification conditions, critical cones, nondegeneracy and
//! second-order chain-rule formulas for `φ = g ∘ Φ`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Precondition, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::polyhedral::{ActiveSets, ConeRep, LinSubspace, PolytopeRep};
use crate::smooth::CompositeProblem;
use crate::tol::Tolerances;

/// First-order data of `φ` at a point.
#[derive(Debug, Clone)]
pub(crate) struct Local {
    pub jac: Matrix,
    pub act: ActiveSets,
    pub sub_g: PolytopeRep,
}

pub(crate) fn local(cp: &CompositeProblem, x: &Vector, tol: &Tolerances) -> Result<Local> {
    Error::check_dim(cp.n(), x.len())?;
    let z = cp.phi().eval(x);
    let act = cp.g().active_sets(&z, tol)?;
    let sub_g = cp.g().subdifferential_of(&act);
    Ok(Local {
        jac: cp.phi().jacobian(x),
        act,
        sub_g,
    })
}

/// `Λ(x, v)` as a polytope in R^m.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierSet {
    pub set: PolytopeRep,
}

impl MultiplierSet {
    pub fn is_empty(&self) -> bool {
        self.set.is_empty()
    }

    pub fn is_singleton(&self) -> bool {
        self.set.is_singleton()
    }

    pub fn unique(&self) -> Option<&Vector> {
        if self.is_singleton() {
            self.set.points().first()
        } else {
            None
        }
    }

    /// Some multiplier (a vertex), if the set is nonempty.
    pub fn any(&self) -> Option<&Vector> {
        self.set.points().first()
    }

    /// The unique multiplier, or a named refusal.
    pub fn require_unique(&self) -> Result<&Vector> {
        if self.is_empty() {
            return Err(Error::pre(Precondition::NoMultiplier, "Λ(x, v) is empty"));
        }
        self.unique()
            .ok_or_else(|| Error::pre(Precondition::MultiplierNotUnique, "Λ(x, v) is not a singleton"))
    }
}

/// Solve `{λ ∈ ∂g(Φ(x)) : ∇Φ(x)* λ = v}` by double description on the lifted cone
/// `cone{(a_j, 1), (b_i, 0)} ∩ {(λ, s) : ∇Φ(x)* λ = s v}`.
pub fn lagrange_multipliers(cp: &CompositeProblem, x: &Vector, v: &Vector, tol: &Tolerances) -> Result<MultiplierSet> {
    Error::check_dim(cp.n(), v.len())?;
    let loc = local(cp, x, tol)?;
    multipliers_at(&loc, v, cp.m(), tol)
}

pub(crate) fn multipliers_at(loc: &Local, v: &Vector, m: usize, tol: &Tolerances) -> Result<MultiplierSet> {
    let d = m + 1;
    let lift = |u: &Vector, s: f64| {
        let mut w = Vector::zeros(d);
        w.rows_mut(0, m).copy_from(u);
        w[m] = s;
        w
    };
    let mut gens: Vec<Vector> = loc.sub_g.points().iter().map(|a| lift(a, 1.0)).collect();
    gens.extend(loc.sub_g.rays().iter().map(|b| lift(b, 0.0)));
    let cone = ConeRep::from_generators(d, gens)?.dd_convert(tol)?;
    let mut hs = cone.halfspaces().unwrap_or_default().to_vec();
    for k in 0..loc.jac.ncols() {
        let row = lift(&loc.jac.column(k).into_owned(), -v[k]);
        hs.push(-&row);
        hs.push(row);
    }
    let cut = ConeRep::from_halfspaces(d, hs)?.dd_convert(tol)?;
    let mut points = Vec::new();
    let mut rays = Vec::new();
    for g in cut.generators().unwrap_or_default() {
        let s = g[m];
        let lam = g.rows(0, m).into_owned();
        if s > 1e-10 * g.norm() {
            points.push(lam / s);
        } else if lam.norm() > 1e-12 {
            rays.push(lam);
        }
    }
    if points.is_empty() {
        return Ok(MultiplierSet {
            set: PolytopeRep::empty(m),
        });
    }
    // DD generators are unit-normalized; polish points back onto the affine constraints
    let points = points
        .into_iter()
        .map(|p| {
            let r = loc.jac.transpose() * &p - v;
            if r.amax() <= 1e-9 * v.amax().max(1.0) {
                Ok(p)
            } else {
                Err(Error::Inconsistency(format!("multiplier residual {:.3e}", r.amax())))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiplierSet {
        set: PolytopeRep::new(m, points, rays)?,
    })
}

/// Outcome of the second-order qualification test.
#[derive(Debug, Clone, PartialEq)]
pub struct SoqcReport {
    pub holds: bool,
    /// `S = span{a_i - a_j : i, j ∈ J} + span{b_i : i ∈ I}`.
    pub subspace: LinSubspace,
    /// Nonzero vector of `S ∩ ker ∇Φ(x)*` when the test fails.
    pub certificate: Option<Vector>,
}

fn affine_hull_subspace(loc: &Local, m: usize, rank_tol: f64) -> LinSubspace {
    let pts = loc.sub_g.points();
    let mut dirs: Vec<Vector> = pts.iter().skip(1).map(|a| a - &pts[0]).collect();
    dirs.extend(loc.sub_g.rays().iter().cloned());
    LinSubspace::span_of(&dirs, m, rank_tol)
}

pub fn soqc_check(cp: &CompositeProblem, x: &Vector, tol: &Tolerances) -> Result<SoqcReport> {
    let loc = local(cp, x, tol)?;
    Ok(soqc_at(&loc, cp.m(), tol))
}

pub(crate) fn soqc_at(loc: &Local, m: usize, tol: &Tolerances) -> SoqcReport {
    let s = affine_hull_subspace(loc, m, tol.rank);
    let k = s.dim();
    if k == 0 {
        return SoqcReport {
            holds: true,
            subspace: s,
            certificate: None,
        };
    }
    let prod = loc.jac.transpose() * s.basis();
    let r = linalg::rank(&prod, tol.rank);
    if r == k {
        return SoqcReport {
            holds: true,
            subspace: s,
            certificate: None,
        };
    }
    let null = linalg::null_space(&prod, tol.rank);
    let cert = s.basis() * null.column(0);
    SoqcReport {
        holds: false,
        subspace: s,
        certificate: Some(cert),
    }
}

/// `cone{b_i : i ∈ I(Φ(x))} ∩ ker ∇Φ(x)* = {0}`.
pub fn bcq_check(cp: &CompositeProblem, x: &Vector, tol: &Tolerances) -> Result<bool> {
    let loc = local(cp, x, tol)?;
    bcq_at(&loc, cp.m(), tol)
}

pub(crate) fn bcq_at(loc: &Local, m: usize, tol: &Tolerances) -> Result<bool> {
    if loc.sub_g.rays().is_empty() {
        return Ok(true);
    }
    let normals = ConeRep::from_generators(m, loc.sub_g.rays().to_vec())?;
    let ker = LinSubspace::kernel_of(&loc.jac.transpose(), tol.rank);
    normals.meets_subspace_trivially(&ker, tol)
}

/// Pullback `{w : ∇Φ(x) w ∈ K_g(Φ(x), λ)}`, both representations.
pub(crate) fn pullback_cone(cp: &CompositeProblem, loc: &Local, lambda: &Vector, tol: &Tolerances) -> Result<ConeRep> {
    let kg = cp.g().critical_cone_of(&loc.act, lambda);
    let jt = loc.jac.transpose();
    let hs: Vec<Vector> = kg.halfspaces().unwrap_or_default().iter().map(|h| &jt * h).collect();
    ConeRep::from_halfspaces(cp.n(), hs)?.dd_convert(tol)
}

/// `K_φ(x, v)` as the pullback of `K_g(Φ(x), λ)` through `∇Φ(x)`.
pub fn critical_cone_phi(
    cp: &CompositeProblem,
    x: &Vector,
    v: &Vector,
    lambda: &Vector,
    tol: &Tolerances,
) -> Result<ConeRep> {
    Error::check_dim(cp.m(), lambda.len())?;
    Error::check_dim(cp.n(), v.len())?;
    let loc = local(cp, x, tol)?;
    check_multiplier(&loc, v, lambda, tol)?;
    if !bcq_at(&loc, cp.m(), tol)? {
        return Err(Error::pre(Precondition::Bcq, "basic constraint qualification fails"));
    }
    pullback_cone(cp, &loc, lambda, tol)
}

fn check_multiplier(loc: &Local, v: &Vector, lambda: &Vector, tol: &Tolerances) -> Result<()> {
    let res = (loc.jac.transpose() * lambda - v).amax();
    if res > tol.cert * v.amax().max(1.0) || !loc.sub_g.member(lambda)? {
        return Err(Error::pre(Precondition::NoMultiplier, "λ is not in Λ(x, v)"));
    }
    Ok(())
}

/// The three nondegeneracy tests and their common verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct NondegeneracyReport {
    /// `v ∈ ri ∇Φ(x)*∂g(Φ(x))`.
    pub ri_subdifferential: bool,
    /// `λ ∈ ri ∂g(Φ(x))` (for a non-unique multiplier: some λ ∈ Λ(x, v) is).
    pub ri_multiplier: bool,
    /// `K_φ(x, v)` is a linear subspace.
    pub subspace_cone: bool,
    pub verdict: bool,
    /// Optimal epsilon of the ri LP for test (i).
    pub margin: f64,
}

pub fn nondegeneracy_check(cp: &CompositeProblem, x: &Vector, v: &Vector, tol: &Tolerances) -> Result<NondegeneracyReport> {
    Error::check_dim(cp.n(), v.len())?;
    let loc = local(cp, x, tol)?;
    let mults = multipliers_at(&loc, v, cp.m(), tol)?;
    let Some(lambda) = mults.any().cloned() else {
        return Err(Error::pre(Precondition::NoMultiplier, "v is not in ∂φ(x)"));
    };
    let sub_phi = loc.sub_g.map(&loc.jac.transpose())?;
    let margin = sub_phi.ri_margin(v)?.unwrap_or(0.0);
    let t1 = margin > tol.ri;
    let t2 = match mults.unique() {
        Some(l) => loc.sub_g.ri_member(l, tol)?,
        None => exists_ri_multiplier(&loc, v, tol)?,
    };
    let t3 = pullback_cone(cp, &loc, &lambda, tol)?.is_subspace(tol)?;
    if t1 != t2 || t2 != t3 {
        return Err(Error::Inconsistency(format!(
            "nondegeneracy tests disagree: ri ∂φ = {t1}, ri ∂g = {t2}, K_φ subspace = {t3}"
        )));
    }
    Ok(NondegeneracyReport {
        ri_subdifferential: t1,
        ri_multiplier: t2,
        subspace_cone: t3,
        verdict: t1,
        margin,
    })
}

// max eps s.t. λ = Σ μ_j a_j + Σ ν_i b_i, μ, ν >= eps, Σ μ = 1, ∇Φ* λ = v
fn exists_ri_multiplier(loc: &Local, v: &Vector, tol: &Tolerances) -> Result<bool> {
    use crate::lp::{LinearProgram, LpOutcome, Relation};
    let pts = loc.sub_g.points();
    let rays = loc.sub_g.rays();
    let p = pts.len();
    let q = rays.len();
    let e = p + q;
    let nv = e + 1;
    let jt = loc.jac.transpose();
    let mp: Vec<Vector> = pts.iter().map(|a| &jt * a).collect();
    let mr: Vec<Vector> = rays.iter().map(|b| &jt * b).collect();
    let mut lp = LinearProgram::new(nv);
    for k in 0..v.len() {
        let mut row = vec![0.0; nv];
        for j in 0..p {
            row[j] = mp[j][k];
        }
        for i in 0..q {
            row[p + i] = mr[i][k];
        }
        lp.constrain(&row, Relation::Eq, v[k]);
    }
    let mut row = vec![0.0; nv];
    row[..p].iter_mut().for_each(|x| *x = 1.0);
    lp.constrain(&row, Relation::Eq, 1.0);
    for j in 0..e {
        let mut row = vec![0.0; nv];
        row[j] = 1.0;
        row[e] = -1.0;
        lp.constrain(&row, Relation::Ge, 0.0);
    }
    let mut row = vec![0.0; nv];
    row[e] = 1.0;
    lp.constrain(&row, Relation::Le, 1.0);
    let mut c = vec![0.0; nv];
    c[e] = 1.0;
    lp.maximize(&c);
    Ok(match lp.solve()? {
        LpOutcome::Optimal { value, .. } => value > tol.ri,
        _ => false,
    })
}

/// Data shared by the second-order formulas at a base pair.
#[derive(Debug, Clone)]
pub(crate) struct SecondOrderData {
    pub loc: Local,
    pub lambda: Vector,
    pub hess: Matrix,
    pub kg: ConeRep,
}

/// Refuses unless SOQC holds and the multiplier is unique.
pub(crate) fn second_order_data(cp: &CompositeProblem, x: &Vector, v: &Vector, tol: &Tolerances) -> Result<SecondOrderData> {
    Error::check_dim(cp.n(), v.len())?;
    let loc = local(cp, x, tol)?;
    let soqc = soqc_at(&loc, cp.m(), tol);
    if !soqc.holds {
        return Err(Error::pre(Precondition::Soqc, "second-order qualification condition fails"));
    }
    let mults = multipliers_at(&loc, v, cp.m(), tol)?;
    let lambda = mults.require_unique()?.clone();
    let hess = cp.phi().hessian_lambda(x, &lambda);
    let kg = cp.g().critical_cone_of(&loc.act, &lambda).dd_convert(tol)?;
    Ok(SecondOrderData {
        loc,
        lambda,
        hess,
        kg,
    })
}

/// `d²φ(x, v)(w) = <λ, ∇²Φ(x)(w, w)> + δ_{K_g}(∇Φ(x) w)`.
pub fn second_subderivative(cp: &CompositeProblem, x: &Vector, v: &Vector, w: &Vector, tol: &Tolerances) -> Result<f64> {
    Error::check_dim(cp.n(), w.len())?;
    let d = second_order_data(cp, x, v, tol)?;
    Ok(d2_value(&d, w, tol))
}

pub(crate) fn d2_value(d: &SecondOrderData, w: &Vector, tol: &Tolerances) -> f64 {
    let jw = &d.loc.jac * w;
    if d.kg.contains(&jw, tol).unwrap_or(false) {
        w.dot(&(&d.hess * w))
    } else {
        f64::INFINITY
    }
}

/// `d²_s φ(x̄, v̄)(w)`: the same quadratic form on the pullback of `span K_g`.
pub fn strict_second_subderivative(
    cp: &CompositeProblem,
    x: &Vector,
    v: &Vector,
    w: &Vector,
    tol: &Tolerances,
) -> Result<f64> {
    Error::check_dim(cp.n(), w.len())?;
    let d = second_order_data(cp, x, v, tol)?;
    strict_d2_value(&d, w, tol)
}

pub(crate) fn strict_d2_value(d: &SecondOrderData, w: &Vector, tol: &Tolerances) -> Result<f64> {
    let span = d.kg.span(tol)?;
    let jw = &d.loc.jac * w;
    Ok(if span.contains(&jw, tol.act) {
        w.dot(&(&d.hess * w))
    } else {
        f64::INFINITY
    })
}

/// Orthonormal basis of `{w : ∇Φ(x̄) w ∈ span K_g}`.
pub(crate) fn strict_domain(d: &SecondOrderData, n: usize, tol: &Tolerances) -> Result<Matrix> {
    let span = d.kg.span(tol)?;
    let comp = span.complement();
    if comp.dim() == 0 {
        return Ok(Matrix::identity(n, n));
    }
    Ok(linalg::null_space(&(comp.basis().transpose() * &d.loc.jac), tol.rank))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthVerdict {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub verdict: GrowthVerdict,
    /// Smallest eigenvalue of the reduced form when the verdict holds on a nontrivial subspace.
    pub modulus: Option<f64>,
    pub min_eigenvalue: f64,
    pub reduced_dim: usize,
}

/// Positivity of `<λ̄, ∇²Φ(x̄)(w, w)>` on `{w : ∇Φ(x̄) w ∈ span K_g}`.
pub fn quadratic_growth_check(cp: &CompositeProblem, x: &Vector, v: &Vector, tol: &Tolerances) -> Result<GrowthReport> {
    let d = second_order_data(cp, x, v, tol)?;
    let w = strict_domain(&d, cp.n(), tol)?;
    let reduced = w.transpose() * &d.hess * &w;
    let e = linalg::sym_min_eigenvalue(&reduced);
    let (verdict, modulus) = if w.ncols() == 0 {
        (GrowthVerdict::Holds, None)
    } else if e > tol.eig {
        (GrowthVerdict::Holds, Some(e))
    } else if e <= -tol.eig {
        (GrowthVerdict::Fails, None)
    } else {
        (GrowthVerdict::Inconclusive, None)
    };
    Ok(GrowthReport {
        verdict,
        modulus,
        min_eigenvalue: e,
        reduced_dim: w.ncols(),
    })
}

/// Parameters of the sampled probes around a base pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    pub radius: f64,
    pub count: usize,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            radius: 1e-2,
            count: 24,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrictTepiReport {
    pub verdict: bool,
    /// Sampled pairs whose critical cone was compared (only when the verdict holds).
    pub probed: usize,
    pub cone_mismatches: usize,
}

fn same_cone(a: &ConeRep, b: &ConeRep, tol: &Tolerances) -> Result<bool> {
    for g in a.generators().unwrap_or_default() {
        if !b.contains(g, tol)? {
            return Ok(false);
        }
    }
    for g in b.generators().unwrap_or_default() {
        if !a.contains(g, tol)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Strict twice epi-differentiability verdict plus the critical-cone stability probe.
pub fn strict_tepi_check(
    cp: &CompositeProblem,
    x: &Vector,
    v: &Vector,
    probe: &ProbeConfig,
    tol: &Tolerances,
) -> Result<StrictTepiReport> {
    let d = second_order_data(cp, x, v, tol)?;
    let verdict = nondegeneracy_check(cp, x, v, tol)?.verdict;
    if !verdict {
        return Ok(StrictTepiReport {
            verdict,
            probed: 0,
            cone_mismatches: 0,
        });
    }
    let sample = crate::epi_oracle::sample_gph(cp, x, v, probe.radius, probe.count, probe.seed, tol)?;
    let mut probed = 0;
    let mut mismatches = 0;
    for (xs, vs) in &sample.pairs {
        if (xs - x).norm() > probe.radius || (vs - v).norm() > probe.radius {
            continue;
        }
        let loc = local(cp, xs, tol)?;
        let mults = multipliers_at(&loc, vs, cp.m(), tol)?;
        let Some(lam) = mults.any() else { continue };
        let k = cp.g().critical_cone_of(&loc.act, lam).dd_convert(tol)?;
        probed += 1;
        if !same_cone(&k, &d.kg, tol)? {
            mismatches += 1;
        }
    }
    if mismatches > 0 {
        return Err(Error::Inconsistency(format!(
            "critical cone changed at {mismatches} of {probed} sampled pairs despite nondegeneracy"
        )));
    }
    Ok(StrictTepiReport {
        verdict,
        probed,
        cone_mismatches: mismatches,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphRegularityReport {
    /// `dom D(∂φ)(x̄, v̄) = dom D*(∂φ)(x̄, v̄)`.
    pub regular: bool,
    /// `dom D(∂φ) = K_φ(x̄, v̄)`.
    pub derivative_domain: ConeRep,
    /// `dom D*(∂φ) = {w : ∇Φ(x̄) w ∈ K_g - K_g}`.
    pub coderivative_domain: LinSubspace,
    pub sampled: usize,
    pub mismatches: usize,
}

/// Compare graphical derivative and coderivative of `∂φ` through their domains.
pub fn graph_regularity_report(cp: &CompositeProblem, x: &Vector, v: &Vector, tol: &Tolerances) -> Result<GraphRegularityReport> {
    let d = second_order_data(cp, x, v, tol)?;
    let kphi = pullback_cone(cp, &d.loc, &d.lambda, tol)?;
    let dstar = LinSubspace::from_orthonormal(strict_domain(&d, cp.n(), tol)?);
    let mut samples: Vec<Vector> = Vec::new();
    for b in dstar.basis_vectors() {
        samples.push(-&b);
        samples.push(b);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..8 {
        if dstar.dim() == 0 {
            break;
        }
        let y = Vector::from_fn(dstar.dim(), |_, _| rng.random_range(-1.0..1.0));
        samples.push(dstar.basis() * y);
    }
    let mut mismatches = 0;
    for w in &samples {
        if !kphi.contains(w, tol)? {
            mismatches += 1;
        }
    }
    let regular = mismatches == 0;
    let nd = nondegeneracy_check(cp, x, v, tol)?.verdict;
    if nd != regular {
        return Err(Error::Inconsistency(format!(
            "graph regularity ({regular}) disagrees with nondegeneracy ({nd})"
        )));
    }
    Ok(GraphRegularityReport {
        regular,
        derivative_domain: kphi,
        coderivative_domain: dstar,
        sampled: samples.len(),
        mismatches,
    })
}

/// `γ̄ = 1 / σ_min(∇Φ(x̄)* restricted to S)`; 0 when `S = {0}`.
pub fn mr_modulus_gamma(cp: &CompositeProblem, x: &Vector, tol: &Tolerances) -> Result<f64> {
    let loc = local(cp, x, tol)?;
    let s = soqc_at(&loc, cp.m(), tol);
    if !s.holds {
        return Err(Error::pre(Precondition::Soqc, "γ̄ is infinite without SOQC"));
    }
    if s.subspace.dim() == 0 {
        return Ok(0.0);
    }
    let sig = linalg::sigma_min(&(loc.jac.transpose() * s.subspace.basis()));
    Ok(1.0 / sig)
}

/// Everything `analyze` reports at a base pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrderReport {
    pub soqc: SoqcReport,
    pub bcq: bool,
    pub multipliers: MultiplierSet,
    pub critical_cone: Option<ConeRep>,
    pub nondegeneracy: Option<NondegeneracyReport>,
    pub gamma_bar: Option<f64>,
    pub growth: Option<GrowthReport>,
}

pub fn analyze(cp: &CompositeProblem, x: &Vector, v: &Vector, tol: &Tolerances) -> Result<SecondOrderReport> {
    Error::check_dim(cp.n(), v.len())?;
    let loc = local(cp, x, tol)?;
    let soqc = soqc_at(&loc, cp.m(), tol);
    let bcq = bcq_at(&loc, cp.m(), tol)?;
    let multipliers = multipliers_at(&loc, v, cp.m(), tol)?;
    let critical_cone = match multipliers.any() {
        Some(l) if bcq => Some(pullback_cone(cp, &loc, l, tol)?),
        _ => None,
    };
    let nondegeneracy = if multipliers.is_empty() {
        None
    } else {
        Some(nondegeneracy_check(cp, x, v, tol)?)
    };
    let gamma_bar = if soqc.holds { Some(mr_modulus_gamma(cp, x, tol)?) } else { None };
    let growth = if soqc.holds && multipliers.is_singleton() {
        Some(quadratic_growth_check(cp, x, v, tol)?)
    } else {
        None
    };
    Ok(SecondOrderReport {
        soqc,
        bcq,
        multipliers,
        critical_cone,
        nondegeneracy,
        gamma_bar,
        growth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::polyhedral::PolyhedralFunction;
    use crate::smooth::PolyMap;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn lin(rows: usize, cols: usize, data: &[f64]) -> PolyMap {
        PolyMap::linear(&Matrix::from_row_slice(rows, cols, data))
    }

    fn cp(g: PolyhedralFunction, phi: PolyMap) -> CompositeProblem {
        CompositeProblem::new(g, phi).unwrap()
    }

    fn max2() -> PolyhedralFunction {
        PolyhedralFunction::new(2, vec![(v(&[1.0, 0.0]), 0.0), (v(&[0.0, 1.0]), 0.0)], vec![]).unwrap()
    }

    #[test]
    fn multiplier_sets() {
        let t = Tolerances::default();
        let m = lagrange_multipliers(&catalog::abs(), &v(&[0.0]), &v(&[0.5]), &t).unwrap();
        assert!((m.unique().unwrap()[0] - 0.5).abs() < 1e-12);
        let orth = cp(catalog::nonpositive_orthant(2), PolyMap::identity(2));
        let m = lagrange_multipliers(&orth, &v(&[0.0, 0.0]), &v(&[1.0, 2.0]), &t).unwrap();
        assert!((m.unique().unwrap() - v(&[1.0, 2.0])).amax() < 1e-12);
        let diag = cp(catalog::nonpositive_orthant(2), lin(2, 1, &[1.0, 1.0]));
        let m = lagrange_multipliers(&diag, &v(&[0.0]), &v(&[1.0]), &t).unwrap();
        assert!(!m.is_singleton() && !m.is_empty());
        for p in [v(&[1.0, 0.0]), v(&[0.0, 1.0]), v(&[0.3, 0.7])] {
            assert!(m.set.member(&p).unwrap());
        }
        assert!(!m.set.member(&v(&[0.6, 0.6])).unwrap());
        assert!(matches!(m.require_unique(), Err(Error::Precondition(Precondition::MultiplierNotUnique, _))));
        let m = lagrange_multipliers(&catalog::abs(), &v(&[0.0]), &v(&[2.0]), &t).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn qualification_conditions() {
        let t = Tolerances::default();
        let minimax = cp(max2(), lin(2, 1, &[1.0, -1.0]));
        assert!(soqc_check(&minimax, &v(&[0.0]), &t).unwrap().holds);
        let orth = cp(catalog::nonpositive_orthant(2), PolyMap::identity(2));
        assert!(soqc_check(&orth, &v(&[0.0, 0.0]), &t).unwrap().holds);
        let diag = cp(catalog::nonpositive_orthant(2), lin(2, 1, &[1.0, 1.0]));
        let s = soqc_check(&diag, &v(&[0.0]), &t).unwrap();
        assert!(!s.holds);
        let c = s.certificate.unwrap();
        assert!((c[0] + c[1]).abs() < 1e-12 && c.norm() > 0.5);

        assert!(bcq_check(&catalog::halfline(), &v(&[0.0]), &t).unwrap());
        let anti = cp(catalog::nonpositive_orthant(2), lin(2, 1, &[1.0, -1.0]));
        assert!(!bcq_check(&anti, &v(&[0.0]), &t).unwrap());
        assert!(bcq_check(&catalog::abs(), &v(&[0.0]), &t).unwrap());
    }

    #[test]
    fn critical_cones_of_phi() {
        let t = Tolerances::default();
        let k = critical_cone_phi(&catalog::abs(), &v(&[0.0]), &v(&[0.0]), &v(&[0.0]), &t).unwrap();
        assert!(k.generators().unwrap().is_empty());
        let k = critical_cone_phi(&catalog::abs(), &v(&[0.0]), &v(&[1.0]), &v(&[1.0]), &t).unwrap();
        assert!(k.contains(&v(&[3.0]), &t).unwrap() && !k.contains(&v(&[-1.0]), &t).unwrap());
        let k = critical_cone_phi(&catalog::circle(), &v(&[1.0, 0.0]), &v(&[0.0, 0.0]), &v(&[0.0]), &t).unwrap();
        assert!(k.is_subspace(&t).unwrap());
        assert_eq!(k.span(&t).unwrap().dim(), 1);
        assert!(k.contains(&v(&[0.0, -2.0]), &t).unwrap() && !k.contains(&v(&[1.0, 0.0]), &t).unwrap());
        let e = critical_cone_phi(&catalog::abs(), &v(&[0.0]), &v(&[1.0]), &v(&[0.5]), &t).unwrap_err();
        assert!(matches!(e, Error::Precondition(Precondition::NoMultiplier, _)));
    }

    #[test]
    fn nondegeneracy_examples() {
        let t = Tolerances::default();
        assert!(nondegeneracy_check(&catalog::abs(), &v(&[0.0]), &v(&[0.0]), &t).unwrap().verdict);
        assert!(!nondegeneracy_check(&catalog::abs(), &v(&[0.0]), &v(&[1.0]), &t).unwrap().verdict);
        assert!(nondegeneracy_check(&catalog::circle(), &v(&[1.0, 0.0]), &v(&[1.0, 0.0]), &t).unwrap().verdict);
        for i in catalog::instances() {
            let r = nondegeneracy_check(&i.cp, &i.x, &i.v, &t).unwrap();
            assert!(r.ri_subdifferential == r.ri_multiplier && r.ri_multiplier == r.subspace_cone, "{}", i.name);
        }
        // non-unique multipliers: (0.5, 0.5) lies in ri R²₊
        let diag = cp(catalog::nonpositive_orthant(2), lin(2, 1, &[1.0, 1.0]));
        assert!(nondegeneracy_check(&diag, &v(&[0.0]), &v(&[1.0]), &t).unwrap().verdict);
        assert!(!nondegeneracy_check(&diag, &v(&[0.0]), &v(&[0.0]), &t).unwrap().verdict);
    }

    #[test]
    fn second_subderivative_formulas() {
        let t = Tolerances::default();
        let d = second_subderivative(&catalog::abs(), &v(&[0.0]), &v(&[0.5]), &v(&[1.0]), &t).unwrap();
        assert_eq!(d, f64::INFINITY);
        let d = second_subderivative(&catalog::abs_quadratic(), &v(&[0.0]), &v(&[-1.0]), &v(&[-1.0]), &t).unwrap();
        assert!((d - 2.0).abs() < 1e-12);
        let d = second_subderivative(&catalog::abs_quadratic(), &v(&[0.0]), &v(&[-1.0]), &v(&[1.0]), &t).unwrap();
        assert_eq!(d, f64::INFINITY);
        for i in catalog::instances() {
            let w = Vector::zeros(i.cp.n());
            assert_eq!(second_subderivative(&i.cp, &i.x, &i.v, &w, &t).unwrap(), 0.0, "{}", i.name);
            assert_eq!(strict_second_subderivative(&i.cp, &i.x, &i.v, &w, &t).unwrap(), 0.0, "{}", i.name);
        }
        let s = strict_second_subderivative(&catalog::abs_quadratic(), &v(&[0.0]), &v(&[-1.0]), &v(&[1.0]), &t).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
        let s = strict_second_subderivative(&catalog::abs(), &v(&[0.0]), &v(&[0.0]), &v(&[1.0]), &t).unwrap();
        assert_eq!(s, f64::INFINITY);
        let diag = cp(catalog::nonpositive_orthant(2), lin(2, 1, &[1.0, 1.0]));
        let e = second_subderivative(&diag, &v(&[0.0]), &v(&[1.0]), &v(&[1.0]), &t).unwrap_err();
        assert!(matches!(e, Error::Precondition(Precondition::Soqc, _)));
    }

    #[test]
    fn strict_dominates_on_a_larger_domain() {
        let t = Tolerances::default();
        for i in catalog::instances() {
            for k in 0..16 {
                let th = k as f64 * std::f64::consts::PI / 8.0;
                let w = if i.cp.n() == 1 { v(&[th.cos()]) } else { v(&[th.cos(), th.sin()]) };
                let d = second_subderivative(&i.cp, &i.x, &i.v, &w, &t).unwrap();
                let s = strict_second_subderivative(&i.cp, &i.x, &i.v, &w, &t).unwrap();
                assert!(s <= d, "{}", i.name);
                if d.is_finite() {
                    assert!((s - d).abs() < 1e-12, "{}", i.name);
                }
            }
        }
    }

    #[test]
    fn growth_examples() {
        let t = Tolerances::default();
        let r = quadratic_growth_check(&catalog::abs_quadratic(), &v(&[0.0]), &v(&[-1.0]), &t).unwrap();
        assert_eq!(r.verdict, GrowthVerdict::Holds);
        assert!((r.modulus.unwrap() - 2.0).abs() < 1e-12);
        let r = quadratic_growth_check(&catalog::neg_square_halfline(), &v(&[0.0]), &v(&[0.0]), &t).unwrap();
        assert_eq!(r.verdict, GrowthVerdict::Fails);
        let r = quadratic_growth_check(&catalog::square(), &v(&[0.0]), &v(&[0.0]), &t).unwrap();
        assert!((r.modulus.unwrap() - 2.0).abs() < 1e-12);
        let r = quadratic_growth_check(&catalog::abs(), &v(&[0.0]), &v(&[0.0]), &t).unwrap();
        assert_eq!((r.verdict, r.modulus), (GrowthVerdict::Holds, None));
        let z = CompositeProblem::new(
            PolyhedralFunction::new(1, vec![(v(&[0.0]), 0.0)], vec![]).unwrap(),
            PolyMap::identity(1),
        )
        .unwrap();
        let r = quadratic_growth_check(&z, &v(&[0.0]), &v(&[0.0]), &t).unwrap();
        assert_eq!(r.verdict, GrowthVerdict::Inconclusive);
    }

    #[test]
    fn sampled_growth_when_it_holds() {
        // φ(x') >= φ(x) + <v, x' - x> + κ/2 ‖x - x'‖² near the base pair
        let t = Tolerances::default();
        let cp = catalog::abs_quadratic();
        let (x, vv) = (v(&[0.0]), v(&[-1.0]));
        let kappa = quadratic_growth_check(&cp, &x, &vv, &t).unwrap().modulus.unwrap() * (1.0 - 1e-3);
        let pairs = crate::epi_oracle::sample_gph(&cp, &x, &vv, 1e-3, 16, 5, &t).unwrap().pairs;
        let pairs: Vec<_> = pairs.into_iter().filter(|(_, w)| (w - &vv).norm() <= 1e-3).collect();
        assert!(!pairs.is_empty());
        for (xs, vs) in &pairs {
            for k in -10..=10 {
                let xp = &x + v(&[k as f64 * 1e-4]);
                let lhs = cp.value(&xp).unwrap();
                let rhs = cp.value(xs).unwrap() + vs.dot(&(&xp - xs)) + 0.5 * kappa * (xs - &xp).norm_squared();
                assert!(lhs >= rhs - 1e-14, "x = {xs}, x' = {xp}");
            }
        }
    }

    #[test]
    fn strict_tepi_and_graph_regularity() {
        let t = Tolerances::default();
        let p = ProbeConfig::default();
        let r = strict_tepi_check(&catalog::abs(), &v(&[0.0]), &v(&[0.0]), &p, &t).unwrap();
        assert!(r.verdict && r.probed > 0);
        assert!(!strict_tepi_check(&catalog::abs(), &v(&[0.0]), &v(&[1.0]), &p, &t).unwrap().verdict);
        let r = strict_tepi_check(&catalog::circle(), &v(&[1.0, 0.0]), &v(&[2.0, 0.0]), &p, &t).unwrap();
        assert!(r.verdict && r.probed > 0);

        assert!(graph_regularity_report(&catalog::circle(), &v(&[1.0, 0.0]), &v(&[0.0, 0.0]), &t).unwrap().regular);
        let r = graph_regularity_report(&catalog::abs(), &v(&[0.0]), &v(&[1.0]), &t).unwrap();
        assert!(!r.regular && r.coderivative_domain.dim() == 1);
        assert!(graph_regularity_report(&catalog::abs(), &v(&[0.0]), &v(&[0.0]), &t).unwrap().regular);
    }

    #[test]
    fn gamma_examples() {
        let t = Tolerances::default();
        assert!((mr_modulus_gamma(&catalog::abs(), &v(&[0.0]), &t).unwrap() - 1.0).abs() < 1e-12);
        let twice = cp(catalog::abs_g(), lin(1, 1, &[2.0]));
        assert!((mr_modulus_gamma(&twice, &v(&[0.0]), &t).unwrap() - 0.5).abs() < 1e-12);
        assert!((mr_modulus_gamma(&catalog::circle(), &v(&[1.0, 0.0]), &t).unwrap() - 0.5).abs() < 1e-12);
        // S = {0}: nothing to invert
        assert_eq!(mr_modulus_gamma(&catalog::square(), &v(&[0.0]), &t).unwrap(), 0.0);
    }

    #[test]
    fn analysis_report() {
        let t = Tolerances::default();
        let r = analyze(&catalog::abs(), &v(&[0.0]), &v(&[0.0]), &t).unwrap();
        assert!(r.soqc.holds && r.bcq);
        assert!(r.nondegeneracy.unwrap().verdict);
        assert_eq!(r.gamma_bar, Some(1.0));
        let diag = cp(catalog::nonpositive_orthant(2), lin(2, 1, &[1.0, 1.0]));
        let r = analyze(&diag, &v(&[0.0]), &v(&[1.0]), &t).unwrap();
        assert!(!r.soqc.holds && r.gamma_bar.is_none() && r.growth.is_none());
    }

    proptest! {
        #[test]
        fn gamma_is_invariant_under_rotations(th in 0.0..std::f64::consts::TAU, a in 0.5..3.0f64, b in -2.0..2.0f64) {
            let t = Tolerances::default();
            // φ = max(z₁, z₂) ∘ (M x); rotating the input leaves γ̄ alone
            let m = Matrix::from_row_slice(2, 2, &[a, b, -b, a + 1.0]);
            let q = Matrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
            let g0 = mr_modulus_gamma(&cp(max2(), PolyMap::linear(&m)), &v(&[0.0, 0.0]), &t).unwrap();
            let g1 = mr_modulus_gamma(&cp(max2(), PolyMap::linear(&(&m * q))), &v(&[0.0, 0.0]), &t).unwrap();
            prop_assert!((g0 - g1).abs() <= 1e-10 * g0.max(1.0));
        }
    }
}

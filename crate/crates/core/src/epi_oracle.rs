//! Brute-force oracles: second-order difference quotients, sampled (strict)
//! second subderivatives, samplers of `gph ∂φ`, and an epigraph distance.
//!
//! Every liminf is replaced by a minimum over a finite grid, so a finite
//! result is an observed upper bound, never a certified value.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Precondition, Result};
use crate::kkt::{face_patterns, restore, Pattern};
use crate::linalg::Vector;
use crate::lp::{LinearProgram, LpOutcome, Relation};
use crate::polyhedral::PolytopeRep;
use crate::second_order::{self, bcq_at, local};
use crate::smooth::CompositeProblem;
use crate::tol::Tolerances;

/// `Δ²_t φ(x, v)(w) = [φ(x + t w) - φ(x) - t <v, w>] / (t²/2)`.
pub fn delta2(cp: &CompositeProblem, x: &Vector, v: &Vector, t: f64, w: &Vector, tol: &Tolerances) -> Result<f64> {
    Error::check_dim(cp.n(), v.len())?;
    Error::check_dim(cp.n(), w.len())?;
    if !(t > 0.0) {
        return Err(Error::pre(Precondition::ParameterOutOfRange, "t must be positive"));
    }
    let fx = cp.value_with(x, tol)?;
    if !fx.is_finite() {
        return Err(Error::pre(Precondition::NotInDomain, "φ(x) is not finite"));
    }
    Ok(quotient(cp, x, v, fx, t, w, tol))
}

// a domain slack s moves a quotient at step t by ~s/t², so the allowance shrinks with t²
fn resolution(tol: &Tolerances, t: f64) -> Tolerances {
    let mut strict = tol.clone();
    strict.act = (tol.act * t * t).max(4.0 * f64::EPSILON);
    strict
}

fn quotient(cp: &CompositeProblem, x: &Vector, v: &Vector, fx: f64, t: f64, w: &Vector, tol: &Tolerances) -> f64 {
    let y = x + w * t;
    let fy = cp.value_with(&y, &resolution(tol, t)).unwrap_or(f64::INFINITY);
    if !fy.is_finite() {
        return f64::INFINITY;
    }
    (fy - fx - t * v.dot(w)) / (0.5 * t * t)
}

/// Refinement levels and sample sizes of the quotient oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Strictly decreasing step sizes.
    pub t_values: Vec<f64>,
    /// Random directions per ball `B(w, 2t)`, on top of `w` and `w ± 2t e_i`.
    pub w_samples: usize,
    /// Random base points for the strict variant.
    pub base_samples: usize,
    /// Base pairs of the strict variant lie within `base_factor * t`.
    pub base_factor: f64,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            t_values: vec![1e-1, 1e-2, 1e-3, 1e-4],
            w_samples: 24,
            base_samples: 16,
            base_factor: 10.0,
            seed: 42,
        }
    }
}

impl GridSpec {
    fn validate(&self) -> Result<()> {
        if self.t_values.len() < 3 {
            return Err(Error::pre(Precondition::ParameterOutOfRange, "need at least three refinement levels"));
        }
        let ok = self.t_values.iter().all(|t| *t > 0.0) && self.t_values.windows(2).all(|p| p[1] < p[0]);
        if !ok {
            return Err(Error::pre(
                Precondition::ParameterOutOfRange,
                "t values must be positive and strictly decreasing",
            ));
        }
        Ok(())
    }
}

/// Extended-real outcome of a sampled liminf.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimate {
    Finite(f64),
    PlusInfinity,
    MinusInfinity,
}

impl Estimate {
    pub fn value(self) -> f64 {
        match self {
            Estimate::Finite(v) => v,
            Estimate::PlusInfinity => f64::INFINITY,
            Estimate::MinusInfinity => f64::NEG_INFINITY,
        }
    }
}

/// Minimum observed at one refinement level.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub t: f64,
    /// `None`: no finite quotient observed.
    pub min: Option<f64>,
    pub finite_samples: usize,
}

/// One finite quotient evaluation, for CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientRecord {
    pub t: f64,
    /// Index of the base pair; 0 is the given `(x, v)`.
    pub base: usize,
    pub w: Vector,
    pub w_prime: Vector,
    pub quotient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledD2 {
    pub levels: Vec<Level>,
    pub estimate: Estimate,
    /// Richardson extrapolation of the last two finite levels.
    pub extrapolated: Option<f64>,
    pub records: Vec<QuotientRecord>,
}

impl SampledD2 {
    /// Minimum at the finest level.
    pub fn finest(&self) -> Option<f64> {
        self.levels.last().and_then(|l| l.min)
    }
}

fn unit_ball_point(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    loop {
        let u = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        if u.norm() <= 1.0 {
            return u;
        }
    }
}

/// Offsets in the unit ball, fixed across levels: 0, ±e_i, then random.
fn offsets(n: usize, count: usize, seed: u64) -> Vec<Vector> {
    let mut out = vec![Vector::zeros(n)];
    for i in 0..n {
        let mut e = Vector::zeros(n);
        e[i] = 1.0;
        out.push(-&e);
        out.push(e);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    out.extend((0..count).map(|_| unit_ball_point(&mut rng, n)));
    out
}

// min of Δ²_t over B(w, 2t) at one base pair, raw samples and face restorations
#[allow(clippy::too_many_arguments)]
fn level_min(
    cp: &CompositeProblem,
    x: &Vector,
    v: &Vector,
    pats: &[Pattern],
    t: f64,
    w: &Vector,
    offs: &[Vector],
    base: usize,
    records: &mut Vec<QuotientRecord>,
    tol: &Tolerances,
) -> (Option<f64>, usize) {
    let Ok(fx) = cp.value_with(x, tol) else { return (None, 0) };
    if !fx.is_finite() {
        return (None, 0);
    }
    let radius = 2.0 * t;
    let mut best: Option<f64> = None;
    let mut count = 0;
    let mut consider = |wp: &Vector, records: &mut Vec<QuotientRecord>| {
        if (wp - w).norm() > radius * (1.0 + 1e-12) {
            return;
        }
        let q = quotient(cp, x, v, fx, t, wp, tol);
        if q.is_finite() {
            count += 1;
            best = Some(best.map_or(q, |b: f64| b.min(q)));
            records.push(QuotientRecord {
                t,
                base,
                w: w.clone(),
                w_prime: wp.clone(),
                quotient: q,
            });
        }
    };
    for o in offs {
        let wp = w + o * radius;
        consider(&wp, records);
        let y = x + &wp * t;
        for p in pats {
            if let Some(yr) = restore(cp, &y, p, tol) {
                let wr = (yr - x) / t;
                consider(&wr, records);
            }
        }
    }
    (best, count)
}

fn summarize(levels: Vec<Level>, records: Vec<QuotientRecord>) -> SampledD2 {
    let k = levels.len();
    let last = levels[k - 1].min;
    let prev = levels[k - 2].min;
    let (estimate, extrapolated) = match (prev, last) {
        (_, None) => (Estimate::PlusInfinity, None),
        (Some(p), Some(l)) if l.abs() > 100.0 && l.abs() >= 5.0 * p.abs() => {
            let e = if l > 0.0 { Estimate::PlusInfinity } else { Estimate::MinusInfinity };
            (e, None)
        }
        (Some(p), Some(l)) => {
            let (t1, t2) = (levels[k - 2].t, levels[k - 1].t);
            let r = (t1 * l - t2 * p) / (t1 - t2);
            (Estimate::Finite(r), Some(r))
        }
        (None, Some(l)) => (Estimate::Finite(l), None),
    };
    SampledD2 {
        levels,
        estimate,
        extrapolated,
        records,
    }
}

fn patterns_at(cp: &CompositeProblem, x: &Vector, tol: &Tolerances) -> Result<Vec<Pattern>> {
    let z = cp.phi().eval(x);
    let act = cp.g().active_sets(&z, tol)?;
    face_patterns(&act.pieces, &act.rows, tol)
}

/// Sampled `d²φ(x, v)(w)`: per level, the minimum of `Δ²_t` over `B(w, 2t)`.
pub fn sampled_d2(cp: &CompositeProblem, x: &Vector, v: &Vector, w: &Vector, grid: &GridSpec, tol: &Tolerances) -> Result<SampledD2> {
    grid.validate()?;
    Error::check_dim(cp.n(), w.len())?;
    delta2(cp, x, v, grid.t_values[0], w, tol)?;
    let pats = patterns_at(cp, x, tol)?;
    let offs = offsets(cp.n(), grid.w_samples, grid.seed);
    let mut records = Vec::new();
    let levels = grid
        .t_values
        .iter()
        .map(|&t| {
            let (min, finite_samples) = level_min(cp, x, v, &pats, t, w, &offs, 0, &mut records, tol);
            Level { t, min, finite_samples }
        })
        .collect();
    Ok(summarize(levels, records))
}

/// Sampled strict second subderivative: the minimum additionally ranges over
/// base pairs of `gph ∂φ` within `base_factor * t` of `(x̄, v̄)`.
pub fn sampled_strict_d2(
    cp: &CompositeProblem,
    x: &Vector,
    v: &Vector,
    w: &Vector,
    grid: &GridSpec,
    tol: &Tolerances,
) -> Result<SampledD2> {
    grid.validate()?;
    Error::check_dim(cp.n(), w.len())?;
    delta2(cp, x, v, grid.t_values[0], w, tol)?;
    let offs = offsets(cp.n(), grid.w_samples, grid.seed);
    let mut records = Vec::new();
    let mut levels = Vec::with_capacity(grid.t_values.len());
    for &t in &grid.t_values {
        let rho = grid.base_factor * t;
        let pairs = base_pairs(cp, x, v, rho, grid.base_samples, grid.seed, tol)?;
        let mut min: Option<f64> = None;
        let mut finite = 0;
        for (b, (xs, vs)) in pairs.iter().enumerate() {
            let pats = patterns_at(cp, xs, tol)?;
            let (m, c) = level_min(cp, xs, vs, &pats, t, w, &offs, b, &mut records, tol);
            finite += c;
            if let Some(m) = m {
                min = Some(min.map_or(m, |a: f64| a.min(m)));
            }
        }
        levels.push(Level {
            t,
            min,
            finite_samples: finite,
        });
    }
    Ok(summarize(levels, records))
}

// (x̄, v̄) first, then sampled pairs inside the radius
fn base_pairs(
    cp: &CompositeProblem,
    x: &Vector,
    v: &Vector,
    rho: f64,
    count: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<Vec<(Vector, Vector)>> {
    let s = sample_gph(cp, x, v, rho, count, seed, tol)?;
    let mut out = vec![(x.clone(), v.clone())];
    out.extend(
        s.pairs
            .into_iter()
            .filter(|(xs, vs)| (xs - x).norm() <= rho && (vs - v).norm() <= rho),
    );
    Ok(out)
}

/// Pairs on `gph ∂φ` near a base pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GphSample {
    pub pairs: Vec<(Vector, Vector)>,
    /// Candidate points dropped because BCQ failed there.
    pub dropped: usize,
    /// Fewer than `count / 2` pairs were produced.
    pub warning: bool,
}

// nearest point of P to target in the l1 norm
fn nearest_l1(p: &PolytopeRep, target: &Vector) -> Result<Option<Vector>> {
    if p.is_empty() {
        return Ok(None);
    }
    let n = target.len();
    let np = p.points().len();
    let nr = p.rays().len();
    let g = np + nr;
    let nv = g + n;
    let mut lp = LinearProgram::new(nv);
    for i in 0..n {
        let mut row = vec![0.0; nv];
        for (j, pt) in p.points().iter().enumerate() {
            row[j] = pt[i];
        }
        for (j, r) in p.rays().iter().enumerate() {
            row[np + j] = r[i];
        }
        let mut up = row.clone();
        up[g + i] = -1.0;
        lp.constrain(&up, Relation::Le, target[i]);
        let mut dn: Vec<f64> = row.iter().map(|c| -c).collect();
        dn[g + i] = -1.0;
        lp.constrain(&dn, Relation::Le, -target[i]);
    }
    let mut row = vec![0.0; nv];
    row[..np].iter_mut().for_each(|c| *c = 1.0);
    lp.constrain(&row, Relation::Eq, 1.0);
    let mut c = vec![0.0; nv];
    c[g..].iter_mut().for_each(|x| *x = -1.0);
    lp.maximize(&c);
    match lp.solve()? {
        LpOutcome::Optimal { x, .. } => Ok(Some(p.combine(&x[..np], &x[np..g]))),
        _ => Ok(None),
    }
}

fn random_member(p: &PolytopeRep, rng: &mut ChaCha8Rng) -> Vector {
    let mut w: Vec<f64> = p.points().iter().map(|_| rng.random_range(0.0..1.0) + 1e-3).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    let r: Vec<f64> = p.rays().iter().map(|_| rng.random_range(0.0..1.0)).collect();
    p.combine(&w, &r)
}

/// Points `x` within `radius` of `x̄` (on every face through `x̄` as well as
/// generic points) paired with subgradients `v ∈ ∂φ(x)`: the one nearest
/// `v̄`, small moves from it inside `∂φ(x)`, and the generator points.
pub fn sample_gph(
    cp: &CompositeProblem,
    x: &Vector,
    v: &Vector,
    radius: f64,
    count: usize,
    seed: u64,
    tol: &Tolerances,
) -> Result<GphSample> {
    Error::check_dim(cp.n(), x.len())?;
    Error::check_dim(cp.n(), v.len())?;
    let n = cp.n();
    let pats = patterns_at(cp, x, tol)?;
    let mut cands = vec![x.clone()];
    for i in 0..n {
        for s in [0.1, 0.5, 1.0] {
            let mut d = Vector::zeros(n);
            d[i] = radius * s;
            cands.push(x + &d);
            cands.push(x - &d);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..count {
        cands.push(x + unit_ball_point(&mut rng, n) * radius);
    }
    let mut points: Vec<Vector> = Vec::new();
    let fine = resolution(tol, radius.min(1.0));
    let push = |p: Vector, points: &mut Vec<Vector>| {
        if (&p - x).norm() <= radius * (1.0 + 1e-12)
            && cp.value_with(&p, &fine).is_ok_and(|f| f.is_finite())
            && !points.iter().any(|q| (q - &p).norm() <= 1e-14 * (1.0 + p.norm()))
        {
            points.push(p);
        }
    };
    for c in &cands {
        push(c.clone(), &mut points);
        for p in &pats {
            if let Some(r) = restore(cp, c, p, tol) {
                push(r, &mut points);
            }
        }
    }
    let mut pairs = Vec::new();
    let mut dropped = 0;
    for (k, p) in points.iter().enumerate() {
        let loc = local(cp, p, tol)?;
        if !bcq_at(&loc, cp.m(), tol)? {
            dropped += 1;
            continue;
        }
        let sub = loc.sub_g.map(&loc.jac.transpose())?;
        let Some(near) = nearest_l1(&sub, v)? else { continue };
        let mut vs = vec![near.clone()];
        let mut prng = ChaCha8Rng::seed_from_u64(seed ^ (0x9E37_79B9_7F4A_7C15_u64.wrapping_mul(k as u64 + 1)));
        for _ in 0..2 {
            let q = random_member(&sub, &mut prng);
            let tau: f64 = prng.random_range(0.0..1.0);
            let d = &q - &near;
            let len = d.norm();
            if len > 0.0 {
                vs.push(&near + d * (radius * tau / len).min(1.0));
            }
        }
        vs.extend(sub.points().iter().cloned());
        for vv in vs {
            if sub.member(&vv)? {
                pairs.push((p.clone(), vv));
            }
        }
    }
    Ok(GphSample {
        warning: pairs.len() < count / 2,
        pairs,
        dropped,
    })
}

/// A function sampled on a finite grid; `+inf` marks points outside the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    pub points: Vec<Vector>,
    pub values: Vec<f64>,
}

impl SampledFunction {
    pub fn new(points: Vec<Vector>, values: Vec<f64>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::InvalidInput("grid and values differ in length".into()));
        }
        Ok(Self { points, values })
    }

    // distance from (p, s) to the discrete epigraph, capped at rho
    fn epi_dist(&self, p: &Vector, s: f64, rho: f64) -> f64 {
        let mut best = rho;
        for (x, &f) in self.points.iter().zip(&self.values) {
            if !f.is_finite() && f > 0.0 {
                continue;
            }
            let dh = (f - s).max(0.0);
            let d = ((p - x).norm_squared() + dh * dh).sqrt();
            best = best.min(d);
        }
        best
    }
}

/// Truncated epigraph distance: the largest gap `|d(p, epi a) - d(p, epi b)|`
/// over probe points `p` (grid point, height in `[-ρ, ρ]`), distances capped at `ρ`.
/// A pseudometric on functions sampled over one grid.
pub fn epi_distance(a: &SampledFunction, b: &SampledFunction, rho: f64) -> Result<f64> {
    if a.points.len() != b.points.len()
        || a.points.iter().zip(&b.points).any(|(p, q)| p.len() != q.len() || (p - q).amax() > 1e-12)
    {
        return Err(Error::InvalidInput("sampled functions use different grids".into()));
    }
    if !(rho > 0.0) {
        return Err(Error::pre(Precondition::ParameterOutOfRange, "ρ must be positive"));
    }
    const HEIGHTS: usize = 16;
    let mut worst = 0.0_f64;
    for p in &a.points {
        for k in 0..=HEIGHTS {
            let s = -rho + 2.0 * rho * k as f64 / HEIGHTS as f64;
            let gap = (a.epi_dist(p, s, rho) - b.epi_dist(p, s, rho)).abs();
            worst = worst.max(gap);
        }
    }
    // graph points of both functions inside the window are probes too
    for f in [a, b] {
        for (p, &v) in f.points.iter().zip(&f.values) {
            if v.is_finite() && v.abs() <= rho {
                let gap = (a.epi_dist(p, v, rho) - b.epi_dist(p, v, rho)).abs();
                worst = worst.max(gap);
            }
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpiProbeSpec {
    pub t_values: Vec<f64>,
    /// Grid points per axis on `[-1, 1]^n`.
    pub per_axis: usize,
    pub base_samples: usize,
    /// Base pairs lie within `base_factor * t`.
    pub base_factor: f64,
    pub rho: f64,
    pub w_samples: usize,
    pub seed: u64,
}

impl Default for EpiProbeSpec {
    fn default() -> Self {
        Self {
            t_values: vec![1e-2, 1e-3, 1e-4],
            per_axis: 9,
            base_samples: 6,
            base_factor: 1.0,
            rho: 1.0,
            w_samples: 4,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpiStatus {
    ConsistentConvergent,
    ConsistentDivergent,
    Inconsistent,
}

impl EpiStatus {
    pub fn name(self) -> &'static str {
        match self {
            EpiStatus::ConsistentConvergent => "consistent-convergent",
            EpiStatus::ConsistentDivergent => "consistent-divergent",
            EpiStatus::Inconsistent => "inconsistent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpiProbeReport {
    pub status: EpiStatus,
    pub ri_verdict: bool,
    /// `(t, largest epi distance over base pairs, base pairs used)`.
    pub distances: Vec<(f64, f64, usize)>,
    pub records: Vec<QuotientRecord>,
}

fn w_grid(n: usize, per_axis: usize) -> Vec<Vector> {
    let k = per_axis.max(2);
    let total = k.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            Vector::from_fn(n, |_, _| {
                let i = idx % k;
                idx /= k;
                -1.0 + 2.0 * i as f64 / (k - 1) as f64
            })
        })
        .collect()
}

/// Compare quotient functions at moving base pairs with `d²φ(x̄, v̄)`.
pub fn epi_convergence_probe(
    cp: &CompositeProblem,
    x: &Vector,
    v: &Vector,
    spec: &EpiProbeSpec,
    tol: &Tolerances,
) -> Result<EpiProbeReport> {
    let data = second_order::second_order_data(cp, x, v, tol)?;
    let ri_verdict = second_order::nondegeneracy_check(cp, x, v, tol)?.verdict;
    let grid = w_grid(cp.n(), spec.per_axis);
    let formula = SampledFunction::new(
        grid.clone(),
        grid.iter().map(|w| second_order::d2_value(&data, w, tol)).collect(),
    )?;
    let offs = offsets(cp.n(), spec.w_samples, spec.seed);
    let mut distances = Vec::new();
    let mut records = Vec::new();
    for &t in &spec.t_values {
        let pairs = base_pairs(cp, x, v, spec.base_factor * t, spec.base_samples, spec.seed, tol)?;
        let mut worst = 0.0_f64;
        for (b, (xs, vs)) in pairs.iter().enumerate() {
            let pats = patterns_at(cp, xs, tol)?;
            let vals = grid
                .iter()
                .map(|w| {
                    level_min(cp, xs, vs, &pats, t, w, &offs, b, &mut records, tol)
                        .0
                        .unwrap_or(f64::INFINITY)
                })
                .collect();
            let q = SampledFunction::new(grid.clone(), vals)?;
            worst = worst.max(epi_distance(&q, &formula, spec.rho)?);
        }
        distances.push((t, worst, pairs.len()));
    }
    let last = distances.last().map_or(f64::INFINITY, |d| d.1);
    let status = match (ri_verdict, last) {
        (true, d) if d <= tol.epi => EpiStatus::ConsistentConvergent,
        (false, d) if d >= 10.0 * tol.epi => EpiStatus::ConsistentDivergent,
        _ => EpiStatus::Inconsistent,
    };
    Ok(EpiProbeReport {
        status,
        ri_verdict,
        distances,
        records,
    })
}

fn join(v: &Vector) -> String {
    v.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(" ")
}

/// Columns `t, base, w, w_prime, quotient`; vectors are space-separated.
pub fn write_csv<W: Write>(out: W, records: &[QuotientRecord]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
    wr.write_record(["t", "base", "w", "w_prime", "quotient"]).map_err(io)?;
    for r in records {
        wr.write_record([
            format!("{}", r.t),
            r.base.to_string(),
            join(&r.w),
            join(&r.w_prime),
            format!("{}", r.quotient),
        ])
        .map_err(io)?;
    }
    wr.flush().map_err(|e| Error::InvalidInput(format!("csv: {e}")))?;
    Ok(())
}

pub fn write_csv_file(path: &Path, records: &[QuotientRecord]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
    write_csv(std::io::BufWriter::new(f), records)
}

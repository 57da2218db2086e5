//! Acceptance suite: one PASS/FAIL line per criterion.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varpoly_core::catalog::{self, Instance};
use varpoly_core::linalg::{self, Matrix, Vector};
use varpoly_core::{
    geneq, prox, second_order, ConeRep, Estimate, GeneralizedEquation, GridSpec, PolyMap, PolyhedralFunction,
    ProxProblem, Tolerances,
};
use varpoly_core::{CompositeProblem, Error};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn v(xs: &[f64]) -> Vector {
    Vector::from_column_slice(xs)
}

fn directions(n: usize) -> Vec<Vector> {
    if n == 1 {
        return vec![v(&[1.0]), v(&[-1.0]), v(&[0.5]), v(&[-0.5])];
    }
    (0..8)
        .map(|k| {
            let th = k as f64 * std::f64::consts::FRAC_PI_4;
            v(&[th.cos(), th.sin()])
        })
        .collect()
}

// `formula` finite: estimate within 1e-3; infinite: divergent or above 1e3 at the finest level
fn agrees(formula: f64, est: &varpoly_core::SampledD2) -> bool {
    if formula.is_finite() {
        matches!(est.estimate, Estimate::Finite(e) if (e - formula).abs() <= 1e-3)
    } else {
        est.estimate == Estimate::PlusInfinity || est.finest().is_some_and(|f| f > 1e3)
    }
}

fn chain_rule(strict: bool) -> Outcome {
    let tol = Tolerances::default();
    let grid = GridSpec::default();
    let mut checked = 0;
    let mut bad = Vec::new();
    for Instance { name, cp, x, v: vb } in catalog::instances() {
        for w in directions(cp.n()) {
            let (formula, est) = if strict {
                (
                    second_order::strict_second_subderivative(&cp, &x, &vb, &w, &tol),
                    varpoly_core::sampled_strict_d2(&cp, &x, &vb, &w, &grid, &tol),
                )
            } else {
                (
                    second_order::second_subderivative(&cp, &x, &vb, &w, &tol),
                    varpoly_core::sampled_d2(&cp, &x, &vb, &w, &grid, &tol),
                )
            };
            let (formula, est) = (formula.map_err(|e| e.to_string())?, est.map_err(|e| e.to_string())?);
            checked += 1;
            if !agrees(formula, &est) {
                bad.push(format!("{name} w={:?}: formula {formula}, sampled {:?}", w.as_slice(), est.estimate));
            }
        }
    }
    if bad.is_empty() {
        Ok(format!("{checked} (instance, w) pairs agree"))
    } else {
        Err(format!("{} of {checked} disagree: {}", bad.len(), bad.join("; ")))
    }
}

fn soft(x: f64, r: f64) -> f64 {
    x.signum() * (x.abs() - r).max(0.0)
}

fn prox_equivalence() -> Outcome {
    let tol = Tolerances::default();
    let mut worst = 0.0_f64;
    for r in [0.1, 0.5, 1.0] {
        // |·| is convex: any r > 0 is admissible
        let pp = ProxProblem::with_params(catalog::abs(), r, v(&[0.0]), v(&[0.0]), 0.0, 10.0, &tol).map_err(|e| e.to_string())?;
        for k in 0..100 {
            let x = -2.0 + 4.0 * k as f64 / 99.0;
            let p = prox::prox_compute(&pp, &v(&[x]), &tol).map_err(|e| e.to_string())?;
            worst = worst.max((p.point[0] - soft(x, r)).abs());
        }
    }
    let pp = ProxProblem::with_params(catalog::circle(), 0.5, v(&[1.0, 0.0]), v(&[0.0, 0.0]), 1.0, 10.0, &tol)
        .map_err(|e| e.to_string())?;
    let mut worst_c = 0.0_f64;
    for k in 0..100 {
        let th = k as f64 * 0.731;
        let rad = 0.5 + 1.5 * (k as f64 / 99.0);
        let x = v(&[rad * th.cos(), rad * th.sin()]);
        let p = prox::prox_compute(&pp, &x, &tol).map_err(|e| e.to_string())?;
        worst_c = worst_c.max((p.point - &x / x.norm()).amax());
    }
    let msg = format!("soft-threshold max error {worst:.2e}, circle max error {worst_c:.2e}");
    if worst <= 1e-8 && worst_c <= 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn prox_kink() -> Outcome {
    let tol = Tolerances::default();
    let pp = ProxProblem::new(catalog::abs(), 0.5, v(&[0.0]), v(&[1.0]), &tol).map_err(|e| e.to_string())?;
    let r = prox::prox_c1_check(&pp, &tol).map_err(|e| e.to_string())?;
    let loc = r.jump_location.as_ref().map_or(f64::NAN, |l| l[0]);
    let kink_ok = r.verdict == prox::C1Verdict::NotC1
        && !r.formula_c1
        && (r.max_jump - 1.0).abs() <= 0.05
        && (loc - 0.5).abs() <= 1e-3;
    let pp0 = ProxProblem::new(catalog::abs(), 0.5, v(&[0.0]), v(&[0.0]), &tol).map_err(|e| e.to_string())?;
    let r0 = prox::prox_c1_check(&pp0, &tol).map_err(|e| e.to_string())?;
    let smooth_ok = r0.verdict == prox::C1Verdict::C1 && r0.max_jump <= 1e-6;
    let msg = format!(
        "v̄=1: {} jump {:.4} at {loc:.6}; v̄=0: {} discontinuity {:.1e}",
        r.verdict.name(),
        r.max_jump,
        r0.verdict.name(),
        r0.max_jump
    );
    if kink_ok && smooth_ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn localization() -> Outcome {
    let tol = Tolerances::default();
    let circle = GeneralizedEquation::new(PolyMap::identity(2), catalog::circle(), v(&[2.0, 0.0])).map_err(|e| e.to_string())?;
    let x = v(&[1.0, 0.0]);
    let j = geneq::localization_jacobian(&circle, &x, &tol).map_err(|e| e.to_string())?;
    let exact = Matrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.5]);
    let dev = linalg::max_abs(&(&j - &exact));
    let probe = geneq::localization_probe(&circle, &x, 1e-3, 8, 42, &tol).map_err(|e| e.to_string())?;
    let half = GeneralizedEquation::new(PolyMap::identity(1), catalog::halfline(), v(&[1.0])).map_err(|e| e.to_string())?;
    let jh = geneq::localization_jacobian(&half, &v(&[0.0]), &tol).map_err(|e| e.to_string())?;
    let ph = geneq::localization_probe(&half, &v(&[0.0]), 1e-3, 8, 42, &tol).map_err(|e| e.to_string())?;
    let msg = format!(
        "circle formula dev {dev:.1e}, FD dev {:.1e}; halfline formula {:.1e}, FD {:.1e}",
        probe.deviation,
        linalg::max_abs(&jh),
        linalg::max_abs(&ph.fd_jacobian)
    );
    if dev <= 1e-15 && probe.deviation <= 1e-5 && linalg::max_abs(&jh) == 0.0 && linalg::max_abs(&ph.fd_jacobian) <= 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn random_orthonormal(rng: &mut ChaCha8Rng, n: usize, s: usize) -> Matrix {
    let m = Matrix::from_fn(n, s, |_, _| rng.random_range(-1.0..1.0));
    linalg::range_basis(&m, 1e-9)
}

fn mr_criteria_agreement() -> Outcome {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut disagreements = 0;
    let mut singular = 0;
    for k in 0..50 {
        let n = rng.random_range(1..=5);
        let s = rng.random_range(0..=n);
        let b = random_orthonormal(&mut rng, n, s);
        let mut a = Matrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
        if k % 2 == 1 && b.ncols() > 0 {
            // force B*AB singular: A kills a unit vector of K̄
            let y = Vector::from_fn(b.ncols(), |_, _| rng.random_range(-1.0..1.0)).normalize();
            let u = &b * y;
            a -= (&a * &u) * u.transpose();
        }
        let c = geneq::mr_criteria(&a, &b, &tol).map_err(|e| e.to_string())?;
        if !c.agree() {
            disagreements += 1;
        }
        if !c.reduced {
            singular += 1;
        }
    }
    let msg = format!("50 instances, {singular} not regular, {disagreements} disagreements");
    if disagreements == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn random_polyhedral(rng: &mut ChaCha8Rng) -> (CompositeProblem, Vector, Vector) {
    let m = rng.random_range(1..=3);
    let n = rng.random_range(1..=3);
    let npieces = rng.random_range(1..=3);
    let nrows = rng.random_range(0..=2);
    let rnd = |rng: &mut ChaCha8Rng, d: usize| Vector::from_fn(d, |_, _| rng.random_range(-2i32..=2) as f64);
    let pieces: Vec<(Vector, f64)> = (0..npieces).map(|_| (rnd(rng, m), 0.0)).collect();
    let rows: Vec<(Vector, f64)> = (0..nrows).map(|_| (rnd(rng, m), 0.0)).collect();
    let g = PolyhedralFunction::new(m, pieces.clone(), rows.clone()).expect("0 is feasible");
    let jac = Matrix::from_fn(m, n, |_, _| rng.random_range(-2i32..=2) as f64);
    let cp = CompositeProblem::new(g, PolyMap::linear(&jac)).expect("dims");
    // v = J* (Σ μ a + Σ ν b) with interior, face or vertex weights
    let mode = rng.random_range(0..3);
    let mut mu: Vec<f64> = (0..npieces).map(|_| rng.random_range(0.1..1.0)).collect();
    let mut nu: Vec<f64> = (0..nrows).map(|_| rng.random_range(0.1..1.0)).collect();
    match mode {
        1 => {
            let k = rng.random_range(0..npieces + nrows);
            if k < npieces {
                mu[k] = 0.0;
            } else {
                nu[k - npieces] = 0.0;
            }
        }
        2 => {
            let k = rng.random_range(0..npieces);
            mu.iter_mut().enumerate().for_each(|(i, w)| *w = if i == k { 1.0 } else { 0.0 });
            nu.iter_mut().for_each(|w| *w = 0.0);
        }
        _ => {}
    }
    if mu.iter().sum::<f64>() == 0.0 {
        mu[0] = 1.0;
    }
    let total: f64 = mu.iter().sum();
    let mut lam = Vector::zeros(m);
    for (w, (a, _)) in mu.iter().zip(&pieces) {
        lam += a * (w / total);
    }
    for (w, (b, _)) in nu.iter().zip(&rows) {
        lam += b * *w;
    }
    let vv = jac.transpose() * lam;
    (cp, Vector::zeros(n), vv)
}

fn nondegeneracy_triangle() -> Outcome {
    let tol = Tolerances::default();
    let mut count = 0;
    let mut failures = Vec::new();
    let mut run = |name: String, cp: &CompositeProblem, x: &Vector, vv: &Vector| {
        count += 1;
        match second_order::nondegeneracy_check(cp, x, vv, &tol) {
            Ok(r) if r.ri_subdifferential == r.ri_multiplier && r.ri_multiplier == r.subspace_cone => {}
            Ok(r) => failures.push(format!("{name}: {r:?}")),
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    };
    for i in catalog::instances() {
        run(i.name.to_string(), &i.cp, &i.x, &i.v);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for k in 0..50 {
        let (cp, x, vv) = random_polyhedral(&mut rng);
        run(format!("random #{k}"), &cp, &x, &vv);
    }
    if failures.is_empty() {
        Ok(format!("{count} instances, three tests agree on all"))
    } else {
        Err(format!("{} of {count} failed: {}", failures.len(), failures.join("; ")))
    }
}

fn gamma_modulus() -> Outcome {
    let tol = Tolerances::default();
    let mut worst = 0.0_f64;
    for c in [1.0, 2.0, 5.0] {
        let cp = CompositeProblem::new(catalog::abs_g(), PolyMap::linear(&Matrix::from_element(1, 1, c))).map_err(|e| e.to_string())?;
        let g = second_order::mr_modulus_gamma(&cp, &v(&[0.0]), &tol).map_err(|e| e.to_string())?;
        worst = worst.max((g - 1.0 / c).abs());
    }
    let gc = second_order::mr_modulus_gamma(&catalog::circle(), &v(&[1.0, 0.0]), &tol).map_err(|e| e.to_string())?;
    worst = worst.max((gc - 0.5).abs());
    let msg = format!("max deviation {worst:.1e}");
    if worst <= 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn cone_sample_points(rng: &mut ChaCha8Rng, gens: &[Vector], d: usize) -> Vec<Vector> {
    let mut pts = Vec::new();
    for _ in 0..8 {
        let mut p = Vector::zeros(d);
        for g in gens {
            p += g * rng.random_range(0.0..1.0);
        }
        pts.push(-&p);
        let jitter = Vector::from_fn(d, |_, _| rng.random_range(-1e-3..1e-3));
        pts.push(&p + jitter);
        pts.push(p);
        pts.push(Vector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)));
    }
    pts
}

fn member_lp(gens: &[Vector], d: usize, x: &Vector, tol: &Tolerances) -> Result<bool, Error> {
    ConeRep::from_generators(d, gens.to_vec())?.contains(x, tol)
}

fn polyhedral_kernel() -> Outcome {
    let tol = Tolerances::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut failures = 0;
    let mut probes = 0;
    for _ in 0..200 {
        let d = rng.random_range(1..=5);
        let k = rng.random_range(0..=6);
        let gens: Vec<Vector> = (0..k)
            .map(|_| Vector::from_fn(d, |_, _| rng.random_range(-3i32..=3) as f64))
            .collect();
        let cone = ConeRep::from_generators(d, gens.clone()).map_err(|e| e.to_string())?;
        let h = cone.dd_convert(&tol).map_err(|e| e.to_string())?.halfspaces().unwrap_or_default().to_vec();
        // round trip: halfspaces back to generators
        let back = ConeRep::from_halfspaces(d, h.clone())
            .and_then(|c| c.dd_convert(&tol))
            .map_err(|e| e.to_string())?;
        let gens2 = back.generators().unwrap_or_default().to_vec();
        // polar from generators alone, then polar again
        let polar = ConeRep::from_halfspaces(d, gens.clone())
            .and_then(|c| c.dd_convert(&tol))
            .map_err(|e| e.to_string())?;
        let pgens = polar.generators().unwrap_or_default().to_vec();
        let bipolar = ConeRep::from_halfspaces(d, pgens).map_err(|e| e.to_string())?;
        let mut bad = false;
        for p in cone_sample_points(&mut rng, &gens, d) {
            probes += 1;
            let truth = member_lp(&gens, d, &p, &tol).map_err(|e| e.to_string())?;
            let by_h = ConeRep::from_halfspaces(d, h.clone()).and_then(|c| c.contains(&p, &tol)).map_err(|e| e.to_string())?;
            let by_g2 = member_lp(&gens2, d, &p, &tol).map_err(|e| e.to_string())?;
            let by_bipolar = bipolar.contains(&p, &tol).map_err(|e| e.to_string())?;
            if truth != by_h || truth != by_g2 || truth != by_bipolar {
                bad = true;
            }
        }
        if bad {
            failures += 1;
        }
    }
    let msg = format!("200 cones, {probes} membership probes, {failures} failing cones");
    if failures == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn mr_estimate() -> Outcome {
    let tol = Tolerances::default();
    let half = GeneralizedEquation::new(PolyMap::identity(1), catalog::halfline(), v(&[1.0])).map_err(|e| e.to_string())?;
    let circle = GeneralizedEquation::new(PolyMap::identity(2), catalog::circle(), v(&[2.0, 0.0])).map_err(|e| e.to_string())?;
    let a = geneq::mr_estimate_check(&half, &v(&[0.0]), 1e-2, 100, 42, &tol).map_err(|e| e.to_string())?;
    let b = geneq::mr_estimate_check(&circle, &v(&[1.0, 0.0]), 1e-2, 100, 42, &tol).map_err(|e| e.to_string())?;
    let msg = format!(
        "halfline κ={:.3} violations {}/{}, circle κ={:.3} violations {}/{}",
        a.kappa, a.violations, a.tested, b.kappa, b.violations, b.tested
    );
    if a.violations == 0 && b.violations == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("chain rule vs brute force", || chain_rule(false)),
        ("strict chain rule", || chain_rule(true)),
        ("prox oracle equivalence", prox_equivalence),
        ("prox C1 detection", prox_kink),
        ("localization Jacobian", localization),
        ("metric-regularity criteria agree", mr_criteria_agreement),
        ("nondegeneracy triangle", nondegeneracy_triangle),
        ("gamma modulus", gamma_modulus),
        ("polyhedral kernel", polyhedral_kernel),
        ("metric-regularity estimate", mr_estimate),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        match out {
            Ok(msg) => println!("PASS {:>2} {name} ({secs:.1}s): {msg}", k + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {msg}", k + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

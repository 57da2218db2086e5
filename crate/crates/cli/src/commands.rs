//! The five subcommands. Each returns a report object and, for the sampling
//! commands, the quotient records destined for `--csv`.

use varpoly_core::prox;
use varpoly_core::second_order::{self, GrowthVerdict};
use varpoly_core::{
    epi_oracle, geneq, ConeRep, EpiProbeSpec, Estimate, GeneralizedEquation, GridSpec, ProxProblem, QuotientRecord,
    SampledD2, SmoothMap, Tolerances, Vector,
};

use crate::problem::ProblemFile;
use crate::report::{Json, Obj};
use crate::CliError;

pub struct Ctx<'a> {
    pub file: &'a ProblemFile,
    pub tol: Tolerances,
    pub seed: u64,
}

pub struct Output {
    pub report: Obj,
    pub records: Option<Vec<QuotientRecord>>,
}

fn point(p: &Option<Vec<f64>>, name: &str, cmd: &str) -> Result<Vector, CliError> {
    p.as_ref()
        .map(|v| Vector::from_column_slice(v))
        .ok_or_else(|| CliError::Parse(format!("`{cmd}` needs `{name}` in [points]")))
}

fn cone_json(c: &ConeRep) -> Json {
    Obj::new()
        .with("generators", c.generators().map(|g| g.iter().map(Json::from).collect::<Vec<_>>()))
        .with("halfspaces", c.halfspaces().map(|h| h.iter().map(Json::from).collect::<Vec<_>>()))
        .into()
}

fn growth_name(g: GrowthVerdict) -> &'static str {
    match g {
        GrowthVerdict::Holds => "holds",
        GrowthVerdict::Fails => "fails",
        GrowthVerdict::Inconclusive => "inconclusive",
    }
}

fn unit_directions(n: usize) -> Vec<Vector> {
    (0..n)
        .flat_map(|i| {
            [1.0, -1.0].map(|s| {
                let mut e = Vector::zeros(n);
                e[i] = s;
                e
            })
        })
        .collect()
}

pub fn analyze(ctx: &Ctx) -> Result<Output, CliError> {
    let cp = ctx.file.composite()?;
    let x = point(&ctx.file.points.x, "x", "analyze")?;
    let v = point(&ctx.file.points.v, "v", "analyze")?;
    let tol = &ctx.tol;
    let r = second_order::analyze(&cp, &x, &v, tol)?;
    let mut report = Obj::new()
        .with("value", cp.value_with(&x, tol)?)
        .with(
            "soqc",
            Obj::new()
                .with("holds", r.soqc.holds)
                .with("subspace_dim", r.soqc.subspace.dim())
                .with("certificate", r.soqc.certificate.as_ref()),
        )
        .with("bcq", r.bcq)
        .with(
            "multipliers",
            Obj::new()
                .with("points", r.multipliers.set.points().iter().map(Json::from).collect::<Vec<_>>())
                .with("rays", r.multipliers.set.rays().iter().map(Json::from).collect::<Vec<_>>())
                .with("unique", r.multipliers.is_singleton()),
        )
        .with("critical_cone", r.critical_cone.as_ref().map(cone_json))
        .with(
            "nondegeneracy",
            r.nondegeneracy.as_ref().map(|n| {
                Obj::new()
                    .with("ri_subdifferential", n.ri_subdifferential)
                    .with("ri_multiplier", n.ri_multiplier)
                    .with("subspace_cone", n.subspace_cone)
                    .with("margin", n.margin)
                    .with("verdict", n.verdict)
            }),
        )
        .with("gamma_bar", r.gamma_bar)
        .with(
            "growth",
            r.growth.as_ref().map(|g| {
                Obj::new()
                    .with("verdict", growth_name(g.verdict))
                    .with("modulus", g.modulus)
                    .with("min_eigenvalue", g.min_eigenvalue)
                    .with("reduced_dim", g.reduced_dim)
            }),
        )
        .with(
            "verdicts",
            Obj::new()
                .with("soqc", r.soqc.holds)
                .with("bcq", r.bcq)
                .with("unique_multiplier", r.multipliers.is_singleton())
                .with("nondegenerate", r.nondegeneracy.as_ref().map(|n| n.verdict))
                .with("growth", r.growth.as_ref().map(|g| growth_name(g.verdict))),
        );
    if let Some(l) = &ctx.file.points.lambda {
        report.insert("lambda_is_multiplier", r.multipliers.set.member(&Vector::from_column_slice(l))?);
    }
    Ok(Output { report, records: None })
}

fn estimate_json(e: Estimate) -> Json {
    match e {
        Estimate::Finite(x) => Json::Num(x),
        Estimate::PlusInfinity => "+inf-divergent".into(),
        Estimate::MinusInfinity => "-inf-divergent".into(),
    }
}

// finite formula: within 1e-3; infinite: divergent or above 1e3 at the finest level
fn agrees(formula: f64, s: &SampledD2) -> bool {
    if formula.is_finite() {
        matches!(s.estimate, Estimate::Finite(e) if (e - formula).abs() <= 1e-3)
    } else {
        s.estimate == Estimate::PlusInfinity || s.finest().is_some_and(|f| f > 1e3)
    }
}

fn sampled_json(formula: f64, s: &SampledD2) -> Obj {
    Obj::new()
        .with("formula", formula)
        .with("estimate", estimate_json(s.estimate))
        .with("finest", s.finest())
        .with(
            "levels",
            s.levels
                .iter()
                .map(|l| Obj::new().with("t", l.t).with("min", l.min).with("finite_samples", l.finite_samples))
                .collect::<Vec<_>>(),
        )
        .with("agrees", agrees(formula, s))
}

fn grid(ctx: &Ctx) -> GridSpec {
    let p = &ctx.file.params;
    let d = GridSpec::default();
    GridSpec {
        t_values: p.t.clone().unwrap_or(d.t_values),
        w_samples: p.w_samples.unwrap_or(d.w_samples),
        base_samples: p.base_samples.unwrap_or(d.base_samples),
        base_factor: p.base_factor.unwrap_or(d.base_factor),
        seed: ctx.seed,
    }
}

pub fn subderiv(ctx: &Ctx) -> Result<Output, CliError> {
    let cp = ctx.file.composite()?;
    let x = point(&ctx.file.points.x, "x", "subderiv")?;
    let v = point(&ctx.file.points.v, "v", "subderiv")?;
    let tol = &ctx.tol;
    let g = grid(ctx);
    let ws: Vec<Vector> = if ctx.file.params.w.is_empty() {
        unit_directions(cp.n())
    } else {
        ctx.file.params.w.iter().map(|w| Vector::from_column_slice(w)).collect()
    };
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut all_agree = true;
    for w in &ws {
        let d2 = second_order::second_subderivative(&cp, &x, &v, w, tol)?;
        let sd2 = second_order::strict_second_subderivative(&cp, &x, &v, w, tol)?;
        let s = varpoly_core::sampled_d2(&cp, &x, &v, w, &g, tol)?;
        let ss = varpoly_core::sampled_strict_d2(&cp, &x, &v, w, &g, tol)?;
        all_agree &= agrees(d2, &s) && agrees(sd2, &ss);
        rows.push(
            Obj::new()
                .with("w", w)
                .with("d2", sampled_json(d2, &s))
                .with("strict_d2", sampled_json(sd2, &ss)),
        );
        records.extend(s.records);
    }
    let report = Obj::new()
        .with("directions", rows)
        .with("all_agree", all_agree)
        .with("grid", Obj::new().with("t", g.t_values.clone()).with("w_samples", g.w_samples).with("base_samples", g.base_samples).with("base_factor", g.base_factor));
    Ok(Output {
        report,
        records: Some(records),
    })
}

pub fn geneq(ctx: &Ctx) -> Result<Output, CliError> {
    let cp = ctx.file.composite()?;
    let f = ctx.file.f_map()?;
    let x = point(&ctx.file.points.x, "x", "geneq")?;
    let u = match (&ctx.file.points.u, &ctx.file.points.v) {
        (Some(u), _) => Vector::from_column_slice(u),
        (None, Some(v)) => f.eval(&x) + Vector::from_column_slice(v),
        (None, None) => return Err(CliError::Parse("`geneq` needs `u` or `v` in [points]".into())),
    };
    let tol = &ctx.tol;
    let ge = GeneralizedEquation::new(f, cp, u.clone())?;
    let sol = geneq::check_solution(&ge, &x, tol)?;
    let st = geneq::mr_check(&ge, &x, tol)?;
    let p = &ctx.file.params;
    let mut report = Obj::new()
        .with("u", &u)
        .with("v", &sol.v)
        .with("nondegenerate", st.nondegenerate)
        .with("lambda", &st.lambda)
        .with("a", &st.a)
        .with("b", &st.b)
        .with("k_bar", cone_json(&st.k_bar))
        .with(
            "criteria",
            Obj::new()
                .with("kernel", st.criteria.kernel)
                .with("sum", st.criteria.sum)
                .with("reduced", st.criteria.reduced)
                .with("agree", st.criteria.agree()),
        )
        .with("mr", st.mr)
        .with("smr", st.smr)
        .with("sigma_jacobian", st.sigma_jacobian.as_ref());
    if st.smr {
        let probe = geneq::localization_probe(&ge, &x, 1e-3, 8, ctx.seed, tol)?;
        report.insert(
            "localization_probe",
            Obj::new()
                .with("fd_jacobian", &probe.fd_jacobian)
                .with("deviation", probe.deviation)
                .with("lipschitz", probe.lipschitz)
                .with("samples", probe.samples),
        );
        let est = geneq::mr_estimate_check(&ge, &x, p.radius.unwrap_or(1e-2), p.count.unwrap_or(100), ctx.seed, tol)?;
        report.insert(
            "mr_estimate",
            Obj::new()
                .with("kappa", est.kappa)
                .with("tested", est.tested)
                .with("violations", est.violations)
                .with("worst_ratio", est.worst_ratio),
        );
    } else {
        report.insert("localization_probe", Json::Null);
        report.insert("mr_estimate", Json::Null);
    }
    Ok(Output { report, records: None })
}

pub fn prox(ctx: &Ctx) -> Result<Output, CliError> {
    let cp = ctx.file.composite()?;
    let x_bar = point(&ctx.file.points.x, "x", "prox")?;
    let v_bar = point(&ctx.file.points.v, "v", "prox")?;
    let tol = &ctx.tol;
    let p = &ctx.file.params;
    let mut per_r = Vec::new();
    for &r in p.r.as_deref().unwrap_or(&[0.5]) {
        let pp = if p.prox_rho.is_some() || p.prox_eps.is_some() {
            let scale = x_bar.norm().hypot(v_bar.norm());
            let eps = p.prox_eps.unwrap_or(0.5 * scale.max(1.0));
            ProxProblem::with_params(cp.clone(), r, x_bar.clone(), v_bar.clone(), p.prox_rho.unwrap_or(1.0), eps, tol)?
        } else {
            ProxProblem::new(cp.clone(), r, x_bar.clone(), v_bar.clone(), tol)?
        };
        let points: Vec<Vector> = if p.at.is_empty() {
            vec![pp.center()]
        } else {
            p.at.iter().map(|a| Vector::from_column_slice(a)).collect()
        };
        let mut evals = Vec::new();
        for x in &points {
            let res = prox::prox_compute(&pp, x, tol)?;
            let env = prox::moreau_envelope(&pp, x, tol)?;
            let mg = prox::moreau_gradient(&pp, x, tol)?;
            evals.push(
                Obj::new()
                    .with("x", x)
                    .with("prox", &res.point)
                    .with("objective", res.objective)
                    .with("residual", res.residual)
                    .with("global_differs", res.global_differs)
                    .with("envelope", env)
                    .with(
                        "moreau_identity",
                        Obj::new()
                            .with("gradient", &mg.gradient)
                            .with("fd_gradient", &mg.fd_gradient)
                            .with("h", mg.h)
                            .with("deviation", mg.deviation),
                    ),
            );
        }
        let c1 = prox::prox_c1_check(&pp, tol)?;
        let jac = if c1.formula_c1 {
            Some(prox::prox_jacobian(&pp, tol)?)
        } else {
            None
        };
        per_r.push(
            Obj::new()
                .with("r", r)
                .with("eps", pp.eps())
                .with("rho", pp.rho())
                .with("evaluations", evals)
                .with(
                    "c1",
                    Obj::new()
                        .with("verdict", c1.verdict.name())
                        .with("formula_c1", c1.formula_c1)
                        .with("max_jump", c1.max_jump)
                        .with("jump_location", c1.jump_location.as_ref())
                        .with("stencil_points", c1.stencil_points),
                )
                .with("jacobian", jac.as_ref()),
        );
    }
    Ok(Output {
        report: Obj::new().with("results", per_r),
        records: None,
    })
}

pub fn epi(ctx: &Ctx) -> Result<Output, CliError> {
    let cp = ctx.file.composite()?;
    let x = point(&ctx.file.points.x, "x", "epi")?;
    let v = point(&ctx.file.points.v, "v", "epi")?;
    let p = &ctx.file.params;
    let d = EpiProbeSpec::default();
    let spec = EpiProbeSpec {
        t_values: p.t.clone().unwrap_or(d.t_values),
        per_axis: p.per_axis.unwrap_or(d.per_axis),
        base_samples: p.base_samples.unwrap_or(d.base_samples),
        base_factor: p.base_factor.unwrap_or(d.base_factor),
        rho: p.rho.unwrap_or(d.rho),
        w_samples: p.w_samples.unwrap_or(d.w_samples),
        seed: ctx.seed,
    };
    let r = epi_oracle::epi_convergence_probe(&cp, &x, &v, &spec, &ctx.tol)?;
    let report = Obj::new()
        .with("status", r.status.name())
        .with("ri_verdict", r.ri_verdict)
        .with(
            "distances",
            r.distances
                .iter()
                .map(|&(t, dist, pairs)| Obj::new().with("t", t).with("distance", dist).with("base_pairs", pairs))
                .collect::<Vec<_>>(),
        )
        .with("records", r.records.len())
        .with(
            "spec",
            Obj::new()
                .with("t", spec.t_values.clone())
                .with("per_axis", spec.per_axis)
                .with("base_samples", spec.base_samples)
                .with("base_factor", spec.base_factor)
                .with("rho", spec.rho)
                .with("w_samples", spec.w_samples),
        );
    Ok(Output {
        report,
        records: Some(r.records),
    })
}

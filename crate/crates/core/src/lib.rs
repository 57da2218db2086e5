//! Second-order variational analysis for polyhedral composite functions `g ∘ Φ`.
//!
//! Formulas (multipliers, critical cones, second subderivatives, stability of
//! generalized equations, prox Jacobians) sit next to brute-force oracles
//! that sample the same objects directly.

pub mod catalog;
pub mod epi_oracle;
pub mod error;
pub mod geneq;
pub mod kkt;
pub mod linalg;
pub mod lp;
pub mod polyhedral;
pub mod prox;
pub mod second_order;
pub mod smooth;
pub mod tol;

pub use epi_oracle::{
    delta2, epi_convergence_probe, epi_distance, sample_gph, sampled_d2, sampled_strict_d2, EpiProbeReport,
    EpiProbeSpec, EpiStatus, Estimate, GphSample, GridSpec, QuotientRecord, SampledD2, SampledFunction,
};
pub use error::{Error, Precondition, Result};
pub use geneq::{
    check_solution, localization_jacobian, localization_probe, mr_check, mr_criteria, mr_estimate_check, solve_ge,
    GeneralizedEquation, LocalizationProbe, MrCriteria, MrEstimateReport, SolutionCheck, StabilityReport,
};
pub use linalg::{Matrix, Vector};
pub use polyhedral::{ActiveSets, ConeRep, LinSubspace, PolyhedralFunction, PolytopeRep};
pub use prox::{
    manifold_projection_jacobian, moreau_envelope, moreau_gradient, prox_c1_check, prox_compute, prox_jacobian,
    C1Report, C1Verdict, MoreauGradient, ProxProblem, ProxResult,
};
pub use second_order::{
    analyze, bcq_check, critical_cone_phi, graph_regularity_report, lagrange_multipliers, mr_modulus_gamma,
    nondegeneracy_check, quadratic_growth_check, second_subderivative, soqc_check, strict_second_subderivative,
    strict_tepi_check, GraphRegularityReport, GrowthReport, GrowthVerdict, MultiplierSet, NondegeneracyReport,
    ProbeConfig, SecondOrderReport, SoqcReport, StrictTepiReport,
};
pub use smooth::{fd_validate, CompositeProblem, FdReport, FnMap, PolyMap, Polynomial, SmoothMap};
pub use tol::Tolerances;

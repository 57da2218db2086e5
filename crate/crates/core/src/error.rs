use std::fmt;

use crate::lp::LpError;

/// A named precondition that an operation refused to proceed without.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precondition {
    NotSubgradient,
    NotInDomain,
    NoMultiplier,
    MultiplierNotUnique,
    Soqc,
    Bcq,
    NotSolution,
    Degenerate,
    NotMetricallyRegular,
    NotManifold,
    NotProxBounded,
    ParameterOutOfRange,
    OutsideLocalization,
    EmptyPolytope,
    NotC1,
}

impl Precondition {
    pub fn name(self) -> &'static str {
        match self {
            Precondition::NotSubgradient => "not-subgradient",
            Precondition::NotInDomain => "not-in-domain",
            Precondition::NoMultiplier => "no-multiplier",
            Precondition::MultiplierNotUnique => "multiplier-not-unique",
            Precondition::Soqc => "soqc",
            Precondition::Bcq => "bcq",
            Precondition::NotSolution => "not-solution",
            Precondition::Degenerate => "nondegeneracy",
            Precondition::NotMetricallyRegular => "metric-regularity",
            Precondition::NotManifold => "manifold",
            Precondition::NotProxBounded => "prox-bounded",
            Precondition::ParameterOutOfRange => "parameter-range",
            Precondition::OutsideLocalization => "localization-radius",
            Precondition::EmptyPolytope => "nonempty-polytope",
            Precondition::NotC1 => "prox-c1",
        }
    }
}

impl fmt::Display for Precondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precondition `{0}` failed: {1}")]
    Precondition(Precondition, String),

    #[error("ambient dimension {dim} exceeds the double-description bound {bound}")]
    DimensionBound { dim: usize, bound: usize },

    #[error("pattern enumeration needs {count} patterns, above the limit {limit}")]
    TooManyPatterns { count: usize, limit: usize },

    #[error(transparent)]
    Lp(#[from] LpError),

    #[error("solver failed: {0}")]
    SolveFailed(String),

    #[error("internal consistency failure: {0}")]
    Inconsistency(String),
}

impl Error {
    pub(crate) fn pre(which: Precondition, detail: impl Into<String>) -> Self {
        Error::Precondition(which, detail.into())
    }

    pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, got })
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

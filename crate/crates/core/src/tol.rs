//! Numerical tolerances and bounds shared by every analysis routine.

use crate::error::{Error, Result};

/// Tolerances used throughout the crate.
///
/// The defaults are tight: catalog problems are exactly representable and a
/// loose default would mask ties between active pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    /// Equality test for active pieces and active domain rows.
    pub act: f64,
    /// Threshold on the optimal epsilon of the relative-interior LP.
    pub ri: f64,
    /// Eigenvalues in `(-eig, eig]` make a growth verdict inconclusive.
    pub eig: f64,
    /// Residual target of the damped Newton iterations.
    pub res: f64,
    /// Acceptance threshold when certifying an inclusion by LP residual.
    pub cert: f64,
    /// Rank decisions: singular values below `rank * max(1, sigma_max)` count as zero.
    pub rank: f64,
    /// Jacobian jump size separating C1 from a kink in the prox probe.
    pub jump: f64,
    /// Epigraph distance below which quotient samples count as converged.
    pub epi: f64,
    /// Largest ambient dimension the double-description routine accepts.
    pub dd_max_dim: usize,
    /// Largest number of active patterns the KKT enumeration accepts.
    pub max_patterns: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            act: 1e-9,
            ri: 1e-9,
            eig: 1e-9,
            res: 1e-10,
            cert: 1e-8,
            rank: 1e-9,
            jump: 1e-3,
            epi: 1e-2,
            dd_max_dim: 10,
            max_patterns: 1 << 12,
        }
    }
}

impl Tolerances {
    /// Set one tolerance by name, as used by `--tol KEY=VAL` on the command line.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let parse_f = |v: &str| -> Result<f64> {
            let x: f64 = v
                .parse()
                .map_err(|_| Error::InvalidInput(format!("tolerance `{key}`: bad number `{v}`")))?;
            if !(x.is_finite() && x >= 0.0) {
                return Err(Error::InvalidInput(format!("tolerance `{key}` must be finite and >= 0")));
            }
            Ok(x)
        };
        let parse_u = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::InvalidInput(format!("tolerance `{key}`: bad integer `{v}`")))
        };
        match key {
            "act" => self.act = parse_f(value)?,
            "ri" => self.ri = parse_f(value)?,
            "eig" => self.eig = parse_f(value)?,
            "res" => self.res = parse_f(value)?,
            "cert" => self.cert = parse_f(value)?,
            "rank" => self.rank = parse_f(value)?,
            "jump" => self.jump = parse_f(value)?,
            "epi" => self.epi = parse_f(value)?,
            "dd_max_dim" => self.dd_max_dim = parse_u(value)?,
            "max_patterns" => self.max_patterns = parse_u(value)?,
            _ => return Err(Error::InvalidInput(format!("unknown tolerance `{key}`"))),
        }
        Ok(())
    }

    /// All tolerances as `(name, value)` pairs, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("act", self.act),
            ("cert", self.cert),
            ("dd_max_dim", self.dd_max_dim as f64),
            ("eig", self.eig),
            ("epi", self.epi),
            ("jump", self.jump),
            ("max_patterns", self.max_patterns as f64),
            ("rank", self.rank),
            ("res", self.res),
            ("ri", self.ri),
        ]
    }
}

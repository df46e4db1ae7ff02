use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::oracle::InitOracle;
use crate::error::{Error, Result};
use crate::problem::CostSpec;

/// Lookahead horizon W. `Infinite` solves the initial-prediction problem
/// before the first stage instead of running infinitely many pre-iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Lookahead {
    Finite(usize),
    Infinite,
}

impl Lookahead {
    pub fn finite(self) -> Option<usize> {
        match self {
            Lookahead::Finite(w) => Some(w),
            Lookahead::Infinite => None,
        }
    }

    /// min(W, cap), treating ∞ as larger than anything.
    pub fn capped(self, cap: usize) -> usize {
        match self {
            Lookahead::Finite(w) => w.min(cap),
            Lookahead::Infinite => cap,
        }
    }
}

impl fmt::Display for Lookahead {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lookahead::Finite(w) => write!(f, "{w}"),
            Lookahead::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for Lookahead {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "inf" | "Inf" | "INF" | "infinity" | "∞" => Ok(Lookahead::Infinite),
            _ => s
                .parse::<usize>()
                .map(Lookahead::Finite)
                .map_err(|e| Error::Config(format!("lookahead {s:?} is neither an integer nor \"inf\": {e}"))),
        }
    }
}

/// Stepsizes ξ_τ for the OGD initialization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OgdStepsize {
    /// ξ_τ = 4/(αj), j = ((τ − 1) mod Δ) + 1: OGD restarted every Δ stages.
    Restarted {
        epoch: usize,
    },
    Constant(f64),
}

impl OgdStepsize {
    /// Epoch length Δ = ⌈√(2T/V_T)⌉.
    pub fn from_variation(horizon: usize, variation: f64) -> Result<Self> {
        if !(variation > 0.0) || !variation.is_finite() {
            return Err(Error::invalid(format!("variation hint must be positive, got {variation}")));
        }
        let epoch = (2.0 * horizon as f64 / variation).sqrt().ceil().max(1.0) as usize;
        Ok(OgdStepsize::Restarted { epoch })
    }

    pub fn at(&self, tau: usize, alpha: f64) -> f64 {
        match *self {
            OgdStepsize::Restarted { epoch } => {
                let j = (tau - 1) % epoch + 1;
                4.0 / (alpha * j as f64)
            }
            OgdStepsize::Constant(xi) => xi,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            OgdStepsize::Restarted { epoch: 0 } => Err(Error::invalid("epoch length must be at least 1")),
            OgdStepsize::Constant(xi) if !(xi > 0.0) || !xi.is_finite() => {
                Err(Error::invalid(format!("OGD stepsize must be positive, got {xi}")))
            }
            _ => Ok(()),
        }
    }
}

/// Builds a fresh oracle instance per run.
pub type OracleFactory = Arc<dyn Fn() -> Box<dyn InitOracle> + Send + Sync>;

#[derive(Clone)]
pub enum OracleKind {
    /// x_{t+W}(0) = x_{t+W−1}(0).
    Hold,
    /// Projected OGD on the predicted stage cost.
    RestartedOgd(OgdStepsize),
    Custom(OracleFactory),
}

impl fmt::Debug for OracleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OracleKind::Hold => f.write_str("Hold"),
            OracleKind::RestartedOgd(s) => f.debug_tuple("RestartedOgd").field(s).finish(),
            OracleKind::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AlgoConfig {
    pub lookahead: Lookahead,
    pub eta: f64,
    pub oracle: OracleKind,
    /// Keep every intermediate iterate x_τ(k) in the trace.
    pub record_iterates: bool,
    /// Tolerance for the initial-prediction solve when W is infinite.
    pub infinite_tol: f64,
}

impl AlgoConfig {
    pub fn new(lookahead: Lookahead, eta: f64, oracle: OracleKind) -> Self {
        AlgoConfig { lookahead, eta, oracle, record_iterates: false, infinite_tol: 1e-10 }
    }

    /// η = 1/(2L).
    pub fn with_default_step(spec: &CostSpec, lookahead: Lookahead, oracle: OracleKind) -> Self {
        Self::new(lookahead, 0.5 / spec.smoothness(), oracle)
    }

    pub fn recording(mut self) -> Self {
        self.record_iterates = true;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid(format!("stepsize η must be positive, got {}", self.eta)));
        }
        if !(self.infinite_tol > 0.0) {
            return Err(Error::invalid("solve tolerance must be positive"));
        }
        if let OracleKind::RestartedOgd(s) = &self.oracle {
            s.validate()?;
        }
        Ok(())
    }
}

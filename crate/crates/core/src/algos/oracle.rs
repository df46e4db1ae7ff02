use std::cell::RefCell;

use super::config::OgdStepsize;
use crate::error::Result;
use crate::predict::PredictionTable;
use crate::problem::{CostSpec, FeasibleSet};

/// One read of the prediction table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictionRead {
    /// Stage t at which the read happened (may be ≤ 0 for pre-iterations).
    pub stage: i64,
    /// Index τ of the parameter that was read.
    pub tau: usize,
    /// Information index s of θ_{τ|s}; always t − 1.
    pub info: i64,
    /// Iterate level being computed (0 for oracle initializations).
    pub level: usize,
}

/// What an agent knows at stage t: θ_{τ|t−1} for every τ (which is the true
/// θ_τ once τ ≤ t − 1).
pub struct CausalView<'a> {
    table: &'a PredictionTable,
    stage: i64,
    level: usize,
    log: Option<&'a RefCell<Vec<PredictionRead>>>,
}

impl<'a> CausalView<'a> {
    pub(crate) fn new(
        table: &'a PredictionTable,
        stage: i64,
        level: usize,
        log: Option<&'a RefCell<Vec<PredictionRead>>>,
    ) -> Self {
        CausalView { table, stage, level, log }
    }

    pub fn stage(&self) -> i64 {
        self.stage
    }

    pub fn horizon(&self) -> usize {
        self.table.horizon()
    }

    /// θ_{τ|t−1}.
    pub fn prediction(&self, tau: usize) -> &'a [f64] {
        if let Some(log) = self.log {
            log.borrow_mut().push(PredictionRead { stage: self.stage, tau, info: self.stage - 1, level: self.level });
        }
        self.table.prediction(tau, self.stage - 1)
    }
}

/// Inputs available to an initialization oracle when it produces x_τ(0).
pub struct OracleContext<'a> {
    pub spec: &'a CostSpec,
    pub set: &'a FeasibleSet,
    pub tau: usize,
    pub view: &'a CausalView<'a>,
}

/// An online procedure producing x_τ(0) one window ahead. Called once per
/// τ = 2..T in increasing order; `prev` is x_{τ−1}(0).
pub trait InitOracle: Send {
    fn init(&mut self, ctx: &OracleContext<'_>, prev: &[f64]) -> Result<Vec<f64>>;
}

/// Repeats the previous initialization, so every x_τ(0) equals x_0.
#[derive(Debug, Default, Clone, Copy)]
pub struct HoldOracle;

impl InitOracle for HoldOracle {
    fn init(&mut self, _ctx: &OracleContext<'_>, prev: &[f64]) -> Result<Vec<f64>> {
        Ok(prev.to_vec())
    }
}

/// x_τ(0) = Π[x_{τ−1}(0) − ξ_τ ∇f(x_{τ−1}(0); θ_{τ−1|t−1})].
///
/// At an epoch boundary only the stepsize index resets; the iterate carries
/// over from the previous initialization.
#[derive(Debug, Clone, Copy)]
pub struct OgdOracle {
    pub stepsize: OgdStepsize,
}

impl InitOracle for OgdOracle {
    fn init(&mut self, ctx: &OracleContext<'_>, prev: &[f64]) -> Result<Vec<f64>> {
        let theta = ctx.view.prediction(ctx.tau - 1);
        let xi = self.stepsize.at(ctx.tau, ctx.spec.constants().alpha);
        let mut grad = vec![0.0; prev.len()];
        ctx.spec.stage_grad(prev, theta, &mut grad);
        let mut next: Vec<f64> = prev.iter().zip(&grad).map(|(x, g)| x - xi * g).collect();
        ctx.set.project_in_place(&mut next);
        Ok(next)
    }
}

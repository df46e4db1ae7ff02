use std::io::Write;

use super::oracle::PredictionRead;
use crate::error::Result;
use crate::problem::DecisionTrajectory;

/// x_τ(k) as computed at stage t.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub stage: i64,
    pub tau: usize,
    pub level: usize,
    pub value: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    /// Committed decisions x_t(W), t = 1..T.
    pub outputs: DecisionTrajectory,
    /// Oracle initializations x_τ(0), τ = 1..T (empty for the fixed-horizon baselines).
    pub initializations: Vec<Vec<f64>>,
    /// Every prediction read, in order.
    pub reads: Vec<PredictionRead>,
    /// Intermediate iterates; empty unless recording was requested.
    pub iterates: Vec<IterateRecord>,
}

impl RunTrace {
    /// The oracle's own trajectory x(0), if this run had one.
    pub fn initial_trajectory(&self) -> Option<DecisionTrajectory> {
        if self.initializations.is_empty() {
            return None;
        }
        self.outputs.with_values(self.initializations.concat()).ok()
    }

    /// Rows `t,component,x_value`.
    pub fn write_outputs_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "component", "x_value"])?;
        for (i, x) in self.outputs.iter().enumerate() {
            for (c, v) in x.iter().enumerate() {
                w.write_record([(i + 1).to_string(), c.to_string(), format!("{v:.16e}")])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Rows `t,k,tau,component,iterate` for the recorded iterates.
    pub fn write_iterates_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "k", "tau", "component", "iterate"])?;
        for rec in &self.iterates {
            for (c, v) in rec.value.iter().enumerate() {
                w.write_record([
                    rec.stage.to_string(),
                    rec.level.to_string(),
                    rec.tau.to_string(),
                    c.to_string(),
                    format!("{v:.16e}"),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

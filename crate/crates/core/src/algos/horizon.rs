//! Fixed-horizon baselines: committed horizon control (CHC) and its
//! averaging special case (AFHC).

use super::rhig::validate_instance;
use super::trace::RunTrace;
use crate::error::{Error, Result};
use crate::offline::{self, SolverOptions};
use crate::predict::PredictionTable;
use crate::problem::{CostSpec, DecisionTrajectory, FeasibleSet, ParamTrajectory};

/// Sub-problem tolerance for the plans.
const PLAN_TOL: f64 = 1e-9;

/// AFHC: CHC with commitment level v = W.
pub fn afhc_run(spec: &CostSpec, set: &FeasibleSet, table: &PredictionTable, w: usize, x0: &[f64]) -> Result<RunTrace> {
    if w < 1 {
        return Err(Error::invalid("AFHC needs a lookahead of at least 1"));
    }
    chc_run(spec, set, table, w, w, x0)
}

/// CHC with lookahead `w` and commitment level `v`.
///
/// Version r ∈ {0..v−1} plans at stage 1 and then at every stage s ≡ r + 1
/// (mod v). A plan made at stage s minimizes the cost of stages
/// s..min(s+W−1, T) under the predictions θ_{·|s−1}, starting from the
/// version's own previous decision, and is followed until the version
/// replans. The decision is the average of the v versions.
pub fn chc_run(
    spec: &CostSpec,
    set: &FeasibleSet,
    table: &PredictionTable,
    w: usize,
    v: usize,
    x0: &[f64],
) -> Result<RunTrace> {
    if v < 1 || v > w {
        return Err(Error::invalid(format!("commitment level must satisfy 1 <= v <= W, got v={v}, W={w}")));
    }
    validate_instance(spec, set, table, x0)?;
    let horizon = table.horizon();
    let n = x0.len();
    let mut sum = vec![0.0; n * horizon];
    let mut reads = Vec::new();
    for r in 0..v {
        // own decisions x_{−1}, x_0, x_1, ... of this version
        let mut own: Vec<Vec<f64>> = vec![x0.to_vec(), x0.to_vec()];
        let mut plan: Vec<Vec<f64>> = Vec::new();
        let mut plan_start = 0usize;
        for t in 1..=horizon {
            if t == 1 || (t > r && (t - r - 1) % v == 0) {
                let end = (t + w - 1).min(horizon);
                let theta = ParamTrajectory::new(
                    table.dim(),
                    (t..=end).flat_map(|tau| table.prediction(tau, t as i64 - 1).to_vec()).collect(),
                )?;
                reads.extend((t..=end).map(|tau| super::oracle::PredictionRead {
                    stage: t as i64,
                    tau,
                    info: t as i64 - 1,
                    level: 0,
                }));
                let prior = own[own.len() - 2].clone();
                let last = own[own.len() - 1].clone();
                let start = DecisionTrajectory::with_prior(prior, last.clone(), last.repeat(end - t + 1))?;
                let sol = offline::solve(spec, &theta, set, start, SolverOptions::with_tol(PLAN_TOL))?;
                plan = sol.x_star.iter().map(<[f64]>::to_vec).collect();
                plan_start = t;
            }
            let x = plan[t - plan_start].clone();
            for (s, xv) in sum[(t - 1) * n..t * n].iter_mut().zip(&x) {
                *s += xv;
            }
            own.push(x);
        }
    }
    let values = sum.into_iter().map(|s| s / v as f64).collect();
    Ok(RunTrace {
        outputs: DecisionTrajectory::new(x0.to_vec(), values)?,
        initializations: Vec::new(),
        reads,
        iterates: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad() -> CostSpec {
        CostSpec::quadratic_tracking(1.0, 0.5).unwrap()
    }

    fn noisy_table() -> PredictionTable {
        let truth = ParamTrajectory::scalar(vec![1.0, -1.0, 2.0, 0.5, 3.0, -2.0, 0.0]).unwrap();
        PredictionTable::from_fn(truth.clone(), |tau, s| {
            vec![truth.stage(tau)[0] + 0.3 * ((tau * 7 + s * 3) as f64).sin() * (tau - s) as f64]
        })
        .unwrap()
    }

    #[test]
    fn greedy_single_step_plans() {
        let set = FeasibleSet::unconstrained(1).unwrap();
        let table = noisy_table();
        let trace = afhc_run(&quad(), &set, &table, 1, &[0.0]).unwrap();
        // one-step plan: argmin ½(x−θ_{t|t−1})² + ¼(x − x_{t−1})²
        let mut prev = 0.0;
        for t in 1..=table.horizon() {
            let th = table.prediction(t, t as i64 - 1)[0];
            let x = (th + 0.5 * prev) / 1.5;
            assert!((trace.outputs.stage(t)[0] - x).abs() < 1e-12);
            prev = x;
        }
    }

    #[test]
    fn exact_full_horizon_plans_recover_offline_optimum() {
        let set = FeasibleSet::cube(1, -1.0, 1.5).unwrap();
        let truth = noisy_table().truth().clone();
        let table = PredictionTable::exact(truth.clone());
        let x_star = offline::offline_optimum(&quad(), &truth, &set, &[0.0], 1e-12).unwrap();
        let horizon = truth.horizon();
        for trace in [
            afhc_run(&quad(), &set, &table, horizon, &[0.0]).unwrap(),
            chc_run(&quad(), &set, &table, horizon, 2, &[0.0]).unwrap(),
        ] {
            for (a, b) in trace.outputs.stacked().iter().zip(x_star.x_star.stacked()) {
                assert!((a - b).abs() < 1e-7, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn full_commitment_equals_afhc() {
        let set = FeasibleSet::unconstrained(1).unwrap();
        let table = noisy_table();
        let a = afhc_run(&quad(), &set, &table, 3, &[0.0]).unwrap();
        let c = chc_run(&quad(), &set, &table, 3, 3, &[0.0]).unwrap();
        assert_eq!(a.outputs, c.outputs);
    }

    #[test]
    fn unit_commitment_is_receding_horizon() {
        let set = FeasibleSet::unconstrained(1).unwrap();
        let table = noisy_table();
        let w = 3;
        let trace = chc_run(&quad(), &set, &table, w, 1, &[0.0]).unwrap();
        let mut prev = vec![0.0];
        for t in 1..=table.horizon() {
            let end = (t + w - 1).min(table.horizon());
            let theta =
                ParamTrajectory::scalar((t..=end).map(|tau| table.prediction(tau, t as i64 - 1)[0]).collect()).unwrap();
            let sol = offline::offline_optimum(&quad(), &theta, &set, &prev, 1e-12).unwrap();
            prev = sol.x_star.stage(1).to_vec();
            assert!((trace.outputs.stage(t)[0] - prev[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn commitment_out_of_range() {
        let set = FeasibleSet::unconstrained(1).unwrap();
        let table = noisy_table();
        assert!(chc_run(&quad(), &set, &table, 3, 4, &[0.0]).is_err());
        assert!(chc_run(&quad(), &set, &table, 3, 0, &[0.0]).is_err());
        assert!(afhc_run(&quad(), &set, &table, 0, &[0.0]).is_err());
    }
}

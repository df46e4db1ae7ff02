use std::cell::RefCell;

use super::config::{AlgoConfig, Lookahead, OracleKind};
use super::oracle::{CausalView, HoldOracle, InitOracle, OgdOracle, OracleContext, PredictionRead};
use super::trace::{IterateRecord, RunTrace};
use crate::error::{Error, Result};
use crate::offline::{self, local_gradient, SolverOptions};
use crate::predict::PredictionTable;
use crate::problem::{Arity, CostFamily, CostSpec, DecisionTrajectory, FeasibleSet};

/// The three most recent iterate levels of every stage variable.
struct Iterates {
    x_prior: Vec<f64>,
    x0: Vec<f64>,
    latest: Vec<Option<usize>>,
    slots: Vec<[Vec<f64>; 3]>,
}

impl Iterates {
    fn new(x0: &[f64], horizon: usize) -> Self {
        let empty = || [Vec::new(), Vec::new(), Vec::new()];
        Iterates {
            x_prior: x0.to_vec(),
            x0: x0.to_vec(),
            latest: vec![None; horizon + 1],
            slots: (0..=horizon).map(|_| empty()).collect(),
        }
    }

    fn latest(&self, tau: usize) -> Option<usize> {
        self.latest[tau]
    }

    fn get(&self, tau: i64, level: usize) -> &[f64] {
        match tau {
            -1 => &self.x_prior,
            0 => &self.x0,
            t => {
                let t = t as usize;
                let latest = self.latest[t].expect("stage variable read before initialization");
                assert!(
                    level <= latest && level + 2 >= latest,
                    "level {level} of x_{t} not retained (latest {latest})"
                );
                &self.slots[t][level % 3]
            }
        }
    }

    fn set(&mut self, tau: usize, level: usize, value: Vec<f64>) {
        self.slots[tau][level % 3] = value;
        self.latest[tau] = Some(level);
    }
}

struct Runner<'a> {
    spec: &'a CostSpec,
    set: &'a FeasibleSet,
    table: &'a PredictionTable,
    eta: f64,
    horizon: usize,
    oracle: Box<dyn InitOracle>,
    reads: RefCell<Vec<PredictionRead>>,
    iterates: Option<Vec<IterateRecord>>,
    inits: Vec<Vec<f64>>,
    x: Iterates,
}

impl Runner<'_> {
    fn record(&mut self, stage: i64, tau: usize, level: usize) {
        if let Some(log) = &mut self.iterates {
            log.push(IterateRecord { stage, tau, level, value: self.x.get(tau as i64, level).to_vec() });
        }
    }

    /// Line 4–5: x_{t+W}(0) from the oracle.
    fn initialize(&mut self, stage: i64, tau: usize) -> Result<()> {
        let view = CausalView::new(self.table, stage, 0, Some(&self.reads));
        let ctx = OracleContext { spec: self.spec, set: self.set, tau, view: &view };
        let prev = self.inits[tau - 2].clone();
        let value = self.oracle.init(&ctx, &prev).map_err(|e| Error::Oracle { stage, source: Box::new(e) })?;
        if value.len() != prev.len() {
            return Err(Error::Oracle {
                stage,
                source: Box::new(Error::Dimension { expected: prev.len(), got: value.len() }),
            });
        }
        self.inits.push(value.clone());
        Ok(())
    }

    /// Line 7–8 for a single τ at stage t: x_τ(k) from level k − 1.
    fn update(&mut self, stage: i64, tau: usize, k: usize) {
        let horizon = self.horizon;
        let t = tau as i64;
        let x = &self.x;
        let lower = |s: i64| x.get(s, k - 1);
        let upper = |s: i64| -> &[f64] {
            if s as usize > horizon {
                return x.get(t, k - 1);
            }
            x.get(s, k - 1)
        };
        let xp2: &[f64] = if self.spec.arity() == Arity::Triple && tau + 2 <= horizon {
            // level k−1 of x_{τ+2} is only produced at stage t+1; use its
            // freshest value, or x_{τ+1} if it has not been initialized yet
            match x.latest(tau + 2) {
                Some(level) => x.get(t + 2, level),
                None => upper(t + 1),
            }
        } else {
            upper(t)
        };
        let window = [
            if self.spec.arity() == Arity::Triple { lower(t - 2) } else { lower(t - 1) },
            lower(t - 1),
            x.get(t, k - 1),
            upper(t + 1),
            xp2,
        ];
        let view = CausalView::new(self.table, stage, k, Some(&self.reads));
        let theta = view.prediction(tau);
        let mut grad = vec![0.0; window[2].len()];
        local_gradient(self.spec, window, theta, tau, horizon, &mut grad);
        let mut next: Vec<f64> = window[2].iter().zip(&grad).map(|(v, g)| v - self.eta * g).collect();
        self.set.project_in_place(&mut next);
        self.x.set(tau, k, next);
        self.record(stage, tau, k);
    }

    /// Stages `first..=T` of the schedule with lookahead `w`.
    fn run_stages(&mut self, first: i64, w: usize) -> Result<()> {
        let horizon = self.horizon as i64;
        let w_i = w as i64;
        for t in first..=horizon {
            let target = t + w_i;
            if target >= 2 && target <= horizon {
                self.initialize(t, target as usize)?;
                let tau = target as usize;
                self.x.set(tau, 0, self.inits[tau - 1].clone());
                self.record(t, tau, 0);
            }
            let top = (t + w_i - 1).min(horizon);
            let bottom = t.max(1);
            let mut tau = top;
            while tau >= bottom {
                let k = (t + w_i - tau) as usize;
                self.update(t, tau as usize, k);
                tau -= 1;
            }
        }
        Ok(())
    }
}

/// Runs RHIG over the whole horizon and returns the committed decisions.
pub fn rhig_run(
    spec: &CostSpec,
    set: &FeasibleSet,
    table: &PredictionTable,
    cfg: &AlgoConfig,
    x0: &[f64],
) -> Result<RunTrace> {
    cfg.validate()?;
    validate_instance(spec, set, table, x0)?;
    let horizon = table.horizon();
    let oracle: Box<dyn InitOracle> = match &cfg.oracle {
        OracleKind::Hold => Box::new(HoldOracle),
        OracleKind::RestartedOgd(stepsize) => Box::new(OgdOracle { stepsize: *stepsize }),
        OracleKind::Custom(factory) => factory(),
    };
    let mut runner = Runner {
        spec,
        set,
        table,
        eta: cfg.eta,
        horizon,
        oracle,
        reads: RefCell::new(Vec::new()),
        iterates: cfg.record_iterates.then(Vec::new),
        inits: vec![x0.to_vec()],
        x: Iterates::new(x0, horizon),
    };
    runner.x.set(1, 0, x0.to_vec());

    let w = match cfg.lookahead {
        Lookahead::Finite(w) => {
            runner.record(1 - w as i64, 1, 0);
            runner.run_stages(2 - w as i64, w)?;
            w
        }
        Lookahead::Infinite => {
            // a finite stand-in long enough that every stage is still in the
            // window at t = 1; pre-iterations are replaced by an exact solve
            let w = horizon + 3;
            for tau in 2..=horizon {
                runner.initialize(tau as i64 - w as i64, tau)?;
            }
            let initial = table.predicted_trajectory(0);
            let start = DecisionTrajectory::new(x0.to_vec(), runner.inits.concat())?;
            let warm = offline::solve(spec, &initial, set, start, SolverOptions::with_tol(cfg.infinite_tol))?;
            for (i, v) in warm.x_star.iter().enumerate() {
                let tau = i + 1;
                let top = w - tau;
                for level in top - 2..=top {
                    runner.x.set(tau, level, v.to_vec());
                }
                runner.record(0, tau, top);
            }
            runner.run_stages(1, w)?;
            w
        }
    };

    let values: Vec<f64> = (1..=horizon).flat_map(|t| runner.x.get(t as i64, w).to_vec()).collect();
    let outputs = DecisionTrajectory::new(x0.to_vec(), values)?;
    Ok(RunTrace {
        outputs,
        initializations: runner.inits,
        reads: runner.reads.into_inner(),
        iterates: runner.iterates.unwrap_or_default(),
    })
}

pub(crate) fn validate_instance(spec: &CostSpec, set: &FeasibleSet, table: &PredictionTable, x0: &[f64]) -> Result<()> {
    if x0.len() != set.dim() {
        return Err(Error::Dimension { expected: set.dim(), got: x0.len() });
    }
    if matches!(spec.family(), CostFamily::Quadratic { .. }) && table.dim() != x0.len() {
        return Err(Error::Dimension { expected: x0.len(), got: table.dim() });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("initial decision must be finite"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algos::config::OgdStepsize;
    use crate::problem::ParamTrajectory;

    fn quad(alpha: f64, beta: f64) -> CostSpec {
        CostSpec::quadratic_tracking(alpha, beta).unwrap()
    }

    fn open() -> FeasibleSet {
        FeasibleSet::unconstrained(1).unwrap()
    }

    #[test]
    fn single_stage_hand_evaluation() {
        let truth = ParamTrajectory::scalar(vec![5.0]).unwrap();
        let table = PredictionTable::from_fn(truth, |_, _| vec![2.0]).unwrap();
        let cfg = AlgoConfig::new(Lookahead::Finite(1), 0.5, OracleKind::Hold);
        let trace = rhig_run(&quad(1.0, 0.0), &open(), &table, &cfg, &[0.0]).unwrap();
        assert_eq!(trace.outputs.stacked(), &[1.0]);
    }

    #[test]
    fn zero_lookahead_outputs_initializations() {
        let truth = ParamTrajectory::scalar(vec![1.0, 3.0, -2.0, 0.5]).unwrap();
        let table = PredictionTable::exact(truth);
        let cfg = AlgoConfig::new(Lookahead::Finite(0), 0.1, OracleKind::RestartedOgd(OgdStepsize::Constant(0.5)));
        let trace = rhig_run(&quad(1.0, 0.5), &open(), &table, &cfg, &[0.0]).unwrap();
        assert_eq!(trace.outputs.stacked(), trace.initializations.concat().as_slice());
        // x_2(0) = 0 − 0.5·(0 − θ_1) = 0.5
        assert_eq!(trace.outputs.stage(2), &[0.5]);
    }

    #[test]
    fn hold_oracle_is_constant() {
        let truth = ParamTrajectory::scalar(vec![1.0, 3.0, -2.0]).unwrap();
        let cfg = AlgoConfig::new(Lookahead::Finite(0), 0.1, OracleKind::Hold);
        let trace = rhig_run(&quad(1.0, 0.5), &open(), &PredictionTable::exact(truth), &cfg, &[7.0]).unwrap();
        assert!(trace.initializations.iter().all(|v| v == &[7.0]));
    }

    #[test]
    fn ogd_first_step_overshoots_without_a_box() {
        let truth = ParamTrajectory::scalar(vec![1.0, 1.0]).unwrap();
        let table = PredictionTable::exact(truth);
        let cfg =
            AlgoConfig::new(Lookahead::Finite(0), 0.1, OracleKind::RestartedOgd(OgdStepsize::Restarted { epoch: 1 }));
        let trace = rhig_run(&quad(1.0, 0.0), &open(), &table, &cfg, &[0.0]).unwrap();
        assert_eq!(trace.initializations[1], vec![4.0]);
        let boxed = FeasibleSet::cube(1, -2.0, 2.0).unwrap();
        let trace = rhig_run(&quad(1.0, 0.0), &boxed, &table, &cfg, &[0.0]).unwrap();
        assert_eq!(trace.initializations[1], vec![2.0]);
    }

    #[test]
    fn figure_one_schedule() {
        let truth = ParamTrajectory::scalar(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let table = PredictionTable::exact(truth);
        let cfg = AlgoConfig::new(Lookahead::Finite(2), 0.1, OracleKind::Hold);
        let trace = rhig_run(&quad(1.0, 0.5), &open(), &table, &cfg, &[0.0]).unwrap();
        let updates: Vec<(i64, usize, usize, i64)> =
            trace.reads.iter().filter(|r| r.level > 0).map(|r| (r.stage, r.tau, r.level, r.info.max(0))).collect();
        let expected = vec![
            (0, 1, 1, 0),
            (1, 2, 1, 0),
            (1, 1, 2, 0),
            (2, 3, 1, 1),
            (2, 2, 2, 1),
            (3, 4, 1, 2),
            (3, 3, 2, 2),
            (4, 4, 2, 3),
        ];
        assert_eq!(updates, expected);
    }

    #[test]
    fn reads_are_causal() {
        let truth = ParamTrajectory::scalar((0..7).map(|v| v as f64).collect()).unwrap();
        let table = PredictionTable::exact(truth);
        for w in [0, 1, 3, 7, 10] {
            let cfg = AlgoConfig::new(Lookahead::Finite(w), 0.1, OracleKind::RestartedOgd(OgdStepsize::Constant(1.0)));
            let trace = rhig_run(&quad(1.0, 0.5), &open(), &table, &cfg, &[0.0]).unwrap();
            assert!(trace.reads.iter().all(|r| r.info < r.stage));
        }
    }

    #[test]
    fn infinite_lookahead_matches_long_finite_lookahead() {
        let truth = ParamTrajectory::scalar(vec![1.0, -1.0, 2.0, 0.0]).unwrap();
        let table = PredictionTable::from_fn(truth, |tau, s| vec![tau as f64 * 0.3 - s as f64 * 0.1]).unwrap();
        let spec = quad(1.0, 0.5);
        let eta = 0.5 / spec.smoothness();
        let run = |w| {
            let cfg = AlgoConfig::new(w, eta, OracleKind::Hold);
            rhig_run(&spec, &open(), &table, &cfg, &[0.0]).unwrap().outputs
        };
        let inf = run(Lookahead::Infinite);
        let long = run(Lookahead::Finite(400));
        for (a, b) in inf.stacked().iter().zip(long.stacked()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn triple_arity_runs_and_stays_finite() {
        let spec = CostSpec::double_integrator_tracking(1.0, 1e-5, 1.0, 1.0, 9.8, 0.1).unwrap();
        let truth = ParamTrajectory::scalar((1..=30).map(|t| (t as f64 * 0.1).sin() + 1.0).collect()).unwrap();
        let table = PredictionTable::exact(truth.clone());
        for w in [0, 1, 2, 5, 35] {
            let cfg = AlgoConfig::new(
                Lookahead::Finite(w),
                1.0 / spec.smoothness(),
                OracleKind::RestartedOgd(OgdStepsize::Constant(1.0)),
            );
            let trace = rhig_run(&spec, &open(), &table, &cfg, &[1.0]).unwrap();
            assert!(trace.outputs.stacked().iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let table = PredictionTable::exact(ParamTrajectory::scalar(vec![1.0]).unwrap());
        let cfg = AlgoConfig::new(Lookahead::Finite(1), 0.5, OracleKind::Hold);
        assert!(rhig_run(&quad(1.0, 0.5), &open(), &table, &cfg, &[0.0, 0.0]).is_err());
        let bad = AlgoConfig::new(Lookahead::Finite(1), 0.0, OracleKind::Hold);
        assert!(rhig_run(&quad(1.0, 0.5), &open(), &table, &bad, &[0.0]).is_err());
    }
}

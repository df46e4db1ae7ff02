use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;

use super::report::{sort_rows, AlgoId, AlgoSpec, RegretReport, ReportRow};
use super::scenario::{Instance, Scenario};
use crate::algos::{afhc_run, chc_run, rhig_run, AlgoConfig, Lookahead, OracleKind, RunTrace};
use crate::bounds::{self, BoundConstants};
use crate::error::{Error, Result};
use crate::offline;
use crate::predict::{PredictionTable, StochasticPredictionModel};

/// Offline optimum tolerance used for every regret.
pub const OFFLINE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentOptions {
    pub n_seeds: usize,
    pub base_seed: u64,
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
    /// Record wall time per run (otherwise `wall_ms` is 0).
    pub timing: bool,
}

impl ExperimentOptions {
    pub fn new(n_seeds: usize, base_seed: u64) -> Self {
        ExperimentOptions { n_seeds, base_seed, threads: None, timing: false }
    }
}

fn check_algorithm(a: &AlgoSpec) -> Result<()> {
    let bad = |msg: String| Err(Error::Config(msg));
    match a.algo {
        AlgoId::Afhc | AlgoId::Chc if a.lookahead == Lookahead::Finite(0) => bad(format!("{} needs W >= 1", a.algo)),
        AlgoId::Chc => match (a.commitment, a.lookahead) {
            (None, _) => bad("chc needs a commitment level v".into()),
            (Some(0), _) => bad("commitment level v must be at least 1".into()),
            (Some(v), Lookahead::Finite(w)) if v > w => bad(format!("commitment level v={v} exceeds W={w}")),
            _ => Ok(()),
        },
        _ => Ok(()),
    }
}

/// Runs one algorithm on one instance.
pub fn run_algorithm(scenario: &Scenario, inst: &Instance, algo: &AlgoSpec) -> Result<RunTrace> {
    check_algorithm(algo)?;
    let horizon = inst.horizon();
    let capped = algo.lookahead.capped(horizon).max(1);
    match algo.algo {
        AlgoId::Rhig | AlgoId::Rhgd | AlgoId::Ogd => {
            let exact;
            let table = if algo.algo == AlgoId::Rhgd {
                exact = PredictionTable::exact(inst.truth().clone());
                &exact
            } else {
                &inst.table
            };
            let cfg = AlgoConfig::new(
                algo.reported_lookahead(),
                scenario.eta.resolve(inst.spec.smoothness()),
                OracleKind::RestartedOgd(scenario.oracle_stepsize(inst)?),
            );
            rhig_run(&inst.spec, &inst.set, table, &cfg, &inst.x0)
        }
        AlgoId::Afhc => afhc_run(&inst.spec, &inst.set, &inst.table, capped, &inst.x0),
        AlgoId::Chc => {
            let v = algo.commitment.expect("checked above");
            chc_run(&inst.spec, &inst.set, &inst.table, capped, v.min(capped), &inst.x0)
        }
    }
}

fn failed_row(scenario: &str, algo: &AlgoSpec, seed: u64, offline_cost: f64) -> ReportRow {
    ReportRow {
        scenario: scenario.to_string(),
        algorithm: algo.algo,
        lookahead: algo.reported_lookahead(),
        extra_param: algo.commitment.filter(|_| algo.algo == AlgoId::Chc),
        seed,
        realized_cost: f64::NAN,
        offline_cost,
        regret: f64::NAN,
        bound_theorem1: f64::NAN,
        bound_theorem5: f64::NAN,
        wall_ms: 0.0,
    }
}

/// Runs every algorithm on one instance against a shared offline optimum.
pub fn run_instance(
    scenario: &Scenario,
    inst: &Instance,
    algorithms: &[AlgoSpec],
    seed: u64,
    timing: bool,
) -> Vec<RegretReport> {
    let name = scenario.name();
    let offline = match offline::offline_optimum(&inst.spec, inst.truth(), &inst.set, &inst.x0, OFFLINE_TOL) {
        Ok(sol) => sol,
        Err(e) => {
            let msg = format!("offline optimum: {e}");
            return algorithms
                .iter()
                .map(|a| RegretReport {
                    row: failed_row(name, a, seed, f64::NAN),
                    stage_costs: Vec::new(),
                    init_regret: None,
                    error: Some(msg.clone()),
                })
                .collect();
        }
    };
    let constants = BoundConstants::from_spec(&inst.spec);
    algorithms
        .iter()
        .map(|algo| {
            let start = Instant::now();
            let outcome = run_algorithm(scenario, inst, algo).and_then(|trace| {
                let wall_ms = if timing { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
                let realized = offline::total_cost(&inst.spec, &trace.outputs, inst.truth())?;
                let stage_costs = offline::stage_costs(&inst.spec, &trace.outputs, inst.truth())?
                    .into_iter()
                    .map(|(f, d)| f + d)
                    .collect();
                let init_regret = match trace.initial_trajectory() {
                    Some(init) => Some(offline::total_cost(&inst.spec, &init, inst.truth())? - offline.cost),
                    None => None,
                };
                let bound1 = match (algo.algo, init_regret) {
                    (AlgoId::Rhig | AlgoId::Ogd | AlgoId::Rhgd, Some(reg_phi)) => {
                        let delta_sq = if algo.algo == AlgoId::Rhgd {
                            vec![0.0; inst.horizon()]
                        } else {
                            inst.table.delta_sq_norms(inst.horizon())
                        };
                        bounds::theorem1_bound(&constants, algo.reported_lookahead(), reg_phi, &delta_sq)
                    }
                    _ => f64::NAN,
                };
                let mut row = failed_row(name, algo, seed, offline.cost);
                row.realized_cost = realized;
                row.regret = realized - offline.cost;
                row.bound_theorem1 = bound1;
                row.wall_ms = wall_ms;
                Ok(RegretReport { row, stage_costs, init_regret, error: None })
            });
            outcome.unwrap_or_else(|e: Error| RegretReport {
                row: failed_row(name, algo, seed, offline.cost),
                stage_costs: Vec::new(),
                init_regret: None,
                error: Some(e.to_string()),
            })
        })
        .collect()
}

/// Fills `bound_theorem5` with the bound evaluated at the Monte Carlo mean
/// of Reg(φ) over the seeds of each (algorithm, W) group.
fn annotate_expected_bound(
    reports: &mut [RegretReport],
    constants: &BoundConstants,
    model: &StochasticPredictionModel,
) {
    let mut groups: HashMap<(AlgoId, Lookahead), Vec<f64>> = HashMap::new();
    for r in reports.iter() {
        if matches!(r.row.algorithm, AlgoId::Rhig | AlgoId::Ogd) {
            if let Some(reg_phi) = r.init_regret {
                groups.entry((r.row.algorithm, r.row.lookahead)).or_default().push(reg_phi);
            }
        }
    }
    for r in reports.iter_mut() {
        if let Some(values) = groups.get(&(r.row.algorithm, r.row.lookahead)) {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            r.row.bound_theorem5 = bounds::theorem5_bound(constants, r.row.lookahead, model, mean);
        }
    }
}

/// Runs `algorithms` on seeds base_seed, base_seed + 1, … in parallel. The
/// output is sorted by (algorithm, W, extra_param, seed) and does not depend
/// on the number of threads. Failures of individual runs become rows with an
/// error tag.
pub fn run_experiment(
    scenario: &Scenario,
    algorithms: &[AlgoSpec],
    opts: &ExperimentOptions,
) -> Result<Vec<RegretReport>> {
    if opts.n_seeds == 0 {
        return Err(Error::Config("need at least one seed".into()));
    }
    if algorithms.is_empty() {
        return Err(Error::Config("no algorithms given".into()));
    }
    for a in algorithms {
        check_algorithm(a)?;
    }
    let spec = scenario.cost_spec()?;
    let model = scenario.error_model()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let per_seed: Vec<Vec<RegretReport>> = pool.install(|| {
        (0..opts.n_seeds)
            .into_par_iter()
            .map(|i| {
                let seed = opts.base_seed.wrapping_add(i as u64);
                match scenario.instance_with_spec(&spec, seed) {
                    Ok(inst) => run_instance(scenario, &inst, algorithms, seed, opts.timing),
                    Err(e) => algorithms
                        .iter()
                        .map(|a| RegretReport {
                            row: failed_row(scenario.name(), a, seed, f64::NAN),
                            stage_costs: Vec::new(),
                            init_regret: None,
                            error: Some(format!("instance: {e}")),
                        })
                        .collect(),
                }
            })
            .collect()
    });
    let mut reports: Vec<RegretReport> = per_seed.into_iter().flatten().collect();
    if let Some(model) = &model {
        annotate_expected_bound(&mut reports, &BoundConstants::from_spec(&spec), model);
    }
    sort_rows(&mut reports, |r| &r.row);
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::scenario::PlanningParams;

    fn small() -> Scenario {
        let mut s = Scenario::planning(PlanningParams::default());
        s.apply([("T", "6")]).unwrap();
        s
    }

    #[test]
    fn one_seed_two_algorithms_share_offline_cost() {
        let algos =
            [AlgoSpec::new(AlgoId::Rhig, Lookahead::Finite(2)), AlgoSpec::new(AlgoId::Afhc, Lookahead::Finite(2))];
        let reports = run_experiment(&small(), &algos, &ExperimentOptions::new(1, 9)).unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].row.offline_cost, reports[1].row.offline_cost);
        assert_eq!(reports[0].row.algorithm, AlgoId::Afhc);
        for r in &reports {
            assert!(r.error.is_none());
            assert!(r.row.regret >= -1e-6);
            assert_eq!(r.row.wall_ms, 0.0);
            let sum: f64 = r.stage_costs.iter().sum();
            assert!((sum - r.row.realized_cost).abs() < 1e-9);
        }
        assert!(reports[1].row.bound_theorem5.is_finite());
        assert!(reports[0].row.bound_theorem1.is_nan());
    }

    #[test]
    fn independent_of_thread_count() {
        let algos = [AlgoSpec::new(AlgoId::Rhig, Lookahead::Finite(3)), AlgoSpec::chc(Lookahead::Finite(3), 2)];
        let mut opts = ExperimentOptions::new(6, 100);
        opts.threads = Some(1);
        let a = run_experiment(&small(), &algos, &opts).unwrap();
        opts.threads = Some(4);
        let b = run_experiment(&small(), &algos, &opts).unwrap();
        let csv = |reports: &[RegretReport]| {
            let mut buf = Vec::new();
            crate::bench::write_reports_csv(reports.iter().map(|r| &r.row), &mut buf).unwrap();
            buf
        };
        assert_eq!(csv(&a), csv(&b));
        assert_eq!(
            a.iter().map(|r| r.row.seed).collect::<Vec<_>>(),
            vec![100, 101, 102, 103, 104, 105, 100, 101, 102, 103, 104, 105]
        );
    }

    #[test]
    fn configuration_errors() {
        let opts = ExperimentOptions::new(1, 0);
        let s = small();
        assert!(run_experiment(&s, &[AlgoSpec::new(AlgoId::Chc, Lookahead::Finite(3))], &opts)
            .unwrap_err()
            .is_config_error());
        assert!(run_experiment(&s, &[AlgoSpec::chc(Lookahead::Finite(2), 3)], &opts).is_err());
        assert!(run_experiment(&s, &[AlgoSpec::new(AlgoId::Afhc, Lookahead::Finite(0))], &opts).is_err());
        assert!(run_experiment(&s, &[], &opts).is_err());
        assert!(run_experiment(&s, &[AlgoSpec::new(AlgoId::Ogd, Lookahead::Finite(0))], &ExperimentOptions::new(0, 0))
            .is_err());
    }

    #[test]
    fn failing_runs_become_tagged_rows() {
        // restarted OGD needs a finite V_T, which the unconstrained planning set lacks
        let mut s = small();
        s.apply([("xi", "restart")]).unwrap();
        let algos =
            [AlgoSpec::new(AlgoId::Rhig, Lookahead::Finite(1)), AlgoSpec::new(AlgoId::Afhc, Lookahead::Finite(1))];
        let reports = run_experiment(&s, &algos, &ExperimentOptions::new(2, 0)).unwrap();
        for r in &reports {
            match r.row.algorithm {
                AlgoId::Rhig => {
                    assert!(r.error.is_some());
                    assert!(r.row.regret.is_nan());
                }
                _ => assert!(r.error.is_none()),
            }
        }
    }

    #[test]
    fn ogd_reports_zero_lookahead() {
        let reports = run_experiment(
            &small(),
            &[AlgoSpec::new(AlgoId::Ogd, Lookahead::Finite(4))],
            &ExperimentOptions::new(1, 0),
        )
        .unwrap();
        assert_eq!(reports[0].row.lookahead, Lookahead::Finite(0));
        assert!(reports[0].row.regret <= reports[0].row.bound_theorem1 + 1e-9);
    }
}

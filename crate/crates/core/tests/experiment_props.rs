use proptest::prelude::*;
use soco::algos::Lookahead;
use soco::bench::{run_experiment, write_reports_csv, AlgoId, AlgoSpec, ExperimentOptions, Scenario};

fn algos(w: usize) -> Vec<AlgoSpec> {
    let w = Lookahead::Finite(w);
    vec![
        AlgoSpec::new(AlgoId::Rhig, w),
        AlgoSpec::new(AlgoId::Rhgd, w),
        AlgoSpec::new(AlgoId::Afhc, w),
        AlgoSpec::chc(w, 1),
        AlgoSpec::new(AlgoId::Ogd, Lookahead::Finite(0)),
    ]
}

fn csv(scenario: &Scenario, algos: &[AlgoSpec], opts: &ExperimentOptions) -> Vec<u8> {
    let reports = run_experiment(scenario, algos, opts).unwrap();
    let mut buf = Vec::new();
    write_reports_csv(reports.iter().map(|r| &r.row), &mut buf).unwrap();
    buf
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn regret_nonnegative_and_offline_shared(
        name in prop::sample::select(vec!["planning", "lowerbound"]),
        w in 1usize..6,
        gamma in 0.0f64..0.95,
        base in 0u64..1000,
    ) {
        let mut scenario = Scenario::by_name(name).unwrap();
        if name == "planning" {
            scenario.apply([("gamma", gamma.to_string().as_str()), ("T", "10")]).unwrap();
        }
        let reports = run_experiment(&scenario, &algos(w), &ExperimentOptions::new(3, base)).unwrap();
        prop_assert_eq!(reports.len(), 15);
        for r in &reports {
            prop_assert!(r.error.is_none());
            prop_assert!(r.row.regret >= -1e-6, "{:?}", r.row);
            let peer = reports.iter().find(|q| q.row.seed == r.row.seed).unwrap();
            prop_assert_eq!(r.row.offline_cost.to_bits(), peer.row.offline_cost.to_bits());
        }
        // exact predictions leave nothing for the rhgd bound beyond the oracle term
        for r in reports.iter().filter(|r| r.row.algorithm == AlgoId::Rhgd) {
            prop_assert!(r.row.regret <= r.row.bound_theorem1 + 1e-6);
        }
    }

    #[test]
    fn output_independent_of_threads(w in 0usize..5, base in 0u64..1000, threads in 2usize..5) {
        let scenario = Scenario::by_name("planning").unwrap();
        let single = ExperimentOptions { threads: Some(1), ..ExperimentOptions::new(4, base) };
        let many = ExperimentOptions { threads: Some(threads), ..ExperimentOptions::new(4, base) };
        let specs = [AlgoSpec::new(AlgoId::Rhig, Lookahead::Finite(w)), AlgoSpec::new(AlgoId::Afhc, Lookahead::Finite(w.max(1)))];
        prop_assert_eq!(csv(&scenario, &specs, &single), csv(&scenario, &specs, &many));
    }
}

#[test]
fn planning_regret_falls_with_lookahead_at_small_gamma() {
    let mut scenario = Scenario::by_name("planning").unwrap();
    scenario.apply([("gamma", "0.3")]).unwrap();
    let specs: Vec<AlgoSpec> = [0, 1, 3].iter().map(|&w| AlgoSpec::new(AlgoId::Rhig, Lookahead::Finite(w))).collect();
    let reports = run_experiment(&scenario, &specs, &ExperimentOptions::new(100, 0)).unwrap();
    let mean = |w: usize| {
        let v: Vec<f64> =
            reports.iter().filter(|r| r.row.lookahead == Lookahead::Finite(w)).map(|r| r.row.regret).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    assert!(mean(3) < mean(1) && mean(1) < mean(0), "{} {} {}", mean(0), mean(1), mean(3));
}

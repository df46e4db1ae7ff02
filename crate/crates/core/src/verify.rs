//! Quick property checks behind the `selftest` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algos::{rhig_run, AlgoConfig, Lookahead, OgdStepsize, OracleKind};
use crate::bench::{run_experiment, AlgoId, AlgoSpec, ExperimentOptions, Scenario};
use crate::bounds::{self, BoundConstants};
use crate::error::Result;
use crate::offline::{self, SolverOptions};
use crate::predict::PredictionTable;
use crate::problem::{CostSpec, DecisionTrajectory, FeasibleSet, ParamTrajectory};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Check { name, passed, detail }
    }
}

struct Case {
    spec: CostSpec,
    set: FeasibleSet,
    table: PredictionTable,
    x0: Vec<f64>,
}

fn random_case(rng: &mut ChaCha8Rng, max_horizon: usize, boxed: bool) -> Result<Case> {
    let n = rng.random_range(1..=2);
    let horizon = rng.random_range(1..=max_horizon);
    let spec = CostSpec::quadratic_tracking(rng.random_range(0.5..2.0), rng.random_range(0.0..2.0))?;
    let truth = ParamTrajectory::new(n, (0..n * horizon).map(|_| rng.random_range(-2.0..2.0)).collect())?;
    let noise = rng.random_range(0.0..0.5);
    let mut draws = |len: usize| -> Vec<f64> { (0..len).map(|_| noise * rng.random_range(-1.0..1.0)).collect() };
    let table = PredictionTable::from_fn(truth.clone(), |tau, s| {
        let lag = (tau - s) as f64;
        truth.stage(tau).iter().zip(draws(n)).map(|(v, e)| v + lag.sqrt() * e).collect()
    })?;
    let set = if boxed { FeasibleSet::cube(n, -1.0, 1.0)? } else { FeasibleSet::unconstrained(n)? };
    let x0 = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Ok(Case { spec, set, table, x0 })
}

/// RHIG's per-stage outputs against the batch recursion
/// x(k) = Π[x(k−1) − η∇C(x(k−1); θ − δ(W−k+1))].
pub fn schedule_equivalence(instances: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let boxed = rng.random_bool(0.5);
        let case = random_case(&mut rng, 10, boxed)?;
        let horizon = case.table.horizon();
        let w = rng.random_range(0..=horizon + 3);
        let cfg = AlgoConfig::with_default_step(
            &case.spec,
            Lookahead::Finite(w),
            OracleKind::RestartedOgd(OgdStepsize::Constant(0.3)),
        );
        let trace = rhig_run(&case.spec, &case.set, &case.table, &cfg, &case.x0)?;
        let mut x = trace.initial_trajectory().expect("RHIG records its initialization");
        for k in 1..=w {
            let theta = case.table.lagged_trajectory(w - k + 1);
            let g = offline::full_gradient(&case.spec, &x, &theta)?;
            let mut next: Vec<f64> = x.stacked().iter().zip(&g).map(|(a, b)| a - cfg.eta * b).collect();
            case.set.project_stacked(&mut next);
            x = x.with_values(next)?;
        }
        for (a, b) in x.stacked().iter().zip(trace.outputs.stacked()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(Check::new(
        "schedule equivalence",
        worst <= 1e-12,
        format!("max |RHIG − batch| = {worst:.3e} over {instances} instances"),
    ))
}

/// Hessian spectrum of C within [α, l_f + 2l_d].
pub fn strong_convexity_and_smoothness(trials: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..trials {
        let spec = CostSpec::quadratic_tracking(rng.random_range(0.2..3.0), rng.random_range(0.0..3.0))?;
        let horizon = rng.random_range(1..=8);
        let rep = offline::check_lemma1(&spec, horizon, 1, seed.wrapping_add(i as u64))?;
        let c = spec.constants();
        let over = (c.alpha - rep.min_eigenvalue).max(rep.max_eigenvalue - spec.smoothness());
        worst = worst.max(over).max(rep.max_violation());
    }
    Ok(Check::new(
        "Hessian within [alpha, L]",
        worst <= 1e-8,
        format!("worst excursion {worst:.3e} over {trials} draws"),
    ))
}

/// ‖∇C(x; θ′) − ∇C(x; θ)‖ ≤ h‖θ′ − θ‖.
pub fn gradient_error_bound(samples: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..samples {
        let spec = CostSpec::quadratic_tracking(rng.random_range(0.2..3.0), rng.random_range(0.0..3.0))?;
        let horizon = rng.random_range(1..=6);
        let mut draw = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random_range(-4.0..4.0)).collect() };
        let x = DecisionTrajectory::new(draw(1), draw(horizon))?;
        let a = ParamTrajectory::scalar(draw(horizon))?;
        let b = ParamTrajectory::scalar(draw(horizon))?;
        let ga = offline::full_gradient(&spec, &x, &a)?;
        let gb = offline::full_gradient(&spec, &x, &b)?;
        let lhs = crate::problem::sq_dist(&ga, &gb).sqrt();
        let rhs = spec.constants().h * crate::problem::sq_dist(a.stacked(), b.stacked()).sqrt();
        worst = worst.max(lhs - rhs);
    }
    Ok(Check::new("gradient error bound", worst <= 1e-9, format!("max excess {worst:.3e} over {samples} samples")))
}

/// Realized regret of RHIG never exceeds the deterministic bound.
pub fn deterministic_bound_soundness(instances: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..instances {
        let case = random_case(&mut rng, 12, true)?;
        let horizon = case.table.horizon();
        let w = Lookahead::Finite(rng.random_range(0..=horizon + 2));
        let cfg = AlgoConfig::with_default_step(&case.spec, w, OracleKind::RestartedOgd(OgdStepsize::Constant(0.5)));
        let trace = rhig_run(&case.spec, &case.set, &case.table, &cfg, &case.x0)?;
        let truth = case.table.truth();
        let opt = offline::offline_optimum(&case.spec, truth, &case.set, &case.x0, 1e-11)?;
        let reg = offline::total_cost(&case.spec, &trace.outputs, truth)? - opt.cost;
        let init = trace.initial_trajectory().expect("RHIG records its initialization");
        let reg_phi = offline::total_cost(&case.spec, &init, truth)? - opt.cost;
        let c = BoundConstants::from_spec(&case.spec);
        let bound = bounds::theorem1_bound(&c, w, reg_phi, &case.table.delta_sq_norms(horizon));
        worst = worst.max(reg - bound);
    }
    Ok(Check::new(
        "regret below deterministic bound",
        worst <= 1e-6,
        format!("max regret − bound = {worst:.3e} over {instances} instances"),
    ))
}

/// The banded direct solve against projected gradient descent on the same
/// objective declared as a general cost.
pub fn offline_solvers_agree(instances: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..instances {
        let case = random_case(&mut rng, 10, false)?;
        let c = *case.spec.constants();
        let general = CostSpec::custom(
            std::sync::Arc::new(crate::problem::TrackingQuadratic { alpha: c.alpha }),
            std::sync::Arc::new(crate::problem::SquaredDifference { beta: c.l_d / 2.0 }),
            c,
        )?;
        let truth = case.table.truth();
        let start = DecisionTrajectory::constant(case.x0.clone(), truth.horizon());
        let banded = offline::solve(&case.spec, truth, &case.set, start.clone(), SolverOptions::default())?;
        let pgd = offline::solve(&general, truth, &case.set, start, SolverOptions::with_tol(1e-12))?;
        for (a, b) in banded.x_star.stacked().iter().zip(pgd.x_star.stacked()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(Check::new(
        "offline solvers agree",
        worst <= 1e-8,
        format!("max |banded − PGD| = {worst:.3e} over {instances} instances"),
    ))
}

/// Same seeds give identical reports regardless of thread count.
pub fn experiment_determinism(seed: u64) -> Result<Check> {
    let mut scenario = Scenario::by_name("planning")?;
    scenario.apply([("T", "8")])?;
    let algos = [AlgoSpec::new(AlgoId::Rhig, Lookahead::Finite(2)), AlgoSpec::new(AlgoId::Afhc, Lookahead::Finite(2))];
    let render = |threads: usize| -> Result<Vec<u8>> {
        let mut opts = ExperimentOptions::new(8, seed);
        opts.threads = Some(threads);
        let reports = run_experiment(&scenario, &algos, &opts)?;
        let mut buf = Vec::new();
        crate::bench::write_reports_csv(reports.iter().map(|r| &r.row), &mut buf)?;
        Ok(buf)
    };
    let same = render(1)? == render(3)?;
    Ok(Check::new("seed determinism", same, "1 thread vs 3 threads".into()))
}

/// All checks at a size that runs in a few seconds.
pub fn selftest(seed: u64) -> Result<Vec<Check>> {
    Ok(vec![
        schedule_equivalence(100, seed)?,
        strong_convexity_and_smoothness(30, seed)?,
        gradient_error_bound(500, seed)?,
        deterministic_bound_soundness(50, seed)?,
        offline_solvers_agree(30, seed)?,
        experiment_determinism(seed)?,
    ])
}

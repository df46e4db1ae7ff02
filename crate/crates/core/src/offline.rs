//! The full-horizon objective C(x; θ), its stage-local gradients, and the
//! offline optimum in hindsight.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{dot, sq_dist, Arity, CostFamily, CostSpec, DecisionTrajectory, FeasibleSet, ParamTrajectory};

/// Stopping rule for projected gradient descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Bound on the gradient-mapping norm L‖x − Π(x − ∇C/L)‖.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-10, max_iter: 1_000_000 }
    }
}

impl SolverOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolverOptions { tol, ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OfflineSolution {
    pub x_star: DecisionTrajectory,
    pub cost: f64,
    pub iterations: usize,
    /// Final gradient-mapping norm; zero for the exact banded solve.
    pub residual: f64,
}

fn check_lengths(spec: &CostSpec, x: &DecisionTrajectory, theta: &ParamTrajectory) -> Result<()> {
    if x.horizon() != theta.horizon() {
        return Err(Error::Horizon { expected: theta.horizon(), got: x.horizon() });
    }
    if matches!(spec.family(), CostFamily::Quadratic { .. }) && x.dim() != theta.dim() {
        return Err(Error::Dimension { expected: x.dim(), got: theta.dim() });
    }
    Ok(())
}

/// C(x; θ) = Σ_t f(x_t; θ_t) + d(x_t, x_{t−1}[, x_{t−2}]), including the
/// switching cost against the fixed history.
pub fn total_cost(spec: &CostSpec, x: &DecisionTrajectory, theta: &ParamTrajectory) -> Result<f64> {
    check_lengths(spec, x, theta)?;
    let mut total = 0.0;
    for t in 1..=x.horizon() as i64 {
        total += spec.stage_value(x.at(t), theta.stage(t as usize));
        total += match spec.arity() {
            Arity::Pair => spec.switching_value(&[x.at(t), x.at(t - 1)]),
            Arity::Triple => spec.switching_value(&[x.at(t), x.at(t - 1), x.at(t - 2)]),
        };
    }
    Ok(total)
}

/// Per-stage costs (f(x_t; θ_t), d(x_t, …)) for t = 1..T.
pub fn stage_costs(spec: &CostSpec, x: &DecisionTrajectory, theta: &ParamTrajectory) -> Result<Vec<(f64, f64)>> {
    check_lengths(spec, x, theta)?;
    Ok((1..=x.horizon() as i64)
        .map(|t| {
            let f = spec.stage_value(x.at(t), theta.stage(t as usize));
            let d = match spec.arity() {
                Arity::Pair => spec.switching_value(&[x.at(t), x.at(t - 1)]),
                Arity::Triple => spec.switching_value(&[x.at(t), x.at(t - 1), x.at(t - 2)]),
            };
            (f, d)
        })
        .collect())
}

/// ∇_{x_τ} C evaluated on the neighbourhood `window = [x_{τ−2}, x_{τ−1}, x_τ, x_{τ+1}, x_{τ+2}]`.
/// Entries past the horizon are never read; x_{τ−2} is only read by
/// triple-arity costs.
pub(crate) fn local_gradient(
    spec: &CostSpec,
    window: [&[f64]; 5],
    theta_tau: &[f64],
    tau: usize,
    horizon: usize,
    out: &mut [f64],
) {
    let [xm2, xm1, x, xp1, xp2] = window;
    spec.stage_grad(x, theta_tau, out);
    match spec.arity() {
        Arity::Pair => {
            spec.switching_add_grad(&[x, xm1], 0, out);
            if tau < horizon {
                spec.switching_add_grad(&[xp1, x], 1, out);
            }
        }
        Arity::Triple => {
            spec.switching_add_grad(&[x, xm1, xm2], 0, out);
            if tau < horizon {
                spec.switching_add_grad(&[xp1, x, xm1], 1, out);
            }
            if tau + 1 < horizon {
                spec.switching_add_grad(&[xp2, xp1, x], 2, out);
            }
        }
    }
}

fn window_of(x: &DecisionTrajectory, tau: usize) -> [&[f64]; 5] {
    let t = tau as i64;
    let horizon = x.horizon() as i64;
    // past-the-end neighbours are never read; any in-range slice will do
    let clamp = |s: i64| x.at(s.min(horizon));
    [x.at(t - 2), x.at(t - 1), x.at(t), clamp(t + 1), clamp(t + 2)]
}

/// ∇_{x_τ} C(x; θ) with θ_τ supplied directly, as in the inexact update where
/// it is replaced by a prediction.
pub fn partial_gradient(spec: &CostSpec, x: &DecisionTrajectory, theta_tau: &[f64], tau: usize) -> Result<Vec<f64>> {
    let horizon = x.horizon();
    if tau < 1 || tau > horizon {
        return Err(Error::StageOutOfRange { stage: tau, horizon });
    }
    let mut out = vec![0.0; x.dim()];
    local_gradient(spec, window_of(x, tau), theta_tau, tau, horizon, &mut out);
    Ok(out)
}

/// Stacked ∇C(x; θ).
pub fn full_gradient(spec: &CostSpec, x: &DecisionTrajectory, theta: &ParamTrajectory) -> Result<Vec<f64>> {
    check_lengths(spec, x, theta)?;
    let mut out = vec![0.0; x.stacked().len()];
    gradient_into(spec, x, theta, &mut out);
    Ok(out)
}

fn gradient_into(spec: &CostSpec, x: &DecisionTrajectory, theta: &ParamTrajectory, out: &mut [f64]) {
    let n = x.dim();
    let horizon = x.horizon();
    for (i, chunk) in out.chunks_mut(n).enumerate() {
        let tau = i + 1;
        local_gradient(spec, window_of(x, tau), theta.stage(tau), tau, horizon, chunk);
    }
}

/// x* = argmin_{x ∈ 𝕏^T} C(x; θ) with x_0 (and x_{−1} = x_0) fixed.
pub fn offline_optimum(
    spec: &CostSpec,
    theta: &ParamTrajectory,
    set: &FeasibleSet,
    x0: &[f64],
    tol: f64,
) -> Result<OfflineSolution> {
    let start = DecisionTrajectory::constant(x0.to_vec(), theta.horizon());
    solve(spec, theta, set, start, SolverOptions::with_tol(tol))
}

/// Minimizes C(·; θ) keeping the history of `start` fixed and using its stage
/// values as the initial iterate.
pub fn solve(
    spec: &CostSpec,
    theta: &ParamTrajectory,
    set: &FeasibleSet,
    start: DecisionTrajectory,
    opts: SolverOptions,
) -> Result<OfflineSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {}", opts.tol)));
    }
    if start.dim() != set.dim() {
        return Err(Error::Dimension { expected: set.dim(), got: start.dim() });
    }
    check_lengths(spec, &start, theta)?;
    if let (CostFamily::Quadratic { alpha, beta }, true) = (spec.family(), set.is_unconstrained()) {
        let x_star = banded_solve(alpha, beta, theta, &start)?;
        let cost = total_cost(spec, &x_star, theta)?;
        return Ok(OfflineSolution { x_star, cost, iterations: 0, residual: 0.0 });
    }
    projected_gradient(spec, theta, set, start, opts)
}

/// Exact minimizer of the unconstrained quadratic family: one tridiagonal
/// system per coordinate.
fn banded_solve(
    alpha: f64,
    beta: f64,
    theta: &ParamTrajectory,
    start: &DecisionTrajectory,
) -> Result<DecisionTrajectory> {
    let horizon = theta.horizon();
    let n = start.dim();
    let mut diag = vec![alpha + 2.0 * beta; horizon];
    diag[horizon - 1] = alpha + beta;
    let off = vec![-beta; horizon - 1];
    let mut values = vec![0.0; n * horizon];
    for i in 0..n {
        let rhs: Vec<f64> = (1..=horizon)
            .map(|t| alpha * theta.stage(t)[i] + if t == 1 { beta * start.x0()[i] } else { 0.0 })
            .collect();
        let col = linalg::solve_tridiagonal(&diag, &off, &rhs)?;
        for (t, v) in col.into_iter().enumerate() {
            values[t * n + i] = v;
        }
    }
    start.with_values(values)
}

fn projected_gradient(
    spec: &CostSpec,
    theta: &ParamTrajectory,
    set: &FeasibleSet,
    start: DecisionTrajectory,
    opts: SolverOptions,
) -> Result<OfflineSolution> {
    let step = 1.0 / spec.smoothness();
    let mut x = start;
    set.project_stacked(x.stacked_mut());
    let mut grad = vec![0.0; x.stacked().len()];
    let mut next = x.stacked().to_vec();
    let mut residual = f64::INFINITY;
    for iter in 0..opts.max_iter {
        gradient_into(spec, &x, theta, &mut grad);
        for ((nv, xv), g) in next.iter_mut().zip(x.stacked()).zip(&grad) {
            *nv = xv - step * g;
        }
        set.project_stacked(&mut next);
        residual = sq_dist(&next, x.stacked()).sqrt() / step;
        x.stacked_mut().copy_from_slice(&next);
        if residual <= opts.tol {
            let cost = total_cost(spec, &x, theta)?;
            return Ok(OfflineSolution { x_star: x, cost, iterations: iter + 1, residual });
        }
    }
    Err(Error::NonConvergence { iterations: opts.max_iter, residual, last_iterate: x.stacked().to_vec() })
}

/// Hessian of C(·; θ) assembled column by column from gradient differences
/// at `x`. Exact (up to round-off) for quadratic costs.
pub fn assemble_hessian(
    spec: &CostSpec,
    x: &DecisionTrajectory,
    theta: &ParamTrajectory,
    step: f64,
) -> Result<DMatrix<f64>> {
    check_lengths(spec, x, theta)?;
    let m = x.stacked().len();
    let mut h = DMatrix::zeros(m, m);
    let mut plus = x.clone();
    let mut minus = x.clone();
    let mut gp = vec![0.0; m];
    let mut gm = vec![0.0; m];
    for j in 0..m {
        plus.stacked_mut()[j] += step;
        minus.stacked_mut()[j] -= step;
        gradient_into(spec, &plus, theta, &mut gp);
        gradient_into(spec, &minus, theta, &mut gm);
        for i in 0..m {
            h[(i, j)] = (gp[i] - gm[i]) / (2.0 * step);
        }
        plus.stacked_mut()[j] = x.stacked()[j];
        minus.stacked_mut()[j] = x.stacked()[j];
    }
    // symmetrize away round-off
    Ok((&h + h.transpose()) * 0.5)
}

/// Observed deviations from α-strong convexity and L-smoothness of C.
#[derive(Debug, Clone, PartialEq)]
pub struct Lemma1Report {
    /// max of α‖x−y‖²/2 − (C(y) − C(x) − ⟨∇C(x), y−x⟩); ≤ 0 when satisfied.
    pub convexity_violation: f64,
    /// max of (C(y) − C(x) − ⟨∇C(x), y−x⟩) − L‖x−y‖²/2; ≤ 0 when satisfied.
    pub smoothness_violation: f64,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

impl Lemma1Report {
    pub fn max_violation(&self) -> f64 {
        self.convexity_violation.max(self.smoothness_violation)
    }
}

/// Samples random scalar trajectories and checks the Bregman sandwich
/// α‖x−y‖²/2 ≤ C(y) − C(x) − ⟨∇C(x), y−x⟩ ≤ L‖x−y‖²/2, plus the extreme
/// eigenvalues of the assembled Hessian.
pub fn check_lemma1(spec: &CostSpec, horizon: usize, trials: usize, seed: u64) -> Result<Lemma1Report> {
    if trials == 0 || horizon == 0 {
        return Err(Error::invalid("need at least one trial and one stage"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = spec.constants().alpha;
    let l = spec.smoothness();
    let mut report = Lemma1Report {
        convexity_violation: f64::NEG_INFINITY,
        smoothness_violation: f64::NEG_INFINITY,
        min_eigenvalue: f64::INFINITY,
        max_eigenvalue: f64::NEG_INFINITY,
    };
    let mut draw = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random_range(-3.0..3.0)).collect() };
    for _ in 0..trials {
        let x0 = draw(1);
        let theta = ParamTrajectory::scalar(draw(horizon))?;
        let x = DecisionTrajectory::new(x0.clone(), draw(horizon))?;
        let y = x.with_values(draw(horizon))?;
        let cx = total_cost(spec, &x, &theta)?;
        let cy = total_cost(spec, &y, &theta)?;
        let g = full_gradient(spec, &x, &theta)?;
        let diff: Vec<f64> = y.stacked().iter().zip(x.stacked()).map(|(a, b)| a - b).collect();
        let bregman = cy - cx - dot(&g, &diff);
        let d2 = dot(&diff, &diff);
        let scale = 1e-12 * (cx.abs() + cy.abs()).max(1.0);
        report.convexity_violation = report.convexity_violation.max(0.5 * alpha * d2 - bregman - scale);
        report.smoothness_violation = report.smoothness_violation.max(bregman - 0.5 * l * d2 - scale);

        let h = assemble_hessian(spec, &x, &theta, 1e-3)?;
        let (lo, hi) = linalg::eigen_range(&h);
        report.min_eigenvalue = report.min_eigenvalue.min(lo);
        report.max_eigenvalue = report.max_eigenvalue.max(hi);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn quad(alpha: f64, beta: f64) -> CostSpec {
        CostSpec::quadratic_tracking(alpha, beta).unwrap()
    }

    #[test]
    fn total_cost_single_stage() {
        let x = DecisionTrajectory::new(vec![0.0], vec![1.0]).unwrap();
        let th = ParamTrajectory::scalar(vec![1.0]).unwrap();
        assert_eq!(total_cost(&quad(1.0, 0.5), &x, &th).unwrap(), 0.25);
    }

    #[test]
    fn total_cost_zero_at_tracking_optimum() {
        let x = DecisionTrajectory::new(vec![2.0], vec![2.0; 5]).unwrap();
        let th = ParamTrajectory::scalar(vec![2.0; 5]).unwrap();
        assert_eq!(total_cost(&quad(1.3, 0.7), &x, &th).unwrap(), 0.0);
    }

    #[test]
    fn total_cost_rejects_length_mismatch() {
        let x = DecisionTrajectory::new(vec![0.0], vec![1.0, 2.0]).unwrap();
        let th = ParamTrajectory::scalar(vec![1.0]).unwrap();
        assert!(matches!(total_cost(&quad(1.0, 0.5), &x, &th), Err(Error::Horizon { .. })));
    }

    #[test]
    fn partial_gradient_terminal_stage() {
        let x = DecisionTrajectory::new(vec![0.0], vec![1.0, 1.0]).unwrap();
        let g = partial_gradient(&quad(1.0, 0.5), &x, &[0.0], 2).unwrap();
        assert_eq!(g, vec![1.0]);
        // interior stage carries the forward switching term
        let g1 = partial_gradient(&quad(1.0, 0.5), &x, &[0.0], 1).unwrap();
        assert_eq!(g1, vec![1.0 + 0.5 * 1.0 - 0.5 * 0.0]);
        assert!(partial_gradient(&quad(1.0, 0.5), &x, &[0.0], 3).is_err());
        assert!(partial_gradient(&quad(1.0, 0.5), &x, &[0.0], 0).is_err());
    }

    #[test]
    fn decoupled_optimum_is_theta() {
        let th = ParamTrajectory::scalar(vec![1.0, -2.0, 0.5]).unwrap();
        let set = FeasibleSet::unconstrained(1).unwrap();
        let sol = offline_optimum(&quad(1.0, 0.0), &th, &set, &[5.0], 1e-10).unwrap();
        assert_eq!(sol.x_star.stacked(), th.stacked());
        assert_eq!(sol.residual, 0.0);
    }

    #[test]
    fn two_stage_linear_system() {
        let th = ParamTrajectory::scalar(vec![1.0, 1.0]).unwrap();
        let set = FeasibleSet::unconstrained(1).unwrap();
        let sol = offline_optimum(&quad(1.0, 0.5), &th, &set, &[0.0], 1e-10).unwrap();
        // [[2, -0.5], [-0.5, 1.5]] x = [1, 1]
        let det = 2.0 * 1.5 - 0.25;
        let expect = [(1.5 + 0.5) / det, (2.0 + 0.5) / det];
        for (a, b) in sol.x_star.stacked().iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn lemma1_on_quadratic_family() {
        let r = check_lemma1(&quad(1.0, 0.5), 4, 20, 7).unwrap();
        assert!(r.max_violation() <= 1e-8, "{r:?}");
        assert!(r.min_eigenvalue >= 1.0 - 1e-8 && r.max_eigenvalue <= 3.0 + 1e-8, "{r:?}");
        let r0 = check_lemma1(&quad(2.0, 0.0), 3, 5, 1).unwrap();
        assert!(r0.max_eigenvalue <= 2.0 + 1e-8);
    }

    #[test]
    fn quadrotor_smoothness_bound_covers_hessian() {
        let spec = CostSpec::double_integrator_tracking(1.0, 1e-5, 1.0, 1.0, 9.8, 0.1).unwrap();
        assert!((spec.smoothness() - 2.6).abs() < 1e-12);
        let r = check_lemma1(&spec, 30, 2, 3).unwrap();
        assert!(r.max_eigenvalue <= 2.6 + 1e-6 && r.min_eigenvalue >= 1.0 - 1e-6, "{r:?}");
    }

    #[test]
    fn box_constrained_pgd_reports_residual() {
        let th = ParamTrajectory::scalar(vec![2.0, -2.0, 0.3]).unwrap();
        let set = FeasibleSet::cube(1, -0.5, 0.5).unwrap();
        let sol = offline_optimum(&quad(1.0, 0.5), &th, &set, &[0.0], 1e-10).unwrap();
        assert!(sol.residual <= 1e-10);
        assert!(sol.x_star.iter().all(|x| set.contains(x)));
        let recomputed = total_cost(&quad(1.0, 0.5), &sol.x_star, &th).unwrap();
        assert_eq!(recomputed, sol.cost);
    }

    #[test]
    fn nonconvergence_carries_last_iterate() {
        let th = ParamTrajectory::scalar(vec![2.0, -2.0]).unwrap();
        let set = FeasibleSet::cube(1, -0.5, 0.5).unwrap();
        let start = DecisionTrajectory::constant(vec![0.0], 2);
        let err = solve(&quad(1.0, 3.0), &th, &set, start, SolverOptions { tol: 1e-14, max_iter: 2 }).unwrap_err();
        match err {
            Error::NonConvergence { last_iterate, iterations, .. } => {
                assert_eq!(iterations, 2);
                assert_eq!(last_iterate.len(), 2);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    fn instance(n: usize, values: &[f64], horizon: usize) -> (DecisionTrajectory, ParamTrajectory) {
        let x = DecisionTrajectory::new(values[..n].to_vec(), values[n..n + n * horizon].to_vec()).unwrap();
        let th = ParamTrajectory::new(n, values[n + n * horizon..n + 2 * n * horizon].to_vec()).unwrap();
        (x, th)
    }

    proptest! {
        #[test]
        fn gradient_matches_central_differences(
            n in 1usize..=3,
            horizon in 1usize..=10,
            alpha in 0.2f64..3.0,
            beta in 0.0f64..3.0,
            values in prop::collection::vec(-3.0f64..3.0, 63),
        ) {
            let spec = quad(alpha, beta);
            let (x, th) = instance(n, &values, horizon);
            let g = full_gradient(&spec, &x, &th).unwrap();
            let h = 1e-5;
            for (j, &gj) in g.iter().enumerate() {
                let mut p = x.clone();
                let mut m = x.clone();
                p.stacked_mut()[j] += h;
                m.stacked_mut()[j] -= h;
                let fd = (total_cost(&spec, &p, &th).unwrap() - total_cost(&spec, &m, &th).unwrap()) / (2.0 * h);
                prop_assert!((fd - gj).abs() <= 1e-5, "coord {j}: {fd} vs {gj}");
            }
        }

        #[test]
        fn triple_gradient_matches_central_differences(
            horizon in 1usize..=8,
            values in prop::collection::vec(-2.0f64..2.0, 17),
        ) {
            let spec = CostSpec::double_integrator_tracking(1.0, 0.01, 1.0, 1.0, 9.8, 0.5).unwrap();
            let (x, th) = instance(1, &values, horizon);
            let g = full_gradient(&spec, &x, &th).unwrap();
            let h = 1e-5;
            for (j, &gj) in g.iter().enumerate() {
                let mut p = x.clone();
                let mut m = x.clone();
                p.stacked_mut()[j] += h;
                m.stacked_mut()[j] -= h;
                let fd = (total_cost(&spec, &p, &th).unwrap() - total_cost(&spec, &m, &th).unwrap()) / (2.0 * h);
                prop_assert!((fd - gj).abs() <= 1e-5 * fd.abs().max(1.0));
            }
        }

        #[test]
        fn optimum_survives_feasible_perturbation(
            horizon in 1usize..=6,
            theta in prop::collection::vec(-1.5f64..1.5, 6),
            dir in prop::collection::vec(-1.0f64..1.0, 6),
            beta in 0.0f64..2.0,
        ) {
            let spec = quad(1.0, beta);
            let set = FeasibleSet::cube(1, -0.5, 0.5).unwrap();
            let th = ParamTrajectory::scalar(theta[..horizon].to_vec()).unwrap();
            let sol = offline_optimum(&spec, &th, &set, &[0.0], 1e-10).unwrap();
            for sign in [1e-3, -1e-3] {
                let mut v: Vec<f64> = sol.x_star.stacked().iter().zip(&dir).map(|(x, d)| x + sign * d).collect();
                set.project_stacked(&mut v);
                let c = total_cost(&spec, &sol.x_star.with_values(v).unwrap(), &th).unwrap();
                prop_assert!(c >= sol.cost - 1e-8);
            }
        }

        #[test]
        fn gradient_is_h_lipschitz_in_theta(
            n in 1usize..=3,
            horizon in 1usize..=10,
            alpha in 0.2f64..3.0,
            beta in 0.0f64..3.0,
            values in prop::collection::vec(-3.0f64..3.0, 63),
            other in prop::collection::vec(-3.0f64..3.0, 30),
        ) {
            let spec = quad(alpha, beta);
            let (x, th) = instance(n, &values, horizon);
            let th2 = ParamTrajectory::new(n, other[..n * horizon].to_vec()).unwrap();
            let g1 = full_gradient(&spec, &x, &th).unwrap();
            let g2 = full_gradient(&spec, &x, &th2).unwrap();
            let lhs = sq_dist(&g1, &g2).sqrt();
            let rhs = spec.constants().h * sq_dist(th.stacked(), th2.stacked()).sqrt();
            prop_assert!(lhs - rhs <= 1e-9);
        }
    }
}

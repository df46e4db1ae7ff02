//! Stage costs f(x; θ), switching costs, and the regularity constants that
//! every regret bound is expressed in.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::feasible::FeasibleSet;
use crate::error::{Error, Result};

/// A parameterized stage cost. Implementations must be α-strongly convex and
/// l_f-smooth in `x`, with a gradient that is h-Lipschitz in `theta`.
pub trait StageCost: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64], theta: &[f64]) -> f64;

    /// Writes ∇ₓ f(x; θ) into `out`.
    fn grad(&self, x: &[f64], theta: &[f64], out: &mut [f64]);

    /// `sup_{x ∈ set} |f(x; a) - f(x; b)|` when it has a closed form.
    fn sup_difference(&self, _a: &[f64], _b: &[f64], _set: &FeasibleSet) -> Option<Result<f64>> {
        None
    }
}

/// How many consecutive decisions a switching cost couples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    /// d(x_t, x_{t-1})
    Pair,
    /// d(x_t, x_{t-1}, x_{t-2}); couples each stage to two neighbours on each side.
    Triple,
}

impl Arity {
    pub fn width(self) -> usize {
        match self {
            Arity::Pair => 2,
            Arity::Triple => 3,
        }
    }
}

/// Switching cost evaluated on the window `[x_t, x_{t-1}, ...]` (newest first).
pub trait SwitchingCost: Send + Sync + fmt::Debug {
    fn arity(&self) -> Arity;

    fn value(&self, window: &[&[f64]]) -> f64;

    /// Adds the partial gradient with respect to `window[slot]` into `out`.
    fn add_grad(&self, window: &[&[f64]], slot: usize, out: &mut [f64]);
}

/// (α/2)‖x − θ‖²
#[derive(Debug, Clone, Copy)]
pub struct TrackingQuadratic {
    pub alpha: f64,
}

impl StageCost for TrackingQuadratic {
    fn value(&self, x: &[f64], theta: &[f64]) -> f64 {
        0.5 * self.alpha * sq_dist(x, theta)
    }

    fn grad(&self, x: &[f64], theta: &[f64], out: &mut [f64]) {
        for ((o, xi), ti) in out.iter_mut().zip(x).zip(theta) {
            *o = self.alpha * (xi - ti);
        }
    }

    fn sup_difference(&self, a: &[f64], b: &[f64], set: &FeasibleSet) -> Option<Result<f64>> {
        // f(x;a) - f(x;b) = (α/2)(‖a‖² - ‖b‖²) - α⟨x, a - b⟩, affine in x
        let constant = 0.5 * self.alpha * (dot(a, a) - dot(b, b));
        let slope: Vec<f64> = a.iter().zip(b).map(|(u, v)| -self.alpha * (u - v)).collect();
        Some(sup_abs_affine(constant, &slope, set))
    }
}

/// (α/2)(‖x‖² − 2⟨θ, x⟩): same gradient as [`TrackingQuadratic`], no θ-dependent offset.
#[derive(Debug, Clone, Copy)]
pub struct LinearQuadratic {
    pub alpha: f64,
}

impl StageCost for LinearQuadratic {
    fn value(&self, x: &[f64], theta: &[f64]) -> f64 {
        0.5 * self.alpha * (dot(x, x) - 2.0 * dot(theta, x))
    }

    fn grad(&self, x: &[f64], theta: &[f64], out: &mut [f64]) {
        for ((o, xi), ti) in out.iter_mut().zip(x).zip(theta) {
            *o = self.alpha * (xi - ti);
        }
    }

    fn sup_difference(&self, a: &[f64], b: &[f64], set: &FeasibleSet) -> Option<Result<f64>> {
        let slope: Vec<f64> = a.iter().zip(b).map(|(u, v)| -self.alpha * (u - v)).collect();
        Some(sup_abs_affine(0.0, &slope, set))
    }
}

/// (β/2)‖x_t − x_{t−1}‖²
#[derive(Debug, Clone, Copy)]
pub struct SquaredDifference {
    pub beta: f64,
}

impl SwitchingCost for SquaredDifference {
    fn arity(&self) -> Arity {
        Arity::Pair
    }

    fn value(&self, window: &[&[f64]]) -> f64 {
        0.5 * self.beta * sq_dist(window[0], window[1])
    }

    fn add_grad(&self, window: &[&[f64]], slot: usize, out: &mut [f64]) {
        let sign = if slot == 0 { 1.0 } else { -1.0 };
        for ((o, a), b) in out.iter_mut().zip(window[0]).zip(window[1]) {
            *o += sign * self.beta * (a - b);
        }
    }
}

/// (w/2)‖(x_t − 2x_{t−1} + x_{t−2})/Δ² − c‖², the squared control effort of a
/// double integrator `ẍ = u/k + c` once the control has been eliminated.
#[derive(Debug, Clone, Copy)]
pub struct SecondDifference {
    pub weight: f64,
    pub dt: f64,
    pub offset: f64,
}

impl SecondDifference {
    fn residual(&self, window: &[&[f64]], i: usize) -> f64 {
        (window[0][i] - 2.0 * window[1][i] + window[2][i]) / (self.dt * self.dt) - self.offset
    }
}

impl SwitchingCost for SecondDifference {
    fn arity(&self) -> Arity {
        Arity::Triple
    }

    fn value(&self, window: &[&[f64]]) -> f64 {
        let n = window[0].len();
        0.5 * self.weight * (0..n).map(|i| self.residual(window, i).powi(2)).sum::<f64>()
    }

    fn add_grad(&self, window: &[&[f64]], slot: usize, out: &mut [f64]) {
        let stencil = [1.0, -2.0, 1.0][slot] / (self.dt * self.dt);
        for (i, o) in out.iter_mut().enumerate() {
            *o += self.weight * self.residual(window, i) * stencil;
        }
    }
}

/// Regularity constants of a cost. `gradient_bound` (G) and `switch_cap` (β)
/// may be infinite when the instance does not satisfy the bounded-gradient or
/// quadratic-cap conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostConstants {
    /// Strong convexity of f in x.
    pub alpha: f64,
    /// Smoothness of f in x.
    pub l_f: f64,
    /// Smoothness of the switching cost.
    pub l_d: f64,
    /// Lipschitz constant of ∇ₓf in θ.
    pub h: f64,
    pub gradient_bound: f64,
    /// β with 0 ≤ d(x, x') ≤ (β/2)‖x − x'‖².
    pub switch_cap: f64,
}

impl CostConstants {
    fn validate(&self) -> Result<()> {
        let c = self;
        if !(c.alpha > 0.0) {
            return Err(Error::invalid(format!("strong convexity must be positive, got {}", c.alpha)));
        }
        if !(c.l_f >= c.alpha) {
            return Err(Error::invalid(format!(
                "smoothness l_f = {} is below strong convexity α = {}",
                c.l_f, c.alpha
            )));
        }
        for (name, v) in [("l_d", c.l_d), ("h", c.h), ("G", c.gradient_bound), ("β", c.switch_cap)] {
            if !(v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be nonnegative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Which closed forms are available for a cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostFamily {
    /// ∇ₓf = α(x − θ) with d = (β/2)‖x − x'‖²; the full-horizon objective is
    /// a tridiagonal quadratic.
    Quadratic {
        alpha: f64,
        beta: f64,
    },
    General,
}

/// A complete SOCO cost: stage cost, switching cost, and their constants.
#[derive(Clone)]
pub struct CostSpec {
    stage: Arc<dyn StageCost>,
    switching: Arc<dyn SwitchingCost>,
    constants: CostConstants,
    family: CostFamily,
    smoothness: f64,
}

impl fmt::Debug for CostSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CostSpec")
            .field("stage", &self.stage)
            .field("switching", &self.switching)
            .field("constants", &self.constants)
            .field("family", &self.family)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

impl CostSpec {
    /// f = (α/2)‖x − θ‖², d = (β/2)‖x − x'‖².
    pub fn quadratic_tracking(alpha: f64, beta: f64) -> Result<Self> {
        Self::quadratic_family(Arc::new(TrackingQuadratic { alpha }), alpha, beta)
    }

    /// f = (α/2)(‖x‖² − 2⟨θ, x⟩), d = (β/2)‖x − x'‖².
    pub fn linear_quadratic(alpha: f64, beta: f64) -> Result<Self> {
        Self::quadratic_family(Arc::new(LinearQuadratic { alpha }), alpha, beta)
    }

    fn quadratic_family(stage: Arc<dyn StageCost>, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!("α must be positive, got {alpha}")));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::invalid(format!("β must be nonnegative, got {beta}")));
        }
        let constants = CostConstants {
            alpha,
            l_f: alpha,
            l_d: 2.0 * beta,
            h: alpha,
            gradient_bound: f64::INFINITY,
            switch_cap: beta,
        };
        Ok(CostSpec {
            stage,
            switching: Arc::new(SquaredDifference { beta }),
            smoothness: constants.l_f + 2.0 * constants.l_d,
            constants,
            family: CostFamily::Quadratic { alpha, beta },
        })
    }

    /// Altitude tracking of a double integrator `ẍ = k₁u − g + k₂`:
    /// stage cost (α/2)(x_t − θ_t)² plus (β/2)u², with u eliminated through the
    /// second difference of the altitude. The declared smoothness is the
    /// closed-form bound α + 16β/(k₁²Δ⁴); [`CostSpec::with_smoothness`] can
    /// replace it with a tighter numerical value.
    pub fn double_integrator_tracking(alpha: f64, beta: f64, k1: f64, k2: f64, gravity: f64, dt: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(beta >= 0.0) || !(dt > 0.0) || k1 == 0.0 || !k1.is_finite() {
            return Err(Error::invalid(format!(
                "invalid double-integrator parameters α={alpha} β={beta} k1={k1} Δ={dt}"
            )));
        }
        let weight = beta / (k1 * k1);
        let switching = SecondDifference { weight, dt, offset: -gravity + k2 };
        let dt4 = dt.powi(4);
        let constants = CostConstants {
            alpha,
            l_f: alpha,
            l_d: 6.0 * weight / dt4,
            h: alpha,
            gradient_bound: f64::INFINITY,
            switch_cap: f64::INFINITY,
        };
        Ok(CostSpec {
            stage: Arc::new(TrackingQuadratic { alpha }),
            switching: Arc::new(switching),
            constants,
            family: CostFamily::General,
            smoothness: alpha + 16.0 * weight / dt4,
        })
    }

    /// A user-supplied cost. The constants are trusted here; use
    /// [`CostSpec::verify_constants`] to check them by sampling.
    pub fn custom(
        stage: Arc<dyn StageCost>,
        switching: Arc<dyn SwitchingCost>,
        constants: CostConstants,
    ) -> Result<Self> {
        constants.validate()?;
        let smoothness = match switching.arity() {
            Arity::Pair => constants.l_f + 2.0 * constants.l_d,
            Arity::Triple => constants.l_f + 3.0 * constants.l_d,
        };
        Ok(CostSpec { stage, switching, constants, family: CostFamily::General, smoothness })
    }

    /// Replaces the smoothness constant L of the full-horizon objective.
    pub fn with_smoothness(mut self, smoothness: f64) -> Result<Self> {
        if !(smoothness >= self.constants.alpha) || !smoothness.is_finite() {
            return Err(Error::invalid(format!(
                "smoothness {smoothness} must be finite and at least α = {}",
                self.constants.alpha
            )));
        }
        self.smoothness = smoothness;
        Ok(self)
    }

    /// Declares the gradient bound G, e.g. once the instance is known to live in a box.
    pub fn with_gradient_bound(mut self, g: f64) -> Result<Self> {
        if !(g >= 0.0) {
            return Err(Error::invalid(format!("G must be nonnegative, got {g}")));
        }
        self.constants.gradient_bound = g;
        Ok(self)
    }

    pub fn constants(&self) -> &CostConstants {
        &self.constants
    }

    pub fn family(&self) -> CostFamily {
        self.family
    }

    pub fn arity(&self) -> Arity {
        self.switching.arity()
    }

    /// Smoothness L of the full-horizon objective (l_f + 2l_d for pair costs).
    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn stage_value(&self, x: &[f64], theta: &[f64]) -> f64 {
        self.stage.value(x, theta)
    }

    pub fn stage_grad(&self, x: &[f64], theta: &[f64], out: &mut [f64]) {
        self.stage.grad(x, theta, out)
    }

    pub fn stage_cost(&self) -> &dyn StageCost {
        self.stage.as_ref()
    }

    pub fn switching_value(&self, window: &[&[f64]]) -> f64 {
        self.switching.value(window)
    }

    pub fn switching_add_grad(&self, window: &[&[f64]], slot: usize, out: &mut [f64]) {
        self.switching.add_grad(window, slot, out)
    }

    /// Checks the declared constants on random samples and reports the worst
    /// violation of each inequality (zero or negative means satisfied).
    pub fn verify_constants(&self, sampler: &ConstantSampler) -> ConstantReport {
        let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
        let n = sampler.x_dim;
        let p = sampler.theta_dim;
        let c = &self.constants;
        let mut report = ConstantReport::default();
        let mut ga = vec![0.0; n];
        let mut gb = vec![0.0; n];
        let eps = sampler.curvature_step;
        for _ in 0..sampler.samples {
            let x = sampler.draw(&mut rng, n);
            let th1 = sampler.draw(&mut rng, p);
            let th2 = sampler.draw(&mut rng, p);

            self.stage_grad(&x, &th1, &mut ga);
            self.stage_grad(&x, &th2, &mut gb);
            let lip = sq_dist(&ga, &gb).sqrt() - c.h * sq_dist(&th1, &th2).sqrt();
            report.theta_lipschitz = report.theta_lipschitz.max(lip);

            // secant curvature along a random unit direction
            let mut dir = sampler.draw(&mut rng, n);
            let norm = dot(&dir, &dir).sqrt().max(f64::MIN_POSITIVE);
            dir.iter_mut().for_each(|v| *v /= norm);
            let xp: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + eps * d).collect();
            self.stage_grad(&xp, &th1, &mut gb);
            self.stage_grad(&x, &th1, &mut ga);
            let curvature = ga.iter().zip(&gb).zip(&dir).map(|((a, b), d)| (b - a) * d).sum::<f64>() / eps;
            report.strong_convexity = report.strong_convexity.max(c.alpha - curvature - 1e-6);
            report.smoothness = report.smoothness.max(curvature - c.l_f - 1e-6);

            let y = sampler.draw(&mut rng, n);
            let mut window: Vec<&[f64]> = vec![&y, &x];
            let z;
            if self.arity() == Arity::Triple {
                z = sampler.draw(&mut rng, n);
                window.push(&z);
            }
            let d = self.switching_value(&window);
            report.switching_negative = report.switching_negative.max(-d);
            if self.arity() == Arity::Pair && c.switch_cap.is_finite() {
                report.switching_cap = report.switching_cap.max(d - 0.5 * c.switch_cap * sq_dist(&x, &y));
            }
            let same: Vec<&[f64]> = (0..window.len()).map(|_| x.as_slice()).collect();
            if self.arity() == Arity::Pair {
                report.switching_at_rest = report.switching_at_rest.max(self.switching_value(&same).abs());
            }
        }
        report
    }
}

/// Sampling configuration for [`CostSpec::verify_constants`].
#[derive(Debug, Clone)]
pub struct ConstantSampler {
    pub x_dim: usize,
    pub theta_dim: usize,
    /// Samples are drawn uniformly from `[-radius, radius]` per coordinate.
    pub radius: f64,
    pub samples: usize,
    pub curvature_step: f64,
    pub seed: u64,
}

impl ConstantSampler {
    pub fn new(x_dim: usize, theta_dim: usize) -> Self {
        ConstantSampler { x_dim, theta_dim, radius: 5.0, samples: 1000, curvature_step: 1e-3, seed: 0 }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
        (0..dim).map(|_| rng.random_range(-self.radius..=self.radius)).collect()
    }
}

/// Worst observed violation per declared property; `<= 0` means none observed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstantReport {
    pub theta_lipschitz: f64,
    pub strong_convexity: f64,
    pub smoothness: f64,
    pub switching_negative: f64,
    pub switching_cap: f64,
    pub switching_at_rest: f64,
}

impl ConstantReport {
    pub fn max_violation(&self) -> f64 {
        [
            self.theta_lipschitz,
            self.strong_convexity,
            self.smoothness,
            self.switching_negative,
            self.switching_cap,
            self.switching_at_rest,
        ]
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// `sup_{x ∈ set} |c + ⟨slope, x⟩|`; attained at a box corner.
fn sup_abs_affine(constant: f64, slope: &[f64], set: &FeasibleSet) -> Result<f64> {
    match set.bounds() {
        None => {
            if slope.iter().all(|s| *s == 0.0) {
                Ok(constant.abs())
            } else {
                Err(Error::Unbounded("stage-cost variation over an unconstrained set; supply a box".into()))
            }
        }
        Some((lower, upper)) => {
            let (mut lo, mut hi) = (constant, constant);
            for ((s, l), u) in slope.iter().zip(lower).zip(upper) {
                let (a, b) = (s * l, s * u);
                lo += a.min(b);
                hi += a.max(b);
            }
            Ok(lo.abs().max(hi.abs()))
        }
    }
}

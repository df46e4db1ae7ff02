use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::algos::OgdStepsize;
use crate::bounds;
use crate::error::{Error, Result};
use crate::linalg;
use crate::offline;
use crate::predict::{ar1_scenario, PredictionTable, StochasticPredictionModel};
use crate::problem::{CostSpec, DecisionTrajectory, FeasibleSet, ParamTrajectory};

/// Everything one seed of a scenario produces.
#[derive(Debug, Clone)]
pub struct Instance {
    pub spec: CostSpec,
    pub set: FeasibleSet,
    pub x0: Vec<f64>,
    pub table: PredictionTable,
    /// θ₀ used for V_T; `None` means θ₁.
    pub theta0: Option<Vec<f64>>,
}

impl Instance {
    pub fn truth(&self) -> &ParamTrajectory {
        self.table.truth()
    }

    pub fn horizon(&self) -> usize {
        self.table.horizon()
    }

    pub fn variation(&self) -> Result<f64> {
        bounds::variation_vt(&self.spec, self.truth(), self.theta0.as_deref(), &self.set)
    }
}

/// RHIG stepsize rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Fixed(f64),
    /// η = c/L.
    OverL(f64),
}

impl StepRule {
    pub fn resolve(self, smoothness: f64) -> f64 {
        match self {
            StepRule::Fixed(eta) => eta,
            StepRule::OverL(c) => c / smoothness,
        }
    }
}

impl FromStr for StepRule {
    type Err = Error;

    /// A number, `1/L`, or `1/(2L)` (also written `1/2L`).
    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        match compact.as_str() {
            "1/L" => Ok(StepRule::OverL(1.0)),
            "1/(2L)" | "1/2L" => Ok(StepRule::OverL(0.5)),
            _ => parse_positive("eta", &compact).map(StepRule::Fixed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanningParams {
    pub gamma: f64,
    pub horizon: usize,
    pub alpha: f64,
    pub beta: f64,
    pub x0: f64,
    pub amplitude: f64,
    pub omega: f64,
    pub sigma2: f64,
}

impl Default for PlanningParams {
    fn default() -> Self {
        PlanningParams {
            gamma: 0.7,
            horizon: 20,
            alpha: 1.0,
            beta: 0.5,
            x0: 10.0,
            amplitude: 4.0,
            omega: 0.5,
            sigma2: 1.0,
        }
    }
}

impl PlanningParams {
    /// d_t = a sin(ωt)
    pub fn known_component(&self) -> Result<ParamTrajectory> {
        ParamTrajectory::scalar((1..=self.horizon).map(|t| self.amplitude * (self.omega * t as f64).sin()).collect())
    }

    fn instance(&self, spec: &CostSpec, seed: u64) -> Result<Instance> {
        let (_, ar) = ar1_scenario(self.gamma, &[0.0], self.sigma2, self.horizon, seed)?;
        Ok(Instance {
            spec: spec.clone(),
            set: FeasibleSet::unconstrained(1)?,
            x0: vec![self.x0],
            table: ar.offset(&self.known_component()?)?,
            theta0: None,
        })
    }
}

/// Vertical quadrotor flight ẍ = k₁u − g + k₂ tracking a target that changes
/// abruptly at `shock_time`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadrotorParams {
    pub alpha: f64,
    pub beta: f64,
    pub k1: f64,
    pub k2: f64,
    pub gravity: f64,
    pub dt: f64,
    pub horizon_seconds: f64,
    pub x0: f64,
    pub gamma: f64,
    pub noise_sd: f64,
    pub shock_time: f64,
    pub pre_amplitude: f64,
    pub post_amplitude: f64,
    pub frequency: f64,
    pub target_offset: f64,
    /// Predictions know the post-shock target from the start (the no-shock
    /// counterpart of the same realization).
    pub foresee_shock: bool,
}

impl Default for QuadrotorParams {
    fn default() -> Self {
        QuadrotorParams {
            alpha: 1.0,
            beta: 1e-5,
            k1: 1.0,
            k2: 1.0,
            gravity: 9.8,
            dt: 0.1,
            horizon_seconds: 10.0,
            x0: 1.0,
            gamma: 0.6,
            noise_sd: 0.5,
            shock_time: 5.6,
            pre_amplitude: 0.9,
            post_amplitude: 0.3,
            frequency: 0.2,
            target_offset: 1.0,
            foresee_shock: false,
        }
    }
}

impl QuadrotorParams {
    pub fn horizon(&self) -> usize {
        (self.horizon_seconds / self.dt).round() as usize
    }

    /// Last stage on the pre-shock target: ⌈t_c/Δ⌉.
    pub fn shock_stage(&self) -> usize {
        (self.shock_time / self.dt - 1e-9).ceil().max(0.0) as usize
    }

    pub fn time(&self, t: usize) -> f64 {
        t as f64 * self.dt
    }

    fn target(&self, amplitude: f64, t: usize) -> f64 {
        amplitude * (self.frequency * self.time(t)).sin() + self.target_offset
    }

    /// The realized target d_t.
    pub fn target_true(&self, t: usize) -> f64 {
        let amp = if t <= self.shock_stage() { self.pre_amplitude } else { self.post_amplitude };
        self.target(amp, t)
    }

    /// The target as believed with information up to stage s.
    pub fn target_believed(&self, t: usize, s: usize) -> f64 {
        if self.foresee_shock || s >= self.shock_stage() {
            self.target_true(t)
        } else {
            self.target(self.pre_amplitude, t)
        }
    }

    pub fn cost_spec(&self) -> Result<CostSpec> {
        CostSpec::double_integrator_tracking(self.alpha, self.beta, self.k1, self.k2, self.gravity, self.dt)
    }

    /// Largest eigenvalue of the assembled Hessian of C.
    pub fn numeric_smoothness(&self, spec: &CostSpec) -> Result<f64> {
        let horizon = self.horizon();
        let x = DecisionTrajectory::constant(vec![0.0], horizon);
        let theta = ParamTrajectory::scalar(vec![0.0; horizon])?;
        let hess = offline::assemble_hessian(spec, &x, &theta, 1e-3)?;
        Ok(linalg::eigen_range(&hess).1)
    }

    /// u_{t−1} = (1/k₁)((x_t − 2x_{t−1} + x_{t−2})/Δ² + g − k₂) for t = 1..T,
    /// with x_{−1} = x_0.
    pub fn controls(&self, x: &DecisionTrajectory) -> Vec<f64> {
        (1..=x.horizon() as i64)
            .map(|t| {
                let acc = (x.at(t)[0] - 2.0 * x.at(t - 1)[0] + x.at(t - 2)[0]) / (self.dt * self.dt);
                (acc + self.gravity - self.k2) / self.k1
            })
            .collect()
    }

    fn instance(&self, spec: &CostSpec, seed: u64) -> Result<Instance> {
        let horizon = self.horizon();
        let (y, ar) = ar1_scenario(self.gamma, &[0.0], self.noise_sd * self.noise_sd, horizon, seed)?;
        let truth = ParamTrajectory::scalar((1..=horizon).map(|t| self.target_true(t) + y.stage(t)[0]).collect())?;
        let table = PredictionTable::from_fn(truth, |tau, s| {
            vec![self.target_believed(tau, s) + ar.prediction(tau, s as i64)[0]]
        })?;
        Ok(Instance { spec: spec.clone(), set: FeasibleSet::unconstrained(1)?, x0: vec![self.x0], table, theta0: None })
    }
}

/// The adversarial instance behind the lower bound: f = (α/2)(x² − 2θx) on
/// [−½, ½], θ_t = μ_t + e₁ᵗ + … + e_tᵗ with μ_t = (−1)ᵗ/4 and eᵢᵗ uniform on
/// [−1/(8t), 1/(8t)]; predictions θ_{t|s} = μ_t + e₁ᵗ + … + e_sᵗ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowerBoundParams {
    pub alpha: f64,
    pub beta: f64,
    pub horizon: usize,
}

impl Default for LowerBoundParams {
    fn default() -> Self {
        LowerBoundParams { alpha: 2.0, beta: 1.0, horizon: 20 }
    }
}

impl LowerBoundParams {
    pub fn mean(t: usize) -> f64 {
        if t.is_multiple_of(2) {
            0.25
        } else {
            -0.25
        }
    }

    pub fn cost_spec(&self) -> Result<CostSpec> {
        if !(self.alpha > 1.0)
            || !(self.beta / self.alpha < 4.0 + 3.0 * std::f64::consts::SQRT_2)
            || !(self.beta >= 0.0)
        {
            return Err(Error::Config(format!(
                "lower-bound construction needs α > 1 and 0 ≤ β/α < 4 + 3√2, got α={} β={}",
                self.alpha, self.beta
            )));
        }
        // θ ∈ 𝕏, so ‖∇f‖ = α|x − θ| ≤ α.
        CostSpec::linear_quadratic(self.alpha, self.beta)?.with_gradient_bound(self.alpha)
    }

    /// E‖δ(k)‖² = Σ_t min(k, t) (1/(8t))²/3.
    pub fn expected_sq_error(&self, k: usize) -> f64 {
        (1..=self.horizon).map(|t| k.min(t) as f64 / (192.0 * (t * t) as f64)).sum()
    }

    fn instance(&self, spec: &CostSpec, seed: u64) -> Result<Instance> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // partial[t−1][s] = μ_t + e₁ᵗ + … + e_sᵗ, s = 0..t
        let partial: Vec<Vec<f64>> = (1..=self.horizon)
            .map(|t| {
                let half = 1.0 / (8.0 * t as f64);
                let mut acc = Self::mean(t);
                let mut row = vec![acc];
                for _ in 0..t {
                    acc += rng.random_range(-half..=half);
                    row.push(acc);
                }
                row
            })
            .collect();
        let truth = ParamTrajectory::scalar(partial.iter().map(|row| row[row.len() - 1]).collect())?;
        let table = PredictionTable::from_fn(truth, |tau, s| vec![partial[tau - 1][s]])?;
        Ok(Instance {
            spec: spec.clone(),
            set: FeasibleSet::cube(1, -0.5, 0.5)?,
            x0: vec![0.0],
            table,
            theta0: Some(vec![Self::mean(0)]),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScenarioKind {
    Planning(PlanningParams),
    Quadrotor(QuadrotorParams),
    LowerBound(LowerBoundParams),
}

/// A scenario with its algorithm tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub eta: StepRule,
    /// Constant OGD initialization stepsize ξ; `None` restarts OGD with
    /// epoch Δ = ⌈√(2T/V_T)⌉ computed from each instance.
    pub xi: Option<f64>,
}

impl Scenario {
    pub fn planning(params: PlanningParams) -> Self {
        Scenario { kind: ScenarioKind::Planning(params), eta: StepRule::Fixed(0.5), xi: Some(1.0) }
    }

    pub fn quadrotor(params: QuadrotorParams) -> Self {
        Scenario { kind: ScenarioKind::Quadrotor(params), eta: StepRule::OverL(1.0), xi: Some(1.0) }
    }

    pub fn lowerbound(params: LowerBoundParams) -> Self {
        Scenario { kind: ScenarioKind::LowerBound(params), eta: StepRule::OverL(0.5), xi: None }
    }

    /// Default scenario for `planning`, `quadrotor` or `lowerbound`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "planning" => Ok(Self::planning(PlanningParams::default())),
            "quadrotor" => Ok(Self::quadrotor(QuadrotorParams::default())),
            "lowerbound" => Ok(Self::lowerbound(LowerBoundParams::default())),
            _ => Err(Error::Config(format!("unknown scenario {name:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ScenarioKind::Planning(_) => "planning",
            ScenarioKind::Quadrotor(_) => "quadrotor",
            ScenarioKind::LowerBound(_) => "lowerbound",
        }
    }

    pub fn horizon(&self) -> usize {
        match &self.kind {
            ScenarioKind::Planning(p) => p.horizon,
            ScenarioKind::Quadrotor(p) => p.horizon(),
            ScenarioKind::LowerBound(p) => p.horizon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let (StepRule::Fixed(eta) | StepRule::OverL(eta)) = self.eta;
        if !(eta > 0.0) || !eta.is_finite() {
            return bad(format!("eta must be positive, got {eta}"));
        }
        if let Some(xi) = self.xi {
            if !(xi > 0.0) || !xi.is_finite() {
                return bad(format!("xi must be positive, got {xi}"));
            }
        }
        match &self.kind {
            ScenarioKind::Planning(p) => {
                if p.horizon == 0 || !(p.alpha > 0.0) || !(p.beta >= 0.0) || !(p.sigma2 >= 0.0) {
                    return bad(format!("invalid planning parameters {p:?}"));
                }
            }
            ScenarioKind::Quadrotor(p) => {
                if !(p.dt > 0.0) || !(p.horizon_seconds > 0.0) || p.horizon() == 0 {
                    return bad(format!("invalid quadrotor time grid dt={} horizon={}", p.dt, p.horizon_seconds));
                }
                let steps = p.horizon_seconds / p.dt;
                if (steps - steps.round()).abs() > 1e-6 {
                    return bad(format!("horizon {} s is not a whole number of {} s steps", p.horizon_seconds, p.dt));
                }
                if !(p.noise_sd >= 0.0) || !(p.alpha > 0.0) || !(p.beta >= 0.0) || p.k1 == 0.0 {
                    return bad(format!("invalid quadrotor parameters {p:?}"));
                }
            }
            ScenarioKind::LowerBound(p) => {
                if p.horizon == 0 {
                    return bad("horizon must be positive".into());
                }
                p.cost_spec()?;
            }
        }
        Ok(())
    }

    /// The seed-independent cost. For the quadrotor the smoothness is the
    /// numerical largest Hessian eigenvalue.
    pub fn cost_spec(&self) -> Result<CostSpec> {
        self.validate()?;
        match &self.kind {
            ScenarioKind::Planning(p) => CostSpec::quadratic_tracking(p.alpha, p.beta),
            ScenarioKind::Quadrotor(p) => {
                let spec = p.cost_spec()?;
                let l = p.numeric_smoothness(&spec)?;
                spec.with_smoothness(l)
            }
            ScenarioKind::LowerBound(p) => p.cost_spec(),
        }
    }

    pub fn instance(&self, seed: u64) -> Result<Instance> {
        self.instance_with_spec(&self.cost_spec()?, seed)
    }

    /// Like [`Scenario::instance`] with a precomputed [`Scenario::cost_spec`].
    pub fn instance_with_spec(&self, spec: &CostSpec, seed: u64) -> Result<Instance> {
        match &self.kind {
            ScenarioKind::Planning(p) => p.instance(spec, seed),
            ScenarioKind::Quadrotor(p) => p.instance(spec, seed),
            ScenarioKind::LowerBound(p) => p.instance(spec, seed),
        }
    }

    /// The Gaussian error model behind the predictions, when there is one.
    /// The quadrotor only has one without the shock bias.
    pub fn error_model(&self) -> Result<Option<StochasticPredictionModel>> {
        match &self.kind {
            ScenarioKind::Planning(p) => StochasticPredictionModel::ar1(p.gamma, p.sigma2, p.horizon).map(Some),
            ScenarioKind::Quadrotor(p) if p.foresee_shock || p.shock_stage() >= p.horizon() => {
                StochasticPredictionModel::ar1(p.gamma, p.noise_sd * p.noise_sd, p.horizon()).map(Some)
            }
            _ => Ok(None),
        }
    }

    pub fn oracle_stepsize(&self, inst: &Instance) -> Result<OgdStepsize> {
        match self.xi {
            Some(xi) => Ok(OgdStepsize::Constant(xi)),
            None => {
                let v = inst
                    .variation()
                    .map_err(|e| Error::Config(format!("restarted OGD needs a finite V_T ({e}); set xi instead")))?;
                OgdStepsize::from_variation(inst.horizon(), v)
            }
        }
    }

    /// Overrides one parameter by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "eta" => {
                self.eta = value.parse()?;
                return Ok(());
            }
            "xi" => {
                self.xi = match value {
                    "restart" | "restarted" => None,
                    _ => Some(parse_positive(key, value)?),
                };
                return Ok(());
            }
            _ => {}
        }
        let f = || parse_finite(key, value);
        match &mut self.kind {
            ScenarioKind::Planning(p) => match key {
                "gamma" => p.gamma = f()?,
                "T" | "horizon" => p.horizon = parse_count(key, value)?,
                "alpha" => p.alpha = f()?,
                "beta" => p.beta = f()?,
                "x0" => p.x0 = f()?,
                "a" | "amplitude" => p.amplitude = f()?,
                "omega" => p.omega = f()?,
                "sigma2" => p.sigma2 = f()?,
                _ => return Err(unknown_key(key, "planning")),
            },
            ScenarioKind::Quadrotor(p) => match key {
                "alpha" => p.alpha = f()?,
                "beta" => p.beta = f()?,
                "k1" => p.k1 = f()?,
                "k2" => p.k2 = f()?,
                "g" | "gravity" => p.gravity = f()?,
                "dt" => p.dt = f()?,
                "horizon_seconds" => p.horizon_seconds = f()?,
                "x0" => p.x0 = f()?,
                "gamma" => p.gamma = f()?,
                "noise_sd" => p.noise_sd = f()?,
                "t_c" | "shock_time" => p.shock_time = f()?,
                "pre_amplitude" => p.pre_amplitude = f()?,
                "post_amplitude" => p.post_amplitude = f()?,
                "frequency" => p.frequency = f()?,
                "target_offset" => p.target_offset = f()?,
                "foresee_shock" => {
                    p.foresee_shock = value
                        .parse()
                        .map_err(|_| Error::Config(format!("foresee_shock must be true or false, got {value:?}")))?
                }
                _ => return Err(unknown_key(key, "quadrotor")),
            },
            ScenarioKind::LowerBound(p) => match key {
                "alpha" => p.alpha = f()?,
                "beta" => p.beta = f()?,
                "T" | "horizon" => p.horizon = parse_count(key, value)?,
                _ => return Err(unknown_key(key, "lowerbound")),
            },
        }
        Ok(())
    }

    /// Applies overrides in order, then validates.
    pub fn apply<'a, I>(&mut self, pairs: I) -> Result<()>
    where
        I: IntoIterator<Item = (&'a str, &'a str)>,
    {
        for (k, v) in pairs {
            self.set(k, v)?;
        }
        self.validate()
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn unknown_key(key: &str, scenario: &str) -> Error {
    Error::Config(format!("unknown parameter {key:?} for scenario {scenario}"))
}

fn parse_finite(key: &str, value: &str) -> Result<f64> {
    match value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Config(format!("{key} must be a finite number, got {value:?}"))),
    }
}

fn parse_positive(key: &str, value: &str) -> Result<f64> {
    let v = parse_finite(key, value)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Config(format!("{key} must be positive, got {value:?}")))
    }
}

fn parse_count(key: &str, value: &str) -> Result<usize> {
    match value.parse::<usize>() {
        Ok(v) if (1..=100_000).contains(&v) => Ok(v),
        _ => Err(Error::Config(format!("{key} must be an integer in 1..=100000, got {value:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_noise_planning_is_exact() {
        let mut s = Scenario::planning(PlanningParams::default());
        s.set("sigma2", "0").unwrap();
        let inst = s.instance(3).unwrap();
        assert!(inst.table.delta_sq_norms(20).iter().all(|&d| d == 0.0));
        assert!((inst.truth().stage(1)[0] - 4.0 * 0.5f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn quadrotor_grid() {
        let p = QuadrotorParams::default();
        assert_eq!(p.horizon(), 100);
        assert_eq!(p.shock_stage(), 56);
        let hover = DecisionTrajectory::constant(vec![2.0], 5);
        for u in p.controls(&hover) {
            assert!((u - 8.8).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrotor_numeric_smoothness_below_closed_form() {
        let p = QuadrotorParams::default();
        let spec = p.cost_spec().unwrap();
        let l = p.numeric_smoothness(&spec).unwrap();
        assert!(l <= spec.smoothness() + 1e-9 && l > 2.5, "{l}");
    }

    #[test]
    fn quadrotor_shock_hidden_until_it_happens() {
        let p = QuadrotorParams { noise_sd: 0.0, ..Default::default() };
        let inst = Scenario::quadrotor(p).instance(0).unwrap();
        let s_c = p.shock_stage();
        // before the shock, the post-shock stages are predicted with the old target
        let early = inst.table.prediction(70, s_c as i64 - 1)[0];
        assert!((early - p.target(p.pre_amplitude, 70)).abs() < 1e-12);
        let late = inst.table.prediction(70, s_c as i64)[0];
        assert!((late - inst.truth().stage(70)[0]).abs() < 1e-12);
    }

    #[test]
    fn lowerbound_signs_and_error_sizes() {
        let p = LowerBoundParams::default();
        let inst = Scenario::lowerbound(p).instance(11).unwrap();
        for t in 1..=p.horizon {
            let th = inst.truth().stage(t)[0];
            if t % 2 == 0 {
                assert!((0.125..=0.375).contains(&th));
            } else {
                assert!((-0.375..=-0.125).contains(&th));
            }
            for s in 0..t {
                let err = (th - inst.table.prediction(t, s as i64)[0]).abs();
                assert!(err <= (t - s) as f64 / (8.0 * t as f64) + 1e-15);
            }
        }
    }

    #[test]
    fn lowerbound_rejects_bad_constants() {
        let mut s = Scenario::lowerbound(LowerBoundParams::default());
        assert!(s.apply([("alpha", "0.9")]).unwrap_err().is_config_error());
        let mut s = Scenario::lowerbound(LowerBoundParams::default());
        assert!(s.apply([("beta", "20")]).is_err());
    }

    #[test]
    fn overrides() {
        let mut s = Scenario::by_name("planning").unwrap();
        s.apply([("T", "7"), ("eta", "1/L"), ("xi", "restart")]).unwrap();
        assert_eq!(s.horizon(), 7);
        assert_eq!(s.eta, StepRule::OverL(1.0));
        assert_eq!(s.xi, None);
        assert!(s.set("bogus", "1").unwrap_err().is_config_error());
        assert!(s.set("alpha", "nan").is_err());
        assert!(Scenario::by_name("nope").is_err());
    }
}

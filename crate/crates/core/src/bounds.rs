//! Closed-form regret bounds, the environment variation V_T, and the
//! constants they are built from.

use nalgebra::DMatrix;

use crate::algos::Lookahead;
use crate::error::{Error, Result};
use crate::linalg;
use crate::predict::StochasticPredictionModel;
use crate::problem::{CostSpec, FeasibleSet, ParamTrajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub alpha: f64,
    /// L = l_f + 2 l_d (or the declared smoothness of the full objective).
    pub l: f64,
    pub h: f64,
    pub g: f64,
    pub beta: f64,
    /// ρ = 1 − α/(4L)
    pub rho: f64,
    /// ζ = h²/α + h²/(2L)
    pub zeta: f64,
    /// C₁ = 4√2 G²/α + 32√2 β G²/α² + 20
    pub c1: f64,
    /// C₂ = 2L C₁/α
    pub c2: f64,
    /// ρ₀ = ((√L − √α)/(√L + √α))²
    pub rho0: f64,
    /// ζ₀ = (h(1 − √ρ₀)/(α + β))² α(1 − 2ρ₀)/2
    pub zeta0: f64,
}

impl BoundConstants {
    pub fn from_spec(spec: &CostSpec) -> Self {
        let c = spec.constants();
        Self::new(c.alpha, spec.smoothness(), c.h, c.gradient_bound, c.switch_cap)
    }

    pub fn new(alpha: f64, l: f64, h: f64, g: f64, beta: f64) -> Self {
        let rho = 1.0 - alpha / (4.0 * l);
        let zeta = h * h / alpha + h * h / (2.0 * l);
        let sqrt2 = std::f64::consts::SQRT_2;
        let c1 = 4.0 * sqrt2 * g * g / alpha + 32.0 * sqrt2 * beta * g * g / (alpha * alpha) + 20.0;
        let c2 = 2.0 * l * c1 / alpha;
        let rho0 = ((l.sqrt() - alpha.sqrt()) / (l.sqrt() + alpha.sqrt())).powi(2);
        let zeta0 = (h * (1.0 - rho0.sqrt()) / (alpha + beta)).powi(2) * alpha * (1.0 - 2.0 * rho0) / 2.0;
        BoundConstants { alpha, l, h, g, beta, rho, zeta, c1, c2, rho0, zeta0 }
    }

    /// ρ^W, with ρ^∞ = 0.
    pub fn rho_pow(&self, w: Lookahead) -> f64 {
        match w {
            Lookahead::Finite(w) => self.rho.powf(w as f64),
            Lookahead::Infinite => 0.0,
        }
    }

    /// 2L/α
    fn amplification(&self) -> f64 {
        2.0 * self.l / self.alpha
    }

    /// Σ_{k=1}^{min(W,T)} ζρ^{k−1}‖δ(k)‖² + 𝟙(W>T) ζ(ρ^T − ρ^W)/(1−ρ)‖δ(T)‖²
    fn error_terms(&self, w: Lookahead, delta_sq: &[f64]) -> f64 {
        let horizon = delta_sq.len();
        let m = w.capped(horizon);
        let mut total: f64 = (0..m).map(|i| self.zeta * self.rho.powi(i as i32) * delta_sq[i]).sum();
        let beyond = match w {
            Lookahead::Finite(w) => w > horizon,
            Lookahead::Infinite => true,
        };
        if beyond && horizon > 0 {
            let factor = (self.rho.powi(horizon as i32) - self.rho_pow(w)) / (1.0 - self.rho);
            total += factor * self.zeta * delta_sq[horizon - 1];
        }
        total
    }
}

/// Σ_t sup_{x ∈ 𝕏} |f(x; θ_t) − f(x; θ_{t−1})|. θ₀ defaults to θ₁.
///
/// Uses the cost's closed form when it has one; otherwise a grid search over
/// the box at relative resolution 10⁻³ per dimension (see [`variation_grid`]).
pub fn variation_vt(
    spec: &CostSpec,
    theta: &ParamTrajectory,
    theta0: Option<&[f64]>,
    set: &FeasibleSet,
) -> Result<f64> {
    let first = theta0.unwrap_or_else(|| theta.stage(1));
    if first.len() != theta.dim() {
        return Err(Error::Dimension { expected: theta.dim(), got: first.len() });
    }
    let mut prev = first;
    let mut total = 0.0;
    for cur in theta.iter() {
        let term = match spec.stage_cost().sup_difference(cur, prev, set) {
            Some(v) => v?,
            None => return variation_grid(spec, theta, Some(first), set, 1e-3),
        };
        total += term;
        prev = cur;
    }
    Ok(total)
}

/// V_T by exhaustive grid search over a box with `resolution` relative to
/// each side length. At most three decision dimensions.
pub fn variation_grid(
    spec: &CostSpec,
    theta: &ParamTrajectory,
    theta0: Option<&[f64]>,
    set: &FeasibleSet,
    resolution: f64,
) -> Result<f64> {
    let (lower, upper) = set
        .bounds()
        .ok_or_else(|| Error::Unbounded("variation of a cost over an unconstrained set; supply a box".into()))?;
    let n = lower.len();
    if n > 3 {
        return Err(Error::invalid(format!("grid search supports at most 3 dimensions, got {n}")));
    }
    if !(resolution > 0.0 && resolution <= 1.0) {
        return Err(Error::invalid(format!("resolution must lie in (0, 1], got {resolution}")));
    }
    let steps = (1.0 / resolution).ceil() as usize;
    let points = (steps + 1).pow(n as u32);
    let mut x = vec![0.0; n];
    let first = theta0.unwrap_or_else(|| theta.stage(1));
    let mut prev = first;
    let mut total = 0.0;
    for cur in theta.iter() {
        let mut best: f64 = 0.0;
        for idx in 0..points {
            let mut rest = idx;
            for i in 0..n {
                let j = rest % (steps + 1);
                rest /= steps + 1;
                x[i] = lower[i] + (upper[i] - lower[i]) * j as f64 / steps as f64;
            }
            best = best.max((spec.stage_value(&x, cur) - spec.stage_value(&x, prev)).abs());
        }
        total += best;
        prev = cur;
    }
    Ok(total)
}

/// (2L/α)ρ^W Reg(φ) + ζ Σ_{k=1}^{min(W,T)} ρ^{k−1}‖δ(k)‖² + 𝟙(W>T)(ρ^T − ρ^W)/(1−ρ) ζ‖δ(T)‖².
/// `delta_sq[k−1] = ‖δ(k)‖²` for k = 1..T.
pub fn theorem1_bound(c: &BoundConstants, w: Lookahead, reg_phi: f64, delta_sq: &[f64]) -> f64 {
    let lead = c.rho_pow(w);
    let first = if lead == 0.0 { 0.0 } else { c.amplification() * lead * reg_phi };
    first + c.error_terms(w, delta_sq)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corollary1 {
    pub part_i: f64,
    pub part_ii: f64,
    /// Whether 1 ≤ V_T ≤ T, the range the bound is stated for.
    pub variation_in_range: bool,
}

impl Corollary1 {
    pub fn total(&self) -> f64 {
        self.part_i + self.part_ii
    }
}

/// √(V T) log(1 + √(T/V))
fn variation_rate(horizon: usize, v: f64) -> f64 {
    let t = horizon as f64;
    (v * t).sqrt() * (1.0 + (t / v).sqrt()).ln()
}

/// Part I = ρ^W (2L/α) C₁ √(V_T T) log(1 + √(T/V_T));
/// Part II = (2L/α)(h²/α)ρ^W‖δ(min(W,T))‖² plus the prediction-error terms.
pub fn corollary1_bound(c: &BoundConstants, w: Lookahead, variation: f64, delta_sq: &[f64]) -> Corollary1 {
    let horizon = delta_sq.len();
    let lead = c.rho_pow(w);
    let part_i = if lead == 0.0 { 0.0 } else { lead * c.amplification() * c.c1 * variation_rate(horizon, variation) };
    let m = w.capped(horizon);
    let last = if m == 0 { 0.0 } else { delta_sq[m - 1] };
    let part_ii = c.amplification() * c.h * c.h / c.alpha * lead * last + c.error_terms(w, delta_sq);
    Corollary1 { part_i, part_ii, variation_in_range: variation >= 1.0 && variation <= horizon as f64 }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corollary2 {
    pub value: f64,
    /// √(V_T T) log(1+√(T/V_T)) ≥ (2Lh²ρ + α²ζ)/(2LC₁(1−ρ)α) ‖δ(T)‖²
    pub condition_holds: bool,
}

/// ζ/(1−ρ) Σ_{k=1}^T ρ^{k−1}‖δ(k)‖², the W → ∞ bound.
pub fn corollary2_bound(c: &BoundConstants, variation: f64, delta_sq: &[f64]) -> Corollary2 {
    let horizon = delta_sq.len();
    let value = c.zeta / (1.0 - c.rho) * geometric_sum(c.rho, delta_sq);
    let last = delta_sq.last().copied().unwrap_or(0.0);
    let threshold = (2.0 * c.l * c.h * c.h * c.rho + c.alpha * c.alpha * c.zeta)
        / (2.0 * c.l * c.c1 * (1.0 - c.rho) * c.alpha)
        * last;
    Corollary2 { value, condition_holds: horizon > 0 && variation_rate(horizon, variation) >= threshold }
}

fn geometric_sum(r: f64, values: &[f64]) -> f64 {
    values.iter().enumerate().map(|(i, v)| r.powi(i as i32) * v).sum()
}

/// ζ₀/(1−ρ₀) Σ_{k=1}^T ρ₀^{k−1}‖δ(k)‖².
pub fn theorem3_lower(c: &BoundConstants, delta_sq: &[f64]) -> f64 {
    c.zeta0 / (1.0 - c.rho0) * geometric_sum(c.rho0, delta_sq)
}

/// ζ‖R_e‖₂(T−t)‖P(t)‖_F² for t = 0..min(W,T)−1.
fn correlation_terms(c: &BoundConstants, w: Lookahead, model: &StochasticPredictionModel) -> Vec<f64> {
    let horizon = model.horizon();
    (0..w.capped(horizon))
        .map(|t| c.zeta * model.noise_norm() * (horizon - t) as f64 * model.coeff(t).norm_squared())
        .collect()
}

/// (2L/α)ρ^W E[Reg(φ)] + Σ_{t=0}^{min(W,T)−1} ζ‖R_e‖₂(T−t)‖P(t)‖_F² (ρ^t − ρ^W)/(1−ρ).
pub fn theorem5_bound(
    c: &BoundConstants,
    w: Lookahead,
    model: &StochasticPredictionModel,
    expected_reg_phi: f64,
) -> f64 {
    let lead = c.rho_pow(w);
    let first = if lead == 0.0 { 0.0 } else { c.amplification() * lead * expected_reg_phi };
    first
        + correlation_terms(c, w, model)
            .iter()
            .enumerate()
            .map(|(t, v)| v * (c.rho.powi(t as i32) - lead) / (1.0 - c.rho))
            .sum::<f64>()
}

/// ρ^W C₂ √(E[V_T] T) log(1 + √(T/E[V_T])) + Σ ζ‖R_e‖₂(T−t)‖P(t)‖_F² ρ^t/(1−ρ).
pub fn corollary3_bound(
    c: &BoundConstants,
    w: Lookahead,
    model: &StochasticPredictionModel,
    expected_variation: f64,
) -> f64 {
    let lead = c.rho_pow(w);
    let first = if lead == 0.0 { 0.0 } else { lead * c.c2 * variation_rate(model.horizon(), expected_variation) };
    first + theorem6_k(c, w, model)
}

/// K = ζ Σ_{t=0}^{min(T,W)−1} ‖R_e‖₂(T−t)‖P(t)‖_F² ρ^t/(1−ρ), the scale of
/// the Gaussian concentration bound.
pub fn theorem6_k(c: &BoundConstants, w: Lookahead, model: &StochasticPredictionModel) -> f64 {
    correlation_terms(c, w, model).iter().enumerate().map(|(t, v)| v * c.rho.powi(t as i32) / (1.0 - c.rho)).sum()
}

/// The quadratic form A_W with (prediction-error part of the bound) = uᵀA_W u
/// for standard Gaussian u, where δ(k) = M_k R^{1/2} u.
pub fn theorem6_matrix(c: &BoundConstants, w: Lookahead, model: &StochasticPredictionModel) -> Result<DMatrix<f64>> {
    let horizon = model.horizon();
    let q = model.noise_dim();
    let m = w.capped(horizon);
    let dim = q * horizon;
    if m == 0 {
        return Ok(DMatrix::zeros(dim, dim));
    }
    let r_sqrt = linalg::psd_sqrt(model.noise_cov())?;
    let mut r_blk = DMatrix::zeros(dim, dim);
    for s in 0..horizon {
        r_blk.view_mut((s * q, s * q), (q, q)).copy_from(&r_sqrt);
    }
    let gram = |k: usize| {
        let mk = model.error_matrix(k) * &r_blk;
        mk.transpose() * mk
    };
    let lead = c.rho_pow(w);
    let head = c.amplification() * c.h * c.h / c.alpha * lead;
    let tail_weight = match w {
        Lookahead::Finite(w) if w <= horizon => head,
        _ => head + c.zeta * (c.rho.powi(horizon as i32) - lead) / (1.0 - c.rho),
    };
    let mut a = gram(m) * tail_weight;
    for k in 1..=m {
        a += gram(k) * (c.zeta * c.rho.powi(k as i32 - 1));
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts() -> BoundConstants {
        BoundConstants::from_spec(&CostSpec::quadratic_tracking(1.0, 0.5).unwrap())
    }

    #[test]
    fn constants_for_the_planning_cost() {
        let c = consts();
        assert_eq!(c.l, 3.0);
        assert!((c.rho - (1.0 - 1.0 / 12.0)).abs() < 1e-15);
        assert!((c.zeta - (1.0 + 1.0 / 6.0)).abs() < 1e-15);
        assert!(c.rho0 < c.rho);
    }

    #[test]
    fn theorem1_limits() {
        let c = consts();
        let d = [0.5, 1.0, 2.0];
        assert!((theorem1_bound(&c, Lookahead::Finite(0), 4.0, &d) - 6.0 * 4.0).abs() < 1e-12);
        let zero = [0.0; 3];
        let w = Lookahead::Finite(2);
        assert!((theorem1_bound(&c, w, 4.0, &zero) - 6.0 * c.rho.powi(2) * 4.0).abs() < 1e-12);
    }

    #[test]
    fn theorem1_tail_is_a_geometric_series() {
        let c = consts();
        let d = [0.5, 1.0, 2.0];
        let w = 5;
        let direct: f64 = (0..3).map(|i| c.zeta * c.rho.powi(i) * d[i as usize]).sum::<f64>()
            + (4..=w).map(|k| c.zeta * c.rho.powi(k - 1) * d[2]).sum::<f64>();
        let b = theorem1_bound(&c, Lookahead::Finite(w as usize), 0.0, &d);
        assert!((b - direct).abs() < 1e-12);
    }

    #[test]
    fn corollary2_values() {
        let c = consts();
        assert_eq!(corollary2_bound(&c, 1.0, &[0.0; 4]).value, 0.0);
        let single = corollary2_bound(&c, 1.0, &[1.0, 0.0, 0.0]);
        assert!((single.value - c.zeta / (1.0 - c.rho)).abs() < 1e-12);
    }

    #[test]
    fn corollary2_dominates_infinite_lookahead_on_ladders() {
        let c = consts();
        let d = [0.3, 0.4, 0.9, 1.5];
        let inf = theorem1_bound(&c, Lookahead::Infinite, 123.0, &d);
        assert!(inf <= corollary2_bound(&c, 1.0, &d).value);
        let cor1 = corollary1_bound(&c, Lookahead::Infinite, 2.0, &d);
        assert_eq!(cor1.part_i, 0.0);
    }

    #[test]
    fn variation_examples() {
        let spec = CostSpec::quadratic_tracking(1.0, 0.0).unwrap();
        let set = FeasibleSet::cube(1, 0.0, 1.0).unwrap();
        let constant = ParamTrajectory::scalar(vec![0.4; 5]).unwrap();
        assert_eq!(variation_vt(&spec, &constant, None, &set).unwrap(), 0.0);
        let step = ParamTrajectory::scalar(vec![1.0]).unwrap();
        let v = variation_vt(&spec, &step, Some(&[0.0]), &set).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let g = variation_grid(&spec, &step, Some(&[0.0]), &set, 1e-3).unwrap();
        assert!((g - 0.5).abs() < 1e-3);
        let open = FeasibleSet::unconstrained(1).unwrap();
        assert!(matches!(variation_vt(&spec, &step, Some(&[0.0]), &open), Err(Error::Unbounded(_))));
    }

    #[test]
    fn theorem5_single_correlation_term() {
        let c = consts();
        let mut coeffs = vec![DMatrix::zeros(1, 1); 6];
        coeffs[0] = DMatrix::identity(1, 1);
        let model = StochasticPredictionModel::new(coeffs, DMatrix::from_element(1, 1, 2.0)).unwrap();
        let w = 3;
        let expect = c.zeta * 2.0 * 6.0 * (1.0 - c.rho.powi(w)) / (1.0 - c.rho);
        let b = theorem5_bound(&c, Lookahead::Finite(w as usize), &model, 0.0);
        assert!((b - expect).abs() < 1e-9 * expect);
        assert_eq!(theorem5_bound(&c, Lookahead::Finite(0), &model, 1.5), 6.0 * 1.5);
    }

    #[test]
    fn k_vanishes_without_correlation() {
        let c = consts();
        let model = StochasticPredictionModel::new(vec![DMatrix::zeros(1, 1); 4], DMatrix::identity(1, 1)).unwrap();
        assert_eq!(theorem6_k(&c, Lookahead::Finite(3), &model), 0.0);
        let ar = StochasticPredictionModel::ar1(0.6, 1.0, 4).unwrap();
        assert_eq!(theorem6_k(&c, Lookahead::Finite(9), &ar), theorem6_k(&c, Lookahead::Finite(4), &ar));
    }
}

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::PredictionTable;
use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::ParamTrajectory;

/// Prediction errors driven by i.i.d. Gaussian noise e_s ~ N(0, R_e):
/// δ_t(k) = Σ_{s=t−k+1}^{t} P(t−s) e_s.
#[derive(Debug, Clone)]
pub struct StochasticPredictionModel {
    coeffs: Vec<DMatrix<f64>>,
    noise_cov: DMatrix<f64>,
    noise_sqrt: DMatrix<f64>,
    noise_norm: f64,
}

impl StochasticPredictionModel {
    /// `coeffs[s] = P(s)` (p×q) for s = 0..T−1; `noise_cov` is the q×q R_e.
    pub fn new(coeffs: Vec<DMatrix<f64>>, noise_cov: DMatrix<f64>) -> Result<Self> {
        let first = coeffs.first().ok_or_else(|| Error::invalid("need at least one coefficient"))?;
        let (p, q) = first.shape();
        if p == 0 || q == 0 {
            return Err(Error::invalid("coefficient matrices must be non-empty"));
        }
        for c in &coeffs {
            if c.shape() != (p, q) {
                return Err(Error::invalid(format!("coefficient shape {:?} differs from {:?}", c.shape(), (p, q))));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("non-finite coefficient"));
            }
        }
        if noise_cov.shape() != (q, q) {
            return Err(Error::Dimension { expected: q, got: noise_cov.nrows() });
        }
        let noise_sqrt = linalg::psd_sqrt(&noise_cov)?;
        let noise_norm = linalg::spectral_norm_psd(&noise_cov, 1e-10);
        Ok(StochasticPredictionModel { coeffs, noise_cov, noise_sqrt, noise_norm })
    }

    /// Scalar AR(1): P(s) = γ^s, R_e = σ².
    pub fn ar1(gamma: f64, sigma2: f64, horizon: usize) -> Result<Self> {
        if !(sigma2 >= 0.0) || !gamma.is_finite() {
            return Err(Error::invalid(format!("invalid AR(1) parameters γ={gamma} σ²={sigma2}")));
        }
        let coeffs = (0..horizon.max(1)).map(|s| DMatrix::from_element(1, 1, gamma.powi(s as i32))).collect();
        Self::new(coeffs, DMatrix::from_element(1, 1, sigma2))
    }

    pub fn horizon(&self) -> usize {
        self.coeffs.len()
    }

    pub fn param_dim(&self) -> usize {
        self.coeffs[0].nrows()
    }

    pub fn noise_dim(&self) -> usize {
        self.coeffs[0].ncols()
    }

    pub fn coeff(&self, s: usize) -> &DMatrix<f64> {
        &self.coeffs[s]
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    /// ‖R_e‖₂, by power iteration.
    pub fn noise_norm(&self) -> f64 {
        self.noise_norm
    }

    /// Draws e_1..e_T stacked (length qT).
    pub fn sample_noise(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = self.noise_dim();
        let mut out = Vec::with_capacity(q * self.horizon());
        for _ in 0..self.horizon() {
            let z = DVector::from_fn(q, |_, _| StandardNormal.sample(&mut rng));
            out.extend((&self.noise_sqrt * z).iter());
        }
        out
    }

    /// δ(k) for a given stacked noise vector.
    pub fn errors(&self, noise: &[f64], k: usize) -> Vec<f64> {
        let (p, q) = (self.param_dim(), self.noise_dim());
        let horizon = self.horizon();
        let mut out = vec![0.0; p * horizon];
        for t in 1..=horizon {
            let lo = t.saturating_sub(k) + 1;
            for s in lo..=t {
                let e = DVector::from_column_slice(&noise[(s - 1) * q..s * q]);
                let contrib = &self.coeffs[t - s] * e;
                for (o, c) in out[(t - 1) * p..t * p].iter_mut().zip(contrib.iter()) {
                    *o += c;
                }
            }
        }
        out
    }

    /// Prediction table with θ_{t|t−k} = θ_t − δ_t(k) under the noise drawn from `seed`.
    pub fn generate(&self, base: &ParamTrajectory, seed: u64) -> Result<PredictionTable> {
        Ok(self.generate_with_noise(base, seed)?.0)
    }

    /// Like [`StochasticPredictionModel::generate`], also returning the stacked noise.
    pub fn generate_with_noise(&self, base: &ParamTrajectory, seed: u64) -> Result<(PredictionTable, Vec<f64>)> {
        if base.horizon() != self.horizon() {
            return Err(Error::Horizon { expected: self.horizon(), got: base.horizon() });
        }
        if base.dim() != self.param_dim() {
            return Err(Error::Dimension { expected: self.param_dim(), got: base.dim() });
        }
        let noise = self.sample_noise(seed);
        let table = self.table_from_noise(base, &noise)?;
        Ok((table, noise))
    }

    /// Prediction table for an explicit noise realization.
    pub fn table_from_noise(&self, base: &ParamTrajectory, noise: &[f64]) -> Result<PredictionTable> {
        if noise.len() != self.noise_dim() * self.horizon() {
            return Err(Error::Dimension { expected: self.noise_dim() * self.horizon(), got: noise.len() });
        }
        let p = self.param_dim();
        // δ(k) only changes for k ≤ T; index by k = τ − s
        let deltas: Vec<Vec<f64>> = (1..=self.horizon()).map(|k| self.errors(noise, k)).collect();
        PredictionTable::from_fn(base.clone(), |tau, s| {
            let d = &deltas[tau - s - 1][(tau - 1) * p..tau * p];
            base.stage(tau).iter().zip(d).map(|(a, b)| a - b).collect()
        })
    }

    /// M_k: the (pT)×(qT) matrix with δ(k) = M_k e.
    pub fn error_matrix(&self, k: usize) -> DMatrix<f64> {
        let (p, q) = (self.param_dim(), self.noise_dim());
        let horizon = self.horizon();
        let mut m = DMatrix::zeros(p * horizon, q * horizon);
        for t in 1..=horizon {
            for s in (t.saturating_sub(k) + 1)..=t {
                m.view_mut(((t - 1) * p, (s - 1) * q), (p, q)).copy_from(&self.coeffs[t - s]);
            }
        }
        m
    }

    /// E‖δ(k)‖² = tr(R_blk M_kᵀ M_k), exact.
    pub fn expected_sq_error(&self, k: usize) -> f64 {
        let m = self.error_matrix(k);
        let q = self.noise_dim();
        let mut total = 0.0;
        // tr(R_blk MᵀM) = Σ_s tr(R_e · M_sᵀ M_s) over block columns s
        for s in 0..self.horizon() {
            let col = m.columns(s * q, q);
            total += (&self.noise_cov * (col.transpose() * col)).trace();
        }
        total
    }

    /// ‖R_e‖₂ Σ_{t=0}^{min(k,T)−1} (T−t)‖P(t)‖_F², an upper bound on E‖δ(k)‖².
    pub fn expected_error_bound(&self, k: usize) -> Result<f64> {
        if k < 1 {
            return Err(Error::invalid("lookahead k must be at least 1"));
        }
        let horizon = self.horizon();
        Ok(self.noise_norm
            * (0..k.min(horizon)).map(|t| (horizon - t) as f64 * self.coeffs[t].norm_squared()).sum::<f64>())
    }
}

/// θ_t = γθ_{t−1} + e_t with e_t ~ N(0, σ²I), and the optimal predictions
/// θ_{t|s} = γ^{t−s}θ_s (θ_0 known).
pub fn ar1_scenario(
    gamma: f64,
    theta0: &[f64],
    sigma2: f64,
    horizon: usize,
    seed: u64,
) -> Result<(ParamTrajectory, PredictionTable)> {
    if !(sigma2 >= 0.0) || !gamma.is_finite() {
        return Err(Error::invalid(format!("invalid AR(1) parameters γ={gamma} σ²={sigma2}")));
    }
    if horizon == 0 || theta0.is_empty() {
        return Err(Error::invalid("horizon and parameter dimension must be positive"));
    }
    let p = theta0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sd = sigma2.sqrt();
    // path[s] = θ_s for s = 0..T
    let mut path = vec![theta0.to_vec()];
    for t in 1..=horizon {
        let next = path[t - 1]
            .iter()
            .map(|v| {
                let z: f64 = StandardNormal.sample(&mut rng);
                gamma * v + sd * z
            })
            .collect();
        path.push(next);
    }
    let truth = ParamTrajectory::new(p, path[1..].concat())?;
    let table = PredictionTable::from_fn(truth.clone(), |tau, s| {
        let g = gamma.powi((tau - s) as i32);
        path[s].iter().map(|v| g * v).collect()
    })?;
    Ok((truth, table))
}

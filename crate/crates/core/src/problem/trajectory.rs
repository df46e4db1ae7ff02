use crate::error::{Error, Result};

/// Parameters θ₁..θ_T, stored stacked. Stages are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamTrajectory {
    dim: usize,
    values: Vec<f64>,
}

impl ParamTrajectory {
    pub fn new(dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("parameter dimension must be positive"));
        }
        if values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "stacked parameter length {} is not a positive multiple of {dim}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite parameter value {bad}")));
        }
        Ok(ParamTrajectory { dim, values })
    }

    pub fn from_stages(stages: &[Vec<f64>]) -> Result<Self> {
        let dim = stages.first().map(Vec::len).unwrap_or(0);
        if let Some(bad) = stages.iter().find(|s| s.len() != dim) {
            return Err(Error::Dimension { expected: dim, got: bad.len() });
        }
        Self::new(dim, stages.concat())
    }

    /// Scalar parameters, one per stage.
    pub fn scalar(values: Vec<f64>) -> Result<Self> {
        Self::new(1, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.values.len() / self.dim
    }

    /// θ_t for `1 <= t <= T`.
    pub fn stage(&self, t: usize) -> &[f64] {
        assert!(t >= 1 && t <= self.horizon(), "stage {t} out of range");
        &self.values[(t - 1) * self.dim..t * self.dim]
    }

    pub fn stacked(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.dim)
    }
}

/// Decisions x₁..x_T together with the fixed history that precedes them.
///
/// `x0` is the initial decision. `x_prior` is x₋₁, only read by second-order
/// switching costs; it defaults to `x0` (a system starting at rest).
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTrajectory {
    dim: usize,
    x0: Vec<f64>,
    x_prior: Vec<f64>,
    values: Vec<f64>,
}

impl DecisionTrajectory {
    pub fn new(x0: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let prior = x0.clone();
        Self::with_prior(prior, x0, values)
    }

    pub fn with_prior(x_prior: Vec<f64>, x0: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let dim = x0.len();
        if dim == 0 {
            return Err(Error::invalid("decision dimension must be positive"));
        }
        if x_prior.len() != dim {
            return Err(Error::Dimension { expected: dim, got: x_prior.len() });
        }
        if !values.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!("stacked decision length {} is not a multiple of {dim}", values.len())));
        }
        Ok(DecisionTrajectory { dim, x0, x_prior, values })
    }

    /// Every stage equal to `x0`.
    pub fn constant(x0: Vec<f64>, horizon: usize) -> Self {
        let values = x0.repeat(horizon);
        DecisionTrajectory { dim: x0.len(), x_prior: x0.clone(), x0, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn x_prior(&self) -> &[f64] {
        &self.x_prior
    }

    /// x_t for `-1 <= t <= T`, reading the fixed history for `t <= 0`.
    pub fn at(&self, t: i64) -> &[f64] {
        match t {
            -1 => &self.x_prior,
            0 => &self.x0,
            t => self.stage(t as usize),
        }
    }

    pub fn stage(&self, t: usize) -> &[f64] {
        assert!(t >= 1 && t <= self.horizon(), "stage {t} out of range");
        &self.values[(t - 1) * self.dim..t * self.dim]
    }

    pub fn stage_mut(&mut self, t: usize) -> &mut [f64] {
        assert!(t >= 1 && t <= self.horizon(), "stage {t} out of range");
        &mut self.values[(t - 1) * self.dim..t * self.dim]
    }

    pub fn stacked(&self) -> &[f64] {
        &self.values
    }

    pub fn stacked_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Same history, new stacked stage values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::with_prior(self.x_prior.clone(), self.x0.clone(), values)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stage_indexing_is_one_based() {
        let th = ParamTrajectory::from_stages(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(th.horizon(), 2);
        assert_eq!(th.stage(2), &[3.0, 4.0]);
        let x = DecisionTrajectory::new(vec![0.0], vec![5.0, 6.0]).unwrap();
        assert_eq!(x.at(0), &[0.0]);
        assert_eq!(x.at(-1), &[0.0]);
        assert_eq!(x.at(2), &[6.0]);
    }

    #[test]
    fn rejects_non_finite_and_ragged_input() {
        assert!(ParamTrajectory::scalar(vec![1.0, f64::NAN]).is_err());
        assert!(ParamTrajectory::new(2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(ParamTrajectory::from_stages(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(ParamTrajectory::scalar(vec![]).is_err());
    }
}

use crate::error::{Error, Result};

/// Decision space: either an axis-aligned box or all of ℝⁿ.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    Unconstrained { dim: usize },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl FeasibleSet {
    pub fn unconstrained(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Ok(FeasibleSet::Unconstrained { dim })
    }

    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::invalid("dimension must be positive"));
        }
        if lower.len() != upper.len() {
            return Err(Error::Dimension { expected: lower.len(), got: upper.len() });
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo < hi) {
                return Err(Error::invalid(format!(
                    "box bounds must satisfy lower < upper (coordinate {i}: {lo} vs {hi})"
                )));
            }
        }
        Ok(FeasibleSet::Box { lower, upper })
    }

    /// The same interval `[lo, hi]` on every coordinate.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::boxed(vec![lo; dim], vec![hi; dim])
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Unconstrained { dim } => *dim,
            FeasibleSet::Box { lower, .. } => lower.len(),
        }
    }

    pub fn is_unconstrained(&self) -> bool {
        matches!(self, FeasibleSet::Unconstrained { .. })
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            FeasibleSet::Unconstrained { dim } => x.len() == *dim,
            FeasibleSet::Box { lower, upper } => {
                x.len() == lower.len()
                    && x.iter().zip(lower.iter().zip(upper)).all(|(v, (lo, hi))| *lo <= *v && *v <= *hi)
            }
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: x.len() });
        }
        let mut out = x.to_vec();
        self.project_in_place(&mut out);
        Ok(out)
    }

    /// Projection without the dimension check; callers guarantee `x.len() == dim`.
    pub(crate) fn project_in_place(&self, x: &mut [f64]) {
        if let FeasibleSet::Box { lower, upper } = self {
            for ((v, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
                *v = v.clamp(*lo, *hi);
            }
        }
    }

    /// Projection applied stage-wise to a stacked trajectory of length `dim * T`.
    pub(crate) fn project_stacked(&self, x: &mut [f64]) {
        if self.is_unconstrained() {
            return;
        }
        for chunk in x.chunks_mut(self.dim()) {
            self.project_in_place(chunk);
        }
    }

    /// Per-coordinate bounds, `None` when unconstrained.
    pub fn bounds(&self) -> Option<(&[f64], &[f64])> {
        match self {
            FeasibleSet::Unconstrained { .. } => None,
            FeasibleSet::Box { lower, upper } => Some((lower, upper)),
        }
    }
}

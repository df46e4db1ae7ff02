use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Solves a symmetric tridiagonal system (Thomas algorithm). `diag` has length
/// n, `off` has length n-1 and holds both the sub- and super-diagonal.
pub fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    if rhs.len() != n || off.len() + 1 != n.max(1) {
        return Err(Error::Dimension { expected: n, got: rhs.len() });
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    for i in 0..n {
        let sub = if i > 0 { off[i - 1] } else { 0.0 };
        let denom = diag[i] - sub * if i > 0 { c[i - 1] } else { 0.0 };
        if denom.abs() < 1e-300 {
            return Err(Error::invalid("singular tridiagonal system"));
        }
        if i + 1 < n {
            c[i] = off[i] / denom;
        }
        d[i] = (rhs[i] - sub * if i > 0 { d[i - 1] } else { 0.0 }) / denom;
    }
    for i in (0..n.saturating_sub(1)).rev() {
        d[i] -= c[i] * d[i + 1];
    }
    Ok(d)
}

/// Spectral norm of a symmetric PSD matrix by power iteration.
pub fn spectral_norm_psd(m: &DMatrix<f64>, tol: f64) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    // a dense start vector avoids orthogonality to the top eigenvector in practice
    let mut v = nalgebra::DVector::from_fn(n, |i, _| 1.0 + 0.1 * i as f64);
    v /= v.norm();
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let w = m * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - lambda).abs() <= tol * next.abs().max(1.0) {
            return next.max(norm);
        }
        lambda = next;
    }
    lambda
}

/// Symmetric square root of a PSD matrix. Fails when an eigenvalue is
/// negative beyond round-off.
pub fn psd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Dimension { expected: m.nrows(), got: m.ncols() });
    }
    let asym = (m - m.transpose()).abs().max();
    let scale = m.abs().max().max(1.0);
    if asym > 1e-12 * scale {
        return Err(Error::invalid("covariance is not symmetric"));
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < -1e-12 * scale {
            return Err(Error::invalid(format!("covariance is not PSD (eigenvalue {v:e})")));
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose())
}

/// Extreme eigenvalues of a symmetric matrix.
pub fn eigen_range(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone());
    let lo = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

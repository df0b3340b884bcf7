//! Dense symmetric linear algebra: Jacobi eigendecomposition, PSD matrix
//! square root, and the Bures discrepancy between covariance matrices.
//!
//! Everything here operates on small matrices (feature dimensions, d up to
//! a few hundred), so a cyclic Jacobi sweep is accurate and dependency-free.

use crate::error::{Error, Result};
use ndarray::Array2;

/// Relative off-diagonal Frobenius threshold for Jacobi convergence.
const JACOBI_TOL: f64 = 1e-12;
/// Maximum number of full Jacobi sweeps.
const JACOBI_MAX_SWEEPS: usize = 100;
/// Eigenvalues in [-PSD_CLAMP_TOL, 0) are treated as round-off and clamped.
pub const PSD_CLAMP_TOL: f64 = 1e-8;

/// A symmetric d x d matrix. Construction symmetrizes the input as
/// (M + M^T)/2 and rejects non-finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    entries: Array2<f64>,
}

impl SymMatrix {
    pub fn new(m: Array2<f64>) -> Result<Self> {
        let (r, c) = m.dim();
        if r != c {
            return Err(Error::shape("SymMatrix", format!("{r}x{r}"), format!("{r}x{c}")));
        }
        if r == 0 {
            return Err(Error::shape("SymMatrix", "dim >= 1", "0x0"));
        }
        for ((i, j), &v) in m.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFinite { row: i, col: j, value: v });
            }
        }
        let entries = (&m + &m.t()) * 0.5;
        Ok(SymMatrix { entries })
    }

    /// Diagonal matrix with the given entries.
    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        let d = diag.len();
        let mut m = Array2::zeros((d, d));
        for (i, &v) in diag.iter().enumerate() {
            m[[i, i]] = v;
        }
        SymMatrix::new(m)
    }

    pub fn identity(dim: usize) -> Self {
        SymMatrix { entries: Array2::eye(dim) }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.diag().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Eigendecomposition M = V diag(values) V^T with eigenvalues sorted in
/// descending order and eigenvectors as the columns of `vectors`.
#[derive(Debug, Clone)]
pub struct EigDecomposition {
    pub values: Vec<f64>,
    pub vectors: Array2<f64>,
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Sweeps rotate away each off-diagonal element in turn until the
/// off-diagonal Frobenius norm drops below `JACOBI_TOL * ||M||_F`.
pub fn sym_eig(m: &SymMatrix) -> Result<EigDecomposition> {
    let n = m.dim();
    let mut a = m.entries.clone();
    let mut v: Array2<f64> = Array2::eye(n);
    let norm = m.frobenius_norm().max(f64::MIN_POSITIVE);

    for _sweep in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = {
            let mut s = 0.0;
            for p in 0..n {
                for q in (p + 1)..n {
                    s += 2.0 * a[[p, q]] * a[[p, q]];
                }
            }
            s.sqrt()
        };
        if off <= JACOBI_TOL * norm {
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                // tan of the rotation angle, smaller root for stability
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                let app = a[[p, p]];
                let aqq = a[[q, q]];
                a[[p, p]] = app - t * apq;
                a[[q, q]] = aqq + t * apq;
                a[[p, q]] = 0.0;
                a[[q, p]] = 0.0;
                for k in 0..n {
                    if k == p || k == q {
                        continue;
                    }
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - s * akq;
                    a[[p, k]] = a[[k, p]];
                    a[[k, q]] = s * akp + c * akq;
                    a[[q, k]] = a[[k, q]];
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }

    // sort eigenvalues descending, carrying eigenvector columns along
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[j, j]].partial_cmp(&a[[i, i]]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a[[i, i]]).collect();
    let mut vectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors[[k, dst]] = v[[k, src]];
        }
    }

    Ok(EigDecomposition { values, vectors })
}

/// PSD square root S with S*S = M, via eigendecomposition.
///
/// Eigenvalues in [-1e-8, 0) are clamped to zero; anything below that is a
/// genuinely indefinite input and an error.
pub fn sqrtm_psd(m: &SymMatrix) -> Result<SymMatrix> {
    sqrtm_psd_with_clamp(m).map(|(s, _)| s)
}

/// Same as [`sqrtm_psd`] but also reports the magnitude of the most negative
/// eigenvalue that was clamped (0.0 when none).
pub fn sqrtm_psd_with_clamp(m: &SymMatrix) -> Result<(SymMatrix, f64)> {
    let eig = sym_eig(m)?;
    let min_eig = eig.values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig < -PSD_CLAMP_TOL {
        return Err(Error::NotPsd { min_eigenvalue: min_eig });
    }
    let clamp = (-min_eig).max(0.0);
    let n = m.dim();
    let mut s = Array2::zeros((n, n));
    for k in 0..n {
        let root = eig.values[k].max(0.0).sqrt();
        for i in 0..n {
            let vik = eig.vectors[[i, k]] * root;
            for j in 0..n {
                s[[i, j]] += vik * eig.vectors[[j, k]];
            }
        }
    }
    Ok((SymMatrix::new(s)?, clamp))
}

/// Bures discrepancy B(A, B) = Tr(A) + Tr(B) - 2 Tr(sqrt(sqrt(A) B sqrt(A))).
///
/// The trace of the matrix square root is the sum of square roots of the
/// eigenvalues of sqrt(A) B sqrt(A), so only one explicit square root is
/// needed. Result is clamped at zero.
pub fn bures(a: &SymMatrix, b: &SymMatrix) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::shape("bures", a.dim(), b.dim()));
    }
    let sa = sqrtm_psd(a)?;
    let inner = sa.entries().dot(b.entries()).dot(sa.entries());
    let inner = SymMatrix::new(inner)?;
    let eig = sym_eig(&inner)?;
    let min_eig = eig.values.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_eig < -PSD_CLAMP_TOL * inner.frobenius_norm().max(1.0) {
        return Err(Error::NotPsd { min_eigenvalue: min_eig });
    }
    let cross: f64 = eig.values.iter().map(|&l| l.max(0.0).sqrt()).sum();
    Ok((a.trace() + b.trace() - 2.0 * cross).max(0.0))
}

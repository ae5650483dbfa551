//! Dense symmetric eigendecomposition by cyclic Jacobi rotations.
//!
//! Sized for covariance matrices of a few dozen components. The
//! decomposition is `m = basisᵀ · diag(eigenvalues) · basis`, with the rows
//! of `basis` being the eigenvectors.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::sqrt;

/// Relative tolerance for `|m[i][j] - m[j][i]|` against `max |m|`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Sweeps stop once the off-diagonal Frobenius norm falls below this
/// fraction of `‖m‖_F`.
pub const JACOBI_OFF_DIAGONAL_TOLERANCE: f64 = 1e-14;

pub const JACOBI_MAX_SWEEPS: usize = 100;

/// Dense row-major `dim × dim` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Wraps a row-major buffer. Only the shape is checked here; symmetry
    /// is checked by [`decompose`].
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::DimensionZero);
        }
        if entries.len() != dim * dim {
            return Err(Error::ShapeMismatch {
                dim,
                len: entries.len(),
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let dim = values.len();
        let mut entries = vec![0.0; dim * dim];
        for (i, v) in values.iter().enumerate() {
            entries[i * dim + i] = *v;
        }
        Self::new(dim, entries)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::diagonal(&vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    fn frobenius(&self) -> f64 {
        sqrt(self.entries.iter().map(|v| v * v).sum())
    }

    fn check_symmetric(&self) -> Result<()> {
        let tol = SYMMETRY_TOLERANCE * self.max_abs();
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                let deviation = (self.get(i, j) - self.get(j, i)).abs();
                if !(deviation <= tol) {
                    return Err(Error::NotSymmetric {
                        row: i,
                        col: j,
                        deviation,
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    /// Sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Row-major, one eigenvector per row, `eigenvalues.len() × dim`.
    pub basis: Vec<f64>,
    /// Ambient dimension (length of each eigenvector).
    pub dim: usize,
}

impl EigenDecomposition {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn basis_row(&self, k: usize) -> &[f64] {
        &self.basis[k * self.dim..(k + 1) * self.dim]
    }

    /// `basisᵀ · diag(eigenvalues) · basis` as a row-major buffer.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n * n];
        for (k, lam) in self.eigenvalues.iter().enumerate() {
            let row = self.basis_row(k);
            for i in 0..n {
                let li = lam * row[i];
                for j in 0..n {
                    out[i * n + j] += li * row[j];
                }
            }
        }
        out
    }
}

/// Eigendecomposition of a symmetric matrix.
pub fn decompose(m: &SymMatrix) -> Result<EigenDecomposition> {
    m.check_symmetric()?;
    let n = m.dim;
    let mut a = m.entries.clone();
    // symmetrize exactly so rotations act on a truly symmetric matrix
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = avg;
            a[j * n + i] = avg;
        }
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let threshold = JACOBI_OFF_DIAGONAL_TOLERANCE * m.frobenius();

    let off_norm = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        sqrt(s)
    };

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_norm(&a) <= threshold {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let t = 1.0 / (theta.abs() + sqrt(theta * theta + 1.0));
                    if theta < 0.0 {
                        -t
                    } else {
                        t
                    }
                };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                a[p * n + p] = app - t * apq;
                a[q * n + q] = aqq + t * apq;
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = a[r * n + p];
                        let arq = a[r * n + q];
                        let new_rp = c * arp - s * arq;
                        let new_rq = s * arp + c * arq;
                        a[r * n + p] = new_rp;
                        a[p * n + r] = new_rp;
                        a[r * n + q] = new_rq;
                        a[q * n + r] = new_rq;
                    }
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = c * vrp - s * vrq;
                    v[r * n + q] = s * vrp + c * vrq;
                }
            }
        }
    }
    if !converged {
        let residual = off_norm(&a);
        if residual > threshold {
            return Err(Error::ConvergenceFailure {
                stage: "jacobi eigensolver",
                iterations: JACOBI_MAX_SWEEPS,
                residual,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let eigenvalues = order.iter().map(|&k| a[k * n + k]).collect();
    let mut basis = Vec::with_capacity(n * n);
    for &k in &order {
        // column k of v is the k-th eigenvector
        basis.extend((0..n).map(|r| v[r * n + k]));
    }
    Ok(EigenDecomposition {
        eigenvalues,
        basis,
        dim: n,
    })
}

/// Drops components whose eigenvalue is at most `tol`.
///
/// Eigenvalues in `[-tol, 0)` are treated as zero; anything below `-tol`
/// is rejected as [`Error::NotPsd`].
pub fn strip_null_components(e: &EigenDecomposition, tol: f64) -> Result<EigenDecomposition> {
    if !(tol >= 0.0) {
        return Err(Error::DomainError("null tolerance must be nonnegative"));
    }
    if let Some(&neg) = e.eigenvalues.iter().find(|&&l| l < -tol) {
        return Err(Error::NotPsd {
            eigenvalue: neg,
            tolerance: tol,
        });
    }
    let mut eigenvalues = Vec::new();
    let mut basis = Vec::new();
    for (k, &lam) in e.eigenvalues.iter().enumerate() {
        if lam > tol {
            eigenvalues.push(lam);
            basis.extend_from_slice(e.basis_row(k));
        }
    }
    if eigenvalues.is_empty() {
        return Err(Error::AllComponentsNull);
    }
    Ok(EigenDecomposition {
        eigenvalues,
        basis,
        dim: e.dim,
    })
}

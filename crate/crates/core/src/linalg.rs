//! Dense complex-matrix kernels: Hermitian eigendecomposition, spectral
//! functions restricted to the support, Kronecker products and partial traces.
//!
//! Eigenvalues at or below `ZERO_THRESHOLD * max_eigenvalue` are treated as
//! exactly zero everywhere in the crate. Logarithms are natural.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

/// Relative eigenvalue cut-off below which an eigenvalue belongs to the kernel.
pub const ZERO_THRESHOLD: f64 = 1e-12;
/// Entrywise tolerance on `H - H†` for inputs claimed to be Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-9;
/// Most negative eigenvalue accepted for a positive semidefinite input.
pub const PSD_TOL: f64 = 1e-10;

/// Spectral decomposition `H = V diag(w) V†` with `w` sorted descending.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: ComplexMatrix,
}

impl HermitianEig {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Largest eigenvalue, or 0 for an empty spectrum.
    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Absolute cut-off for this spectrum.
    pub fn kernel_threshold(&self) -> f64 {
        ZERO_THRESHOLD * self.max_eigenvalue()
    }

    /// Whether eigenvalue `i` lies in the support (strictly above the cut-off).
    pub fn in_support(&self, i: usize) -> bool {
        let w = self.eigenvalues[i];
        w > 0.0 && w > self.kernel_threshold()
    }

    pub fn rank(&self) -> usize {
        (0..self.dim()).filter(|&i| self.in_support(i)).count()
    }

    pub fn vector(&self, i: usize) -> ComplexVector {
        self.eigenvectors.column(i).into_owned()
    }

    /// `V diag(f(w_i, in_support_i)) V†`.
    pub fn map_spectrum<F>(&self, f: F) -> ComplexMatrix
    where
        F: Fn(f64, bool) -> f64,
    {
        let n = self.dim();
        let mut scaled = self.eigenvectors.clone();
        for j in 0..n {
            let fj = f(self.eigenvalues[j], self.in_support(j));
            scaled.column_mut(j).scale_mut(fj);
        }
        scaled * self.eigenvectors.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.map_spectrum(|w, _| w)
    }
}

pub fn check_square(m: &ComplexMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

/// Largest entrywise modulus of `m - m†`.
pub fn hermitian_deviation(m: &ComplexMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(m + m†) / 2`.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    m.diagonal().iter().sum()
}

pub fn max_abs(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Rank-one operator `|v⟩⟨v|`.
pub fn outer(v: &ComplexVector) -> ComplexMatrix {
    v * v.adjoint()
}

pub fn real_diagonal(values: &[f64]) -> ComplexMatrix {
    DMatrix::from_diagonal(&DVector::from_iterator(
        values.len(),
        values.iter().map(|&x| Complex64::new(x, 0.0)),
    ))
}

pub fn identity(dim: usize) -> ComplexMatrix {
    DMatrix::identity(dim, dim)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.
///
/// The input is symmetrized before decomposition; ties keep the order the
/// underlying solver produced.
pub fn eig_hermitian(h: &ComplexMatrix) -> Result<HermitianEig> {
    let n = check_square(h)?;
    let dev = hermitian_deviation(h);
    if !(dev <= HERMITIAN_TOL) {
        return Err(Error::NotHermitian(dev));
    }
    if n == 0 {
        return Ok(HermitianEig {
            eigenvalues: DVector::zeros(0),
            eigenvectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = hermitian_part(h).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(HermitianEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Eigendecomposition that additionally rejects eigenvalues below `-PSD_TOL`.
pub fn eig_psd(a: &ComplexMatrix) -> Result<HermitianEig> {
    let eig = eig_hermitian(a)?;
    if eig.dim() > 0 && eig.min_eigenvalue() < -PSD_TOL {
        return Err(Error::NotPsd(eig.min_eigenvalue()));
    }
    Ok(eig)
}

/// `log A` on the support of `A`, zero on its kernel.
pub fn matrix_log_support(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = eig_psd(a)?;
    Ok(eig.map_spectrum(|w, supp| if supp { w.ln() } else { 0.0 }))
}

/// Principal square root of a PSD matrix; kernel eigenvalues map to 0.
pub fn matrix_sqrt_psd(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = eig_psd(a)?;
    Ok(eig.map_spectrum(|w, supp| if supp { w.sqrt() } else { 0.0 }))
}

/// Orthonormalizes the columns of a full-column-rank matrix (QR with the
/// diagonal of `R` made positive, so a unitary input is returned unchanged).
pub fn orthonormalize_columns(g: ComplexMatrix) -> ComplexMatrix {
    let cols = g.ncols();
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..cols {
        let d = r[(j, j)];
        let n = d.norm();
        if n > 0.0 {
            let phase = d / n;
            for i in 0..q.nrows() {
                q[(i, j)] *= phase;
            }
        }
    }
    q
}

/// Kronecker product `A ⊗ B`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Which tensor factor a partial trace removes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    First,
    Second,
}

/// Partial trace of an operator on `C^{d_a} ⊗ C^{d_b}` over `which`.
pub fn partial_trace(m: &ComplexMatrix, which: Factor, dims: (usize, usize)) -> Result<ComplexMatrix> {
    let n = check_square(m)?;
    let (da, db) = dims;
    if da * db != n {
        return Err(Error::DimensionMismatch(format!(
            "factor dimensions {da}x{db} do not match operator dimension {n}"
        )));
    }
    let out = match which {
        Factor::Second => DMatrix::from_fn(da, da, |a, a2| {
            (0..db).map(|b| m[(a * db + b, a2 * db + b)]).sum()
        }),
        Factor::First => DMatrix::from_fn(db, db, |b, b2| {
            (0..da).map(|a| m[(a * db + b, a * db + b2)]).sum()
        }),
    };
    Ok(out)
}

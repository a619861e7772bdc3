//! Density matrices and entropy functionals: von Neumann entropy, Umegaki
//! relative entropy with its support condition, the unnormalized
//! positive-operator variant, and the Bogoliubov trace bound.

use std::fmt;
use std::ops::Add;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{
    self, check_square, eig_psd, hermitian_deviation, hermitian_part, outer, ComplexMatrix,
    ComplexVector, HermitianEig, HERMITIAN_TOL,
};

/// Allowed deviation of a state's trace from 1.
pub const TRACE_TOL: f64 = 1e-9;
/// Squared overlap of a support eigenvector with the other operator's kernel
/// above which the support inclusion is considered violated.
pub const SUPPORT_OVERLAP_TOL: f64 = 1e-9;
/// Negative relative entropies above `-NEGATIVE_CLAMP` are reported as 0.
pub const NEGATIVE_CLAMP: f64 = 1e-9;

/// Hermitian, positive semidefinite, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    /// Validates and stores the Hermitian part of `matrix`.
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        check_square(&matrix)?;
        if matrix.nrows() == 0 {
            return Err(Error::DimensionMismatch("empty matrix".into()));
        }
        let dev = hermitian_deviation(&matrix);
        if !(dev <= HERMITIAN_TOL) {
            return Err(Error::NotHermitian(dev));
        }
        let tr = linalg::trace(&matrix);
        if !((tr.re - 1.0).abs() <= TRACE_TOL && tr.im.abs() <= TRACE_TOL) {
            return Err(Error::InvalidTrace(tr.re));
        }
        let matrix = hermitian_part(&matrix);
        eig_psd(&matrix)?;
        Ok(Self { matrix })
    }

    /// Skips validation; used for outputs of maps that preserve states exactly.
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        Self {
            matrix: hermitian_part(&matrix),
        }
    }

    pub fn from_diagonal(probabilities: &[f64]) -> Result<Self> {
        check_probability_vector(probabilities)?;
        Self::new(linalg::real_diagonal(probabilities))
    }

    /// `|ψ⟩⟨ψ|` for the normalized vector `ψ / ‖ψ‖`.
    pub fn from_pure(psi: &ComplexVector) -> Result<Self> {
        let n = psi.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidTrace(0.0));
        }
        Ok(Self::from_trusted(outer(&psi.unscale(n))))
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self::from_trusted(linalg::identity(dim).unscale(dim as f64))
    }

    pub fn basis_state(dim: usize, index: usize) -> Self {
        let mut m = DMatrix::zeros(dim, dim);
        m[(index, index)] = Complex64::new(1.0, 0.0);
        Self { matrix: m }
    }

    /// Convex combination `Σ w_k ρ_k`.
    pub fn mixture(weights: &[f64], states: &[DensityMatrix]) -> Result<Self> {
        if weights.len() != states.len() || states.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} states",
                weights.len(),
                states.len()
            )));
        }
        check_probability_vector(weights)?;
        let dim = states[0].dim();
        let mut acc = DMatrix::zeros(dim, dim);
        for (w, s) in weights.iter().zip(states) {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "state of dimension {} in a mixture of dimension {dim}",
                    s.dim()
                )));
            }
            acc += s.matrix.scale(*w);
        }
        Ok(Self::from_trusted(acc))
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn eig(&self) -> HermitianEig {
        linalg::eig_hermitian(&self.matrix).expect("density matrices are Hermitian")
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.matrix[(i, j)].norm() <= tol))
    }
}

pub fn check_probability_vector(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidProbabilities("empty vector".into()));
    }
    if let Some(x) = p.iter().find(|x| !(**x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidProbabilities(format!("entry {x} is not a probability")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > TRACE_TOL {
        return Err(Error::InvalidProbabilities(format!("weights must sum to 1 (sum is {s})")));
    }
    Ok(())
}

/// A real number or `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            ExtendedReal::Infinite => None,
        }
    }

    /// Maps `Infinite` to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }

    pub fn scale(self, c: f64) -> ExtendedReal {
        match self {
            ExtendedReal::Finite(x) => ExtendedReal::Finite(c * x),
            ExtendedReal::Infinite => ExtendedReal::Infinite,
        }
    }
}

impl From<f64> for ExtendedReal {
    fn from(x: f64) -> Self {
        if x == f64::INFINITY {
            ExtendedReal::Infinite
        } else {
            ExtendedReal::Finite(x)
        }
    }
}

impl Add for ExtendedReal {
    type Output = ExtendedReal;

    fn add(self, rhs: ExtendedReal) -> ExtendedReal {
        match (self, rhs) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => ExtendedReal::Finite(a + b),
            _ => ExtendedReal::Infinite,
        }
    }
}

impl fmt::Display for ExtendedReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtendedReal::Finite(x) => write!(f, "{x}"),
            ExtendedReal::Infinite => write!(f, "inf"),
        }
    }
}

/// `-Σ w ln w` over a spectrum, with `0 ln 0 = 0`.
fn spectral_entropy(eig: &HermitianEig) -> f64 {
    (0..eig.dim())
        .filter(|&i| eig.in_support(i))
        .map(|i| {
            let w = eig.eigenvalues[i];
            -w * w.ln()
        })
        .sum()
}

/// von Neumann entropy `-tr ρ ln ρ` in nats, in `[0, ln d]`.
pub fn von_neumann_entropy(rho: &DensityMatrix) -> f64 {
    let s = spectral_entropy(&rho.eig());
    s.clamp(0.0, (rho.dim() as f64).ln())
}

/// Shannon entropy in nats of a nonnegative vector (not renormalized).
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

/// `tr A (log A − log B)` for PSD operators, `+∞` when the support of `A`
/// is not contained in the support of `B`.
///
/// Traces need not be 1. The logarithm of `B` is taken on its support only;
/// support inclusion is decided by the squared overlap of each support
/// eigenvector of `A` with the kernel of `B`.
pub fn relative_entropy_positive(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<ExtendedReal> {
    let n = check_square(a)?;
    if check_square(b)? != n {
        return Err(Error::DimensionMismatch(format!(
            "relative entropy of {n}x{n} against {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    let ea = eig_psd(a)?;
    let eb = eig_psd(b)?;
    Ok(relative_entropy_from_eigs(&ea, &eb))
}

pub(crate) fn relative_entropy_from_eigs(ea: &HermitianEig, eb: &HermitianEig) -> ExtendedReal {
    let n = ea.dim();
    let kernel_b: Vec<usize> = (0..n).filter(|&j| !eb.in_support(j)).collect();
    let support_a: Vec<usize> = (0..n).filter(|&i| ea.in_support(i)).collect();
    if !kernel_b.is_empty() {
        // overlaps[j][i] = <b_j | a_i>
        let overlaps = eb.eigenvectors.adjoint() * &ea.eigenvectors;
        for &i in &support_a {
            let leak: f64 = kernel_b.iter().map(|&j| overlaps[(j, i)].norm_sqr()).sum();
            if leak > SUPPORT_OVERLAP_TOL {
                return ExtendedReal::Infinite;
            }
        }
    }
    let log_b = eb.map_spectrum(|w, supp| if supp { w.ln() } else { 0.0 });
    let mut value = 0.0;
    for &i in &support_a {
        let w = ea.eigenvalues[i];
        let v = ea.eigenvectors.column(i);
        let expect = (v.adjoint() * &log_b * v)[(0, 0)].re;
        value += w * (w.ln() - expect);
    }
    ExtendedReal::Finite(value)
}

/// Umegaki relative entropy `S(ρ, σ) = tr ρ (log ρ − log σ)` in nats.
pub fn relative_entropy(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<ExtendedReal> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(format!(
            "states of dimension {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    Ok(clamp_small_negative(relative_entropy_from_eigs(
        &rho.eig(),
        &sigma.eig(),
    )))
}

pub(crate) fn clamp_small_negative(v: ExtendedReal) -> ExtendedReal {
    match v {
        ExtendedReal::Finite(x) if x < 0.0 && x > -NEGATIVE_CLAMP => ExtendedReal::Finite(0.0),
        other => other,
    }
}

/// `tr A (ln tr A − ln tr B)`, the scalar lower bound on `S(A, B)`.
pub fn bogoliubov_bound(a: &ComplexMatrix, b: &ComplexMatrix) -> Result<f64> {
    let ta = linalg::trace(a).re;
    let tb = linalg::trace(b).re;
    if !(ta > 0.0) || !(tb > 0.0) {
        return Err(Error::ParameterOutOfRange(format!(
            "Bogoliubov bound needs positive traces (got {ta} and {tb})"
        )));
    }
    Ok(ta * (ta.ln() - tb.ln()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::real_diagonal;
    use crate::random::{random_channel, random_density, random_density_of_rank};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(p: &[f64]) -> DensityMatrix {
        DensityMatrix::from_diagonal(p).unwrap()
    }

    #[test]
    fn density_matrix_validation() {
        assert!(matches!(
            DensityMatrix::new(real_diagonal(&[0.5, 0.4])),
            Err(Error::InvalidTrace(_))
        ));
        assert!(matches!(
            DensityMatrix::new(real_diagonal(&[1.5, -0.5])),
            Err(Error::NotPsd(_))
        ));
        let mut m = real_diagonal(&[0.5, 0.5]);
        m[(0, 1)] = Complex64::new(0.1, 0.0);
        assert!(matches!(DensityMatrix::new(m), Err(Error::NotHermitian(_))));
        assert!(DensityMatrix::from_diagonal(&[0.6, 0.5]).is_err());
    }

    #[test]
    fn entropy_examples() {
        assert!(von_neumann_entropy(&diag(&[1.0, 0.0])).abs() < 1e-15);
        for d in 2..6 {
            let s = von_neumann_entropy(&DensityMatrix::maximally_mixed(d));
            assert!((s - (d as f64).ln()).abs() < 1e-12);
        }
        let expect = -0.75f64 * 0.75f64.ln() - 0.25 * 0.25f64.ln();
        assert!((von_neumann_entropy(&diag(&[0.75, 0.25])) - expect).abs() < 1e-14);
        assert!((expect - 0.5623).abs() < 1e-4);
    }

    #[test]
    fn relative_entropy_examples() {
        let inf = relative_entropy(&diag(&[1.0, 0.0]), &diag(&[0.0, 1.0])).unwrap();
        assert_eq!(inf, ExtendedReal::Infinite);

        let v = relative_entropy(&diag(&[0.5, 0.5]), &diag(&[0.75, 0.25])).unwrap();
        let expect = 0.5 * (0.5f64 / 0.75).ln() + 0.5 * (0.5f64 / 0.25).ln();
        assert!((v.to_f64() - expect).abs() < 1e-14);
        assert!((expect - 0.1438).abs() < 1e-4);

        // support inside support: finite
        let v = relative_entropy(&diag(&[1.0, 0.0]), &diag(&[0.5, 0.5])).unwrap();
        assert!((v.to_f64() - 2f64.ln()).abs() < 1e-14);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let r = random_density(3, &mut rng);
            assert!(relative_entropy(&r, &r).unwrap().to_f64().abs() < 1e-10);
        }
        assert!(relative_entropy(&diag(&[1.0, 0.0]), &diag(&[1.0, 0.0, 0.0])).is_err());
    }

    #[test]
    fn relative_entropy_rank_deficient_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            // σ of rank 2 in dimension 3; ρ built inside σ's support stays finite
            let sigma = random_density_of_rank(3, 2, &mut rng);
            let e = sigma.eig();
            let inside = DensityMatrix::from_pure(&(e.vector(0) + e.vector(1).scale(0.3))).unwrap();
            assert!(relative_entropy(&inside, &sigma).unwrap().is_finite());
            let outside = DensityMatrix::from_pure(&(e.vector(0) + e.vector(2).scale(0.3))).unwrap();
            assert_eq!(relative_entropy(&outside, &sigma).unwrap(), ExtendedReal::Infinite);
        }
    }

    #[test]
    fn positive_operator_examples() {
        let a = real_diagonal(&[0.5, 0.0]);
        let b = real_diagonal(&[0.25, 0.25]);
        let v = relative_entropy_positive(&a, &b).unwrap().to_f64();
        assert!((v - 0.5 * (0.5f64.ln() - 0.25f64.ln())).abs() < 1e-14);
        assert!(relative_entropy_positive(&a, &a).unwrap().to_f64().abs() < 1e-15);

        let rho = [0.5, 0.5];
        let sigma = [0.75, 0.25];
        let a2 = real_diagonal(&[1.0, 1.0]);
        let b2 = real_diagonal(&[1.5, 0.5]);
        let scaled = relative_entropy_positive(&a2, &b2).unwrap().to_f64();
        let base = relative_entropy(&diag(&rho), &diag(&sigma)).unwrap().to_f64();
        assert!((scaled - 2.0 * base).abs() < 1e-14);
        assert!(matches!(
            relative_entropy_positive(&real_diagonal(&[1.0, -1.0]), &b),
            Err(Error::NotPsd(_))
        ));
    }

    #[test]
    fn bogoliubov_examples() {
        let a = real_diagonal(&[0.3, 0.7]);
        assert!(bogoliubov_bound(&a, &real_diagonal(&[0.9, 0.1])).unwrap().abs() < 1e-15);
        let v = bogoliubov_bound(&a, &real_diagonal(&[0.25, 0.25])).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-14);
        assert!(bogoliubov_bound(&real_diagonal(&[0.0, 0.0]), &a).is_err());
    }

    #[test]
    fn extended_real_order_and_sum() {
        assert!(ExtendedReal::Finite(1e300) < ExtendedReal::Infinite);
        assert_eq!(ExtendedReal::Finite(1.0) + ExtendedReal::Infinite, ExtendedReal::Infinite);
        assert_eq!(ExtendedReal::from(f64::INFINITY), ExtendedReal::Infinite);
        assert_eq!(ExtendedReal::Infinite.to_string(), "inf");
    }

    proptest! {
        #[test]
        fn entropy_in_range(seed in any::<u64>(), d in 2usize..5, rank in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density_of_rank(d, rank.min(d), &mut rng);
            let s = von_neumann_entropy(&rho);
            prop_assert!(s >= 0.0 && s <= (d as f64).ln());
        }

        #[test]
        fn relative_entropy_nonnegative_and_positive_off_diagonal(seed in any::<u64>(), d in 2usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density(d, &mut rng);
            let sigma = random_density(d, &mut rng);
            let v = relative_entropy(&rho, &sigma).unwrap().to_f64();
            prop_assert!(v >= -1e-9);
            // distinct random states are far apart, so the divergence is clearly positive
            prop_assert!((rho.matrix() - sigma.matrix()).norm() > 1e-8);
            prop_assert!(v > 1e-9);
        }

        #[test]
        fn joint_scaling(seed in any::<u64>(), c in 0.01f64..10.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_density(3, &mut rng).into_matrix().scale(1.7);
            let b = random_density(3, &mut rng).into_matrix().scale(0.4);
            let base = relative_entropy_positive(&a, &b).unwrap().to_f64();
            let scaled = relative_entropy_positive(&a.scale(c), &b.scale(c)).unwrap().to_f64();
            prop_assert!((scaled - c * base).abs() <= 1e-9 * (1.0 + (c * base).abs()));
        }

        #[test]
        fn bogoliubov_holds(seed in any::<u64>(), ca in 0.01f64..5.0, cb in 0.01f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_density_of_rank(3, 2, &mut rng).into_matrix().scale(ca);
            let b = random_density(3, &mut rng).into_matrix().scale(cb);
            let s = relative_entropy_positive(&a, &b).unwrap().to_f64();
            prop_assert!(s >= bogoliubov_bound(&a, &b).unwrap() - 1e-9);
        }

        #[test]
        fn monotone_under_channels(seed in any::<u64>(), k in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let rho = random_density(2, &mut rng);
            let sigma = random_density(2, &mut rng);
            let ch = random_channel(2, 3, k.max(1), &mut rng);
            let before = relative_entropy(&rho, &sigma).unwrap().to_f64();
            let after = relative_entropy(&ch.apply(&rho).unwrap(), &ch.apply(&sigma).unwrap()).unwrap().to_f64();
            prop_assert!(after <= before + 1e-9);
        }
    }
}

//! Completely positive trace-preserving maps in Kraus form, projective
//! measurements, classical stochastic channels, and a small library of
//! standard qubit channels.
//!
//! Standard Kraus sets:
//!
//! | channel | Kraus operators |
//! |---------|-----------------|
//! | `identity(d)` | `I` |
//! | `depolarizing(p, d)` | `√(1 − p + p/d²) I`, `√(p/d²) XᵃZᵇ` for `(a, b) ≠ (0, 0)` (Weyl operators) |
//! | `amplitude_damping(γ)` | `diag(1, √(1−γ))`, `√γ |0⟩⟨1|` |
//! | `phase_damping(λ)` | `diag(1, √(1−λ))`, `diag(0, √λ)` |
//! | `unitary(U)` | `U` |
//!
//! `depolarizing(p, d)` acts as `ρ ↦ (1 − p) ρ + p tr(ρ) I/d`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::entropy::DensityMatrix;
use crate::error::{Error, Result};
use crate::linalg::{self, check_square, eig_hermitian, identity, max_abs, ComplexMatrix, PSD_TOL};

/// Tolerance on `Σ K†K − I` and on PVM identities.
pub const CHANNEL_TOL: f64 = 1e-9;

/// CPTP map `ρ ↦ Σ_i K_i ρ K_i†`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumChannel {
    kraus: Vec<ComplexMatrix>,
    dim_in: usize,
    dim_out: usize,
}

impl QuantumChannel {
    /// Validates shapes, trace preservation and complete positivity.
    pub fn new(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let channel = Self::from_kraus_unchecked(kraus)?;
        let residual = channel.trace_preservation_residual();
        if !(residual <= CHANNEL_TOL) {
            return Err(Error::NotTracePreserving(residual));
        }
        let min_choi = channel.min_choi_eigenvalue();
        if min_choi < -PSD_TOL {
            return Err(Error::NotCompletelyPositive(min_choi));
        }
        Ok(channel)
    }

    fn from_kraus_unchecked(kraus: Vec<ComplexMatrix>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::Empty("channel needs at least one Kraus operator".into()))?;
        let (dim_out, dim_in) = first.shape();
        if dim_in == 0 || dim_out == 0 {
            return Err(Error::DimensionMismatch("zero-dimensional Kraus operator".into()));
        }
        if let Some(k) = kraus.iter().find(|k| k.shape() != (dim_out, dim_in)) {
            return Err(Error::DimensionMismatch(format!(
                "Kraus operator of shape {:?} in a {dim_out}x{dim_in} channel",
                k.shape()
            )));
        }
        Ok(Self {
            kraus,
            dim_in,
            dim_out,
        })
    }

    /// Frobenius norm of `Σ K†K − I`.
    pub fn trace_preservation_residual(&self) -> f64 {
        let sum = self
            .kraus
            .iter()
            .fold(DMatrix::zeros(self.dim_in, self.dim_in), |acc, k| acc + k.adjoint() * k);
        (sum - identity(self.dim_in)).norm()
    }

    pub fn min_choi_eigenvalue(&self) -> f64 {
        eig_hermitian(&self.choi_matrix())
            .map(|e| e.min_eigenvalue())
            .unwrap_or(f64::NEG_INFINITY)
    }

    pub fn kraus(&self) -> &[ComplexMatrix] {
        &self.kraus
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    /// `Σ K X K†` for any operator `X` on the input space.
    pub fn apply_operator(&self, x: &ComplexMatrix) -> Result<ComplexMatrix> {
        let n = check_square(x)?;
        if n != self.dim_in {
            return Err(Error::DimensionMismatch(format!(
                "operator of dimension {n} into a channel with input dimension {}",
                self.dim_in
            )));
        }
        Ok(self
            .kraus
            .iter()
            .fold(DMatrix::zeros(self.dim_out, self.dim_out), |acc, k| {
                acc + k * x * k.adjoint()
            }))
    }

    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        Ok(DensityMatrix::from_trusted(self.apply_operator(rho.matrix())?))
    }

    /// `Σ_ij Λ(|i⟩⟨j|) ⊗ |i⟩⟨j|` on `H_out ⊗ H_in`.
    pub fn choi_matrix(&self) -> ComplexMatrix {
        let (din, dout) = (self.dim_in, self.dim_out);
        let mut choi = DMatrix::zeros(dout * din, dout * din);
        for i in 0..din {
            for j in 0..din {
                let mut unit = DMatrix::zeros(din, din);
                unit[(i, j)] = Complex64::new(1.0, 0.0);
                let image = self.apply_operator(&unit).expect("input dimension matches");
                choi += linalg::tensor(&image, &unit);
            }
        }
        choi
    }
}

/// `second ∘ first`: apply `first`, then `second`.
pub fn compose(first: &QuantumChannel, second: &QuantumChannel) -> Result<QuantumChannel> {
    if first.dim_out != second.dim_in {
        return Err(Error::DimensionMismatch(format!(
            "cannot feed a {}-dimensional output into a {}-dimensional input",
            first.dim_out, second.dim_in
        )));
    }
    let kraus = second
        .kraus
        .iter()
        .flat_map(|k2| first.kraus.iter().map(move |k1| k2 * k1))
        .collect();
    Ok(QuantumChannel {
        kraus,
        dim_in: first.dim_in,
        dim_out: second.dim_out,
    })
}

/// Complete set of mutually orthogonal Hermitian projectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveMeasurement {
    projectors: Vec<ComplexMatrix>,
}

impl ProjectiveMeasurement {
    pub fn new(projectors: Vec<ComplexMatrix>) -> Result<Self> {
        let first = projectors
            .first()
            .ok_or_else(|| Error::InvalidMeasurement("no projectors".into()))?;
        let d = check_square(first)?;
        let mut total = DMatrix::zeros(d, d);
        for (i, p) in projectors.iter().enumerate() {
            if p.shape() != (d, d) {
                return Err(Error::InvalidMeasurement(format!("projector {i} has the wrong shape")));
            }
            let herm = linalg::hermitian_deviation(p);
            if herm > CHANNEL_TOL {
                return Err(Error::InvalidMeasurement(format!(
                    "projector {i} is not Hermitian (deviation {herm:e})"
                )));
            }
            let idem = max_abs(&(p * p - p));
            if idem > CHANNEL_TOL {
                return Err(Error::InvalidMeasurement(format!(
                    "projector {i} is not idempotent (deviation {idem:e})"
                )));
            }
            for (j, q) in projectors.iter().enumerate().skip(i + 1) {
                let overlap = max_abs(&(p * q));
                if overlap > CHANNEL_TOL {
                    return Err(Error::InvalidMeasurement(format!(
                        "projectors {i} and {j} are not orthogonal (overlap {overlap:e})"
                    )));
                }
            }
            total += p;
        }
        let completeness = max_abs(&(total - identity(d)));
        if completeness > CHANNEL_TOL {
            return Err(Error::InvalidMeasurement(format!(
                "projectors do not sum to the identity (deviation {completeness:e})"
            )));
        }
        Ok(Self { projectors })
    }

    /// Rank-one projectors onto the columns of a unitary.
    pub fn from_basis(basis: &ComplexMatrix) -> Result<Self> {
        check_square(basis)?;
        let projectors = (0..basis.ncols())
            .map(|j| linalg::outer(&basis.column(j).into_owned()))
            .collect();
        Self::new(projectors)
    }

    pub fn computational(dim: usize) -> Self {
        Self::from_basis(&identity(dim)).expect("standard basis")
    }

    /// The one-outcome measurement `{I}`.
    pub fn trivial(dim: usize) -> Self {
        Self {
            projectors: vec![identity(dim)],
        }
    }

    pub fn projectors(&self) -> &[ComplexMatrix] {
        &self.projectors
    }

    pub fn outcomes(&self) -> usize {
        self.projectors.len()
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].nrows()
    }

    /// `tr(X E_i)` for every outcome, real part.
    pub fn outcome_weights(&self, x: &ComplexMatrix) -> Vec<f64> {
        self.projectors
            .iter()
            .map(|p| (x * p).trace().re)
            .collect()
    }
}

/// `σ ↦ Σ_i E_i σ E_i`.
pub fn measurement_channel(measurement: &ProjectiveMeasurement) -> QuantumChannel {
    let d = measurement.dim();
    QuantumChannel {
        kraus: measurement.projectors.clone(),
        dim_in: d,
        dim_out: d,
    }
}

/// Column-stochastic matrix `C[(j, i)] = P(output j | input i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalChannel {
    matrix: DMatrix<f64>,
}

impl ClassicalChannel {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::NotStochastic("empty matrix".into()));
        }
        for (i, col) in matrix.column_iter().enumerate() {
            if col.iter().any(|x| !(*x >= 0.0)) {
                return Err(Error::NotStochastic(format!("column {i} has a negative entry")));
            }
            let s: f64 = col.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::NotStochastic(format!("column {i} sums to {s}")));
            }
        }
        Ok(Self { matrix })
    }

    pub fn binary_symmetric(flip: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&flip) {
            return Err(Error::ParameterOutOfRange(format!("flip probability {flip}")));
        }
        Self::new(DMatrix::from_row_slice(2, 2, &[1.0 - flip, flip, flip, 1.0 - flip]))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn inputs(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Quantum channel acting as `C` on diagonal states, Kraus set `{√C_ji |j⟩⟨i|}`.
pub fn classical_embedding(c: &ClassicalChannel) -> QuantumChannel {
    let (dout, din) = c.matrix.shape();
    let mut kraus = Vec::new();
    for i in 0..din {
        for j in 0..dout {
            let p = c.matrix[(j, i)];
            if p > 0.0 {
                let mut k = DMatrix::zeros(dout, din);
                k[(j, i)] = Complex64::new(p.sqrt(), 0.0);
                kraus.push(k);
            }
        }
    }
    QuantumChannel {
        kraus,
        dim_in: din,
        dim_out: dout,
    }
}

/// Named channel families used as fixtures and in scenarios.
#[derive(Debug, Clone, PartialEq)]
pub enum StandardChannel {
    Identity { dim: usize },
    Depolarizing { p: f64, dim: usize },
    AmplitudeDamping { gamma: f64 },
    PhaseDamping { lambda: f64 },
    Unitary(ComplexMatrix),
}

impl StandardChannel {
    pub fn build(&self) -> Result<QuantumChannel> {
        match self {
            StandardChannel::Identity { dim } => identity_channel(*dim),
            StandardChannel::Depolarizing { p, dim } => depolarizing(*p, *dim),
            StandardChannel::AmplitudeDamping { gamma } => amplitude_damping(*gamma),
            StandardChannel::PhaseDamping { lambda } => phase_damping(*lambda),
            StandardChannel::Unitary(u) => unitary_channel(u),
        }
    }
}

fn check_unit_interval(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::ParameterOutOfRange(format!("{name} = {x} is outside [0, 1]")));
    }
    Ok(())
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity_channel(dim: usize) -> Result<QuantumChannel> {
    if dim == 0 {
        return Err(Error::ParameterOutOfRange("dimension 0".into()));
    }
    QuantumChannel::from_kraus_unchecked(vec![identity(dim)])
}

/// Weyl operator `X^a Z^b` on `C^d`.
fn weyl(dim: usize, a: usize, b: usize) -> ComplexMatrix {
    let omega = 2.0 * PI / dim as f64;
    DMatrix::from_fn(dim, dim, |row, col| {
        if row == (col + a) % dim {
            Complex64::from_polar(1.0, omega * (b * col) as f64)
        } else {
            c(0.0)
        }
    })
}

pub fn depolarizing(p: f64, dim: usize) -> Result<QuantumChannel> {
    check_unit_interval("p", p)?;
    if dim == 0 {
        return Err(Error::ParameterOutOfRange("dimension 0".into()));
    }
    let d2 = (dim * dim) as f64;
    let mut kraus = vec![identity(dim).scale((1.0 - p + p / d2).sqrt())];
    if p > 0.0 {
        let w = (p / d2).sqrt();
        for a in 0..dim {
            for b in 0..dim {
                if (a, b) != (0, 0) {
                    kraus.push(weyl(dim, a, b).scale(w));
                }
            }
        }
    }
    QuantumChannel::new(kraus)
}

pub fn amplitude_damping(gamma: f64) -> Result<QuantumChannel> {
    check_unit_interval("gamma", gamma)?;
    let k0 = DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c((1.0 - gamma).sqrt())]);
    let k1 = DMatrix::from_row_slice(2, 2, &[c(0.0), c(gamma.sqrt()), c(0.0), c(0.0)]);
    QuantumChannel::new(vec![k0, k1])
}

pub fn phase_damping(lambda: f64) -> Result<QuantumChannel> {
    check_unit_interval("lambda", lambda)?;
    let k0 = DMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c((1.0 - lambda).sqrt())]);
    let k1 = DMatrix::from_row_slice(2, 2, &[c(0.0), c(0.0), c(0.0), c(lambda.sqrt())]);
    QuantumChannel::new(vec![k0, k1])
}

pub fn unitary_channel(u: &ComplexMatrix) -> Result<QuantumChannel> {
    QuantumChannel::new(vec![u.clone()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{partial_trace, real_diagonal, trace, Factor};
    use crate::random::{random_channel, random_density, random_pvm, random_unitary};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: &ComplexMatrix, b: &ComplexMatrix, tol: f64) -> bool {
        max_abs(&(a - b)) <= tol
    }

    fn plus() -> DensityMatrix {
        DensityMatrix::new(DMatrix::from_element(2, 2, c(0.5))).unwrap()
    }

    #[test]
    fn apply_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random_density(2, &mut rng);
        let id = identity_channel(2).unwrap();
        assert!(close(id.apply(&rho).unwrap().matrix(), rho.matrix(), 1e-15));

        let full = depolarizing(1.0, 2).unwrap();
        assert!(close(full.apply(&rho).unwrap().matrix(), &real_diagonal(&[0.5, 0.5]), 1e-14));

        let excited = DensityMatrix::basis_state(2, 1);
        let out = amplitude_damping(0.3).unwrap().apply(&excited).unwrap();
        assert!(close(out.matrix(), &real_diagonal(&[0.3, 0.7]), 1e-14));

        assert!(matches!(
            id.apply(&DensityMatrix::maximally_mixed(3)),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn standard_channel_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random_density(2, &mut rng);
        for ch in [depolarizing(0.0, 2).unwrap(), amplitude_damping(0.0).unwrap()] {
            assert!(close(ch.apply(&rho).unwrap().matrix(), rho.matrix(), 1e-14));
        }
        let out = phase_damping(1.0).unwrap().apply(&plus()).unwrap();
        assert!(close(out.matrix(), &real_diagonal(&[0.5, 0.5]), 1e-14));
        for bad in [-0.1, 1.1, f64::NAN] {
            assert!(matches!(depolarizing(bad, 2), Err(Error::ParameterOutOfRange(_))));
            assert!(amplitude_damping(bad).is_err());
            assert!(phase_damping(bad).is_err());
        }
        // qutrit depolarizing: (1-p) rho + p I/3
        let rho3 = random_density(3, &mut rng);
        let out = depolarizing(0.4, 3).unwrap().apply(&rho3).unwrap();
        let expect = rho3.matrix().scale(0.6) + identity(3).scale(0.4 / 3.0);
        assert!(close(out.matrix(), &expect, 1e-13));
        let built = StandardChannel::Depolarizing { p: 0.4, dim: 3 }.build().unwrap();
        assert_eq!(built, depolarizing(0.4, 3).unwrap());
    }

    #[test]
    fn trace_preservation_is_enforced() {
        let k = real_diagonal(&[1.0, 0.9]);
        match QuantumChannel::new(vec![k]) {
            Err(Error::NotTracePreserving(r)) => assert!((r - 0.19).abs() < 1e-12),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(QuantumChannel::new(vec![]), Err(Error::Empty(_))));
    }

    #[test]
    fn compose_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = random_channel(2, 2, 3, &mut rng);
        let id = identity_channel(2).unwrap();
        for basis in 0..2 {
            let rho = DensityMatrix::basis_state(2, basis);
            let direct = ch.apply(&rho).unwrap();
            for composed in [compose(&id, &ch).unwrap(), compose(&ch, &id).unwrap()] {
                assert!(close(composed.apply(&rho).unwrap().matrix(), direct.matrix(), 1e-14));
            }
        }
        let (p, q) = (0.3, 0.45);
        let both = compose(&depolarizing(p, 2).unwrap(), &depolarizing(q, 2).unwrap()).unwrap();
        // Bloch vectors shrink by (1-p)(1-q) = 1 - (p + q - pq)
        let shrink = (1.0 - p) * (1.0 - q);
        for _ in 0..10 {
            let rho = random_density(2, &mut rng);
            let out = both.apply(&rho).unwrap();
            let bloch_in = [2.0 * rho.matrix()[(0, 1)].re, -2.0 * rho.matrix()[(0, 1)].im];
            let bloch_out = [2.0 * out.matrix()[(0, 1)].re, -2.0 * out.matrix()[(0, 1)].im];
            let z_in = (rho.matrix()[(0, 0)] - rho.matrix()[(1, 1)]).re;
            let z_out = (out.matrix()[(0, 0)] - out.matrix()[(1, 1)]).re;
            assert!((bloch_out[0] - shrink * bloch_in[0]).abs() < 1e-12);
            assert!((bloch_out[1] - shrink * bloch_in[1]).abs() < 1e-12);
            assert!((z_out - shrink * z_in).abs() < 1e-12);
            let single = depolarizing(p + q - p * q, 2).unwrap().apply(&rho).unwrap();
            assert!(close(out.matrix(), single.matrix(), 1e-12));
        }
        assert!(compose(&random_channel(2, 3, 2, &mut rng), &id).is_err());
    }

    #[test]
    fn choi_examples() {
        let choi = identity_channel(2).unwrap().choi_matrix();
        let e = eig_hermitian(&choi).unwrap();
        assert!((e.eigenvalues[0] - 2.0).abs() < 1e-14);
        assert_eq!(e.rank(), 1);
        assert!((trace(&choi).re - 2.0).abs() < 1e-14);

        let choi = depolarizing(1.0, 2).unwrap().choi_matrix();
        assert!(close(&choi, &identity(4).scale(0.5), 1e-14));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let ch = random_channel(2, 3, 2, &mut rng);
            assert!(ch.min_choi_eigenvalue() >= -1e-10);
            let marginal = partial_trace(&ch.choi_matrix(), Factor::First, (3, 2)).unwrap();
            assert!(close(&marginal, &identity(2), 1e-12));
        }
    }

    #[test]
    fn measurement_examples() {
        let comp = measurement_channel(&ProjectiveMeasurement::computational(2));
        let d = DensityMatrix::from_diagonal(&[0.3, 0.7]).unwrap();
        assert!(close(comp.apply(&d).unwrap().matrix(), d.matrix(), 1e-15));
        assert!(close(comp.apply(&plus()).unwrap().matrix(), &real_diagonal(&[0.5, 0.5]), 1e-15));

        let trivial = measurement_channel(&ProjectiveMeasurement::trivial(2));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random_density(2, &mut rng);
        assert!(close(trivial.apply(&rho).unwrap().matrix(), rho.matrix(), 1e-15));

        let not_orth = vec![real_diagonal(&[1.0, 0.0]), real_diagonal(&[1.0, 0.0])];
        assert!(matches!(ProjectiveMeasurement::new(not_orth), Err(Error::InvalidMeasurement(_))));
        let incomplete = vec![real_diagonal(&[1.0, 0.0])];
        assert!(ProjectiveMeasurement::new(incomplete).is_err());
        let not_idem = vec![real_diagonal(&[0.5, 0.0]), real_diagonal(&[0.5, 1.0])];
        assert!(ProjectiveMeasurement::new(not_idem).is_err());
    }

    #[test]
    fn measurement_output_commutes_with_projectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..20 {
            let pvm = random_pvm(3, 2, &mut rng);
            let out = measurement_channel(&pvm).apply(&random_density(3, &mut rng)).unwrap();
            for p in pvm.projectors() {
                assert!(max_abs(&(out.matrix() * p - p * out.matrix())) < 1e-12);
            }
        }
    }

    #[test]
    fn classical_embedding_examples() {
        let id = ClassicalChannel::new(DMatrix::identity(3, 3)).unwrap();
        let d = DensityMatrix::from_diagonal(&[0.2, 0.5, 0.3]).unwrap();
        assert!(close(classical_embedding(&id).apply(&d).unwrap().matrix(), d.matrix(), 1e-15));

        let bsc = classical_embedding(&ClassicalChannel::binary_symmetric(0.1).unwrap());
        let out = bsc.apply(&DensityMatrix::basis_state(2, 0)).unwrap();
        assert!(close(out.matrix(), &real_diagonal(&[0.9, 0.1]), 1e-15));
        assert!(bsc.trace_preservation_residual() < 1e-12);

        let bad = DMatrix::from_row_slice(2, 2, &[0.9, 0.2, 0.2, 0.8]);
        assert!(matches!(ClassicalChannel::new(bad), Err(Error::NotStochastic(_))));
    }

    proptest! {
        #[test]
        fn apply_preserves_trace_and_hermiticity(seed in any::<u64>(), din in 1usize..4, dout in 1usize..4, k in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let kr = k.max((din + dout - 1) / dout);
            let ch = random_channel(din, dout, kr, &mut rng);
            let rho = random_density(din, &mut rng);
            let out = ch.apply_operator(rho.matrix()).unwrap();
            prop_assert!((trace(&out).re - 1.0).abs() <= 1e-10);
            prop_assert!(linalg::hermitian_deviation(&out) <= 1e-10);
            prop_assert!(ch.min_choi_eigenvalue() >= -1e-10);
        }

        #[test]
        fn compose_is_associative(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_channel(2, 3, 2, &mut rng);
            let b = random_channel(3, 2, 2, &mut rng);
            let c3 = random_channel(2, 2, 3, &mut rng);
            let left = compose(&compose(&a, &b).unwrap(), &c3).unwrap();
            let right = compose(&a, &compose(&b, &c3).unwrap()).unwrap();
            // spanning set: matrix units
            for i in 0..2 {
                for j in 0..2 {
                    let mut unit = DMatrix::zeros(2, 2);
                    unit[(i, j)] = c(1.0);
                    let l = left.apply_operator(&unit).unwrap();
                    let r = right.apply_operator(&unit).unwrap();
                    prop_assert!(close(&l, &r, 1e-9));
                    let seq = c3.apply_operator(&b.apply_operator(&a.apply_operator(&unit).unwrap()).unwrap()).unwrap();
                    prop_assert!(close(&l, &seq, 1e-10));
                }
            }
        }

        #[test]
        fn measurement_channel_is_idempotent(seed in any::<u64>(), blocks in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = measurement_channel(&random_pvm(3, blocks, &mut rng));
            let rho = random_density(3, &mut rng);
            let once = m.apply(&rho).unwrap();
            let twice = m.apply(&once).unwrap();
            prop_assert!(close(once.matrix(), twice.matrix(), 1e-10));
        }

        #[test]
        fn unitary_channels_are_valid(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_unitary(3, &mut rng);
            let ch = unitary_channel(&u).unwrap();
            prop_assert!(ch.trace_preservation_residual() < 1e-12);
        }
    }
}

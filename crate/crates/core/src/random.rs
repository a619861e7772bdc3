//! Random matrices, states and channels for restarts and property tests.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::channels::{ClassicalChannel, ProjectiveMeasurement, QuantumChannel};
use crate::entropy::DensityMatrix;
use crate::linalg::{hermitian_part, orthonormalize_columns, outer, ComplexMatrix, ComplexVector};

pub fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    Complex64::new(StandardNormal.sample(rng), StandardNormal.sample(rng))
}

pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    DMatrix::from_fn(rows, cols, |_, _| gaussian_complex(rng))
}

pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    hermitian_part(&ginibre(dim, dim, rng))
}

/// Haar-distributed unitary (QR of a Ginibre matrix with phase correction).
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    orthonormalize_columns(ginibre(dim, dim, rng))
}

pub fn random_pure_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexVector {
    let v = DVector::from_fn(dim, |_, _| gaussian_complex(rng));
    let n = v.norm();
    v.unscale(n)
}

pub fn random_pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    DensityMatrix::from_pure(&random_pure_vector(dim, rng)).expect("unit vector gives a state")
}

/// Random state of the given rank from the induced (Ginibre) measure.
pub fn random_density_of_rank<R: Rng + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> DensityMatrix {
    let g = ginibre(dim, rank.max(1), rng);
    let m = &g * g.adjoint();
    let t = crate::linalg::trace(&m).re;
    DensityMatrix::new(m.unscale(t)).expect("Ginibre construction gives a state")
}

/// Full-rank random state (Hilbert–Schmidt measure).
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    random_density_of_rank(dim, dim, rng)
}

pub fn random_probability<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    let raw: Vec<f64> = (0..len)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

/// Random CPTP map with `n_kraus` Kraus operators, obtained by cutting a
/// random isometry `C^{d_in} → C^{n_kraus d_out}` into blocks.
pub fn random_channel<R: Rng + ?Sized>(
    dim_in: usize,
    dim_out: usize,
    n_kraus: usize,
    rng: &mut R,
) -> QuantumChannel {
    let rows = n_kraus * dim_out;
    assert!(rows >= dim_in, "need n_kraus * dim_out >= dim_in");
    let v = orthonormalize_columns(ginibre(rows, dim_in, rng));
    let kraus = (0..n_kraus)
        .map(|k| v.rows(k * dim_out, dim_out).into_owned())
        .collect();
    QuantumChannel::new(kraus).expect("isometry blocks form a channel")
}

pub fn random_stochastic<R: Rng + ?Sized>(outputs: usize, inputs: usize, rng: &mut R) -> ClassicalChannel {
    let mut m = DMatrix::zeros(outputs, inputs);
    for j in 0..inputs {
        let col = random_probability(outputs, rng);
        for i in 0..outputs {
            m[(i, j)] = col[i];
        }
    }
    ClassicalChannel::new(m).expect("columns are probability vectors")
}

/// Random PVM: a random orthonormal basis split into `blocks` contiguous groups.
pub fn random_pvm<R: Rng + ?Sized>(dim: usize, blocks: usize, rng: &mut R) -> ProjectiveMeasurement {
    let u = random_unitary(dim, rng);
    let blocks = blocks.clamp(1, dim);
    let mut cuts: Vec<usize> = (1..dim).collect();
    // choose blocks-1 distinct cut points
    while cuts.len() > blocks - 1 {
        let i = rng.random_range(0..cuts.len());
        cuts.remove(i);
    }
    let mut bounds = vec![0];
    bounds.extend(cuts);
    bounds.push(dim);
    let projectors = bounds
        .windows(2)
        .map(|w| {
            (w[0]..w[1])
                .map(|j| outer(&u.column(j).into_owned()))
                .fold(DMatrix::zeros(dim, dim), |acc, p| acc + p)
        })
        .collect();
    ProjectiveMeasurement::new(projectors).expect("orthonormal blocks form a PVM")
}

//! Compound states and the quantum mutual entropy.
//!
//! For a state `ρ = Σ_k λ_k E_k` (rank-one spectral projectors) and a channel
//! `Λ`, the compound state is `σ_E = Σ_k λ_k E_k ⊗ Λ(E_k)` and
//!
//! ```text
//! I(ρ; Λ) = sup_E S(σ_E, ρ ⊗ Λρ) = sup_E Σ_k λ_k S(Λ E_k, Λ ρ)
//! ```
//!
//! where the supremum runs over all Schatten decompositions. It only matters
//! when `ρ` has a degenerate eigenvalue; the search then rotates the
//! eigenbasis inside each degenerate block. Also here: the classical-input
//! form for coded ensembles, the pseudo-mutual entropy over arbitrary finite
//! decompositions, and the orthogonal-decomposition form.

use std::ops::Range;

use nalgebra::DMatrix;

use crate::channels::QuantumChannel;
use crate::entropy::{
    self, check_probability_vector, clamp_small_negative, relative_entropy_from_eigs,
    von_neumann_entropy, DensityMatrix, ExtendedReal,
};
use crate::error::{Error, Result};
use crate::linalg::{
    self, eig_hermitian, max_abs, outer, ComplexMatrix, ComplexVector, HermitianEig, ZERO_THRESHOLD,
};
use crate::optim::{self, SearchOptions};

/// Eigenvalues closer than this belong to the same degenerate block.
pub const DEGENERACY_TOL: f64 = 1e-9;
/// Components of a pseudo decomposition lighter than this are dropped.
pub const PSEUDO_WEIGHT_FLOOR: f64 = 1e-10;
/// Weights at or below this contribute exactly zero to weighted sums.
pub const WEIGHT_FLOOR: f64 = ZERO_THRESHOLD;

/// `ρ = Σ_k λ_k |v_k⟩⟨v_k|` with orthonormal `v_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SchattenDecomposition {
    weights: Vec<f64>,
    vectors: Vec<ComplexVector>,
}

impl SchattenDecomposition {
    /// Checks that weights form a probability vector and vectors are orthonormal.
    pub fn new(weights: Vec<f64>, vectors: Vec<ComplexVector>) -> Result<Self> {
        if weights.len() != vectors.len() {
            return Err(Error::InvalidDecomposition(format!(
                "{} weights for {} vectors",
                weights.len(),
                vectors.len()
            )));
        }
        check_probability_vector(&weights)?;
        for (i, v) in vectors.iter().enumerate() {
            for (j, u) in vectors.iter().enumerate().skip(i) {
                let ip = u.dotc(v).norm();
                let expect = if i == j { 1.0 } else { 0.0 };
                if (ip - expect).abs() > 1e-9 {
                    return Err(Error::InvalidDecomposition(format!(
                        "vectors {i} and {j} are not orthonormal"
                    )));
                }
            }
        }
        Ok(Self { weights, vectors })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn vectors(&self) -> &[ComplexVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn projector(&self, k: usize) -> ComplexMatrix {
        outer(&self.vectors[k])
    }

    pub fn projectors(&self) -> Vec<ComplexMatrix> {
        (0..self.len()).map(|k| self.projector(k)).collect()
    }

    pub fn reconstruct(&self, dim: usize) -> ComplexMatrix {
        self.weights
            .iter()
            .zip(&self.vectors)
            .fold(DMatrix::zeros(dim, dim), |acc, (w, v)| acc + outer(v).scale(*w))
    }

    /// Fails unless `Σ λ_k E_k` matches `ρ` within `1e-9` in Frobenius norm.
    pub fn check_decomposes(&self, rho: &DensityMatrix) -> Result<()> {
        if self.vectors.iter().any(|v| v.len() != rho.dim()) {
            return Err(Error::InvalidDecomposition(
                "projector dimension differs from the state".into(),
            ));
        }
        let err = (self.reconstruct(rho.dim()) - rho.matrix()).norm();
        if !(err <= 1e-9) {
            return Err(Error::InvalidDecomposition(format!(
                "decomposition misses the state by {err:e} (Frobenius)"
            )));
        }
        Ok(())
    }
}

/// Partition of the (descending) spectrum into blocks of equal eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct DegeneracyStructure {
    pub eigenvalues: Vec<f64>,
    pub blocks: Vec<Range<usize>>,
}

impl DegeneracyStructure {
    pub fn from_eig(eig: &HermitianEig) -> Self {
        let eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let mut blocks = Vec::new();
        let mut start = 0;
        for i in 1..=eigenvalues.len() {
            if i == eigenvalues.len() || (eigenvalues[i - 1] - eigenvalues[i]).abs() > DEGENERACY_TOL {
                blocks.push(start..i);
                start = i;
            }
        }
        Self { eigenvalues, blocks }
    }

    pub fn block_dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.len()).collect()
    }

    /// Degenerate blocks lying in the support (rotations there change `E`).
    pub fn degenerate_support_blocks(&self, threshold: f64) -> Vec<Range<usize>> {
        self.blocks
            .iter()
            .filter(|b| b.len() > 1 && self.eigenvalues[b.start] > threshold)
            .cloned()
            .collect()
    }
}

pub fn degeneracy(rho: &DensityMatrix) -> DegeneracyStructure {
    DegeneracyStructure::from_eig(&rho.eig())
}

fn schatten_from_eig(eig: &HermitianEig) -> SchattenDecomposition {
    let support: Vec<usize> = (0..eig.dim()).filter(|&i| eig.in_support(i)).collect();
    SchattenDecomposition {
        weights: support.iter().map(|&i| eig.eigenvalues[i]).collect(),
        vectors: support.iter().map(|&i| eig.vector(i)).collect(),
    }
}

/// Rank-one spectral decomposition with kernel eigenvalues dropped.
pub fn schatten(rho: &DensityMatrix) -> SchattenDecomposition {
    schatten_from_eig(&rho.eig())
}

fn check_channel_input(rho: &DensityMatrix, channel: &QuantumChannel) -> Result<()> {
    if rho.dim() != channel.dim_in() {
        return Err(Error::DimensionMismatch(format!(
            "state of dimension {} into a channel with input dimension {}",
            rho.dim(),
            channel.dim_in()
        )));
    }
    Ok(())
}

/// `σ_E = Σ_k λ_k E_k ⊗ Λ(E_k)` on the input ⊗ output space.
pub fn compound_state(
    rho: &DensityMatrix,
    channel: &QuantumChannel,
    decomposition: &SchattenDecomposition,
) -> Result<DensityMatrix> {
    check_channel_input(rho, channel)?;
    decomposition.check_decomposes(rho)?;
    let n = rho.dim() * channel.dim_out();
    let mut sigma = DMatrix::zeros(n, n);
    for k in 0..decomposition.len() {
        let e = decomposition.projector(k);
        let out = channel.apply_operator(&e)?;
        sigma += linalg::tensor(&e, &out).scale(decomposition.weights[k]);
    }
    Ok(DensityMatrix::from_trusted(sigma))
}

/// `Σ_k λ_k S(Λ E_k, Λ ρ)` given the spectrum of `Λρ`; no validation.
fn fixed_value(
    weights: &[f64],
    vectors: &[ComplexVector],
    channel: &QuantumChannel,
    output_eig: &HermitianEig,
) -> ExtendedReal {
    let mut total = ExtendedReal::Finite(0.0);
    for (w, v) in weights.iter().zip(vectors) {
        if *w <= WEIGHT_FLOOR {
            continue;
        }
        let out = channel.apply_operator(&outer(v)).expect("dimensions checked by caller");
        let eig = eig_hermitian(&linalg::hermitian_part(&out)).expect("Hermitian");
        let term = clamp_small_negative(relative_entropy_from_eigs(&eig, output_eig));
        total = total + term.scale(*w);
    }
    total
}

/// `Σ_k λ_k S(Λ E_k, Λ ρ)` at one fixed Schatten decomposition.
pub fn mutual_entropy_fixed(
    rho: &DensityMatrix,
    channel: &QuantumChannel,
    decomposition: &SchattenDecomposition,
) -> Result<ExtendedReal> {
    check_channel_input(rho, channel)?;
    decomposition.check_decomposes(rho)?;
    let output = channel.apply(rho)?;
    Ok(fixed_value(
        &decomposition.weights,
        &decomposition.vectors,
        channel,
        &output.eig(),
    ))
}

/// `S(σ_E, ρ ⊗ Λρ)`, the relative-entropy form of the same quantity.
pub fn mutual_entropy_compound_form(
    rho: &DensityMatrix,
    channel: &QuantumChannel,
    decomposition: &SchattenDecomposition,
) -> Result<ExtendedReal> {
    let sigma = compound_state(rho, channel, decomposition)?;
    let output = channel.apply(rho)?;
    let product = DensityMatrix::from_trusted(linalg::tensor(rho.matrix(), output.matrix()));
    entropy::relative_entropy(&sigma, &product)
}

/// Mutual entropy together with the decomposition achieving it.
#[derive(Debug, Clone)]
pub struct MutualEntropy {
    pub value: f64,
    pub decomposition: SchattenDecomposition,
    /// Whether the spectrum had a degenerate block in the support.
    pub degenerate: bool,
    pub restarts_used: usize,
    pub converged: bool,
    pub evaluations: usize,
}

/// `I(ρ; Λ)` with the default search options.
pub fn mutual_entropy(rho: &DensityMatrix, channel: &QuantumChannel) -> Result<f64> {
    Ok(mutual_entropy_with(rho, channel, &SearchOptions::decomposition_default())?.value)
}

/// `I(ρ; Λ)`: exact for a non-degenerate spectrum, otherwise the best value
/// found by rotating each degenerate eigenspace with a parameterized unitary.
///
/// Under degeneracy the result is a lower bound on the supremum.
pub fn mutual_entropy_with(
    rho: &DensityMatrix,
    channel: &QuantumChannel,
    opts: &SearchOptions,
) -> Result<MutualEntropy> {
    check_channel_input(rho, channel)?;
    let eig = rho.eig();
    let base = schatten_from_eig(&eig);
    let output_eig = channel.apply(rho)?.eig();
    let blocks = DegeneracyStructure::from_eig(&eig).degenerate_support_blocks(eig.kernel_threshold());
    let base_value = fixed_value(&base.weights, &base.vectors, channel, &output_eig).to_f64();

    if blocks.is_empty() {
        return Ok(MutualEntropy {
            value: base_value,
            decomposition: base,
            degenerate: false,
            restarts_used: 0,
            converged: true,
            evaluations: 1,
        });
    }

    // support eigenvalues come first in the descending order, so block
    // indices address `base.vectors` directly
    let rotate = |x: &[f64]| -> Vec<ComplexVector> {
        let mut vectors = base.vectors.clone();
        let mut offset = 0;
        for block in &blocks {
            let m = block.len();
            let u = optim::unitary_from_params(&x[offset..offset + m * m], m);
            offset += m * m;
            for (col, i) in block.clone().enumerate() {
                let mut v = ComplexVector::zeros(rho.dim());
                for (row, j) in block.clone().enumerate() {
                    v += base.vectors[j].scale(1.0) * u[(row, col)];
                }
                vectors[i] = v;
            }
        }
        vectors
    };
    let n_params: usize = blocks.iter().map(|b| b.len() * b.len()).sum();
    let objective = |x: &[f64]| fixed_value(&base.weights, &rotate(x), channel, &output_eig).to_f64();
    let outcome = optim::multi_start(
        &objective,
        |r, rng| {
            if r == 0 {
                vec![0.0; n_params]
            } else {
                optim::gaussian_vector(n_params, 1.0, rng)
            }
        },
        opts,
    );
    let (value, vectors) = if outcome.value >= base_value {
        (outcome.value, rotate(&outcome.x))
    } else {
        (base_value, base.vectors.clone())
    };
    Ok(MutualEntropy {
        value,
        decomposition: SchattenDecomposition {
            weights: base.weights.clone(),
            vectors,
        },
        degenerate: true,
        restarts_used: outcome.restarts_used,
        converged: outcome.converged,
        evaluations: outcome.evaluations,
    })
}

fn check_coded_states(
    weights: &[f64],
    channel: &QuantumChannel,
    coded_states: &[DensityMatrix],
) -> Result<()> {
    if weights.len() != coded_states.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} coded states",
            weights.len(),
            coded_states.len()
        )));
    }
    check_probability_vector(weights)?;
    for s in coded_states {
        check_channel_input(s, channel)?;
    }
    Ok(())
}

/// `Σ_k p_k S(Λσ_k, Λσ)` with `σ = Σ_k p_k σ_k`: the mutual entropy of a
/// classical input distribution whose symbols are coded as `σ_k`.
pub fn classical_mutual_entropy(
    weights: &[f64],
    channel: &QuantumChannel,
    coded_states: &[DensityMatrix],
) -> Result<f64> {
    check_coded_states(weights, channel, coded_states)?;
    let mixture = DensityMatrix::mixture(weights, coded_states)?;
    let out_eig = channel.apply(&mixture)?.eig();
    let mut total = ExtendedReal::Finite(0.0);
    for (w, s) in weights.iter().zip(coded_states) {
        if *w <= WEIGHT_FLOOR {
            continue;
        }
        let eig = channel.apply(s)?.eig();
        total = total + clamp_small_negative(relative_entropy_from_eigs(&eig, &out_eig)).scale(*w);
    }
    Ok(total.to_f64())
}

/// `S(Λσ) − Σ_k p_k S(Λσ_k)`.
pub fn classical_mutual_entropy_shannon_form(
    weights: &[f64],
    channel: &QuantumChannel,
    coded_states: &[DensityMatrix],
) -> Result<f64> {
    check_coded_states(weights, channel, coded_states)?;
    let mixture = DensityMatrix::mixture(weights, coded_states)?;
    let mut value = von_neumann_entropy(&channel.apply(&mixture)?);
    for (w, s) in weights.iter().zip(coded_states) {
        if *w > WEIGHT_FLOOR {
            value -= w * von_neumann_entropy(&channel.apply(s)?);
        }
    }
    Ok(value)
}

/// `Σ_k λ_k S(Λρ_k, Λρ)` for an orthogonal decomposition `ρ = Σ_k λ_k ρ_k`.
pub fn orthogonal_decomposition_form(
    rho: &DensityMatrix,
    channel: &QuantumChannel,
    components: &[(f64, DensityMatrix)],
) -> Result<f64> {
    check_channel_input(rho, channel)?;
    let weights: Vec<f64> = components.iter().map(|(w, _)| *w).collect();
    check_probability_vector(&weights)?;
    for (i, (_, a)) in components.iter().enumerate() {
        if a.dim() != rho.dim() {
            return Err(Error::DimensionMismatch("component dimension".into()));
        }
        for (j, (_, b)) in components.iter().enumerate().skip(i + 1) {
            let overlap = max_abs(&(a.matrix() * b.matrix()));
            if overlap > 1e-9 {
                return Err(Error::InvalidDecomposition(format!(
                    "components {i} and {j} are not orthogonal (overlap {overlap:e})"
                )));
            }
        }
    }
    let states: Vec<DensityMatrix> = components.iter().map(|(_, s)| s.clone()).collect();
    let mix = DensityMatrix::mixture(&weights, &states)?;
    let err = (mix.matrix() - rho.matrix()).norm();
    if err > 1e-9 {
        return Err(Error::InvalidDecomposition(format!(
            "components mix to a state {err:e} away from rho"
        )));
    }
    classical_mutual_entropy(&weights, channel, &states)
}

/// Best finite decomposition found by the pseudo-mutual-entropy search.
#[derive(Debug, Clone)]
pub struct PseudoMutualEntropy {
    pub value: f64,
    pub weights: Vec<f64>,
    pub components: Vec<DensityMatrix>,
    pub restarts_used: usize,
    pub converged: bool,
}

/// `I_p(ρ; Λ)` with `n_components` terms and default options.
pub fn pseudo_mutual_entropy(
    rho: &DensityMatrix,
    channel: &QuantumChannel,
    n_components: usize,
) -> Result<f64> {
    Ok(pseudo_mutual_entropy_with(
        rho,
        channel,
        n_components,
        &SearchOptions::decomposition_default(),
        None,
    )?
    .value)
}

/// Decompositions `ρ = Σ_k λ_k ρ_k` generated from a positive-operator
/// resolution `{M_k}` of the identity: `λ_k ρ_k = √ρ M_k √ρ`.
struct Resolution<'a> {
    sqrt_rho: ComplexMatrix,
    dim: usize,
    n: usize,
    channel: &'a QuantumChannel,
    output_eig: HermitianEig,
}

impl Resolution<'_> {
    fn param_len(&self) -> usize {
        2 * self.dim * self.dim * self.n
    }

    /// `(λ_k, ρ_k)` for `M_k = T^{-1/2} B_k†B_k T^{-1/2}`, `T = Σ B_k†B_k`.
    fn decompose(&self, x: &[f64]) -> Option<Vec<(f64, ComplexMatrix)>> {
        let d = self.dim;
        let block = 2 * d * d;
        let grams: Vec<ComplexMatrix> = (0..self.n)
            .map(|k| {
                let b = optim::complex_matrix_from_params(&x[k * block..(k + 1) * block], d, d);
                b.adjoint() * b
            })
            .collect();
        let total = grams.iter().fold(DMatrix::zeros(d, d), |acc, g| acc + g);
        let eig = eig_hermitian(&linalg::hermitian_part(&total)).ok()?;
        if !(eig.min_eigenvalue() > 1e-12 * eig.max_eigenvalue().max(1e-300)) {
            return None;
        }
        let inv_sqrt = eig.map_spectrum(|w, _| 1.0 / w.sqrt());
        let mut out = Vec::with_capacity(self.n);
        for g in &grams {
            let m = &inv_sqrt * g * &inv_sqrt;
            let a = &self.sqrt_rho * m * &self.sqrt_rho;
            let w = a.trace().re;
            if w >= PSEUDO_WEIGHT_FLOOR {
                out.push((w, a.unscale(w)));
            }
        }
        Some(out)
    }

    fn value(&self, x: &[f64]) -> f64 {
        let Some(parts) = self.decompose(x) else {
            return f64::NEG_INFINITY;
        };
        let mut total = 0.0;
        for (w, state) in parts {
            let out = self.channel.apply_operator(&state).expect("dimension checked");
            let Ok(eig) = eig_hermitian(&linalg::hermitian_part(&out)) else {
                return f64::NEG_INFINITY;
            };
            total += w * clamp_small_negative(relative_entropy_from_eigs(&eig, &self.output_eig)).to_f64();
        }
        total
    }

    /// Parameters reproducing a Schatten decomposition (grouped into `n` parts).
    fn params_for(&self, decomposition: &SchattenDecomposition) -> Vec<f64> {
        let d = self.dim;
        let mut blocks = vec![DMatrix::zeros(d, d); self.n];
        let mut covered = DMatrix::zeros(d, d);
        for (k, v) in decomposition.vectors.iter().enumerate() {
            let p = outer(v);
            covered += &p;
            blocks[k.min(self.n - 1)] += p;
        }
        // the kernel of ρ goes to the last part so that T = I
        blocks[self.n - 1] += linalg::identity(d) - covered;
        blocks.iter().flat_map(optim::params_for_complex_matrix).collect()
    }
}

/// Pseudo-mutual entropy `sup Σ_k λ_k S(Λρ_k, Λρ)` over decompositions of `ρ`
/// into `n_components` (not necessarily orthogonal) states.
///
/// Restart 0 starts from `warm_start` when given, otherwise from the
/// optimized Schatten decomposition, so for `n_components ≥ rank ρ` the
/// result never falls below the mutual entropy.
pub fn pseudo_mutual_entropy_with(
    rho: &DensityMatrix,
    channel: &QuantumChannel,
    n_components: usize,
    opts: &SearchOptions,
    warm_start: Option<&SchattenDecomposition>,
) -> Result<PseudoMutualEntropy> {
    check_channel_input(rho, channel)?;
    if n_components == 0 {
        return Err(Error::ParameterOutOfRange("n_components must be at least 1".into()));
    }
    if n_components == 1 {
        return Ok(PseudoMutualEntropy {
            value: 0.0,
            weights: vec![1.0],
            components: vec![rho.clone()],
            restarts_used: 0,
            converged: true,
        });
    }
    let warm = match warm_start {
        Some(w) => {
            w.check_decomposes(rho)?;
            w.clone()
        }
        None => mutual_entropy_with(rho, channel, opts)?.decomposition,
    };
    let resolution = Resolution {
        sqrt_rho: linalg::matrix_sqrt_psd(rho.matrix())?,
        dim: rho.dim(),
        n: n_components,
        channel,
        output_eig: channel.apply(rho)?.eig(),
    };
    let warm_params = resolution.params_for(&warm);
    let n_params = resolution.param_len();
    let objective = |x: &[f64]| resolution.value(x);
    let outcome = optim::multi_start(
        &objective,
        |r, rng| {
            if r == 0 {
                warm_params.clone()
            } else {
                optim::gaussian_vector(n_params, 1.0, rng)
            }
        },
        opts,
    );
    let parts = resolution
        .decompose(&outcome.x)
        .expect("the winning point is feasible");
    Ok(PseudoMutualEntropy {
        value: outcome.value,
        weights: parts.iter().map(|(w, _)| *w).collect(),
        components: parts
            .into_iter()
            .map(|(_, s)| DensityMatrix::from_trusted(s))
            .collect(),
        restarts_used: outcome.restarts_used,
        converged: outcome.converged,
    })
}

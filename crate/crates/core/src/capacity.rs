//! Holevo bounds and capacity estimates.
//!
//! Quantum capacity over a state set `S₀`:
//! `C = sup_{ρ ∈ S₀} I(ρ; Γ)`, with the pseudo variant `C_p` maximizing over
//! arbitrary finite decompositions of `ρ`.
//!
//! Classical–quantum–classical capacities send a probability vector `p`
//! through a coding `k ↦ σ_k`, the channel `Γ`, and a projective decoding
//! `{E_i}`. The induced classical channel is `q_k(i) = tr(Γ(σ_k) E_i)` and
//! the mutual entropy reduces to the Shannon mutual information of
//! `(p, q)`. `C` fixes coding and decoding, `C_c` frees the coding, `C_d`
//! frees the decoding, and `C_cd` frees both, so
//! `0 ≤ C ≤ C_c, C_d ≤ C_cd ≤ sup H(p)`.
//!
//! Free codings are `n` pure codewords on the unit sphere. Free decodings
//! are rank-one projective measurements in a rotated basis, the rotation
//! being the orthonormalized columns of an unconstrained complex matrix.
//! Every capacity is the best feasible value found, so a lower bound on the
//! supremum.

use nalgebra::DMatrix;

use crate::channels::{compose, measurement_channel, ProjectiveMeasurement, QuantumChannel};
use crate::entropy::{
    check_probability_vector, clamp_small_negative, relative_entropy_from_eigs, shannon_entropy,
    von_neumann_entropy, DensityMatrix, ExtendedReal,
};
use crate::error::{Error, Result};
use crate::linalg::{
    self, eig_hermitian, orthonormalize_columns, outer, ComplexMatrix, ComplexVector, HermitianEig,
};
use crate::mutual::{self, mutual_entropy_with, WEIGHT_FLOOR};
use crate::optim::{self, SearchOptions};

/// Slack allowed by the bound-chain checks.
pub const CHAIN_TOL: f64 = 1e-9;
/// Slack allowed when checking chains of optimized capacities.
pub const CAPACITY_CHAIN_TOL: f64 = 1e-6;

/// Weighted family of states `{λ_k, σ_k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    weights: Vec<f64>,
    states: Vec<DensityMatrix>,
}

impl Ensemble {
    pub fn new(weights: Vec<f64>, states: Vec<DensityMatrix>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Empty("ensemble has no states".into()));
        }
        if weights.len() != states.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} states",
                weights.len(),
                states.len()
            )));
        }
        check_probability_vector(&weights)?;
        let d = states[0].dim();
        if states.iter().any(|s| s.dim() != d) {
            return Err(Error::DimensionMismatch("ensemble states differ in dimension".into()));
        }
        Ok(Self { weights, states })
    }

    pub fn uniform(states: Vec<DensityMatrix>) -> Result<Self> {
        let n = states.len().max(1);
        Self::new(vec![1.0 / n as f64; states.len()], states)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn states(&self) -> &[DensityMatrix] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    /// `σ = Σ_k λ_k σ_k`.
    pub fn mixture(&self) -> DensityMatrix {
        DensityMatrix::mixture(&self.weights, &self.states).expect("validated on construction")
    }
}

fn check_input_dim(dim: usize, channel: &QuantumChannel) -> Result<()> {
    if dim != channel.dim_in() {
        return Err(Error::DimensionMismatch(format!(
            "states of dimension {dim} into a channel with input dimension {}",
            channel.dim_in()
        )));
    }
    Ok(())
}

fn hermitian_eig(m: &ComplexMatrix) -> HermitianEig {
    eig_hermitian(&linalg::hermitian_part(m)).expect("Hermitian by construction")
}

/// `Σ_k λ_k S(A_k, Σ_j λ_j A_j)` for states `A_k`.
fn chi_of(weights: &[f64], states: &[ComplexMatrix]) -> ExtendedReal {
    let dim = states[0].nrows();
    let mix = weights
        .iter()
        .zip(states)
        .fold(DMatrix::zeros(dim, dim), |acc, (w, s)| acc + s.scale(*w));
    let mix_eig = hermitian_eig(&mix);
    let mut total = ExtendedReal::Finite(0.0);
    for (w, s) in weights.iter().zip(states) {
        if *w > WEIGHT_FLOOR {
            let term = relative_entropy_from_eigs(&hermitian_eig(s), &mix_eig);
            total = total + clamp_small_negative(term).scale(*w);
        }
    }
    total
}

/// Holevo quantity `S(Γσ) − Σ_k λ_k S(Γσ_k)`, clamped at zero.
pub fn holevo_chi(ens: &Ensemble, channel: &QuantumChannel) -> Result<f64> {
    check_input_dim(ens.dim(), channel)?;
    let mut value = von_neumann_entropy(&channel.apply(&ens.mixture())?);
    for (w, s) in ens.weights.iter().zip(&ens.states) {
        if *w > WEIGHT_FLOOR {
            value -= w * von_neumann_entropy(&channel.apply(s)?);
        }
    }
    Ok(value.max(0.0))
}

/// `Σ_k λ_k S(Γσ_k, Γσ)`, the relative-entropy form of [`holevo_chi`].
pub fn holevo_chi_relative_form(ens: &Ensemble, channel: &QuantumChannel) -> Result<f64> {
    mutual::classical_mutual_entropy(&ens.weights, channel, &ens.states)
}

fn xlogx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// `Σ_k p_k Σ_i q(i|k) ln(q(i|k) / q(i))` with `q[(i, k)] = q(i|k)`.
pub fn classical_mutual_information(p: &[f64], q: &DMatrix<f64>) -> f64 {
    let outputs = q.nrows();
    let mut total = 0.0;
    for i in 0..outputs {
        let qi: f64 = p.iter().enumerate().map(|(k, pk)| pk * q[(i, k)]).sum();
        for (k, pk) in p.iter().enumerate() {
            let qik = q[(i, k)];
            if *pk > 0.0 && qik > 0.0 {
                total += pk * qik * (qik / qi).ln();
            }
        }
    }
    total.max(0.0)
}

/// Outcome distributions `q[(i, k)] = tr(E_i ρ_k)` clamped at zero.
fn outcome_matrix(states: &[ComplexMatrix], measurement: &ProjectiveMeasurement) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(measurement.outcomes(), states.len());
    for (k, s) in states.iter().enumerate() {
        for (i, w) in measurement.outcome_weights(s).into_iter().enumerate() {
            q[(i, k)] = w.max(0.0);
        }
    }
    q
}

/// Outcome distributions for the rank-one measurement in the columns of `basis`.
fn basis_outcome_matrix(states: &[ComplexMatrix], basis: &ComplexMatrix) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(basis.ncols(), states.len());
    for (k, s) in states.iter().enumerate() {
        for i in 0..basis.ncols() {
            let u = basis.column(i);
            q[(i, k)] = (u.adjoint() * s * u)[(0, 0)].re.max(0.0);
        }
    }
    q
}

/// Classical channel `q_k(i) = tr(Γ(σ_k) E_i)` induced by coding, channel and decoding.
pub fn transition_matrix(
    coding: &[DensityMatrix],
    channel: &QuantumChannel,
    decoding: &ProjectiveMeasurement,
) -> Result<DMatrix<f64>> {
    if coding.is_empty() {
        return Err(Error::Empty("coding has no codewords".into()));
    }
    for s in coding {
        check_input_dim(s.dim(), channel)?;
    }
    if decoding.dim() != channel.dim_out() {
        return Err(Error::DimensionMismatch(format!(
            "decoding of dimension {} after a channel with output dimension {}",
            decoding.dim(),
            channel.dim_out()
        )));
    }
    let outputs: Vec<ComplexMatrix> = coding
        .iter()
        .map(|s| channel.apply_operator(s.matrix()))
        .collect::<Result<_>>()?;
    Ok(outcome_matrix(&outputs, decoding))
}

/// `Σ_i [−q(i) ln q(i) + Σ_k λ_k p(i|k) ln p(i|k)]` with
/// `p(i|k) = tr(Γ₂(σ_k) E_i)`: the information the measurement extracts
/// about the ensemble index.
pub fn accessible_information_term(
    ens: &Ensemble,
    pre_channel: &QuantumChannel,
    measurement: &ProjectiveMeasurement,
) -> Result<f64> {
    let q = transition_matrix(&ens.states, pre_channel, measurement)?;
    let mut value = 0.0;
    for i in 0..q.nrows() {
        let qi: f64 = ens.weights.iter().enumerate().map(|(k, w)| w * q[(i, k)]).sum();
        value -= xlogx(qi);
        for (k, w) in ens.weights.iter().enumerate() {
            value += w * xlogx(q[(i, k)]);
        }
    }
    Ok(value.max(0.0))
}

/// Mutual entropy of a coded classical input read out by a projective decoding.
pub fn cqc_mutual_entropy(
    weights: &[f64],
    coding: &[DensityMatrix],
    channel: &QuantumChannel,
    decoding: &ProjectiveMeasurement,
) -> Result<f64> {
    if weights.len() != coding.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} codewords",
            weights.len(),
            coding.len()
        )));
    }
    check_probability_vector(weights)?;
    Ok(classical_mutual_information(
        weights,
        &transition_matrix(coding, channel, decoding)?,
    ))
}

/// Three rungs `upper ≥ middle ≥ lower` for a channel `Γ = M_E ∘ Γ₂`
/// (`M_E` the measurement channel of `E`) applied to an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// `Σ_k λ_k S(σ_k, σ)`.
    pub upper: ExtendedReal,
    /// `Σ_k λ_k S(Γσ_k, Γσ)`.
    pub middle: ExtendedReal,
    /// [`accessible_information_term`].
    pub lower: f64,
    /// `upper − middle` (`+∞` when `upper` is infinite).
    pub slack_upper: f64,
    /// `middle − lower`.
    pub slack_lower: f64,
    /// `upper ≥ middle − 1e-9` and `middle ≥ lower − 1e-9`, with `∞ ≥ x`.
    pub chain_ok: bool,
}

fn gap(a: ExtendedReal, b: ExtendedReal) -> f64 {
    match (a, b) {
        (ExtendedReal::Finite(x), ExtendedReal::Finite(y)) => x - y,
        (ExtendedReal::Infinite, ExtendedReal::Finite(_)) => f64::INFINITY,
        (ExtendedReal::Finite(_), ExtendedReal::Infinite) => f64::NEG_INFINITY,
        (ExtendedReal::Infinite, ExtendedReal::Infinite) => 0.0,
    }
}

fn at_least(a: ExtendedReal, b: ExtendedReal) -> bool {
    match (a, b) {
        (ExtendedReal::Infinite, _) => true,
        (ExtendedReal::Finite(_), ExtendedReal::Infinite) => false,
        (ExtendedReal::Finite(x), ExtendedReal::Finite(y)) => x >= y - CHAIN_TOL,
    }
}

/// Evaluates the bound chain for an ensemble, a pre-measurement channel
/// `Γ₂` and a projective measurement `E`.
pub fn theorem1_bounds(
    ens: &Ensemble,
    pre_channel: &QuantumChannel,
    measurement: &ProjectiveMeasurement,
) -> Result<BoundReport> {
    check_input_dim(ens.dim(), pre_channel)?;
    let inputs: Vec<ComplexMatrix> = ens.states.iter().map(|s| s.matrix().clone()).collect();
    let upper = chi_of(&ens.weights, &inputs);

    let full = compose(pre_channel, &measurement_channel(measurement))?;
    let outputs: Vec<ComplexMatrix> = inputs
        .iter()
        .map(|s| full.apply_operator(s))
        .collect::<Result<_>>()?;
    let middle = chi_of(&ens.weights, &outputs);
    let lower = accessible_information_term(ens, pre_channel, measurement)?;
    Ok(BoundReport {
        upper,
        middle,
        lower,
        slack_upper: gap(upper, middle),
        slack_lower: gap(middle, ExtendedReal::Finite(lower)),
        chain_ok: at_least(upper, middle) && at_least(middle, ExtendedReal::Finite(lower)),
    })
}

/// Input states searched by [`capacity_quantum`] and [`capacity_pseudo`].
#[derive(Debug, Clone, PartialEq)]
pub enum StateSet {
    All { dim: usize },
    RankAtMost { dim: usize, rank: usize },
    Explicit(Vec<DensityMatrix>),
}

impl StateSet {
    fn validate(&self, channel: &QuantumChannel) -> Result<()> {
        match self {
            StateSet::All { dim } => check_input_dim(*dim, channel),
            StateSet::RankAtMost { dim, rank } => {
                check_input_dim(*dim, channel)?;
                if *rank == 0 || rank > dim {
                    return Err(Error::ParameterOutOfRange(format!(
                        "rank {rank} outside 1..={dim}"
                    )));
                }
                Ok(())
            }
            StateSet::Explicit(states) => {
                if states.is_empty() {
                    return Err(Error::Empty("state set is empty".into()));
                }
                states.iter().try_for_each(|s| check_input_dim(s.dim(), channel))
            }
        }
    }

    /// `sup S(ρ)` over the set.
    pub fn max_entropy(&self) -> Result<f64> {
        match self {
            StateSet::All { dim } => Ok((*dim as f64).ln()),
            StateSet::RankAtMost { dim, rank } => Ok((*rank.min(dim) as f64).ln()),
            StateSet::Explicit(states) => states
                .iter()
                .map(von_neumann_entropy)
                .reduce(f64::max)
                .ok_or_else(|| Error::Empty("state set is empty".into())),
        }
    }
}

/// Input distributions searched by the classical–quantum–classical capacities.
#[derive(Debug, Clone, PartialEq)]
pub enum InputDistributions {
    /// Every probability vector of this length.
    All { len: usize },
    Explicit(Vec<Vec<f64>>),
}

impl InputDistributions {
    fn validate(&self, len: usize) -> Result<()> {
        match self {
            InputDistributions::All { len: l } if *l == len => Ok(()),
            InputDistributions::All { len: l } => Err(Error::DimensionMismatch(format!(
                "distributions of length {l} for {len} codewords"
            ))),
            InputDistributions::Explicit(list) => {
                if list.is_empty() {
                    return Err(Error::Empty("no input distributions".into()));
                }
                for p in list {
                    if p.len() != len {
                        return Err(Error::DimensionMismatch(format!(
                            "distribution of length {} for {len} codewords",
                            p.len()
                        )));
                    }
                    check_probability_vector(p)?;
                }
                Ok(())
            }
        }
    }

    /// `sup H(p)` over the set.
    pub fn max_shannon_entropy(&self) -> f64 {
        match self {
            InputDistributions::All { len } => (*len as f64).ln(),
            InputDistributions::Explicit(list) => list
                .iter()
                .map(|p| shannon_entropy(p))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// The input at which a capacity estimate was attained.
#[derive(Debug, Clone, PartialEq)]
pub enum Achiever {
    State(DensityMatrix),
    Ensemble(Ensemble),
    Coded {
        weights: Vec<f64>,
        coding: Vec<DensityMatrix>,
        decoding: ProjectiveMeasurement,
    },
}

/// Best value found by a capacity search; a lower bound on the supremum.
#[derive(Debug, Clone, PartialEq)]
pub struct CapacityEstimate {
    pub value: f64,
    pub achiever: Achiever,
    pub restarts_used: usize,
    pub converged: bool,
    pub evaluations: usize,
}

fn inner_options(opts: &SearchOptions) -> SearchOptions {
    SearchOptions::decomposition_default().with_seed(opts.seed)
}

/// Factor `F` of `ρ = F F† / tr(F F†)`: lower-triangular `d × d` for full
/// rank, general `d × r` when the rank is capped at `r < d`.
struct StateFactor {
    dim: usize,
    rank: usize,
}

impl StateFactor {
    fn param_len(&self) -> usize {
        if self.rank == self.dim {
            optim::lower_triangular_param_len(self.dim)
        } else {
            2 * self.dim * self.rank
        }
    }

    fn factor(&self, x: &[f64]) -> ComplexMatrix {
        if self.rank == self.dim {
            optim::lower_triangular_from_params(x, self.dim)
        } else {
            optim::complex_matrix_from_params(x, self.dim, self.rank)
        }
    }

    fn state(&self, x: &[f64]) -> Option<DensityMatrix> {
        optim::normalized_gram(&self.factor(x)).map(DensityMatrix::from_trusted)
    }

    /// Parameters of the maximally mixed state on the first `rank` basis vectors.
    fn flat_start(&self) -> Vec<f64> {
        let f = DMatrix::from_fn(self.dim, self.rank, |i, j| {
            num_complex::Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)
        });
        if self.rank == self.dim {
            optim::params_for_lower_triangular(&f)
        } else {
            optim::params_for_complex_matrix(&f)
        }
    }
}

/// `C = sup_{ρ ∈ S₀} I(ρ; Γ)`.
///
/// Restart 0 starts from the maximally mixed state (on the first `r` basis
/// vectors for a rank cap `r`); the other restarts are Gaussian factors.
pub fn capacity_quantum(
    channel: &QuantumChannel,
    states: &StateSet,
    opts: &SearchOptions,
) -> Result<CapacityEstimate> {
    states.validate(channel)?;
    let inner = inner_options(opts);
    let (dim, rank) = match states {
        StateSet::Explicit(list) => {
            let mut best: Option<(f64, &DensityMatrix)> = None;
            let mut converged = true;
            let mut evaluations = 0;
            for s in list {
                let m = mutual_entropy_with(s, channel, &inner)?;
                converged &= m.converged;
                evaluations += m.evaluations;
                if best.is_none_or(|(v, _)| m.value > v) {
                    best = Some((m.value, s));
                }
            }
            let (value, state) = best.expect("non-empty");
            return Ok(CapacityEstimate {
                value,
                achiever: Achiever::State(state.clone()),
                restarts_used: list.len(),
                converged,
                evaluations,
            });
        }
        StateSet::All { dim } => (*dim, *dim),
        StateSet::RankAtMost { dim, rank } => (*dim, *rank),
    };
    let factor = StateFactor { dim, rank };
    let n_params = factor.param_len();
    let objective = |x: &[f64]| match factor.state(x) {
        Some(rho) => mutual_entropy_with(&rho, channel, &inner)
            .map(|m| m.value)
            .unwrap_or(f64::NEG_INFINITY),
        None => f64::NEG_INFINITY,
    };
    let outcome = optim::multi_start(
        &objective,
        |r, rng| {
            if r == 0 {
                factor.flat_start()
            } else {
                optim::gaussian_vector(n_params, 1.0, rng)
            }
        },
        opts,
    );
    let state = factor.state(&outcome.x).expect("the winning point is feasible");
    Ok(CapacityEstimate {
        value: outcome.value,
        achiever: Achiever::State(state),
        restarts_used: outcome.restarts_used,
        converged: outcome.converged,
        evaluations: outcome.evaluations,
    })
}

/// `C_p = sup_{ρ ∈ S₀} I_p(ρ; Γ)` with `n_components`-term decompositions.
pub fn capacity_pseudo(
    channel: &QuantumChannel,
    states: &StateSet,
    n_components: usize,
    opts: &SearchOptions,
) -> Result<CapacityEstimate> {
    let quantum = capacity_quantum(channel, states, opts)?;
    capacity_pseudo_from(channel, states, n_components, opts, &quantum)
}

/// Joint ensemble `{λ_k, ρ_k}` whose members live in the range of a common
/// `d × r` matrix `W`: `ρ_k ∝ W C_k C_k† W†`, so the mixture has rank ≤ r.
struct EnsembleFactor {
    dim: usize,
    rank: usize,
    n: usize,
}

impl EnsembleFactor {
    fn param_len(&self) -> usize {
        self.n + 2 * self.dim * self.rank + self.n * 2 * self.rank * self.rank
    }

    fn decode(&self, x: &[f64]) -> (Vec<f64>, Vec<Option<ComplexMatrix>>) {
        let weights = optim::simplex_from_params(&x[..self.n]);
        let w_len = 2 * self.dim * self.rank;
        let w = optim::complex_matrix_from_params(&x[self.n..self.n + w_len], self.dim, self.rank);
        let c_len = 2 * self.rank * self.rank;
        let base = self.n + w_len;
        let states = (0..self.n)
            .map(|k| {
                let c = optim::complex_matrix_from_params(
                    &x[base + k * c_len..base + (k + 1) * c_len],
                    self.rank,
                    self.rank,
                );
                optim::normalized_gram(&(&w * c))
            })
            .collect();
        (weights, states)
    }

    fn value(&self, channel: &QuantumChannel, x: &[f64]) -> f64 {
        let (weights, states) = self.decode(x);
        let mut kept_w = Vec::with_capacity(self.n);
        let mut outputs = Vec::with_capacity(self.n);
        for (w, s) in weights.into_iter().zip(states) {
            if w <= WEIGHT_FLOOR {
                continue;
            }
            match s {
                Some(s) => {
                    kept_w.push(w);
                    outputs.push(channel.apply_operator(&s).expect("dimension checked"));
                }
                None => return f64::NEG_INFINITY,
            }
        }
        chi_of(&kept_w, &outputs).to_f64()
    }

    /// Parameters reproducing the optimal Schatten decomposition of `rho`,
    /// grouping trailing terms when there are fewer than `rank ρ` components.
    fn params_for(&self, rho: &DensityMatrix, decomposition: &mutual::SchattenDecomposition) -> Vec<f64> {
        let eig = rho.eig();
        let w = eig.eigenvectors.columns(0, self.rank).into_owned();
        let mut weights = vec![0.0; self.n];
        let mut cs = vec![DMatrix::zeros(self.rank, self.rank); self.n];
        for (k, (lambda, v)) in decomposition
            .weights()
            .iter()
            .zip(decomposition.vectors())
            .enumerate()
        {
            let slot = k.min(self.n - 1);
            let coords = w.adjoint() * v;
            let scale = if k >= self.n - 1 && decomposition.len() > self.n { lambda.sqrt() } else { 1.0 };
            cs[slot].set_column(k.min(self.rank - 1), &(coords * num_complex::Complex64::new(scale, 0.0)));
            weights[slot] += lambda;
        }
        for (slot, c) in cs.iter_mut().enumerate() {
            if weights[slot] == 0.0 {
                *c = DMatrix::identity(self.rank, self.rank);
            }
        }
        let mut x = optim::simplex_params_for(&weights);
        x.extend(optim::params_for_complex_matrix(&w));
        for c in &cs {
            x.extend(optim::params_for_complex_matrix(c));
        }
        x
    }
}

/// [`capacity_pseudo`] warm-started from an existing quantum-capacity estimate,
/// so the result is never below it when `n_components ≥ rank` of its achiever.
pub fn capacity_pseudo_from(
    channel: &QuantumChannel,
    states: &StateSet,
    n_components: usize,
    opts: &SearchOptions,
    quantum: &CapacityEstimate,
) -> Result<CapacityEstimate> {
    states.validate(channel)?;
    if n_components == 0 {
        return Err(Error::ParameterOutOfRange("n_components must be at least 1".into()));
    }
    let inner = inner_options(opts);
    let (dim, rank) = match states {
        StateSet::Explicit(list) => {
            let mut best: Option<(f64, mutual::PseudoMutualEntropy)> = None;
            let mut converged = true;
            for s in list {
                let p = mutual::pseudo_mutual_entropy_with(s, channel, n_components, &inner, None)?;
                converged &= p.converged;
                if best.as_ref().is_none_or(|(v, _)| p.value > *v) {
                    best = Some((p.value, p));
                }
            }
            let (value, p) = best.expect("non-empty");
            return Ok(CapacityEstimate {
                value,
                achiever: Achiever::Ensemble(Ensemble::new(p.weights, p.components)?),
                restarts_used: list.len(),
                converged,
                evaluations: 0,
            });
        }
        StateSet::All { dim } => (*dim, *dim),
        StateSet::RankAtMost { dim, rank } => (*dim, *rank),
    };
    let layout = EnsembleFactor { dim, rank, n: n_components };
    let warm = match &quantum.achiever {
        Achiever::State(rho) if rho.dim() == dim && rho.eig().rank() <= rank => {
            let m = mutual_entropy_with(rho, channel, &inner)?;
            Some(layout.params_for(rho, &m.decomposition))
        }
        _ => None,
    };
    let n_params = layout.param_len();
    let objective = |x: &[f64]| layout.value(channel, x);
    let outcome = optim::multi_start(
        &objective,
        |r, rng| match (&warm, r) {
            (Some(w), 0) => w.clone(),
            _ => optim::gaussian_vector(n_params, 1.0, rng),
        },
        opts,
    );
    let (weights, comps) = layout.decode(&outcome.x);
    let mut kept_w = Vec::new();
    let mut kept = Vec::new();
    for (w, s) in weights.into_iter().zip(comps) {
        if let (true, Some(s)) = (w > WEIGHT_FLOOR, s) {
            kept_w.push(w);
            kept.push(DensityMatrix::from_trusted(s));
        }
    }
    let total: f64 = kept_w.iter().sum();
    let kept_w = kept_w.into_iter().map(|w| w / total).collect();
    Ok(CapacityEstimate {
        value: outcome.value,
        achiever: Achiever::Ensemble(Ensemble::new(kept_w, kept)?),
        restarts_used: outcome.restarts_used,
        converged: outcome.converged,
        evaluations: outcome.evaluations,
    })
}

/// Best weights for a fixed classical channel `q`.
fn best_weights(
    q: &DMatrix<f64>,
    inputs: &InputDistributions,
    opts: &SearchOptions,
) -> (f64, Vec<f64>, optim::SearchOutcome) {
    let n = q.ncols();
    match inputs {
        InputDistributions::All { .. } => {
            let objective = |x: &[f64]| classical_mutual_information(&optim::simplex_from_params(x), q);
            let outcome = optim::multi_start(
                &objective,
                |r, rng| {
                    if r == 0 {
                        vec![1.0; n]
                    } else {
                        optim::gaussian_vector(n, 1.0, rng)
                    }
                },
                opts,
            );
            (outcome.value, optim::simplex_from_params(&outcome.x), outcome)
        }
        InputDistributions::Explicit(list) => {
            let (value, w) = list
                .iter()
                .map(|p| (classical_mutual_information(p, q), p))
                .fold((f64::NEG_INFINITY, &list[0]), |best, c| if c.0 > best.0 { c } else { best });
            let outcome = optim::SearchOutcome {
                x: Vec::new(),
                value,
                best_restart: 0,
                restarts_used: list.len(),
                converged: true,
                evaluations: list.len(),
            };
            (value, w.clone(), outcome)
        }
    }
}

/// `C = sup_p I(p; decoding ∘ Γ ∘ coding)` for a fixed coding and decoding.
pub fn capacity_cqc(
    inputs: &InputDistributions,
    coding: &[DensityMatrix],
    channel: &QuantumChannel,
    decoding: &ProjectiveMeasurement,
    opts: &SearchOptions,
) -> Result<CapacityEstimate> {
    let q = transition_matrix(coding, channel, decoding)?;
    inputs.validate(coding.len())?;
    let (value, weights, outcome) = best_weights(&q, inputs, opts);
    Ok(CapacityEstimate {
        value,
        achiever: Achiever::Coded {
            weights,
            coding: coding.to_vec(),
            decoding: decoding.clone(),
        },
        restarts_used: outcome.restarts_used,
        converged: outcome.converged,
        evaluations: outcome.evaluations,
    })
}

/// Codings with a fixed number of pure codewords, optionally seeded with
/// starting codings tried before the random restarts.
#[derive(Debug, Clone, PartialEq)]
pub struct CodingFamily {
    pub codewords: usize,
    pub warm_starts: Vec<Vec<ComplexVector>>,
}

impl CodingFamily {
    pub fn pure(codewords: usize) -> Self {
        Self {
            codewords,
            warm_starts: Vec::new(),
        }
    }

    pub fn with_warm_start(mut self, codewords: Vec<ComplexVector>) -> Self {
        self.warm_starts.push(codewords);
        self
    }
}

/// Rank-one projective decodings in a rotated basis, optionally seeded with
/// starting bases (unitaries whose columns are the basis vectors).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DecodingFamily {
    pub warm_starts: Vec<ComplexMatrix>,
}

impl DecodingFamily {
    pub fn rank_one() -> Self {
        Self::default()
    }

    pub fn with_warm_start(mut self, basis: ComplexMatrix) -> Self {
        self.warm_starts.push(basis);
        self
    }
}

/// How a coded search reads its parameter vector.
struct CodedLayout<'a> {
    channel: &'a QuantumChannel,
    codewords: usize,
    /// Fixed coding outputs `Γ(σ_k)` when the coding is not searched.
    fixed_outputs: Option<Vec<ComplexMatrix>>,
    /// Fixed decoding when the decoding is not searched.
    fixed_decoding: Option<&'a ProjectiveMeasurement>,
}

impl CodedLayout<'_> {
    fn coding_len(&self) -> usize {
        if self.fixed_outputs.is_some() {
            0
        } else {
            2 * self.channel.dim_in() * self.codewords
        }
    }

    fn decoding_len(&self) -> usize {
        if self.fixed_decoding.is_some() {
            0
        } else {
            2 * self.channel.dim_out() * self.channel.dim_out()
        }
    }

    fn param_len(&self) -> usize {
        self.coding_len() + self.decoding_len()
    }

    fn codewords_from(&self, x: &[f64]) -> Option<Vec<ComplexVector>> {
        let d = self.channel.dim_in();
        (0..self.codewords)
            .map(|k| {
                let v = optim::complex_vector_from_params(&x[2 * d * k..2 * d * (k + 1)]);
                let n = v.norm();
                (n > 0.0 && n.is_finite()).then(|| v.unscale(n))
            })
            .collect()
    }

    fn basis_from(&self, x: &[f64]) -> ComplexMatrix {
        let d = self.channel.dim_out();
        orthonormalize_columns(optim::complex_matrix_from_params(x, d, d))
    }

    fn transition(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let (cx, dx) = x.split_at(self.coding_len());
        let outputs = match &self.fixed_outputs {
            Some(o) => o.clone(),
            None => self
                .codewords_from(cx)?
                .iter()
                .map(|v| self.channel.apply_operator(&outer(v)).expect("dimension checked"))
                .collect(),
        };
        Some(match self.fixed_decoding {
            Some(e) => outcome_matrix(&outputs, e),
            None => basis_outcome_matrix(&outputs, &self.basis_from(dx)),
        })
    }

    fn params(&self, codewords: Option<&[ComplexVector]>, basis: Option<&ComplexMatrix>) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.param_len());
        if let Some(c) = codewords {
            for v in c {
                x.extend(optim::params_for_complex_vector(v));
            }
        }
        if let Some(b) = basis {
            x.extend(optim::params_for_complex_matrix(b));
        }
        x
    }

    fn achiever(&self, weights: Vec<f64>, x: &[f64], coding: Option<&[DensityMatrix]>) -> Result<Achiever> {
        let (cx, dx) = x.split_at(self.coding_len());
        let coding = match coding {
            Some(c) => c.to_vec(),
            None => self
                .codewords_from(cx)
                .ok_or_else(|| Error::InvalidDecomposition("zero codeword".into()))?
                .iter()
                .map(DensityMatrix::from_pure)
                .collect::<Result<_>>()?,
        };
        let decoding = match self.fixed_decoding {
            Some(e) => e.clone(),
            None => ProjectiveMeasurement::from_basis(&self.basis_from(dx))?,
        };
        Ok(Achiever::Coded { weights, coding, decoding })
    }
}

/// Maximizes over weights and the free parameters of `layout`.
///
/// The first restarts start from `warm` (parameter vectors for the coding
/// and decoding part), each paired with its best weights; the rest are random.
fn coded_search(
    layout: &CodedLayout,
    inputs: &InputDistributions,
    warm: &[Vec<f64>],
    opts: &SearchOptions,
) -> (f64, Vec<f64>, Vec<f64>, optim::SearchOutcome) {
    let n = layout.codewords;
    let p_len = layout.param_len();
    let mi = |w: &[f64], x: &[f64]| match layout.transition(x) {
        Some(q) => classical_mutual_information(w, &q),
        None => f64::NEG_INFINITY,
    };
    match inputs {
        InputDistributions::All { .. } => {
            let warm_full: Vec<Vec<f64>> = warm
                .iter()
                .map(|p| {
                    let weights = match layout.transition(p) {
                        Some(q) => best_weights(&q, inputs, opts).1,
                        None => vec![1.0 / n as f64; n],
                    };
                    let mut x = optim::simplex_params_for(&weights);
                    x.extend_from_slice(p);
                    x
                })
                .collect();
            let objective = |x: &[f64]| mi(&optim::simplex_from_params(&x[..n]), &x[n..]);
            let outcome = optim::multi_start(
                &objective,
                |r, rng| match warm_full.get(r) {
                    Some(x) => x.clone(),
                    None => optim::gaussian_vector(n + p_len, 1.0, rng),
                },
                opts,
            );
            let weights = optim::simplex_from_params(&outcome.x[..n]);
            let params = outcome.x[n..].to_vec();
            (outcome.value, weights, params, outcome)
        }
        InputDistributions::Explicit(list) => {
            let mut best: Option<(f64, Vec<f64>, optim::SearchOutcome)> = None;
            let mut restarts = 0;
            let mut evaluations = 0;
            for w in list {
                let objective = |x: &[f64]| mi(w, x);
                let outcome = optim::multi_start(
                    &objective,
                    |r, rng| match warm.get(r) {
                        Some(x) => x.clone(),
                        None => optim::gaussian_vector(p_len, 1.0, rng),
                    },
                    opts,
                );
                restarts += outcome.restarts_used;
                evaluations += outcome.evaluations;
                if best.as_ref().is_none_or(|(v, _, _)| outcome.value > *v) {
                    best = Some((outcome.value, w.clone(), outcome));
                }
            }
            let (value, weights, mut outcome) = best.expect("non-empty");
            outcome.restarts_used = restarts;
            outcome.evaluations = evaluations;
            let params = outcome.x.clone();
            (value, weights, params, outcome)
        }
    }
}

fn estimate(value: f64, achiever: Achiever, outcome: &optim::SearchOutcome) -> CapacityEstimate {
    CapacityEstimate {
        value,
        achiever,
        restarts_used: outcome.restarts_used,
        converged: outcome.converged,
        evaluations: outcome.evaluations,
    }
}

fn check_codewords(family: &CodingFamily, channel: &QuantumChannel) -> Result<()> {
    if family.codewords == 0 {
        return Err(Error::ParameterOutOfRange("at least one codeword".into()));
    }
    for start in &family.warm_starts {
        if start.len() != family.codewords || start.iter().any(|v| v.len() != channel.dim_in()) {
            return Err(Error::DimensionMismatch("warm-start coding has the wrong shape".into()));
        }
    }
    Ok(())
}

fn check_bases(family: &DecodingFamily, channel: &QuantumChannel) -> Result<()> {
    let d = channel.dim_out();
    if family.warm_starts.iter().any(|b| b.shape() != (d, d)) {
        return Err(Error::DimensionMismatch("warm-start basis has the wrong shape".into()));
    }
    Ok(())
}

/// `C_c`: the coding is free within `family`, the decoding is fixed.
pub fn capacity_coding_free(
    channel: &QuantumChannel,
    decoding: &ProjectiveMeasurement,
    family: &CodingFamily,
    inputs: &InputDistributions,
    opts: &SearchOptions,
) -> Result<CapacityEstimate> {
    check_codewords(family, channel)?;
    inputs.validate(family.codewords)?;
    if decoding.dim() != channel.dim_out() {
        return Err(Error::DimensionMismatch("decoding dimension".into()));
    }
    let layout = CodedLayout {
        channel,
        codewords: family.codewords,
        fixed_outputs: None,
        fixed_decoding: Some(decoding),
    };
    let warm: Vec<Vec<f64>> = family.warm_starts.iter().map(|c| layout.params(Some(c), None)).collect();
    let (value, weights, params, outcome) = coded_search(&layout, inputs, &warm, opts);
    Ok(estimate(value, layout.achiever(weights, &params, None)?, &outcome))
}

/// `C_d`: the coding is fixed, the decoding is free within `family`.
pub fn capacity_decoding_free(
    channel: &QuantumChannel,
    coding: &[DensityMatrix],
    family: &DecodingFamily,
    inputs: &InputDistributions,
    opts: &SearchOptions,
) -> Result<CapacityEstimate> {
    if coding.is_empty() {
        return Err(Error::Empty("coding has no codewords".into()));
    }
    coding.iter().try_for_each(|s| check_input_dim(s.dim(), channel))?;
    check_bases(family, channel)?;
    inputs.validate(coding.len())?;
    let outputs = coding
        .iter()
        .map(|s| channel.apply_operator(s.matrix()))
        .collect::<Result<Vec<_>>>()?;
    let layout = CodedLayout {
        channel,
        codewords: coding.len(),
        fixed_outputs: Some(outputs),
        fixed_decoding: None,
    };
    let warm: Vec<Vec<f64>> = family.warm_starts.iter().map(|b| layout.params(None, Some(b))).collect();
    let (value, weights, params, outcome) = coded_search(&layout, inputs, &warm, opts);
    Ok(estimate(value, layout.achiever(weights, &params, Some(coding))?, &outcome))
}

/// `C_cd`: coding and decoding both free. Warm starts pair the `i`-th
/// coding with the `i`-th basis of the two families.
pub fn capacity_coding_decoding_free(
    channel: &QuantumChannel,
    coding_family: &CodingFamily,
    decoding_family: &DecodingFamily,
    inputs: &InputDistributions,
    opts: &SearchOptions,
) -> Result<CapacityEstimate> {
    check_codewords(coding_family, channel)?;
    check_bases(decoding_family, channel)?;
    inputs.validate(coding_family.codewords)?;
    let layout = CodedLayout {
        channel,
        codewords: coding_family.codewords,
        fixed_outputs: None,
        fixed_decoding: None,
    };
    let warm: Vec<Vec<f64>> = coding_family
        .warm_starts
        .iter()
        .zip(&decoding_family.warm_starts)
        .map(|(c, b)| layout.params(Some(c), Some(b)))
        .collect();
    let (value, weights, params, outcome) = coded_search(&layout, inputs, &warm, opts);
    Ok(estimate(value, layout.achiever(weights, &params, None)?, &outcome))
}

/// Basis refining a projective measurement into rank-one projectors.
pub fn rank_one_refinement(measurement: &ProjectiveMeasurement) -> ComplexMatrix {
    let d = measurement.dim();
    let mut basis = DMatrix::zeros(d, d);
    let mut col = 0;
    for p in measurement.projectors() {
        let eig = hermitian_eig(p);
        for j in 0..d {
            if eig.eigenvalues[j] > 0.5 && col < d {
                basis.set_column(col, &eig.eigenvectors.column(j));
                col += 1;
            }
        }
    }
    basis
}

/// Pure codewords doing at least as well as `coding` at `weights`: each
/// codeword in turn is replaced by its best eigenvector. The mutual
/// information is convex in each column of the induced channel, so no step
/// loses information.
pub fn pure_refinement(
    weights: &[f64],
    coding: &[DensityMatrix],
    channel: &QuantumChannel,
    decoding: &ProjectiveMeasurement,
) -> Result<Vec<ComplexVector>> {
    let mut q = transition_matrix(coding, channel, decoding)?;
    let mut out = Vec::with_capacity(coding.len());
    for (k, s) in coding.iter().enumerate() {
        let eig = s.eig();
        let mut best: Option<(f64, ComplexVector, Vec<f64>)> = None;
        for j in 0..eig.dim() {
            if eig.eigenvalues[j] <= 0.0 && best.is_some() {
                continue;
            }
            let v = eig.vector(j);
            let col = decoding.outcome_weights(&channel.apply_operator(&outer(&v))?);
            let mut trial = q.clone();
            for (i, c) in col.iter().enumerate() {
                trial[(i, k)] = c.max(0.0);
            }
            let value = classical_mutual_information(weights, &trial);
            if best.as_ref().is_none_or(|(b, _, _)| value > *b) {
                best = Some((value, v, col));
            }
        }
        let (_, v, col) = best.expect("at least one eigenvector");
        for (i, c) in col.iter().enumerate() {
            q[(i, k)] = c.max(0.0);
        }
        out.push(v);
    }
    Ok(out)
}

/// All four classical–quantum–classical capacities, each free search
/// warm-started from the achievers of the searches below it so the chain
/// `C ≤ C_c, C_d ≤ C_cd` holds by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CqcChain {
    pub fixed: CapacityEstimate,
    pub coding_free: CapacityEstimate,
    pub decoding_free: CapacityEstimate,
    pub coding_decoding_free: CapacityEstimate,
    /// `sup H(p)` over the input distributions.
    pub shannon_bound: f64,
    pub chain_ok: bool,
}

fn coded_parts(a: &Achiever) -> (&[f64], &[DensityMatrix], &ProjectiveMeasurement) {
    match a {
        Achiever::Coded { weights, coding, decoding } => (weights, coding, decoding),
        _ => unreachable!("coded searches return coded achievers"),
    }
}

pub fn cqc_chain(
    inputs: &InputDistributions,
    coding: &[DensityMatrix],
    channel: &QuantumChannel,
    decoding: &ProjectiveMeasurement,
    opts: &SearchOptions,
) -> Result<CqcChain> {
    let fixed = capacity_cqc(inputs, coding, channel, decoding, opts)?;
    let (w0, _, _) = coded_parts(&fixed.achiever);
    let refined_basis = rank_one_refinement(decoding);
    let pure = pure_refinement(w0, coding, channel, decoding)?;

    let coding_free = capacity_coding_free(
        channel,
        decoding,
        &CodingFamily::pure(coding.len()).with_warm_start(pure),
        inputs,
        opts,
    )?;
    let decoding_free = capacity_decoding_free(
        channel,
        coding,
        &DecodingFamily::rank_one().with_warm_start(refined_basis.clone()),
        inputs,
        opts,
    )?;

    let (wc, cc, _) = coded_parts(&coding_free.achiever);
    let c_vectors = pure_refinement(wc, cc, channel, decoding)?;
    let (wd, _, ed) = coded_parts(&decoding_free.achiever);
    let d_vectors = pure_refinement(wd, coding, channel, ed)?;
    let d_basis = rank_one_refinement(ed);
    let coding_decoding_free = capacity_coding_decoding_free(
        channel,
        &CodingFamily::pure(coding.len())
            .with_warm_start(c_vectors)
            .with_warm_start(d_vectors),
        &DecodingFamily::rank_one()
            .with_warm_start(refined_basis)
            .with_warm_start(d_basis),
        inputs,
        opts,
    )?;
    let shannon_bound = inputs.max_shannon_entropy();
    let t = CAPACITY_CHAIN_TOL;
    let chain_ok = fixed.value >= -t
        && fixed.value <= coding_free.value + t
        && fixed.value <= decoding_free.value + t
        && coding_free.value <= coding_decoding_free.value + t
        && decoding_free.value <= coding_decoding_free.value + t
        && coding_decoding_free.value <= shannon_bound + t;
    Ok(CqcChain {
        fixed,
        coding_free,
        decoding_free,
        coding_decoding_free,
        shannon_bound,
        chain_ok,
    })
}

/// `C ≤ C_p ≤ sup S` on one state set.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumChain {
    pub quantum: CapacityEstimate,
    pub pseudo: CapacityEstimate,
    pub max_entropy: f64,
    pub chain_ok: bool,
}

pub fn quantum_chain(
    channel: &QuantumChannel,
    states: &StateSet,
    n_components: usize,
    opts: &SearchOptions,
) -> Result<QuantumChain> {
    let quantum = capacity_quantum(channel, states, opts)?;
    let pseudo = capacity_pseudo_from(channel, states, n_components, opts, &quantum)?;
    let max_entropy = states.max_entropy()?;
    let t = CAPACITY_CHAIN_TOL;
    let chain_ok = quantum.value >= -t
        && quantum.value <= pseudo.value + t
        && pseudo.value <= max_entropy + t;
    Ok(QuantumChain {
        quantum,
        pseudo,
        max_entropy,
        chain_ok,
    })
}

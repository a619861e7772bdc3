//! Derivative-free maximization: compass (pattern) search with seeded,
//! independent restarts, plus the smooth parameterizations the searches
//! run over (unitaries, probability simplices, density matrices, pure states).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::linalg::{eig_hermitian, ComplexMatrix, ComplexVector};

/// Seed used when the caller does not supply one.
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    /// Number of independent starting points.
    pub restarts: usize,
    /// Poll sweeps allowed per restart.
    pub max_iterations: usize,
    /// A sweep improving the objective by less than this refines the step.
    pub tolerance: f64,
    pub initial_step: f64,
    /// The search has converged once the step falls below this.
    pub min_step: f64,
    pub seed: u64,
}

impl SearchOptions {
    /// Inner sup over Schatten decompositions of a degenerate state.
    pub fn decomposition_default() -> Self {
        Self {
            restarts: 8,
            max_iterations: 500,
            tolerance: 1e-9,
            initial_step: 0.5,
            min_step: 1e-6,
            seed: DEFAULT_SEED,
        }
    }

    /// Outer capacity maximizations.
    pub fn capacity_default() -> Self {
        Self {
            restarts: 16,
            max_iterations: 2000,
            tolerance: 1e-7,
            initial_step: 0.5,
            min_step: 1e-6,
            seed: DEFAULT_SEED,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }
}

/// Result of one local search.
#[derive(Debug, Clone)]
pub struct LocalResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Best result over all restarts.
#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    /// Index of the restart that produced `x`.
    pub best_restart: usize,
    pub restarts_used: usize,
    /// Whether the winning restart met the step criterion.
    pub converged: bool,
    pub evaluations: usize,
}

/// RNG for restart `index`; depends only on `(seed, index)`.
pub fn restart_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Maximizes `f` from `x0` by compass search.
///
/// Each sweep polls `±step` along every coordinate and moves greedily on any
/// increase. A sweep whose total gain is below `tolerance` halves the step.
/// NaN objective values are never accepted.
pub fn compass_search<F>(f: &F, x0: Vec<f64>, opts: &SearchOptions) -> LocalResult
where
    F: Fn(&[f64]) -> f64 + ?Sized,
{
    let mut x = x0;
    let mut fx = f(&x);
    let mut evaluations = 1;
    let mut step = opts.initial_step;
    let mut converged = x.is_empty();
    let mut iterations = 0;
    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let start = fx;
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                let old = x[i];
                x[i] = old + dir * step;
                let fy = f(&x);
                evaluations += 1;
                if fy > fx || (fx.is_nan() && !fy.is_nan()) {
                    fx = fy;
                    break;
                }
                x[i] = old;
            }
        }
        if !(fx - start >= opts.tolerance) {
            step *= 0.5;
            if step < opts.min_step {
                converged = true;
            }
        }
    }
    LocalResult {
        x,
        value: fx,
        iterations,
        evaluations,
        converged,
    }
}

/// Runs `opts.restarts` compass searches and keeps the best.
///
/// `start(index, rng)` supplies the starting point of each restart. Restarts
/// run in parallel; ties go to the lowest index, so the outcome depends only
/// on the seed and the restart count.
pub fn multi_start<F, S>(f: &F, start: S, opts: &SearchOptions) -> SearchOutcome
where
    F: Fn(&[f64]) -> f64 + Sync + ?Sized,
    S: Fn(usize, &mut ChaCha8Rng) -> Vec<f64> + Sync,
{
    let restarts = opts.restarts.max(1);
    let results: Vec<LocalResult> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = restart_rng(opts.seed, r);
            compass_search(f, start(r, &mut rng), opts)
        })
        .collect();
    let evaluations = results.iter().map(|r| r.evaluations).sum();
    let mut best = 0;
    for (i, r) in results.iter().enumerate().skip(1) {
        if r.value > results[best].value || (results[best].value.is_nan() && !r.value.is_nan()) {
            best = i;
        }
    }
    let winner = &results[best];
    SearchOutcome {
        x: winner.x.clone(),
        value: winner.value,
        best_restart: best,
        restarts_used: restarts,
        converged: winner.converged,
        evaluations,
    }
}

/// Standard normal samples, used for random starting points.
pub fn gaussian_vector(len: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect()
}

/// Number of real parameters of an `m × m` unitary.
pub fn unitary_param_len(m: usize) -> usize {
    m * m
}

/// Hermitian `H` from `m²` reals: diagonal first, then (re, im) of each
/// upper-triangular entry in row order.
pub fn hermitian_from_params(params: &[f64], m: usize) -> ComplexMatrix {
    assert_eq!(params.len(), m * m);
    let mut h = DMatrix::zeros(m, m);
    for i in 0..m {
        h[(i, i)] = Complex64::new(params[i], 0.0);
    }
    let mut k = m;
    for i in 0..m {
        for j in (i + 1)..m {
            let z = Complex64::new(params[k], params[k + 1]);
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
            k += 2;
        }
    }
    h
}

/// `exp(iH)` for `H` built by [`hermitian_from_params`]; zero gives `I`.
pub fn unitary_from_params(params: &[f64], m: usize) -> ComplexMatrix {
    if params.iter().all(|&x| x == 0.0) {
        return DMatrix::identity(m, m);
    }
    let eig = eig_hermitian(&hermitian_from_params(params, m)).expect("Hermitian by construction");
    let mut scaled = eig.eigenvectors.clone();
    for j in 0..m {
        let phase = Complex64::from_polar(1.0, eig.eigenvalues[j]);
        for i in 0..m {
            scaled[(i, j)] *= phase;
        }
    }
    scaled * eig.eigenvectors.adjoint()
}

/// Probability vector `w_i = x_i² / Σ x_j²`; uniform when all `x` vanish.
pub fn simplex_from_params(params: &[f64]) -> Vec<f64> {
    let total: f64 = params.iter().map(|x| x * x).sum();
    if !(total > 0.0) || !total.is_finite() {
        let n = params.len() as f64;
        return vec![1.0 / n; params.len()];
    }
    params.iter().map(|x| x * x / total).collect()
}

/// Parameters reproducing `weights` through [`simplex_from_params`].
pub fn simplex_params_for(weights: &[f64]) -> Vec<f64> {
    weights.iter().map(|w| w.max(0.0).sqrt()).collect()
}

/// Complex vector from interleaved `(re, im)` pairs.
pub fn complex_vector_from_params(params: &[f64]) -> ComplexVector {
    let n = params.len() / 2;
    DVector::from_fn(n, |i, _| Complex64::new(params[2 * i], params[2 * i + 1]))
}

pub fn params_for_complex_vector(v: &ComplexVector) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// Complex matrix (column-major) from interleaved `(re, im)` pairs.
pub fn complex_matrix_from_params(params: &[f64], rows: usize, cols: usize) -> ComplexMatrix {
    assert_eq!(params.len(), 2 * rows * cols);
    DMatrix::from_fn(rows, cols, |i, j| {
        let k = 2 * (j * rows + i);
        Complex64::new(params[k], params[k + 1])
    })
}

pub fn params_for_complex_matrix(m: &ComplexMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * m.len());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out.push(m[(i, j)].re);
            out.push(m[(i, j)].im);
        }
    }
    out
}

/// Number of reals in a lower-triangular complex `d × d` factor.
pub fn lower_triangular_param_len(d: usize) -> usize {
    d * (d + 1)
}

/// Lower-triangular factor, entries in row order as `(re, im)` pairs.
pub fn lower_triangular_from_params(params: &[f64], d: usize) -> ComplexMatrix {
    assert_eq!(params.len(), lower_triangular_param_len(d));
    let mut l = DMatrix::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        for j in 0..=i {
            l[(i, j)] = Complex64::new(params[k], params[k + 1]);
            k += 2;
        }
    }
    l
}

pub fn params_for_lower_triangular(l: &ComplexMatrix) -> Vec<f64> {
    let d = l.nrows();
    let mut out = Vec::with_capacity(lower_triangular_param_len(d));
    for i in 0..d {
        for j in 0..=i {
            out.push(l[(i, j)].re);
            out.push(l[(i, j)].im);
        }
    }
    out
}

/// `L L† / tr(L L†)`, or `None` when `L = 0`.
pub fn normalized_gram(l: &ComplexMatrix) -> Option<ComplexMatrix> {
    let m = l * l.adjoint();
    let t = m.trace().re;
    if !(t > 0.0) || !t.is_finite() {
        return None;
    }
    Some(m.unscale(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{identity, max_abs};

    #[test]
    fn compass_finds_quadratic_maximum() {
        let f = |x: &[f64]| -(x[0] - 1.0).powi(2) - 2.0 * (x[1] + 0.5).powi(2);
        let r = compass_search(&f, vec![0.0, 0.0], &SearchOptions::decomposition_default());
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] + 0.5).abs() < 1e-4);
        assert!(r.value > -1e-8);
    }

    #[test]
    fn multi_start_is_deterministic_and_monotone_in_restarts() {
        // many local maxima
        let f = |x: &[f64]| (3.0 * x[0]).sin() * (2.0 * x[1]).cos() - 0.05 * (x[0] * x[0] + x[1] * x[1]);
        let start = |_: usize, rng: &mut ChaCha8Rng| gaussian_vector(2, 2.0, rng);
        let opts = SearchOptions::decomposition_default();
        let a = multi_start(&f, start, &opts);
        let b = multi_start(&f, start, &opts);
        assert_eq!(a.x, b.x);
        assert_eq!(a.value, b.value);
        let mut prev = f64::NEG_INFINITY;
        for n in 1..10 {
            let r = multi_start(&f, start, &opts.with_restarts(n));
            assert!(r.value >= prev);
            prev = r.value;
        }
    }

    #[test]
    fn unitary_parameterization() {
        let u = unitary_from_params(&[0.3, -1.2, 0.7, 0.1, 2.0, -0.4, 0.9, 0.5, -0.8], 3);
        assert!(max_abs(&(u.adjoint() * &u - identity(3))) < 1e-13);
        assert_eq!(unitary_from_params(&[0.0; 4], 2), identity(2));
    }

    #[test]
    fn simplex_and_roundtrips() {
        let w = simplex_from_params(&[1.0, -1.0, 2.0]);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((w[2] - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(simplex_from_params(&[0.0, 0.0]), vec![0.5, 0.5]);
        let back = simplex_from_params(&simplex_params_for(&[0.2, 0.8]));
        assert!((back[0] - 0.2).abs() < 1e-15);

        let l = lower_triangular_from_params(&(0..6).map(|x| x as f64).collect::<Vec<_>>(), 2);
        assert_eq!(l[(0, 1)], Complex64::new(0.0, 0.0));
        assert_eq!(params_for_lower_triangular(&l), (0..6).map(|x| x as f64).collect::<Vec<_>>());
        let m = complex_matrix_from_params(&(0..8).map(|x| x as f64).collect::<Vec<_>>(), 2, 2);
        assert_eq!(params_for_complex_matrix(&m), (0..8).map(|x| x as f64).collect::<Vec<_>>());
        assert!(normalized_gram(&DMatrix::zeros(2, 2)).is_none());
    }
}

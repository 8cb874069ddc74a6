//! Shared test oracles, all independent of the library's solver paths:
//! finite differences, exhaustive active-set simplex projection, and a
//! multiplicative-update KL-NMF reference.

#![allow(dead_code)]

use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sicnmf::{objective, Collection, Divergence, FactorModel, Mode, SourceMatrix};

/// Central finite differences of the weighted objective with respect to
/// every entry of `W`, each `H_v`, and each `b_v`.
pub fn fd_block_gradients(
    c: &Collection,
    m: &FactorModel,
    step: f64,
) -> (Array2<f64>, Vec<Array2<f64>>, Vec<Array1<f64>>) {
    let eval = |m: &FactorModel| objective(c, m).expect("objective must evaluate");

    let mut grad_w = Array2::zeros(m.w.dim());
    for idx in 0..m.w.len() {
        let (r, cidx) = (idx / m.w.ncols(), idx % m.w.ncols());
        let mut plus = m.clone();
        plus.w[[r, cidx]] += step;
        let mut minus = m.clone();
        minus.w[[r, cidx]] -= step;
        grad_w[[r, cidx]] = (eval(&plus) - eval(&minus)) / (2.0 * step);
    }

    let mut grad_h = Vec::new();
    let mut grad_b = Vec::new();
    for v in 0..m.n_sources() {
        let mut gh = Array2::zeros(m.h[v].dim());
        for idx in 0..m.h[v].len() {
            let (r, cidx) = (idx / m.h[v].ncols(), idx % m.h[v].ncols());
            let mut plus = m.clone();
            plus.h[v][[r, cidx]] += step;
            let mut minus = m.clone();
            minus.h[v][[r, cidx]] -= step;
            gh[[r, cidx]] = (eval(&plus) - eval(&minus)) / (2.0 * step);
        }
        grad_h.push(gh);

        let mut gb = Array1::zeros(m.b[v].len());
        for j in 0..m.b[v].len() {
            let mut plus = m.clone();
            plus.b[v][j] += step;
            let mut minus = m.clone();
            minus.b[v][j] -= step;
            gb[j] = (eval(&plus) - eval(&minus)) / (2.0 * step);
        }
        grad_b.push(gb);
    }
    (grad_w, grad_h, grad_b)
}

/// Exhaustive active-set projection onto `{y >= 0, sum y = radius}`: every
/// nonempty support set yields a closed-form equality-constrained candidate;
/// the feasible candidate closest to `x` wins.
pub fn simplex_oracle(x: &[f64], radius: f64) -> Vec<f64> {
    let d = x.len();
    assert!(d >= 1 && d <= 20);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << d) {
        let support: Vec<usize> = (0..d).filter(|i| mask & (1 << i) != 0).collect();
        let sum: f64 = support.iter().map(|&i| x[i]).sum();
        let tau = (sum - radius) / support.len() as f64;
        let mut candidate = vec![0.0; d];
        let mut feasible = true;
        for &i in &support {
            let y = x[i] - tau;
            if y < -1e-12 {
                feasible = false;
                break;
            }
            candidate[i] = y.max(0.0);
        }
        if !feasible {
            continue;
        }
        let dist: f64 = candidate
            .iter()
            .zip(x)
            .map(|(y, xi)| (y - xi) * (y - xi))
            .sum();
        if best.as_ref().map_or(true, |(b, _)| dist < *b) {
            best = Some((dist, candidate));
        }
    }
    best.expect("the full support is always feasible").1
}

/// Multiplicative-update KL-NMF (no bias) on `X ≈ W Hᵀ`, run from a given
/// initialization for a fixed iteration count. Returns the final
/// generalized KL objective.
pub fn kl_nmf_multiplicative(
    x: &Array2<f64>,
    w0: &Array2<f64>,
    h0: &Array2<f64>,
    iterations: usize,
    eps: f64,
) -> f64 {
    let mut w = w0.mapv(|v| v.max(eps));
    let mut h = h0.mapv(|v| v.max(eps));

    for _ in 0..iterations {
        // W update
        let est = w.dot(&h.t()).mapv(|v| v.max(eps));
        let ratio = x / &est;
        let numer = ratio.dot(&h);
        let col_sums_h = h.sum_axis(ndarray::Axis(0));
        for ((i, k), w_ik) in w.indexed_iter_mut() {
            *w_ik *= numer[[i, k]] / col_sums_h[k].max(eps);
        }

        // H update
        let est = w.dot(&h.t()).mapv(|v| v.max(eps));
        let ratio = x / &est;
        let numer = ratio.t().dot(&w);
        let col_sums_w = w.sum_axis(ndarray::Axis(0));
        for ((j, k), h_jk) in h.indexed_iter_mut() {
            *h_jk *= numer[[j, k]] / col_sums_w[k].max(eps);
        }
    }

    let est = w.dot(&h.t()).mapv(|v| v.max(eps));
    let mut obj = 0.0;
    for (xi, yi) in x.iter().zip(est.iter()) {
        obj += yi - xi;
        if *xi > 0.0 {
            obj += xi * (xi / yi).ln();
        }
    }
    obj
}

/// Builds a dense collection from explicit matrices (every cell stored).
pub fn dense_collection(matrices: Vec<(Array2<f64>, Divergence)>) -> Collection {
    let n = matrices[0].0.nrows();
    let patients: Arc<Vec<String>> = Arc::new((0..n).map(|i| format!("p{i}")).collect());
    let sources = matrices
        .into_iter()
        .enumerate()
        .map(|(v, (x, divergence))| {
            assert_eq!(x.nrows(), n);
            SourceMatrix {
                name: format!("s{v}"),
                n_rows: n,
                n_cols: x.ncols(),
                entries: x.indexed_iter().map(|((r, c), &val)| (r, c, val)).collect(),
                divergence,
                col_labels: (0..x.ncols()).map(|j| format!("s{v}e{j}")).collect(),
                row_labels: Arc::clone(&patients),
            }
        })
        .collect();
    Collection {
        sources,
        n_patients: n,
        patient_labels: patients,
    }
}

/// Uniform random matrix in `[lo, hi)` from a seeded stream.
pub fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(lo..hi))
}

pub fn uniform_vector(rng: &mut ChaCha8Rng, len: usize, lo: f64, hi: f64) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || rng.random_range(lo..hi))
}

/// A random model with entries in `[lo, hi)`, matching a collection's shapes.
pub fn random_model(
    rng: &mut ChaCha8Rng,
    c: &Collection,
    rank: usize,
    lo: f64,
    hi: f64,
    bias_lo: f64,
    bias_hi: f64,
) -> FactorModel {
    FactorModel {
        w: uniform_matrix(rng, c.n_patients, rank, lo, hi),
        h: c.sources
            .iter()
            .map(|s| uniform_matrix(rng, s.n_cols, rank, lo, hi))
            .collect(),
        b: c.sources
            .iter()
            .map(|s| uniform_vector(rng, s.n_cols, bias_lo, bias_hi))
            .collect(),
        alpha: vec![1.0; c.n_sources()],
        eta: f64::INFINITY,
        rank,
        mode: Mode::Cnmf,
        objective_trace: vec![],
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

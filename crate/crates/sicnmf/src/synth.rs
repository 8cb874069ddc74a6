//! Planted-model synthetic collections and factor-recovery scoring.
//!
//! The generator draws sparse simplex factor columns, uniform loadings and
//! biases, forms the rate matrices `Λ_v = W H_vᵀ + 1 b_vᵀ`, and emits
//! observations under a chosen noise model. Count noise is Poisson, whose
//! negative log-likelihood is the generalized KL divergence, so fits of the
//! matching mode should recover the planted factors.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::seq::index::sample;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::error::{Error, Result};
use crate::model::{Collection, Divergence, FactorModel, Mode, SourceMatrix};
use crate::seed::{derive_seed, STREAM_SYNTH_GLOBAL, STREAM_SYNTH_SOURCE};

/// Noise applied entrywise to the rate matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    /// `X_ij ~ Poisson(Λ_ij)`; sources carry the generalized KL divergence.
    Poisson,
    /// `X_ij = Λ_ij + N(0, σ)`; sources carry the squared divergence.
    Gaussian(f64),
    /// `X = Λ` exactly.
    None,
}

/// Parameters of one synthetic collection.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub n_patients: usize,
    /// Entity counts per source.
    pub source_cols: Vec<usize>,
    pub rank: usize,
    /// Nonzero entries planted in every factor column of every source.
    pub active_per_column: usize,
    /// Loadings are Uniform(0, loading_scale).
    pub loading_scale: f64,
    /// Biases are Uniform(0, bias_scale).
    pub bias_scale: f64,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.n_patients == 0 || self.rank == 0 || self.source_cols.is_empty() {
            return Err(Error::Config(
                "synthetic collections need patients, a positive rank, and at least one source"
                    .into(),
            ));
        }
        if self.active_per_column == 0 {
            return Err(Error::Config("active entities per column must be positive".into()));
        }
        if let Some(&n) = self.source_cols.iter().find(|&&n| n < self.active_per_column) {
            return Err(Error::Config(format!(
                "cannot place {} active entities in a source with {} columns",
                self.active_per_column, n
            )));
        }
        if !(self.loading_scale > 0.0) || !(self.bias_scale >= 0.0) {
            return Err(Error::Config("scales must be positive".into()));
        }
        if let NoiseModel::Gaussian(sigma) = self.noise {
            if !(sigma >= 0.0) {
                return Err(Error::Config(format!("gaussian sigma must be non-negative, got {sigma}")));
            }
        }
        Ok(())
    }

    fn divergence(&self) -> Divergence {
        match self.noise {
            NoiseModel::Gaussian(_) => Divergence::Squared,
            NoiseModel::Poisson | NoiseModel::None => Divergence::GeneralizedKl,
        }
    }
}

fn index_width(n: usize) -> usize {
    n.max(1).to_string().len()
}

/// Draws a planted collection and its ground-truth model. Deterministic
/// given the seed; each source uses its own derived stream.
pub fn generate(spec: &SynthSpec) -> Result<(Collection, FactorModel)> {
    spec.validate()?;

    let pw = index_width(spec.n_patients);
    let patient_labels: Arc<Vec<String>> = Arc::new(
        (0..spec.n_patients)
            .map(|i| format!("p{:0pw$}", i + 1))
            .collect(),
    );

    let mut global = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, STREAM_SYNTH_GLOBAL, 0));
    let w = Array2::from_shape_simple_fn((spec.n_patients, spec.rank), || {
        global.random::<f64>() * spec.loading_scale
    });

    let mut sources = Vec::with_capacity(spec.source_cols.len());
    let mut h_all = Vec::with_capacity(spec.source_cols.len());
    let mut b_all = Vec::with_capacity(spec.source_cols.len());

    for (v, &n_cols) in spec.source_cols.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, STREAM_SYNTH_SOURCE, v as u64));
        let name = format!("source{}", v + 1);

        let mut h = Array2::zeros((n_cols, spec.rank));
        for k in 0..spec.rank {
            let positions = sample(&mut rng, n_cols, spec.active_per_column);
            let raw: Vec<f64> = (0..spec.active_per_column)
                .map(|_| rng.random::<f64>().max(f64::MIN_POSITIVE))
                .collect();
            let total: f64 = raw.iter().sum();
            for (pos, val) in positions.iter().zip(&raw) {
                h[[pos, k]] = val / total;
            }
        }

        let b = Array1::from_shape_simple_fn(n_cols, || rng.random::<f64>() * spec.bias_scale);

        let rates = w.dot(&h.t()) + &b;
        let mut entries = Vec::new();
        for ((i, j), &lambda) in rates.indexed_iter() {
            let value = match spec.noise {
                NoiseModel::None => lambda,
                NoiseModel::Poisson => {
                    if lambda > 0.0 {
                        let dist = Poisson::new(lambda).map_err(|e| {
                            Error::Config(format!("invalid Poisson rate {lambda}: {e}"))
                        })?;
                        dist.sample(&mut rng)
                    } else {
                        0.0
                    }
                }
                NoiseModel::Gaussian(sigma) => {
                    let noise = if sigma > 0.0 {
                        let dist = Normal::new(0.0, sigma).map_err(|e| {
                            Error::Config(format!("invalid Gaussian sigma {sigma}: {e}"))
                        })?;
                        dist.sample(&mut rng)
                    } else {
                        0.0
                    };
                    lambda + noise
                }
            };
            if value != 0.0 {
                entries.push((i, j, value));
            }
        }

        let cw = index_width(n_cols);
        sources.push(SourceMatrix {
            name: name.clone(),
            n_rows: spec.n_patients,
            n_cols,
            entries,
            divergence: spec.divergence(),
            col_labels: (0..n_cols).map(|j| format!("{name}_e{:0cw$}", j + 1)).collect(),
            row_labels: Arc::clone(&patient_labels),
        });
        h_all.push(h);
        b_all.push(b);
    }

    let eta = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    let truth = FactorModel {
        w,
        h: h_all,
        b: b_all,
        alpha: vec![1.0; spec.source_cols.len()],
        eta,
        rank: spec.rank,
        mode: Mode::Sicnmf,
        objective_trace: Vec::new(),
    };
    let collection = Collection {
        sources,
        n_patients: spec.n_patients,
        patient_labels,
    };
    Ok((collection, truth))
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Mean cosine similarity between matched latent dimensions. Columns of
/// all `H_v` are concatenated across sources (a phenotype is defined
/// jointly), the `R×R` cosine matrix is formed, and an exact max-weight
/// perfect matching absorbs any column permutation.
pub fn factor_match_score(est: &FactorModel, truth: &FactorModel) -> Result<f64> {
    if est.rank != truth.rank {
        return Err(Error::Shape(format!(
            "rank mismatch: {} vs {}",
            est.rank, truth.rank
        )));
    }
    if est.n_sources() != truth.n_sources() {
        return Err(Error::Shape(format!(
            "source count mismatch: {} vs {}",
            est.n_sources(),
            truth.n_sources()
        )));
    }
    for v in 0..est.n_sources() {
        if est.h[v].nrows() != truth.h[v].nrows() {
            return Err(Error::Shape(format!(
                "source {v} has {} vs {} entities",
                est.h[v].nrows(),
                truth.h[v].nrows()
            )));
        }
    }
    let r = est.rank;
    if r > 20 {
        return Err(Error::Config(format!(
            "exact matching is limited to rank <= 20, got {r}"
        )));
    }

    let concat = |m: &FactorModel, k: usize| -> Vec<f64> {
        m.h.iter().flat_map(|h| h.column(k).to_vec()).collect()
    };
    let est_cols: Vec<Vec<f64>> = (0..r).map(|k| concat(est, k)).collect();
    let truth_cols: Vec<Vec<f64>> = (0..r).map(|k| concat(truth, k)).collect();
    let sim: Vec<Vec<f64>> = est_cols
        .iter()
        .map(|e| truth_cols.iter().map(|t| cosine(e, t)).collect())
        .collect();

    // exact assignment over subsets: dp[mask] = best total similarity of
    // matching est columns 0..popcount(mask) to the truth columns in mask
    let full = 1usize << r;
    let mut dp = vec![f64::NEG_INFINITY; full];
    dp[0] = 0.0;
    for mask in 0..full {
        if dp[mask] == f64::NEG_INFINITY {
            continue;
        }
        let i = mask.count_ones() as usize;
        if i == r {
            continue;
        }
        for j in 0..r {
            let bit = 1usize << j;
            if mask & bit == 0 {
                let cand = dp[mask] + sim[i][j];
                if cand > dp[mask | bit] {
                    dp[mask | bit] = cand;
                }
            }
        }
    }
    Ok(dp[full - 1] / r as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::{div_value, DivergenceSpec};
    use crate::model::validate_collection;
    use approx::assert_relative_eq;
    use ndarray::arr2;

    fn small_spec() -> SynthSpec {
        SynthSpec {
            n_patients: 12,
            source_cols: vec![8, 5],
            rank: 3,
            active_per_column: 2,
            loading_scale: 2.0,
            bias_scale: 0.3,
            noise: NoiseModel::None,
            seed: 11,
        }
    }

    #[test]
    fn noiseless_generation_factorizes_exactly() {
        let (c, truth) = generate(&small_spec()).unwrap();
        assert!(validate_collection(&c).is_empty());
        assert!(truth.validate().is_empty());
        for v in 0..c.n_sources() {
            let est = crate::model::model_estimate(&truth, v).unwrap();
            let x = c.sources[v].to_dense();
            let d = div_value(
                DivergenceSpec::new(Divergence::GeneralizedKl),
                x.view(),
                est.view(),
            )
            .unwrap();
            assert!(d.abs() < 1e-10, "divergence {d} for source {v}");
        }
    }

    #[test]
    fn fully_dense_columns_allowed() {
        let mut spec = small_spec();
        spec.active_per_column = 5;
        spec.source_cols = vec![5, 5];
        let (_, truth) = generate(&spec).unwrap();
        assert!(truth.h[0].iter().all(|&x| x > 0.0));
    }

    #[test]
    fn generation_is_deterministic() {
        let mut spec = small_spec();
        spec.noise = NoiseModel::Poisson;
        let (a, _) = generate(&spec).unwrap();
        let (b, _) = generate(&spec).unwrap();
        for (sa, sb) in a.sources.iter().zip(&b.sources) {
            assert_eq!(sa.entries, sb.entries);
        }
    }

    #[test]
    fn infeasible_sparsity_is_rejected() {
        let mut spec = small_spec();
        spec.active_per_column = 9;
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn gaussian_noise_switches_to_squared_loss() {
        let mut spec = small_spec();
        spec.noise = NoiseModel::Gaussian(0.5);
        let (c, _) = generate(&spec).unwrap();
        assert_eq!(c.sources[0].divergence, Divergence::Squared);
        assert!(validate_collection(&c).is_empty());
    }

    #[test]
    fn score_is_one_for_identity_and_permutation() {
        let (_, truth) = generate(&small_spec()).unwrap();
        assert_relative_eq!(factor_match_score(&truth, &truth).unwrap(), 1.0, epsilon = 1e-12);

        let mut permuted = truth.clone();
        for h in &mut permuted.h {
            let cols: Vec<_> = (0..h.ncols()).rev().collect();
            let mut out = h.clone();
            for (new_k, &old_k) in cols.iter().enumerate() {
                out.column_mut(new_k).assign(&h.column(old_k));
            }
            *h = out;
        }
        assert_relative_eq!(
            factor_match_score(&permuted, &truth).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn orthogonal_column_halves_the_score() {
        let truth = FactorModel {
            w: arr2(&[[1.0, 1.0]]),
            h: vec![arr2(&[[1.0, 0.0], [0.0, 1.0]])],
            b: vec![Array1::zeros(2)],
            alpha: vec![1.0],
            eta: 2.0,
            rank: 2,
            mode: Mode::Sicnmf,
            objective_trace: vec![],
        };
        let mut est = truth.clone();
        // column 1 replaced by (1,0), orthogonal to the planted (0,1)
        est.h[0] = arr2(&[[1.0, 1.0], [0.0, 0.0]]);
        let score = factor_match_score(&est, &truth).unwrap();
        assert_relative_eq!(score, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn score_invariant_to_column_rescaling() {
        let (_, truth) = generate(&small_spec()).unwrap();
        let mut scaled = truth.clone();
        for h in &mut scaled.h {
            h.mapv_inplace(|x| x * 7.5);
        }
        assert_relative_eq!(
            factor_match_score(&scaled, &truth).unwrap(),
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn score_rejects_rank_mismatch() {
        let (_, truth) = generate(&small_spec()).unwrap();
        let mut other = truth.clone();
        other.rank = 2;
        assert!(factor_match_score(&other, &truth).is_err());
    }
}

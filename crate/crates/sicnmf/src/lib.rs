//! Sparse collective non-negative matrix factorization for multi-source
//! data sharing a common row set.
//!
//! Given `V` matrices `X_v` over the same patients, the solver estimates a
//! shared non-negative loading matrix `W` and per-source factors
//! `(H_v, b_v)` minimizing `Σ_v α_v D_v(X_v, W H_vᵀ + 1 b_vᵀ)`, where each
//! `D_v` is a Bregman divergence matched to the source's datatype
//! (generalized KL for counts, squared for reals, logistic for binaries).
//! Two modes are available:
//!
//! - **cnmf**: non-negativity only.
//! - **sicnmf**: additionally every column of every `H_v` lies on the unit
//!   simplex and `‖W‖_F ≤ η`, so shrinking `η` drives the factor columns
//!   sparse. That budget is the knob behind interpretable phenotypes.
//!
//! The crate also ships the divergence-weighting heuristic (`α_v` from
//! independent single-source fits), projection of new rows onto fixed
//! factors, phenotype post-processing and sparsity metrics, a planted-model
//! synthetic generator with a factor-recovery score, and file formats plus
//! a CLI around all of it.

pub mod divergence;
pub mod error;
pub mod io;
pub mod model;
pub mod phenotype;
pub mod projection;
pub mod solver;
pub mod synth;

mod seed;

pub use error::{Error, Result};
pub use model::{
    drop_empty_rows, model_estimate, validate_collection, Collection, CollectionSchema,
    Divergence, FactorModel, LineSearchConfig, Mode, SolverConfig, SourceMatrix, SourceSchema,
    Violation, Weighting,
};
pub use phenotype::{
    export_features, extract_phenotypes, render_phenotypes, sparsity_profile, transform,
    transform_detailed, PhenotypeSet, SparsityProfile, DEFAULT_ZERO_THRESHOLD,
};
pub use solver::{
    block_gradients, compute_source_weights, fit, fit_with_inspector, objective,
    source_weight_report, update_h_b, update_w, BlockGradient, LineSearchResult, WeightReport,
};
pub use synth::{factor_match_score, generate, NoiseModel, SynthSpec};

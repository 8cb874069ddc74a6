//! Data model for multi-source factorization: input matrices, fitted
//! factors, and solver configuration.
//!
//! A [`Collection`] holds `V` sparse [`SourceMatrix`] inputs that share a
//! common row (patient) index. A [`FactorModel`] holds the estimate
//! `X_v ≈ W H_vᵀ + 1 b_vᵀ` together with the per-source divergence weights,
//! the Frobenius budget, and the objective trace of the fit that produced it.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack allowed on the Frobenius-ball constraint `‖W‖_F ≤ η`.
pub const ETA_SLACK: f64 = 1e-12;
/// Absolute tolerance on simplex column sums `‖H_v^{(k)}‖₁ = 1`.
pub const SIMPLEX_TOL: f64 = 1e-10;
/// Slack factor for the monotone objective trace: step `t → t+1` may
/// increase by at most `TRACE_SLACK · (1 + |f_t|)`.
pub const TRACE_SLACK: f64 = 1e-9;

/// Loss family attached to one source matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Divergence {
    GeneralizedKl,
    Squared,
    Logistic,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Divergence::GeneralizedKl => "generalized_kl",
            Divergence::Squared => "squared",
            Divergence::Logistic => "logistic",
        };
        f.write_str(s)
    }
}

impl FromStr for Divergence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "generalized_kl" => Ok(Divergence::GeneralizedKl),
            "squared" => Ok(Divergence::Squared),
            "logistic" => Ok(Divergence::Logistic),
            other => Err(Error::Config(format!(
                "unknown divergence {other:?} (expected generalized_kl, squared, or logistic)"
            ))),
        }
    }
}

/// One sparse non-negative data matrix plus its loss and labels.
///
/// Entries are `(row, col, value)` triplets; absent pairs are explicit
/// zeros. Row labels are shared by reference across all sources of a
/// collection, since rows are the join key.
#[derive(Debug, Clone)]
pub struct SourceMatrix {
    pub name: String,
    pub n_rows: usize,
    pub n_cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
    pub divergence: Divergence,
    pub col_labels: Vec<String>,
    pub row_labels: Arc<Vec<String>>,
}

impl SourceMatrix {
    /// Materializes the dense `n_rows × n_cols` matrix, summing duplicates.
    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.n_rows, self.n_cols));
        for &(r, c, v) in &self.entries {
            out[[r, c]] += v;
        }
        out
    }

    /// Number of stored triplets.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }
}

/// V source matrices over a common patient index.
#[derive(Debug, Clone)]
pub struct Collection {
    pub sources: Vec<SourceMatrix>,
    pub n_patients: usize,
    pub patient_labels: Arc<Vec<String>>,
}

impl Collection {
    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }
}

/// One invariant breach found by [`validate_collection`] or
/// [`FactorModel::validate`]. At most one record is emitted per
/// `(source, rule)` pair, carrying the first offending entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Offending source name, or `None` for collection-level rules.
    pub source: Option<String>,
    pub rule: &'static str,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.source {
            Some(s) => write!(f, "[{}] {}: {}", s, self.rule, self.detail),
            None => write!(f, "{}: {}", self.rule, self.detail),
        }
    }
}

pub(crate) fn violations_to_error(violations: &[Violation]) -> Error {
    let joined = violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ");
    Error::Collection(joined)
}

/// Checks every structural invariant of a collection. Returns an empty
/// list iff all invariants hold; violations are values, not failures.
pub fn validate_collection(c: &Collection) -> Vec<Violation> {
    let mut out = Vec::new();
    if c.sources.is_empty() {
        out.push(Violation {
            source: None,
            rule: "empty-collection",
            detail: "a collection must contain at least one source".into(),
        });
    }
    if c.patient_labels.len() != c.n_patients {
        out.push(Violation {
            source: None,
            rule: "patient-label-count",
            detail: format!(
                "{} patient labels for {} patients",
                c.patient_labels.len(),
                c.n_patients
            ),
        });
    }
    for src in &c.sources {
        validate_source(src, c, &mut out);
    }
    out
}

fn validate_source(src: &SourceMatrix, c: &Collection, out: &mut Vec<Violation>) {
    let mut push = |rule: &'static str, detail: String| {
        out.push(Violation {
            source: Some(src.name.clone()),
            rule,
            detail,
        });
    };

    if src.n_rows != c.n_patients {
        push(
            "row-count",
            format!("{} rows in a collection of {} patients", src.n_rows, c.n_patients),
        );
    }
    if src.col_labels.len() != src.n_cols {
        push(
            "col-label-count",
            format!("{} labels for {} columns", src.col_labels.len(), src.n_cols),
        );
    }
    if !Arc::ptr_eq(&src.row_labels, &c.patient_labels) && *src.row_labels != *c.patient_labels {
        push(
            "row-labels-not-shared",
            "row labels differ from the collection's patient labels".into(),
        );
    }

    let mut seen_index = false;
    let mut seen_nonfinite = false;
    let mut seen_sign = false;
    let mut seen_binary = false;
    for &(r, col, v) in &src.entries {
        if !seen_index && (r >= src.n_rows || col >= src.n_cols) {
            push("index-range", format!("entry ({r}, {col}) out of range"));
            seen_index = true;
        }
        if !seen_nonfinite && !v.is_finite() {
            push("non-finite", format!("entry ({r}, {col}) value {v}"));
            seen_nonfinite = true;
        }
        match src.divergence {
            Divergence::GeneralizedKl => {
                if !seen_sign && v < 0.0 {
                    push(
                        "negative-count",
                        format!("entry ({r}, {col}) value {v} under generalized_kl"),
                    );
                    seen_sign = true;
                }
            }
            Divergence::Logistic => {
                if !seen_binary && v != 0.0 && v != 1.0 {
                    push(
                        "non-binary",
                        format!("entry ({r}, {col}) value {v} under logistic"),
                    );
                    seen_binary = true;
                }
            }
            Divergence::Squared => {}
        }
    }

    let mut pairs: Vec<(usize, usize)> = src.entries.iter().map(|&(r, c2, _)| (r, c2)).collect();
    pairs.sort_unstable();
    if let Some(w) = pairs.windows(2).find(|w| w[0] == w[1]) {
        push(
            "duplicate-entry",
            format!("entry ({}, {}) appears more than once", w[0].0, w[0].1),
        );
    }
}

/// Drops patients with no stored nonzero entry in any source, reindexing
/// rows and labels. Cohort filtering convenience for the CLI.
pub fn drop_empty_rows(c: &Collection) -> Collection {
    let mut keep = vec![false; c.n_patients];
    for src in &c.sources {
        for &(r, _, v) in &src.entries {
            if r < keep.len() && v != 0.0 {
                keep[r] = true;
            }
        }
    }
    let new_index: Vec<Option<usize>> = {
        let mut next = 0;
        keep.iter()
            .map(|&k| {
                if k {
                    next += 1;
                    Some(next - 1)
                } else {
                    None
                }
            })
            .collect()
    };
    let labels: Arc<Vec<String>> = Arc::new(
        c.patient_labels
            .iter()
            .zip(&keep)
            .filter(|(_, &k)| k)
            .map(|(l, _)| l.clone())
            .collect(),
    );
    let sources = c
        .sources
        .iter()
        .map(|src| SourceMatrix {
            name: src.name.clone(),
            n_rows: labels.len(),
            n_cols: src.n_cols,
            entries: src
                .entries
                .iter()
                .filter_map(|&(r, col, v)| new_index[r].map(|nr| (nr, col, v)))
                .collect(),
            divergence: src.divergence,
            col_labels: src.col_labels.clone(),
            row_labels: Arc::clone(&labels),
        })
        .collect();
    Collection {
        sources,
        n_patients: labels.len(),
        patient_labels: labels,
    }
}

/// Fit mode: unconstrained collective NMF, or the sparsity-inducing
/// variant with simplex columns and a Frobenius budget on the loadings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Cnmf,
    Sicnmf,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Cnmf => "cnmf",
            Mode::Sicnmf => "sicnmf",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cnmf" => Ok(Mode::Cnmf),
            "sicnmf" => Ok(Mode::Sicnmf),
            other => Err(Error::Config(format!(
                "unknown mode {other:?} (expected cnmf or sicnmf)"
            ))),
        }
    }
}

/// The factorization estimate `(W, {H_v}, {b_v}, {α_v}, η, R)`.
#[derive(Debug, Clone)]
pub struct FactorModel {
    /// Patient loadings, `n_p × R`, non-negative.
    pub w: Array2<f64>,
    /// Per-source latent factors, each `n_v × R`, non-negative. In
    /// sicnmf mode every column lies on the unit simplex.
    pub h: Vec<Array2<f64>>,
    /// Per-source feature biases, each length `n_v`, non-negative.
    pub b: Vec<Array1<f64>>,
    /// Per-source divergence weights, positive.
    pub alpha: Vec<f64>,
    /// Frobenius budget on `W`; `f64::INFINITY` in cnmf mode.
    pub eta: f64,
    pub rank: usize,
    pub mode: Mode,
    /// `(outer_iteration, objective)` pairs recorded by the fit,
    /// non-increasing in the objective.
    pub objective_trace: Vec<(usize, f64)>,
}

impl FactorModel {
    pub fn n_sources(&self) -> usize {
        self.h.len()
    }

    /// Number of rows the model was fitted on.
    pub fn n_patients(&self) -> usize {
        self.w.nrows()
    }

    /// Final recorded objective, if the model carries a trace.
    pub fn final_objective(&self) -> Option<f64> {
        self.objective_trace.last().map(|&(_, f)| f)
    }

    /// Checks all structural invariants of the estimate. Empty iff valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut push = |rule: &'static str, detail: String| {
            out.push(Violation {
                source: None,
                rule,
                detail,
            });
        };

        if self.h.len() != self.b.len() || self.h.len() != self.alpha.len() {
            push(
                "factor-count",
                format!(
                    "{} H matrices, {} biases, {} alphas",
                    self.h.len(),
                    self.b.len(),
                    self.alpha.len()
                ),
            );
            return out;
        }
        if self.w.ncols() != self.rank {
            push(
                "rank",
                format!("W has {} columns for rank {}", self.w.ncols(), self.rank),
            );
        }
        for (v, h) in self.h.iter().enumerate() {
            if h.ncols() != self.rank {
                push(
                    "rank",
                    format!("H_{v} has {} columns for rank {}", h.ncols(), self.rank),
                );
            }
            if self.b[v].len() != h.nrows() {
                push(
                    "bias-shape",
                    format!("b_{v} has length {} for {} features", self.b[v].len(), h.nrows()),
                );
            }
        }
        for (v, &a) in self.alpha.iter().enumerate() {
            if !(a > 0.0) {
                push("alpha-positive", format!("alpha_{v} = {a}"));
            }
        }
        if !(self.eta > 0.0) {
            push("eta-positive", format!("eta = {}", self.eta));
        }

        if let Some(&x) = self.w.iter().find(|&&x| x < 0.0) {
            push("w-nonneg", format!("W contains {x}"));
        }
        for (v, h) in self.h.iter().enumerate() {
            if let Some(&x) = h.iter().find(|&&x| x < 0.0) {
                push("h-nonneg", format!("H_{v} contains {x}"));
            }
        }
        for (v, b) in self.b.iter().enumerate() {
            if let Some(&x) = b.iter().find(|&&x| x < 0.0) {
                push("b-nonneg", format!("b_{v} contains {x}"));
            }
        }

        if self.mode == Mode::Sicnmf {
            let norm = self.w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > self.eta * (1.0 + ETA_SLACK) {
                push("frobenius-budget", format!("‖W‖_F = {norm} exceeds eta = {}", self.eta));
            }
            'simplex: for (v, h) in self.h.iter().enumerate() {
                for k in 0..h.ncols() {
                    let sum: f64 = h.column(k).sum();
                    if (sum - 1.0).abs() > SIMPLEX_TOL {
                        push(
                            "simplex-column",
                            format!("column {k} of H_{v} sums to {sum}"),
                        );
                        break 'simplex;
                    }
                }
            }
        }

        if let Some(w) = self
            .objective_trace
            .windows(2)
            .find(|w| w[1].1 > w[0].1 + TRACE_SLACK * (1.0 + w[0].1.abs()))
        {
            push(
                "trace-monotone",
                format!(
                    "objective rose from {} at iteration {} to {} at iteration {}",
                    w[0].1, w[0].0, w[1].1, w[1].0
                ),
            );
        }

        out
    }
}

/// Dense reconstruction `W H_vᵀ + 1 b_vᵀ` for source `v`.
pub fn model_estimate(m: &FactorModel, v: usize) -> Result<Array2<f64>> {
    if v >= m.n_sources() {
        return Err(Error::Shape(format!(
            "source index {v} out of range for {} sources",
            m.n_sources()
        )));
    }
    let h = &m.h[v];
    let b = &m.b[v];
    if h.ncols() != m.w.ncols() {
        return Err(Error::Shape(format!(
            "H_{v} has {} columns but W has {}",
            h.ncols(),
            m.w.ncols()
        )));
    }
    if b.len() != h.nrows() {
        return Err(Error::Shape(format!(
            "b_{v} has length {} but H_{v} has {} rows",
            b.len(),
            h.nrows()
        )));
    }
    Ok(m.w.dot(&h.t()) + b)
}

/// Per-source schema (name, divergence, column labels) used to check that
/// a new collection matches the one a model was fitted on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectionSchema {
    pub sources: Vec<SourceSchema>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceSchema {
    pub name: String,
    pub divergence: Divergence,
    pub col_labels: Vec<String>,
}

impl CollectionSchema {
    pub fn of(c: &Collection) -> Self {
        CollectionSchema {
            sources: c
                .sources
                .iter()
                .map(|s| SourceSchema {
                    name: s.name.clone(),
                    divergence: s.divergence,
                    col_labels: s.col_labels.clone(),
                })
                .collect(),
        }
    }

    /// Errors unless `c` has the same sources, in order, with matching
    /// divergences and column labels.
    pub fn check_compatible(&self, c: &Collection) -> Result<()> {
        if c.sources.len() != self.sources.len() {
            return Err(Error::Shape(format!(
                "expected {} sources, got {}",
                self.sources.len(),
                c.sources.len()
            )));
        }
        for (expected, got) in self.sources.iter().zip(&c.sources) {
            if expected.name != got.name {
                return Err(Error::Shape(format!(
                    "expected source {:?}, got {:?}",
                    expected.name, got.name
                )));
            }
            if expected.divergence != got.divergence {
                return Err(Error::Config(format!(
                    "source {:?}: divergence mismatch ({} vs {})",
                    got.name, got.divergence, expected.divergence
                )));
            }
            if expected.col_labels != got.col_labels {
                return Err(Error::Shape(format!(
                    "source {:?}: column labels differ from the fitted model",
                    got.name
                )));
            }
        }
        Ok(())
    }
}

/// How the per-source divergence weights `α_v` are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    /// All ones.
    Uniform,
    /// `α_v = 1 / D_v(X_v, X̃_v^ind)` from an independent single-source fit.
    IndependentFit,
}

/// Backtracking line-search controls.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LineSearchConfig {
    /// Step shrink factor, in (0, 1).
    pub beta: f64,
    /// Sufficient-decrease constant, in (0, 1).
    pub sigma: f64,
    /// First trial step of the first inner iteration of each block.
    pub initial_step: f64,
    /// Cap on trial steps per line search; exceeding it flags a stall.
    pub max_trials: usize,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        LineSearchConfig {
            beta: 0.5,
            sigma: 0.01,
            initial_step: 1.0,
            max_trials: 30,
        }
    }
}

/// All controls of the alternating projected-gradient solver.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverConfig {
    pub rank: usize,
    pub mode: Mode,
    /// Frobenius budget on `W`; ignored in cnmf mode.
    pub eta: f64,
    pub weighting: Weighting,
    pub restarts: usize,
    pub max_outer: usize,
    /// Relative objective-change threshold across outer iterations.
    pub outer_tol: f64,
    /// Cap on projected-gradient steps per block update.
    pub max_inner: usize,
    /// Inner stop: projected-gradient norm relative to its value at the
    /// start of the block update.
    pub inner_tol: f64,
    pub line_search: LineSearchConfig,
    /// Floor for ratio terms inside the divergences.
    pub epsilon: f64,
    pub seed: u64,
    /// When false, biases are initialized to zero and never updated.
    pub fit_bias: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            rank: 20,
            mode: Mode::Sicnmf,
            eta: 500.0,
            weighting: Weighting::Uniform,
            restarts: 5,
            max_outer: 200,
            outer_tol: 1e-6,
            max_inner: 50,
            inner_tol: 1e-4,
            line_search: LineSearchConfig::default(),
            epsilon: 1e-10,
            seed: 0,
            fit_bias: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.rank == 0 {
            return fail("rank must be at least 1".into());
        }
        if self.restarts == 0 {
            return fail("restarts must be at least 1".into());
        }
        if self.max_inner == 0 {
            return fail("max_inner must be at least 1".into());
        }
        if self.mode == Mode::Sicnmf && !(self.eta > 0.0) {
            return fail(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.line_search.beta > 0.0 && self.line_search.beta < 1.0) {
            return fail(format!("beta must lie in (0, 1), got {}", self.line_search.beta));
        }
        if !(self.line_search.sigma > 0.0 && self.line_search.sigma < 1.0) {
            return fail(format!("sigma must lie in (0, 1), got {}", self.line_search.sigma));
        }
        if !(self.line_search.initial_step > 0.0) {
            return fail(format!(
                "initial_step must be positive, got {}",
                self.line_search.initial_step
            ));
        }
        if self.line_search.max_trials == 0 {
            return fail("line-search trial cap must be at least 1".into());
        }
        if !(self.epsilon > 0.0) {
            return fail(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.outer_tol >= 0.0) {
            return fail(format!("outer_tol must be non-negative, got {}", self.outer_tol));
        }
        if !(self.inner_tol >= 0.0) {
            return fail(format!("inner_tol must be non-negative, got {}", self.inner_tol));
        }
        Ok(())
    }
}

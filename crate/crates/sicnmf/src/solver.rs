//! Alternating minimization by projected gradient descent with
//! backtracking line search, plus the divergence-weighting preprocessor.
//!
//! One outer iteration updates `W` against all sources jointly, then each
//! `(H_v, b_v)` pair against its own source. Every block update is a short
//! run of projected gradient steps whose step size backtracks until the
//! sufficient-decrease condition `f(x⁺) − f(x) ≤ σ ⟨∇f(x), x⁺ − x⟩` holds,
//! so the objective trace is non-increasing by construction.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::divergence::{div_grad_raw, div_grad_smooth, div_value_raw, div_value_smooth, DivergenceSpec};
use crate::error::{Error, Result};
use crate::model::{
    validate_collection, violations_to_error, Collection, FactorModel, Mode, SolverConfig,
    Weighting,
};
use crate::projection::{project_nonneg, project_nonneg_ball, project_simplex, SimplexTarget};
use crate::seed::{derive_seed, STREAM_RESTART, STREAM_WEIGHTS};

/// Scale-invariant floor under the independent divergence when forming
/// `α_v = 1 / D_v`: multiplied by the number of stored entries.
const ALPHA_FLOOR_PER_ENTRY: f64 = 1e-8;

/// Gradients of the weighted objective with respect to each factor block.
#[derive(Debug, Clone)]
pub struct BlockGradient {
    pub grad_w: Array2<f64>,
    pub grad_h: Vec<Array2<f64>>,
    pub grad_b: Vec<Array1<f64>>,
}

/// Outcome of the last accepted backtracking search of a block update.
#[derive(Debug, Clone, Copy)]
pub struct LineSearchResult {
    pub accepted_step: f64,
    pub trial_count: usize,
    pub new_objective: f64,
}

/// Summary of one block update.
#[derive(Debug, Clone, Copy)]
pub struct BlockStats {
    /// Projected-gradient steps actually taken.
    pub inner_steps: usize,
    /// True when a line search exhausted its trial cap; the iterate kept
    /// its previous value.
    pub stalled: bool,
    /// Block objective after the update.
    pub objective: f64,
    pub last_search: Option<LineSearchResult>,
}

/// Dense copies of the source matrices plus their divergence specs,
/// built once per fit.
pub(crate) struct DenseData {
    x: Vec<Array2<f64>>,
    specs: Vec<DivergenceSpec>,
}

impl DenseData {
    fn from_collection(c: &Collection, epsilon: f64) -> Self {
        DenseData {
            x: c.sources.iter().map(|s| s.to_dense()).collect(),
            specs: c
                .sources
                .iter()
                .map(|s| DivergenceSpec::with_epsilon(s.divergence, epsilon))
                .collect(),
        }
    }
}

fn reconstruct(w: &Array2<f64>, h: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    w.dot(&h.t()) + b
}

fn source_value(
    data: &DenseData,
    v: usize,
    alpha: f64,
    w: &Array2<f64>,
    h: &Array2<f64>,
    b: &Array1<f64>,
) -> f64 {
    let est = reconstruct(w, h, b);
    alpha * div_value_smooth(data.specs[v], data.x[v].view(), est.view())
}

/// Internal objective along the optimization path. This is the smooth
/// variant; it differs from [`objective`] by at most `ε · cells`.
fn objective_smooth(data: &DenseData, m: &FactorModel) -> f64 {
    (0..data.x.len())
        .map(|v| source_value(data, v, m.alpha[v], &m.w, &m.h[v], &m.b[v]))
        .sum()
}

fn check_model_against(c: &Collection, m: &FactorModel) -> Result<()> {
    if m.n_sources() != c.n_sources() {
        return Err(Error::Shape(format!(
            "model has {} sources but collection has {}",
            m.n_sources(),
            c.n_sources()
        )));
    }
    if m.w.nrows() != c.n_patients {
        return Err(Error::Shape(format!(
            "model has {} rows but collection has {} patients",
            m.w.nrows(),
            c.n_patients
        )));
    }
    for (v, src) in c.sources.iter().enumerate() {
        if m.h[v].nrows() != src.n_cols || m.b[v].len() != src.n_cols {
            return Err(Error::Shape(format!(
                "source {:?} has {} columns but the model factors have {} rows",
                src.name,
                src.n_cols,
                m.h[v].nrows()
            )));
        }
        if m.h[v].ncols() != m.w.ncols() {
            return Err(Error::Shape(format!(
                "H_{v} rank {} differs from W rank {}",
                m.h[v].ncols(),
                m.w.ncols()
            )));
        }
        if !(m.alpha[v] > 0.0) {
            return Err(Error::Config(format!("alpha_{v} = {} is not positive", m.alpha[v])));
        }
    }
    Ok(())
}

/// Weighted objective `Σ_v α_v D_v(X_v, W H_vᵀ + 1 b_vᵀ)`.
pub fn objective(c: &Collection, m: &FactorModel) -> Result<f64> {
    check_model_against(c, m)?;
    let data = DenseData::from_collection(c, crate::divergence::DEFAULT_EPSILON);
    let f: f64 = (0..data.x.len())
        .map(|v| {
            let est = reconstruct(&m.w, &m.h[v], &m.b[v]);
            m.alpha[v] * div_value_raw(data.specs[v], data.x[v].view(), est.view())
        })
        .sum();
    if !f.is_finite() {
        return Err(Error::NonFinite(format!("objective evaluated to {f}")));
    }
    Ok(f)
}

/// Analytic gradients of [`objective`] with respect to `W`, each `H_v`,
/// and each `b_v`: with `G_v = α_v ∂D_v/∂X̂`, they are `Σ_v G_v H_v`,
/// `G_vᵀ W`, and `G_vᵀ 1`.
pub fn block_gradients(c: &Collection, m: &FactorModel) -> Result<BlockGradient> {
    check_model_against(c, m)?;
    let data = DenseData::from_collection(c, crate::divergence::DEFAULT_EPSILON);
    let mut grad_w = Array2::zeros(m.w.dim());
    let mut grad_h = Vec::with_capacity(m.n_sources());
    let mut grad_b = Vec::with_capacity(m.n_sources());
    for v in 0..m.n_sources() {
        let est = reconstruct(&m.w, &m.h[v], &m.b[v]);
        let mut g = div_grad_raw(data.specs[v], data.x[v].view(), est.view());
        g.mapv_inplace(|x| x * m.alpha[v]);
        grad_w = grad_w + g.dot(&m.h[v]);
        grad_h.push(g.t().dot(&m.w));
        grad_b.push(g.sum_axis(Axis(0)));
    }
    Ok(BlockGradient {
        grad_w,
        grad_h,
        grad_b,
    })
}

/// Per-block solver state carried across the outer iterations of one fit:
/// the warm-started line-search step size.
#[derive(Debug, Clone, Copy)]
struct BlockState {
    warm_step: f64,
}

impl BlockState {
    fn new(cfg: &SolverConfig) -> Self {
        BlockState {
            warm_step: cfg.line_search.initial_step,
        }
    }
}

/// One projected-gradient run on a single block. `value`, `grad`, and
/// `project` see the block as a plain matrix; `state` carries the last
/// accepted step size and the inner stopping threshold across calls for
/// the same block.
fn pgd_block(
    x0: Array2<f64>,
    value: &dyn Fn(&Array2<f64>) -> f64,
    grad: &dyn Fn(&Array2<f64>) -> Array2<f64>,
    project: &dyn Fn(&Array2<f64>) -> Array2<f64>,
    cfg: &SolverConfig,
    state: &mut BlockState,
) -> (Array2<f64>, BlockStats) {
    let ls = &cfg.line_search;
    let mut x = x0;
    let mut f = value(&x);
    let mut stats = BlockStats {
        inner_steps: 0,
        stalled: false,
        objective: f,
        last_search: None,
    };

    let pg_norm = |x: &Array2<f64>, g: &Array2<f64>| -> f64 {
        let step = project(&(x - g));
        (&step - x).iter().map(|d| d * d).sum::<f64>().sqrt()
    };

    let mut g = grad(&x);
    let pg0 = pg_norm(&x, &g);
    if pg0 == 0.0 {
        return (x, stats);
    }
    // the stop is relative to this block update's starting gradient norm
    let threshold = cfg.inner_tol * pg0;

    for step in 0..cfg.max_inner {
        if step > 0 {
            g = grad(&x);
            if pg_norm(&x, &g) <= threshold {
                break;
            }
        }

        // bidirectional backtracking, warm-started from the last accepted
        // step: if the warm step already satisfies sufficient decrease,
        // keep growing it while that improves the objective; otherwise
        // shrink until it passes or the trial cap is hit
        let try_step = |t: f64| -> (Array2<f64>, f64, bool) {
            let candidate = project(&(&x - &g.mapv(|v| v * t)));
            let f_new = value(&candidate);
            let descent: f64 = g
                .iter()
                .zip(candidate.iter().zip(x.iter()))
                .map(|(gi, (ci, xi))| gi * (ci - xi))
                .sum();
            let ok = f_new.is_finite() && f_new - f <= ls.sigma * descent;
            (candidate, f_new, ok)
        };

        let mut t = state.warm_step;
        let mut trials = 1;
        let (mut candidate, mut f_new, first_ok) = try_step(t);
        let mut accepted = first_ok;
        if first_ok {
            // ties count as progress: near-flat stretches change f by less
            // than one ulp and the step must still be allowed to regrow
            while trials < ls.max_trials {
                let t_next = t / ls.beta;
                let (cand_next, f_next, ok) = try_step(t_next);
                trials += 1;
                if ok && f_next <= f_new {
                    t = t_next;
                    candidate = cand_next;
                    f_new = f_next;
                } else {
                    break;
                }
            }
        } else {
            while trials < ls.max_trials {
                t *= ls.beta;
                let (cand, f_try, ok) = try_step(t);
                trials += 1;
                if ok {
                    candidate = cand;
                    f_new = f_try;
                    accepted = true;
                    break;
                }
            }
        }

        if accepted {
            let moved = candidate.iter().zip(x.iter()).any(|(c, xi)| c != xi);
            x = candidate;
            f = f_new;
            state.warm_step = t;
            stats.inner_steps += 1;
            stats.last_search = Some(LineSearchResult {
                accepted_step: t,
                trial_count: trials,
                new_objective: f_new,
            });
            // a zero move that still satisfies the condition means the
            // iterate is pinned by the constraints; nothing more to do
            if !moved {
                break;
            }
        } else {
            // resume from the smallest tried step: consecutive calls keep
            // scanning downward when the useful scale sits below this
            // window, while the tie-tolerant growth loop recovers upward
            // if it sits above
            state.warm_step = t.max(f64::MIN_POSITIVE);
            stats.stalled = true;
            break;
        }
    }

    stats.objective = f;
    (x, stats)
}

fn w_projector(eta: f64) -> impl Fn(&Array2<f64>) -> Array2<f64> {
    move |m| project_nonneg_ball(m, eta)
}

fn update_w_cached(
    data: &DenseData,
    m: &FactorModel,
    cfg: &SolverConfig,
    state: &mut BlockState,
) -> (Array2<f64>, BlockStats) {
    let value = |w: &Array2<f64>| -> f64 {
        (0..data.x.len())
            .map(|v| source_value(data, v, m.alpha[v], w, &m.h[v], &m.b[v]))
            .sum()
    };
    let grad = |w: &Array2<f64>| -> Array2<f64> {
        let mut acc = Array2::zeros(w.dim());
        for v in 0..data.x.len() {
            let est = reconstruct(w, &m.h[v], &m.b[v]);
            let mut g = div_grad_smooth(data.specs[v], data.x[v].view(), est.view());
            g.mapv_inplace(|x| x * m.alpha[v]);
            acc = acc + g.dot(&m.h[v]);
        }
        acc
    };
    let project = w_projector(m.eta);
    pgd_block(m.w.clone(), &value, &grad, &project, cfg, state)
}

/// Stacks `(H_v | b_v)` into one `n_v × (R+1)` matrix so the pair moves as
/// a single projected-gradient block.
fn stack_hb(h: &Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    let (n, r) = h.dim();
    let mut s_mat = Array2::zeros((n, r + 1));
    s_mat.slice_mut(s![.., ..r]).assign(h);
    s_mat.column_mut(r).assign(b);
    s_mat
}

fn unstack_hb(stacked: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let r = stacked.ncols() - 1;
    (
        stacked.slice(s![.., ..r]).to_owned(),
        stacked.column(r).to_owned(),
    )
}

fn update_h_b_cached(
    data: &DenseData,
    m: &FactorModel,
    v: usize,
    cfg: &SolverConfig,
    state: &mut BlockState,
) -> ((Array2<f64>, Array1<f64>), BlockStats) {
    let rank = m.rank;
    let alpha = m.alpha[v];
    let w = &m.w;
    let fit_bias = cfg.fit_bias;
    let mode = cfg.mode;
    let simplex = SimplexTarget::unit();

    let value = |s_mat: &Array2<f64>| -> f64 {
        let (h, b) = unstack_hb(s_mat);
        source_value(data, v, alpha, w, &h, &b)
    };
    let grad = |s_mat: &Array2<f64>| -> Array2<f64> {
        let (h, b) = unstack_hb(s_mat);
        let est = reconstruct(w, &h, &b);
        let mut g = div_grad_smooth(data.specs[v], data.x[v].view(), est.view());
        g.mapv_inplace(|x| x * alpha);
        let mut out = Array2::zeros(s_mat.dim());
        out.slice_mut(s![.., ..rank]).assign(&g.t().dot(w));
        if fit_bias {
            out.column_mut(rank).assign(&g.sum_axis(Axis(0)));
        }
        out
    };
    let project = move |s_mat: &Array2<f64>| -> Array2<f64> {
        let mut out = match mode {
            Mode::Sicnmf => {
                let mut p = s_mat.clone();
                for k in 0..rank {
                    let col = project_simplex(s_mat.column(k), simplex.radius)
                        .expect("factor columns are never empty");
                    p.column_mut(k).assign(&col);
                }
                let bias = project_nonneg(&s_mat.slice(s![.., rank..]).to_owned());
                p.slice_mut(s![.., rank..]).assign(&bias);
                p
            }
            Mode::Cnmf => project_nonneg(s_mat),
        };
        if !fit_bias {
            // bias is frozen: its gradient is zeroed, keep the exact values
            out.column_mut(rank).assign(&s_mat.column(rank));
        }
        out
    };

    let x0 = stack_hb(&m.h[v], &m.b[v]);
    let (stacked, stats) = pgd_block(x0, &value, &grad, &project, cfg, state);
    (unstack_hb(&stacked), stats)
}

/// One `W` block update against all sources, holding `H` and `b` fixed.
/// Returns the new loadings and the update summary.
pub fn update_w(c: &Collection, m: &FactorModel, cfg: &SolverConfig) -> Result<(Array2<f64>, BlockStats)> {
    check_model_against(c, m)?;
    cfg.validate()?;
    let data = DenseData::from_collection(c, cfg.epsilon);
    let mut state = BlockState::new(cfg);
    Ok(update_w_cached(&data, m, cfg, &mut state))
}

/// One `(H_v, b_v)` block update for source `v`, holding `W` fixed.
pub fn update_h_b(
    c: &Collection,
    m: &FactorModel,
    v: usize,
    cfg: &SolverConfig,
) -> Result<((Array2<f64>, Array1<f64>), BlockStats)> {
    check_model_against(c, m)?;
    cfg.validate()?;
    if v >= c.n_sources() {
        return Err(Error::Shape(format!(
            "source index {v} out of range for {} sources",
            c.n_sources()
        )));
    }
    let data = DenseData::from_collection(c, cfg.epsilon);
    let mut state = BlockState::new(cfg);
    Ok(update_h_b_cached(&data, m, v, cfg, &mut state))
}

fn init_model(c: &Collection, cfg: &SolverConfig, alpha: Vec<f64>, seed: u64) -> FactorModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eta = match cfg.mode {
        Mode::Sicnmf => cfg.eta,
        Mode::Cnmf => f64::INFINITY,
    };

    let w_raw = Array2::from_shape_simple_fn((c.n_patients, cfg.rank), || rng.random::<f64>());
    let w = project_nonneg_ball(&w_raw, eta);

    let mut h = Vec::with_capacity(c.n_sources());
    let mut b = Vec::with_capacity(c.n_sources());
    for src in &c.sources {
        let mut h_v;
        match cfg.mode {
            Mode::Sicnmf => {
                // sparse simplex columns: dense uniform starts are nearly
                // collinear across components and alternating descent then
                // merges them into one pattern; a few random support
                // entries per column break that symmetry
                h_v = Array2::zeros((src.n_cols, cfg.rank));
                let support = src.n_cols.min(3 + src.n_cols / 10).max(1);
                for k in 0..cfg.rank {
                    let positions = rand::seq::index::sample(&mut rng, src.n_cols, support);
                    for pos in positions {
                        h_v[[pos, k]] = rng.random::<f64>().max(f64::MIN_POSITIVE);
                    }
                    let col = project_simplex(h_v.column(k), 1.0)
                        .expect("sources have at least one column");
                    h_v.column_mut(k).assign(&col);
                }
            }
            Mode::Cnmf => {
                h_v = Array2::from_shape_simple_fn((src.n_cols, cfg.rank), || rng.random::<f64>());
                h_v = project_nonneg(&h_v);
            }
        }
        h.push(h_v);

        // bias starts at the per-column means so frequent features are
        // absorbed immediately; floored by epsilon to stay in the loss domain
        let b_v = if cfg.fit_bias {
            let dense = src.to_dense();
            dense
                .mean_axis(Axis(0))
                .unwrap_or_else(|| Array1::zeros(src.n_cols))
                .mapv(|x| x.max(cfg.epsilon))
        } else {
            Array1::zeros(src.n_cols)
        };
        b.push(b_v);
    }

    FactorModel {
        w,
        h,
        b,
        alpha,
        eta,
        rank: cfg.rank,
        mode: cfg.mode,
        objective_trace: Vec::new(),
    }
}

fn run_restart(
    data: &DenseData,
    c: &Collection,
    cfg: &SolverConfig,
    alpha: &[f64],
    restart: usize,
    inspect: &(dyn Fn(usize, usize, &FactorModel) + Sync),
) -> Result<FactorModel> {
    let seed = derive_seed(cfg.seed, STREAM_RESTART, restart as u64);
    let mut m = init_model(c, cfg, alpha.to_vec(), seed);
    let mut f = objective_smooth(data, &m);
    if !f.is_finite() {
        return Err(Error::NonFinite(format!(
            "restart {restart}: objective at initialization is {f}"
        )));
    }
    m.objective_trace.push((0, f));
    debug_assert!(m.validate().is_empty(), "init violates invariants: {:?}", m.validate());
    inspect(restart, 0, &m);

    let mut state_w = BlockState::new(cfg);
    let mut state_hb = vec![BlockState::new(cfg); c.n_sources()];
    let mut consecutive_stalls = 0usize;

    for outer in 1..=cfg.max_outer {
        let (w_new, w_stats) = update_w_cached(data, &m, cfg, &mut state_w);
        m.w = w_new;

        let mut all_stalled = w_stats.stalled;
        for v in 0..c.n_sources() {
            let ((h_new, b_new), hb_stats) = update_h_b_cached(data, &m, v, cfg, &mut state_hb[v]);
            m.h[v] = h_new;
            m.b[v] = b_new;
            all_stalled = all_stalled && hb_stats.stalled;
        }

        let f_new = objective_smooth(data, &m);
        if !f_new.is_finite() {
            return Err(Error::NonFinite(format!(
                "restart {restart}: objective became {f_new} at outer iteration {outer}"
            )));
        }
        m.objective_trace.push((outer, f_new));
        debug_assert!(
            m.validate().is_empty(),
            "outer iteration {outer} violates invariants: {:?}",
            m.validate()
        );
        inspect(restart, outer, &m);

        let rel_change = (f - f_new) / f.abs().max(f64::MIN_POSITIVE);
        f = f_new;
        if all_stalled {
            // each stall scans the line search another nine decades down;
            // several in a row mean no block can move at any scale
            consecutive_stalls += 1;
            if consecutive_stalls >= 4 {
                log::debug!("restart {restart}: converged by stall at outer iteration {outer}");
                break;
            }
            continue;
        }
        consecutive_stalls = 0;
        if rel_change < cfg.outer_tol {
            break;
        }
    }
    Ok(m)
}

/// Alternating-minimization fit. Runs `cfg.restarts` independent seeded
/// starts in parallel and returns the one with the lowest final objective.
pub fn fit(c: &Collection, cfg: &SolverConfig) -> Result<FactorModel> {
    fit_with_inspector(c, cfg, &|_, _, _| {})
}

/// [`fit`] with a hook invoked after every outer iteration (including the
/// initialization, as iteration 0) of every restart. The hook receives
/// `(restart, outer_iteration, model)`; restarts may run concurrently.
pub fn fit_with_inspector(
    c: &Collection,
    cfg: &SolverConfig,
    inspect: &(dyn Fn(usize, usize, &FactorModel) + Sync),
) -> Result<FactorModel> {
    cfg.validate()?;
    let violations = validate_collection(c);
    if !violations.is_empty() {
        return Err(violations_to_error(&violations));
    }

    let alpha = match cfg.weighting {
        Weighting::Uniform => vec![1.0; c.n_sources()],
        Weighting::IndependentFit => compute_source_weights(c, cfg)?,
    };
    let data = DenseData::from_collection(c, cfg.epsilon);

    let results: Vec<Result<FactorModel>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(&data, c, cfg, &alpha, r, inspect))
        .collect();

    let mut best: Option<FactorModel> = None;
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(m) => {
                let f = m.final_objective().unwrap_or(f64::INFINITY);
                let better = match &best {
                    Some(cur) => f < cur.final_objective().unwrap_or(f64::INFINITY),
                    None => true,
                };
                if better {
                    best = Some(m);
                }
            }
            Err(e) => {
                log::warn!("restart {r} aborted: {e}");
                failures.push(format!("restart {r}: {e}"));
            }
        }
    }
    best.ok_or_else(|| Error::Solver(format!("all restarts failed: {}", failures.join("; "))))
}

/// Per-source weights and the independent divergences behind them.
#[derive(Debug, Clone)]
pub struct WeightReport {
    pub alpha: Vec<f64>,
    /// `D_v(X_v, X̃_v^ind)` from the independent single-source fit;
    /// zero for a degenerate (all-zero) source.
    pub independent_divergence: Vec<f64>,
}

/// Divergence weights `α_v = 1 / D_v(X_v, X̃_v^ind)` where each
/// `X̃_v^ind` comes from an unconstrained single-source fit at the same
/// rank. A degenerate all-zero source gets `α_v = 1` with a warning.
pub fn compute_source_weights(c: &Collection, cfg: &SolverConfig) -> Result<Vec<f64>> {
    Ok(source_weight_report(c, cfg)?.alpha)
}

/// [`compute_source_weights`] plus the per-source independent divergences.
pub fn source_weight_report(c: &Collection, cfg: &SolverConfig) -> Result<WeightReport> {
    cfg.validate()?;
    let violations = validate_collection(c);
    if !violations.is_empty() {
        return Err(violations_to_error(&violations));
    }

    // every per-source fit derives the same seed, so identical sources get
    // identical weights regardless of their position
    let sub_cfg = SolverConfig {
        mode: Mode::Cnmf,
        weighting: Weighting::Uniform,
        restarts: 1,
        seed: derive_seed(cfg.seed, STREAM_WEIGHTS, 0),
        ..cfg.clone()
    };

    let per_source: Vec<Result<(f64, f64)>> = c
        .sources
        .par_iter()
        .map(|src| {
            if src.entries.iter().all(|&(_, _, v)| v == 0.0) {
                log::warn!(
                    "source {:?} is all zeros; using weight 1 instead of an independent fit",
                    src.name
                );
                return Ok((1.0, 0.0));
            }
            let sub = Collection {
                sources: vec![src.clone()],
                n_patients: c.n_patients,
                patient_labels: c.patient_labels.clone(),
            };
            let m = fit(&sub, &sub_cfg)?;
            let d = m
                .final_objective()
                .ok_or_else(|| Error::Solver("independent fit produced no trace".into()))?;
            let floor = ALPHA_FLOOR_PER_ENTRY * src.nnz() as f64;
            Ok((1.0 / d.max(floor), d))
        })
        .collect();

    let mut alpha = Vec::with_capacity(c.n_sources());
    let mut divergences = Vec::with_capacity(c.n_sources());
    for res in per_source {
        let (a, d) = res?;
        alpha.push(a);
        divergences.push(d);
    }
    Ok(WeightReport {
        alpha,
        independent_divergence: divergences,
    })
}

/// In-place Cholesky solve of the small SPD system `a x = rhs`; `a` is
/// destroyed. Used only for rank-sized systems.
fn cholesky_solve(a: &mut Array2<f64>, rhs: &mut Array1<f64>) -> bool {
    let n = a.nrows();
    for j in 0..n {
        let mut d = a[[j, j]];
        for k in 0..j {
            d -= a[[j, k]] * a[[j, k]];
        }
        if d <= 0.0 {
            return false;
        }
        let d = d.sqrt();
        a[[j, j]] = d;
        for i in j + 1..n {
            let mut v = a[[i, j]];
            for k in 0..j {
                v -= a[[i, k]] * a[[j, k]];
            }
            a[[i, j]] = v / d;
        }
    }
    for i in 0..n {
        let mut v = rhs[i];
        for k in 0..i {
            v -= a[[i, k]] * rhs[k];
        }
        rhs[i] = v / a[[i, i]];
    }
    for i in (0..n).rev() {
        let mut v = rhs[i];
        for k in i + 1..n {
            v -= a[[k, i]] * rhs[k];
        }
        rhs[i] = v / a[[i, i]];
    }
    true
}

/// Solves the `W`-only problem for new rows against frozen factors. In
/// sicnmf mode the Frobenius budget rescales to `η·√(n_new/n_train)` so
/// the per-row budget matches training.
///
/// The subproblem is convex, so no restarts are needed. The start is the
/// clamped per-row least-squares fit against the stacked factors: it is
/// deterministic, already structured, and keeps the count-loss estimates
/// away from their ill-conditioned floor.
pub(crate) fn solve_loadings(
    data: &DenseData,
    n_rows: usize,
    frozen: &FactorModel,
    eta: f64,
    cfg: &SolverConfig,
) -> (Array2<f64>, f64) {
    let rank = frozen.rank;
    let mut gram: Array2<f64> = Array2::zeros((rank, rank));
    for h in &frozen.h {
        gram = gram + h.t().dot(h);
    }
    let ridge = 1e-10 * (1.0 + gram.diag().sum() / rank as f64);
    for k in 0..rank {
        gram[[k, k]] += ridge;
    }

    let mut w_raw = Array2::zeros((n_rows, rank));
    for i in 0..n_rows {
        let mut rhs: Array1<f64> = Array1::zeros(rank);
        for (v, h) in frozen.h.iter().enumerate() {
            let residual = &data.x[v].row(i) - &frozen.b[v];
            rhs = rhs + h.t().dot(&residual);
        }
        let mut a = gram.clone();
        if cholesky_solve(&mut a, &mut rhs) {
            for k in 0..rank {
                w_raw[[i, k]] = rhs[k].max(0.0);
            }
        }
    }
    // floor the start strictly inside the orthant: exact zeros put count
    // cells on the steep edge of the loss, where descent crawls
    let positive_mean = {
        let (sum, count) = w_raw.iter().filter(|&&v| v > 0.0).fold((0.0, 0usize), |(s, n), &v| (s + v, n + 1));
        if count == 0 {
            1.0
        } else {
            sum / count as f64
        }
    };
    let floor = 0.05 * positive_mean;
    w_raw.mapv_inplace(|v| v.max(floor));

    let mut m = FactorModel {
        w: project_nonneg_ball(&w_raw, eta),
        h: frozen.h.clone(),
        b: frozen.b.clone(),
        alpha: frozen.alpha.clone(),
        eta,
        rank: frozen.rank,
        mode: frozen.mode,
        objective_trace: Vec::new(),
    };

    let mut state = BlockState::new(cfg);
    let mut f = objective_smooth(data, &m);
    let mut consecutive_stalls = 0usize;
    for _ in 0..cfg.max_outer.max(1) {
        let (w_new, stats) = update_w_cached(data, &m, cfg, &mut state);
        m.w = w_new;
        let f_new = stats.objective;
        let rel_change = (f - f_new) / f.abs().max(f64::MIN_POSITIVE);
        f = f_new;
        if stats.stalled {
            consecutive_stalls += 1;
            if consecutive_stalls >= 4 {
                break;
            }
            continue;
        }
        consecutive_stalls = 0;
        if rel_change < cfg.outer_tol {
            break;
        }
    }
    (m.w, f)
}

pub(crate) fn dense_for(c: &Collection, epsilon: f64) -> DenseData {
    DenseData::from_collection(c, epsilon)
}

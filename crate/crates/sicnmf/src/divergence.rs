//! Bregman divergence values and gradients with respect to the estimate.
//!
//! Three losses are supported: generalized KL for counts, squared loss for
//! reals, and logistic loss for binary data. All three use the convention
//! `0·log 0 = 0`, and the estimate is clamped away from the boundary of the
//! loss domain by `epsilon` before evaluation, so line searches stay finite.

use ndarray::{Array2, ArrayView2, Zip};

use crate::error::{Error, Result};
use crate::model::Divergence;

/// Default floor for ratio terms.
pub const DEFAULT_EPSILON: f64 = 1e-10;

/// A divergence kind plus its boundary floor.
#[derive(Debug, Clone, Copy)]
pub struct DivergenceSpec {
    pub kind: Divergence,
    pub epsilon: f64,
}

impl DivergenceSpec {
    pub fn new(kind: Divergence) -> Self {
        DivergenceSpec {
            kind,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn with_epsilon(kind: Divergence, epsilon: f64) -> Self {
        debug_assert!(epsilon > 0.0);
        DivergenceSpec { kind, epsilon }
    }
}

fn check_inputs(x: ArrayView2<'_, f64>, xhat: ArrayView2<'_, f64>) -> Result<()> {
    if x.dim() != xhat.dim() {
        return Err(Error::Shape(format!(
            "data is {:?} but estimate is {:?}",
            x.dim(),
            xhat.dim()
        )));
    }
    if let Some(bad) = x.iter().chain(xhat.iter()).find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("divergence input contains {bad}")));
    }
    Ok(())
}

/// `Σ_ij d(X_ij, X̂_ij)` for the chosen loss. Non-negative whenever no
/// boundary clamping fires.
pub fn div_value(spec: DivergenceSpec, x: ArrayView2<'_, f64>, xhat: ArrayView2<'_, f64>) -> Result<f64> {
    check_inputs(x, xhat)?;
    Ok(div_value_raw(spec, x, xhat))
}

/// Entrywise gradient of [`div_value`] with respect to the estimate:
/// `1 − X/X̂` for generalized KL, `2(X̂ − X)` for squared,
/// `(X̂ − X)/(X̂(1 − X̂))` for logistic. Where the estimate falls inside
/// the clamp region the value is constant, so the gradient is zero there
/// rather than the formula at the clamped point; anything else would
/// promise line searches a decrease that cannot materialize.
pub fn div_grad(
    spec: DivergenceSpec,
    x: ArrayView2<'_, f64>,
    xhat: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    check_inputs(x, xhat)?;
    Ok(div_grad_raw(spec, x, xhat))
}

/// Unchecked value: non-finite inputs propagate into the result. Summation
/// runs in row-major entry order so objectives are deterministic.
pub(crate) fn div_value_raw(
    spec: DivergenceSpec,
    x: ArrayView2<'_, f64>,
    xhat: ArrayView2<'_, f64>,
) -> f64 {
    let eps = spec.epsilon;
    match spec.kind {
        Divergence::GeneralizedKl => {
            let mut acc = 0.0;
            Zip::from(x).and(xhat).for_each(|&xi, &yi| {
                let y = yi.max(eps);
                acc += y - xi;
                if xi > 0.0 {
                    acc += xi * (xi / y).ln();
                }
            });
            acc
        }
        Divergence::Squared => {
            let mut acc = 0.0;
            Zip::from(x).and(xhat).for_each(|&xi, &yi| {
                let d = xi - yi;
                acc += d * d;
            });
            acc
        }
        Divergence::Logistic => {
            let mut acc = 0.0;
            Zip::from(x).and(xhat).for_each(|&xi, &yi| {
                let y = yi.clamp(eps, 1.0 - eps);
                if xi > 0.0 {
                    acc += xi * (xi / y).ln();
                }
                let xc = 1.0 - xi;
                if xc > 0.0 {
                    acc += xc * (xc / (1.0 - y)).ln();
                }
            });
            acc
        }
    }
}

/// Solver-internal smooth variant: generalized KL is evaluated at
/// `X̂ + ε` instead of `max(X̂, ε)`. The clamped form is constant in the
/// estimate below the floor, which turns any (count > 0, estimate → 0)
/// cell into an artificial local minimum that projected gradient steps can
/// fall into and never leave; the shift removes the flat region while
/// staying within `ε · cells` of the clamped value. Squared loss needs no
/// floor and the logistic loss keeps the clamp (its estimates can exceed 1
/// structurally, so a shift alone cannot keep the logarithms finite).
pub(crate) fn div_value_smooth(
    spec: DivergenceSpec,
    x: ArrayView2<'_, f64>,
    xhat: ArrayView2<'_, f64>,
) -> f64 {
    match spec.kind {
        Divergence::GeneralizedKl => {
            let eps = spec.epsilon;
            let mut acc = 0.0;
            Zip::from(x).and(xhat).for_each(|&xi, &yi| {
                let y = yi + eps;
                acc += y - xi;
                if xi > 0.0 {
                    acc += xi * (xi / y).ln();
                }
            });
            acc
        }
        _ => div_value_raw(spec, x, xhat),
    }
}

pub(crate) fn div_grad_smooth(
    spec: DivergenceSpec,
    x: ArrayView2<'_, f64>,
    xhat: ArrayView2<'_, f64>,
) -> Array2<f64> {
    match spec.kind {
        Divergence::GeneralizedKl => {
            let eps = spec.epsilon;
            let mut out = Array2::zeros(x.dim());
            Zip::from(&mut out).and(x).and(xhat).for_each(|g, &xi, &yi| {
                *g = 1.0 - xi / (yi + eps);
            });
            out
        }
        _ => div_grad_raw(spec, x, xhat),
    }
}

pub(crate) fn div_grad_raw(
    spec: DivergenceSpec,
    x: ArrayView2<'_, f64>,
    xhat: ArrayView2<'_, f64>,
) -> Array2<f64> {
    let eps = spec.epsilon;
    let mut out = Array2::zeros(x.dim());
    match spec.kind {
        Divergence::GeneralizedKl => {
            Zip::from(&mut out).and(x).and(xhat).for_each(|g, &xi, &yi| {
                *g = if yi < eps { 0.0 } else { 1.0 - xi / yi };
            });
        }
        Divergence::Squared => {
            Zip::from(&mut out).and(x).and(xhat).for_each(|g, &xi, &yi| {
                *g = 2.0 * (yi - xi);
            });
        }
        Divergence::Logistic => {
            Zip::from(&mut out).and(x).and(xhat).for_each(|g, &xi, &yi| {
                *g = if yi < eps || yi > 1.0 - eps {
                    0.0
                } else {
                    (yi - xi) / (yi * (1.0 - yi))
                };
            });
        }
    }
    out
}

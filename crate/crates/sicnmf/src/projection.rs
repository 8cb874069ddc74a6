//! Exact Euclidean projections onto the solver's constraint sets: the
//! probability simplex, the non-negative orthant, and the intersection of
//! the orthant with a Frobenius ball.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// The scaled simplex `{y ≥ 0, Σy = radius}`. The solver always uses the
/// unit simplex; the scale knob lives on the loading budget instead.
#[derive(Debug, Clone, Copy)]
pub struct SimplexTarget {
    pub radius: f64,
}

impl SimplexTarget {
    pub fn unit() -> Self {
        SimplexTarget { radius: 1.0 }
    }

    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::Config(format!("simplex radius must be positive, got {radius}")));
        }
        Ok(SimplexTarget { radius })
    }
}

fn clamp_nonneg(x: f64) -> f64 {
    // branch instead of f64::max so -0.0 normalizes to +0.0
    if x <= 0.0 {
        0.0
    } else {
        x
    }
}

/// Euclidean projection onto `{y ≥ 0, Σy = radius}` by sort and threshold:
/// sort descending, take the largest prefix whose running average keeps the
/// threshold below every member, then shift and clamp.
pub fn project_simplex(x: ArrayView1<'_, f64>, radius: f64) -> Result<Array1<f64>> {
    if x.is_empty() {
        return Err(Error::Shape("cannot project an empty vector onto the simplex".into()));
    }
    debug_assert!(x.iter().all(|v| v.is_finite()));
    debug_assert!(radius > 0.0);

    let mut sorted: Vec<f64> = x.to_vec();
    // stable sort: ties keep their original index order
    sorted.sort_by(|a, b| b.total_cmp(a));

    let mut prefix = 0.0;
    // j = 0 always qualifies (its threshold is radius > 0), so tau is set
    let mut tau = 0.0;
    for (j, &v) in sorted.iter().enumerate() {
        prefix += v;
        let candidate = (prefix - radius) / (j + 1) as f64;
        if v - candidate > 0.0 {
            tau = candidate;
        }
    }
    Ok(x.mapv(|v| clamp_nonneg(v - tau)))
}

/// Euclidean projection onto `{W ≥ 0, ‖W‖_F ≤ eta}`: clamp negatives, then
/// rescale if the ball constraint is violated. The order is exact because
/// the orthant is a cone and the ball is centered at the origin.
pub fn project_nonneg_ball(m: &Array2<f64>, eta: f64) -> Array2<f64> {
    debug_assert!(eta > 0.0);
    let mut out = m.mapv(clamp_nonneg);
    if eta.is_finite() {
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > eta {
            out.mapv_inplace(|v| v * (eta / norm));
        }
    }
    out
}

/// Entrywise `max(·, 0)`: exact projection onto the non-negative orthant.
pub fn project_nonneg(m: &Array2<f64>) -> Array2<f64> {
    m.mapv(clamp_nonneg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use ndarray::{arr1, arr2};
    use proptest::prelude::*;

    #[test]
    fn simplex_fixed_point_unchanged() {
        let y = project_simplex(arr1(&[0.5, 0.5]).view(), 1.0).unwrap();
        assert_eq!(y, arr1(&[0.5, 0.5]));
    }

    #[test]
    fn simplex_threshold_by_hand() {
        let y = project_simplex(arr1(&[2.0, 0.0]).view(), 1.0).unwrap();
        assert_relative_eq!(y[0], 1.0, max_relative = 1e-12);
        assert_eq!(y[1], 0.0);
    }

    #[test]
    fn simplex_symmetry_splits_equally() {
        let y = project_simplex(arr1(&[1.0, 1.0]).view(), 1.0).unwrap();
        assert_eq!(y, arr1(&[0.5, 0.5]));
    }

    #[test]
    fn simplex_rejects_empty_input() {
        let empty: Array1<f64> = arr1(&[]);
        assert!(project_simplex(empty.view(), 1.0).is_err());
    }

    #[test]
    fn ball_projection_by_hand() {
        let m = arr2(&[[-1.0, 3.0], [0.0, 4.0]]);
        let p = project_nonneg_ball(&m, 1.0);
        let expected = arr2(&[[0.0, 0.6], [0.0, 0.8]]);
        for (a, b) in p.iter().zip(expected.iter()) {
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn ball_projection_leaves_feasible_points() {
        let m = arr2(&[[0.1, 0.2], [0.0, 0.3]]);
        assert_eq!(project_nonneg_ball(&m, 10.0), m);
        assert_eq!(project_nonneg_ball(&m, f64::INFINITY), m);
    }

    #[test]
    fn all_negative_clamps_to_zero() {
        let m = arr2(&[[-2.0]]);
        assert_eq!(project_nonneg_ball(&m, 5.0), arr2(&[[0.0]]));
    }

    #[test]
    fn orthant_projection_examples() {
        assert_eq!(project_nonneg(&arr2(&[[1.0, 2.0]])), arr2(&[[1.0, 2.0]]));
        assert_eq!(project_nonneg(&arr2(&[[-1.0, 2.0]])), arr2(&[[0.0, 2.0]]));
        let z = project_nonneg(&arr2(&[[-0.0]]));
        assert_eq!(z[[0, 0]].to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn simplex_stable_tie_break_is_deterministic() {
        let a = project_simplex(arr1(&[1.0, 1.0, 0.0, 1.0]).view(), 1.0).unwrap();
        let b = project_simplex(arr1(&[1.0, 1.0, 0.0, 1.0]).view(), 1.0).unwrap();
        assert_eq!(a, b);
        let sum: f64 = a.sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn simplex_output_feasible_and_idempotent(
            xs in proptest::collection::vec(-10.0f64..10.0, 1..9),
            radius in 0.1f64..5.0
        ) {
            let x = Array1::from_vec(xs);
            let y = project_simplex(x.view(), radius).unwrap();
            prop_assert!(y.iter().all(|&v| v >= 0.0));
            prop_assert!((y.sum() - radius).abs() < 1e-12);
            let z = project_simplex(y.view(), radius).unwrap();
            for (a, b) in y.iter().zip(z.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn projections_are_nonexpansive(
            pairs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..9),
            eta in 0.5f64..5.0
        ) {
            let n = pairs.len();
            let x = Array1::from_vec(pairs.iter().map(|p| p.0).collect());
            let y = Array1::from_vec(pairs.iter().map(|p| p.1).collect());
            let dist = |a: &Array1<f64>, b: &Array1<f64>| {
                a.iter().zip(b.iter()).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
            };
            let base = dist(&x, &y);

            let px = project_simplex(x.view(), 1.0).unwrap();
            let py = project_simplex(y.view(), 1.0).unwrap();
            prop_assert!(dist(&px, &py) <= base + 1e-9);

            let xm = Array2::from_shape_vec((1, n), x.to_vec()).unwrap();
            let ym = Array2::from_shape_vec((1, n), y.to_vec()).unwrap();
            let pb = |m: &Array2<f64>| Array1::from_vec(project_nonneg_ball(m, eta).into_raw_vec_and_offset().0);
            prop_assert!(dist(&pb(&xm), &pb(&ym)) <= base + 1e-9);
            let po = |m: &Array2<f64>| Array1::from_vec(project_nonneg(m).into_raw_vec_and_offset().0);
            prop_assert!(dist(&po(&xm), &po(&ym)) <= base + 1e-9);
        }

        #[test]
        fn ball_projection_idempotent(
            xs in proptest::collection::vec(-5.0f64..5.0, 1..9),
            eta in 0.5f64..5.0
        ) {
            let n = xs.len();
            let m = Array2::from_shape_vec((1, n), xs).unwrap();
            let p = project_nonneg_ball(&m, eta);
            let pp = project_nonneg_ball(&p, eta);
            for (a, b) in p.iter().zip(pp.iter()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}

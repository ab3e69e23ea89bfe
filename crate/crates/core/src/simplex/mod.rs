//! Simplex types, the thresholding+scaling projection, samplers, and
//! high-dimensional volume-concentration analytics.

mod geometry;
mod sample;

pub use geometry::{
    band_bound, corner_mass, mc_band_tail, mc_corner_mass, mc_tail_above_scaled_mean,
    tail_above_scaled_mean, uniform_component_mean, uniform_component_variance,
    ConcentrationQuery, McCheck,
};
pub use sample::{
    rows_as_compositions, sample_mixture, sample_uniform_simplex, MixtureSpec, Sampler,
};

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};

/// Tolerance used throughout for "is this on the simplex" checks.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// A point on the M-simplex: non-negative components summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositionVector {
    values: Array1<f64>,
}

impl CompositionVector {
    /// Validates the simplex invariants (tolerance [`SIMPLEX_TOL`]).
    pub fn new(values: Array1<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("composition vector must be non-empty"));
        }
        if !is_on_simplex(values.view(), SIMPLEX_TOL) {
            return Err(Error::domain(format!(
                "vector is not on the simplex (sum {}, min {})",
                values.sum(),
                values.fold(f64::INFINITY, |a, &b| a.min(b))
            )));
        }
        Ok(Self { values })
    }

    /// The centroid 1/M in dimension `m`.
    pub fn uniform(m: usize) -> Self {
        assert!(m >= 1, "dimension must be positive");
        Self {
            values: Array1::from_elem(m, 1.0 / m as f64),
        }
    }

    /// The i-th end-member e_i (one-hot vertex).
    pub fn end_member(m: usize, i: usize) -> Self {
        assert!(i < m, "end-member index out of range");
        let mut values = Array1::zeros(m);
        values[i] = 1.0;
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> ArrayView1<'_, f64> {
        self.values.view()
    }

    pub fn into_inner(self) -> Array1<f64> {
        self.values
    }
}

impl AsRef<Array1<f64>> for CompositionVector {
    fn as_ref(&self) -> &Array1<f64> {
        &self.values
    }
}

/// True iff `min(x) >= -tol` and `|sum(x) - 1| <= tol`. Total function.
pub fn is_on_simplex(x: ArrayView1<'_, f64>, tol: f64) -> bool {
    debug_assert!(tol > 0.0);
    if x.is_empty() {
        return false;
    }
    let mut sum = 0.0;
    let mut min = f64::INFINITY;
    for &v in x {
        if !v.is_finite() {
            return false;
        }
        sum += v;
        min = min.min(v);
    }
    min >= -tol && (sum - 1.0).abs() <= tol
}

/// The projection P(x) = P_s(P_t(x)): clamp negatives to zero, then divide by
/// the l1 norm. An all-zero clamp result falls back to the centroid 1/M, which
/// keeps the operation total.
///
/// Rescaling is skipped when the clamped sum is already within
/// [`PROJECTION_DRIFT_TOL`] of one; this makes the projection exactly
/// idempotent instead of perturbing an on-simplex vector by an ulp.
pub fn project_to_simplex(x: ArrayView1<'_, f64>) -> CompositionVector {
    assert!(!x.is_empty(), "cannot project an empty vector");
    let mut values = x.to_owned();
    project_in_place(&mut values);
    CompositionVector { values }
}

/// Sums this close to one are not rescaled (numerical drift, not mass error).
pub const PROJECTION_DRIFT_TOL: f64 = 1e-12;

pub(crate) fn project_in_place(x: &mut Array1<f64>) {
    let m = x.len();
    let mut sum = 0.0;
    for v in x.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
        sum += *v;
    }
    if (sum - 1.0).abs() <= PROJECTION_DRIFT_TOL {
        return;
    }
    if sum > 0.0 {
        x.mapv_inplace(|v| v / sum);
    } else {
        x.fill(1.0 / m as f64);
    }
}

/// Row-wise projection for estimator outputs.
pub fn project_rows(x: &mut Array2<f64>) {
    let m = x.ncols();
    for mut row in x.rows_mut() {
        let mut sum = 0.0;
        for v in row.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
            sum += *v;
        }
        if (sum - 1.0).abs() <= PROJECTION_DRIFT_TOL {
            continue;
        }
        if sum > 0.0 {
            row.mapv_inplace(|v| v / sum);
        } else {
            row.fill(1.0 / m as f64);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn end_member_is_on_simplex() {
        assert!(is_on_simplex(array![1.0, 0.0, 0.0].view(), 1e-9));
    }

    #[test]
    fn bad_sum_rejected() {
        assert!(!is_on_simplex(array![0.5, 0.5, 0.1].view(), 1e-9));
    }

    #[test]
    fn interior_point_accepted() {
        assert!(is_on_simplex(array![0.2, 0.3, 0.5].view(), 1e-9));
    }

    #[test]
    fn projection_clamps_then_rescales() {
        let p = project_to_simplex(array![0.5, -0.1, 0.8].view());
        assert_abs_diff_eq!(p.values()[0], 5.0 / 13.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.values()[1], 0.0);
        assert_abs_diff_eq!(p.values()[2], 8.0 / 13.0, epsilon = 1e-15);
    }

    #[test]
    fn projection_pure_rescale() {
        let p = project_to_simplex(array![0.25, 0.25].view());
        assert_eq!(p.values().to_vec(), vec![0.5, 0.5]);
    }

    #[test]
    fn projection_degenerate_falls_back_to_centroid() {
        let p = project_to_simplex(array![-1.0, -2.0, -3.0].view());
        for &v in p.values() {
            assert_abs_diff_eq!(v, 1.0 / 3.0);
        }
    }

    #[test]
    fn composition_vector_validates() {
        assert!(CompositionVector::new(array![0.5, 0.6]).is_err());
        assert!(CompositionVector::new(array![0.4, 0.6]).is_ok());
        assert!(CompositionVector::new(array![]).is_err());
    }

    proptest! {
        #[test]
        fn projection_lands_on_simplex(xs in proptest::collection::vec(-10.0f64..10.0, 1..12)) {
            let x = Array1::from_vec(xs);
            let p = project_to_simplex(x.view());
            prop_assert!(is_on_simplex(p.values(), 1e-9));
        }

        #[test]
        fn projection_is_idempotent(xs in proptest::collection::vec(-10.0f64..10.0, 1..12)) {
            let x = Array1::from_vec(xs);
            let once = project_to_simplex(x.view());
            let twice = project_to_simplex(once.values());
            prop_assert_eq!(once.values().to_vec(), twice.values().to_vec());
        }
    }
}

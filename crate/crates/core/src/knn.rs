//! Inverse-distance-weighted k-nearest-neighbor compositional estimator with
//! a k-sweep harness.
//!
//! Neighbor search is a brute-force scan (tree acceleration is out of scope).
//! Squared distances come from the Gram expansion ||a||^2 + ||b||^2 - 2 a.b,
//! whose cancellation can produce tiny negative values; they are truncated to
//! zero, and anything above 1e10 is capped.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{aad_percent, l2_error_percent};
use crate::simplex::{is_on_simplex, project_to_simplex, CompositionVector, SIMPLEX_TOL};
use crate::systems::PairedDataset;

/// Distances above this are capped.
pub const DISTANCE_CAP: f64 = 1e10;
/// Distances below this count as exact hits (an infinite 1/d weight would
/// otherwise appear).
pub const EXACT_HIT: f64 = 1e-300;

/// Brute-force index over training pairs (observations, simplex labels).
#[derive(Debug, Clone)]
pub struct KnnIndex {
    observations: Array2<f64>,
    labels: Array2<f64>,
    obs_sq_norms: Array1<f64>,
}

/// One point of a k-sweep error curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnSweepPoint {
    pub k: usize,
    pub e_percent: f64,
    pub aad_percent: Vec<f64>,
}

impl KnnIndex {
    /// Stores the dataset's (Y, X) pairs; labels must be simplex rows.
    pub fn fit(dataset: &PairedDataset) -> Result<Self> {
        Self::from_parts(dataset.y.clone(), dataset.x.clone())
    }

    pub fn from_parts(observations: Array2<f64>, labels: Array2<f64>) -> Result<Self> {
        if observations.nrows() == 0 {
            return Err(Error::domain("kNN index needs at least one sample"));
        }
        if observations.nrows() != labels.nrows() {
            return Err(Error::DimMismatch {
                context: "kNN observations vs labels",
                expected: observations.nrows(),
                got: labels.nrows(),
            });
        }
        for (i, row) in labels.rows().into_iter().enumerate() {
            if !is_on_simplex(row, SIMPLEX_TOL) {
                return Err(Error::domain(format!(
                    "kNN label row {i} is not on the simplex"
                )));
            }
        }
        let obs_sq_norms = observations
            .rows()
            .into_iter()
            .map(|r| r.dot(&r))
            .collect();
        Ok(KnnIndex {
            observations,
            labels,
            obs_sq_norms,
        })
    }

    pub fn len(&self) -> usize {
        self.observations.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty indexes
    }

    pub fn label_dim(&self) -> usize {
        self.labels.ncols()
    }

    /// Clamped squared Euclidean distances from `y` to every stored
    /// observation.
    fn distances(&self, y: ArrayView1<'_, f64>) -> Array1<f64> {
        let y_sq = y.dot(&y);
        let mut d = self.observations.dot(&y);
        for (v, &t_sq) in d.iter_mut().zip(self.obs_sq_norms.iter()) {
            *v = (t_sq + y_sq - 2.0 * *v).clamp(0.0, DISTANCE_CAP);
        }
        d
    }

    /// Neighbor candidates sorted by (distance, original index).
    fn ranked(&self, y: ArrayView1<'_, f64>) -> Vec<(f64, usize)> {
        let d = self.distances(y);
        let mut order: Vec<(f64, usize)> = d.iter().copied().zip(0..).collect();
        order.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        order
    }

    fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.len() {
            return Err(Error::domain(format!(
                "k must lie in 1..={}, got {k}",
                self.len()
            )));
        }
        Ok(())
    }

    /// Inverse-distance-weighted average of the k nearest labels. An exact
    /// hit returns that neighbor's label directly.
    pub fn predict(&self, y: ArrayView1<'_, f64>, k: usize) -> Result<CompositionVector> {
        self.check_k(k)?;
        let ranked = self.ranked(y);
        Ok(self.predict_ranked(&ranked, k))
    }

    fn predict_ranked(&self, ranked: &[(f64, usize)], k: usize) -> CompositionVector {
        // k = 1 and exact hits return the stored label bit-for-bit.
        if k == 1 || ranked[0].0 < EXACT_HIT {
            return CompositionVector::new(self.labels.row(ranked[0].1).to_owned())
                .expect("stored labels are simplex rows");
        }
        let mut acc = Array1::zeros(self.labels.ncols());
        let mut weight_sum = 0.0;
        for &(d, idx) in &ranked[..k] {
            let w = 1.0 / d;
            weight_sum += w;
            acc.scaled_add(w, &self.labels.row(idx));
        }
        acc.mapv_inplace(|v| v / weight_sum);
        // Convex combination of simplex rows: only ulp-level drift is
        // possible, and the projection rescales only beyond 1e-12.
        project_to_simplex(acc.view())
    }

    pub fn predict_batch(&self, ys: &Array2<f64>, k: usize) -> Result<Array2<f64>> {
        self.check_k(k)?;
        let mut out = Array2::zeros((ys.nrows(), self.labels.ncols()));
        for (row, mut o) in ys.rows().into_iter().zip(out.rows_mut()) {
            let ranked = self.ranked(row);
            o.assign(self.predict_ranked(&ranked, k).as_ref());
        }
        Ok(out)
    }

    /// Error curve over `ks` on a test set (distances are ranked once per
    /// query and reused across k).
    pub fn sweep_k(&self, test: &PairedDataset, ks: &[usize]) -> Result<Vec<KnnSweepPoint>> {
        if ks.is_empty() {
            return Err(Error::domain("k sweep needs at least one k"));
        }
        for &k in ks {
            self.check_k(k)?;
        }
        let mut per_k: Vec<Array2<f64>> = ks
            .iter()
            .map(|_| Array2::zeros((test.y.nrows(), self.labels.ncols())))
            .collect();
        for (qi, row) in test.y.rows().into_iter().enumerate() {
            let ranked = self.ranked(row);
            for (slot, &k) in ks.iter().enumerate() {
                per_k[slot]
                    .row_mut(qi)
                    .assign(self.predict_ranked(&ranked, k).as_ref());
            }
        }
        ks.iter()
            .zip(per_k)
            .map(|(&k, est)| {
                Ok(KnnSweepPoint {
                    k,
                    e_percent: l2_error_percent(&test.x, &est)?,
                    aad_percent: aad_percent(&test.x, &est)?.to_vec(),
                })
            })
            .collect()
    }
}

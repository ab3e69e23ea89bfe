//! Error metrics, obfuscated-truth normalization, projection residual, and
//! the per-estimator report summary.

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{CompositionVector, Sampler};
use crate::systems::ForwardSystem;

fn check_shapes(truth: &Array2<f64>, est: &Array2<f64>) -> Result<()> {
    if truth.dim() != est.dim() {
        return Err(Error::DimMismatch {
            context: "truth vs estimate shapes",
            expected: truth.len(),
            got: est.len(),
        });
    }
    if truth.nrows() == 0 {
        return Err(Error::domain("metrics need at least one sample"));
    }
    Ok(())
}

/// Overall error e: the mean over samples of the l2 distance between truth
/// and estimate rows, times 100.
pub fn l2_error_percent(truth: &Array2<f64>, est: &Array2<f64>) -> Result<f64> {
    check_shapes(truth, est)?;
    let n = truth.nrows() as f64;
    let sum: f64 = truth
        .rows()
        .into_iter()
        .zip(est.rows())
        .map(|(t, e)| {
            t.iter()
                .zip(e.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    Ok(100.0 * sum / n)
}

/// Per-component mean absolute deviation, times 100 (a vector; callers often
/// also report its scalar mean).
pub fn aad_percent(truth: &Array2<f64>, est: &Array2<f64>) -> Result<Array1<f64>> {
    check_shapes(truth, est)?;
    let n = truth.nrows() as f64;
    let mut acc = Array1::zeros(truth.ncols());
    for (t, e) in truth.rows().into_iter().zip(est.rows()) {
        for (a, (x, y)) in acc.iter_mut().zip(t.iter().zip(e.iter())) {
            *a += (x - y).abs();
        }
    }
    acc.mapv_inplace(|v| 100.0 * v / n);
    Ok(acc)
}

/// The visible components of a full composition, rescaled to sum to one.
pub fn normalized_truth(
    m_full: ArrayView1<'_, f64>,
    visible: &[usize],
) -> Result<CompositionVector> {
    let mut out = Array1::zeros(visible.len());
    for (o, &i) in out.iter_mut().zip(visible) {
        if i >= m_full.len() {
            return Err(Error::DimMismatch {
                context: "visible index",
                expected: m_full.len(),
                got: i,
            });
        }
        *o = m_full[i];
    }
    let sum = out.sum();
    if sum <= 0.0 {
        return Err(Error::domain(
            "visible part has zero mass; cannot normalize",
        ));
    }
    out.mapv_inplace(|v| v / sum);
    CompositionVector::new(out)
}

/// Row-wise [`normalized_truth`] for a whole composition matrix.
pub fn normalized_truth_rows(x: &Array2<f64>, visible: &[usize]) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((x.nrows(), visible.len()));
    for (row, mut o) in x.rows().into_iter().zip(out.rows_mut()) {
        o.assign(normalized_truth(row, visible)?.as_ref());
    }
    Ok(out)
}

/// l2 norm of the observation-domain residual s - T(m_hat).
pub fn projection_residual(s: ArrayView1<'_, f64>, sys_estimate: ArrayView1<'_, f64>) -> Result<f64> {
    if s.len() != sys_estimate.len() {
        return Err(Error::DimMismatch {
            context: "projection residual",
            expected: s.len(),
            got: sys_estimate.len(),
        });
    }
    Ok(s.iter()
        .zip(sys_estimate.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// Ratio of mean noiseless response norms E||a(m)|| / E||b(m)|| over n
/// samples shared between the two systems.
pub fn intensity_ratio<R: Rng>(
    sys_a: &ForwardSystem,
    sys_b: &ForwardSystem,
    sampler: &Sampler,
    n: usize,
    rng: &mut R,
) -> Result<f64> {
    if sys_a.input_dim() != sys_b.input_dim() {
        return Err(Error::DimMismatch {
            context: "intensity ratio input dims",
            expected: sys_a.input_dim(),
            got: sys_b.input_dim(),
        });
    }
    let samples = sampler.sample(n, rng)?;
    crate::systems::intensity_ratio(sys_a, sys_b, &samples)
}

/// Per-estimator error summary of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub estimator_tag: String,
    pub e_percent: f64,
    pub aad_percent: Vec<f64>,
    pub aad_mean_percent: f64,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_percent: Option<f64>,
}

impl ErrorSummary {
    pub fn from_estimates(
        tag: impl Into<String>,
        truth: &Array2<f64>,
        est: &Array2<f64>,
    ) -> Result<Self> {
        let e_percent = l2_error_percent(truth, est)?;
        let aad = aad_percent(truth, est)?;
        let aad_mean = aad.mean().unwrap_or(0.0);
        Ok(ErrorSummary {
            estimator_tag: tag.into(),
            e_percent,
            aad_percent: aad.to_vec(),
            aad_mean_percent: aad_mean,
            n: truth.nrows(),
            bound_percent: None,
        })
    }

    pub fn with_bound(mut self, bound_percent: f64) -> Self {
        self.bound_percent = Some(bound_percent);
        self
    }
}

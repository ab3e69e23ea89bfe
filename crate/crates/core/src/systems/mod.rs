//! The zoo of synthetic forward systems h(.), noise injection, and paired
//! dataset generation.
//!
//! Every system is deterministic and immutable after construction; noise is
//! added separately so the same noiseless response can be reused.

mod dataset;
mod rbf;

pub use dataset::{generate_dataset, PairedDataset};
pub use rbf::{build_rbf_matrix, highdim_bumps, highdim_z, rbf_profile, RBF_COLS, RBF_ROWS};

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::condition_number;

/// Tag identifying one synthetic observation model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemKind {
    Linear,
    InvertibleG,
    NoninvertibleG,
    ObfuscatedInvertible,
    ObfuscatedNoninvertible,
    ScaledMagnitude,
    Correlated,
    MovingPeak,
    MovingPeakCorrelated,
    HighdimLinear,
    HighdimNonlinear,
    HighdimNonlinearMaxnorm,
    HighdimNonlinearL2norm,
}

/// Normalization applied to the noiseless high-dimensional nonlinear response.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseNorm {
    None,
    Max,
    L2,
}

/// Magnitude/center interpolation tables of the moving-peak systems. Row 0 is
/// the value at weight 1, row 1 the value at weight 0.
const PEAK_A3: [[f64; 3]; 2] = [[2.0, 0.7, 0.8], [1.0, 1.5, 0.3]];
const PEAK_B3: [[f64; 3]; 2] = [[4.0, 2.7, 0.8], [0.0, 3.5, 4.3]];
const PEAK_A5: [[f64; 5]; 2] = [[2.0, 0.7, 0.8, 2.2, 0.5], [1.0, 1.5, 0.3, 0.9, 0.2]];
const PEAK_B5: [[f64; 5]; 2] = [[4.0, 2.7, 0.8, 2.3, 3.1], [0.0, 3.5, 4.3, 2.0, 3.2]];
const PEAK_OBS_DIM: usize = 5;

/// Default threshold of the noninvertible transform.
pub const DEFAULT_G3_THRESHOLD: f64 = 0.02;
/// Default log-stabilizer of the noninvertible inverse.
pub const DEFAULT_G3_EPS_LOG: f64 = 1e-10;
/// Soft threshold of the high-dimensional nonlinear system.
pub const HIGHDIM_SOFT_THRESHOLD: f64 = 0.03;

/// Precomputed fixed response profiles of the high-dimensional nonlinear
/// system (the moving bumps are composition-dependent and stay on demand).
#[derive(Debug, Clone, PartialEq)]
pub struct BumpProfiles {
    pub base_850_200: Array1<f64>,
    pub dip_810_6: Array1<f64>,
    pub bump_350_130: Array1<f64>,
    pub bump_450_70: Array1<f64>,
}

impl BumpProfiles {
    fn new() -> Self {
        BumpProfiles {
            base_850_200: rbf_profile(850.0, 200.0),
            dip_810_6: rbf_profile(810.0, 6.0),
            bump_350_130: rbf_profile(350.0, 130.0),
            bump_450_70: rbf_profile(450.0, 70.0),
        }
    }
}

/// One synthetic observation model mapping a composition to a noiseless
/// response vector.
#[derive(Debug, Clone, PartialEq)]
pub enum ForwardSystem {
    /// s = H m.
    Linear { h: Array2<f64> },
    /// s = H g(m) with the componentwise invertible g on three components.
    InvertibleG { h: Array2<f64> },
    /// Like `InvertibleG` but the third component passes through the
    /// thresholding transform g3.
    NoninvertibleG { h: Array2<f64>, threshold: f64 },
    /// Invertible system plus one linear obfuscating column (input dim 4,
    /// visible dim 3).
    ObfuscatedInvertible { h: Array2<f64> },
    ObfuscatedNoninvertible { h: Array2<f64>, threshold: f64 },
    /// s = ||H m||^2 (H m).
    ScaledMagnitude { h: Array2<f64> },
    /// s = H z with z = (m1, 0.4 m2, 0.2 m1^2, m3^2, m1 m2).
    Correlated { h: Array2<f64> },
    /// Sum of three bumps whose magnitudes and centers move with m.
    MovingPeak,
    /// Moving-peak bumps driven by five correlated terms of m.
    MovingPeakCorrelated,
    /// s = H m with the nonnegative designed matrix (columns checked >= 0).
    HighdimLinear { h: Array2<f64> },
    /// The designed 20-component nonlinear system on the same matrix.
    HighdimNonlinear {
        h: Array2<f64>,
        norm: ResponseNorm,
        profiles: Box<BumpProfiles>,
    },
}

impl ForwardSystem {
    pub fn linear(h: Array2<f64>) -> Self {
        ForwardSystem::Linear { h }
    }

    pub fn invertible_g(h: Array2<f64>) -> Result<Self> {
        expect_cols(&h, 3, "invertible-g system matrix")?;
        Ok(ForwardSystem::InvertibleG { h })
    }

    pub fn noninvertible_g(h: Array2<f64>, threshold: f64) -> Result<Self> {
        expect_cols(&h, 3, "noninvertible-g system matrix")?;
        check_threshold(threshold)?;
        Ok(ForwardSystem::NoninvertibleG { h, threshold })
    }

    pub fn obfuscated_invertible(h: Array2<f64>) -> Result<Self> {
        expect_cols(&h, 4, "obfuscated-invertible system matrix")?;
        Ok(ForwardSystem::ObfuscatedInvertible { h })
    }

    pub fn obfuscated_noninvertible(h: Array2<f64>, threshold: f64) -> Result<Self> {
        expect_cols(&h, 4, "obfuscated-noninvertible system matrix")?;
        check_threshold(threshold)?;
        Ok(ForwardSystem::ObfuscatedNoninvertible { h, threshold })
    }

    pub fn scaled_magnitude(h: Array2<f64>) -> Self {
        ForwardSystem::ScaledMagnitude { h }
    }

    pub fn correlated(h: Array2<f64>) -> Result<Self> {
        expect_cols(&h, 5, "correlated system matrix")?;
        Ok(ForwardSystem::Correlated { h })
    }

    pub fn moving_peak() -> Self {
        ForwardSystem::MovingPeak
    }

    pub fn moving_peak_correlated() -> Self {
        ForwardSystem::MovingPeakCorrelated
    }

    pub fn highdim_linear(h: Array2<f64>) -> Result<Self> {
        for (j, col) in h.columns().into_iter().enumerate() {
            let min = col.fold(f64::INFINITY, |a, &b| a.min(b));
            if min < 0.0 {
                return Err(Error::domain(format!(
                    "highdim-linear column {j} has a negative entry ({min})"
                )));
            }
        }
        Ok(ForwardSystem::HighdimLinear { h })
    }

    /// Builds the high-dimensional nonlinear system on the RBF matrix.
    pub fn highdim_nonlinear(h: Array2<f64>, norm: ResponseNorm) -> Result<Self> {
        if h.nrows() != RBF_ROWS || h.ncols() != RBF_COLS {
            return Err(Error::domain(format!(
                "highdim nonlinear system expects a {RBF_ROWS}x{RBF_COLS} matrix, got {}x{}",
                h.nrows(),
                h.ncols()
            )));
        }
        Ok(ForwardSystem::HighdimNonlinear {
            h,
            norm,
            profiles: Box::new(BumpProfiles::new()),
        })
    }

    pub fn kind(&self) -> SystemKind {
        match self {
            ForwardSystem::Linear { .. } => SystemKind::Linear,
            ForwardSystem::InvertibleG { .. } => SystemKind::InvertibleG,
            ForwardSystem::NoninvertibleG { .. } => SystemKind::NoninvertibleG,
            ForwardSystem::ObfuscatedInvertible { .. } => SystemKind::ObfuscatedInvertible,
            ForwardSystem::ObfuscatedNoninvertible { .. } => SystemKind::ObfuscatedNoninvertible,
            ForwardSystem::ScaledMagnitude { .. } => SystemKind::ScaledMagnitude,
            ForwardSystem::Correlated { .. } => SystemKind::Correlated,
            ForwardSystem::MovingPeak => SystemKind::MovingPeak,
            ForwardSystem::MovingPeakCorrelated => SystemKind::MovingPeakCorrelated,
            ForwardSystem::HighdimLinear { .. } => SystemKind::HighdimLinear,
            ForwardSystem::HighdimNonlinear { norm, .. } => match norm {
                ResponseNorm::None => SystemKind::HighdimNonlinear,
                ResponseNorm::Max => SystemKind::HighdimNonlinearMaxnorm,
                ResponseNorm::L2 => SystemKind::HighdimNonlinearL2norm,
            },
        }
    }

    /// Observation dimension L.
    pub fn obs_dim(&self) -> usize {
        match self {
            ForwardSystem::Linear { h }
            | ForwardSystem::InvertibleG { h }
            | ForwardSystem::NoninvertibleG { h, .. }
            | ForwardSystem::ObfuscatedInvertible { h }
            | ForwardSystem::ObfuscatedNoninvertible { h, .. }
            | ForwardSystem::ScaledMagnitude { h }
            | ForwardSystem::Correlated { h }
            | ForwardSystem::HighdimLinear { h }
            | ForwardSystem::HighdimNonlinear { h, .. } => h.nrows(),
            ForwardSystem::MovingPeak | ForwardSystem::MovingPeakCorrelated => PEAK_OBS_DIM,
        }
    }

    /// Full unknown dimension M.
    pub fn input_dim(&self) -> usize {
        match self {
            ForwardSystem::Linear { h }
            | ForwardSystem::ScaledMagnitude { h }
            | ForwardSystem::HighdimLinear { h } => h.ncols(),
            ForwardSystem::InvertibleG { .. }
            | ForwardSystem::NoninvertibleG { .. }
            | ForwardSystem::Correlated { .. }
            | ForwardSystem::MovingPeak
            | ForwardSystem::MovingPeakCorrelated => 3,
            ForwardSystem::ObfuscatedInvertible { .. }
            | ForwardSystem::ObfuscatedNoninvertible { .. } => 4,
            ForwardSystem::HighdimNonlinear { .. } => RBF_COLS,
        }
    }

    /// Visible (non-obfuscated) dimension M_v.
    pub fn visible_dim(&self) -> usize {
        match self {
            ForwardSystem::ObfuscatedInvertible { .. }
            | ForwardSystem::ObfuscatedNoninvertible { .. } => 3,
            ForwardSystem::HighdimNonlinear { .. } => 18,
            _ => self.input_dim(),
        }
    }

    /// True when some components are obfuscating (evaluation uses the
    /// normalized visible truth).
    pub fn is_obfuscated(&self) -> bool {
        self.visible_dim() != self.input_dim()
    }

    pub fn tag(&self) -> String {
        match self {
            ForwardSystem::NoninvertibleG { threshold, .. } => {
                format!("noninvertible-g(T={threshold})")
            }
            ForwardSystem::ObfuscatedNoninvertible { threshold, .. } => {
                format!("obfuscated-noninvertible(T={threshold})")
            }
            other => serde_json::to_string(&other.kind())
                .expect("kind serializes")
                .trim_matches('"')
                .to_string(),
        }
    }

    /// The linear system matrix, where the model has one.
    pub fn matrix(&self) -> Option<&Array2<f64>> {
        match self {
            ForwardSystem::Linear { h }
            | ForwardSystem::InvertibleG { h }
            | ForwardSystem::NoninvertibleG { h, .. }
            | ForwardSystem::ObfuscatedInvertible { h }
            | ForwardSystem::ObfuscatedNoninvertible { h, .. }
            | ForwardSystem::ScaledMagnitude { h }
            | ForwardSystem::Correlated { h }
            | ForwardSystem::HighdimLinear { h }
            | ForwardSystem::HighdimNonlinear { h, .. } => Some(h),
            ForwardSystem::MovingPeak | ForwardSystem::MovingPeakCorrelated => None,
        }
    }

    /// Columns of H acting on the visible components (the myopic system).
    pub fn visible_matrix(&self) -> Option<Array2<f64>> {
        match self {
            ForwardSystem::ObfuscatedInvertible { h }
            | ForwardSystem::ObfuscatedNoninvertible { h, .. } => {
                Some(h.slice(ndarray::s![.., ..3]).to_owned())
            }
            _ => self.matrix().cloned(),
        }
    }

    /// Columns of H acting on the obfuscating components (the H^1 block), if
    /// any.
    pub fn obfuscating_matrix(&self) -> Option<Array2<f64>> {
        match self {
            ForwardSystem::ObfuscatedInvertible { h }
            | ForwardSystem::ObfuscatedNoninvertible { h, .. } => {
                Some(h.slice(ndarray::s![.., 3..]).to_owned())
            }
            ForwardSystem::HighdimNonlinear { h, .. } => {
                Some(h.slice(ndarray::s![.., 18..]).to_owned())
            }
            _ => None,
        }
    }

    /// Noiseless response for one composition.
    pub fn apply(&self, m: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
        if m.len() != self.input_dim() {
            return Err(Error::DimMismatch {
                context: "forward system input",
                expected: self.input_dim(),
                got: m.len(),
            });
        }
        Ok(match self {
            ForwardSystem::Linear { h } | ForwardSystem::HighdimLinear { h } => h.dot(&m),
            ForwardSystem::InvertibleG { h } => h.dot(&g_invertible(m)),
            ForwardSystem::NoninvertibleG { h, threshold } => {
                h.dot(&g_noninvertible(m, *threshold))
            }
            ForwardSystem::ObfuscatedInvertible { h } => {
                let mut f = Array1::zeros(4);
                f.slice_mut(ndarray::s![..3])
                    .assign(&g_invertible(m.slice(ndarray::s![..3])));
                f[3] = m[3];
                h.dot(&f)
            }
            ForwardSystem::ObfuscatedNoninvertible { h, threshold } => {
                let mut f = Array1::zeros(4);
                f.slice_mut(ndarray::s![..3])
                    .assign(&g_noninvertible(m.slice(ndarray::s![..3]), *threshold));
                f[3] = m[3];
                h.dot(&f)
            }
            ForwardSystem::ScaledMagnitude { h } => {
                let r = h.dot(&m);
                let scale = r.dot(&r);
                r * scale
            }
            ForwardSystem::Correlated { h } => h.dot(&correlated_terms(m)),
            ForwardSystem::MovingPeak => {
                moving_peak_response(m.as_slice().unwrap(), &PEAK_A3, &PEAK_B3)
            }
            ForwardSystem::MovingPeakCorrelated => {
                let t = correlated_terms_peak(m);
                moving_peak_response(t.as_slice().unwrap(), &PEAK_A5, &PEAK_B5)
            }
            ForwardSystem::HighdimNonlinear { h, norm, profiles } => {
                let z = highdim_z(m);
                let mut s = h.dot(&z);
                s += &highdim_bumps(m, profiles);
                normalize_response(&mut s, *norm);
                s
            }
        })
    }

    /// Noiseless responses for every row of `x`.
    pub fn apply_batch(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimMismatch {
                context: "forward system batch input",
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        match self {
            // Linear kinds collapse to one matrix product.
            ForwardSystem::Linear { h } | ForwardSystem::HighdimLinear { h } => Ok(x.dot(&h.t())),
            ForwardSystem::HighdimNonlinear { h, norm, profiles } => {
                let n = x.nrows();
                let mut z = Array2::zeros((n, RBF_COLS));
                for (row, mut zr) in x.rows().into_iter().zip(z.rows_mut()) {
                    zr.assign(&highdim_z(row));
                }
                let mut s = z.dot(&h.t());
                for (row, mut sr) in x.rows().into_iter().zip(s.rows_mut()) {
                    sr += &highdim_bumps(row, profiles);
                    let mut owned = sr.to_owned();
                    normalize_response(&mut owned, *norm);
                    sr.assign(&owned);
                }
                Ok(s)
            }
            _ => {
                let mut out = Array2::zeros((x.nrows(), self.obs_dim()));
                for (row, mut o) in x.rows().into_iter().zip(out.rows_mut()) {
                    o.assign(&self.apply(row)?);
                }
                Ok(out)
            }
        }
    }

    /// Features f(m) such that the noiseless response is H f(m), for the
    /// systems where the estimator pipeline knows that factorization. For
    /// obfuscated kinds these are the myopic features of the visible part
    /// only (the training pairs exclude the obfuscating components).
    pub fn mle_features(&self, x: &Array2<f64>) -> Option<Array2<f64>> {
        match self {
            ForwardSystem::Linear { .. } | ForwardSystem::HighdimLinear { .. } => Some(x.clone()),
            ForwardSystem::InvertibleG { .. } => Some(map_rows(x, 3, g_invertible)),
            ForwardSystem::NoninvertibleG { threshold, .. } => {
                let t = *threshold;
                Some(map_rows(x, 3, |r| g_noninvertible(r, t)))
            }
            ForwardSystem::ObfuscatedInvertible { .. } => Some(map_rows(x, 3, |r| {
                g_invertible(r.slice(ndarray::s![..3]))
            })),
            ForwardSystem::ObfuscatedNoninvertible { threshold, .. } => {
                let t = *threshold;
                Some(map_rows(x, 3, |r| {
                    g_noninvertible(r.slice(ndarray::s![..3]), t)
                }))
            }
            _ => None,
        }
    }

    /// The componentwise inverse used by the oracle cascade, if one exists.
    pub fn cascade_inverse(&self) -> Option<CascadeInverse> {
        match self {
            ForwardSystem::Linear { .. } | ForwardSystem::HighdimLinear { .. } => {
                Some(CascadeInverse::Identity)
            }
            ForwardSystem::InvertibleG { .. } | ForwardSystem::ObfuscatedInvertible { .. } => {
                Some(CascadeInverse::InvertibleG)
            }
            ForwardSystem::NoninvertibleG { threshold, .. }
            | ForwardSystem::ObfuscatedNoninvertible { threshold, .. } => {
                Some(CascadeInverse::NoninvertibleG {
                    threshold: *threshold,
                    eps_log: DEFAULT_G3_EPS_LOG,
                })
            }
            _ => None,
        }
    }
}

fn expect_cols(h: &Array2<f64>, cols: usize, what: &'static str) -> Result<()> {
    if h.ncols() != cols {
        return Err(Error::DimMismatch {
            context: what,
            expected: cols,
            got: h.ncols(),
        });
    }
    Ok(())
}

fn check_threshold(threshold: f64) -> Result<()> {
    if !(0.0..1.0).contains(&threshold) || threshold == 0.0 {
        return Err(Error::domain("threshold must lie in (0, 1)"));
    }
    Ok(())
}

fn map_rows<F>(x: &Array2<f64>, out_dim: usize, f: F) -> Array2<f64>
where
    F: Fn(ArrayView1<'_, f64>) -> Array1<f64>,
{
    let mut out = Array2::zeros((x.nrows(), out_dim));
    for (row, mut o) in x.rows().into_iter().zip(out.rows_mut()) {
        o.assign(&f(row));
    }
    out
}

fn normalize_response(s: &mut Array1<f64>, norm: ResponseNorm) {
    match norm {
        ResponseNorm::None => {}
        ResponseNorm::Max => {
            let max = s.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            if max != 0.0 {
                s.mapv_inplace(|v| v / max);
            }
        }
        ResponseNorm::L2 => {
            let norm = s.dot(s).sqrt();
            if norm != 0.0 {
                s.mapv_inplace(|v| v / norm);
            }
        }
    }
}

/// g(m) = (m1^2, sqrt(m2) + 0.1, m3).
pub fn g_invertible(m: ArrayView1<'_, f64>) -> Array1<f64> {
    ndarray::array![m[0] * m[0], m[1].max(0.0).sqrt() + 0.1, m[2]]
}

/// g^inv(x) = (sqrt(max(0, x1)), (max(0, x2 - 0.1))^2, x3).
///
/// Noise can push the argument outside g's range, hence the clamps.
pub fn g_invertible_inv(x: ArrayView1<'_, f64>) -> Array1<f64> {
    let a = x[0].max(0.0).sqrt();
    let b = (x[1] - 0.1).max(0.0);
    ndarray::array![a, b * b, x[2]]
}

/// The features of the noninvertible system: g on the first two components,
/// g3 on the third.
pub fn g_noninvertible(m: ArrayView1<'_, f64>, threshold: f64) -> Array1<f64> {
    ndarray::array![
        m[0] * m[0],
        m[1].max(0.0).sqrt() + 0.1,
        g3(m[2], threshold)
    ]
}

/// The thresholding transform g3(x) = exp(max(0, x - T)) - 1.
pub fn g3(x: f64, threshold: f64) -> f64 {
    (x - threshold).max(0.0).exp_m1()
}

/// Loss-optimal inverse of [`g3`]: recovers x exactly above the threshold and
/// predicts T/2 inside the destroyed region [0, T].
///
/// The branch tests the recovered log term strictly against zero, so an
/// observation of exactly zero (the thresholded plateau) maps to T/2.
pub fn g3_inv(x: f64, threshold: f64, eps_log: f64) -> f64 {
    let log_term = eps_log.max(x + 1.0).ln();
    if log_term > 0.0 {
        log_term + threshold
    } else {
        threshold / 2.0
    }
}

/// Componentwise inverse applied between the pseudo-inverse and the simplex
/// projection in the oracle/benchmark cascade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CascadeInverse {
    Identity,
    InvertibleG,
    NoninvertibleG { threshold: f64, eps_log: f64 },
}

impl CascadeInverse {
    pub fn apply(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        match self {
            CascadeInverse::Identity => x.to_owned(),
            CascadeInverse::InvertibleG => g_invertible_inv(x),
            CascadeInverse::NoninvertibleG { threshold, eps_log } => {
                let a = x[0].max(0.0).sqrt();
                let b = (x[1] - 0.1).max(0.0);
                ndarray::array![a, b * b, g3_inv(x[2], *threshold, *eps_log)]
            }
        }
    }
}

/// z = (m1, 0.4 m2, 0.2 m1^2, m3^2, m1 m2).
fn correlated_terms(m: ArrayView1<'_, f64>) -> Array1<f64> {
    ndarray::array![
        m[0],
        0.4 * m[1],
        0.2 * m[0] * m[0],
        m[2] * m[2],
        m[0] * m[1]
    ]
}

/// m~ = (m1, 0.4 m2, 0.2 m1^2, m3^2, m2 m3), the correlated tuple of the
/// moving-peak variant (its last slot differs from [`correlated_terms`]).
fn correlated_terms_peak(m: ArrayView1<'_, f64>) -> Array1<f64> {
    ndarray::array![
        m[0],
        0.4 * m[1],
        0.2 * m[0] * m[0],
        m[2] * m[2],
        m[1] * m[2]
    ]
}

/// Sum of decaying bumps c_i * exp(-(v - center_i)^2) over v = 1..=5, where
/// magnitude and center interpolate linearly in the driving weight.
///
/// The printed form carries a positive exponent, which blows up and
/// contradicts the plotted localized bumps; the decaying sign is used, with
/// the squared deviation applied directly (no width divisor).
fn moving_peak_response<const K: usize>(
    weights: &[f64],
    a: &[[f64; K]; 2],
    b: &[[f64; K]; 2],
) -> Array1<f64> {
    debug_assert_eq!(weights.len(), K);
    let mut out = Array1::zeros(PEAK_OBS_DIM);
    for (i, &w) in weights.iter().enumerate() {
        let c = (a[0][i] - a[1][i]) * w + a[1][i];
        let center = (b[0][i] - b[1][i]) * w + b[1][i];
        for (j, o) in out.iter_mut().enumerate() {
            let v = (j + 1) as f64;
            *o += c * (-(v - center) * (v - center)).exp();
        }
    }
    out
}

/// One bump of the three-component moving-peak system, for shape diagnostics.
pub fn moving_peak_bump(component: usize, weight: f64) -> Array1<f64> {
    assert!(component < 3);
    let c = (PEAK_A3[0][component] - PEAK_A3[1][component]) * weight + PEAK_A3[1][component];
    let center = (PEAK_B3[0][component] - PEAK_B3[1][component]) * weight + PEAK_B3[1][component];
    let mut out = Array1::zeros(PEAK_OBS_DIM);
    for (j, o) in out.iter_mut().enumerate() {
        let v = (j + 1) as f64;
        *o = c * (-(v - center) * (v - center)).exp();
    }
    out
}

/// L-by-M matrix with i.i.d. standard-normal entries, plus its condition
/// number.
pub fn build_gaussian_matrix<R: Rng>(
    l: usize,
    m: usize,
    rng: &mut R,
) -> Result<(Array2<f64>, f64)> {
    if m < 1 || l < m {
        return Err(Error::domain(format!(
            "gaussian system matrix requires L >= M >= 1, got L={l}, M={m}"
        )));
    }
    let mut h = Array2::zeros((l, m));
    for v in h.iter_mut() {
        *v = StandardNormal.sample(rng);
    }
    let cond = condition_number(&h)?;
    Ok((h, cond))
}

/// s + i.i.d. N(0, sigma^2) per component.
pub fn add_noise<R: Rng>(s: ArrayView1<'_, f64>, sigma: f64, rng: &mut R) -> Array1<f64> {
    debug_assert!(sigma >= 0.0);
    let mut out = s.to_owned();
    if sigma > 0.0 {
        for v in out.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v += sigma * z;
        }
    }
    out
}

/// In-place noise for a whole response matrix.
pub fn add_noise_matrix<R: Rng>(s: &mut Array2<f64>, sigma: f64, rng: &mut R) {
    debug_assert!(sigma >= 0.0);
    if sigma == 0.0 {
        return;
    }
    for v in s.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v += sigma * z;
    }
}

/// Mean noiseless response norms of two systems over shared samples:
/// E||a(m)|| / E||b(m)||.
pub fn intensity_ratio(
    sys_a: &ForwardSystem,
    sys_b: &ForwardSystem,
    samples: &Array2<f64>,
) -> Result<f64> {
    let ra = sys_a.apply_batch(samples)?;
    let rb = sys_b.apply_batch(samples)?;
    let mean_norm = |r: &Array2<f64>| {
        r.rows()
            .into_iter()
            .map(|row| row.dot(&row).sqrt())
            .sum::<f64>()
            / r.nrows() as f64
    };
    Ok(mean_norm(&ra) / mean_norm(&rb))
}

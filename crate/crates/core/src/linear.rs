//! System-matrix MLE, SVD pseudo-inverse, the oracle/benchmark estimators
//! with simplex projection and nonlinear-cascade variants, and the
//! closed-form error bounds for linear systems.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{project_rows, project_to_simplex, CompositionVector};
use crate::systems::CascadeInverse;

/// Relative singular-value cutoff for rank decisions and pseudo-inversion.
const SV_CUTOFF: f64 = 1e-12;

fn to_nalgebra(a: &Array2<f64>) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_nalgebra(a: &nalgebra::DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.nrows(), a.ncols()), |(i, j)| a[(i, j)])
}

/// Singular values of `h`, sorted descending.
pub fn singular_values(h: &Array2<f64>) -> Result<Vec<f64>> {
    let svd = to_nalgebra(h).svd(false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("SVD produced non-finite singular values"));
    }
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(s)
}

/// Ratio of the largest to the smallest singular value.
pub fn condition_number(h: &Array2<f64>) -> Result<f64> {
    let s = singular_values(h)?;
    let smallest = *s.last().expect("non-empty matrix");
    Ok(if smallest == 0.0 {
        f64::INFINITY
    } else {
        s[0] / smallest
    })
}

/// Least-squares estimate of a system matrix with SVD diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    /// The fitted L x M matrix.
    pub h_hat: Array2<f64>,
    /// Singular values of `h_hat`, sorted descending.
    pub singular_values: Vec<f64>,
    pub condition_number: f64,
    /// Relative Frobenius error against a supplied true matrix.
    pub frob_rel_err_vs: Option<f64>,
}

impl LinearFit {
    /// Fills `frob_rel_err_vs` against the true matrix.
    pub fn with_reference(mut self, h_true: &Array2<f64>) -> Self {
        let diff = &self.h_hat - h_true;
        let num = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        let den = h_true.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.frob_rel_err_vs = Some(num / den);
        self
    }
}

/// Maximum-likelihood estimate of the system matrix from regressors X
/// (n x M) and responses Y (n x L): the minimizer of ||Y - X H^T||_F,
/// computed through the SVD of X.
pub fn mle_system_matrix(x: &Array2<f64>, y: &Array2<f64>) -> Result<LinearFit> {
    let (n, m) = x.dim();
    if y.nrows() != n {
        return Err(Error::DimMismatch {
            context: "MLE sample counts",
            expected: n,
            got: y.nrows(),
        });
    }
    if n < m {
        return Err(Error::domain(format!(
            "MLE needs at least as many samples as unknowns (n={n} < M={m})"
        )));
    }
    let svd = to_nalgebra(x).svd(true, true);
    let mut s: Vec<f64> = svd.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&v| v > SV_CUTOFF * s[0])
        .count();
    if rank < m {
        return Err(Error::RankDeficient { rank, dim: m });
    }
    // H^T = V S^-1 U^T Y.
    let u = from_nalgebra(&svd.u.expect("u requested"));
    let vt = from_nalgebra(&svd.v_t.expect("v_t requested"));
    let mut ut_y = u.t().dot(y);
    for (k, mut row) in ut_y.rows_mut().into_iter().enumerate() {
        row.mapv_inplace(|v| v / svd.singular_values[k]);
    }
    let h_hat = vt.t().dot(&ut_y).t().to_owned();
    let sv = singular_values(&h_hat)?;
    let cond = if *sv.last().unwrap() == 0.0 {
        f64::INFINITY
    } else {
        sv[0] / sv.last().unwrap()
    };
    Ok(LinearFit {
        h_hat,
        singular_values: sv,
        condition_number: cond,
        frob_rel_err_vs: None,
    })
}

/// Moore-Penrose pseudo-inverse (M x L) through the SVD, with singular values
/// below 1e-12 * s_1 treated as rank deficiency.
pub fn pseudo_inverse(h: &Array2<f64>) -> Result<Array2<f64>> {
    let m = h.ncols();
    let svd = to_nalgebra(h).svd(true, true);
    let s_max = svd
        .singular_values
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&v| v > SV_CUTOFF * s_max)
        .count();
    if rank < m {
        return Err(Error::RankDeficient { rank, dim: m });
    }
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    // V S^-1 U^T.
    let mut vs = vt.transpose();
    for k in 0..m {
        let inv = 1.0 / svd.singular_values[k];
        for i in 0..m {
            vs[(i, k)] *= inv;
        }
    }
    let pinv = vs * u.transpose();
    Ok(from_nalgebra(&pinv))
}

/// A pseudo-inverse estimator with an optional componentwise cascade inverse:
/// m_hat = P(g_inv(H_pinv s)).
#[derive(Debug, Clone)]
pub struct PinvEstimator {
    pinv: Array2<f64>,
    inverse: Option<CascadeInverse>,
}

impl PinvEstimator {
    pub fn from_matrix(h: &Array2<f64>, inverse: Option<CascadeInverse>) -> Result<Self> {
        Ok(PinvEstimator {
            pinv: pseudo_inverse(h)?,
            inverse,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.pinv.nrows()
    }

    pub fn estimate(&self, s: ArrayView1<'_, f64>) -> Result<CompositionVector> {
        if s.len() != self.pinv.ncols() {
            return Err(Error::DimMismatch {
                context: "estimator observation",
                expected: self.pinv.ncols(),
                got: s.len(),
            });
        }
        let raw = self.pinv.dot(&s);
        let mapped = match &self.inverse {
            Some(inv) => inv.apply(raw.view()),
            None => raw,
        };
        Ok(project_to_simplex(mapped.view()))
    }

    /// Row-wise estimates for a whole observation matrix, projected onto the
    /// simplex.
    pub fn estimate_batch(&self, y: &Array2<f64>) -> Result<Array2<f64>> {
        if y.ncols() != self.pinv.ncols() {
            return Err(Error::DimMismatch {
                context: "estimator observation batch",
                expected: self.pinv.ncols(),
                got: y.ncols(),
            });
        }
        let mut raw = y.dot(&self.pinv.t());
        if let Some(inv) = &self.inverse {
            for mut row in raw.rows_mut() {
                let mapped = inv.apply(row.view());
                row.assign(&mapped);
            }
        }
        project_rows(&mut raw);
        Ok(raw)
    }
}

/// One-shot oracle estimate P(g_inv(H_pinv s)); `g_inv` defaults to identity.
pub fn oracle_estimate(
    h: &Array2<f64>,
    s: ArrayView1<'_, f64>,
    g_inv: Option<CascadeInverse>,
) -> Result<CompositionVector> {
    PinvEstimator::from_matrix(h, g_inv)?.estimate(s)
}

/// Expected unconstrained inversion error in percent:
/// 100 * sigma * sqrt(sum_k s_k^-2).
pub fn unconstrained_oracle_error(h: &Array2<f64>, sigma: f64) -> Result<f64> {
    if sigma < 0.0 {
        return Err(Error::domain("sigma must be non-negative"));
    }
    let s = singular_values(h)?;
    let m = h.ncols();
    let rank = s.iter().filter(|&&v| v > SV_CUTOFF * s[0]).count();
    if rank < m {
        return Err(Error::RankDeficient { rank, dim: m });
    }
    let sum: f64 = s.iter().map(|v| 1.0 / (v * v)).sum();
    Ok(100.0 * sigma * sum.sqrt())
}

/// Mass of the obfuscating components: either just their l1 norm, or the full
/// vector (which additionally yields the exact obfuscation term).
pub enum ObfuscatingMass<'a> {
    L1(f64),
    Vector(ArrayView1<'a, f64>),
}

/// The squared-error decomposition of the myopic estimator under an
/// obfuscating sub-system H^1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObfuscatedBound {
    /// ||m1||_1 * lambda^2(H_pinv H^1), lambda being the largest singular
    /// value (the printed "largest eigenvalue" is undefined for the
    /// non-square product; the operator norm is what makes the chain valid).
    pub obf_term_bound: f64,
    /// ||H_pinv H^1 m1||^2 when the full m1 is supplied.
    pub obf_term_exact: Option<f64>,
    /// sigma^2 sum_k s_k^-2.
    pub noise_term: f64,
    /// obf_term_bound + noise_term (squared error).
    pub bound: f64,
    /// The companion chain printed with a first power of lambda; kept for
    /// reference and flagged as a probable typo (dimensionally inconsistent).
    pub first_power_variant: f64,
}

/// Bound on the myopic estimator's squared error given the obfuscating block
/// H^1 and the l1 mass of the obfuscating components.
pub fn obfuscated_error_bound(
    h: &Array2<f64>,
    h1: &Array2<f64>,
    m1: ObfuscatingMass<'_>,
    sigma: f64,
) -> Result<ObfuscatedBound> {
    if h1.nrows() != h.nrows() {
        return Err(Error::DimMismatch {
            context: "obfuscating block rows",
            expected: h.nrows(),
            got: h1.nrows(),
        });
    }
    let m1_l1 = match &m1 {
        ObfuscatingMass::L1(v) => *v,
        ObfuscatingMass::Vector(v) => v.iter().map(|x| x.abs()).sum(),
    };
    if !(0.0..=1.0).contains(&m1_l1) {
        return Err(Error::domain("obfuscating mass must lie in [0, 1]"));
    }
    let pinv = pseudo_inverse(h)?;
    let cross = pinv.dot(h1);
    let lambda = singular_values(&cross)?[0];
    let s = singular_values(h)?;
    let noise_term = sigma * sigma * s.iter().map(|v| 1.0 / (v * v)).sum::<f64>();
    let obf_term_exact = match m1 {
        ObfuscatingMass::Vector(v) => {
            if v.len() != h1.ncols() {
                return Err(Error::DimMismatch {
                    context: "obfuscating vector",
                    expected: h1.ncols(),
                    got: v.len(),
                });
            }
            let mapped = cross.dot(&v);
            Some(mapped.dot(&mapped))
        }
        ObfuscatingMass::L1(_) => None,
    };
    let obf_term_bound = m1_l1 * lambda * lambda;
    Ok(ObfuscatedBound {
        obf_term_bound,
        obf_term_exact,
        noise_term,
        bound: obf_term_bound + noise_term,
        first_power_variant: m1_l1 * lambda + noise_term,
    })
}

/// Optimal constant inversion inside a thresholded region [0, T]: the
/// estimate T/2 and its RMS loss sqrt(T^3 / 12).
pub fn thresholding_floor(threshold: f64) -> Result<(f64, f64)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::domain("threshold must lie in (0, 1]"));
    }
    Ok((threshold / 2.0, (threshold.powi(3) / 12.0).sqrt()))
}

/// Empirical RMS of ||H_pinv n|| over Monte-Carlo noise draws, in percent:
/// the sampling counterpart of [`unconstrained_oracle_error`].
pub fn mc_unconstrained_error<R: rand::Rng>(
    h: &Array2<f64>,
    sigma: f64,
    draws: usize,
    rng: &mut R,
) -> Result<f64> {
    use rand_distr::{Distribution, StandardNormal};
    let pinv = pseudo_inverse(h)?;
    let l = h.nrows();
    let chunk = 4096.min(draws);
    let mut sum_sq = 0.0;
    let mut done = 0;
    let mut buf = Array2::zeros((chunk, l));
    while done < draws {
        let take = chunk.min(draws - done);
        for v in buf.slice_mut(ndarray::s![..take, ..]).iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = sigma * z;
        }
        let mapped = buf.slice(ndarray::s![..take, ..]).dot(&pinv.t());
        for row in mapped.rows() {
            sum_sq += row.dot(&row);
        }
        done += take;
    }
    Ok(100.0 * (sum_sq / draws as f64).sqrt())
}

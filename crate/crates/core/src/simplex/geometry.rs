//! Closed-form volume-concentration quantities for the uniform distribution
//! on a high-dimensional simplex, with Monte-Carlo verifiers.
//!
//! The verifiers report (estimate, standard error, closed form) triples so a
//! 3-sigma acceptance check is mechanical.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sample::sample_uniform_simplex;
use crate::error::{Error, Result};

/// Mean of each component under the uniform distribution on the M-simplex.
pub fn uniform_component_mean(m: usize) -> f64 {
    1.0 / m as f64
}

/// Variance of each component: (M-1) / ((M+1) M^2).
pub fn uniform_component_variance(m: usize) -> f64 {
    let mf = m as f64;
    (mf - 1.0) / ((mf + 1.0) * mf * mf)
}

/// Probability that a uniform draw lies within `epsilon` of some end-member:
/// M * epsilon^(M-1), clamped to [0, 1].
///
/// The formula double-counts overlapping corners when epsilon > 0.5, hence the
/// clamp; Monte-Carlo comparisons are restricted to epsilon <= 0.5.
pub fn corner_mass(m: usize, epsilon: f64) -> f64 {
    debug_assert!(m >= 2);
    debug_assert!(epsilon > 0.0 && epsilon <= 1.0);
    (m as f64 * epsilon.powi(m as i32 - 1)).clamp(0.0, 1.0)
}

/// Probability that one fixed component exceeds c times the mean 1/M:
/// (1 - c/M)^(M-1). Converges to e^(-c) as M grows.
pub fn tail_above_scaled_mean(m: usize, c: f64) -> f64 {
    debug_assert!(m >= 2);
    debug_assert!((0.0..=m as f64).contains(&c));
    (1.0 - c / m as f64).powi(m as i32 - 1)
}

/// Chebyshev bound on P(|x_1 - 1/M| >= a): min(1, Var(x_1) / a^2).
pub fn band_bound(m: usize, a: f64) -> f64 {
    debug_assert!(a > 0.0);
    (uniform_component_variance(m) / (a * a)).min(1.0)
}

/// One Monte-Carlo verification row.
///
/// `std_err` is computed from the closed form (the null hypothesis being
/// tested), so zero-hit outcomes on astronomically rare events still compare
/// sensibly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McCheck {
    pub estimate: f64,
    pub std_err: f64,
    pub closed_form: f64,
}

impl McCheck {
    fn binomial(hits: u64, n: u64, closed_form: f64) -> Self {
        let p = closed_form.clamp(0.0, 1.0);
        McCheck {
            estimate: hits as f64 / n as f64,
            std_err: (p * (1.0 - p) / n as f64).sqrt(),
            closed_form,
        }
    }

    /// |estimate - closed_form| <= n_sigma * std_err (with an exact-match
    /// escape for degenerate zero-variance cases).
    pub fn within(&self, n_sigma: f64) -> bool {
        let dev = (self.estimate - self.closed_form).abs();
        dev <= n_sigma * self.std_err || dev == 0.0
    }
}

/// Count draws with any component >= 1 - epsilon against [`corner_mass`].
pub fn mc_corner_mass<R: Rng>(m: usize, epsilon: f64, n: usize, rng: &mut R) -> Result<McCheck> {
    if !(0.0..=0.5).contains(&epsilon) {
        return Err(Error::domain(
            "corner-mass MC comparison requires epsilon in (0, 0.5]",
        ));
    }
    let threshold = 1.0 - epsilon;
    let mut hits = 0u64;
    let chunk = 65_536;
    let mut remaining = n;
    while remaining > 0 {
        let take = remaining.min(chunk);
        let x = sample_uniform_simplex(m, take, rng)?;
        for row in x.rows() {
            if row.iter().any(|&v| v >= threshold) {
                hits += 1;
            }
        }
        remaining -= take;
    }
    Ok(McCheck::binomial(hits, n as u64, corner_mass(m, epsilon)))
}

/// Count draws with first component > c/M against [`tail_above_scaled_mean`].
pub fn mc_tail_above_scaled_mean<R: Rng>(
    m: usize,
    c: f64,
    n: usize,
    rng: &mut R,
) -> Result<McCheck> {
    let threshold = c / m as f64;
    let mut hits = 0u64;
    let chunk = 65_536;
    let mut remaining = n;
    while remaining > 0 {
        let take = remaining.min(chunk);
        let x = sample_uniform_simplex(m, take, rng)?;
        for row in x.rows() {
            if row[0] > threshold {
                hits += 1;
            }
        }
        remaining -= take;
    }
    Ok(McCheck::binomial(
        hits,
        n as u64,
        tail_above_scaled_mean(m, c),
    ))
}

/// Empirical P(|x_1 - 1/M| >= a), paired with the Chebyshev bound.
///
/// The closed form here is an upper bound, not an equality, so the meaningful
/// check is `estimate <= closed_form` (plus sampling slack).
pub fn mc_band_tail<R: Rng>(m: usize, a: f64, n: usize, rng: &mut R) -> Result<McCheck> {
    let mean = uniform_component_mean(m);
    let mut hits = 0u64;
    let chunk = 65_536;
    let mut remaining = n;
    while remaining > 0 {
        let take = remaining.min(chunk);
        let x = sample_uniform_simplex(m, take, rng)?;
        for row in x.rows() {
            if (row[0] - mean).abs() >= a {
                hits += 1;
            }
        }
        remaining -= take;
    }
    let estimate = hits as f64 / n as f64;
    Ok(McCheck {
        estimate,
        std_err: (estimate * (1.0 - estimate) / n as f64).sqrt(),
        closed_form: band_bound(m, a),
    })
}

/// Parameters for one volume-concentration query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationQuery {
    /// Simplex dimension M (>= 2).
    pub m: usize,
    /// Corner depth epsilon in (0, 1].
    pub epsilon: f64,
    /// Mean multiplier c >= 0.
    pub c: f64,
    /// Half band width a (fraction).
    pub a: f64,
}

impl ConcentrationQuery {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::domain("concentration query requires M >= 2"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::domain("epsilon must lie in (0, 1]"));
        }
        if self.c < 0.0 || self.c > self.m as f64 {
            return Err(Error::domain("c must lie in [0, M]"));
        }
        if self.a <= 0.0 {
            return Err(Error::domain("band half-width must be positive"));
        }
        Ok(())
    }

    pub fn corner_mass(&self) -> f64 {
        corner_mass(self.m, self.epsilon)
    }

    pub fn tail_above_scaled_mean(&self) -> f64 {
        tail_above_scaled_mean(self.m, self.c)
    }

    pub fn band_bound(&self) -> f64 {
        band_bound(self.m, self.a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn corner_mass_known_values() {
        // Two corner segments of half length cover all of S^2.
        assert_abs_diff_eq!(corner_mass(2, 0.5), 1.0);
        assert_abs_diff_eq!(corner_mass(3, 0.1), 0.03, epsilon = 1e-15);
    }

    #[test]
    fn corner_mass_matches_mc() {
        let mut rng = substream(11, "corner");
        let check = mc_corner_mass(10, 0.3, 10_000_000, &mut rng).unwrap();
        assert!(
            check.within(3.0),
            "corner mass MC {} vs {} (se {})",
            check.estimate,
            check.closed_form,
            check.std_err
        );
    }

    #[test]
    fn tail_known_values() {
        assert_abs_diff_eq!(tail_above_scaled_mean(2, 1.0), 0.5);
        let v = tail_above_scaled_mean(1000, 2.0);
        assert!((v - (-2.0f64).exp()).abs() < 1e-4, "{v}");
    }

    #[test]
    fn tail_matches_mc() {
        let mut rng = substream(12, "tail");
        let check = mc_tail_above_scaled_mean(10, 3.0, 10_000_000, &mut rng).unwrap();
        assert!(
            check.within(3.0),
            "tail MC {} vs {} (se {})",
            check.estimate,
            check.closed_form,
            check.std_err
        );
    }

    #[test]
    fn band_bound_clamps_and_bounds() {
        // A band of half-width 1 covers the whole domain.
        let b = band_bound(3, 1.0);
        assert!(b <= 1.0);
        let mut rng = substream(13, "band1");
        let mc = mc_band_tail(3, 1.0, 10_000, &mut rng).unwrap();
        assert_eq!(mc.estimate, 0.0);
    }

    #[test]
    fn band_bound_dominates_empirical_tail() {
        let bound = band_bound(20, 2.0 / 20.0);
        assert_abs_diff_eq!(bound, 0.25 * 19.0 / 21.0, epsilon = 1e-15);
        let mut rng = substream(14, "band2");
        let mc = mc_band_tail(20, 2.0 / 20.0, 1_000_000, &mut rng).unwrap();
        assert!(mc.estimate <= bound, "{} > {}", mc.estimate, bound);
    }

    #[test]
    fn band_bound_large_m_limit() {
        // a = k/M with k = 2: bound -> 1/k^2 = 0.25 as M grows.
        let b = band_bound(10_000, 2.0 / 10_000.0);
        assert!((b - 0.25).abs() < 1e-3, "{b}");
    }

    #[test]
    fn query_validation() {
        let q = ConcentrationQuery {
            m: 10,
            epsilon: 0.3,
            c: 2.0,
            a: 0.1,
        };
        q.validate().unwrap();
        assert!(ConcentrationQuery { m: 1, ..q }.validate().is_err());
        assert!(ConcentrationQuery { epsilon: 0.0, ..q }.validate().is_err());
    }
}

//! The designed 1000x20 radial-basis system matrix and the high-dimensional
//! nonlinear feature map built on it.

use ndarray::{Array1, ArrayView1};

use super::{BumpProfiles, HIGHDIM_SOFT_THRESHOLD};
use crate::error::{Error, Result};

/// Observation dimension of the designed high-dimensional systems.
pub const RBF_ROWS: usize = 1000;
/// Unknown dimension of the designed high-dimensional systems.
pub const RBF_COLS: usize = 20;

/// phi(a, b) sampled on the index grid v = 1..=1000:
/// exp(-(v - a)^2 / (2 b^2)).
pub fn rbf_profile(center: f64, width: f64) -> Array1<f64> {
    let denom = 2.0 * width * width;
    Array1::from_iter((1..=RBF_ROWS).map(|v| {
        let d = v as f64 - center;
        (-d * d / denom).exp()
    }))
}

fn max_of(x: &Array1<f64>) -> f64 {
    x.fold(f64::NEG_INFINITY, |a, &b| a.max(b))
}

/// Builds the 1000x20 response-curve matrix. The column formulas are
/// calibrated to the index grid, so any other row count is rejected.
///
/// All columns are nonnegative by design; tiny negative residue (magnitude
/// below 1e-12) is clamped to zero.
pub fn build_rbf_matrix(l: usize) -> Result<ndarray::Array2<f64>> {
    if l != RBF_ROWS {
        return Err(Error::domain(format!(
            "the designed matrix is only defined for L={RBF_ROWS}, got {l}"
        )));
    }
    let phi = rbf_profile;
    let mut cols: Vec<Array1<f64>> = Vec::with_capacity(RBF_COLS);
    cols.push(phi(100.0, 10.0));
    cols.push(0.2 * &phi(120.0, 15.0) + 0.7 * &phi(520.0, 30.0));
    cols.push(0.8 * &phi(120.0, 17.0) + 0.1 * &phi(525.0, 25.0));
    cols.push(0.6 * &phi(200.0, 40.0));
    cols.push(0.4 * &phi(300.0, 100.0));
    cols.push(0.6 * &phi(400.0, 40.0));
    cols.push(0.9 * &phi(500.0, 15.0));
    cols.push(0.5 * &phi(600.0, 10.0));
    cols.push(phi(700.0, 60.0));
    cols.push(0.2 * &phi(800.0, 15.0) + 0.4 * &phi(330.0, 30.0));
    cols.push(&phi(850.0, 200.0) - &(0.3 * &phi(700.0, 30.0)) - 0.1 * &phi(890.0, 8.0));
    let wide = phi(1500.0, 500.0);
    let wide_max = max_of(&wide);
    cols.push(3.0 * &wide / (3.0 * wide_max));
    cols.push(0.7 * &phi(850.0, 200.0) + 0.2 * &(&wide / wide_max));
    cols.push(&phi(850.0, 200.0) - &(0.7 * &phi(900.0, 10.0)) - 0.9 * &phi(810.0, 6.0));
    cols.push(&phi(850.0, 200.0) - &(0.7 * &phi(900.0, 10.0)) - 0.2 * &phi(830.0, 15.0));
    cols.push(&phi(850.0, 200.0) - &(0.7 * &phi(900.0, 10.0)) - 0.1 * &phi(830.0, 20.0));
    cols.push(&phi(850.0, 200.0) - &(0.8 * &phi(940.0, 15.0)));
    cols.push(&phi(850.0, 200.0) - &(0.5 * &phi(800.0, 10.0)));
    cols.push(
        0.1 * &phi(850.0, 200.0) + 0.17 * &phi(350.0, 30.0) + 0.1 * &phi(450.0, 20.0),
    );
    cols.push(0.04 * &phi(850.0, 500.0));

    let mut h = ndarray::Array2::zeros((RBF_ROWS, RBF_COLS));
    for (j, col) in cols.into_iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            debug_assert!(v > -1e-12, "column {j} entry {i} is negative: {v}");
            h[(i, j)] = v.max(0.0);
        }
    }
    Ok(h)
}

/// Soft threshold f_T(x) = max(x - T, 0) with T = 3%.
pub fn soft_threshold(x: f64) -> f64 {
    (x - HIGHDIM_SOFT_THRESHOLD).max(0.0)
}

/// The 20-dimensional intermediate vector z of the high-dimensional nonlinear
/// system. Components 4 and 14 (1-based) are zeroed here; they contribute
/// through the moving-peak and moving-valley bumps instead.
pub fn highdim_z(m: ArrayView1<'_, f64>) -> Array1<f64> {
    debug_assert_eq!(m.len(), RBF_COLS);
    let mut z = m.to_owned();
    z[3] = 0.0;
    z[13] = 0.0;
    z[8] = soft_threshold(m[8]);
    z[10] = soft_threshold(m[10]).exp_m1();
    z[16] = m[16].powf(1.5);
    z[17] = m[17].powf(0.9) + m[17] * m[17];
    z
}

/// The additive bump terms: a peak travelling with m_4, a valley travelling
/// with m_14, and two correlated bumps driven by m5*m6 and 3*m6*m7.
pub fn highdim_bumps(m: ArrayView1<'_, f64>, profiles: &BumpProfiles) -> Array1<f64> {
    debug_assert_eq!(m.len(), RBF_COLS);
    let mut out = Array1::zeros(RBF_ROWS);
    if m[3] != 0.0 {
        let peak = 100.0 * m[3] + 200.0;
        out += &(m[3] * 0.6 * &rbf_profile(peak, 40.0));
    }
    if m[13] != 0.0 {
        let valley = 100.0 * (1.0 - m[13]) + 820.0;
        let shape =
            &profiles.base_850_200 - &(0.7 * &rbf_profile(valley, 10.0)) - 0.9 * &profiles.dip_810_6;
        out += &(m[13] * &shape);
    }
    let g4 = m[4] * m[5];
    if g4 != 0.0 {
        out += &(g4 * &profiles.bump_350_130);
    }
    let g5 = 3.0 * m[5] * m[6];
    if g5 != 0.0 {
        out += &(g5 * &profiles.bump_450_70);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::condition_number;
    use crate::simplex::CompositionVector;
    use crate::systems::{ForwardSystem, ResponseNorm};
    use approx::assert_abs_diff_eq;

    #[test]
    fn rejects_other_row_counts() {
        assert!(build_rbf_matrix(999).is_err());
    }

    #[test]
    fn entries_are_nonnegative() {
        let h = build_rbf_matrix(RBF_ROWS).unwrap();
        assert!(h.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn condition_number_matches_design() {
        let h = build_rbf_matrix(RBF_ROWS).unwrap();
        let cond = condition_number(&h).unwrap();
        assert!(
            (300.0..=420.0).contains(&cond),
            "condition number {cond} out of the designed range"
        );
    }

    #[test]
    fn max_normalized_column_peaks_at_one() {
        let h = build_rbf_matrix(RBF_ROWS).unwrap();
        let max = h.column(11).fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        assert_abs_diff_eq!(max, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn pure_component_four_is_its_bump() {
        let h = build_rbf_matrix(RBF_ROWS).unwrap();
        let sys = ForwardSystem::highdim_nonlinear(h, ResponseNorm::None).unwrap();
        let m = CompositionVector::end_member(RBF_COLS, 3);
        let s = sys.apply(m.values()).unwrap();
        // peak_4 = 100 * 1 + 200 = 300.
        let expect = 0.6 * &rbf_profile(300.0, 40.0);
        for (a, b) in s.iter().zip(expect.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn z9_vanishes_below_soft_threshold() {
        let mut m = ndarray::Array1::zeros(RBF_COLS);
        m[8] = 0.03;
        m[0] = 0.97;
        let z = highdim_z(m.view());
        assert_eq!(z[8], 0.0);
        m[8] = 0.02;
        m[0] = 0.98;
        assert_eq!(highdim_z(m.view())[8], 0.0);
        m[8] = 0.05;
        m[0] = 0.95;
        assert!(highdim_z(m.view())[8] > 0.0);
    }

    #[test]
    fn l2_variant_has_unit_norm() {
        let h = build_rbf_matrix(RBF_ROWS).unwrap();
        let sys = ForwardSystem::highdim_nonlinear(h, ResponseNorm::L2).unwrap();
        let x =
            crate::simplex::sample_uniform_simplex(RBF_COLS, 8, &mut crate::rng::substream(1, "x"))
                .unwrap();
        let s = sys.apply_batch(&x).unwrap();
        for row in s.rows() {
            assert_abs_diff_eq!(row.dot(&row).sqrt(), 1.0, epsilon = 1e-12);
        }
    }
}

//! Samplers for compositions: uniform on the simplex, truncated Gaussian
//! mixtures with obfuscation caps, and designed end-member sets.

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{is_on_simplex, CompositionVector, SIMPLEX_TOL};
use crate::error::{Error, Result};

/// Draw `n` points uniformly on the `m`-simplex (flat Dirichlet), as the rows
/// of an n-by-m matrix.
///
/// Each draw normalizes `m` independent unit-rate exponential variates, which
/// is O(m) and bit-reproducible given the RNG stream.
pub fn sample_uniform_simplex<R: Rng>(m: usize, n: usize, rng: &mut R) -> Result<Array2<f64>> {
    if m == 0 {
        return Err(Error::domain("simplex dimension must be at least 1"));
    }
    let mut out = Array2::zeros((n, m));
    for mut row in out.rows_mut() {
        fill_uniform_row(&mut row, rng);
    }
    Ok(out)
}

fn fill_uniform_row<R: Rng>(row: &mut ndarray::ArrayViewMut1<'_, f64>, rng: &mut R) {
    let mut sum = 0.0;
    for v in row.iter_mut() {
        let e: f64 = Exp1.sample(rng);
        *v = e;
        sum += e;
    }
    row.mapv_inplace(|v| v / sum);
}

/// A mixture of isotropic Gaussians (centers given in percent) plus a uniform
/// remainder, truncated onto the simplex, with optional caps on designated
/// obfuscating components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureSpec {
    /// Full composition dimension M.
    pub dim: usize,
    /// Cluster centers in percent (each renormalized after division by 100).
    pub centers_percent: Vec<Vec<f64>>,
    /// Per-center isotropic standard deviations, as fractions.
    pub sigmas: Vec<f64>,
    /// Mixture weights of the centers.
    pub proportions: Vec<f64>,
    /// Probability mass drawn from the uniform distribution instead.
    pub uniform_remainder: f64,
    /// Samples whose obfuscating components exceed this value are redrawn.
    pub obfuscation_cap: Option<f64>,
    /// Indices (0-based) of the obfuscating components.
    pub obfuscating_indices: Vec<usize>,
}

impl MixtureSpec {
    /// Plain uniform sampling with obfuscation caps, as a degenerate mixture.
    pub fn capped_uniform(dim: usize, cap: f64, obfuscating_indices: Vec<usize>) -> Self {
        Self {
            dim,
            centers_percent: Vec::new(),
            sigmas: Vec::new(),
            proportions: Vec::new(),
            uniform_remainder: 1.0,
            obfuscation_cap: Some(cap),
            obfuscating_indices,
        }
    }

    /// The built-in 20-dimensional three-cluster generator used by the
    /// high-dimensional experiments: centers in percent with sigmas 1%, 2%,
    /// 3%, proportions 0.2/0.2/0.3, a 0.3 uniform remainder, and components
    /// 19 and 20 capped at 5%.
    pub fn highdim_three_cluster() -> Self {
        Self {
            dim: 20,
            centers_percent: vec![
                vec![
                    0.79, 1.59, 2.38, 3.17, 0.79, 53.17, 7.94, 1.59, 0.79, 1.59, 3.17, 0.79, 1.59,
                    0.79, 15.87, 0.79, 0.79, 0.79, 0.79, 0.79,
                ],
                vec![
                    43.69, 1.94, 12.62, 3.88, 0.97, 1.94, 0.97, 19.42, 0.97, 1.94, 0.97, 0.97,
                    1.94, 0.97, 1.94, 0.97, 0.97, 0.97, 0.97, 0.97,
                ],
                vec![
                    0.99, 9.90, 2.97, 3.96, 0.99, 16.83, 9.90, 1.98, 0.99, 1.98, 12.87, 0.99,
                    19.80, 0.99, 9.90, 0.99, 0.99, 0.99, 0.99, 0.99,
                ],
            ],
            sigmas: vec![0.01, 0.02, 0.03],
            proportions: vec![0.2, 0.2, 0.3],
            uniform_remainder: 0.3,
            obfuscation_cap: Some(0.05),
            obfuscating_indices: vec![18, 19],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::domain("mixture dimension must be at least 1"));
        }
        if self.centers_percent.len() != self.sigmas.len()
            || self.centers_percent.len() != self.proportions.len()
        {
            return Err(Error::domain(
                "centers, sigmas, and proportions must have the same length",
            ));
        }
        let total: f64 = self.proportions.iter().sum::<f64>() + self.uniform_remainder;
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!(
                "proportions + uniform_remainder must sum to 1, got {total}"
            )));
        }
        if self.proportions.iter().any(|&p| p < 0.0) || self.uniform_remainder < 0.0 {
            return Err(Error::domain("mixture weights must be non-negative"));
        }
        for (i, c) in self.centers_percent.iter().enumerate() {
            if c.len() != self.dim {
                return Err(Error::DimMismatch {
                    context: "mixture center",
                    expected: self.dim,
                    got: c.len(),
                });
            }
            let center = self.effective_center(i);
            if !is_on_simplex(center.view(), SIMPLEX_TOL) {
                return Err(Error::domain(format!(
                    "center {i} is not a valid composition after renormalization"
                )));
            }
        }
        if self.sigmas.iter().any(|&s| s < 0.0) {
            return Err(Error::domain("sigmas must be non-negative"));
        }
        if let Some(cap) = self.obfuscation_cap {
            if !(0.0..=1.0).contains(&cap) {
                return Err(Error::domain("obfuscation cap must lie in [0, 1]"));
            }
        }
        if self.obfuscating_indices.iter().any(|&i| i >= self.dim) {
            return Err(Error::domain("obfuscating index out of range"));
        }
        Ok(())
    }

    /// Center `i` divided by 100 and renormalized to sum exactly 1 (the
    /// printed percent values carry rounding residue).
    pub fn effective_center(&self, i: usize) -> Array1<f64> {
        let mut c = Array1::from_vec(self.centers_percent[i].clone());
        c.mapv_inplace(|v| v / 100.0);
        let sum = c.sum();
        c.mapv_inplace(|v| v / sum);
        c
    }
}

/// Draw `n` compositions from the mixture, as matrix rows.
///
/// Each sample picks a center with its mixture weight (or the uniform
/// remainder), adds isotropic Gaussian noise, truncates componentwise to
/// [0, 1], and l1-normalizes. Samples violating the obfuscation cap are
/// discarded and redrawn; the output order is shuffled at the end.
pub fn sample_mixture<R: Rng>(spec: &MixtureSpec, n: usize, rng: &mut R) -> Result<Array2<f64>> {
    const MIN_ACCEPT_RATE: f64 = 1e-3;
    spec.validate()?;
    let mut out = Array2::zeros((n, spec.dim));
    let mut attempts: u64 = 0;
    let mut accepted: u64 = 0;
    let mut candidate = Array1::zeros(spec.dim);
    let mut filled = 0;
    while filled < n {
        attempts += 1;
        if attempts >= 5_000 && (accepted as f64) < MIN_ACCEPT_RATE * attempts as f64 {
            return Err(Error::SamplerStarved {
                min_rate: MIN_ACCEPT_RATE,
            });
        }
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut which = None;
        for (i, &p) in spec.proportions.iter().enumerate() {
            acc += p;
            if u < acc {
                which = Some(i);
                break;
            }
        }
        match which {
            Some(i) => {
                let center = spec.effective_center(i);
                let sigma = spec.sigmas[i];
                let mut sum = 0.0;
                for (v, &c) in candidate.iter_mut().zip(center.iter()) {
                    let z: f64 = StandardNormal.sample(rng);
                    *v = (c + sigma * z).clamp(0.0, 1.0);
                    sum += *v;
                }
                if sum <= 0.0 {
                    continue;
                }
                candidate.mapv_inplace(|v| v / sum);
            }
            None => {
                fill_uniform_row(&mut candidate.view_mut(), rng);
            }
        }
        if let Some(cap) = spec.obfuscation_cap {
            if spec.obfuscating_indices.iter().any(|&i| candidate[i] > cap) {
                continue;
            }
        }
        out.row_mut(filled).assign(&candidate);
        accepted += 1;
        filled += 1;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let shuffled = out.select(ndarray::Axis(0), &order);
    Ok(shuffled)
}

/// How a dataset's compositions are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Sampler {
    /// Uniform on the simplex of the given dimension.
    Uniform { dim: usize },
    /// Gaussian mixture / capped uniform, see [`MixtureSpec`].
    Mixture { spec: MixtureSpec },
    /// The end-members e_i in index order, skipping `exclude`.
    EndMembers {
        dim: usize,
        #[serde(default)]
        exclude: Vec<usize>,
    },
}

impl Sampler {
    pub fn dim(&self) -> usize {
        match self {
            Sampler::Uniform { dim } => *dim,
            Sampler::Mixture { spec } => spec.dim,
            Sampler::EndMembers { dim, .. } => *dim,
        }
    }

    /// Number of samples this sampler can produce, if it is finite.
    pub fn fixed_count(&self) -> Option<usize> {
        match self {
            Sampler::EndMembers { dim, exclude } => Some(dim - exclude.len()),
            _ => None,
        }
    }

    pub fn tag(&self) -> String {
        match self {
            Sampler::Uniform { dim } => format!("uniform(dim={dim})"),
            Sampler::Mixture { spec } => {
                if spec.centers_percent.is_empty() {
                    format!(
                        "capped-uniform(dim={}, cap={:?})",
                        spec.dim, spec.obfuscation_cap
                    )
                } else {
                    format!(
                        "mixture(dim={}, centers={}, remainder={})",
                        spec.dim,
                        spec.centers_percent.len(),
                        spec.uniform_remainder
                    )
                }
            }
            Sampler::EndMembers { dim, exclude } => {
                format!("end-members(dim={dim}, excluded={})", exclude.len())
            }
        }
    }

    /// Draw `n` compositions as the rows of an n-by-dim matrix.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Result<Array2<f64>> {
        match self {
            Sampler::Uniform { dim } => sample_uniform_simplex(*dim, n, rng),
            Sampler::Mixture { spec } => sample_mixture(spec, n, rng),
            Sampler::EndMembers { dim, exclude } => {
                let count = dim - exclude.len();
                if n != count {
                    return Err(Error::domain(format!(
                        "end-member sampler produces exactly {count} samples, asked for {n}"
                    )));
                }
                let mut out = Array2::zeros((n, *dim));
                let mut row = 0;
                for i in 0..*dim {
                    if exclude.contains(&i) {
                        continue;
                    }
                    out[(row, i)] = 1.0;
                    row += 1;
                }
                Ok(out)
            }
        }
    }
}

/// View matrix rows as validated composition vectors.
pub fn rows_as_compositions(x: &Array2<f64>) -> Result<Vec<CompositionVector>> {
    x.rows()
        .into_iter()
        .map(|r: ArrayView1<'_, f64>| CompositionVector::new(r.to_owned()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn one_dimensional_simplex_is_constant() {
        let mut rng = substream(1, "t");
        let x = sample_uniform_simplex(1, 5, &mut rng).unwrap();
        for &v in x.iter() {
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn zero_dimension_rejected() {
        let mut rng = substream(1, "t");
        assert!(sample_uniform_simplex(0, 3, &mut rng).is_err());
    }

    #[test]
    fn same_seed_same_samples() {
        let a = sample_uniform_simplex(4, 32, &mut substream(9, "x")).unwrap();
        let b = sample_uniform_simplex(4, 32, &mut substream(9, "x")).unwrap();
        assert_eq!(a, b);
        let spec = MixtureSpec::highdim_three_cluster();
        let c = sample_mixture(&spec, 16, &mut substream(9, "m")).unwrap();
        let d = sample_mixture(&spec, 16, &mut substream(9, "m")).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn uniform_moments_match_closed_form() {
        // Component means 1/M and variances (M-1)/((M+1)M^2) within 3 MC
        // standard errors at n = 1e6, for M = 5.
        let m = 5;
        let n = 1_000_000;
        let mut rng = substream(123, "moments");
        let x = sample_uniform_simplex(m, n, &mut rng).unwrap();
        let var_expected = super::super::uniform_component_variance(m);
        for j in 0..m {
            let col = x.column(j);
            let mean = col.mean().unwrap();
            let se_mean = (var_expected / n as f64).sqrt();
            assert!(
                (mean - 1.0 / m as f64).abs() <= 3.0 * se_mean,
                "component {j} mean {mean} off"
            );
            let var = col.mapv(|v| (v - mean).powi(2)).mean().unwrap();
            // SE of the sample variance from the empirical fourth moment.
            let m4 = col.mapv(|v| (v - mean).powi(4)).mean().unwrap();
            let se_var = ((m4 - var * var) / n as f64).sqrt();
            assert!(
                (var - var_expected).abs() <= 3.0 * se_var,
                "component {j} variance {var} vs {var_expected}"
            );
        }
        assert_abs_diff_eq!(var_expected, 4.0 / 150.0, epsilon = 1e-15);
    }

    #[test]
    fn mixture_outputs_are_compositions() {
        let spec = MixtureSpec::highdim_three_cluster();
        let mut rng = substream(7, "mix");
        let x = sample_mixture(&spec, 1000, &mut rng).unwrap();
        for row in x.rows() {
            assert!(is_on_simplex(row, 1e-9));
        }
        // Obfuscating components stay under the 5% cap.
        for &(idx, cap) in &[(18usize, 0.05), (19usize, 0.05)] {
            let max = x.column(idx).fold(0.0f64, |a, &b| a.max(b));
            assert!(max <= cap, "component {idx} exceeded cap: {max}");
        }
    }

    #[test]
    fn mixture_degenerate_sigma_hits_center() {
        let spec = MixtureSpec {
            dim: 4,
            centers_percent: vec![vec![40.0, 30.0, 20.0, 10.0]],
            sigmas: vec![0.0],
            proportions: vec![1.0],
            uniform_remainder: 0.0,
            obfuscation_cap: None,
            obfuscating_indices: vec![],
        };
        let mut rng = substream(5, "deg");
        let x = sample_mixture(&spec, 10, &mut rng).unwrap();
        let center = spec.effective_center(0);
        for row in x.rows() {
            for (a, b) in row.iter().zip(center.iter()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn starved_sampler_errors() {
        // Cap of 0 on a component that is always positive under uniform draws.
        let spec = MixtureSpec::capped_uniform(3, 1e-12, vec![0]);
        let mut rng = substream(5, "starve");
        assert!(matches!(
            sample_mixture(&spec, 10, &mut rng),
            Err(Error::SamplerStarved { .. })
        ));
    }

    #[test]
    fn end_members_enumerate_vertices() {
        let s = Sampler::EndMembers {
            dim: 4,
            exclude: vec![2],
        };
        let mut rng = substream(0, "em");
        let x = s.sample(3, &mut rng).unwrap();
        assert_eq!(x.nrows(), 3);
        assert_eq!(x[(0, 0)], 1.0);
        assert_eq!(x[(1, 1)], 1.0);
        assert_eq!(x[(2, 3)], 1.0);
        assert!(s.sample(4, &mut rng).is_err());
    }

    #[test]
    fn rows_as_compositions_validates() {
        let mut rng = substream(2, "rc");
        let x = sample_uniform_simplex(3, 8, &mut rng).unwrap();
        assert_eq!(rows_as_compositions(&x).unwrap().len(), 8);
    }
}

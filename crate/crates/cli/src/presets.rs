//! The built-in experiment registry.

use compinv_core::error::{Error, Result};
use compinv_core::mlp::DecaySchedule;
use compinv_core::simplex::{MixtureSpec, Sampler};

use crate::config::{
    EstimationPreset, EstimatorConfig, EvaluationMode, ExperimentPreset, MatrixSource, MlpConfig,
    ResponseNormConfig, SystemConfig,
};

/// Low-dimensional training recipe: long exponential anneal at a gentle
/// rate, which the small networks need to converge past the
/// mean-prediction plateau.
fn lowdim_mlp() -> EstimatorConfig {
    EstimatorConfig::Mlp(MlpConfig {
        width_factor: 4,
        learning_rate: 2e-4,
        batch_size: 128,
        max_epochs: 2500,
        decay: DecaySchedule::PerEpochExponential { rate: 0.0025 },
        regenerate_every: None,
        validation_fraction: 0.1,
    })
}

fn highdim_mlp(width_factor: usize, max_epochs: usize) -> EstimatorConfig {
    EstimatorConfig::Mlp(MlpConfig {
        width_factor,
        learning_rate: 5e-4,
        batch_size: 128,
        max_epochs,
        decay: DecaySchedule::PerEpochExponential { rate: 0.01 },
        regenerate_every: Some(100),
        validation_fraction: 0.1,
    })
}

fn gaussian() -> MatrixSource {
    MatrixSource::SeededGaussian { seed: None }
}

fn odd_ks() -> Vec<usize> {
    (1..=31).step_by(2).collect()
}

/// Uniform sampling with the obfuscating components capped, as a degenerate
/// mixture.
fn capped_uniform(dim: usize, cap: f64, indices: Vec<usize>) -> Sampler {
    Sampler::Mixture {
        spec: MixtureSpec::capped_uniform(dim, cap, indices),
    }
}

fn estimation(p: EstimationPreset) -> ExperimentPreset {
    ExperimentPreset::Estimation(p)
}

/// All built-in presets, in stable registry order.
pub fn all_presets() -> Vec<ExperimentPreset> {
    let mut v = Vec::new();

    v.push(estimation(EstimationPreset {
        name: "lin_lowdim".into(),
        description: "linear 5x3 Gaussian system, sigma 0.005: oracle vs MLE benchmark vs network"
            .into(),
        system: SystemConfig::Linear {
            l: 5,
            m: 3,
            matrix: gaussian(),
        },
        sampler: Sampler::Uniform { dim: 3 },
        n_train: 10_000,
        n_test: 10_000,
        sigma: 0.005,
        estimators: vec![
            EstimatorConfig::Oracle,
            EstimatorConfig::Benchmark,
            lowdim_mlp(),
        ],
        evaluation: EvaluationMode::Standard,
    }));

    v.push(estimation(EstimationPreset {
        name: "nonlin_invertible".into(),
        description: "componentwise invertible transform before a 5x3 Gaussian matrix".into(),
        system: SystemConfig::InvertibleG {
            l: 5,
            matrix: gaussian(),
        },
        sampler: Sampler::Uniform { dim: 3 },
        n_train: 10_000,
        n_test: 10_000,
        sigma: 0.005,
        estimators: vec![
            EstimatorConfig::Oracle,
            EstimatorConfig::Benchmark,
            lowdim_mlp(),
        ],
        evaluation: EvaluationMode::Standard,
    }));

    v.push(estimation(EstimationPreset {
        name: "nonlin_noninvertible".into(),
        description: "thresholding transform (T=0.02) destroys the third component below 2%"
            .into(),
        system: SystemConfig::NoninvertibleG {
            l: 5,
            threshold: 0.02,
            matrix: gaussian(),
        },
        sampler: Sampler::Uniform { dim: 3 },
        n_train: 10_000,
        n_test: 10_000,
        sigma: 0.005,
        estimators: vec![
            EstimatorConfig::Oracle,
            EstimatorConfig::Benchmark,
            lowdim_mlp(),
        ],
        evaluation: EvaluationMode::Standard,
    }));

    v.push(estimation(EstimationPreset {
        name: "nonlin_obf_inv".into(),
        description: "invertible system plus one obfuscating component capped at 0.2".into(),
        system: SystemConfig::ObfuscatedInvertible {
            l: 5,
            matrix: gaussian(),
        },
        sampler: capped_uniform(4, 0.2, vec![3]),
        n_train: 10_000,
        n_test: 10_000,
        sigma: 0.005,
        estimators: vec![
            EstimatorConfig::Oracle,
            EstimatorConfig::Benchmark,
            lowdim_mlp(),
        ],
        evaluation: EvaluationMode::ObfuscatedNormalized,
    }));

    v.push(estimation(EstimationPreset {
        name: "nonlin_obf_noninv".into(),
        description: "noninvertible system plus one obfuscating component capped at 0.2".into(),
        system: SystemConfig::ObfuscatedNoninvertible {
            l: 5,
            threshold: 0.02,
            matrix: gaussian(),
        },
        sampler: capped_uniform(4, 0.2, vec![3]),
        n_train: 10_000,
        n_test: 10_000,
        sigma: 0.005,
        estimators: vec![
            EstimatorConfig::Oracle,
            EstimatorConfig::Benchmark,
            lowdim_mlp(),
        ],
        evaluation: EvaluationMode::ObfuscatedNormalized,
    }));

    v.push(estimation(EstimationPreset {
        name: "nonlin_scaled_mag".into(),
        description: "response scaled by its own squared norm (blind-deconvolution flavor)".into(),
        system: SystemConfig::ScaledMagnitude {
            l: 5,
            m: 3,
            matrix: gaussian(),
        },
        sampler: Sampler::Uniform { dim: 3 },
        n_train: 10_000,
        n_test: 10_000,
        sigma: 0.005,
        estimators: vec![lowdim_mlp()],
        evaluation: EvaluationMode::Standard,
    }));

    v.push(estimation(EstimationPreset {
        name: "nonlin_corr".into(),
        description: "five correlated intermediate terms of a 3-simplex unknown, 5x5 matrix"
            .into(),
        system: SystemConfig::Correlated {
            l: 5,
            matrix: gaussian(),
        },
        sampler: Sampler::Uniform { dim: 3 },
        n_train: 10_000,
        n_test: 10_000,
        sigma: 0.005,
        estimators: vec![lowdim_mlp()],
        evaluation: EvaluationMode::Standard,
    }));

    v.push(estimation(EstimationPreset {
        name: "nonlin_peak".into(),
        description: "bumps whose magnitude and location travel with the composition weights"
            .into(),
        system: SystemConfig::MovingPeak,
        sampler: Sampler::Uniform { dim: 3 },
        n_train: 10_000,
        n_test: 10_000,
        sigma: 0.005,
        estimators: vec![lowdim_mlp()],
        evaluation: EvaluationMode::Standard,
    }));

    v.push(estimation(EstimationPreset {
        name: "nonlin_peak_corr".into(),
        description: "moving-peak bumps driven by five correlated terms".into(),
        system: SystemConfig::MovingPeakCorrelated,
        sampler: Sampler::Uniform { dim: 3 },
        n_train: 10_000,
        n_test: 10_000,
        sigma: 0.005,
        estimators: vec![lowdim_mlp()],
        evaluation: EvaluationMode::Standard,
    }));

    v.push(estimation(EstimationPreset {
        name: "lin_highdim".into(),
        description: "designed nonnegative 1000x20 matrix (condition ~360): all three estimators"
            .into(),
        system: SystemConfig::HighdimLinear {
            matrix: MatrixSource::RbfBuiltin,
        },
        sampler: Sampler::Uniform { dim: 20 },
        n_train: 10_000,
        n_test: 10_000,
        sigma: 0.005,
        estimators: vec![
            EstimatorConfig::Oracle,
            EstimatorConfig::Benchmark,
            highdim_mlp(4, 400),
        ],
        evaluation: EvaluationMode::Standard,
    }));

    v.push(estimation(EstimationPreset {
        name: "lin_highdim_endmember".into(),
        description: "end-member stress: test on the 20 vertices; MLE refitted on them, network \
                      kept from uniform training"
            .into(),
        system: SystemConfig::HighdimLinear {
            matrix: MatrixSource::RbfBuiltin,
        },
        sampler: Sampler::Uniform { dim: 20 },
        n_train: 10_000,
        n_test: 20,
        sigma: 0.005,
        estimators: vec![
            EstimatorConfig::Oracle,
            EstimatorConfig::Benchmark,
            highdim_mlp(4, 400),
        ],
        evaluation: EvaluationMode::EndMemberStress,
    }));

    v.push(estimation(EstimationPreset {
        name: "nonlin_highdim_uniform".into(),
        description: "designed 20-component nonlinear system, uniform sampling, obfuscating \
                      components 19/20 capped at 5%"
            .into(),
        system: SystemConfig::HighdimNonlinear {
            norm: ResponseNormConfig::None,
            matrix: MatrixSource::RbfBuiltin,
        },
        sampler: capped_uniform(20, 0.05, vec![18, 19]),
        n_train: 10_000,
        n_test: 1_000,
        sigma: 0.005,
        estimators: vec![highdim_mlp(4, 400), EstimatorConfig::KnnSweep { ks: odd_ks() }],
        evaluation: EvaluationMode::ObfuscatedNormalized,
    }));

    v.push(estimation(EstimationPreset {
        name: "nonlin_highdim_mixture".into(),
        description: "three concentrated clusters plus a uniform remainder on the 20-simplex"
            .into(),
        system: SystemConfig::HighdimNonlinear {
            norm: ResponseNormConfig::None,
            matrix: MatrixSource::RbfBuiltin,
        },
        sampler: Sampler::Mixture {
            spec: MixtureSpec::highdim_three_cluster(),
        },
        n_train: 10_000,
        n_test: 1_000,
        sigma: 0.005,
        estimators: vec![highdim_mlp(32, 300), EstimatorConfig::KnnSweep { ks: odd_ks() }],
        evaluation: EvaluationMode::ObfuscatedNormalized,
    }));

    v.push(estimation(EstimationPreset {
        name: "nonlin_highdim_maxnorm".into(),
        description: "nonlinear high-dim response divided by its maximum".into(),
        system: SystemConfig::HighdimNonlinear {
            norm: ResponseNormConfig::Max,
            matrix: MatrixSource::RbfBuiltin,
        },
        sampler: capped_uniform(20, 0.05, vec![18, 19]),
        n_train: 10_000,
        n_test: 1_000,
        sigma: 0.005,
        estimators: vec![highdim_mlp(4, 400)],
        evaluation: EvaluationMode::ObfuscatedNormalized,
    }));

    v.push(estimation(EstimationPreset {
        name: "nonlin_highdim_l2norm".into(),
        description: "nonlinear high-dim response divided by its l2 norm".into(),
        system: SystemConfig::HighdimNonlinear {
            norm: ResponseNormConfig::L2,
            matrix: MatrixSource::RbfBuiltin,
        },
        sampler: capped_uniform(20, 0.05, vec![18, 19]),
        n_train: 10_000,
        n_test: 1_000,
        sigma: 0.005,
        estimators: vec![highdim_mlp(4, 400)],
        evaluation: EvaluationMode::ObfuscatedNormalized,
    }));

    v.push(estimation(EstimationPreset {
        name: "knn_sweep_lowdim".into(),
        description: "neighbor-count sweep on a linear 7x5 Gaussian system".into(),
        system: SystemConfig::Linear {
            l: 7,
            m: 5,
            matrix: gaussian(),
        },
        sampler: Sampler::Uniform { dim: 5 },
        n_train: 10_000,
        n_test: 1_000,
        sigma: 0.005,
        estimators: vec![EstimatorConfig::KnnSweep { ks: odd_ks() }],
        evaluation: EvaluationMode::Standard,
    }));

    v.push(estimation(EstimationPreset {
        name: "knn_sweep_highdim".into(),
        description: "neighbor-count sweep on the designed 1000x20 linear system".into(),
        system: SystemConfig::HighdimLinear {
            matrix: MatrixSource::RbfBuiltin,
        },
        sampler: Sampler::Uniform { dim: 20 },
        n_train: 10_000,
        n_test: 1_000,
        sigma: 0.005,
        estimators: vec![EstimatorConfig::KnnSweep { ks: odd_ks() }],
        evaluation: EvaluationMode::Standard,
    }));

    v.push(ExperimentPreset::VolumeMc(crate::config::VolumeMcPreset {
        name: "volume_mc".into(),
        description: "Monte-Carlo verification of the corner-mass and scaled-mean tail formulas"
            .into(),
        dims: vec![2, 3, 5, 7, 10, 15],
        thresholds: vec![0.7, 0.8, 0.9, 0.99],
        mean_multipliers: vec![1.0, 2.0, 3.0, 5.0],
        draws: 1_000_000,
    }));

    v
}

/// Look up a preset by name.
pub fn find_preset(name: &str) -> Result<ExperimentPreset> {
    all_presets()
        .into_iter()
        .find(|p| p.name() == name)
        .ok_or_else(|| Error::UnknownPreset(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_contents_and_order_are_stable() {
        let names: Vec<String> = all_presets()
            .iter()
            .map(|p| p.name().to_string())
            .collect();
        assert_eq!(
            names,
            vec![
                "lin_lowdim",
                "nonlin_invertible",
                "nonlin_noninvertible",
                "nonlin_obf_inv",
                "nonlin_obf_noninv",
                "nonlin_scaled_mag",
                "nonlin_corr",
                "nonlin_peak",
                "nonlin_peak_corr",
                "lin_highdim",
                "lin_highdim_endmember",
                "nonlin_highdim_uniform",
                "nonlin_highdim_mixture",
                "nonlin_highdim_maxnorm",
                "nonlin_highdim_l2norm",
                "knn_sweep_lowdim",
                "knn_sweep_highdim",
                "volume_mc",
            ]
        );
    }

    #[test]
    fn unknown_preset_is_an_error() {
        assert!(find_preset("nope").is_err());
    }

    #[test]
    fn presets_validate() {
        for p in all_presets() {
            crate::config::validate_preset(&p).unwrap();
        }
    }
}

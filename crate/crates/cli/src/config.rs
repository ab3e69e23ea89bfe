//! Declarative experiment configuration: systems, estimators, evaluation
//! modes, and whole presets, all loadable from strict JSON.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use compinv_core::error::{Error, Result};
use compinv_core::mlp::DecaySchedule;
use compinv_core::rng::substream;
use compinv_core::simplex::Sampler;
use compinv_core::systems::{
    build_gaussian_matrix, build_rbf_matrix, ForwardSystem, ResponseNorm, RBF_ROWS,
};

/// Where a system matrix comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MatrixSource {
    /// Standard-normal entries; the seed defaults to the run's master-seed
    /// sub-stream when omitted.
    SeededGaussian {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    /// The built-in 1000x20 response-curve matrix.
    RbfBuiltin,
    /// CSV file of rows.
    File { path: String },
}

impl MatrixSource {
    pub fn build(&self, l: usize, m: usize, master_seed: u64) -> Result<Array2<f64>> {
        match self {
            MatrixSource::SeededGaussian { seed } => {
                let mut rng = match seed {
                    Some(s) => substream(*s, "system-matrix"),
                    None => substream(master_seed, "system-matrix"),
                };
                let (h, _) = build_gaussian_matrix(l, m, &mut rng)?;
                Ok(h)
            }
            MatrixSource::RbfBuiltin => build_rbf_matrix(RBF_ROWS),
            MatrixSource::File { path } => read_matrix_csv(Path::new(path)),
        }
    }
}

fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let row: std::result::Result<Vec<f64>, _> =
            record.iter().map(|f| f.parse::<f64>()).collect();
        rows.push(row.map_err(|e| Error::domain(format!("bad float in {path:?}: {e}")))?);
    }
    if rows.is_empty() {
        return Err(Error::domain(format!("matrix file {path:?} is empty")));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::domain("matrix file rows have uneven widths"));
    }
    let mut out = Array2::zeros((rows.len(), cols));
    for (i, r) in rows.iter().enumerate() {
        for (j, &v) in r.iter().enumerate() {
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

/// Serializable description of one forward system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SystemConfig {
    Linear {
        l: usize,
        m: usize,
        matrix: MatrixSource,
    },
    InvertibleG {
        l: usize,
        matrix: MatrixSource,
    },
    NoninvertibleG {
        l: usize,
        threshold: f64,
        matrix: MatrixSource,
    },
    ObfuscatedInvertible {
        l: usize,
        matrix: MatrixSource,
    },
    ObfuscatedNoninvertible {
        l: usize,
        threshold: f64,
        matrix: MatrixSource,
    },
    ScaledMagnitude {
        l: usize,
        m: usize,
        matrix: MatrixSource,
    },
    Correlated {
        l: usize,
        matrix: MatrixSource,
    },
    MovingPeak,
    MovingPeakCorrelated,
    HighdimLinear {
        matrix: MatrixSource,
    },
    HighdimNonlinear {
        norm: ResponseNormConfig,
        matrix: MatrixSource,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResponseNormConfig {
    None,
    Max,
    L2,
}

impl From<ResponseNormConfig> for ResponseNorm {
    fn from(v: ResponseNormConfig) -> Self {
        match v {
            ResponseNormConfig::None => ResponseNorm::None,
            ResponseNormConfig::Max => ResponseNorm::Max,
            ResponseNormConfig::L2 => ResponseNorm::L2,
        }
    }
}

impl SystemConfig {
    pub fn build(&self, master_seed: u64) -> Result<ForwardSystem> {
        match self {
            SystemConfig::Linear { l, m, matrix } => {
                Ok(ForwardSystem::linear(matrix.build(*l, *m, master_seed)?))
            }
            SystemConfig::InvertibleG { l, matrix } => {
                ForwardSystem::invertible_g(matrix.build(*l, 3, master_seed)?)
            }
            SystemConfig::NoninvertibleG {
                l,
                threshold,
                matrix,
            } => ForwardSystem::noninvertible_g(matrix.build(*l, 3, master_seed)?, *threshold),
            SystemConfig::ObfuscatedInvertible { l, matrix } => {
                ForwardSystem::obfuscated_invertible(matrix.build(*l, 4, master_seed)?)
            }
            SystemConfig::ObfuscatedNoninvertible {
                l,
                threshold,
                matrix,
            } => {
                ForwardSystem::obfuscated_noninvertible(matrix.build(*l, 4, master_seed)?, *threshold)
            }
            SystemConfig::ScaledMagnitude { l, m, matrix } => Ok(ForwardSystem::scaled_magnitude(
                matrix.build(*l, *m, master_seed)?,
            )),
            SystemConfig::Correlated { l, matrix } => {
                ForwardSystem::correlated(matrix.build(*l, 5, master_seed)?)
            }
            SystemConfig::MovingPeak => Ok(ForwardSystem::moving_peak()),
            SystemConfig::MovingPeakCorrelated => Ok(ForwardSystem::moving_peak_correlated()),
            SystemConfig::HighdimLinear { matrix } => {
                ForwardSystem::highdim_linear(matrix.build(RBF_ROWS, 20, master_seed)?)
            }
            SystemConfig::HighdimNonlinear { norm, matrix } => ForwardSystem::highdim_nonlinear(
                matrix.build(RBF_ROWS, 20, master_seed)?,
                (*norm).into(),
            ),
        }
    }
}

/// Network + training hyperparameters of the feedforward estimator (seeds
/// and dimensions are filled in by the runner).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpConfig {
    /// Hidden layers are `width_factor * output_dim` wide (two of them).
    pub width_factor: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    #[serde(default)]
    pub decay: DecaySchedule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regenerate_every: Option<usize>,
    #[serde(default = "default_val_fraction")]
    pub validation_fraction: f64,
}

fn default_val_fraction() -> f64 {
    0.1
}

/// One estimator to fit and evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EstimatorConfig {
    /// True system matrix (+ componentwise inverse where the system has
    /// one), then simplex projection.
    Oracle,
    /// Same pipeline with the maximum-likelihood matrix estimate.
    Benchmark,
    Knn { k: usize },
    KnnSweep { ks: Vec<usize> },
    Mlp(MlpConfig),
}

/// How estimates are scored against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvaluationMode {
    /// Against the full true compositions.
    Standard,
    /// Against the visible components renormalized to sum to one.
    ObfuscatedNormalized,
    /// Test set is the end-member set; the benchmark MLE is fitted on those
    /// same end-member observations while learned estimators keep their
    /// regular training set.
    EndMemberStress,
}

/// A complete estimation experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationPreset {
    pub name: String,
    pub description: String,
    pub system: SystemConfig,
    pub sampler: Sampler,
    pub n_train: usize,
    pub n_test: usize,
    pub sigma: f64,
    pub estimators: Vec<EstimatorConfig>,
    pub evaluation: EvaluationMode,
}

/// Monte-Carlo verification of the simplex volume-concentration formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeMcPreset {
    pub name: String,
    pub description: String,
    pub dims: Vec<usize>,
    /// Corner thresholds T (deph epsilon = 1 - T).
    pub thresholds: Vec<f64>,
    /// Mean multipliers c for the tail probability.
    pub mean_multipliers: Vec<f64>,
    pub draws: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExperimentPreset {
    Estimation(EstimationPreset),
    VolumeMc(VolumeMcPreset),
}

impl ExperimentPreset {
    pub fn name(&self) -> &str {
        match self {
            ExperimentPreset::Estimation(p) => &p.name,
            ExperimentPreset::VolumeMc(p) => &p.name,
        }
    }

    pub fn description(&self) -> &str {
        match self {
            ExperimentPreset::Estimation(p) => &p.description,
            ExperimentPreset::VolumeMc(p) => &p.description,
        }
    }
}

/// Strict parse: unknown keys are rejected with serde's field path.
pub fn parse_config(path: &Path) -> Result<ExperimentPreset> {
    let text = fs::read_to_string(path)?;
    let preset: ExperimentPreset = serde_json::from_str(&text)?;
    validate_preset(&preset)?;
    Ok(preset)
}

pub fn validate_preset(preset: &ExperimentPreset) -> Result<()> {
    match preset {
        ExperimentPreset::Estimation(p) => {
            if p.n_train == 0 || p.n_test == 0 {
                return Err(Error::domain("sample counts must be positive"));
            }
            if p.sigma < 0.0 {
                return Err(Error::domain("sigma must be non-negative"));
            }
            if p.estimators.is_empty() {
                return Err(Error::domain("preset needs at least one estimator"));
            }
            if let Sampler::Mixture { spec } = &p.sampler {
                spec.validate()?;
            }
            Ok(())
        }
        ExperimentPreset::VolumeMc(p) => {
            if p.dims.iter().any(|&m| m < 2) {
                return Err(Error::domain("volume dims must be >= 2"));
            }
            if p.draws == 0 {
                return Err(Error::domain("draw count must be positive"));
            }
            if p.thresholds.iter().any(|&t| !(0.5..1.0).contains(&t)) {
                return Err(Error::domain("corner thresholds must lie in [0.5, 1)"));
            }
            Ok(())
        }
    }
}

/// Canonical serialized form (stable field order, pretty-printed).
pub fn canonical_json(preset: &ExperimentPreset) -> Result<String> {
    Ok(serde_json::to_string_pretty(preset)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_round_trips() {
        let preset = ExperimentPreset::Estimation(EstimationPreset {
            name: "tiny".into(),
            description: "linear smoke".into(),
            system: SystemConfig::Linear {
                l: 5,
                m: 3,
                matrix: MatrixSource::SeededGaussian { seed: None },
            },
            sampler: Sampler::Uniform { dim: 3 },
            n_train: 100,
            n_test: 50,
            sigma: 0.005,
            estimators: vec![EstimatorConfig::Oracle],
            evaluation: EvaluationMode::Standard,
        });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        std::fs::write(&path, canonical_json(&preset).unwrap()).unwrap();
        let back = parse_config(&path).unwrap();
        assert_eq!(preset, back);
        // serialize(parse(x)) is canonical.
        assert_eq!(
            canonical_json(&back).unwrap(),
            canonical_json(&preset).unwrap()
        );
    }

    #[test]
    fn misspelled_key_is_rejected_by_name() {
        let text = r#"{
            "task": "estimation",
            "name": "x", "description": "d",
            "system": {"kind": "linear", "l": 5, "m": 3,
                       "matrix": {"source": "seeded-gaussian"}},
            "sampler": {"kind": "uniform", "dim": 3},
            "n_train": 10, "n_test": 10, "sgima": 0.005,
            "estimators": [{"kind": "oracle"}],
            "evaluation": "standard"
        }"#;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, text).unwrap();
        let err = parse_config(&path).unwrap_err();
        assert!(err.to_string().contains("sgima"), "error was: {err}");
    }
}

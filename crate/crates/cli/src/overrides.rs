//! Dotted-path key=value overrides for one-line experiment variations.

use compinv_core::error::{Error, Result};

use crate::config::{EstimatorConfig, ExperimentPreset};

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::InvalidOverride(format!("cannot parse value {value:?} for {key}")))
}

/// Applies `key=value` overrides. Supported keys: `sigma`, `n_train`,
/// `n_test`, `mlp.learning_rate`, `mlp.batch_size`, `mlp.max_epochs`,
/// `mlp.width_factor`, `mlp.regenerate_every`, `knn.k`, `volume.draws`.
/// Unknown keys are rejected by name.
pub fn apply_overrides(
    mut preset: ExperimentPreset,
    overrides: &[(String, String)],
) -> Result<ExperimentPreset> {
    for (key, value) in overrides {
        match (&mut preset, key.as_str()) {
            (ExperimentPreset::Estimation(p), "sigma") => p.sigma = parse(key, value)?,
            (ExperimentPreset::Estimation(p), "n_train") => p.n_train = parse(key, value)?,
            (ExperimentPreset::Estimation(p), "n_test") => p.n_test = parse(key, value)?,
            (ExperimentPreset::Estimation(p), "mlp.learning_rate") => {
                for_each_mlp(p, |m| m.learning_rate = parse(key, value).unwrap_or(m.learning_rate));
                let _: f64 = parse(key, value)?;
            }
            (ExperimentPreset::Estimation(p), "mlp.batch_size") => {
                let v: usize = parse(key, value)?;
                for_each_mlp(p, |m| m.batch_size = v);
            }
            (ExperimentPreset::Estimation(p), "mlp.max_epochs") => {
                let v: usize = parse(key, value)?;
                for_each_mlp(p, |m| m.max_epochs = v);
            }
            (ExperimentPreset::Estimation(p), "mlp.width_factor") => {
                let v: usize = parse(key, value)?;
                for_each_mlp(p, |m| m.width_factor = v);
            }
            (ExperimentPreset::Estimation(p), "mlp.regenerate_every") => {
                let v: usize = parse(key, value)?;
                for_each_mlp(p, |m| m.regenerate_every = if v == 0 { None } else { Some(v) });
            }
            (ExperimentPreset::Estimation(p), "knn.k") => {
                let v: usize = parse(key, value)?;
                for est in &mut p.estimators {
                    if let EstimatorConfig::Knn { k } = est {
                        *k = v;
                    }
                }
            }
            (ExperimentPreset::VolumeMc(p), "volume.draws") => p.draws = parse(key, value)?,
            _ => {
                return Err(Error::InvalidOverride(format!(
                    "unknown override key {key:?} for this preset"
                )))
            }
        }
    }
    Ok(preset)
}

fn for_each_mlp(p: &mut crate::config::EstimationPreset, mut f: impl FnMut(&mut crate::config::MlpConfig)) {
    for est in &mut p.estimators {
        if let EstimatorConfig::Mlp(cfg) = est {
            f(cfg);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::find_preset;

    #[test]
    fn sigma_override_applies() {
        let p = find_preset("lin_lowdim").unwrap();
        let p = apply_overrides(p, &[("sigma".into(), "0".into())]).unwrap();
        match p {
            ExperimentPreset::Estimation(e) => assert_eq!(e.sigma, 0.0),
            _ => panic!(),
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let p = find_preset("lin_lowdim").unwrap();
        let err = apply_overrides(p, &[("mlp.warp".into(), "1".into())]).unwrap_err();
        assert!(err.to_string().contains("mlp.warp"));
    }
}

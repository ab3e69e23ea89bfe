//! Executes a preset end to end: dataset generation, estimator fitting,
//! evaluation, and report emission.
//!
//! Every stochastic stage draws from its own named sub-stream of the master
//! seed, so reports are byte-reproducible and one stage's consumption cannot
//! shift another's draws.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use compinv_core::error::{Error, Result};
use compinv_core::knn::{KnnIndex, KnnSweepPoint};
use compinv_core::linear::{
    mle_system_matrix, unconstrained_oracle_error, LinearFit, PinvEstimator,
};
use compinv_core::metrics::{aad_percent, l2_error_percent, normalized_truth_rows};
use compinv_core::mlp::{build_network, train, NetworkSpec, TrainedModel, TrainingConfig};
use compinv_core::rng::{derive_seed, substream};
use compinv_core::simplex::Sampler;
use compinv_core::systems::{generate_dataset, ForwardSystem, PairedDataset};

use crate::config::{
    EstimationPreset, EstimatorConfig, EvaluationMode, ExperimentPreset, MlpConfig, VolumeMcPreset,
};
use crate::overrides::apply_overrides;

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    /// Omit wall-clock fields so repeated runs produce byte-identical
    /// reports.
    pub deterministic: bool,
    pub overrides: Vec<(String, String)>,
}

impl RunOptions {
    pub fn new(seed: u64) -> Self {
        RunOptions {
            seed,
            out_dir: None,
            deterministic: false,
            overrides: Vec::new(),
        }
    }
}

/// Per-estimator slice of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub tag: String,
    pub e_percent: f64,
    pub aad_percent: Vec<f64>,
    pub aad_mean_percent: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound_percent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrix_rel_frobenius_err: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_epoch: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_val_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<KnnSweepPoint>>,
}

/// One Monte-Carlo verification row of the volume preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeRow {
    pub m: usize,
    /// "corner" (any component above the threshold) or "tail" (first
    /// component above c/M).
    pub quantity: String,
    pub parameter: f64,
    pub closed_form: f64,
    pub mc_estimate: f64,
    pub mc_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub preset: String,
    pub seed: u64,
    pub system: String,
    pub sampler: String,
    pub n_train: usize,
    pub n_test: usize,
    pub sigma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub condition_number: Option<f64>,
    pub estimators: Vec<EstimatorReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub volume: Option<Vec<VolumeRow>>,
}

impl ExperimentReport {
    pub fn estimator(&self, tag: &str) -> Option<&EstimatorReport> {
        self.estimators.iter().find(|e| e.tag == tag)
    }

    /// Human-readable summary printed by the CLI.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "preset {} (seed {})\n  system: {}\n  sampler: {}\n  n_train {} n_test {} sigma {}\n",
            self.preset, self.seed, self.system, self.sampler, self.n_train, self.n_test,
            self.sigma
        ));
        if let Some(c) = self.condition_number {
            out.push_str(&format!("  condition number: {c:.4}\n"));
        }
        for e in &self.estimators {
            out.push_str(&format!(
                "  {:<14} e = {:>8.4}%  aad-mean = {:>8.4}%",
                e.tag, e.e_percent, e.aad_mean_percent
            ));
            if let Some(b) = e.bound_percent {
                out.push_str(&format!("  bound = {b:.4}%"));
            }
            if let Some(t) = e.wall_time_s {
                out.push_str(&format!("  [{t:.1}s]"));
            }
            out.push('\n');
            if let Some(sweep) = &e.sweep {
                for p in sweep {
                    out.push_str(&format!("      k={:<3} e = {:>8.4}%\n", p.k, p.e_percent));
                }
            }
        }
        if let Some(rows) = &self.volume {
            for r in rows {
                out.push_str(&format!(
                    "  M={:<3} {:<7} p={:<5} closed {:.3e}  mc {:.3e}  se {:.3e}\n",
                    r.m, r.quantity, r.parameter, r.closed_form, r.mc_estimate, r.mc_stderr
                ));
            }
        }
        out
    }
}

/// Runs a preset (with overrides applied) and writes report artifacts when an
/// output directory is given.
pub fn run(preset: &ExperimentPreset, opts: &RunOptions) -> Result<ExperimentReport> {
    let preset = apply_overrides(preset.clone(), &opts.overrides)?;
    crate::config::validate_preset(&preset)?;
    let report = match &preset {
        ExperimentPreset::Estimation(p) => run_estimation(p, opts)?,
        ExperimentPreset::VolumeMc(p) => run_volume(p, opts)?,
    };
    if let Some(dir) = &opts.out_dir {
        write_artifacts(&report, dir)?;
    }
    Ok(report)
}

fn run_estimation(preset: &EstimationPreset, opts: &RunOptions) -> Result<ExperimentReport> {
    let seed = opts.seed;
    let sys = preset.system.build(seed)?;

    let train_ds = generate_dataset(
        &sys,
        &preset.sampler,
        preset.n_train,
        preset.sigma,
        derive_seed(seed, "train-data"),
    )?;
    let (test_sampler, n_test) = match preset.evaluation {
        EvaluationMode::EndMemberStress => {
            let s = Sampler::EndMembers {
                dim: sys.input_dim(),
                exclude: Vec::new(),
            };
            let count = s.fixed_count().expect("end members are finite");
            if preset.n_test != count {
                return Err(Error::domain(format!(
                    "end-member stress test uses exactly {count} test samples"
                )));
            }
            (s, count)
        }
        _ => (preset.sampler.clone(), preset.n_test),
    };
    let test_ds = generate_dataset(
        &sys,
        &test_sampler,
        n_test,
        preset.sigma,
        derive_seed(seed, "test-data"),
    )?;

    // Evaluation truth and learning targets: the visible components,
    // renormalized, when the system hides some.
    let visible: Vec<usize> = (0..sys.visible_dim()).collect();
    let normalized = matches!(preset.evaluation, EvaluationMode::ObfuscatedNormalized);
    let truth = if normalized {
        normalized_truth_rows(&test_ds.x, &visible)?
    } else {
        test_ds.x.clone()
    };
    let targets = if normalized {
        normalized_truth_rows(&train_ds.x, &visible)?
    } else {
        train_ds.x.clone()
    };

    let cond = sys
        .matrix()
        .map(compinv_core::linear::condition_number)
        .transpose()?;

    let mut reports = Vec::new();
    for est in &preset.estimators {
        let started = Instant::now();
        let mut rep = match est {
            EstimatorConfig::Oracle => run_oracle(&sys, preset, &test_ds, &truth)?,
            EstimatorConfig::Benchmark => {
                run_benchmark(&sys, preset, &train_ds, &test_ds, &truth)?
            }
            EstimatorConfig::Knn { k } => {
                let index = KnnIndex::from_parts(train_ds.y.clone(), targets.clone())?;
                let pred = index.predict_batch(&test_ds.y, *k)?;
                estimator_report(format!("knn(k={k})"), &truth, &pred)?
            }
            EstimatorConfig::KnnSweep { ks } => {
                let index = KnnIndex::from_parts(train_ds.y.clone(), targets.clone())?;
                let eval_ds = PairedDataset {
                    x: truth.clone(),
                    y: test_ds.y.clone(),
                    sigma: test_ds.sigma,
                    seed: test_ds.seed,
                    system_tag: test_ds.system_tag.clone(),
                    sampler_tag: test_ds.sampler_tag.clone(),
                };
                let sweep = index.sweep_k(&eval_ds, ks)?;
                let best = sweep
                    .iter()
                    .min_by(|a, b| a.e_percent.partial_cmp(&b.e_percent).unwrap())
                    .expect("non-empty sweep");
                EstimatorReport {
                    tag: "knn-sweep".into(),
                    e_percent: best.e_percent,
                    aad_percent: best.aad_percent.clone(),
                    aad_mean_percent: best.aad_percent.iter().sum::<f64>()
                        / best.aad_percent.len() as f64,
                    bound_percent: None,
                    wall_time_s: None,
                    matrix_rel_frobenius_err: None,
                    best_epoch: None,
                    best_val_loss: None,
                    sweep: Some(sweep),
                }
            }
            EstimatorConfig::Mlp(cfg) => run_mlp(
                &sys, preset, cfg, &train_ds, &targets, &test_ds, &truth, seed, opts,
            )?,
        };
        if !opts.deterministic {
            rep.wall_time_s = Some(started.elapsed().as_secs_f64());
        }
        reports.push(rep);
    }

    Ok(ExperimentReport {
        preset: preset.name.clone(),
        seed,
        system: sys.tag(),
        sampler: preset.sampler.tag(),
        n_train: preset.n_train,
        n_test,
        sigma: preset.sigma,
        condition_number: cond,
        estimators: reports,
        volume: None,
    })
}

fn estimator_report(tag: String, truth: &Array2<f64>, est: &Array2<f64>) -> Result<EstimatorReport> {
    let aad = aad_percent(truth, est)?;
    Ok(EstimatorReport {
        tag,
        e_percent: l2_error_percent(truth, est)?,
        aad_mean_percent: aad.mean().unwrap_or(0.0),
        aad_percent: aad.to_vec(),
        bound_percent: None,
        wall_time_s: None,
        matrix_rel_frobenius_err: None,
        best_epoch: None,
        best_val_loss: None,
        sweep: None,
    })
}

fn run_oracle(
    sys: &ForwardSystem,
    preset: &EstimationPreset,
    test_ds: &PairedDataset,
    truth: &Array2<f64>,
) -> Result<EstimatorReport> {
    let h = sys
        .visible_matrix()
        .ok_or_else(|| Error::domain(format!("no oracle estimator for {}", sys.tag())))?;
    let est = PinvEstimator::from_matrix(&h, sys.cascade_inverse())?;
    let pred = est.estimate_batch(&test_ds.y)?;
    let mut rep = estimator_report("oracle".into(), truth, &pred)?;
    if matches!(
        sys,
        ForwardSystem::Linear { .. } | ForwardSystem::HighdimLinear { .. }
    ) {
        rep.bound_percent = Some(unconstrained_oracle_error(&h, preset.sigma)?);
    }
    Ok(rep)
}

fn run_benchmark(
    sys: &ForwardSystem,
    preset: &EstimationPreset,
    train_ds: &PairedDataset,
    test_ds: &PairedDataset,
    truth: &Array2<f64>,
) -> Result<EstimatorReport> {
    // The end-member stress test refits the matrix on the test set itself;
    // everything else fits on the training pairs. The regressors are the
    // (myopic) feature map of the visible components.
    let fit_ds = match preset.evaluation {
        EvaluationMode::EndMemberStress => test_ds,
        _ => train_ds,
    };
    let features = sys
        .mle_features(&fit_ds.x)
        .ok_or_else(|| Error::domain(format!("no benchmark estimator for {}", sys.tag())))?;
    let mut fit: LinearFit = mle_system_matrix(&features, &fit_ds.y)?;
    if let Some(h_true) = sys.visible_matrix() {
        if h_true.dim() == fit.h_hat.dim() {
            fit = fit.with_reference(&h_true);
        }
    }
    let est = PinvEstimator::from_matrix(&fit.h_hat, sys.cascade_inverse())?;
    let pred = est.estimate_batch(&test_ds.y)?;
    let mut rep = estimator_report("benchmark".into(), truth, &pred)?;
    rep.matrix_rel_frobenius_err = fit.frob_rel_err_vs;
    if matches!(
        sys,
        ForwardSystem::Linear { .. } | ForwardSystem::HighdimLinear { .. }
    ) {
        rep.bound_percent = Some(unconstrained_oracle_error(&fit.h_hat, preset.sigma)?);
    }
    Ok(rep)
}

#[allow(clippy::too_many_arguments)]
fn run_mlp(
    sys: &ForwardSystem,
    preset: &EstimationPreset,
    cfg: &MlpConfig,
    train_ds: &PairedDataset,
    targets: &Array2<f64>,
    test_ds: &PairedDataset,
    truth: &Array2<f64>,
    seed: u64,
    opts: &RunOptions,
) -> Result<EstimatorReport> {
    let m_v = sys.visible_dim();
    let spec = NetworkSpec::with_width_factor(sys.obs_dim(), m_v, cfg.width_factor);
    let model = build_network(&spec, &mut substream(seed, "mlp-init"))?;
    let config = TrainingConfig {
        learning_rate: cfg.learning_rate,
        batch_size: cfg.batch_size,
        beta1: 0.9,
        beta2: 0.999,
        decay: cfg.decay,
        max_epochs: cfg.max_epochs,
        validation_fraction: cfg.validation_fraction,
        regenerate_every: cfg.regenerate_every,
        seed: derive_seed(seed, "mlp-train"),
    };
    // The network learns observation -> (normalized visible) composition.
    let training_view = PairedDataset {
        x: targets.clone(),
        y: train_ds.y.clone(),
        sigma: train_ds.sigma,
        seed: train_ds.seed,
        system_tag: train_ds.system_tag.clone(),
        sampler_tag: train_ds.sampler_tag.clone(),
    };
    let visible: Vec<usize> = (0..m_v).collect();
    let normalized = matches!(preset.evaluation, EvaluationMode::ObfuscatedNormalized);
    let sampler = preset.sampler.clone();
    let sigma = preset.sigma;
    let n_train = preset.n_train;
    let sys_ref = &*sys;
    let mut regen = move |ordinal: u64| -> Result<PairedDataset> {
        let fresh = generate_dataset(
            sys_ref,
            &sampler,
            n_train,
            sigma,
            derive_seed(seed, &format!("regen-{ordinal}")),
        )?;
        let fresh_targets = if normalized {
            normalized_truth_rows(&fresh.x, &visible)?
        } else {
            fresh.x.clone()
        };
        Ok(PairedDataset {
            x: fresh_targets,
            ..fresh
        })
    };
    let regenerator = cfg.regenerate_every.map(|_| {
        let r: &mut dyn FnMut(u64) -> Result<PairedDataset> = &mut regen;
        r
    });
    let trained: TrainedModel = train(model, &training_view, &config, regenerator)?;
    let pred = trained.model.forward_eval(&test_ds.y);
    let mut rep = estimator_report(format!("mlp({}xMv)", cfg.width_factor), truth, &pred)?;
    rep.best_epoch = Some(trained.best_epoch);
    rep.best_val_loss = Some(trained.best_val_loss);
    if let Some(dir) = &opts.out_dir {
        fs::create_dir_all(dir)?;
        write_training_log(&dir.join(format!("training_log_{}.csv", rep.tag)), &trained)?;
        trained
            .model
            .save_json(&dir.join(format!("model_{}.json", rep.tag)))?;
    }
    Ok(rep)
}

fn run_volume(preset: &VolumeMcPreset, opts: &RunOptions) -> Result<ExperimentReport> {
    use compinv_core::simplex::{mc_corner_mass, mc_tail_above_scaled_mean};
    let mut rows = Vec::new();
    for &m in &preset.dims {
        for &t in &preset.thresholds {
            let eps = 1.0 - t;
            let check = mc_corner_mass(
                m,
                eps,
                preset.draws,
                &mut substream(opts.seed, &format!("corner-{m}-{t}")),
            )?;
            rows.push(VolumeRow {
                m,
                quantity: "corner".into(),
                parameter: t,
                closed_form: check.closed_form,
                mc_estimate: check.estimate,
                mc_stderr: check.std_err,
            });
        }
        for &c in &preset.mean_multipliers {
            let check = mc_tail_above_scaled_mean(
                m,
                c,
                preset.draws,
                &mut substream(opts.seed, &format!("tail-{m}-{c}")),
            )?;
            rows.push(VolumeRow {
                m,
                quantity: "tail".into(),
                parameter: c,
                closed_form: check.closed_form,
                mc_estimate: check.estimate,
                mc_stderr: check.std_err,
            });
        }
    }
    Ok(ExperimentReport {
        preset: preset.name.clone(),
        seed: opts.seed,
        system: "none".into(),
        sampler: "uniform".into(),
        n_train: 0,
        n_test: preset.draws,
        sigma: 0.0,
        condition_number: None,
        estimators: Vec::new(),
        volume: Some(rows),
    })
}

fn write_artifacts(report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(report)?,
    )?;
    // Per-component AAD table.
    let mut w = csv::WriterBuilder::new().from_path(dir.join("errors.csv"))?;
    w.write_record(["estimator_tag", "component_index", "aad_percent"])?;
    for est in &report.estimators {
        for (i, aad) in est.aad_percent.iter().enumerate() {
            w.write_record([
                est.tag.clone(),
                i.to_string(),
                format!("{aad:.17e}"),
            ])?;
        }
    }
    w.flush()?;
    // k-sweep tables.
    for est in &report.estimators {
        if let Some(sweep) = &est.sweep {
            let mut w =
                csv::WriterBuilder::new().from_path(dir.join(format!("{}.csv", est.tag)))?;
            let m = sweep[0].aad_percent.len();
            let mut header = vec!["k".to_string(), "e_percent".to_string()];
            header.extend((1..=m).map(|i| format!("aad_{i}")));
            w.write_record(&header)?;
            for p in sweep {
                let mut rec = vec![p.k.to_string(), format!("{:.17e}", p.e_percent)];
                rec.extend(p.aad_percent.iter().map(|v| format!("{v:.17e}")));
                w.write_record(&rec)?;
            }
            w.flush()?;
        }
    }
    // Volume rows as plot-ready CSV.
    if let Some(rows) = &report.volume {
        let mut w = csv::WriterBuilder::new().from_path(dir.join("volume.csv"))?;
        w.write_record(["m", "quantity", "parameter", "closed_form", "mc_estimate", "mc_stderr"])?;
        for r in rows {
            w.write_record([
                r.m.to_string(),
                r.quantity.clone(),
                format!("{}", r.parameter),
                format!("{:.17e}", r.closed_form),
                format!("{:.17e}", r.mc_estimate),
                format!("{:.17e}", r.mc_stderr),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn write_training_log(path: &Path, trained: &TrainedModel) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_path(path)?;
    w.write_record(["epoch", "train_loss", "val_loss", "lr"])?;
    for log in &trained.history {
        w.write_record([
            log.epoch.to_string(),
            format!("{:.17e}", log.train_loss),
            format!("{:.17e}", log.val_loss),
            format!("{:.17e}", log.lr),
        ])?;
    }
    w.flush()?;
    Ok(())
}

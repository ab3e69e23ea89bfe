use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use compinv_cli::config::{parse_config, ExperimentPreset};
use compinv_cli::presets::{all_presets, find_preset};
use compinv_cli::runner::{run, RunOptions};
use compinv_core::error::Error;

#[derive(Parser)]
#[command(
    name = "compinv",
    about = "Compositional-inversion lab: synthetic systems, estimators, and bounds",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the built-in experiment presets.
    List,
    /// Run a preset (or a preset JSON file) end to end.
    Run {
        /// Preset name from `list`, or a path to a preset JSON file.
        preset: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Directory for report.json, errors.csv, and training logs.
        #[arg(long)]
        out: Option<PathBuf>,
        /// key=value overrides (e.g. --set sigma=0 --set mlp.max_epochs=50).
        #[arg(long = "set", value_parser = parse_kv)]
        set: Vec<(String, String)>,
        /// Omit wall-clock fields so repeated runs are byte-identical.
        #[arg(long)]
        deterministic: bool,
    },
    /// Run a preset's neighbor-count sweep with an explicit k list.
    KnnSweep {
        preset: String,
        /// Comma-separated neighbor counts, e.g. 1,3,5,7.
        #[arg(long)]
        ks: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the condition number and noise-amplification bound of a system
    /// config (JSON file).
    Bounds {
        config: PathBuf,
        #[arg(long, default_value_t = 0.005)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Monte-Carlo verification of the simplex concentration formulas.
    VolumeMc {
        /// Comma-separated dimensions.
        #[arg(long, default_value = "2,3,5,7,10,15")]
        dims: String,
        /// Number of draws per cell (scientific notation accepted).
        #[arg(long, default_value = "1e6")]
        draws: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Verify the network's analytic gradients against finite differences.
    GradCheck {
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .ok_or_else(|| format!("expected key=value, got {s:?}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Divergence { .. } | Error::RankDeficient { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn threads_note() -> String {
    // Computation is single-threaded; COMPINV_THREADS caps (and can only
    // lower) the worker count.
    match std::env::var("COMPINV_THREADS") {
        Ok(v) => format!("threads: {}", v.parse::<usize>().map_or(1, |n| n.clamp(1, 1))),
        Err(_) => "threads: 1".to_string(),
    }
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::List => {
            println!("{}", threads_note());
            for p in all_presets() {
                println!("{:<24} {}", p.name(), p.description());
            }
            Ok(())
        }
        Command::Run {
            preset,
            seed,
            out,
            set,
            deterministic,
        } => {
            let preset = load_preset(&preset)?;
            let opts = RunOptions {
                seed,
                out_dir: out,
                deterministic,
                overrides: set,
            };
            let report = run(&preset, &opts)?;
            print!("{}", report.summary_table());
            Ok(())
        }
        Command::KnnSweep { preset, ks, seed, out } => {
            let preset = load_preset(&preset)?;
            let ks_vec: Result<Vec<usize>, _> = ks.split(',').map(|s| s.trim().parse()).collect();
            let ks_vec =
                ks_vec.map_err(|e| Error::InvalidOverride(format!("bad k list {ks:?}: {e}")))?;
            let mut preset = preset;
            if let ExperimentPreset::Estimation(p) = &mut preset {
                use compinv_cli::config::EstimatorConfig;
                let mut found = false;
                for est in &mut p.estimators {
                    if let EstimatorConfig::KnnSweep { ks } = est {
                        *ks = ks_vec.clone();
                        found = true;
                    }
                }
                if !found {
                    p.estimators.push(EstimatorConfig::KnnSweep { ks: ks_vec });
                }
                // Only the sweep is of interest here.
                p.estimators
                    .retain(|e| matches!(e, EstimatorConfig::KnnSweep { .. }));
            } else {
                return Err(Error::domain("knn-sweep needs an estimation preset"));
            }
            let opts = RunOptions {
                seed,
                out_dir: out,
                deterministic: false,
                overrides: Vec::new(),
            };
            let report = run(&preset, &opts)?;
            print!("{}", report.summary_table());
            Ok(())
        }
        Command::Bounds { config, sigma, seed } => {
            let text = std::fs::read_to_string(&config)?;
            let system: compinv_cli::config::SystemConfig = serde_json::from_str(&text)?;
            let sys = system.build(seed)?;
            let h = sys
                .visible_matrix()
                .ok_or_else(|| Error::domain("system has no matrix; no closed-form bound"))?;
            let cond = compinv_core::linear::condition_number(&h)?;
            let bound = compinv_core::linear::unconstrained_oracle_error(&h, sigma)?;
            println!("system: {}", sys.tag());
            println!("L x M: {} x {}", h.nrows(), h.ncols());
            println!("condition number: {cond:.6}");
            println!("unconstrained inversion error at sigma={sigma}: {bound:.6}%");
            Ok(())
        }
        Command::VolumeMc { dims, draws, seed, out } => {
            let dims_vec: Result<Vec<usize>, _> =
                dims.split(',').map(|s| s.trim().parse()).collect();
            let dims_vec =
                dims_vec.map_err(|e| Error::InvalidOverride(format!("bad dims {dims:?}: {e}")))?;
            let draws_f: f64 = draws
                .parse()
                .map_err(|e| Error::InvalidOverride(format!("bad draws {draws:?}: {e}")))?;
            let mut preset = find_preset("volume_mc")?;
            if let ExperimentPreset::VolumeMc(p) = &mut preset {
                p.dims = dims_vec;
                p.draws = draws_f as usize;
            }
            let opts = RunOptions {
                seed,
                out_dir: out,
                deterministic: false,
                overrides: Vec::new(),
            };
            let report = run(&preset, &opts)?;
            print!("{}", report.summary_table());
            Ok(())
        }
        Command::GradCheck { eps, seed } => {
            use compinv_core::mlp::{build_network, grad_check, NetworkSpec};
            use compinv_core::rng::substream;
            use compinv_core::simplex::sample_uniform_simplex;
            let spec = NetworkSpec {
                input_dim: 5,
                hidden_widths: vec![8, 8],
                output_dim: 3,
                use_batchnorm: true,
            };
            let model = build_network(&spec, &mut substream(seed, "gradcheck-init"))?;
            let mut rng = substream(seed, "gradcheck-data");
            use rand::Rng;
            let batch =
                ndarray::Array2::from_shape_fn((6, 5), |_| rng.gen::<f64>() * 2.0 - 1.0);
            let targets = sample_uniform_simplex(3, 6, &mut rng)?;
            let worst = grad_check(&model, &batch, &targets, eps)?;
            println!("max relative deviation: {worst:.3e} (eps = {eps:e})");
            if worst >= 1e-4 {
                return Err(Error::domain(format!(
                    "gradient check failed: {worst:.3e} >= 1e-4"
                )));
            }
            Ok(())
        }
    }
}

fn load_preset(name_or_path: &str) -> Result<ExperimentPreset, Error> {
    let path = std::path::Path::new(name_or_path);
    if name_or_path.ends_with(".json") || path.exists() {
        parse_config(path)
    } else {
        find_preset(name_or_path)
    }
}

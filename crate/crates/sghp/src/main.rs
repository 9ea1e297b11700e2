//! `sghp`: simulate, train, evaluate, and inspect sigmoid-gated Hawkes
//! process models.
//!
//! Every subcommand is driven by one TOML run configuration plus flag
//! overrides (flags win), and all randomness flows from the single master
//! seed, so identical invocations produce identical artifacts. On failure the
//! process exits nonzero with one `error_code: message` line on stderr and
//! removes any partially written outputs.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sghp::config::{ConfigError, EvalSplit, RunConfig};
use sghp::{checkpoint, dataset_io, report, spec_io, SystemClock};
use sghp_core::data::Dataset;
use sghp_core::eval;
use sghp_core::hawkes::HawkesSpec;
use sghp_core::model::SghpModel;
use sghp_core::rng;
use sghp_core::train::{train, TrainError};

#[derive(Parser)]
#[command(name = "sghp", version, about = "Sigmoid-gated Hawkes process modeling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// Run configuration document (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<String>,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset from a Hawkes specification.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Specification source: `appendix-a` or a TOML path.
        #[arg(long)]
        spec: Option<String>,
        /// Number of sequences.
        #[arg(long)]
        n: Option<usize>,
        /// Simulation horizon.
        #[arg(long)]
        horizon: Option<f64>,
        /// Discard sequences shorter than this.
        #[arg(long)]
        min_len: Option<usize>,
    },
    /// Train a model on a dataset file.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Dataset path.
        #[arg(long)]
        dataset: Option<String>,
    },
    /// Evaluate a checkpoint: prediction metrics and kernel recovery.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        checkpoint: Option<String>,
        /// Ground-truth spec for kernel recovery (`none` to skip).
        #[arg(long)]
        spec: Option<String>,
    },
    /// Export learned (and optionally true) kernel curves as CSV grids.
    ExportKernels {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        checkpoint: Option<String>,
        /// Ground-truth spec for the truth column (`none` to skip).
        #[arg(long)]
        spec: Option<String>,
    },
    /// Validate a dataset file and print the per-sequence report.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        dataset: Option<String>,
    },
}

/// One-line machine-parseable failure.
struct CliError {
    code: &'static str,
    message: String,
}

impl CliError {
    fn new(code: &'static str, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }
}

macro_rules! cli_error_from {
    ($ty:ty) => {
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError {
                    code: e.code(),
                    message: e.to_string(),
                }
            }
        }
    };
}

cli_error_from!(ConfigError);
cli_error_from!(dataset_io::DatasetIoError);
cli_error_from!(spec_io::SpecIoError);
cli_error_from!(checkpoint::CheckpointError);
cli_error_from!(report::ReportError);

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::new("io_error", e.to_string())
    }
}

impl From<sghp_core::data::DataError> for CliError {
    fn from(e: sghp_core::data::DataError) -> Self {
        CliError::new("invalid_dataset", e.to_string())
    }
}

impl From<sghp_core::hawkes::HawkesError> for CliError {
    fn from(e: sghp_core::hawkes::HawkesError) -> Self {
        let code = match e {
            sghp_core::hawkes::HawkesError::Unstable { .. } => "unstable_spec",
            _ => "simulation_error",
        };
        CliError::new(code, e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        let code = match e {
            TrainError::AllSequencesTooShort => "sequence_too_short",
            TrainError::Model(sghp_core::model::ModelError::SequenceTooShort { .. }) => {
                "sequence_too_short"
            }
            TrainError::ConfigMismatch { .. } => "config_error",
            TrainError::EmptyValidation => "empty_split",
            _ => "train_error",
        };
        CliError::new(code, e.to_string())
    }
}

impl From<eval::EvalError> for CliError {
    fn from(e: eval::EvalError) -> Self {
        let code = match e {
            eval::EvalError::ShortSequence { .. } => "sequence_too_short",
            eval::EvalError::DegenerateTruth { .. } => "degenerate_kernel",
            _ => "eval_error",
        };
        CliError::new(code, e.to_string())
    }
}

impl From<sghp_core::model::ModelError> for CliError {
    fn from(e: sghp_core::model::ModelError) -> Self {
        let code = match e {
            sghp_core::model::ModelError::SequenceTooShort { .. } => "sequence_too_short",
            _ => "model_error",
        };
        CliError::new(code, e.to_string())
    }
}

/// Collects written artifacts so a failed run leaves nothing behind.
struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Outputs {
            dir: PathBuf::from(dir),
            written: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, content: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, content)?;
        self.written.push(path.clone());
        Ok(path)
    }

    fn discard(&self) {
        for path in &self.written {
            let _ = fs::remove_file(path);
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}: {}", e.code, e.message);
            ExitCode::FAILURE
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.io.out_dir = out.clone();
    }
    Ok(cfg)
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate {
            common,
            spec,
            n,
            horizon,
            min_len,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(s) = spec {
                cfg.io.spec = s;
            }
            if let Some(n) = n {
                cfg.simulate.num_sequences = n;
            }
            if let Some(h) = horizon {
                cfg.simulate.horizon = h;
            }
            if let Some(m) = min_len {
                cfg.simulate.min_len = m;
            }
            with_outputs(&cfg, run_simulate)
        }
        Command::Train { common, dataset } => {
            let mut cfg = load_config(&common)?;
            if let Some(d) = dataset {
                cfg.io.dataset = Some(d);
            }
            with_outputs(&cfg, run_train)
        }
        Command::Evaluate {
            common,
            dataset,
            checkpoint,
            spec,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(d) = dataset {
                cfg.io.dataset = Some(d);
            }
            if let Some(c) = checkpoint {
                cfg.io.checkpoint = Some(c);
            }
            if let Some(s) = spec {
                cfg.io.spec = s;
            }
            with_outputs(&cfg, run_evaluate)
        }
        Command::ExportKernels {
            common,
            checkpoint,
            spec,
        } => {
            let mut cfg = load_config(&common)?;
            if let Some(c) = checkpoint {
                cfg.io.checkpoint = Some(c);
            }
            if let Some(s) = spec {
                cfg.io.spec = s;
            }
            with_outputs(&cfg, run_export_kernels)
        }
        Command::Validate { common, dataset } => {
            let mut cfg = load_config(&common)?;
            if let Some(d) = dataset {
                cfg.io.dataset = Some(d);
            }
            run_validate(&cfg)
        }
    }
}

/// Runs a body against an output tracker; partial outputs vanish on failure.
fn with_outputs(
    cfg: &RunConfig,
    body: fn(&RunConfig, &mut Outputs) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let mut outputs = Outputs::new(&cfg.io.out_dir)?;
    match body(cfg, &mut outputs) {
        Ok(()) => Ok(()),
        Err(e) => {
            outputs.discard();
            Err(e)
        }
    }
}

fn echo_config(cfg: &RunConfig, outputs: &mut Outputs) -> Result<(), CliError> {
    outputs.write("config.toml", &cfg.to_toml()?)?;
    Ok(())
}

fn required<'a>(field: &'a Option<String>, what: &str) -> Result<&'a str, CliError> {
    field
        .as_deref()
        .ok_or_else(|| CliError::new("config_error", format!("missing required input: {what}")))
}

fn load_dataset(path: &str) -> Result<Dataset, CliError> {
    let file = fs::File::open(path)
        .map_err(|e| CliError::new("io_error", format!("{path}: {e}")))?;
    Ok(dataset_io::parse_dataset(BufReader::new(file))?)
}

fn load_truth(cfg: &RunConfig) -> Result<Option<HawkesSpec>, CliError> {
    if cfg.io.spec == "none" {
        return Ok(None);
    }
    Ok(Some(spec_io::load_spec_source(&cfg.io.spec)?))
}

fn load_checkpoint(path: &str) -> Result<SghpModel, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new("io_error", format!("{path}: {e}")))?;
    Ok(checkpoint::load_from_str(&text)?)
}

fn run_simulate(cfg: &RunConfig, outputs: &mut Outputs) -> Result<(), CliError> {
    let spec = spec_io::load_spec_source(&cfg.io.spec)?;
    let sim = &cfg.simulate;
    let sequences = spec.simulate_dataset(sim.num_sequences, sim.horizon, cfg.seed, sim.min_len)?;
    let total_events: usize = sequences.iter().map(|s| s.len()).sum();
    let ds = Dataset::new(
        sequences,
        spec.num_types(),
        0,
        sim.time_unit.clone(),
    )?;
    let path = outputs.write("dataset.jsonl", &dataset_io::dataset_to_string(&ds)?)?;
    echo_config(cfg, outputs)?;
    println!(
        "wrote {} sequences (mean length {:.1}) to {}",
        ds.len(),
        total_events as f64 / ds.len() as f64,
        path.display()
    );
    Ok(())
}

fn split_dataset(cfg: &RunConfig, ds: &Dataset) -> Result<(Dataset, Dataset, Dataset), CliError> {
    let [a, b, c] = cfg.training.split;
    Ok(ds.split((a, b, c), cfg.seed)?)
}

fn run_train(cfg: &RunConfig, outputs: &mut Outputs) -> Result<(), CliError> {
    let ds = load_dataset(required(&cfg.io.dataset, "io.dataset")?)?;
    let (train_ds, val_ds, _test) = split_dataset(cfg, &ds)?;
    let model_cfg = cfg.model.to_model_config(ds.num_types(), ds.covariate_dim());
    let train_cfg = cfg.training.to_train_config(model_cfg, cfg.seed);
    let mut clock = SystemClock::new();
    let (model, train_report) = train(&train_ds, &val_ds, &train_cfg, &mut clock)?;

    outputs.write("checkpoint.json", &checkpoint::save_to_string(&model)?)?;
    outputs.write("train_report.csv", &report::train_report_csv(&train_report))?;
    outputs.write("train_summary.toml", &report::train_summary_toml(&train_report)?)?;
    echo_config(cfg, outputs)?;
    println!(
        "trained {} epochs (best {}), {} parameters; checkpoint in {}",
        train_report.epochs_run(),
        train_report.best_epoch,
        train_report.param_count,
        outputs.dir.display()
    );
    Ok(())
}

fn pick_split(cfg: &RunConfig, ds: &Dataset) -> Result<Dataset, CliError> {
    Ok(match cfg.evaluation.split {
        EvalSplit::All => ds.clone(),
        which => {
            let (train_ds, val_ds, test_ds) = split_dataset(cfg, ds)?;
            match which {
                EvalSplit::Train => train_ds,
                EvalSplit::Val => val_ds,
                EvalSplit::Test => test_ds,
                EvalSplit::All => unreachable!(),
            }
        }
    })
}

fn run_evaluate(cfg: &RunConfig, outputs: &mut Outputs) -> Result<(), CliError> {
    let ds = load_dataset(required(&cfg.io.dataset, "io.dataset")?)?;
    let model = load_checkpoint(required(&cfg.io.checkpoint, "io.checkpoint")?)?;
    let portion = pick_split(cfg, &ds)?;
    let eval_seed = rng::derive(cfg.seed, &[rng::tag::EVAL_NOISE]);

    let rmse = eval::rmse_last_event(&portion, &model, eval_seed)?;
    let f1_micro = eval::f1_micro_last_event(&portion, &model, eval_seed)?;
    let aps = if model.config().num_types == 2 {
        let scored = eval::binary_scores_last_event(&portion, &model, eval_seed)?;
        eval::average_precision(&scored).ok()
    } else {
        None
    };

    let recovery = match load_truth(cfg)? {
        Some(truth) => {
            let grid = cfg.evaluation.grid()?;
            eval::kernel_recovery(&model, &truth, &grid)?
                .iter()
                .map(report::RecoveryEntry::from)
                .collect()
        }
        None => Vec::new(),
    };

    let doc = report::MetricsReport {
        rmse,
        f1_micro,
        aps,
        recovery,
    };
    let path = outputs.write("metrics.toml", &report::metrics_toml(&doc)?)?;
    echo_config(cfg, outputs)?;
    println!(
        "rmse {rmse:.4}  f1_micro {f1_micro:.4}  ({} sequences) -> {}",
        portion.len(),
        path.display()
    );
    Ok(())
}

fn run_export_kernels(cfg: &RunConfig, outputs: &mut Outputs) -> Result<(), CliError> {
    let model = load_checkpoint(required(&cfg.io.checkpoint, "io.checkpoint")?)?;
    let truth = load_truth(cfg)?;
    let grid = cfg.evaluation.grid()?;
    let k = model.config().num_types;
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|u| (0..k).map(move |v| (u, v)))
        .collect();
    let grids = eval::export_kernel_grids(&model, &pairs, &grid, truth.as_ref())?;
    for grid in &grids {
        outputs.write(
            &format!("kernel_{}_{}.csv", grid.source, grid.target),
            &report::kernel_grid_csv(grid),
        )?;
    }
    echo_config(cfg, outputs)?;
    println!("wrote {} kernel grids to {}", grids.len(), outputs.dir.display());
    Ok(())
}

fn run_validate(cfg: &RunConfig) -> Result<(), CliError> {
    let path = required(&cfg.io.dataset, "io.dataset")?;
    let file = fs::File::open(Path::new(path))
        .map_err(|e| CliError::new("io_error", format!("{path}: {e}")))?;
    let (ds, lines) = dataset_io::parse_dataset_unchecked(BufReader::new(file))?;
    let report = ds.validate();
    for check in &report.checks {
        match &check.violation {
            None => println!("sequence {}: ok", check.index),
            Some(v) => println!(
                "sequence {} (line {}): {v}",
                check.index, lines[check.index]
            ),
        }
    }
    println!(
        "result: {}",
        if report.all_pass() { "pass" } else { "fail" }
    );
    Ok(())
}

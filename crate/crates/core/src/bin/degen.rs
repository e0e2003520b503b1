use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::Serialize;

use degen::harness::{
    experiment_compare, experiment_fork, experiment_overfit, experiment_smoothing_sweep, records_to_csv,
    run_training, write_run_dir, ExperimentFile, MetricsRecord, OutputFormat, RunManifest, Trainer,
};
use degen::hessian::hutchinson_trace;
use degen::nn::MlpModel;
use degen::slt::estimate_llc;
use degen::{Error, ParamVector, Result};

/// Learning-coefficient experiments on small MLPs.
#[derive(Parser)]
#[command(name = "degen", version)]
struct Cli {
    /// TOML configuration; see README for the schema.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides `run.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default `runs/<command>`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[arg(long, global = true, default_value = "csv")]
    format: OutputFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and record per-epoch metrics.
    Train,
    /// SGD against NGD over the `[compare]` seeds.
    Compare,
    /// NGD over the `[sweep]` smoothing grid.
    Sweep,
    /// Pretrain with SGD, then continue two branches from the same state.
    Fork,
    /// Long training run with overfitting diagnostics.
    Overfit,
    /// Learning-coefficient estimate at a checkpoint.
    Llc {
        /// Parameters written by `train` (`final.bin`); fresh
        /// initialisation when absent.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Hutchinson trace of the loss Hessian at a checkpoint.
    Trace {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Train => "train",
            Command::Compare => "compare",
            Command::Sweep => "sweep",
            Command::Fork => "fork",
            Command::Overfit => "overfit",
            Command::Llc { .. } => "llc",
            Command::Trace { .. } => "trace",
        }
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.into(),
            source: e,
        })?;
    }
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write(path, &serde_json::to_string_pretty(value)?)
}

fn write_records(dir: &Path, stem: &str, records: &[MetricsRecord], format: OutputFormat) -> Result<()> {
    match format {
        OutputFormat::Csv => write(&dir.join(format!("{stem}.csv")), &records_to_csv(records)?),
        OutputFormat::Json => write_json(&dir.join(format!("{stem}.json")), &records),
    }
}

fn load_model(file: &ExperimentFile, data: &degen::harness::PreparedData, checkpoint: Option<&Path>) -> Result<MlpModel> {
    let init = Trainer::new(
        &degen::harness::RunConfig {
            epochs: 0,
            ..file.run.clone()
        },
        data,
    )?;
    let model = init.model().clone();
    match checkpoint {
        None => Ok(model),
        Some(p) => {
            let bytes = fs::read(p).map_err(|e| Error::Io {
                path: p.into(),
                source: e,
            })?;
            model.with_params(ParamVector::from_le_bytes(&bytes)?)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config <path> is required".into()))?;
    let mut file = ExperimentFile::load(config)?;
    if let Some(seed) = cli.seed {
        file.run.seed = seed;
    }
    let name = cli.command.name();
    let out = cli.out_dir.clone().unwrap_or_else(|| Path::new("runs").join(name));
    let data = file.run.data.load()?;
    let started = Instant::now();
    let manifest = |wall: f64| RunManifest::new(name, file.run.seed, &file, wall);

    match &cli.command {
        Command::Train => {
            let output = match run_training(&file.run, &data) {
                Ok(o) => o,
                Err(Error::RunAborted { epoch, source, partial }) => {
                    // Keep what was recorded up to the failure.
                    let m = manifest(started.elapsed().as_secs_f64())?;
                    write_run_dir(&out, &partial, &m, cli.format)?;
                    return Err(Error::RunAborted { epoch, source, partial });
                }
                Err(e) => return Err(e),
            };
            write_run_dir(&out, &output, &manifest(started.elapsed().as_secs_f64())?, cli.format)?;
            if let Some(last) = output.final_record() {
                println!(
                    "epoch {} train_loss {} val_loss {} lambda_hat {}",
                    last.epoch,
                    last.train_loss,
                    last.val_loss,
                    last.lambda_hat.map_or("-".into(), |v| v.to_string())
                );
            }
        }
        Command::Compare => {
            let report = experiment_compare(&file.compare_spec()?, &data)?;
            for run in &report.runs {
                write_records(
                    &out.join("runs").join(run.label.replace('/', "_")),
                    &format!("seed-{}", run.seed),
                    &run.records,
                    cli.format,
                )?;
            }
            for row in &report.rows {
                println!(
                    "{}: lambda_hat NGD {} vs SGD {} (t {}, p {})",
                    row.architecture, row.lambda_test.mean_a, row.lambda_test.mean_b, row.lambda_test.t, row.lambda_test.p_value
                );
            }
            write_json(&out.join("report.json"), &report)?;
        }
        Command::Sweep => {
            let report = experiment_smoothing_sweep(&file.sweep_spec()?, &data)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["parameter", "value", "seed", "lambda_hat", "lambda_se", "hessian_trace", "kappa_mean"])?;
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            for p in &report.points {
                w.write_record([
                    p.parameter.clone(),
                    p.value.to_string(),
                    p.seed.to_string(),
                    p.lambda_hat.to_string(),
                    opt(p.lambda_se),
                    opt(p.hessian_trace),
                    opt(p.kappa_mean),
                ])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
            write(&out.join("sweep.csv"), &String::from_utf8_lossy(&bytes))?;
            write_json(&out.join("report.json"), &report)?;
        }
        Command::Fork => {
            let report = experiment_fork(&file.fork_spec()?, &data)?;
            write_records(&out, "pretrain", &report.pretrain, cli.format)?;
            write_records(&out, "branch_a", &report.branch_a, cli.format)?;
            write_records(&out, "branch_b", &report.branch_b, cli.format)?;
            let slope = |s: &Option<degen::harness::stats::LinearFit>| s.as_ref().map_or("-".into(), |f| f.slope.to_string());
            println!(
                "fork at epoch {}; lambda_hat slope A {} B {}",
                report.fork_epoch,
                slope(&report.slope_a),
                slope(&report.slope_b)
            );
            write_json(&out.join("report.json"), &report)?;
        }
        Command::Overfit => {
            let report = experiment_overfit(&file.run, &data)?;
            write_records(&out, "metrics", &report.records, cli.format)?;
            println!(
                "validation minimum at epoch {}; overfitting {}",
                report.val_min_epoch, report.overfit_onset
            );
            write_json(&out.join("report.json"), &report)?;
        }
        Command::Llc { checkpoint } => {
            let model = load_model(&file, &data, checkpoint.as_deref())?;
            let est = estimate_llc(&model, &data.train, &file.run.metrics.sgld)?;
            println!("lambda_hat {} +- {}", est.lambda_hat, est.std_error);
            write_json(&out.join("llc.json"), &est)?;
        }
        Command::Trace { checkpoint } => {
            let model = load_model(&file, &data, checkpoint.as_deref())?;
            let k = file.run.metrics.metric_batch_size.min(data.train.len());
            let batch = data.train.gather(&(0..k).collect::<Vec<_>>())?;
            let est = hutchinson_trace(&model, &batch, &file.run.metrics.hutchinson)?;
            println!("trace {} +- {}", est.mean, est.standard_error);
            write_json(&out.join("trace.json"), &est)?;
        }
    }
    if !matches!(cli.command, Command::Train) {
        write_json(&out.join("manifest.json"), &manifest(started.elapsed().as_secs_f64())?)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

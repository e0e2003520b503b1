use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::training::{MetricsRecord, RunOutput};
use crate::{Error, ParamVector, Result};

pub const CSV_HEADER: [&str; 10] = [
    "epoch",
    "train_loss",
    "val_loss",
    "update_norm",
    "lambda_hat",
    "lambda_se",
    "wbic",
    "hessian_trace",
    "hessian_se",
    "kappa_mean",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::config(format!("unknown format {other:?}; expected csv or json"))),
        }
    }
}

// Display for f64 is the shortest string that parses back to the same value.
fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes records under [`CSV_HEADER`]; absent values are empty cells.
pub fn write_records_csv<W: Write>(records: &[MetricsRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.val_loss.to_string(),
            r.update_norm.to_string(),
            cell(r.lambda_hat),
            cell(r.lambda_se),
            cell(r.wbic),
            cell(r.hessian_trace),
            cell(r.hessian_se),
            cell(r.kappa_mean),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn records_to_csv(records: &[MetricsRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_records_csv(records, &mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(e.to_string()))
}

fn parse_cell(s: &str, line: usize, column: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| Error::Format(format!("line {line}: {column} = {s:?} is not a number")))
}

fn required(v: Option<f64>, line: usize, column: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Format(format!("line {line}: {column} is empty")))
}

/// Inverse of [`write_records_csv`].
pub fn parse_records_csv<R: Read>(input: R) -> Result<Vec<MetricsRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Format(format!("unexpected CSV header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        let line = i + 2;
        let f = |k: usize| parse_cell(&row[k], line, CSV_HEADER[k]);
        let epoch = row[0]
            .parse()
            .map_err(|_| Error::Format(format!("line {line}: epoch = {:?} is not an integer", &row[0])))?;
        out.push(MetricsRecord {
            epoch,
            train_loss: required(f(1)?, line, CSV_HEADER[1])?,
            val_loss: required(f(2)?, line, CSV_HEADER[2])?,
            update_norm: required(f(3)?, line, CSV_HEADER[3])?,
            lambda_hat: f(4)?,
            lambda_se: f(5)?,
            wbic: f(6)?,
            hessian_trace: f(7)?,
            hessian_se: f(8)?,
            kappa_mean: f(9)?,
        });
    }
    Ok(out)
}

/// Provenance written next to every run's metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Crate version plus `git describe` output when built from a checkout.
    pub version: String,
    pub seed: u64,
    pub wall_time_secs: f64,
    pub config: serde_json::Value,
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, seed: u64, config: &C, wall_time_secs: f64) -> Result<Self> {
        Ok(RunManifest {
            command: command.into(),
            version: version_string(),
            seed,
            wall_time_secs,
            config: serde_json::to_value(config)?,
        })
    }
}

pub fn version_string() -> String {
    let base = env!("CARGO_PKG_VERSION");
    match option_env!("DEGEN_GIT_DESCRIBE") {
        Some(g) if !g.is_empty() => format!("{base}+{g}"),
        _ => base.to_string(),
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Raw little-endian `f64` parameters.
pub fn write_checkpoint(path: impl AsRef<Path>, params: &ParamVector) -> Result<()> {
    write_file(path.as_ref(), &params.to_le_bytes())
}

/// Writes `metrics.csv` (or `metrics.json`), `manifest.json`, one
/// checkpoint per metric epoch under `checkpoints/`, and `final.bin`.
pub fn write_run_dir(dir: impl AsRef<Path>, output: &RunOutput, manifest: &RunManifest, format: OutputFormat) -> Result<()> {
    let dir = dir.as_ref();
    let ckpt_dir = dir.join("checkpoints");
    fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
    match format {
        OutputFormat::Csv => write_file(&dir.join("metrics.csv"), records_to_csv(&output.records)?.as_bytes())?,
        OutputFormat::Json => write_file(
            &dir.join("metrics.json"),
            serde_json::to_string_pretty(&output.records)?.as_bytes(),
        )?,
    }
    write_file(&dir.join("manifest.json"), serde_json::to_string_pretty(manifest)?.as_bytes())?;
    for c in &output.checkpoints {
        write_checkpoint(ckpt_dir.join(format!("epoch-{:04}.bin", c.epoch)), &c.params)?;
    }
    write_checkpoint(dir.join("final.bin"), &output.final_params)
}

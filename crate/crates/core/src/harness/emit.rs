//! Flat CSV/JSON reports: scenario parameters first, then metrics.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ScenarioConfig;
use super::metrics::{histogram_text, MetricsReport};
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Destination {
    Stdout,
    Path(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub validator_count: usize,
    pub balance_model: String,
    pub attacker_stake_fraction: f64,
    pub protocol: String,
    pub sss_threshold_n: usize,
    pub participation_rate: f64,
    pub epochs: u64,
    pub rng_seed: u64,
    pub strategy_cap: usize,
    pub attacker_slots: String,
    pub fallback_reuse_seed: bool,
    pub trials: u64,
    pub seeded_epochs: u64,
    pub mean_attacker_slots: f64,
    pub fair_share: f64,
    pub bias_gain: f64,
    pub std_error: f64,
    pub recovery_failure_rate: f64,
    pub case_prevented: u64,
    pub case_broken: u64,
    pub case_collusion: u64,
    pub strategy_histogram: String,
    pub mean_decision_slots: f64,
    pub mean_t: f64,
    pub capped_epochs: u64,
}

impl Row {
    pub const HEADER: [&'static str; 25] = [
        "validator_count",
        "balance_model",
        "attacker_stake_fraction",
        "protocol",
        "sss_threshold_n",
        "participation_rate",
        "epochs",
        "rng_seed",
        "strategy_cap",
        "attacker_slots",
        "fallback_reuse_seed",
        "trials",
        "seeded_epochs",
        "mean_attacker_slots",
        "fair_share",
        "bias_gain",
        "std_error",
        "recovery_failure_rate",
        "case_prevented",
        "case_broken",
        "case_collusion",
        "strategy_histogram",
        "mean_decision_slots",
        "mean_t",
        "capped_epochs",
    ];

    pub fn new(cfg: &ScenarioConfig, m: &MetricsReport) -> Self {
        Self {
            validator_count: cfg.validator_count,
            balance_model: cfg.balance_model.to_string(),
            attacker_stake_fraction: cfg.attacker_stake_fraction,
            protocol: cfg.protocol.to_string(),
            sss_threshold_n: cfg.sss_threshold_n,
            participation_rate: cfg.participation_rate,
            epochs: cfg.epochs,
            rng_seed: cfg.rng_seed,
            strategy_cap: cfg.strategy_cap,
            attacker_slots: cfg
                .attacker_slots
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(";"),
            fallback_reuse_seed: cfg.fallback_reuse_seed,
            trials: m.trials,
            seeded_epochs: m.seeded_epochs,
            mean_attacker_slots: m.mean_attacker_slots,
            fair_share: m.fair_share,
            bias_gain: m.bias_gain,
            std_error: m.std_error,
            recovery_failure_rate: m.recovery_failure_rate,
            case_prevented: m.case_prevented,
            case_broken: m.case_broken,
            case_collusion: m.case_collusion,
            strategy_histogram: histogram_text(&m.strategy_histogram),
            mean_decision_slots: m.mean_decision_slots,
            mean_t: m.mean_t,
            capped_epochs: m.capped_epochs,
        }
    }
}

/// Serializes `rows` to `out`. Floats use the shortest round-trip decimal.
pub fn write_rows<W: Write>(rows: &[Row], format: Format, out: W) -> Result<(), String> {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new()
                .has_headers(false)
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(out);
            w.write_record(Row::HEADER).map_err(|e| e.to_string())?;
            for row in rows {
                w.serialize(row).map_err(|e| e.to_string())?;
            }
            w.flush().map_err(|e| e.to_string())
        }
        Format::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, rows).map_err(|e| e.to_string())?;
            out.write_all(b"\n").map_err(|e| e.to_string())?;
            out.flush().map_err(|e| e.to_string())
        }
    }
}

pub fn emit(
    reports: &[(ScenarioConfig, MetricsReport)],
    format: Format,
    destination: &Destination,
) -> Result<(), HarnessError> {
    let rows: Vec<Row> = reports.iter().map(|(c, m)| Row::new(c, m)).collect();
    match destination {
        Destination::Stdout => write_rows(&rows, format, io::stdout().lock()).map_err(|e| {
            HarnessError::Io {
                path: PathBuf::from("<stdout>"),
                source: io::Error::other(e),
            }
        }),
        Destination::Path(path) => {
            let io_err = |source: io::Error| HarnessError::Io {
                path: path.clone(),
                source,
            };
            let file = File::create(path).map_err(io_err)?;
            write_rows(&rows, format, BufWriter::new(file)).map_err(|e| io_err(io::Error::other(e)))
        }
    }
}

impl Destination {
    pub fn from_option(path: Option<&Path>) -> Self {
        path.map_or(Destination::Stdout, |p| Destination::Path(p.to_path_buf()))
    }
}

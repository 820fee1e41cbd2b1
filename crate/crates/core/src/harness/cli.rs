use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::config::{ConfigFile, Protocol, ScenarioConfig};
use super::emit::{emit, write_rows, Destination, Format, Row};
use super::metrics::MetricsReport;
use super::trial::TrialSetup;
use super::{run, sweep, with_threads, HarnessError};
use crate::adversary::{
    enumerate_strategies, evaluate_strategy, best_strategy_over, tail_decision_slots,
};
use crate::randao::{EpochState, SLOTS_PER_EPOCH};

#[derive(Debug, Parser)]
#[command(name = "randao-lab", version, about = "RANDAO bias and Shamir-shared RANDAO simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario and write its metrics report.
    Simulate(SimulateArgs),
    /// Run every cell of the config file's [grid] section.
    Sweep(SweepArgs),
    /// Trace a single attacked epoch: the 2^h withhold strategies and the argmax.
    AttackDemo(DemoArgs),
}

#[derive(Debug, Args)]
struct ScenarioOverrides {
    /// Scenario file (TOML); flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    validators: Option<usize>,
    /// Attacker stake fraction.
    #[arg(long)]
    stake: Option<f64>,
    #[arg(long)]
    strategy_cap: Option<usize>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    scenario: ScenarioOverrides,
    #[arg(long, value_parser = ["classic", "sss"])]
    protocol: Option<String>,
    #[arg(long)]
    epochs: Option<u64>,
    /// Shamir threshold n.
    #[arg(long)]
    threshold: Option<usize>,
    /// Honest reveal-phase participation probability.
    #[arg(long)]
    participation: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Worker threads (default: one per core).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct DemoArgs {
    #[command(flatten)]
    scenario: ScenarioOverrides,
    /// Skip trials until the attacker holds at least this many tail slots.
    #[arg(long, default_value_t = 1)]
    min_h: usize,
}

const DEMO_SEARCH_LIMIT: u64 = 100_000;

fn base_scenario(o: &ScenarioOverrides) -> Result<ScenarioConfig, HarnessError> {
    let mut cfg = match &o.config {
        Some(path) => ConfigFile::load(path)?.scenario,
        None => ScenarioConfig::default(),
    };
    if let Some(v) = o.seed {
        cfg.rng_seed = v;
    }
    if let Some(v) = o.validators {
        cfg.validator_count = v;
    }
    if let Some(v) = o.stake {
        cfg.attacker_stake_fraction = v;
    }
    if let Some(v) = o.strategy_cap {
        cfg.strategy_cap = v;
    }
    Ok(cfg)
}

fn write_reports(
    reports: &[(ScenarioConfig, MetricsReport)],
    format: Format,
    out_path: Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<(), HarnessError> {
    match out_path {
        Some(p) => emit(reports, format, &Destination::Path(p)),
        None => {
            let rows: Vec<Row> = reports.iter().map(|(c, m)| Row::new(c, m)).collect();
            write_rows(&rows, format, out).map_err(HarnessError::Encode)
        }
    }
}

fn simulate(args: SimulateArgs, out: &mut dyn Write) -> Result<(), HarnessError> {
    let mut cfg = base_scenario(&args.scenario)?;
    if let Some(p) = &args.protocol {
        cfg.protocol = p.parse::<Protocol>()?;
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.threshold {
        cfg.sss_threshold_n = v;
    }
    if let Some(v) = args.participation {
        cfg.participation_rate = v;
    }
    cfg.validate()?;
    let report = with_threads(args.threads, || run(&cfg))??;
    write_reports(&[(cfg, report)], args.format, args.out, out)
}

fn run_sweep(args: SweepArgs, out: &mut dyn Write) -> Result<(), HarnessError> {
    let file = ConfigFile::load(&args.config)?;
    let grid = file.grid.ok_or_else(|| {
        HarnessError::Config(format!("{} has no [grid] section", args.config.display()))
    })?;
    file.scenario.validate()?;
    let reports = with_threads(args.threads, || sweep(&file.scenario, &grid))??;
    write_reports(&reports, args.format, args.out, out)
}

fn attack_demo(args: DemoArgs, out: &mut dyn Write) -> Result<(), HarnessError> {
    let cfg = base_scenario(&args.scenario)?;
    cfg.validate()?;
    let io = |e: std::io::Error| HarnessError::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    };
    let (setup, tail) = (0..DEMO_SEARCH_LIMIT)
        .map(|i| -> Result<_, HarnessError> {
            let setup = TrialSetup::new(&cfg, i)?;
            let tail = tail_decision_slots(&EpochState::new(setup.epoch, setup.proposers), &setup.attacker);
            Ok((setup, tail))
        })
        .find(|r| r.as_ref().map_or(true, |(_, tail)| tail.len() >= args.min_h))
        .ok_or_else(|| {
            HarnessError::Config(format!(
                "no trial in the first {DEMO_SEARCH_LIMIT} has {} attacker tail slots",
                args.min_h
            ))
        })??;

    let h = tail.len();
    let attacker = &setup.attacker;
    writeln!(
        out,
        "rng_seed {} trial {}: epoch {} with {} validators, attacker stake {} ({} validators)",
        cfg.rng_seed,
        setup.index,
        setup.epoch,
        setup.registry.len(),
        attacker.stake_fraction(),
        attacker.controlled().len()
    )
    .map_err(io)?;
    let held: Vec<String> = (0..SLOTS_PER_EPOCH)
        .map(|s| {
            let v = setup.proposers[s];
            if attacker.controls(v) {
                format!("{s}:{v}*")
            } else {
                format!("{s}:{v}")
            }
        })
        .collect();
    writeln!(out, "epoch {} proposers (slot:validator, * = attacker):", setup.epoch).map_err(io)?;
    for chunk in held.chunks(8) {
        writeln!(out, "  {}", chunk.join("  ")).map_err(io)?;
    }
    writeln!(
        out,
        "tail decision slots {:?}: h = {h}, 2^h = {} strategies",
        tail,
        1u64 << h
    )
    .map_err(io)?;
    let strategies = enumerate_strategies(h, cfg.strategy_cap)?;
    let epoch = setup.classic_epoch(&tail)?;
    writeln!(out, "  mask  withheld slots  attacker slots in epoch {}", setup.epoch + 2).map_err(io)?;
    for s in &strategies {
        let payoff = evaluate_strategy(&epoch, &tail, s, attacker, &setup.registry)?;
        let withheld: Vec<usize> = (0..h).filter(|&i| s.withholds(i)).map(|i| tail[i]).collect();
        writeln!(out, "  {:<5} {:<15} {payoff}", if h == 0 { "-".into() } else { s.bits() }, format!("{withheld:?}")).map_err(io)?;
    }
    let best = best_strategy_over(&epoch, &tail, attacker, &setup.registry, cfg.strategy_cap)?;
    let withheld: Vec<usize> = (0..h).filter(|&i| best.chosen.withholds(i)).map(|i| tail[i]).collect();
    writeln!(
        out,
        "argmax: mask {} withholds {:?} -> {} attacker slots (honest {}, fair share {})",
        if h == 0 { "-".into() } else { best.chosen.bits() },
        withheld,
        best.payoff,
        best.honest_payoff,
        SLOTS_PER_EPOCH as f64 * attacker.stake_fraction()
    )
    .map_err(io)?;
    Ok(())
}

/// Entry point behind the binary. Returns the process exit code.
pub fn cli_main<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a, out),
        Command::Sweep(a) => run_sweep(a, out),
        Command::AttackDemo(a) => attack_demo(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

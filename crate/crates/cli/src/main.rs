use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ris_ee::experiment::{
    cmd_oracle, cmd_run, cmd_sweep, exit_code, load_config_with, parse_config_with, write_csv_file, Axis, OracleMode,
    SweepSpec,
};
use ris_ee::{Method, SystemConfig};

/// Energy-efficiency experiments for 1-bit RIS-assisted multi-user downlinks.
#[derive(Parser)]
#[command(name = "ris-ee-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One scenario with the full AO trace.
    Run {
        #[command(flatten)]
        scenario: Scenario,
        #[arg(long, default_value = "gradient")]
        method: Method,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Monte Carlo sweep over the transmit budget in dBW.
    SweepPower(Sweep),
    /// Monte Carlo sweep over square RIS sizes (16, 25, ... or 4x4, 5x5, ...).
    SweepElements(Sweep),
    /// Exhaustive search over every RIS configuration.
    Oracle {
        #[command(flatten)]
        scenario: Scenario,
        #[arg(long, value_enum, default_value = "ee")]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Scenario {
    /// JSON config; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides a config key, e.g. `--set k=2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = parse_override)]
    overrides: Vec<(String, String)>,
    /// Record wall-clock runtime in `runtime_ms` (breaks byte-determinism).
    #[arg(long)]
    timing: bool,
}

impl Scenario {
    fn load(&self) -> ris_ee::Result<SystemConfig> {
        match &self.config {
            Some(path) => load_config_with(path, &self.overrides),
            None => parse_config_with("", &self.overrides),
        }
    }
}

#[derive(Args)]
struct Sweep {
    #[command(flatten)]
    scenario: Scenario,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
    values: Vec<String>,
    /// Number of seeds; runs seeds `first-seed .. first-seed + seeds`.
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 0)]
    first_seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "gradient,sdp,random,all_off,successive")]
    methods: Vec<Method>,
    #[arg(long)]
    out: PathBuf,
    /// Keep seeds already complete in `--out` and run only the rest.
    #[arg(long)]
    resume: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    G,
    Ee,
}

fn parse_override(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() => Ok((k.trim().to_string(), v.trim().to_string())),
        _ => Err(format!("expected KEY=VALUE, got {s:?}")),
    }
}

fn parse_value(axis: Axis, s: &str) -> anyhow::Result<f64> {
    let s = s.trim();
    if axis == Axis::RisElements {
        if let Some((a, b)) = s.split_once(['x', 'X']) {
            let (a, b): (usize, usize) = (a.trim().parse()?, b.trim().parse()?);
            if a != b {
                bail!("RIS layout {s} is not square");
            }
            return Ok((a * b) as f64);
        }
    }
    s.parse().with_context(|| format!("bad axis value {s:?}"))
}

fn sweep(axis: Axis, args: &Sweep) -> anyhow::Result<()> {
    let values = args.values.iter().map(|v| parse_value(axis, v)).collect::<anyhow::Result<Vec<_>>>().map_err(usage)?;
    let spec = SweepSpec {
        axis,
        values,
        methods: args.methods.clone(),
        seeds: (args.first_seed..args.first_seed + args.seeds).collect(),
        base: args.scenario.load()?,
        timing: args.scenario.timing,
    };
    let summary = cmd_sweep(&spec, &args.out, args.resume)?;
    eprintln!(
        "{} seeds run, {} resumed, {} failed cells -> {}",
        summary.seeds_run,
        summary.seeds_skipped,
        summary.failed_cells,
        args.out.display()
    );
    Ok(())
}

fn usage(e: anyhow::Error) -> anyhow::Error {
    ris_ee::Error::InvalidConfig(format!("{e:#}")).into()
}

fn write_rows(out: &Path, rows: &[ris_ee::experiment::ResultRow]) -> anyhow::Result<()> {
    write_csv_file(out, rows)?;
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { scenario, method, seed, out } => {
            let cfg = scenario.load()?;
            let (outcome, rows) = cmd_run(&cfg, method, seed, scenario.timing)?;
            write_rows(&out, &rows)?;
            eprintln!(
                "{method}: EE {:.6e} bits/J, SE {:.4} bps/Hz, {} iterations",
                outcome.report.ee, outcome.report.se, outcome.iterations
            );
        }
        Command::SweepPower(args) => sweep(Axis::PmaxDbw, &args)?,
        Command::SweepElements(args) => sweep(Axis::RisElements, &args)?,
        Command::Oracle { scenario, mode, seed, out } => {
            let cfg = scenario.load()?;
            let mode = match mode {
                Mode::G => OracleMode::G,
                Mode::Ee => OracleMode::Ee,
            };
            let row = cmd_oracle(&cfg, seed, mode, scenario.timing)?;
            write_rows(&out, std::slice::from_ref(&row))?;
            eprintln!("{}: EE {:.6e} bits/J", row.method, row.ee);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<ris_ee::Error>().map_or(1, exit_code);
            ExitCode::from(code as u8)
        }
    }
}

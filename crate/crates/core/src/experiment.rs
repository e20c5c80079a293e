//! Scenario configs, single runs, sweeps and oracle runs with CSV output.
//!
//! Every CSV starts with the schema line [`CSV_VERSION_LINE`] followed by a
//! header row. Rows are written in canonical order so identical inputs give
//! identical bytes.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ao::{run_ao, AoOptions, AoOutcome, Method};
use crate::baselines::{brute_force_ee, brute_force_g};
use crate::channel::draw_channel;
use crate::error::{Error, Result};
use crate::gradient::objective_g;
use crate::model::{effective_channel, metrics, t_coefficients, RisConfig, SystemConfig};
use crate::power::{dinkelbach, AllocProblem};

pub const CSV_VERSION_LINE: &str = "# ris-ee-lab v1";
pub const THREADS_ENV: &str = "RIS_EE_THREADS";

/// Parses a JSON scenario. Blank input yields the default scenario; unknown
/// keys are rejected.
pub fn parse_config(text: &str) -> Result<SystemConfig> {
    parse_config_with(text, &[])
}

/// [`parse_config`] with `key=value` overrides applied on top of the file.
/// Values are read as JSON, so `k=2` and `pmax_w=3.5` both work.
pub fn parse_config_with(text: &str, overrides: &[(String, String)]) -> Result<SystemConfig> {
    let mut obj = if text.trim().is_empty() {
        serde_json::Map::new()
    } else {
        match serde_json::from_str::<serde_json::Value>(text) {
            Ok(serde_json::Value::Object(m)) => m,
            Ok(_) => return Err(Error::Parse("config must be a JSON object".into())),
            Err(e) => return Err(Error::Parse(format!("line {}, column {}: {e}", e.line(), e.column()))),
        }
    };
    for (key, raw) in overrides {
        let value = serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.clone()));
        obj.insert(key.clone(), value);
    }
    let cfg: SystemConfig = serde_json::from_value(serde_json::Value::Object(obj)).map_err(|e| Error::Parse(e.to_string()))?;
    cfg.validated()
}

pub fn load_config(path: &Path) -> Result<SystemConfig> {
    load_config_with(path, &[])
}

pub fn load_config_with(path: &Path, overrides: &[(String, String)]) -> Result<SystemConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config_with(&text, overrides)
}

/// One CSV record. `stage` is `power` or `ris` for trace rows and `final`
/// for the summary row of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub seed: u64,
    pub axis_value: f64,
    pub method: String,
    pub ao_iteration: usize,
    pub stage: String,
    pub se: f64,
    pub ee: f64,
    pub tx_power_w: f64,
    pub on_count: usize,
    pub runtime_ms: f64,
    pub feasible: bool,
}

pub const STAGE_FINAL: &str = "final";

fn stage_rank(stage: &str) -> u8 {
    match stage {
        "power" => 0,
        "ris" => 1,
        _ => 2,
    }
}

/// Canonical row order: seed, axis value, method, iteration, stage.
pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.seed
            .cmp(&b.seed)
            .then(a.axis_value.total_cmp(&b.axis_value))
            .then(a.method.cmp(&b.method))
            .then(a.ao_iteration.cmp(&b.ao_iteration))
            .then(stage_rank(&a.stage).cmp(&stage_rank(&b.stage)))
    });
}

/// Trace rows followed by the final row of one AO run.
pub fn outcome_rows(seed: u64, axis_value: f64, method: &str, out: &AoOutcome, runtime_ms: f64) -> Vec<ResultRow> {
    let mut rows: Vec<ResultRow> = out
        .report
        .trace
        .iter()
        .map(|tp| ResultRow {
            seed,
            axis_value,
            method: method.to_string(),
            ao_iteration: tp.iteration,
            stage: tp.stage.as_str().to_string(),
            se: tp.se,
            ee: tp.ee,
            tx_power_w: tp.tx_power,
            on_count: tp.on_count,
            runtime_ms: 0.0,
            feasible: true,
        })
        .collect();
    rows.push(ResultRow {
        seed,
        axis_value,
        method: method.to_string(),
        ao_iteration: out.iterations,
        stage: STAGE_FINAL.to_string(),
        se: out.report.se,
        ee: out.report.ee,
        tx_power_w: out.report.tx_power,
        on_count: out.report.on_count,
        runtime_ms,
        feasible: out.report.feasible,
    });
    rows
}

/// Placeholder final row for a cell whose run failed.
pub fn failure_row(seed: u64, axis_value: f64, method: &str) -> ResultRow {
    ResultRow {
        seed,
        axis_value,
        method: method.to_string(),
        ao_iteration: 0,
        stage: STAGE_FINAL.to_string(),
        se: 0.0,
        ee: 0.0,
        tx_power_w: 0.0,
        on_count: 0,
        runtime_ms: 0.0,
        feasible: false,
    }
}

/// Appends rows (without header) to an open CSV stream.
fn append_rows<W: Write>(out: W, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_header<W: Write>(mut out: W) -> Result<()> {
    writeln!(out, "{CSV_VERSION_LINE}")?;
    writeln!(out, "seed,axis_value,method,ao_iteration,stage,se,ee,tx_power_w,on_count,runtime_ms,feasible")?;
    Ok(())
}

/// Writes a complete CSV document.
pub fn write_csv<W: Write>(mut out: W, rows: &[ResultRow]) -> Result<()> {
    write_header(&mut out)?;
    append_rows(out, rows)
}

pub fn write_csv_file(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut f = File::create(path)?;
    write_csv(&mut f, rows)?;
    f.sync_all()?;
    Ok(())
}

/// Reads a CSV written by this module, checking the schema line.
pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    if first.trim_end() != CSV_VERSION_LINE {
        return Err(Error::Parse(format!("{}: missing schema line {CSV_VERSION_LINE:?}", path.display())));
    }
    let mut rdr = csv::Reader::from_reader(reader);
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

fn elapsed_ms(start: Instant, timing: bool) -> f64 {
    if timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    }
}

pub fn watts_to_dbw(w: f64) -> f64 {
    10.0 * w.log10()
}

pub fn dbw_to_watts(dbw: f64) -> f64 {
    10f64.powf(dbw / 10.0)
}

/// Runs one scenario: channel `seed`, AO with `method`. The axis value of the
/// rows is `Pmax` in dBW.
pub fn cmd_run(cfg: &SystemConfig, method: Method, seed: u64, timing: bool) -> Result<(AoOutcome, Vec<ResultRow>)> {
    cfg.validate()?;
    let start = Instant::now();
    let chan = draw_channel(cfg, seed);
    let out = run_ao(cfg, &chan, &AoOptions::new(method, seed))?;
    let rows = outcome_rows(seed, watts_to_dbw(cfg.pmax_w), method.as_str(), &out, elapsed_ms(start, timing));
    Ok((out, rows))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Transmit budget in dBW.
    PmaxDbw,
    /// RIS element count; each value is a perfect square `n` laid out as `√n × √n`.
    RisElements,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: Axis,
    pub values: Vec<f64>,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    pub base: SystemConfig,
    pub timing: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() || self.methods.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidConfig("sweep needs at least one value, method and seed".into()));
        }
        for &v in &self.values {
            self.config_at(v)?;
        }
        Ok(())
    }

    /// Scenario at one axis value.
    pub fn config_at(&self, value: f64) -> Result<SystemConfig> {
        let mut cfg = self.base.clone();
        match self.axis {
            Axis::PmaxDbw => {
                if !value.is_finite() {
                    return Err(Error::InvalidConfig(format!("bad power value {value}")));
                }
                cfg.pmax_w = dbw_to_watts(value);
            }
            Axis::RisElements => {
                let side = value.sqrt().round() as usize;
                if value < 1.0 || (side * side) as f64 != value {
                    return Err(Error::InvalidConfig(format!("element count {value} is not a perfect square")));
                }
                cfg.n1 = side;
                cfg.n2 = side;
            }
        }
        cfg.validated()
    }

    fn cells(&self) -> Vec<(f64, Method)> {
        self.values.iter().flat_map(|&v| self.methods.iter().map(move |&m| (v, m))).collect()
    }

    /// All rows of one seed, canonically ordered.
    pub fn seed_rows(&self, seed: u64) -> Vec<ResultRow> {
        let mut rows: Vec<ResultRow> = self
            .cells()
            .into_par_iter()
            .flat_map_iter(|(value, method)| {
                let start = Instant::now();
                let run = self.config_at(value).and_then(|cfg| {
                    let chan = draw_channel(&cfg, seed);
                    run_ao(&cfg, &chan, &AoOptions::new(method, seed))
                });
                match run {
                    Ok(out) => outcome_rows(seed, value, method.as_str(), &out, elapsed_ms(start, self.timing)),
                    Err(_) => vec![failure_row(seed, value, method.as_str())],
                }
            })
            .collect();
        sort_rows(&mut rows);
        rows
    }
}

/// Worker pool capped by `RIS_EE_THREADS` when set.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::InvalidConfig(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Io(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepSummary {
    pub seeds_run: usize,
    pub seeds_skipped: usize,
    pub failed_cells: usize,
}

/// Seeds whose every cell already has a final row in `rows`.
fn complete_seeds(spec: &SweepSpec, rows: &[ResultRow]) -> BTreeSet<u64> {
    let wanted = spec.cells().len();
    spec.seeds
        .iter()
        .copied()
        .filter(|&s| rows.iter().filter(|r| r.seed == s && r.stage == STAGE_FINAL).count() == wanted)
        .collect()
}

/// Runs the sweep seed by seed, appending and flushing each seed's rows.
///
/// With `resume`, seeds already complete in an existing `out` file are kept
/// and skipped; partial seed blocks are dropped and recomputed.
pub fn cmd_sweep(spec: &SweepSpec, out: &Path, resume: bool) -> Result<SweepSummary> {
    spec.validate()?;
    let mut seeds: Vec<u64> = spec.seeds.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let mut kept = Vec::new();
    if resume && out.exists() {
        let existing = read_csv(out)?;
        let done = complete_seeds(spec, &existing);
        kept = existing.into_iter().filter(|r| done.contains(&r.seed)).collect();
    }
    let done: BTreeSet<u64> = kept.iter().map(|r| r.seed).collect();
    write_csv_file(out, &kept)?;

    let pool = worker_pool()?;
    let mut summary = SweepSummary { seeds_run: 0, seeds_skipped: done.len(), failed_cells: 0 };
    for seed in seeds.into_iter().filter(|s| !done.contains(s)) {
        let rows = pool.install(|| spec.seed_rows(seed));
        summary.failed_cells += rows.iter().filter(|r| r.stage == STAGE_FINAL && !r.feasible).count();
        let mut f = OpenOptions::new().append(true).open(out)?;
        append_rows(&mut f, &rows)?;
        f.sync_all()?;
        summary.seeds_run += 1;
    }
    Ok(summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    /// Minimize `g` with the powers that are optimal for the all-OFF RIS.
    G,
    /// Maximize EE jointly over `q` and the powers.
    Ee,
}

impl OracleMode {
    pub fn as_str(self) -> &'static str {
        match self {
            OracleMode::G => "oracle_g",
            OracleMode::Ee => "oracle_ee",
        }
    }
}

/// Exhaustive search on the channel of `seed`; one final row at the optimum.
pub fn cmd_oracle(cfg: &SystemConfig, seed: u64, mode: OracleMode, timing: bool) -> Result<ResultRow> {
    cfg.validate()?;
    let start = Instant::now();
    let chan = draw_channel(cfg, seed);
    let (q, p) = match mode {
        OracleMode::Ee => {
            let res = brute_force_ee(cfg, &chan)?;
            let alloc = res.allocation.ok_or(Error::AllInfeasible)?;
            (res.best_q, alloc.p)
        }
        OracleMode::G => {
            let n = cfg.n();
            if n > crate::baselines::G_ORACLE_CAP {
                return Err(Error::CapExceeded { n, cap: crate::baselines::G_ORACLE_CAP });
            }
            let off = RisConfig::all_off(n);
            let t = t_coefficients(&effective_channel(&chan, &off)?)?;
            let p = dinkelbach(&AllocProblem::from_config(cfg, t, 0)?)?.p;
            let res = brute_force_g(&chan, &p, cfg.p0_w, cfg.pmax_w)?;
            debug_assert_eq!(objective_g(&chan, &p, cfg.p0_w, &res.best_q), res.best_value);
            (res.best_q, p)
        }
    };
    let t = t_coefficients(&effective_channel(&chan, &q)?)?;
    let rep = metrics(cfg, &q, &p, &t);
    Ok(ResultRow {
        seed,
        axis_value: watts_to_dbw(cfg.pmax_w),
        method: mode.as_str().to_string(),
        ao_iteration: 0,
        stage: STAGE_FINAL.to_string(),
        se: rep.se,
        ee: rep.ee,
        tx_power_w: rep.tx_power,
        on_count: rep.on_count,
        runtime_ms: elapsed_ms(start, timing),
        feasible: rep.feasible,
    })
}

/// Process exit status for an error: 1 usage/config, 2 infeasible or cap,
/// 3 solver failure.
pub fn exit_code(err: &Error) -> i32 {
    match err.root() {
        Error::InvalidConfig(_) | Error::Parse(_) | Error::DimensionMismatch(_) | Error::Io(_) => 1,
        Error::SolverFailure(_) => 3,
        _ => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blank_config_is_default() {
        assert_eq!(parse_config("").unwrap(), SystemConfig::default());
        assert_eq!(parse_config("  \n").unwrap(), SystemConfig::default());
        assert_eq!(parse_config("{}").unwrap(), SystemConfig::default());
    }

    #[test]
    fn unknown_key_rejected() {
        let err = parse_config(r#"{"kk": 3}"#).unwrap_err();
        assert!(matches!(&err, Error::Parse(m) if m.contains("kk")), "{err}");
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_config("{\n  \"k\": ,\n}").unwrap_err();
        assert!(matches!(&err, Error::Parse(m) if m.starts_with("line 2")), "{err}");
    }

    #[test]
    fn overrides_beat_file() {
        let cfg = parse_config_with(r#"{"k": 2}"#, &[("k".into(), "3".into())]).unwrap();
        assert_eq!(cfg.k, 3);
        assert!(matches!(parse_config(r#"{"k": 32}"#), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        let rows = vec![failure_row(3, -2.5, "sdp"), failure_row(1, 0.1, "gradient")];
        write_csv_file(&path, &rows).unwrap();
        assert_eq!(read_csv(&path).unwrap(), rows);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# ris-ee-lab v1\nseed,axis_value,"));
    }

    #[test]
    fn canonical_order() {
        let mut rows = vec![failure_row(2, 0.0, "a"), failure_row(1, 5.0, "b"), failure_row(1, -5.0, "c")];
        sort_rows(&mut rows);
        let keys: Vec<(u64, f64)> = rows.iter().map(|r| (r.seed, r.axis_value)).collect();
        assert_eq!(keys, vec![(1, -5.0), (1, 5.0), (2, 0.0)]);
    }

    #[test]
    fn element_axis_needs_squares() {
        let spec = SweepSpec {
            axis: Axis::RisElements,
            values: vec![16.0, 20.0],
            methods: vec![Method::AllOff],
            seeds: vec![0],
            base: SystemConfig::default(),
            timing: false,
        };
        assert!(spec.config_at(16.0).is_ok());
        assert!(spec.validate().is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Parse("x".into())), 1);
        assert_eq!(exit_code(&Error::CapExceeded { n: 32, cap: 20 }), 2);
        let wrapped = Error::HalfStep { iteration: 1, stage: "ris", source: Box::new(Error::SolverFailure("x".into())) };
        assert_eq!(exit_code(&wrapped), 3);
    }
}

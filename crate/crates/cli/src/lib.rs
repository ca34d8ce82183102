//! Front end of the `percolab` binary: configuration, execution, CSV and
//! JSON output, and replay of recorded rows.

pub mod config;
pub mod experiments;

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use percolab_core::Runner;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use config::{Experiment, ExperimentConfig};
pub use experiments::{execute, ResultRow, RowOut};

/// Frozen CSV header.
pub const CSV_HEADER: &str =
    "experiment,model_digest,event_digest,param,r,n,p_hat,ci_low,ci_high,bias,unresolved_rate,master_seed,replicate_range,wall_time";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(percolab_core::Error),
    Io(String),
    Mismatch(Vec<usize>),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use percolab_core::Error as E;
        match self {
            CliError::Config(_) => EXIT_VALIDATION,
            CliError::Core(E::InvalidParameter(_) | E::DegenerateLaw(_) | E::Separation(_)) => EXIT_VALIDATION,
            CliError::Core(_) | CliError::Io(_) => EXIT_RUNTIME,
            CliError::Mismatch(_) => EXIT_MISMATCH,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Core(e) => e.code(),
            CliError::Io(_) => "io",
            CliError::Mismatch(_) => "replay-mismatch",
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "invalid config: {m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(m) => write!(f, "{m}"),
            CliError::Mismatch(rows) => write!(f, "replay mismatch in rows {rows:?}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<percolab_core::Error> for CliError {
    fn from(e: percolab_core::Error) -> Self {
        CliError::Core(e)
    }
}

fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Per-row replay record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowRecord {
    pub index: usize,
    pub experiment: String,
    #[serde(with = "extended_f64")]
    pub param: f64,
    #[serde(with = "extended_f64")]
    pub r: f64,
    pub replicate_range: String,
    pub outcome_digest: String,
}

/// JSON has no infinities: non-finite values travel as the strings
/// `"inf"`, `"-inf"` and `"NaN"`.
mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub config: Option<ExperimentConfig>,
    pub exit_code: i32,
    pub errors: Vec<Value>,
    pub totals: Value,
    pub throughput: Value,
    pub verdicts: Vec<Value>,
    #[serde(default)]
    pub oracle: Option<Value>,
    pub rows: Vec<RowRecord>,
}

/// Command-line overrides of `run`.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub oracle: bool,
    pub out: Option<PathBuf>,
}

pub const CSV_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";

fn load_config(path: &Path, opts: &RunOptions) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::from_json(&text)?;
    if let Some(s) = opts.seed {
        cfg.master_seed = s;
    }
    if let Some(t) = opts.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn write_csv(path: &Path, rows: &[RowOut]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    if rows.is_empty() {
        w.write_record(CSV_HEADER.split(',')).map_err(|e| io_err(path, e))?;
    }
    for r in rows {
        w.serialize(&r.row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn records(rows: &[RowOut]) -> Vec<RowRecord> {
    rows.iter()
        .enumerate()
        .map(|(index, r)| RowRecord {
            index,
            experiment: r.row.experiment.clone(),
            param: r.row.param,
            r: r.row.r,
            replicate_range: r.row.replicate_range.clone(),
            outcome_digest: r.digest(),
        })
        .collect()
}

fn error_entry(e: &CliError) -> Value {
    json!({ "code": e.code(), "message": e.to_string() })
}

fn write_summary(dir: &Path, s: &Summary) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(s).expect("serializable");
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
}

/// Executes the experiment in `config_path` and writes `results.csv` and
/// `summary.json` into the output directory. Returns the exit code; errors
/// are recorded in the summary as well.
pub fn run(config_path: &Path, opts: &RunOptions) -> i32 {
    let fallback = opts.out.clone().unwrap_or_else(|| PathBuf::from("percolab-out"));
    let cfg = match load_config(config_path, opts) {
        Ok(c) => c,
        Err(e) => return fail(&fallback, None, &e),
    };
    let out = opts.out.clone().or_else(|| cfg.out_dir.clone()).unwrap_or(fallback);
    let start = Instant::now();
    let report = match Runner::new(cfg.threads).map_err(CliError::from).and_then(|r| execute(&cfg, &r, None, opts.oracle)) {
        Ok(r) => r,
        Err(e) => return fail(&out, Some(cfg), &e),
    };
    let wall = start.elapsed().as_secs_f64();
    if let Err(e) = fs::create_dir_all(&out).map_err(|e| io_err(&out, e)).and_then(|_| write_csv(&out.join(CSV_FILE), &report.rows)) {
        return fail(&out, Some(cfg), &e);
    }
    let summary = Summary {
        config: Some(cfg),
        exit_code: EXIT_OK,
        errors: vec![],
        totals: json!({ "rows": report.rows.len(), "replicates": report.replicates, "objects": report.objects, "wall_time": wall }),
        throughput: json!({
            "replicates_per_sec": report.replicates as f64 / wall.max(1e-9),
            "discs_per_sec": report.objects as f64 / wall.max(1e-9),
        }),
        verdicts: report.verdicts,
        oracle: report.oracle,
        rows: records(&report.rows),
    };
    match write_summary(&out, &summary) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn fail(out: &Path, cfg: Option<ExperimentConfig>, e: &CliError) -> i32 {
    eprintln!("error: {e}");
    let code = e.exit_code();
    let summary = Summary {
        config: cfg,
        exit_code: code,
        errors: vec![error_entry(e)],
        totals: json!({ "rows": 0 }),
        throughput: json!({}),
        verdicts: vec![],
        oracle: None,
        rows: vec![],
    };
    if let Err(w) = write_summary(out, &summary) {
        eprintln!("error: {w}");
    }
    code
}

/// Command-line options of `replay`.
#[derive(Clone, Debug, Default)]
pub struct ReplayOptions {
    /// Row indices; empty means every row.
    pub rows: Vec<usize>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

/// Re-executes the selected rows of a recorded run and compares outcome
/// digests. Returns the indices that differ.
pub fn replay_rows(summary: &Summary, opts: &ReplayOptions) -> Result<Vec<usize>, CliError> {
    let mut cfg = summary.config.clone().ok_or_else(|| CliError::Config("summary has no config".into()))?;
    if let Some(s) = opts.seed {
        cfg.master_seed = s;
    }
    if let Some(t) = opts.threads {
        cfg.threads = t;
    }
    cfg.validate()?;
    let wanted: BTreeSet<usize> = if opts.rows.is_empty() { (0..summary.rows.len()).collect() } else { opts.rows.iter().copied().collect() };
    if let Some(&bad) = wanted.iter().find(|&&i| i >= summary.rows.len()) {
        return Err(CliError::Config(format!("row {bad} out of range, the summary has {} rows", summary.rows.len())));
    }
    let report = execute(&cfg, &Runner::new(cfg.threads)?, Some(&wanted), false)?;
    let fresh = records(&report.rows);
    Ok(wanted
        .into_iter()
        .filter(|&i| fresh.get(i).is_none_or(|f| f.outcome_digest != summary.rows[i].outcome_digest))
        .collect())
}

pub fn replay(summary_path: &Path, opts: &ReplayOptions) -> i32 {
    let summary: Summary = match fs::read_to_string(summary_path)
        .map_err(|e| CliError::Config(format!("{}: {e}", summary_path.display())))
        .and_then(|t| serde_json::from_str(&t).map_err(|e| CliError::Config(format!("{}: {e}", summary_path.display()))))
    {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    match replay_rows(&summary, opts) {
        Ok(bad) if bad.is_empty() => {
            println!("replay: all selected rows reproduced");
            EXIT_OK
        }
        Ok(bad) => {
            let e = CliError::Mismatch(bad);
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

//! Command-line driver. Every subcommand reads one JSON experiment config,
//! applies flag overrides, and echoes the resolved config in its report.
//!
//! Exit codes: 0 success (or all channels closed), 1 audit found an open
//! channel, 2 invalid config or input, 3 I/O failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::game::{make_ghz_game, GameSpec, Sign};
use crate::harness::{run_trials, write_trials_csv, RunOptions, RunReport, Scoring, StateSpec, StrategySpec};
use crate::lhv::{cross_checked_value, LocalStrategy};
use crate::loopholes::{detection_threshold, ThresholdReport};
use crate::quantum::{quantum_win_prob, MeasurementAssignment};
use crate::rational::{self, Rational};
use crate::spacetime::{audit, make_preset, ExperimentTimeline, LoopholeReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_OPEN: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;

const LP_AGREEMENT: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "ghz-lab", version, about = "Classical, quantum and loophole analysis of the GHZ game")]
pub struct Cli {
    /// JSON experiment config
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for Monte Carlo runs
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for report files (must exist)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Per-trial record format for `simulate`; `csv` also writes trials.csv
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Timeline preset: rowe, weihs, galaxy, ideal
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Timeline JSON file for `audit`
    #[arg(long, global = true)]
    pub timeline: Option<PathBuf>,
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Bisection tolerance for `threshold`
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub scoring: Option<Scoring>,
    /// Shorthand strategy for `simulate`
    #[arg(long, global = true, value_enum)]
    pub strategy: Option<StrategyShorthand>,
    /// GHZ sign for `qvalue`: `+` or `-`
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub sign: Option<String>,
    /// Shared state for `qvalue`: `ghz` or `product`
    #[arg(long, global = true, value_enum)]
    pub state: Option<StateShorthand>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact classical value and optimal deterministic strategies
    Bound,
    /// Quantum win probability for the configured state and settings
    Qvalue,
    /// Monte Carlo play with confidence interval and binomial test
    Simulate,
    /// Detection-efficiency threshold for faking a certain win
    Threshold,
    /// Causal-channel audit of an experiment timeline
    Audit,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum StrategyShorthand {
    Classical,
    Quantum,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
pub enum StateShorthand {
    Ghz,
    Product,
}

impl clap::ValueEnum for Scoring {
    fn value_variants<'a>() -> &'a [Self] {
        &[Scoring::Strict, Scoring::Postselect]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            Scoring::Strict => "strict",
            Scoring::Postselect => "postselect",
        }))
    }
}

fn ghz_shorthand() -> GameSpec {
    make_ghz_game()
}

fn deserialize_game<'de, D: serde::Deserializer<'de>>(d: D) -> Result<GameSpec, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum GameRef {
        Name(String),
        Spec(serde_json::Value),
    }
    match GameRef::deserialize(d)? {
        GameRef::Name(n) if n == "ghz" => Ok(make_ghz_game()),
        GameRef::Name(n) => Err(serde::de::Error::custom(format!("unknown game shorthand {n:?}"))),
        GameRef::Spec(v) => serde_json::from_value(v).map_err(serde::de::Error::custom),
    }
}

fn default_trials() -> u64 {
    100_000
}

fn default_confidence() -> f64 {
    0.95
}

fn default_p0() -> Rational {
    rational::ratio(3, 4)
}

fn default_tolerance() -> f64 {
    1e-6
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantumSetup {
    #[serde(default)]
    pub state: StateSpec,
    #[serde(default)]
    pub assignment: MeasurementAssignment,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub csv: bool,
}

/// One JSON document describing an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "ghz_shorthand", deserialize_with = "deserialize_game")]
    pub game: GameSpec,
    #[serde(default = "StrategySpec::ideal_quantum")]
    pub strategy: StrategySpec,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub scoring: Scoring,
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default = "default_p0", with = "rational::as_string")]
    pub p0: Rational,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub quantum: QuantumSetup,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeline: Option<PathBuf>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError { code: EXIT_CONFIG, message: message.into() }
    }

    fn io(message: impl Into<String>) -> Self {
        CliError { code: EXIT_IO, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => CliError::io(e.to_string()),
            other => CliError::config(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

pub fn load_config(cli: &Cli) -> CliResult<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = cli.trials {
        cfg.trials = trials;
    }
    if let Some(preset) = &cli.preset {
        cfg.preset = Some(preset.clone());
        cfg.timeline = None;
    }
    if let Some(path) = &cli.timeline {
        cfg.timeline = Some(path.clone());
        cfg.preset = None;
    }
    if let Some(out) = &cli.out {
        cfg.output.dir = Some(out.clone());
    }
    if cli.format == Some(OutputFormat::Csv) {
        cfg.output.csv = true;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(t) = cli.tol {
        cfg.tolerance = t;
    }
    if let Some(s) = cli.scoring {
        cfg.scoring = s;
    }
    match cli.strategy {
        Some(StrategyShorthand::Classical) => cfg.strategy = StrategySpec::best_classical(),
        Some(StrategyShorthand::Quantum) => cfg.strategy = StrategySpec::ideal_quantum(),
        None => {}
    }
    match cli.state {
        Some(StateShorthand::Product) => cfg.quantum.state = StateSpec::Basis { index: 0 },
        Some(StateShorthand::Ghz) if !matches!(cfg.quantum.state, StateSpec::Ghz { .. }) => {
            cfg.quantum.state = StateSpec::default()
        }
        _ => {}
    }
    if let Some(sign) = &cli.sign {
        let sign = match sign.as_str() {
            "+" | "plus" | "1" | "+1" => Sign::Plus,
            "-" | "minus" | "-1" => Sign::Minus,
            other => return Err(CliError::config(format!("--sign expects + or -, got {other:?}"))),
        };
        cfg.quantum.state = StateSpec::Ghz { sign };
    }
    Ok(cfg)
}

/// Report body followed by the resolved config.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    #[serde(flatten)]
    report: T,
    config: &'a ExperimentConfig,
}

#[derive(Serialize)]
struct BoundReport {
    #[serde(with = "rational::as_string")]
    classical_value: Rational,
    lp_value: f64,
    strategies_enumerated: usize,
    maximizers: Vec<LocalStrategy>,
}

#[derive(Serialize)]
struct QvalueReport {
    quantum_win_prob: f64,
    state: StateSpec,
    assignment: MeasurementAssignment,
}

fn to_json<T: Serialize>(report: T, cfg: &ExperimentConfig) -> CliResult<String> {
    serde_json::to_string(&Envelope { report, config: cfg })
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::config(e.to_string()))
}

fn out_dir(cfg: &ExperimentConfig) -> CliResult<Option<&Path>> {
    match &cfg.output.dir {
        Some(dir) if !dir.is_dir() => Err(CliError::io(format!("output directory {} does not exist", dir.display()))),
        Some(dir) => Ok(Some(dir.as_path())),
        None => Ok(None),
    }
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

/// Output of a subcommand: text for stdout plus its exit code.
pub struct Outcome {
    pub code: i32,
    pub stdout: String,
}

pub fn cmd_bound(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let (cv, lp_value) = cross_checked_value(&cfg.game, LP_AGREEMENT)?;
    let headline = rational::format(&cv.value);
    let json = to_json(
        BoundReport { classical_value: cv.value, lp_value, strategies_enumerated: 64, maximizers: cv.maximizers },
        cfg,
    )?;
    if let Some(dir) = out_dir(cfg)? {
        write_file(dir, "bound.json", json.as_bytes())?;
    }
    Ok(Outcome { code: EXIT_OK, stdout: format!("{headline}\n{json}") })
}

pub fn cmd_qvalue(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let state = cfg.quantum.state.prepare(cfg.game.players())?;
    let value = quantum_win_prob(&cfg.game, &state, &cfg.quantum.assignment)?;
    let json = to_json(
        QvalueReport { quantum_win_prob: value, state: cfg.quantum.state.clone(), assignment: cfg.quantum.assignment },
        cfg,
    )?;
    if let Some(dir) = out_dir(cfg)? {
        write_file(dir, "qvalue.json", json.as_bytes())?;
    }
    // avoid printing "-0.000000000000"
    let shown = if value.abs() < 5e-13 { 0.0 } else { value };
    Ok(Outcome { code: EXIT_OK, stdout: format!("{shown:.12}\n{json}") })
}

pub fn cmd_simulate(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let dir = out_dir(cfg)?.unwrap_or(Path::new("."));
    let opts = RunOptions {
        scoring: cfg.scoring,
        workers: cfg.workers,
        confidence: cfg.confidence,
        p0: cfg.p0.clone(),
        keep_records: cfg.output.csv,
    };
    let (report, records): (RunReport, _) = run_trials(&cfg.game, &cfg.strategy, cfg.trials, cfg.master_seed, &opts)?;
    let json = to_json(&report, cfg)?;
    write_file(dir, "report.json", json.as_bytes())?;
    if let Some(records) = records {
        let path = dir.join("trials.csv");
        let file =
            fs::File::create(&path).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))?;
        write_trials_csv(&records, std::io::BufWriter::new(file)).map_err(|e| CliError::io(e.to_string()))?;
    }
    Ok(Outcome { code: EXIT_OK, stdout: json })
}

pub fn cmd_threshold(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    if !(cfg.tolerance.is_finite() && cfg.tolerance > 0.0) {
        return Err(CliError::config(format!("tolerance must be positive, got {}", cfg.tolerance)));
    }
    let report: ThresholdReport = detection_threshold(&cfg.game, cfg.tolerance)?;
    let json = to_json(&report, cfg)?;
    if let Some(dir) = out_dir(cfg)? {
        write_file(dir, "threshold.json", json.as_bytes())?;
    }
    Ok(Outcome { code: EXIT_OK, stdout: json })
}

pub fn resolve_timeline(cfg: &ExperimentConfig) -> CliResult<ExperimentTimeline> {
    match (&cfg.preset, &cfg.timeline) {
        (Some(name), _) => Ok(make_preset(name)?),
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read timeline {}: {e}", path.display())))?;
            Ok(ExperimentTimeline::from_json(&text)?)
        }
        (None, None) => Err(CliError::config("audit needs --preset or --timeline")),
    }
}

pub fn cmd_audit(cfg: &ExperimentConfig) -> CliResult<Outcome> {
    let timeline = resolve_timeline(cfg)?;
    let report: LoopholeReport = audit(&timeline)?;
    let json = to_json(&report, cfg)?;
    if let Some(dir) = out_dir(cfg)? {
        write_file(dir, "audit.json", json.as_bytes())?;
    }
    let code = if report.all_channels_closed { EXIT_OK } else { EXIT_OPEN };
    Ok(Outcome { code, stdout: json })
}

pub fn execute(cli: &Cli) -> CliResult<Outcome> {
    let cfg = load_config(cli)?;
    match cli.command {
        Command::Bound => cmd_bound(&cfg),
        Command::Qvalue => cmd_qvalue(&cfg),
        Command::Simulate => cmd_simulate(&cfg),
        Command::Threshold => cmd_threshold(&cfg),
        Command::Audit => cmd_audit(&cfg),
    }
}

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(stderr, "{e}") } else { write!(stdout, "{e}") };
            return code;
        }
    };
    match execute(&cli) {
        Ok(outcome) => match stdout.write_all(outcome.stdout.as_bytes()).and_then(|_| stdout.flush()) {
            Ok(()) => outcome.code,
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                EXIT_IO
            }
        },
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message);
            e.code
        }
    }
}

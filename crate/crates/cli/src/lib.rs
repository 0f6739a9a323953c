//! Command-line front end: argument parsing, table ingestion and report
//! serialization.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use rankar_core::{
    ar_design_from_series, load_dataset, run_study, run_study_with_threads, run_test, solve_rank_score_path,
    PresamplePolicy, RankScorePath, ScoreKind, SimulationConfig, Table,
};

/// Significant digits kept for numbers in written reports.
pub const REPORT_DIGITS: usize = 12;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}, line {line}: {message}")]
    Parse { path: String, line: u64, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Core(#[from] rankar_core::Error),
}

impl CliError {
    /// 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "rankar", version, about = "Autoregression rank-score tests of no regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// Test H0: no regression on the given regressors.
    Test(TestArgs),
    /// Run a Monte Carlo size/power study from a TOML config.
    Simulate(SimulateArgs),
    /// Dump the autoregression rank-score path as CSV.
    Scores(ScoresArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Delimiter {
    Comma,
    Tab,
}

impl Delimiter {
    fn byte(self) -> u8 {
        match self {
            Delimiter::Comma => b',',
            Delimiter::Tab => b'\t',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    /// Use the first p rows as the presample.
    ConsumeHead,
    /// Presample given with --presample.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct SeriesArgs {
    /// Input table (header row required).
    #[arg(long, value_parser = nonempty_path)]
    pub data: PathBuf,
    /// Response column.
    #[arg(long)]
    pub response: String,
    /// Autoregression order p.
    #[arg(long)]
    pub ar_order: usize,
    #[arg(long, value_enum, default_value = "consume-head")]
    pub presample_policy: PolicyArg,
    /// Presample values y_{1-p}, ..., y_0, oldest first.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub presample: Vec<f64>,
    #[arg(long, value_enum, default_value = "comma")]
    pub delimiter: Delimiter,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub series: SeriesArgs,
    /// Regressor columns, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub regressors: Vec<String>,
    #[arg(long, default_value = "wilcoxon", value_parser = parse_score)]
    pub score: ScoreKind,
    /// Significance level in (0, 1).
    #[arg(long, default_value = "0.05", value_parser = parse_level)]
    pub level: f64,
    /// Output path, "-" for standard output.
    #[arg(long, default_value = "-", value_parser = nonempty_path)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct SimulateArgs {
    /// Study configuration (TOML).
    #[arg(long, value_parser = nonempty_path)]
    pub config: PathBuf,
    #[arg(long, default_value = "-", value_parser = nonempty_path)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub threads: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct ScoresArgs {
    #[command(flatten)]
    pub series: SeriesArgs,
    #[arg(long, default_value = "-", value_parser = nonempty_path)]
    pub output: PathBuf,
}

fn nonempty_path(s: &str) -> std::result::Result<PathBuf, String> {
    if s.is_empty() {
        Err("path must not be empty".into())
    } else {
        Ok(PathBuf::from(s))
    }
}

fn parse_level(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("level must lie strictly between 0 and 1, got {v}"))
    }
}

fn parse_score(s: &str) -> std::result::Result<ScoreKind, String> {
    s.parse::<ScoreKind>()
        .map_err(|_| format!("unknown score {s:?}; expected wilcoxon, van_der_waerden or sign"))
}

/// Parses arguments that follow the program name.
pub fn parse_cli<I, S>(args: I) -> std::result::Result<Command, clap::Error>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let argv = std::iter::once(std::ffi::OsString::from("rankar")).chain(args.into_iter().map(Into::into));
    Cli::try_parse_from(argv).map(|c| c.command)
}

fn display(path: &Path) -> String {
    path.display().to_string()
}

/// Reads a delimiter-separated table with a mandatory header row.
pub fn read_table(path: &Path, delimiter: Delimiter) -> Result<Table> {
    let file = File::open(path).map_err(|source| CliError::Io {
        path: display(path),
        source,
    })?;
    read_table_from(file, delimiter, &display(path))
}

pub fn read_table_from<R: io::Read>(reader: R, delimiter: Delimiter, label: &str) -> Result<Table> {
    let parse_err = |line: u64, message: String| CliError::Parse {
        path: label.to_string(),
        line,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter.byte())
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(parse_err(1, "empty input; a header row is required".into()));
    }
    if headers.iter().all(|h| h.parse::<f64>().is_ok()) {
        return Err(parse_err(1, "missing header row (first row is numeric)".into()));
    }
    if let Some(h) = headers.iter().find(|h| h.is_empty()) {
        return Err(parse_err(1, format!("empty column name {h:?}")));
    }
    let names: Vec<String> = headers.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if let Some(col) = rec.iter().position(str::is_empty) {
            return Err(parse_err(line, format!("empty cell in column {:?}", names[col])));
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    Table::new(names, rows).map_err(|e| parse_err(1, e.to_string()))
}

/// Rounds every number in a JSON tree to `digits` significant digits.
pub fn round_numbers(v: &mut Value, digits: usize) {
    match v {
        Value::Number(num) => {
            if let Some(x) = num.as_f64().filter(|_| num.is_f64()) {
                let r: f64 = format!("{:.*e}", digits - 1, x).parse().unwrap_or(x);
                if let Some(n) = serde_json::Number::from_f64(r) {
                    *num = n;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|x| round_numbers(x, digits)),
        Value::Object(map) => map.values_mut().for_each(|x| round_numbers(x, digits)),
        _ => {}
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => {
            for (k, x) in map {
                flatten(&key(k), x, out);
            }
        }
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(&key(&i.to_string()), x, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn open_output(path: &Path) -> Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(BufWriter::new(io::stdout().lock())))
    } else {
        let f = File::create(path).map_err(|source| CliError::Io {
            path: display(path),
            source,
        })?;
        Ok(Box::new(BufWriter::new(f)))
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: display(path),
        source,
    }
}

/// Renders a report as JSON (numbers rounded) or as flat key,value CSV rows.
pub fn render_report<T: Serialize>(report: &T, format: Format) -> String {
    let mut v = serde_json::to_value(report).expect("reports serialize");
    round_numbers(&mut v, REPORT_DIGITS);
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&v).expect("json");
            s.push('\n');
            s
        }
        Format::Csv => {
            let mut rows = Vec::new();
            flatten("", &v, &mut rows);
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["key", "value"]).expect("in-memory write");
            for (k, val) in rows {
                w.write_record([k, val]).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf8")
        }
    }
}

pub fn write_report<T: Serialize>(report: &T, format: Format, path: &Path) -> Result<()> {
    let text = render_report(report, format);
    let mut out = open_output(path)?;
    out.write_all(text.as_bytes()).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

fn fmt_num(x: f64) -> String {
    let r: f64 = format!("{:.*e}", REPORT_DIGITS - 1, x).parse().unwrap_or(x);
    r.to_string()
}

/// One row per breakpoint: alpha, then the n rank scores at that alpha.
pub fn render_path_csv(path: &RankScorePath) -> String {
    let n = path.n();
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = std::iter::once("alpha".to_string()).chain((1..=n).map(|t| format!("a{t}")));
    w.write_record(header).expect("in-memory write");
    let nodes = path.node_values();
    for (k, alpha) in path.breakpoints().iter().enumerate() {
        let mut row = vec![fmt_num(*alpha)];
        row.extend(nodes.column(k).iter().map(|v| fmt_num(*v)));
        w.write_record(row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf8")
}

pub fn write_path_csv(path_solution: &RankScorePath, path: &Path) -> Result<()> {
    let text = render_path_csv(path_solution);
    let mut out = open_output(path)?;
    out.write_all(text.as_bytes()).map_err(io_err(path))?;
    out.flush().map_err(io_err(path))
}

fn presample_policy(args: &SeriesArgs) -> Result<PresamplePolicy> {
    match args.presample_policy {
        PolicyArg::ConsumeHead => {
            if !args.presample.is_empty() {
                return Err(CliError::Usage(
                    "--presample is only valid with --presample-policy explicit".into(),
                ));
            }
            Ok(PresamplePolicy::ConsumeHead)
        }
        PolicyArg::Explicit => {
            if args.presample.len() != args.ar_order {
                return Err(CliError::Usage(format!(
                    "--presample needs {} values for --ar-order {}, got {}",
                    args.ar_order,
                    args.ar_order,
                    args.presample.len()
                )));
            }
            Ok(PresamplePolicy::Explicit(args.presample.clone()))
        }
    }
}

/// Maps 1-based data-row numbers in core errors onto file line numbers.
fn locate(err: rankar_core::Error, path: &Path) -> CliError {
    match err {
        rankar_core::Error::NonNumeric { row, column, value } => CliError::Parse {
            path: display(path),
            line: row as u64 + 1,
            message: format!("non-numeric value {value:?} in column {column:?}"),
        },
        rankar_core::Error::NonFinite { row, column } => CliError::Parse {
            path: display(path),
            line: row as u64 + 1,
            message: format!("non-finite value in column {column:?}"),
        },
        other => CliError::Core(other),
    }
}

pub fn load_config(path: &Path) -> Result<SimulationConfig> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let cfg: SimulationConfig = toml::from_str(&text).map_err(|e| CliError::Config {
        path: display(path),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn run_scores(args: &ScoresArgs) -> Result<()> {
    let s = &args.series;
    let policy = presample_policy(s)?;
    let table = read_table(&s.data, s.delimiter)?;
    let series = table.numeric_column(&s.response).map_err(|e| locate(e, &s.data))?;
    let (presample, response) = match policy {
        PresamplePolicy::Explicit(pre) => (pre, series),
        PresamplePolicy::ConsumeHead => {
            if series.len() < s.ar_order + 2 {
                return Err(rankar_core::Error::TooFewRows {
                    needed: s.ar_order + 2,
                    have: series.len(),
                }
                .into());
            }
            let (pre, rest) = series.split_at(s.ar_order);
            (pre.to_vec(), rest.to_vec())
        }
    };
    let design = ar_design_from_series(&presample, &response)?;
    let path = solve_rank_score_path(&design)?;
    write_path_csv(&path, &args.output)
}

pub fn run(command: &Command) -> Result<()> {
    match command {
        Command::Test(args) => {
            let s = &args.series;
            let policy = presample_policy(s)?;
            let table = read_table(&s.data, s.delimiter)?;
            let d = load_dataset(&table, &s.response, &args.regressors, s.ar_order, &policy)
                .map_err(|e| locate(e, &s.data))?;
            let report = run_test(&d, args.score, args.level)?;
            write_report(&report, args.format, &args.output)
        }
        Command::Simulate(args) => {
            let cfg = load_config(&args.config)?;
            let report = match args.threads {
                Some(t) => run_study_with_threads(&cfg, t as usize)?,
                None => run_study(&cfg)?,
            };
            write_report(&report, args.format, &args.output)
        }
        Command::Scores(args) => run_scores(args),
    }
}

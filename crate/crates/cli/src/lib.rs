//! Argument parsing and dispatch for the `hbi-lab` binary.
//!
//! Exit codes: 0 success, 1 usage error, 2 validation error, 3 solver
//! non-convergence, 4 theorem witness failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use hbi_core::experiments::{self, ExperimentKind};
use hbi_core::infotheory::{
    channel_capacity_ba, conditional_mi, default_slopes, mutual_information_sets, rate_distortion_ba,
    rd_point_at_distortion, rd_point_at_rate, DistortionMatrix,
};
use hbi_core::probcore::{Channel, Distribution, JointDistribution};
use hbi_core::theorems;
use hbi_core::HbiError;
use serde::de::DeserializeOwned;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NONCONVERGENCE: i32 = 3;
pub const EXIT_WITNESS: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "hbi-lab", version, about = "Supervision-channel bounds, witnesses and sweeps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Capacity of a channel by Blahut–Arimoto.
    Capacity(CapacityArgs),
    /// Rate–distortion curve or a single point on it.
    Rd(RdArgs),
    /// Mutual information between axes of a joint law.
    Mi(MiArgs),
    /// Theorem witnesses.
    Theorems {
        #[command(subcommand)]
        action: TheoremsAction,
    },
    /// Run a configured sweep and write its result files.
    Sweep(SweepArgs),
    /// Validate a JSONL score file.
    IngestCheck(IngestArgs),
    /// Print the version.
    Version,
}

#[derive(Args, Debug)]
pub struct CapacityArgs {
    /// Channel JSON: {"input_support", "output_support", "rows"}.
    #[arg(long)]
    pub channel: PathBuf,
    /// Bracket width at which iteration stops, in bits.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub max_iter: usize,
    /// Also write the full result as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RdArgs {
    /// Source distribution JSON: {"support", "probs"}.
    #[arg(long)]
    pub source: PathBuf,
    /// `hamming`, or a distortion matrix JSON: {"name", "rows"}.
    #[arg(long, default_value = "hamming")]
    pub distortion: String,
    /// Solve for R(D) at this distortion.
    #[arg(long, conflicts_with = "at_rate")]
    pub at_distortion: Option<f64>,
    /// Solve for D(R) at this rate in bits.
    #[arg(long)]
    pub at_rate: Option<f64>,
    /// Write the traced curve as CSV (slope,distortion,rate_bits).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MiArgs {
    /// Joint distribution JSON: {"axes": [{"name", "support"}], "table"}.
    #[arg(long)]
    pub joint: PathBuf,
    /// Comma-separated axes of the first group.
    #[arg(long, value_delimiter = ',', required = true)]
    pub a: Vec<String>,
    /// Comma-separated axes of the second group.
    #[arg(long, value_delimiter = ',', required = true)]
    pub b: Vec<String>,
    /// Comma-separated conditioning axes.
    #[arg(long, value_delimiter = ',')]
    pub given: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum TheoremsAction {
    /// Run the six witnesses on their fixed instances plus random ones.
    RunAll {
        /// Report file (JSON array).
        #[arg(long)]
        out: PathBuf,
        /// Random instances per theorem.
        #[arg(long, default_value_t = 0)]
        random: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// alpha, lambda, noise, scaling, sufficiency or normalization (full names also accepted).
    pub experiment: String,
    /// Experiment config JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; created when missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub parallel: usize,
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// JSONL score file.
    pub path: PathBuf,
    /// Abort on the first malformed line.
    #[arg(long)]
    pub strict: bool,
}

/// A failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: message.into(),
        }
    }
}

impl From<HbiError> for Failure {
    fn from(e: HbiError) -> Self {
        let code = match e {
            HbiError::NonConvergence { .. } => EXIT_NONCONVERGENCE,
            _ => EXIT_INVALID,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult = std::result::Result<i32, Failure>;

/// Parses `args` (including the program name) and runs the command.
pub fn dispatch<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{rendered}");
                    EXIT_OK
                }
                _ => {
                    let _ = write!(err, "{rendered}");
                    EXIT_USAGE
                }
            };
        }
    };
    match run(cli.command, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn run(cmd: Command, out: &mut dyn Write) -> CliResult {
    match cmd {
        Command::Capacity(a) => capacity(a, out),
        Command::Rd(a) => rd(a, out),
        Command::Mi(a) => mi(a, out),
        Command::Theorems {
            action: TheoremsAction::RunAll { out: path, random, seed },
        } => run_all(&path, random, seed, out),
        Command::Sweep(a) => sweep(a, out),
        Command::IngestCheck(a) => ingest_check(a, out),
        Command::Version => {
            say(out, env!("CARGO_PKG_VERSION"))?;
            Ok(EXIT_OK)
        }
    }
}

fn say(out: &mut dyn Write, line: &str) -> std::result::Result<(), Failure> {
    writeln!(out, "{line}").map_err(|e| Failure::invalid(e.to_string()))
}

fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> std::result::Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Failure::usage(format!("{what} not found")),
        _ => Failure::invalid(format!("{}: {e}", path.display())),
    })?;
    serde_json::from_str(&text).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, contents: &[u8]) -> std::result::Result<(), Failure> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let fail = |e: std::io::Error| Failure::invalid(format!("cannot write {}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(path).map_err(|e| fail(e.error))?;
    Ok(())
}

fn capacity(a: CapacityArgs, out: &mut dyn Write) -> CliResult {
    let ch: Channel = read_json(&a.channel, "channel")?;
    let r = channel_capacity_ba(&ch, a.tol, a.max_iter)?;
    if let Some(path) = &a.out {
        let json = serde_json::to_string_pretty(&r).map_err(|e| Failure::invalid(e.to_string()))?;
        write_atomic(path, (json + "\n").as_bytes())?;
    }
    say(out, &format!("capacity_bits={:.6}", r.capacity_bits))?;
    Ok(EXIT_OK)
}

fn rd(a: RdArgs, out: &mut dyn Write) -> CliResult {
    let source: Distribution = read_json(&a.source, "source")?;
    let dist = if a.distortion == "hamming" {
        DistortionMatrix::hamming(source.len())
    } else {
        let raw: serde_json::Value = read_json(Path::new(&a.distortion), "distortion")?;
        let name = raw.get("name").and_then(|v| v.as_str()).unwrap_or("custom").to_string();
        let rows: Vec<Vec<f64>> = raw
            .get("rows")
            .cloned()
            .map(serde_json::from_value)
            .transpose()
            .map_err(|e| Failure::invalid(e.to_string()))?
            .ok_or_else(|| Failure::invalid("distortion file needs `rows`"))?;
        DistortionMatrix::new(name, rows)?
    };
    if let Some(d) = a.at_distortion {
        let p = rd_point_at_distortion(&source, &dist, d)?;
        say(out, &format!("rate_bits={:.6} distortion={:.6}", p.rate_bits, p.distortion))?;
        return Ok(EXIT_OK);
    }
    if let Some(r) = a.at_rate {
        let p = rd_point_at_rate(&source, &dist, r)?;
        say(out, &format!("distortion={:.6} rate_bits={:.6}", p.distortion, p.rate_bits))?;
        return Ok(EXIT_OK);
    }
    let curve = rate_distortion_ba(&source, &dist, &default_slopes())?;
    if let Some(path) = &a.out {
        let mut csv = String::from("slope,distortion,rate_bits\n");
        for p in &curve.points {
            csv.push_str(&format!("{:.6},{:.6},{:.6}\n", p.slope, p.distortion, p.rate_bits));
        }
        write_atomic(path, csv.as_bytes())?;
    }
    say(
        out,
        &format!(
            "points={} d_star={:.6} d_max={:.6}",
            curve.points.len(),
            curve.d_star,
            curve.d_max
        ),
    )?;
    Ok(EXIT_OK)
}

fn mi(a: MiArgs, out: &mut dyn Write) -> CliResult {
    let raw: JointDistribution = read_json(&a.joint, "joint")?;
    let j = JointDistribution::new(raw.axes().to_vec(), raw.table().to_vec())?;
    fn names(v: &[String]) -> Vec<&str> {
        v.iter().map(String::as_str).collect()
    }
    let (x, y, z) = (names(&a.a), names(&a.b), names(&a.given));
    let v = if z.is_empty() {
        mutual_information_sets(&j, &x, &y)?
    } else {
        conditional_mi(&j, &x, &y, &z)?
    };
    say(out, &format!("mi_bits={v:.6}"))?;
    Ok(EXIT_OK)
}

fn run_all(path: &Path, random: usize, seed: u64, out: &mut dyn Write) -> CliResult {
    let reports = theorems::run_all(random, seed)?;
    let json = serde_json::to_string_pretty(&reports).map_err(|e| Failure::invalid(e.to_string()))?;
    write_atomic(path, (json + "\n").as_bytes())?;
    let satisfied = reports.iter().filter(|r| r.satisfied).count();
    say(out, &format!("reports={} satisfied={satisfied}", reports.len()))?;
    if let Some(r) = reports.iter().find(|r| !r.satisfied) {
        return Err(Failure {
            code: EXIT_WITNESS,
            message: format!("witness {:?} violated: lhs={:.6} rhs={:.6}", r.theorem_id, r.lhs, r.rhs),
        });
    }
    Ok(EXIT_OK)
}

fn sweep(a: SweepArgs, out: &mut dyn Write) -> CliResult {
    let kind = ExperimentKind::parse(&a.experiment)
        .ok_or_else(|| Failure::usage(format!("unknown experiment `{}`", a.experiment)))?;
    if !a.config.exists() {
        return Err(Failure::usage("config not found"));
    }
    let mut cfg = experiments::load_config(&a.config)?;
    if cfg.experiment != kind {
        return Err(Failure::invalid(format!(
            "config describes {} but {} was requested",
            cfg.experiment.name(),
            kind.name()
        )));
    }
    if let Ok(s) = std::env::var(experiments::SEED_ENV) {
        let base = s
            .trim()
            .parse::<u64>()
            .map_err(|_| Failure::invalid(format!("{} must be an unsigned integer", experiments::SEED_ENV)))?;
        cfg.override_seeds(base);
    }
    if a.parallel == 0 {
        return Err(Failure::usage("--parallel must be at least 1"));
    }
    let result = experiments::run_experiment(&cfg, a.parallel)?;
    let files = experiments::render_outputs(&result).map_err(|e| match e {
        HbiError::EmptyEval => Failure::invalid("no cells"),
        other => other.into(),
    })?;
    std::fs::create_dir_all(&a.out)
        .map_err(|e| Failure::invalid(format!("cannot create {}: {e}", a.out.display())))?;
    for (name, contents) in &files {
        write_atomic(&a.out.join(name), contents.as_bytes())?;
    }
    say(
        out,
        &format!(
            "experiment={} cells={} files={} out={}",
            kind.name(),
            result.cells.len(),
            files.len(),
            a.out.display()
        ),
    )?;
    Ok(EXIT_OK)
}

fn ingest_check(a: IngestArgs, out: &mut dyn Write) -> CliResult {
    if !a.path.exists() {
        return Err(Failure::usage("score file not found"));
    }
    let report = experiments::ingest_scores(&a.path, a.strict)?;
    let counts: Vec<String> = report.scores.counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    say(
        out,
        &format!(
            "pairs={} errors={} digest={} {}",
            report.scores.pairs.len(),
            report.errors.len(),
            report.scores.source_digest,
            counts.join(" ")
        ),
    )?;
    if let Some(first) = report.errors.first() {
        return Err(Failure::invalid(format!(
            "{} malformed line(s); first at line {}: {}",
            report.errors.len(),
            first.line,
            first.message
        )));
    }
    Ok(EXIT_OK)
}

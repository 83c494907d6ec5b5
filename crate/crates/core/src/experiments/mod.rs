//! Config-driven sweeps over synthetic tasks and ingested score files.
//!
//! Every cell is a (parameter value, seed) pair evaluated independently with
//! random streams keyed by the seed alone, so different parameter values see
//! the same task instance. Aggregates use the population standard deviation
//! and a normal-approximation 95% interval.

mod ingest;
mod objective;
mod preference;
mod scaling;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HbiError, Result};
use crate::infotheory::digest_of;
use crate::learners::TrainConfig;
use crate::supervision::{BiasSpec, NoiseSpec, QuantizerSpec, SupervisionSpec};

pub use ingest::{ingest_scores, to_jsonl, IngestReport, IngestedScores, LineError};
pub use objective::{batch_zscores, AuditRow};
pub use preference::{human_only_cell, hybrid_label, PreferenceInstance};
pub use scaling::{analytic_floor, quantizer_gain};

pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable that replaces the configured seeds.
pub const SEED_ENV: &str = "HBI_LAB_SEED";

const STREAM_TASK: u64 = 1;
const STREAM_HUMAN: u64 = 2;
const STREAM_AUX: u64 = 3;
const STREAM_CORRUPT: u64 = 4;
const STREAM_MODEL: u64 = 5;
const STREAM_MODEL_NOISE: u64 = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    AlphaSweep,
    LambdaAblation,
    NoiseSweep,
    ScalingSweep,
    SufficiencyProxy,
    NormalizationDegeneracy,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::AlphaSweep,
        ExperimentKind::LambdaAblation,
        ExperimentKind::NoiseSweep,
        ExperimentKind::ScalingSweep,
        ExperimentKind::SufficiencyProxy,
        ExperimentKind::NormalizationDegeneracy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::AlphaSweep => "alpha_sweep",
            ExperimentKind::LambdaAblation => "lambda_ablation",
            ExperimentKind::NoiseSweep => "noise_sweep",
            ExperimentKind::ScalingSweep => "scaling_sweep",
            ExperimentKind::SufficiencyProxy => "sufficiency_proxy",
            ExperimentKind::NormalizationDegeneracy => "normalization_degeneracy",
        }
    }

    /// Accepts the full name or its first word (`alpha`, `lambda`, …).
    pub fn parse(s: &str) -> Option<ExperimentKind> {
        let s = s.replace('-', "_");
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s || k.name().split('_').next() == Some(s.as_str()))
    }
}

/// How the auxiliary score of a synthetic candidate is produced.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuxChannel {
    /// `S_A = R*`, a sufficient channel.
    #[default]
    Exact,
    /// `S_A ≡ 0`, an uninformative channel.
    Zero,
    /// `S_A = R* + N(0, scale²)`.
    Noisy { scale: f64 },
}

/// Known-target task with standard normal features and `R*(φ) = wᵀφ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    #[serde(default = "default_dim")]
    pub dim: usize,
    /// True weights; drawn unit-norm from the seed when absent.
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    /// Human channel; [`default_supervision`] when absent.
    #[serde(default)]
    pub supervision: Option<SupervisionSpec>,
    #[serde(default)]
    pub aux: AuxChannel,
}

fn default_dim() -> usize {
    8
}

impl Default for SyntheticTask {
    fn default() -> Self {
        SyntheticTask {
            dim: default_dim(),
            weights: None,
            supervision: None,
            aux: AuxChannel::Exact,
        }
    }
}

impl SyntheticTask {
    pub fn supervision(&self) -> SupervisionSpec {
        self.supervision.clone().unwrap_or_else(|| default_supervision(self.dim))
    }
}

/// Gaussian noise 0.5, bias `0.15·e₁`, unit-width quantizer on `[−3, 3]`.
pub fn default_supervision(dim: usize) -> SupervisionSpec {
    let mut delta = vec![0.0; dim];
    if dim > 0 {
        delta[0] = 0.15;
    }
    SupervisionSpec {
        noise: NoiseSpec::Gaussian { scale: 0.5 },
        bias: BiasSpec::Linear { delta },
        quantizer: QuantizerSpec::with_edges((-3..=3).map(f64::from).collect()),
    }
}

/// Which ingested channel plays the primary (human or model) role.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Primary {
    #[default]
    H,
    M,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskSpec {
    Synthetic(SyntheticTask),
    Ingested {
        path: PathBuf,
        #[serde(default)]
        primary: Primary,
        #[serde(default)]
        strict: bool,
    },
}

impl Default for TaskSpec {
    fn default() -> Self {
        TaskSpec::Synthetic(SyntheticTask::default())
    }
}

/// Batch used for z-scoring in the normalization study.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchMode {
    /// All candidates of all pairs.
    Global,
    /// A-side candidates and B-side candidates separately.
    #[default]
    PerSide,
    /// The two candidates of each pair.
    Pair,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectSide {
    /// The correct candidate is always listed first.
    #[default]
    A,
    Random,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuxIndicator {
    /// `1` on the correct candidate, `0` on the other.
    #[default]
    Correctness,
    /// `1` on every candidate.
    Constant,
}

/// Mixing weights of one supervision regime in the scaling sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub name: String,
    pub h: f64,
    pub m: f64,
    pub a: f64,
}

fn default_regimes() -> Vec<Regime> {
    vec![
        Regime {
            name: "h".into(),
            h: 1.0,
            m: 0.0,
            a: 0.0,
        },
        Regime {
            name: "hm".into(),
            h: 0.5,
            m: 0.5,
            a: 0.0,
        },
        Regime {
            name: "hma".into(),
            h: 0.25,
            m: 0.25,
            a: 0.5,
        },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepOptions {
    /// Fixed α for λ ablation, the hybrid arm of the noise sweep and the normalization study.
    pub alpha: f64,
    /// Fixed λ when λ is not the swept parameter.
    pub lambda: f64,
    /// Probability the human prefers the incorrect candidate.
    pub human_error: f64,
    pub batch_mode: BatchMode,
    pub correct_side: CorrectSide,
    pub aux_indicator: AuxIndicator,
    pub regimes: Vec<Regime>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            alpha: 0.5,
            lambda: 1.0,
            human_error: 0.3,
            batch_mode: BatchMode::PerSide,
            correct_side: CorrectSide::A,
            aux_indicator: AuxIndicator::Correctness,
            regimes: default_regimes(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub task: TaskSpec,
    pub grid: Vec<f64>,
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub options: SweepOptions,
}

fn default_n_train() -> usize {
    5000
}

fn default_n_test() -> usize {
    1000
}

impl ExperimentConfig {
    /// The default configuration of each experiment on the synthetic task.
    pub fn default_for(kind: ExperimentKind) -> Self {
        let (grid, human_error) = match kind {
            ExperimentKind::AlphaSweep | ExperimentKind::SufficiencyProxy => (vec![0.0, 0.25, 0.5, 0.75, 1.0], 0.3),
            ExperimentKind::LambdaAblation => (vec![0.5, 1.0, 2.0], 0.3),
            ExperimentKind::NoiseSweep => (vec![0.0, 0.2, 0.4], 0.3),
            ExperimentKind::ScalingSweep => (vec![2000.0, 4000.0, 8000.0, 16000.0], 0.3),
            ExperimentKind::NormalizationDegeneracy => (vec![0.5], 0.52),
        };
        ExperimentConfig {
            schema: SCHEMA_VERSION,
            experiment: kind,
            task: TaskSpec::default(),
            grid,
            n_train: default_n_train(),
            n_test: default_n_test(),
            seeds: vec![0, 1, 2],
            train: TrainConfig::default(),
            options: SweepOptions {
                human_error,
                ..SweepOptions::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HbiError::Config(m));
        if self.schema != SCHEMA_VERSION {
            return bad(format!("unsupported schema {} (expected {SCHEMA_VERSION})", self.schema));
        }
        if self.grid.is_empty() || self.seeds.is_empty() {
            return bad("no cells: grid and seeds must be nonempty".into());
        }
        if self.grid.iter().any(|g| !g.is_finite()) {
            return bad("grid values must be finite".into());
        }
        if self.n_test < 100 {
            return bad(format!("n_test = {} is below 100", self.n_test));
        }
        self.train.validate()?;
        let in_unit = |v: f64| (0.0..=1.0).contains(&v);
        match self.experiment {
            ExperimentKind::AlphaSweep | ExperimentKind::SufficiencyProxy | ExperimentKind::NormalizationDegeneracy => {
                if !self.grid.iter().all(|a| in_unit(*a)) {
                    return bad("alpha values must lie in [0, 1]".into());
                }
            }
            ExperimentKind::LambdaAblation => {
                if !self.grid.iter().all(|l| *l > 0.0) {
                    return bad("lambda values must be positive".into());
                }
            }
            ExperimentKind::NoiseSweep => {
                if !self.grid.iter().all(|g| (0.0..=0.5).contains(g)) {
                    return bad("flip rates must lie in [0, 0.5]".into());
                }
            }
            ExperimentKind::ScalingSweep => {
                if self.grid.iter().any(|n| *n < 1.0 || n.fract() != 0.0) || self.grid.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("sample sizes must be positive integers in increasing order".into());
                }
            }
        }
        if !in_unit(self.options.alpha) || !(self.options.lambda > 0.0) || !in_unit(self.options.human_error) {
            return bad("options.alpha and options.human_error must lie in [0, 1], options.lambda must be positive".into());
        }
        if let TaskSpec::Synthetic(t) = &self.task {
            if t.dim == 0 {
                return bad("task dimension must be positive".into());
            }
            if let Some(w) = &t.weights {
                if w.len() != t.dim || w.iter().any(|v| !v.is_finite()) {
                    return bad(format!("task weights must be {} finite values", t.dim));
                }
            }
            let spec = t.supervision();
            spec.validate()?;
            if let BiasSpec::Linear { delta } = &spec.bias {
                if delta.len() != t.dim {
                    return bad(format!("bias vector must have {} entries", t.dim));
                }
            }
        }
        Ok(())
    }

    /// Replaces the seeds with `base, base + 1, …`, keeping their number.
    pub fn override_seeds(&mut self, base: u64) {
        let k = self.seeds.len() as u64;
        self.seeds = (0..k).map(|i| base.wrapping_add(i)).collect();
    }
}

/// Reads a JSON config.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(|e| HbiError::Config(e.to_string()))?;
    Ok(cfg)
}

/// One (parameter, seed) evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub param: f64,
    pub param_index: usize,
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub param: f64,
    pub metric: String,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Number of seeds aggregated.
    pub k: usize,
    pub single_seed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub experiment: ExperimentKind,
    pub config_digest: String,
    pub cells: Vec<Cell>,
    pub aggregates: Vec<Aggregate>,
    /// Metrics that get a plot-ready CSV.
    pub plot_metrics: Vec<String>,
    #[serde(default)]
    pub summary: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub audit: Vec<AuditRow>,
}

impl SweepResult {
    /// Mean of `metric` at each parameter, in parameter order.
    pub fn means(&self, metric: &str) -> Vec<(f64, f64)> {
        self.aggregates
            .iter()
            .filter(|a| a.metric == metric)
            .map(|a| (a.param, a.mean))
            .collect()
    }

    pub fn aggregate(&self, param: f64, metric: &str) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.param == param && a.metric == metric)
    }
}

/// Half-width multiplier of the 95% normal interval.
pub const Z95: f64 = 1.96;

/// Mean and `mean ± 1.96·std/√k` per metric per parameter, population std.
pub fn summarize(cells: &[Cell]) -> Vec<Aggregate> {
    let mut groups: BTreeMap<(usize, String), (f64, Vec<f64>)> = BTreeMap::new();
    for c in cells {
        for (m, v) in &c.metrics {
            groups
                .entry((c.param_index, m.clone()))
                .or_insert_with(|| (c.param, Vec::new()))
                .1
                .push(*v);
        }
    }
    groups
        .into_iter()
        .map(|((_, metric), (param, vals))| {
            let k = vals.len();
            let (mean, var) = if vals.iter().all(|v| *v == vals[0]) {
                (vals[0], 0.0)
            } else {
                let mean = vals.iter().sum::<f64>() / k as f64;
                (mean, vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k as f64)
            };
            let half = Z95 * var.sqrt() / (k as f64).sqrt();
            Aggregate {
                param,
                metric,
                mean,
                ci_lo: mean - half,
                ci_hi: mean + half,
                k,
                single_seed: k == 1,
            }
        })
        .collect()
}

/// Runs the configured sweep on a pool of `parallel` worker threads.
pub fn run_experiment(cfg: &ExperimentConfig, parallel: usize) -> Result<SweepResult> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallel.max(1))
        .build()
        .map_err(|e| HbiError::Config(e.to_string()))?;
    pool.install(|| run_inner(cfg))
}

fn run_inner(cfg: &ExperimentConfig) -> Result<SweepResult> {
    let jobs: Vec<(usize, u64)> = (0..cfg.grid.len())
        .flat_map(|p| cfg.seeds.iter().map(move |s| (p, *s)))
        .collect();
    let mut audit = Vec::new();
    let (mut cells, plot_metrics): (Vec<Cell>, Vec<&str>) = match (&cfg.task, cfg.experiment) {
        (TaskSpec::Ingested { path, primary, strict }, kind) => {
            let scores = ingest_scores(path, *strict)?.scores;
            let cells = preference::ingested_cells(cfg, &scores, *primary, &jobs, &mut audit)?;
            let plots = match kind {
                ExperimentKind::NormalizationDegeneracy => objective::NORMALIZATION_PLOTS.to_vec(),
                _ => vec!["accuracy"],
            };
            (cells, plots)
        }
        (TaskSpec::Synthetic(task), ExperimentKind::AlphaSweep | ExperimentKind::LambdaAblation) => (
            par_cells(&jobs, |p, s| preference::hybrid_cell(cfg, task, p, s))?,
            vec!["accuracy", "alignment_error", "distortion_norm"],
        ),
        (TaskSpec::Synthetic(task), ExperimentKind::NoiseSweep) => (
            par_cells(&jobs, |p, s| preference::noise_cell(cfg, task, p, s))?,
            vec!["accuracy_human", "accuracy_hybrid"],
        ),
        (TaskSpec::Synthetic(task), ExperimentKind::ScalingSweep) => {
            let cells = par_cells(&jobs, |p, s| scaling::scaling_cell(cfg, task, p, s))?;
            (cells, Vec::new())
        }
        (TaskSpec::Synthetic(_), ExperimentKind::SufficiencyProxy) => (
            par_cells(&jobs, |p, s| objective::sufficiency_cell(cfg, p, s))?,
            vec!["accuracy"],
        ),
        (TaskSpec::Synthetic(_), ExperimentKind::NormalizationDegeneracy) => {
            let out: Vec<(Cell, Vec<AuditRow>)> = jobs
                .par_iter()
                .map(|&(p, s)| objective::normalization_cell(cfg, p, s))
                .collect::<Result<_>>()?;
            let mut cells = Vec::with_capacity(out.len());
            for (c, rows) in out {
                cells.push(c);
                audit.extend(rows);
            }
            (cells, objective::NORMALIZATION_PLOTS.to_vec())
        }
    };
    cells.sort_by(|a, b| {
        let sa = cfg.seeds.iter().position(|s| *s == a.seed);
        let sb = cfg.seeds.iter().position(|s| *s == b.seed);
        (a.param_index, sa).cmp(&(b.param_index, sb))
    });
    let aggregates = summarize(&cells);
    let plot_metrics: Vec<String> = if plot_metrics.is_empty() {
        // Every metric the scaling cells produced, in name order.
        let mut names: Vec<String> = cells.iter().flat_map(|c| c.metrics.keys().cloned()).collect();
        names.sort();
        names.dedup();
        names
    } else {
        plot_metrics.into_iter().map(String::from).collect()
    };
    let mut result = SweepResult {
        experiment: cfg.experiment,
        config_digest: digest_of(cfg),
        cells,
        aggregates,
        plot_metrics,
        summary: BTreeMap::new(),
        flags: Vec::new(),
        audit,
    };
    finish_summary(cfg, &mut result);
    Ok(result)
}

fn par_cells<F>(jobs: &[(usize, u64)], f: F) -> Result<Vec<Cell>>
where
    F: Fn(usize, u64) -> Result<Cell> + Sync,
{
    jobs.par_iter().map(|&(p, s)| f(p, s)).collect()
}

fn spread(values: &[(f64, f64)]) -> f64 {
    let lo = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    let hi = values.iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        0.0
    } else {
        hi - lo
    }
}

fn finish_summary(cfg: &ExperimentConfig, result: &mut SweepResult) {
    if cfg.seeds.len() == 1 {
        result.flags.push("single-seed".into());
    }
    match cfg.experiment {
        ExperimentKind::LambdaAblation | ExperimentKind::AlphaSweep => {
            let s = spread(&result.means("accuracy"));
            result.summary.insert("accuracy_spread".into(), s);
        }
        ExperimentKind::NormalizationDegeneracy => {
            let agree = result.means("hybrid_human_agreement");
            if !agree.is_empty() && agree.iter().all(|(_, a)| *a == 1.0) {
                result.flags.push("hybrid ranking equals human-only ranking".into());
            }
        }
        _ => {}
    }
}

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

/// `param,mean,ci_lo,ci_hi` rows for one metric, in parameter order.
pub fn plot_csv(result: &SweepResult, metric: &str) -> String {
    let mut out = String::from("param,mean,ci_lo,ci_hi\n");
    for a in result.aggregates.iter().filter(|a| a.metric == metric) {
        let _ = writeln!(out, "{},{},{},{}", fmt6(a.param), fmt6(a.mean), fmt6(a.ci_lo), fmt6(a.ci_hi));
    }
    out
}

/// `param,seed,metric,value` rows for every cell.
pub fn results_csv(result: &SweepResult) -> String {
    let mut out = String::from("param,seed,metric,value\n");
    for c in &result.cells {
        for (m, v) in &c.metrics {
            let _ = writeln!(out, "{},{},{},{}", fmt6(c.param), c.seed, m, fmt6(*v));
        }
    }
    out
}

/// File name and contents of every output artifact of a sweep.
pub fn render_outputs(result: &SweepResult) -> Result<Vec<(String, String)>> {
    if result.cells.is_empty() {
        return Err(HbiError::EmptyEval);
    }
    let mut files = vec![
        ("results.csv".to_string(), results_csv(result)),
        ("results.json".to_string(), serde_json::to_string_pretty(result)? + "\n"),
    ];
    for m in &result.plot_metrics {
        files.push((format!("plot_{m}.csv"), plot_csv(result, m)));
    }
    if !result.audit.is_empty() {
        files.push(("audit.csv".to_string(), objective::audit_csv(&result.audit)));
    }
    Ok(files)
}

/// Parses a plot CSV back into `(param, mean, ci_lo, ci_hi)` rows.
pub fn parse_plot_csv(text: &str) -> Result<Vec<[f64; 4]>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
        let vals = vals.map_err(|e| HbiError::Schema {
            line: i + 1,
            message: e.to_string(),
        })?;
        if vals.len() != 4 {
            return Err(HbiError::Schema {
                line: i + 1,
                message: format!("expected 4 columns, found {}", vals.len()),
            });
        }
        rows.push([vals[0], vals[1], vals[2], vals[3]]);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(p: usize, seed: u64, v: f64) -> Cell {
        Cell {
            param: p as f64,
            param_index: p,
            seed,
            metrics: BTreeMap::from([("accuracy".to_string(), v)]),
        }
    }

    #[test]
    fn summarize_examples() {
        let same = summarize(&[cell(0, 0, 0.7), cell(0, 1, 0.7), cell(0, 2, 0.7)]);
        assert_eq!((same[0].ci_lo, same[0].ci_hi), (0.7, 0.7));

        let a = &summarize(&[cell(0, 0, 0.4), cell(0, 1, 0.5), cell(0, 2, 0.6)])[0];
        assert!((a.mean - 0.5).abs() < 1e-15);
        let half = 1.96 * (0.02f64 / 3.0).sqrt() / 3f64.sqrt();
        assert!((a.ci_hi - a.mean - half).abs() < 1e-12);
        assert!((half - 0.0924).abs() < 1e-4);

        let single = &summarize(&[cell(0, 5, 0.3)])[0];
        assert_eq!((single.ci_lo, single.mean, single.ci_hi), (0.3, 0.3, 0.3));
        assert!(single.single_seed);
    }

    #[test]
    fn experiment_names_parse() {
        assert_eq!(ExperimentKind::parse("alpha"), Some(ExperimentKind::AlphaSweep));
        assert_eq!(ExperimentKind::parse("noise_sweep"), Some(ExperimentKind::NoiseSweep));
        assert_eq!(
            ExperimentKind::parse("normalization-degeneracy"),
            Some(ExperimentKind::NormalizationDegeneracy)
        );
        assert_eq!(ExperimentKind::parse("beta"), None);
    }

    #[test]
    fn config_validation() {
        for kind in ExperimentKind::ALL {
            ExperimentConfig::default_for(kind).validate().unwrap();
        }
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::AlphaSweep);
        cfg.n_test = 50;
        assert!(matches!(cfg.validate(), Err(HbiError::Config(_))));
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::NoiseSweep);
        cfg.grid = vec![0.6];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default_for(ExperimentKind::ScalingSweep);
        cfg.grid = vec![4000.0, 2000.0];
        assert!(cfg.validate().is_err());
        cfg.override_seeds(10);
        assert_eq!(cfg.seeds, vec![10, 11, 12]);
    }

    #[test]
    fn config_json_uses_defaults() {
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"schema": 1, "experiment": "alpha_sweep", "grid": [0, 1], "seeds": [4]}"#).unwrap();
        assert_eq!(cfg.n_train, 5000);
        assert_eq!(cfg.task, TaskSpec::Synthetic(SyntheticTask::default()));
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}

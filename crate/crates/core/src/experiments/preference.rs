//! Bradley–Terry sweeps on a synthetic preference task, and direct scoring of ingested pairs.

use std::collections::BTreeMap;

use rand_distr::{Distribution as _, StandardNormal};
use rand::Rng;

use super::{
    objective, AuditRow, AuxChannel, Cell, ExperimentConfig, ExperimentKind, IngestedScores, Primary, SyntheticTask,
    STREAM_AUX, STREAM_CORRUPT, STREAM_HUMAN, STREAM_TASK,
};
use crate::error::{HbiError, Result};
use crate::learners::{dot, fit_bradley_terry, norm, pairwise_accuracy, pairwise_accuracy_by, Against, TrainConfig};
use crate::probcore::{derive_stream, RngStream};
use crate::supervision::{
    apply_decomposition, combine_signals, corrupt_labels, hybrid_score, CombineRule, CorruptionSpec, HybridWeights,
    MixedSignal, PreferencePair, Side,
};

/// Training pairs carrying human and auxiliary scores, and held-out pairs carrying truth.
#[derive(Clone, Debug, PartialEq)]
pub struct PreferenceInstance {
    pub weights: Vec<f64>,
    pub train: Vec<PreferencePair>,
    pub test: Vec<PreferencePair>,
}

fn normal_vec(rng: &mut RngStream, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Unit-norm weights drawn from `rng` unless given.
pub(super) fn task_weights(task: &SyntheticTask, rng: &mut RngStream) -> Vec<f64> {
    match &task.weights {
        Some(w) => w.clone(),
        None => loop {
            let v = normal_vec(rng, task.dim);
            let n = norm(&v);
            if n > 1e-12 {
                break v.iter().map(|x| x / n).collect();
            }
        },
    }
}

pub(super) fn aux_score(aux: &AuxChannel, r: f64, rng: &mut RngStream) -> f64 {
    match aux {
        AuxChannel::Exact => r,
        AuxChannel::Zero => 0.0,
        AuxChannel::Noisy { scale } => {
            let z: f64 = StandardNormal.sample(rng);
            r + scale * z
        }
    }
}

impl PreferenceInstance {
    pub fn build(task: &SyntheticTask, n_train: usize, n_test: usize, seed: u64) -> Result<Self> {
        let spec = task.supervision();
        let mut rng_task = derive_stream(seed, STREAM_TASK);
        let mut rng_h = derive_stream(seed, STREAM_HUMAN);
        let mut rng_a = derive_stream(seed, STREAM_AUX);
        let w = task_weights(task, &mut rng_task);
        let mut train = Vec::with_capacity(n_train);
        for i in 0..n_train {
            let fa = normal_vec(&mut rng_task, task.dim);
            let fb = normal_vec(&mut rng_task, task.dim);
            let (ra, rb) = (dot(&w, &fa), dot(&w, &fb));
            let ha = apply_decomposition(ra, &fa, &spec, &mut rng_h)?.value;
            let hb = apply_decomposition(rb, &fb, &spec, &mut rng_h)?.value;
            let label = match Side::from_diff(ha - hb) {
                Some(s) => s,
                None if rng_h.random::<bool>() => Side::A,
                None => Side::B,
            };
            let mut p = PreferencePair::new(format!("train-{i}"), label);
            p.s_h_a = Some(ha);
            p.s_h_b = Some(hb);
            p.s_a_a = Some(aux_score(&task.aux, ra, &mut rng_a));
            p.s_a_b = Some(aux_score(&task.aux, rb, &mut rng_a));
            p.truth = Side::from_diff(ra - rb);
            p.features_a = fa;
            p.features_b = fb;
            train.push(p);
        }
        let mut test = Vec::with_capacity(n_test);
        for i in 0..n_test {
            let fa = normal_vec(&mut rng_task, task.dim);
            let fb = normal_vec(&mut rng_task, task.dim);
            let truth = Side::from_diff(dot(&w, &fa) - dot(&w, &fb)).unwrap_or(Side::A);
            let mut p = PreferencePair::new(format!("test-{i}"), truth);
            p.truth = Some(truth);
            p.features_a = fa;
            p.features_b = fb;
            test.push(p);
        }
        Ok(PreferenceInstance { weights: w, train, test })
    }
}

/// Side of `α·|ΔS_H|·ℓ + (1 − α)·λ·ΔS_A`, where `ℓ = ±1` is the (possibly corrupted)
/// human label. A zero mix keeps the human label, so `α = 1` reproduces it exactly.
pub fn hybrid_label(alpha: f64, lambda: f64, label: Side, diff_h: f64, diff_a: f64) -> Result<Side> {
    let w = HybridWeights::two_channel(alpha, lambda)?;
    let mix = hybrid_score(&w, diff_h.abs() * label.sign(), diff_a);
    Ok(Side::from_diff(mix).unwrap_or(label))
}

fn relabel(pairs: &[PreferencePair], alpha: f64, lambda: f64) -> Result<Vec<PreferencePair>> {
    pairs
        .iter()
        .map(|p| {
            let dh = p.s_h_a.unwrap_or(0.0) - p.s_h_b.unwrap_or(0.0);
            let da = p.s_a_a.unwrap_or(0.0) - p.s_a_b.unwrap_or(0.0);
            let mut q = p.clone();
            q.label = hybrid_label(alpha, lambda, p.label, dh, da)?;
            Ok(q)
        })
        .collect()
}

fn train_config(cfg: &ExperimentConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed: cfg.train.seed.wrapping_add(seed),
        ..cfg.train
    }
}

/// Accuracy against truth, scale-free alignment error, raw weight error and score distortion.
fn model_metrics(w_hat: &[f64], w: &[f64], test: &[PreferencePair]) -> Result<BTreeMap<String, f64>> {
    let accuracy = pairwise_accuracy(|x| dot(w_hat, x), test, Against::Truth)?;
    let nn = dot(w_hat, w_hat);
    let c = if nn > 0.0 { dot(w_hat, w) / nn } else { 0.0 };
    let scaled: Vec<f64> = w_hat.iter().map(|v| c * v).collect();
    let gap: Vec<f64> = scaled.iter().zip(w).map(|(a, b)| a - b).collect();
    let raw: Vec<f64> = w_hat.iter().zip(w).map(|(a, b)| a - b).collect();
    let mut sq = 0.0;
    for p in test {
        sq += dot(&gap, &p.features_a).powi(2) + dot(&gap, &p.features_b).powi(2);
    }
    let distortion = (sq / (2 * test.len()) as f64).sqrt();
    Ok(BTreeMap::from([
        ("accuracy".to_string(), accuracy),
        ("alignment_error".to_string(), norm(&gap)),
        ("alignment_error_raw".to_string(), norm(&raw)),
        ("distortion_norm".to_string(), distortion),
    ]))
}

fn fit_and_measure(
    cfg: &ExperimentConfig,
    inst: &PreferenceInstance,
    pairs: &[PreferencePair],
    seed: u64,
) -> Result<BTreeMap<String, f64>> {
    let fit = fit_bradley_terry(pairs, &train_config(cfg, seed))?;
    model_metrics(&fit.model.weights, &inst.weights, &inst.test)
}

pub(super) fn hybrid_cell(cfg: &ExperimentConfig, task: &SyntheticTask, p: usize, seed: u64) -> Result<Cell> {
    let param = cfg.grid[p];
    let (alpha, lambda) = match cfg.experiment {
        ExperimentKind::LambdaAblation => (cfg.options.alpha, param),
        _ => (param, cfg.options.lambda),
    };
    let inst = PreferenceInstance::build(task, cfg.n_train, cfg.n_test, seed)?;
    let pairs = relabel(&inst.train, alpha, lambda)?;
    Ok(Cell {
        param,
        param_index: p,
        seed,
        metrics: fit_and_measure(cfg, &inst, &pairs, seed)?,
    })
}

/// Metrics of a model trained on the raw human labels, with no mixing step.
pub fn human_only_cell(cfg: &ExperimentConfig, seed: u64) -> Result<BTreeMap<String, f64>> {
    let task = match &cfg.task {
        super::TaskSpec::Synthetic(t) => t,
        super::TaskSpec::Ingested { .. } => {
            return Err(HbiError::InvalidSpec("human-only training needs a synthetic task".into()))
        }
    };
    let inst = PreferenceInstance::build(task, cfg.n_train, cfg.n_test, seed)?;
    fit_and_measure(cfg, &inst, &inst.train, seed)
}

pub(super) fn noise_cell(cfg: &ExperimentConfig, task: &SyntheticTask, p: usize, seed: u64) -> Result<Cell> {
    let gamma = cfg.grid[p];
    let inst = PreferenceInstance::build(task, cfg.n_train, cfg.n_test, seed)?;
    let corrupted = corrupt_labels(&inst.train, CorruptionSpec::new(gamma)?, &mut derive_stream(seed, STREAM_CORRUPT));
    let human = fit_and_measure(cfg, &inst, &corrupted, seed)?;
    let hybrid_pairs = relabel(&corrupted, cfg.options.alpha, cfg.options.lambda)?;
    let hybrid = fit_and_measure(cfg, &inst, &hybrid_pairs, seed)?;
    let (ah, ay) = (human["accuracy"], hybrid["accuracy"]);
    Ok(Cell {
        param: gamma,
        param_index: p,
        seed,
        metrics: BTreeMap::from([
            ("accuracy_human".to_string(), ah),
            ("accuracy_hybrid".to_string(), ay),
            ("hybrid_gain".to_string(), ay - ah),
            ("alignment_error_human".to_string(), human["alignment_error"]),
            ("alignment_error_hybrid".to_string(), hybrid["alignment_error"]),
        ]),
    })
}

fn side_score(pair: &PreferencePair, primary: Primary, side: Side) -> Option<f64> {
    match (primary, side) {
        (Primary::H, Side::A) => pair.s_h_a,
        (Primary::H, Side::B) => pair.s_h_b,
        (Primary::M, Side::A) => pair.s_m_a,
        (Primary::M, Side::B) => pair.s_m_b,
    }
}

fn mixed(pair: &PreferencePair, primary: Primary, side: Side, alpha: f64, lambda: f64) -> Result<f64> {
    let s = side_score(pair, primary, side);
    let aux = match side {
        Side::A => pair.s_a_a,
        Side::B => pair.s_a_b,
    }
    .map(|a| lambda * a);
    let (w, s_h, s_m) = match primary {
        Primary::H => (HybridWeights::new(alpha, 0.0, 1.0 - alpha, lambda)?, s, None),
        Primary::M => (HybridWeights::new(0.0, alpha, 1.0 - alpha, lambda)?, None, s),
    };
    match combine_signals(CombineRule::WeightedSum, &w, s_h, s_m, aux)? {
        MixedSignal::Scalar(v) => Ok(v),
        _ => unreachable!("weighted sums are scalar"),
    }
}

fn binary_mixed(pair: &PreferencePair, primary: Primary, side: Side, alpha: f64) -> Result<f64> {
    let name = match primary {
        Primary::H => "s_h",
        Primary::M => "s_m",
    };
    let s = side_score(pair, primary, side).ok_or_else(|| HbiError::MissingSignal(name.into()))?;
    if alpha == 1.0 {
        return Ok(s);
    }
    let aux = match side {
        Side::A => pair.s_a_a,
        Side::B => pair.s_a_b,
    }
    .ok_or_else(|| HbiError::MissingSignal("s_a".into()))?;
    crate::supervision::hybrid_score_binary(alpha, s, aux)
}

pub(super) fn target_of(pairs: &[PreferencePair]) -> Against {
    if pairs.iter().all(|p| p.truth.is_some()) {
        Against::Truth
    } else {
        Against::Label
    }
}

fn scored_accuracy<F>(pairs: &[PreferencePair], f: F) -> Result<f64>
where
    F: Fn(&PreferencePair, Side) -> Result<f64>,
{
    let diffs: Vec<f64> = pairs
        .iter()
        .map(|p| Ok(f(p, Side::A)? - f(p, Side::B)?))
        .collect::<Result<_>>()?;
    let index: BTreeMap<&str, f64> = pairs.iter().map(|p| p.pair_id.as_str()).zip(diffs).collect();
    pairwise_accuracy_by(|p| index[p.pair_id.as_str()], pairs, target_of(pairs))
}

pub(super) fn ingested_cells(
    cfg: &ExperimentConfig,
    scores: &IngestedScores,
    primary: Primary,
    jobs: &[(usize, u64)],
    audit: &mut Vec<AuditRow>,
) -> Result<Vec<Cell>> {
    let pairs = &scores.pairs;
    let mut cells = Vec::with_capacity(jobs.len());
    for &(p, seed) in jobs {
        let param = cfg.grid[p];
        let metrics = match cfg.experiment {
            ExperimentKind::AlphaSweep | ExperimentKind::LambdaAblation => {
                let (alpha, lambda) = if cfg.experiment == ExperimentKind::AlphaSweep {
                    (param, cfg.options.lambda)
                } else {
                    (cfg.options.alpha, param)
                };
                let acc = scored_accuracy(pairs, |q, s| mixed(q, primary, s, alpha, lambda))?;
                BTreeMap::from([("accuracy".to_string(), acc)])
            }
            ExperimentKind::SufficiencyProxy => {
                let acc = scored_accuracy(pairs, |q, s| binary_mixed(q, primary, s, param))?;
                BTreeMap::from([("accuracy".to_string(), acc)])
            }
            ExperimentKind::NormalizationDegeneracy => {
                let (m, rows) = objective::normalization_metrics(cfg, pairs, primary, param, seed)?;
                audit.extend(rows);
                m
            }
            ExperimentKind::NoiseSweep | ExperimentKind::ScalingSweep => {
                return Err(HbiError::InvalidSpec(format!(
                    "{} needs a synthetic task with known truth",
                    cfg.experiment.name()
                )))
            }
        };
        cells.push(Cell {
            param,
            param_index: p,
            seed,
            metrics,
        });
    }
    Ok(cells)
}

//! Excess risk of least-squares regression on mixed supervision as the sample grows.
//!
//! Features are `N(0, I)`, so the population excess risk of `ŵ` is `‖ŵ − w‖²` and the
//! population solution on human targets is `κ·w + δ`, where `κ = E[Y*·q(Y*)]/‖w‖²`.

use std::collections::BTreeMap;

use rand_distr::{Distribution as _, StandardNormal};
use statrs::distribution::{Continuous, Normal};

use super::preference::{aux_score, task_weights};
use super::{
    AuxChannel, Cell, ExperimentConfig, Regime, SyntheticTask, STREAM_AUX, STREAM_HUMAN, STREAM_MODEL, STREAM_MODEL_NOISE, STREAM_TASK,
};
use crate::error::{HbiError, Result};
use crate::learners::{dot, fit_least_squares, norm};
use crate::probcore::{derive_stream, RngStream};
use crate::supervision::{apply_decomposition, BiasSpec, NoiseSpec, QuantizerSpec, SupervisionSpec};

/// `E[Y·q(Y)] / σ²` for `Y ~ N(0, σ²)`; outer bins extend to `±∞`.
pub fn quantizer_gain(q: &QuantizerSpec, sigma: f64) -> f64 {
    if q.is_identity() || sigma <= 0.0 {
        return 1.0;
    }
    let phi = Normal::standard();
    let reps = q.representatives();
    let n = reps.len();
    let mut total = 0.0;
    for (k, r) in reps.iter().enumerate() {
        let a = if k == 0 { f64::NEG_INFINITY } else { q.edges[k] };
        let b = if k + 1 == n { f64::INFINITY } else { q.edges[k + 1] };
        let pa = if a.is_finite() { phi.pdf(a / sigma) } else { 0.0 };
        let pb = if b.is_finite() { phi.pdf(b / sigma) } else { 0.0 };
        total += r * sigma * (pa - pb);
    }
    total / (sigma * sigma)
}

fn population_human(spec: &SupervisionSpec, w: &[f64]) -> Result<Vec<f64>> {
    if !matches!(spec.noise, NoiseSpec::None | NoiseSpec::Gaussian { .. }) {
        return Err(HbiError::InvalidSpec("scaling floor needs zero-mean Gaussian noise or none".into()));
    }
    let kappa = quantizer_gain(&spec.quantizer, norm(w));
    let mut out: Vec<f64> = w.iter().map(|v| kappa * v).collect();
    match &spec.bias {
        BiasSpec::None => {}
        BiasSpec::Linear { delta } => {
            for (o, d) in out.iter_mut().zip(delta) {
                *o += d;
            }
        }
        BiasSpec::Table { .. } => {
            return Err(HbiError::InvalidSpec("scaling floor needs a linear or zero bias".into()));
        }
    }
    Ok(out)
}

/// Population excess risk `‖(h + m)·w_H + a·w_A − w‖²` of a regime, where `w_H` and `w_A`
/// are the population least-squares solutions on human and auxiliary targets.
pub fn analytic_floor(spec: &SupervisionSpec, aux: &AuxChannel, w: &[f64], regime: &Regime) -> Result<f64> {
    let w_h = population_human(spec, w)?;
    let c_a = match aux {
        AuxChannel::Zero => 0.0,
        AuxChannel::Exact | AuxChannel::Noisy { .. } => 1.0,
    };
    let gap: Vec<f64> = (0..w.len())
        .map(|i| (regime.h + regime.m) * w_h[i] + regime.a * c_a * w[i] - w[i])
        .collect();
    Ok(dot(&gap, &gap))
}

fn check_regime(r: &Regime) -> Result<()> {
    let ok = [r.h, r.m, r.a].iter().all(|v| (0.0..=1.0).contains(v)) && ((r.h + r.m + r.a) - 1.0).abs() < 1e-12;
    if ok {
        Ok(())
    } else {
        Err(HbiError::InvalidSpec(format!("regime `{}` weights must be in [0, 1] and sum to 1", r.name)))
    }
}

fn human_sample(
    task: &SyntheticTask,
    spec: &SupervisionSpec,
    w: &[f64],
    n: usize,
    rng_x: &mut RngStream,
    rng_h: &mut RngStream,
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..task.dim).map(|_| StandardNormal.sample(&mut *rng_x)).collect();
        ys.push(apply_decomposition(dot(w, &x), &x, spec, rng_h)?.value);
        xs.push(x);
    }
    Ok((xs, ys))
}

pub(super) fn scaling_cell(cfg: &ExperimentConfig, task: &SyntheticTask, p: usize, seed: u64) -> Result<Cell> {
    let n = cfg.grid[p] as usize;
    let spec = task.supervision();
    let mut rng_task = derive_stream(seed, STREAM_TASK);
    let mut rng_h = derive_stream(seed, STREAM_HUMAN);
    let mut rng_a = derive_stream(seed, STREAM_AUX);
    let mut rng_mx = derive_stream(seed, STREAM_MODEL);
    let mut rng_mh = derive_stream(seed, STREAM_MODEL_NOISE);
    let w = task_weights(task, &mut rng_task);
    let (xs, s_h) = human_sample(task, &spec, &w, n, &mut rng_task, &mut rng_h)?;
    // The model channel is a least-squares fit on an independent human sample of the same size.
    let (mx, my) = human_sample(task, &spec, &w, n, &mut rng_mx, &mut rng_mh)?;
    let model = fit_least_squares(&mx, &my, 0.0)?;
    let s_a: Vec<f64> = xs.iter().map(|x| aux_score(&task.aux, dot(&w, x), &mut rng_a)).collect();

    let mut metrics = BTreeMap::new();
    let base = Regime {
        name: "h".into(),
        h: 1.0,
        m: 0.0,
        a: 0.0,
    };
    metrics.insert("floor_h".to_string(), analytic_floor(&spec, &task.aux, &w, &base)?);
    for r in &cfg.options.regimes {
        check_regime(r)?;
        let targets: Vec<f64> = (0..n)
            .map(|i| r.h * s_h[i] + r.m * model.score(&xs[i]) + r.a * s_a[i])
            .collect();
        let fit = fit_least_squares(&xs, &targets, 0.0)?;
        let gap: Vec<f64> = fit.weights.iter().zip(&w).map(|(a, b)| a - b).collect();
        metrics.insert(format!("excess_{}", r.name), dot(&gap, &gap));
        metrics.insert(format!("floor_{}", r.name), analytic_floor(&spec, &task.aux, &w, r)?);
    }
    Ok(Cell {
        param: cfg.grid[p],
        param_index: p,
        seed,
        metrics,
    })
}

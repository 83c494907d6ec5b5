//! Numerical witnesses for the human-bounded-intelligence bounds.
//!
//! Each witness builds a small instance, computes the measured quantity and the
//! bound exactly or by brute force, and returns a [`WitnessReport`] carrying a
//! [`FloorCertificate`].

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution as _, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HbiError, Result};
use crate::infotheory::{digest_of, info_floor_certificate, DistortionMatrix, FloorCertificate, FloorComponents, FloorKind};
use crate::learners::{
    bayes_optimal_from_joint, dot, expected_risk, fit_least_squares, gibbs_posterior, FiniteHypothesisClass, Loss,
};
use crate::probcore::{derive_stream, index_symbols, joint_from_chain, ChainStructure, Channel, Distribution, RngStream};
use crate::supervision::{apply_decomposition, NoiseSpec, SupervisionSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TheoremId {
    Hbi,
    Operator,
    Pacbayes,
    Info,
    Causal,
    Categorical,
    Rlhf,
}

impl TheoremId {
    pub const ALL: [TheoremId; 7] = [
        TheoremId::Hbi,
        TheoremId::Operator,
        TheoremId::Pacbayes,
        TheoremId::Info,
        TheoremId::Causal,
        TheoremId::Categorical,
        TheoremId::Rlhf,
    ];

    /// Witnesses executed by [`run_all`]. The information witness runs on demand.
    pub const SUITE: [TheoremId; 6] = [
        TheoremId::Hbi,
        TheoremId::Operator,
        TheoremId::Pacbayes,
        TheoremId::Causal,
        TheoremId::Categorical,
        TheoremId::Rlhf,
    ];

    pub fn kind(self) -> FloorKind {
        match self {
            TheoremId::Hbi => FloorKind::HbiGamma,
            TheoremId::Operator => FloorKind::Operator,
            TheoremId::Pacbayes => FloorKind::Pacbayes,
            TheoremId::Info => FloorKind::Info,
            TheoremId::Causal => FloorKind::Causal,
            TheoremId::Categorical => FloorKind::Categorical,
            TheoremId::Rlhf => FloorKind::RlhfGap,
        }
    }
}

/// One point of a convergence series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub at: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub theorem_id: TheoremId,
    pub certificate: FloorCertificate,
    /// Measured quantity.
    pub lhs: f64,
    /// Theoretical bound.
    pub rhs: f64,
    pub satisfied: bool,
    pub instance_digest: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<SeriesPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// Flag set when a non-constant bias leaves the optimum where it was.
pub const FLAG_OPTIMUM_UNMOVED: &str = "bias did not move the optimum";
/// Flag set when the bias is constant and the gap theorem does not apply.
pub const FLAG_CONSTANT_BIAS: &str = "degenerate: bias is constant";
pub const FLAG_FACTORIZABLE: &str = "factorizable";
pub const FLAG_SUFFICIENT: &str = "sufficient supervision: zero floor";

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / k;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k;
    (mean, (var / k).sqrt())
}

/// Linear-Gaussian instance `Y* = w*ᵀX`, `S = Y* + δᵀX + ε`, `X ~ N(0, I)`.
///
/// Least squares on `S` converges to `w* + δ`, so the excess risk against
/// `Y*` tends to `‖δ‖²`. The tail is every run at the two largest sample sizes.
pub fn hbi_floor_witness(
    delta: &[f64],
    sigma_noise: f64,
    n_grid: &[usize],
    seeds: usize,
    base_seed: u64,
) -> Result<WitnessReport> {
    let d = delta.len();
    if d == 0 || n_grid.is_empty() || seeds == 0 || !(sigma_noise >= 0.0) {
        return Err(HbiError::InvalidSpec(
            "need a nonempty bias vector, sample sizes, seeds and a nonnegative noise scale".into(),
        ));
    }
    if n_grid.iter().any(|&n| n < d) {
        return Err(HbiError::InvalidSpec(format!("every sample size must be at least {d}")));
    }
    let w_star: Vec<f64> = (0..d).map(|k| 1.0 / (k as f64 + 1.0)).collect();
    let gamma: f64 = dot(delta, delta);

    let mut per_n: Vec<Vec<f64>> = Vec::with_capacity(n_grid.len());
    for (ni, &n) in n_grid.iter().enumerate() {
        let runs: Result<Vec<f64>> = (0..seeds)
            .into_par_iter()
            .map(|s| {
                let mut rng = derive_stream(base_seed, (ni * seeds + s) as u64);
                let mut xs = Vec::with_capacity(n);
                let mut ys = Vec::with_capacity(n);
                for _ in 0..n {
                    let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    ys.push(dot(&w_star, &x) + dot(delta, &x) + sigma_noise * eps);
                    xs.push(x);
                }
                let fit = fit_least_squares(&xs, &ys, 0.0)?;
                Ok(fit
                    .weights
                    .iter()
                    .zip(&w_star)
                    .map(|(a, b)| (a - b).powi(2))
                    .sum())
            })
            .collect();
        per_n.push(runs?);
    }
    let trace = n_grid
        .iter()
        .zip(&per_n)
        .map(|(&n, runs)| SeriesPoint {
            at: n as f64,
            value: mean_and_se(runs).0,
        })
        .collect();
    let tail: Vec<f64> = per_n.iter().rev().take(2).flatten().copied().collect();
    let (tail_mean, tail_se) = mean_and_se(&tail);
    let digest = digest_of(&(delta, sigma_noise, n_grid, seeds, base_seed));
    let cert = FloorCertificate::new(FloorKind::HbiGamma, gamma, digest.clone())?
        .with_components(FloorComponents {
            noise: 0.0,
            pref: gamma,
            sem: 0.0,
        })?
        .with_detail("tail_mean", tail_mean)
        .with_detail("tail_se", tail_se);
    let mut flags = Vec::new();
    if gamma == 0.0 {
        flags.push(FLAG_SUFFICIENT.to_string());
    }
    Ok(WitnessReport {
        theorem_id: TheoremId::Hbi,
        certificate: cert,
        lhs: tail_mean,
        rhs: gamma,
        satisfied: tail_mean >= gamma - 3.0 * tail_se,
        instance_digest: digest,
        trace,
        flags,
    })
}

/// Relative residual at which power iteration stops.
pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 1_000_000;

fn to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let m = rows.len();
    let k = rows.first().map(Vec::len).unwrap_or(0);
    if m == 0 || k == 0 || rows.iter().any(|r| r.len() != k) {
        return Err(HbiError::Shape("matrix must be rectangular and nonempty".into()));
    }
    Ok(DMatrix::from_fn(m, k, |i, j| rows[i][j]))
}

/// Largest singular value by power iteration on `AᵀA`.
pub fn spectral_norm(rows: &[Vec<f64>]) -> Result<f64> {
    let a = to_matrix(rows)?;
    let ata = a.transpose() * &a;
    let k = ata.ncols();
    if ata.iter().all(|v| *v == 0.0) {
        return Ok(0.0);
    }
    let mut starts: Vec<nalgebra::DVector<f64>> =
        vec![nalgebra::DVector::from_fn(k, |i, _| 1.0 + 0.1 * i as f64)];
    starts.extend((0..k).map(|i| nalgebra::DVector::from_fn(k, |j, _| if i == j { 1.0 } else { 0.0 })));
    for start in starts {
        let mut v = start.normalize();
        let mut lambda = 0.0;
        let mut residual = f64::INFINITY;
        for _ in 0..POWER_MAX_ITER {
            let u = &ata * &v;
            lambda = v.dot(&u);
            if u.norm() == 0.0 {
                break;
            }
            residual = (&u - &v * lambda).norm();
            if residual <= POWER_TOL * lambda.abs() {
                return Ok(lambda.max(0.0).sqrt());
            }
            v = u.normalize();
        }
        if lambda > 0.0 {
            return Err(HbiError::NonConvergence {
                iterations: POWER_MAX_ITER,
                lower: (lambda - residual).max(0.0).sqrt(),
                upper: (lambda + residual).sqrt(),
            });
        }
    }
    Err(HbiError::NonConvergence {
        iterations: POWER_MAX_ITER,
        lower: 0.0,
        upper: f64::INFINITY,
    })
}

/// Default sample sizes for the operator witness, `1, 10, …, 10⁹`.
pub fn default_operator_grid() -> Vec<usize> {
    (0..=9).map(|k| 10usize.pow(k)).collect()
}

/// `T_n = t_h + E/n` with `E` the all-ones matrix scaled to unit spectral norm.
/// Checks `|‖T_n − t*‖₂ − ‖B_H‖₂| ≤ 1/n` at every `n`; the measured limit is
/// the value at the largest `n`.
pub fn operator_bias_witness(t_star: &[Vec<f64>], t_h: &[Vec<f64>], n_grid: &[usize]) -> Result<WitnessReport> {
    let a = to_matrix(t_star)?;
    let b = to_matrix(t_h)?;
    if a.shape() != b.shape() {
        return Err(HbiError::Shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    if n_grid.is_empty() || n_grid.contains(&0) {
        return Err(HbiError::InvalidSpec("sample sizes must be positive".into()));
    }
    let (m, k) = a.shape();
    let bias: Vec<Vec<f64>> = (0..m).map(|i| (0..k).map(|j| b[(i, j)] - a[(i, j)]).collect()).collect();
    let rhs = spectral_norm(&bias)?;
    let e = 1.0 / ((m * k) as f64).sqrt();
    let mut trace = Vec::with_capacity(n_grid.len());
    let mut satisfied = true;
    for &n in n_grid {
        let diff: Vec<Vec<f64>> = bias.iter().map(|r| r.iter().map(|v| v + e / n as f64).collect()).collect();
        let val = spectral_norm(&diff)?;
        satisfied &= (val - rhs).abs() <= 1.0 / n as f64 + 1e-9;
        trace.push(SeriesPoint { at: n as f64, value: val });
    }
    let lhs = trace.last().map(|p| p.value).unwrap_or(rhs);
    let digest = digest_of(&(t_star, t_h, n_grid));
    Ok(WitnessReport {
        theorem_id: TheoremId::Operator,
        certificate: FloorCertificate::new(FloorKind::Operator, rhs, digest.clone())?,
        lhs,
        rhs,
        satisfied,
        instance_digest: digest,
        trace,
        flags: if rhs == 0.0 { vec![FLAG_SUFFICIENT.to_string()] } else { Vec::new() },
    })
}

/// `β ∈ {0, 1, 10, …, 10⁶}`.
pub fn default_beta_grid() -> Vec<f64> {
    std::iter::once(0.0).chain((0..=6).map(|k| 10f64.powi(k))).collect()
}

/// Losses within this of the minimum count as tied minimizers.
pub const ARGMIN_TOL: f64 = 1e-12;

/// Gibbs posteriors under a uniform prior concentrate on the `L_H`
/// minimizers, whose true risk exceeds `min L*` by `γ^PAC`.
pub fn pacbayes_floor_witness(class: &FiniteHypothesisClass, beta_grid: &[f64]) -> Result<WitnessReport> {
    if class.is_empty() || beta_grid.is_empty() {
        return Err(HbiError::EmptyInstance);
    }
    let min_h = class.losses_h.iter().cloned().fold(f64::INFINITY, f64::min);
    let min_star = class.losses_star.iter().cloned().fold(f64::INFINITY, f64::min);
    let gamma = class
        .losses_h
        .iter()
        .zip(&class.losses_star)
        .filter(|(h, _)| **h - min_h <= ARGMIN_TOL)
        .map(|(_, s)| s - min_star)
        .fold(f64::INFINITY, f64::min);
    let prior = Distribution::uniform(class.support())?;
    let mut trace = Vec::with_capacity(beta_grid.len());
    for &beta in beta_grid {
        let post = gibbs_posterior(class, beta, &prior)?;
        trace.push(SeriesPoint {
            at: beta,
            value: expected_risk(&post, &class.losses_star)?,
        });
    }
    let lhs = trace.last().expect("nonempty grid").value;
    let rhs = min_star + gamma;
    let digest = digest_of(&(class, beta_grid));
    Ok(WitnessReport {
        theorem_id: TheoremId::Pacbayes,
        certificate: FloorCertificate::new(FloorKind::Pacbayes, gamma.max(0.0), digest.clone())?
            .with_detail("min_l_star", min_star),
        lhs,
        rhs,
        satisfied: lhs >= rhs - 1e-6,
        instance_digest: digest,
        trace,
        flags: if gamma == 0.0 { vec![FLAG_SUFFICIENT.to_string()] } else { Vec::new() },
    })
}

/// Compares the best achievable distortion from `S` with the certified
/// information floor `c·(R⁻¹(I(Y*; S)) − D*)`.
pub fn info_witness(
    source: &Distribution,
    ch: &Channel,
    dist: &DistortionMatrix,
    c_link: f64,
) -> Result<WitnessReport> {
    let cert = info_floor_certificate(source, ch, dist, c_link)?;
    let joint = joint_from_chain(source, std::slice::from_ref(ch), ChainStructure::Chain, &["y", "s"])?;
    let ny = source.len();
    let ns = ch.n_outputs();
    let mut best = 0.0;
    for s in 0..ns {
        let col: Vec<f64> = (0..ny).map(|y| joint.prob_at(&[y, s])).collect();
        best += (0..dist.n_reproduction())
            .map(|r| col.iter().zip(&dist.rows).map(|(p, row)| p * row[r]).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
    }
    let d_star = dist.d_star(source);
    let lhs = c_link * (best - d_star);
    let rhs = cert.value;
    let slack = c_link * cert.details.get("inverse_error_bound").copied().unwrap_or(0.0) + 1e-6;
    let digest = cert.inputs_digest.clone();
    let flags = if rhs == 0.0 { vec![FLAG_SUFFICIENT.to_string()] } else { Vec::new() };
    Ok(WitnessReport {
        theorem_id: TheoremId::Info,
        certificate: cert.with_detail("best_distortion", best),
        lhs,
        rhs,
        satisfied: lhs >= rhs - slack,
        instance_digest: digest,
        trace: Vec::new(),
        flags,
    })
}

/// Largest estimator table the causal witness will enumerate.
pub const MAX_ESTIMATORS: usize = 1 << 20;

/// Brute-force minimum 0-1 risk over every map `S → Ŷ`, against the Bayes
/// risk and the ambiguity of rows the channel merges.
pub fn causal_witness(channel: &Channel, source: &Distribution) -> Result<WitnessReport> {
    if source.len() != channel.n_inputs() {
        return Err(HbiError::Shape(format!(
            "source of size {} for a channel with {} inputs",
            source.len(),
            channel.n_inputs()
        )));
    }
    let groups: Vec<Vec<usize>> = channel
        .merged_row_groups(1e-12)
        .into_iter()
        .filter(|g| g.len() >= 2)
        .collect();
    if groups.is_empty() {
        return Err(HbiError::NotNonInvertible);
    }
    let ny = source.len();
    let ns = channel.n_outputs();
    let total = (ny as f64).powi(ns as i32);
    if total > MAX_ESTIMATORS as f64 {
        return Err(HbiError::InvalidSpec(format!("{total} estimators is too many to enumerate")));
    }
    let joint = joint_from_chain(source, std::slice::from_ref(channel), ChainStructure::Chain, &["y", "s"])?;
    // Risk of guessing ŷ at signal s, for every pair.
    let cost: Vec<Vec<f64>> = (0..ns)
        .map(|s| {
            let col: Vec<f64> = (0..ny).map(|y| joint.prob_at(&[y, s])).collect();
            let mass: f64 = col.iter().sum();
            (0..ny).map(|g| mass - col[g]).collect()
        })
        .collect();
    let mut lhs = f64::INFINITY;
    let mut table = vec![0usize; ns];
    loop {
        let risk: f64 = table.iter().enumerate().map(|(s, g)| cost[s][*g]).sum();
        lhs = lhs.min(risk);
        let mut pos = 0;
        while pos < ns {
            table[pos] += 1;
            if table[pos] < ny {
                break;
            }
            table[pos] = 0;
            pos += 1;
        }
        if pos == ns {
            break;
        }
    }
    let rhs = bayes_optimal_from_joint(&joint, "s", "y", Loss::ZeroOne)?.bayes_risk;
    let p = source.probs();
    let region_bound: f64 = groups
        .iter()
        .map(|g| {
            let mass: f64 = g.iter().map(|&i| p[i]).sum();
            let top = g.iter().map(|&i| p[i]).fold(0.0, f64::max);
            mass - top
        })
        .sum();
    let digest = digest_of(&(channel, source));
    let cert = FloorCertificate::new(FloorKind::Causal, rhs, digest.clone())?.with_detail("region_bound", region_bound);
    Ok(WitnessReport {
        theorem_id: TheoremId::Causal,
        certificate: cert,
        lhs,
        rhs,
        satisfied: (lhs - rhs).abs() <= 1e-12 && rhs >= region_bound - 1e-12,
        instance_digest: digest,
        trace: Vec::new(),
        flags: Vec::new(),
    })
}

/// Objects with losses, partitioned by what the human functor can tell apart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotientInstance {
    pub losses: Vec<f64>,
    pub classes: Vec<Vec<usize>>,
}

impl QuotientInstance {
    pub fn validate(&self) -> Result<()> {
        if self.losses.is_empty() || self.classes.is_empty() {
            return Err(HbiError::EmptyInstance);
        }
        let mut seen = vec![false; self.losses.len()];
        for &i in self.classes.iter().flatten() {
            if i >= seen.len() || seen[i] {
                return Err(HbiError::InvalidSpec(format!("object {i} is missing or repeated")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) || self.classes.iter().any(Vec::is_empty) {
            return Err(HbiError::InvalidSpec("classes must partition the objects".into()));
        }
        if self.losses.iter().any(|l| !l.is_finite()) {
            return Err(HbiError::InvalidSpec("losses must be finite".into()));
        }
        Ok(())
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Class-constant predictors under absolute loss cannot beat half of the
/// within-class loss range on the extremal pair.
pub fn categorical_witness(inst: &QuotientInstance) -> Result<WitnessReport> {
    inst.validate()?;
    let mut lhs: f64 = 0.0;
    let mut rhs: f64 = 0.0;
    let mut brute: f64 = 0.0;
    let mut factorizable = true;
    for class in &inst.classes {
        let mut vals: Vec<f64> = class.iter().map(|&i| inst.losses[i]).collect();
        vals.sort_by(f64::total_cmp);
        let (lo, hi) = (vals[0], vals[vals.len() - 1]);
        factorizable &= hi == lo;
        let t = median(&vals);
        lhs = lhs.max((t - lo).abs().max((hi - t).abs()));
        rhs = rhs.max(0.5 * (hi - lo));
        let mut candidates = vals.clone();
        for a in 0..vals.len() {
            for b in a + 1..vals.len() {
                candidates.push(0.5 * (vals[a] + vals[b]));
            }
        }
        let minimax = candidates
            .iter()
            .map(|c| vals.iter().map(|v| (v - c).abs()).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min);
        brute = brute.max(minimax);
    }
    let digest = digest_of(inst);
    let cert = FloorCertificate::new(FloorKind::Categorical, rhs, digest.clone())?.with_detail("minimax_brute_force", brute);
    Ok(WitnessReport {
        theorem_id: TheoremId::Categorical,
        certificate: cert,
        lhs,
        rhs,
        satisfied: lhs >= rhs - 1e-12 && (brute - rhs).abs() <= 1e-12,
        instance_digest: digest,
        trace: Vec::new(),
        flags: if factorizable { vec![FLAG_FACTORIZABLE.to_string()] } else { Vec::new() },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyGameInstance {
    pub policies: Vec<String>,
    pub u_star: Vec<f64>,
    pub b_h: Vec<f64>,
}

impl PolicyGameInstance {
    pub fn new(u_star: Vec<f64>, b_h: Vec<f64>) -> Result<Self> {
        let policies = (0..u_star.len()).map(|i| format!("pi{}", i + 1)).collect();
        let inst = PolicyGameInstance { policies, u_star, b_h };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.policies.len();
        if n < 2 || self.u_star.len() != n || self.b_h.len() != n {
            return Err(HbiError::Shape("need at least two policies with one utility and bias each".into()));
        }
        if self.u_star.iter().chain(&self.b_h).any(|v| !v.is_finite()) {
            return Err(HbiError::InvalidSpec("utilities and biases must be finite".into()));
        }
        Ok(())
    }
}

/// Index of the maximum, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Utility lost by optimizing `U* + B_H` instead of `U*`.
pub fn rlhf_gap_witness(inst: &PolicyGameInstance) -> Result<WitnessReport> {
    inst.validate()?;
    let u_h: Vec<f64> = inst.u_star.iter().zip(&inst.b_h).map(|(u, b)| u + b).collect();
    let pi_star = argmax(&inst.u_star);
    let pi_h = argmax(&u_h);
    let gap = inst.u_star[pi_star] - inst.u_star[pi_h];
    let constant = inst.b_h.iter().all(|b| *b == inst.b_h[0]);
    let mut flags = Vec::new();
    let satisfied = if constant {
        flags.push(FLAG_CONSTANT_BIAS.to_string());
        gap >= 0.0
    } else if inst.u_star[pi_h] == inst.u_star[pi_star] {
        flags.push(FLAG_OPTIMUM_UNMOVED.to_string());
        gap == 0.0
    } else {
        gap > 0.0
    };
    let digest = digest_of(inst);
    let cert = FloorCertificate::new(FloorKind::RlhfGap, gap, digest.clone())?
        .with_detail("pi_star", (pi_star + 1) as f64)
        .with_detail("pi_h_star", (pi_h + 1) as f64);
    Ok(WitnessReport {
        theorem_id: TheoremId::Rlhf,
        certificate: cert,
        lhs: gap,
        rhs: 0.0,
        satisfied,
        instance_digest: digest,
        trace: Vec::new(),
        flags,
    })
}

/// Regression task with `Y* = x` on an evenly spaced grid of `cells` points in
/// `[0, 1]`, learned by the per-cell mean of the human signal.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularTask {
    pub cells: usize,
    pub samples_per_cell: usize,
    pub seed: u64,
}

impl Default for TabularTask {
    fn default() -> Self {
        TabularTask {
            cells: 1001,
            samples_per_cell: 400,
            seed: 0,
        }
    }
}

fn is_deterministic(spec: &SupervisionSpec) -> bool {
    match &spec.noise {
        NoiseSpec::None => true,
        NoiseSpec::Gaussian { scale } => *scale == 0.0,
        NoiseSpec::Flip { rate } => *rate == 0.0,
        NoiseSpec::FlipMatrix { .. } => false,
    }
}

/// Mean squared distance between the per-cell learner and `Y*`.
pub fn tabular_excess_risk(spec: &SupervisionSpec, task: &TabularTask) -> Result<f64> {
    spec.validate()?;
    if task.cells < 2 || task.samples_per_cell == 0 {
        return Err(HbiError::InvalidSpec("need at least two cells and one sample per cell".into()));
    }
    let n = if is_deterministic(spec) { 1 } else { task.samples_per_cell };
    let mut rng = RngStream::new(task.seed, 0);
    let mut total = 0.0;
    for k in 0..task.cells {
        let x = k as f64 / (task.cells - 1) as f64;
        let mut acc = 0.0;
        for _ in 0..n {
            acc += apply_decomposition(x, &[x], spec, &mut rng)?.value;
        }
        total += (acc / n as f64 - x).powi(2);
    }
    Ok(total / task.cells as f64)
}

/// Splits the measured floor into noise, preference and semantic shares by
/// single-mechanism ablations, rescaled to sum to the full-spec total.
pub fn decompose_floor(spec: &SupervisionSpec, task: &TabularTask) -> Result<FloorCertificate> {
    let total = tabular_excess_risk(spec, task)?;
    let raw = FloorComponents {
        noise: tabular_excess_risk(&spec.noise_only(), task)?,
        pref: tabular_excess_risk(&spec.bias_only(), task)?,
        sem: tabular_excess_risk(&spec.quantizer_only(), task)?,
    };
    let sum = raw.total();
    let scaled = if sum > 0.0 {
        let f = total / sum;
        FloorComponents {
            noise: raw.noise * f,
            pref: raw.pref * f,
            sem: raw.sem * f,
        }
    } else {
        // Only interactions remain; split evenly between active mechanisms.
        let active = [
            !is_deterministic(spec) || !matches!(spec.noise, NoiseSpec::None),
            !spec.bias.is_zero(),
            !spec.quantizer.is_identity(),
        ];
        let k = active.iter().filter(|a| **a).count().max(1) as f64;
        let share = |on: bool| if on { total / k } else { 0.0 };
        if active.iter().any(|a| *a) {
            FloorComponents {
                noise: share(active[0]),
                pref: share(active[1]),
                sem: share(active[2]),
            }
        } else {
            FloorComponents {
                noise: 0.0,
                pref: 0.0,
                sem: total,
            }
        }
    };
    let digest = digest_of(&(spec, task));
    let mut cert = FloorCertificate::new(FloorKind::HbiGamma, total, digest)?.with_components(scaled)?;
    cert.raw_components = Some(raw);
    Ok(cert)
}

/// A witness job for [`run_all`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "theorem", rename_all = "lowercase")]
pub enum WitnessJob {
    Hbi {
        delta: Vec<f64>,
        sigma_noise: f64,
        n_grid: Vec<usize>,
        seeds: usize,
        seed: u64,
    },
    Operator {
        t_star: Vec<Vec<f64>>,
        t_h: Vec<Vec<f64>>,
        n_grid: Vec<usize>,
    },
    Pacbayes {
        class: FiniteHypothesisClass,
        beta_grid: Vec<f64>,
    },
    Info {
        source: Distribution,
        channel: Channel,
        distortion: DistortionMatrix,
        c_link: f64,
    },
    Causal {
        channel: Channel,
        source: Distribution,
    },
    Categorical(QuotientInstance),
    Rlhf(PolicyGameInstance),
}

impl WitnessJob {
    pub fn theorem_id(&self) -> TheoremId {
        match self {
            WitnessJob::Hbi { .. } => TheoremId::Hbi,
            WitnessJob::Operator { .. } => TheoremId::Operator,
            WitnessJob::Pacbayes { .. } => TheoremId::Pacbayes,
            WitnessJob::Info { .. } => TheoremId::Info,
            WitnessJob::Causal { .. } => TheoremId::Causal,
            WitnessJob::Categorical(_) => TheoremId::Categorical,
            WitnessJob::Rlhf(_) => TheoremId::Rlhf,
        }
    }

    pub fn run(&self) -> Result<WitnessReport> {
        match self {
            WitnessJob::Hbi {
                delta,
                sigma_noise,
                n_grid,
                seeds,
                seed,
            } => hbi_floor_witness(delta, *sigma_noise, n_grid, *seeds, *seed),
            WitnessJob::Operator { t_star, t_h, n_grid } => operator_bias_witness(t_star, t_h, n_grid),
            WitnessJob::Pacbayes { class, beta_grid } => pacbayes_floor_witness(class, beta_grid),
            WitnessJob::Info {
                source,
                channel,
                distortion,
                c_link,
            } => info_witness(source, channel, distortion, *c_link),
            WitnessJob::Causal { channel, source } => causal_witness(channel, source),
            WitnessJob::Categorical(inst) => categorical_witness(inst),
            WitnessJob::Rlhf(inst) => rlhf_gap_witness(inst),
        }
    }
}

/// The fixed instance of each witness in the suite.
pub fn fixed_jobs() -> Result<Vec<WitnessJob>> {
    let merged = Channel::new(
        index_symbols(3),
        index_symbols(2),
        vec![vec![0.2, 0.8], vec![0.2, 0.8], vec![1.0, 0.0]],
    )?;
    Ok(vec![
        WitnessJob::Hbi {
            delta: vec![0.5, 0.0],
            sigma_noise: 0.1,
            n_grid: vec![1_000, 10_000, 100_000],
            seeds: 8,
            seed: 0,
        },
        WitnessJob::Operator {
            t_star: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            t_h: vec![vec![1.0, 0.0], vec![0.0, 0.0]],
            n_grid: default_operator_grid(),
        },
        WitnessJob::Pacbayes {
            class: FiniteHypothesisClass::indexed(vec![0.1, 0.2], vec![0.5, 0.0])?,
            beta_grid: default_beta_grid(),
        },
        WitnessJob::Causal {
            channel: merged,
            source: crate::probcore::make_distribution(&[0.3, 0.7, 1.0], index_symbols(3))?,
        },
        WitnessJob::Categorical(QuotientInstance {
            losses: vec![0.0, 1.0, 0.4, 0.4],
            classes: vec![vec![0, 1], vec![2, 3]],
        }),
        WitnessJob::Rlhf(PolicyGameInstance::new(vec![1.0, 0.9], vec![0.0, 0.5])?),
    ])
}

fn random_stochastic_row(rng: &mut RngStream, k: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

fn random_matrix(rng: &mut RngStream, m: usize, k: usize) -> Vec<Vec<f64>> {
    (0..m)
        .map(|_| (0..k).map(|_| StandardNormal.sample(rng)).collect())
        .collect()
}

/// A random instance of `theorem`, deterministic in `rng`.
pub fn random_job(theorem: TheoremId, rng: &mut RngStream) -> Result<WitnessJob> {
    Ok(match theorem {
        TheoremId::Hbi => {
            let d = rng.random_range(1..=3);
            WitnessJob::Hbi {
                delta: (0..d).map(|_| rng.random_range(-0.5..0.5)).collect(),
                sigma_noise: rng.random_range(0.05..0.5),
                n_grid: vec![500, 2_000, 8_000],
                seeds: 16,
                seed: rng.random(),
            }
        }
        TheoremId::Operator => {
            let m = rng.random_range(2..=5);
            let k = rng.random_range(2..=5);
            WitnessJob::Operator {
                t_star: random_matrix(rng, m, k),
                t_h: random_matrix(rng, m, k),
                n_grid: default_operator_grid(),
            }
        }
        TheoremId::Pacbayes => {
            let n = rng.random_range(2..=6);
            // Coarse loss levels make tied minimizers common.
            let lh: Vec<f64> = (0..n).map(|_| rng.random_range(0..4) as f64 / 4.0).collect();
            let ls: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            WitnessJob::Pacbayes {
                class: FiniteHypothesisClass::indexed(lh, ls)?,
                beta_grid: default_beta_grid(),
            }
        }
        TheoremId::Info => {
            let n = rng.random_range(2..=3);
            let m = rng.random_range(2..=3);
            let rows = (0..n).map(|_| random_stochastic_row(rng, m)).collect();
            WitnessJob::Info {
                source: Distribution::new(index_symbols(n), random_stochastic_row(rng, n))?,
                channel: Channel::new(index_symbols(n), index_symbols(m), rows)?,
                distortion: DistortionMatrix::hamming(n),
                c_link: 1.0,
            }
        }
        TheoremId::Causal => {
            let n = rng.random_range(2..=4);
            let m = rng.random_range(2..=3);
            let mut rows: Vec<Vec<f64>> = (0..n).map(|_| random_stochastic_row(rng, m)).collect();
            rows[1] = rows[0].clone();
            WitnessJob::Causal {
                channel: Channel::new(index_symbols(n), index_symbols(m), rows)?,
                source: Distribution::new(index_symbols(n), random_stochastic_row(rng, n))?,
            }
        }
        TheoremId::Categorical => {
            let n: usize = rng.random_range(2..=8);
            let losses: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let n_classes = rng.random_range(1..=n.div_ceil(2));
            let mut classes = vec![Vec::new(); n_classes];
            for i in 0..n {
                let c = if i < n_classes { i } else { rng.random_range(0..n_classes) };
                classes[c].push(i);
            }
            WitnessJob::Categorical(QuotientInstance { losses, classes })
        }
        TheoremId::Rlhf => {
            let n = rng.random_range(2..=6);
            let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let mut b: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.5)).collect();
            if b.iter().all(|v| *v == b[0]) {
                b[0] += 0.1;
            }
            WitnessJob::Rlhf(PolicyGameInstance::new(u, b)?)
        }
    })
}

/// The fixed information-floor instance: uniform binary source through BSC(0.1).
pub fn fixed_info_job() -> Result<WitnessJob> {
    Ok(WitnessJob::Info {
        source: Distribution::uniform(index_symbols(2))?,
        channel: Channel::bsc(0.1)?,
        distortion: DistortionMatrix::hamming(2),
        c_link: 1.0,
    })
}

/// Runs every fixed witness of the suite plus `random` random instances of
/// each, in parallel, and returns the reports ordered by theorem.
pub fn run_all(random: usize, seed: u64) -> Result<Vec<WitnessReport>> {
    let mut jobs = fixed_jobs()?;
    for (t, theorem) in TheoremId::SUITE.iter().enumerate() {
        for i in 0..random {
            let mut rng = derive_stream(seed, (t * random + i) as u64);
            jobs.push(random_job(*theorem, &mut rng)?);
        }
    }
    let mut reports = jobs.par_iter().map(WitnessJob::run).collect::<Result<Vec<_>>>()?;
    reports.sort_by_key(|r| r.theorem_id);
    Ok(reports)
}

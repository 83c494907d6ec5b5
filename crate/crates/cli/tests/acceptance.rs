//! Acceptance criteria, one PASS/FAIL line each.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use hbi_core::experiments::{self, ExperimentConfig, ExperimentKind, TaskSpec};
use hbi_core::infotheory::*;
use hbi_core::probcore::*;
use hbi_core::supervision::{BiasSpec, PreferencePair, Side};
use hbi_core::theorems::{self, TheoremId};
use rand::Rng;

type Check = Result<String, String>;

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn solvers_match_closed_forms() -> Check {
    let mut worst: f64 = 0.0;
    for p in [0.05, 0.1, 0.25] {
        let (r, t) = timed(|| channel_capacity_ba(&Channel::bsc(p).unwrap(), 1e-9, 1_000_000));
        let r = r.map_err(err)?;
        let e = (r.capacity_bits - (1.0 - h2(p))).abs();
        ensure(e <= 1e-6 && t < Duration::from_secs(1), format!("BSC({p}): error {e:e} in {t:?}"))?;
        worst = worst.max(e);
    }
    let source = Distribution::uniform(index_symbols(2)).map_err(err)?;
    let hamming = DistortionMatrix::hamming(2);
    let mut worst_rd: f64 = 0.0;
    for d in [0.05, 0.1, 0.2] {
        let (pt, t) = timed(|| rd_point_at_distortion(&source, &hamming, d));
        let pt = pt.map_err(err)?;
        let e = (pt.rate_bits - (1.0 - h2(d))).abs();
        ensure(e <= 1e-4 && t < Duration::from_secs(1), format!("R({d}): error {e:e} in {t:?}"))?;
        worst_rd = worst_rd.max(e);
    }
    Ok(format!("max capacity error {worst:.1e}, max R(D) error {worst_rd:.1e}"))
}

fn random_channel(rng: &mut RngStream, n_in: usize, n_out: usize) -> Channel {
    let rows = (0..n_in)
        .map(|_| (0..n_out).map(|_| rng.random::<f64>() + 1e-3).collect())
        .collect();
    Channel::from_weights(index_symbols(n_in), index_symbols(n_out), rows).unwrap()
}

fn random_dist(rng: &mut RngStream, n: usize) -> Distribution {
    let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    make_distribution(&w, index_symbols(n)).unwrap()
}

fn chain_rule_and_dpi() -> Check {
    let mut worst_chain: f64 = 0.0;
    let mut worst_slack = f64::INFINITY;
    for i in 0..100 {
        let mut rng = derive_stream(2718, i);
        let ny = rng.random_range(2..=4);
        let src = random_dist(&mut rng, ny);
        let chans: Vec<Channel> = (0..3)
            .map(|_| {
                let k = rng.random_range(2..=3);
                random_channel(&mut rng, ny, k)
            })
            .collect();
        let j = joint_from_chain(&src, &chans, ChainStructure::FanOut, &["y", "h", "m", "a"]).map_err(err)?;
        let d = chain_rule_decomposition(&j, "y", "h", "m", "a").map_err(err)?;
        worst_chain = worst_chain.max((d.c_mix - d.c_mix_direct).abs());

        let ns = rng.random_range(2..=4);
        let s = random_channel(&mut rng, ny, ns);
        let t = random_channel(&mut rng, ns, 2);
        let j = joint_from_chain(&src, &[s, t], ChainStructure::Chain, &["y", "s", "theta"]).map_err(err)?;
        worst_slack = worst_slack.min(verify_dpi(&j, "y", "s", "theta").map_err(err)?);
    }
    ensure(worst_chain <= 1e-9, format!("chain rule gap {worst_chain:e}"))?;
    ensure(worst_slack >= -1e-9, format!("DPI slack {worst_slack:e}"))?;
    Ok(format!("max chain-rule gap {worst_chain:.1e}, min DPI slack {worst_slack:.1e}"))
}

fn witness_suite() -> Check {
    let (reports, t) = timed(|| theorems::run_all(25, 2024));
    let reports = reports.map_err(err)?;
    ensure(reports.len() == 6 * 26, format!("{} reports", reports.len()))?;
    let failed: Vec<_> = reports.iter().filter(|r| !r.satisfied).map(|r| r.theorem_id).collect();
    ensure(failed.is_empty(), format!("unsatisfied: {failed:?}"))?;
    let causal_gap = reports
        .iter()
        .filter(|r| r.theorem_id == TheoremId::Causal)
        .map(|r| (r.lhs - r.rhs).abs())
        .fold(0.0, f64::max);
    ensure(causal_gap <= 1e-12, format!("causal brute force vs Bayes gap {causal_gap:e}"))?;
    ensure(t < Duration::from_secs(60), format!("took {t:?}"))?;
    Ok(format!("{} reports satisfied in {t:.2?}, causal gap {causal_gap:.1e}", reports.len()))
}

fn floor_persistence() -> Check {
    let cfg = experiments::load_config(&repo_root().join("configs/scaling_sweep.json")).map_err(err)?;
    let r = experiments::run_experiment(&cfg, 4).map_err(err)?;
    let top = *cfg.grid.last().unwrap();
    let excess = r.aggregate(top, "excess_h").ok_or("missing excess_h")?.mean;
    let floor = r.aggregate(top, "floor_h").ok_or("missing floor_h")?.mean;
    ensure((floor - 0.25).abs() < 1e-12, format!("floor {floor}"))?;
    ensure((0.9 * floor..=1.1 * floor).contains(&excess), format!("excess {excess:.4} vs floor {floor}"))?;

    let mut control = cfg.clone();
    if let TaskSpec::Synthetic(t) = &mut control.task {
        let mut spec = t.supervision();
        spec.bias = BiasSpec::None;
        t.supervision = Some(spec);
    }
    let c = experiments::run_experiment(&control, 4).map_err(err)?;
    let ctl = c.aggregate(top, "excess_h").ok_or("missing control")?.mean;
    ensure(ctl < 0.02, format!("control excess {ctl:.4}"))?;
    ensure(cfg.seeds.len() == 3, "expected 3 seeds")?;
    Ok(format!("excess {excess:.4} vs floor {floor:.2} at N={top}; control {ctl:.5}"))
}

fn alignment_trajectory() -> Check {
    let cfg = ExperimentConfig::default_for(ExperimentKind::AlphaSweep);
    let r = experiments::run_experiment(&cfg, 4).map_err(err)?;
    let e = r.means("alignment_error");
    ensure(e.len() == 5, "expected 5 grid points")?;
    ensure(e.windows(2).all(|w| w[1].1 >= w[0].1), format!("not monotone: {e:?}"))?;
    let ratio = e[4].1 / e[0].1;
    ensure(ratio >= 3.0, format!("ratio {ratio:.2}"))?;
    let shown: Vec<String> = e.iter().map(|x| format!("{:.4}", x.1)).collect();
    Ok(format!("alignment error [{}], ratio {ratio:.1}", shown.join(", ")))
}

fn sufficiency_shape() -> Check {
    let cfg = ExperimentConfig::default_for(ExperimentKind::SufficiencyProxy);
    let (r, t) = timed(|| experiments::run_experiment(&cfg, 4));
    let r = r.map_err(err)?;
    for alpha in [0.0, 0.25] {
        let exact = r.cells.iter().filter(|c| c.param == alpha).all(|c| c.metrics["accuracy"] == 1.0);
        ensure(exact, format!("accuracy at alpha={alpha} is not exactly 1"))?;
    }
    let acc = r.means("accuracy");
    let last = acc.last().unwrap().1;
    ensure((last - 0.70).abs() <= 0.02, format!("alpha=1 accuracy {last:.4}"))?;
    ensure(acc.windows(2).all(|w| w[1].1 <= w[0].1), format!("not nonincreasing: {acc:?}"))?;
    ensure(t < Duration::from_secs(30), format!("took {t:?}"))?;
    Ok(format!("alpha=0 and 0.25 exact 1.000, alpha=1 {last:.3}"))
}

fn corruption_mitigation() -> Check {
    let cfg = ExperimentConfig::default_for(ExperimentKind::NoiseSweep);
    let r = experiments::run_experiment(&cfg, 4).map_err(err)?;
    let h = r.aggregate(0.4, "accuracy_human").ok_or("missing human")?;
    let y = r.aggregate(0.4, "accuracy_hybrid").ok_or("missing hybrid")?;
    let half = (h.ci_hi - h.mean).max(y.ci_hi - y.mean);
    ensure(y.mean - h.mean > half, format!("hybrid {:.4} vs human {:.4}, half-width {half:.4}", y.mean, h.mean))?;
    Ok(format!("gamma=0.4: hybrid {:.4} vs human {:.4} (half-width {half:.4})", y.mean, h.mean))
}

fn lambda_stability() -> Check {
    let cfg = ExperimentConfig::default_for(ExperimentKind::LambdaAblation);
    let r = experiments::run_experiment(&cfg, 4).map_err(err)?;
    let spread = r.summary["accuracy_spread"];
    ensure(cfg.options.alpha == 0.5 && cfg.grid == [0.5, 1.0, 2.0], "unexpected default config")?;
    ensure(spread <= 0.03, format!("spread {spread:.4}"))?;
    Ok(format!("accuracy spread {spread:.4}"))
}

fn normalization_report() -> Check {
    let cfg = ExperimentConfig::default_for(ExperimentKind::NormalizationDegeneracy);
    let r = experiments::run_experiment(&cfg, 4).map_err(err)?;
    ensure(r.cells.iter().all(|c| c.metrics["accuracy_aux"] == 1.0), "aux-only accuracy is not exactly 1")?;
    let human = r.aggregate(0.5, "accuracy_human").ok_or("missing human")?.mean;
    let target = 1.0 - cfg.options.human_error;
    ensure((human - target).abs() <= 0.02, format!("human {human:.4} vs {target:.2}"))?;
    ensure(r.audit.len() == cfg.n_test * cfg.seeds.len(), "audit trail incomplete")?;
    let files = experiments::render_outputs(&r).map_err(err)?;
    ensure(files.iter().any(|f| f.0 == "audit.csv"), "no audit file")?;
    let hybrid = r.aggregate(0.5, "accuracy_hybrid").ok_or("missing hybrid")?.mean;
    let agree = r.aggregate(0.5, "hybrid_human_agreement").ok_or("missing agreement")?.mean;
    Ok(format!(
        "aux 1.000, human {human:.3}, hybrid {hybrid:.3} (agrees with human on {:.1}% of pairs), {} audit rows",
        100.0 * agree,
        r.audit.len()
    ))
}

fn sweep_files(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let o = Command::new(env!("CARGO_BIN_EXE_hbi-lab"))
        .env_remove("HBI_LAB_SEED")
        .args(["sweep", "alpha", "--config"])
        .arg(fixture("alpha_small.json"))
        .arg("--out")
        .arg(dir)
        .args(["--parallel", "3"])
        .output()
        .map_err(err)?;
    ensure(o.status.success(), String::from_utf8_lossy(&o.stderr).into_owned())?;
    let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .map_err(err)?
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    Ok(files)
}

fn determinism_and_formats() -> Check {
    let a = tempfile::tempdir().map_err(err)?;
    let b = tempfile::tempdir().map_err(err)?;
    let fa = sweep_files(a.path())?;
    let fb = sweep_files(b.path())?;
    ensure(fa == fb && fa.len() == 5, "repeated sweeps differ")?;

    let pairs: Vec<PreferencePair> = (0..50)
        .map(|i| {
            let mut p = PreferencePair::new(format!("p{i}"), if i % 3 == 0 { Side::B } else { Side::A });
            p.s_h_a = Some(i as f64 * 0.1);
            p.s_h_b = Some(0.3);
            p.s_a_a = Some(f64::from(i % 2));
            p.s_a_b = Some(0.0);
            p.features_a = vec![i as f64, -1.5];
            p.features_b = vec![0.25, 2.0];
            p
        })
        .collect();
    let path = a.path().join("pairs.jsonl");
    std::fs::write(&path, experiments::to_jsonl(&pairs).map_err(err)?).map_err(err)?;
    let back = experiments::ingest_scores(&path, true).map_err(err)?;
    ensure(back.scores.pairs == pairs, "JSONL round trip changed the pairs")?;

    let golden = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/stdout.txt"))
        .map_err(err)?;
    let o = Command::new(env!("CARGO_BIN_EXE_hbi-lab"))
        .arg("capacity")
        .arg("--channel")
        .arg(fixture("bsc01.json"))
        .output()
        .map_err(err)?;
    let line = String::from_utf8_lossy(&o.stdout).into_owned();
    ensure(golden.starts_with(&line) && line.trim() == "capacity_bits=0.531004", format!("golden mismatch: {line}"))?;
    Ok(format!("{} sweep files byte-identical, 50-pair JSONL round trip, golden stdout stable", fa.len()))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("information solvers match closed forms", solvers_match_closed_forms),
        ("chain rule and data processing", chain_rule_and_dpi),
        ("theorem witness suite", witness_suite),
        ("floor persists under bias", floor_persistence),
        ("alignment error rises with alpha", alignment_trajectory),
        ("sufficiency proxy shape", sufficiency_shape),
        ("hybrid mitigates label corruption", corruption_mitigation),
        ("lambda stability", lambda_stability),
        ("normalization degeneracy report", normalization_report),
        ("determinism and formats", determinism_and_formats),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(why) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {why}", i + 1);
            }
        }
    }
    assert_eq!(failures, 0, "{failures} acceptance criteria failed");
}


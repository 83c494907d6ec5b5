use hbi_core::experiments::*;
use hbi_core::supervision::{BiasSpec, NoiseSpec, PreferencePair, QuantizerSpec, Side, SupervisionSpec};
use hbi_core::HbiError;

fn synthetic(task: SyntheticTask) -> TaskSpec {
    TaskSpec::Synthetic(task)
}

fn half_width(a: &Aggregate) -> f64 {
    a.ci_hi - a.mean
}

#[test]
fn alpha_sweep_default_trajectory() {
    let cfg = ExperimentConfig::default_for(ExperimentKind::AlphaSweep);
    let r = run_experiment(&cfg, 4).unwrap();
    let err = r.means("alignment_error");
    assert_eq!(err.len(), 5);
    for w in err.windows(2) {
        assert!(w[1].1 >= w[0].1, "alignment error not monotone: {err:?}");
    }
    assert!(err[4].1 >= 3.0 * err[0].1);
    for a in &r.aggregates {
        assert!(a.ci_lo <= a.mean && a.mean <= a.ci_hi);
        assert_eq!(a.k, 3);
    }
    assert_eq!(r.cells.len(), 15);
}

#[test]
fn alpha_one_matches_the_human_only_path() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::AlphaSweep);
    cfg.grid = vec![1.0];
    cfg.n_train = 800;
    cfg.seeds = vec![5, 6];
    let r = run_experiment(&cfg, 2).unwrap();
    for c in &r.cells {
        assert_eq!(c.metrics, human_only_cell(&cfg, c.seed).unwrap());
    }
}

#[test]
fn identity_channel_is_flat_in_alpha() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::AlphaSweep);
    cfg.grid = vec![0.0, 0.5, 1.0];
    cfg.n_train = 1000;
    cfg.task = synthetic(SyntheticTask {
        supervision: Some(SupervisionSpec::identity()),
        ..SyntheticTask::default()
    });
    let r = run_experiment(&cfg, 2).unwrap();
    for m in ["accuracy", "alignment_error", "distortion_norm"] {
        let v = r.means(m);
        assert!(v.iter().all(|x| x.1 == v[0].1), "{m}: {v:?}");
    }
}

#[test]
fn lambda_ablation_spread() {
    let cfg = ExperimentConfig::default_for(ExperimentKind::LambdaAblation);
    let r = run_experiment(&cfg, 4).unwrap();
    assert!(r.summary["accuracy_spread"] <= 0.03, "{:?}", r.summary);

    let mut single = cfg.clone();
    single.grid = vec![1.0];
    single.n_train = 500;
    assert_eq!(run_experiment(&single, 2).unwrap().summary["accuracy_spread"], 0.0);

    let mut zero = cfg;
    zero.n_train = 500;
    zero.task = synthetic(SyntheticTask {
        aux: AuxChannel::Zero,
        ..SyntheticTask::default()
    });
    let r = run_experiment(&zero, 2).unwrap();
    assert_eq!(r.summary["accuracy_spread"], 0.0);
}

#[test]
fn noise_sweep_hybrid_mitigates_corruption() {
    let cfg = ExperimentConfig::default_for(ExperimentKind::NoiseSweep);
    let r = run_experiment(&cfg, 4).unwrap();
    let gain = r.aggregate(0.4, "hybrid_gain").unwrap();
    assert!(gain.mean > half_width(gain), "{gain:?}");

    let mut chance = cfg.clone();
    chance.grid = vec![0.5];
    let r = run_experiment(&chance, 4).unwrap();
    let h = r.aggregate(0.5, "accuracy_human").unwrap().mean;
    assert!((0.45..=0.55).contains(&h), "{h}");

    let mut clean = cfg;
    clean.grid = vec![0.0];
    clean.task = synthetic(SyntheticTask {
        supervision: Some(SupervisionSpec::identity()),
        ..SyntheticTask::default()
    });
    let r = run_experiment(&clean, 4).unwrap();
    assert!(r.aggregate(0.0, "accuracy_human").unwrap().mean > 0.97);
    assert!(r.aggregate(0.0, "accuracy_hybrid").unwrap().mean > 0.97);
}

fn scaling_config(delta: f64, regimes: Vec<Regime>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::ScalingSweep);
    cfg.task = synthetic(SyntheticTask {
        dim: 2,
        weights: Some(vec![1.0, 0.0]),
        supervision: Some(SupervisionSpec {
            noise: NoiseSpec::Gaussian { scale: 0.5 },
            bias: if delta == 0.0 {
                BiasSpec::None
            } else {
                BiasSpec::Linear { delta: vec![delta, 0.0] }
            },
            quantizer: QuantizerSpec::identity(),
        }),
        aux: AuxChannel::Exact,
    });
    cfg.options.regimes = regimes;
    cfg
}

fn regime(name: &str, h: f64, m: f64, a: f64) -> Regime {
    Regime {
        name: name.into(),
        h,
        m,
        a,
    }
}

#[test]
fn scaling_floor_persists_under_bias() {
    let cfg = scaling_config(0.5, ExperimentConfig::default_for(ExperimentKind::ScalingSweep).options.regimes);
    let r = run_experiment(&cfg, 4).unwrap();
    let top = r.aggregate(16000.0, "excess_h").unwrap();
    let floor = r.aggregate(16000.0, "floor_h").unwrap().mean;
    assert!((floor - 0.25).abs() < 1e-12);
    assert!(top.mean >= 0.8 * floor && (0.225..=0.275).contains(&top.mean), "{top:?}");
    // Regime ordering on matched instances.
    for (n, _) in r.means("excess_h") {
        let h = r.aggregate(n, "excess_h").unwrap();
        let hm = r.aggregate(n, "excess_hm").unwrap().mean;
        let hma = r.aggregate(n, "excess_hma").unwrap().mean;
        assert!(hma <= hm && hm <= h.mean + 2.0 * half_width(h), "n={n}: {hma} {hm} {}", h.mean);
    }
}

#[test]
fn scaling_without_bias_or_with_a_sufficient_channel_vanishes() {
    let cfg = scaling_config(0.0, vec![regime("h", 1.0, 0.0, 0.0)]);
    let r = run_experiment(&cfg, 4).unwrap();
    let ex = r.means("excess_h");
    assert!(ex.last().unwrap().1 < 0.02 && ex.last().unwrap().1 < ex[0].1, "{ex:?}");

    let cfg = scaling_config(0.5, vec![regime("a", 0.0, 0.0, 1.0)]);
    let r = run_experiment(&cfg, 4).unwrap();
    assert!(r.means("excess_a").iter().all(|x| x.1 < 1e-20));
    assert!(r.means("floor_a").iter().all(|x| x.1 == 0.0));
}

#[test]
fn sufficiency_proxy_shape() {
    let cfg = ExperimentConfig::default_for(ExperimentKind::SufficiencyProxy);
    let r = run_experiment(&cfg, 4).unwrap();
    let acc = r.means("accuracy");
    assert!(r.cells.iter().filter(|c| c.param == 0.0).all(|c| c.metrics["accuracy"] == 1.0));
    assert!((acc[4].1 - 0.70).abs() <= 0.02, "{acc:?}");
    for w in acc.windows(2) {
        assert!(w[1].1 <= w[0].1);
    }

    let mut random = cfg;
    random.options.correct_side = CorrectSide::Random;
    random.grid = vec![0.0];
    let r = run_experiment(&random, 2).unwrap();
    assert!(r.cells.iter().all(|c| c.metrics["accuracy"] == 1.0));
}

#[test]
fn normalization_report() {
    let cfg = ExperimentConfig::default_for(ExperimentKind::NormalizationDegeneracy);
    let r = run_experiment(&cfg, 2).unwrap();
    assert!(r.cells.iter().all(|c| c.metrics["accuracy_aux"] == 1.0));
    let human = r.aggregate(0.5, "accuracy_human").unwrap().mean;
    assert!((human - 0.48).abs() <= 0.02, "{human}");
    assert_eq!(r.audit.len(), cfg.n_test * cfg.seeds.len());
    let files = render_outputs(&r).unwrap();
    let audit = &files.iter().find(|f| f.0 == "audit.csv").unwrap().1;
    assert_eq!(audit.lines().count(), r.audit.len() + 1);
}

#[test]
fn outputs_are_deterministic_across_thread_counts() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::AlphaSweep);
    cfg.n_train = 400;
    cfg.grid = vec![0.0, 1.0];
    let a = render_outputs(&run_experiment(&cfg, 1).unwrap()).unwrap();
    let b = render_outputs(&run_experiment(&cfg, 4).unwrap()).unwrap();
    assert_eq!(a, b);
    let names: Vec<&str> = a.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(
        names,
        [
            "results.csv",
            "results.json",
            "plot_accuracy.csv",
            "plot_alignment_error.csv",
            "plot_distortion_norm.csv"
        ]
    );
    let r = run_experiment(&cfg, 1).unwrap();
    let rows = parse_plot_csv(&plot_csv(&r, "accuracy")).unwrap();
    assert_eq!(rows.len(), 2);
    for (row, agg) in rows.iter().zip(r.aggregates.iter().filter(|a| a.metric == "accuracy")) {
        assert!((row[1] - agg.mean).abs() <= 5e-7);
    }
}

#[test]
fn seed_override_changes_results_reproducibly() {
    let mut cfg = ExperimentConfig::default_for(ExperimentKind::SufficiencyProxy);
    let base = run_experiment(&cfg, 1).unwrap();
    cfg.override_seeds(100);
    let moved = run_experiment(&cfg, 1).unwrap();
    assert_eq!(moved.cells.iter().map(|c| c.seed).collect::<Vec<_>>()[..3], [100, 101, 102]);
    assert_ne!(base.cells, moved.cells);
    assert_eq!(moved, run_experiment(&cfg, 3).unwrap());
}

fn s_h_only_fixture(n: usize) -> String {
    let pairs: Vec<PreferencePair> = (0..n)
        .map(|i| {
            let x = (i as f64 * 0.37).sin();
            let mut p = PreferencePair::new(format!("p{i}"), if x > 0.0 { Side::A } else { Side::B });
            p.s_h_a = Some(x);
            p.s_h_b = Some(0.0);
            p.truth = Some(if i % 4 == 0 { p.label.flipped() } else { p.label });
            p
        })
        .collect();
    to_jsonl(&pairs).unwrap()
}

#[test]
fn ingested_s_h_only_supports_only_the_human_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scores.jsonl");
    std::fs::write(&path, s_h_only_fixture(1000)).unwrap();

    let report = ingest_scores(&path, true).unwrap();
    assert_eq!(report.scores.pairs.len(), 1000);
    assert_eq!(report.scores.counts["s_h_a"], 1000);
    assert_eq!(report.scores.counts["s_a_a"], 0);
    // Round trip through the writer.
    let again = dir.path().join("again.jsonl");
    std::fs::write(&again, to_jsonl(&report.scores.pairs).unwrap()).unwrap();
    assert_eq!(ingest_scores(&again, true).unwrap().scores.pairs, report.scores.pairs);

    let mut cfg = ExperimentConfig::default_for(ExperimentKind::AlphaSweep);
    cfg.task = TaskSpec::Ingested {
        path: path.clone(),
        primary: Primary::H,
        strict: true,
    };
    cfg.grid = vec![1.0];
    let r = run_experiment(&cfg, 1).unwrap();
    let acc = r.aggregate(1.0, "accuracy").unwrap().mean;
    assert!((acc - 0.75).abs() < 0.01, "{acc}");

    cfg.grid = vec![0.5];
    assert_eq!(run_experiment(&cfg, 1), Err(HbiError::MissingSignal("s_a".into())));

    cfg.experiment = ExperimentKind::NoiseSweep;
    cfg.grid = vec![0.2];
    assert!(matches!(run_experiment(&cfg, 1), Err(HbiError::InvalidSpec(_))));
}

#[test]
fn config_files_in_the_repository_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            load_config(&path).unwrap().validate().unwrap();
            seen += 1;
        }
    }
    assert!(seen >= 6);
}

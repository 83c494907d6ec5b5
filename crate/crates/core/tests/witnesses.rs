use hbi_core::theorems::{random_job, run_all, TheoremId};
use hbi_core::probcore::derive_stream;

#[test]
fn every_witness_holds_on_fixed_and_random_instances() {
    let reports = run_all(25, 2024).unwrap();
    assert_eq!(reports.len(), 6 * 26);
    for id in TheoremId::SUITE {
        assert_eq!(reports.iter().filter(|r| r.theorem_id == id).count(), 26);
    }
    let failed: Vec<_> = reports.iter().filter(|r| !r.satisfied).collect();
    assert!(failed.is_empty(), "{failed:#?}");
    assert!(reports.windows(2).all(|w| w[0].theorem_id <= w[1].theorem_id));
    for r in &reports {
        assert_eq!(r.certificate.kind, r.theorem_id.kind());
        assert!(r.certificate.value >= 0.0);
    }
}

#[test]
fn info_witness_holds_on_random_instances() {
    for i in 0..25 {
        let mut rng = derive_stream(77, i);
        let r = random_job(TheoremId::Info, &mut rng).unwrap().run().unwrap();
        assert!(r.satisfied, "{r:?}");
    }
}

use evt_suprema::experiments::{load, persist, run_scenario, ExperimentPlan, RESULT_FILE};
use evt_suprema::model::{DriftSequence, ModelSpec};

fn small_plan(seed: u64) -> ExperimentPlan {
    let model = ModelSpec::new(0.8, 0.3, 1.0, 1.0, 1.0)
        .unwrap()
        .with_pickands(0.7)
        .unwrap()
        .with_drifts(DriftSequence::thinned(1.0, 0.5, 1.5))
        .unwrap();
    let mut plan = ExperimentPlan::new(model, 300, 100, seed);
    plan.k = 3;
    plan.grid.n_points = 256;
    plan.levels = vec![-1.0, 0.0, 1.0];
    plan
}

#[test]
fn persisted_result_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let result = run_scenario(&small_plan(11)).unwrap();
    assert_eq!(result.normalizers.m_n, 150);
    persist(&result, dir.path()).unwrap();
    let back = load(dir.path()).unwrap();
    assert_eq!(back.plan.n, 300);
    assert_eq!(back.normalized_stats, result.normalized_stats);
    assert_eq!(back.exceed_counts, result.exceed_counts);
    assert_eq!(back.ks, result.ks);
    assert_eq!(back.regime, result.regime);
    assert_eq!(back.thresholds, result.thresholds);
}

#[test]
fn same_seed_same_bytes_other_seed_differs() {
    let read = |seed: u64| {
        let dir = tempfile::tempdir().unwrap();
        persist(&run_scenario(&small_plan(seed)).unwrap(), dir.path()).unwrap();
        std::fs::read(dir.path().join(RESULT_FILE)).unwrap()
    };
    let a = read(5);
    assert_eq!(a, read(5));
    assert_ne!(a, read(6));
}

#[test]
fn corrupt_result_file_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    persist(&run_scenario(&small_plan(1)).unwrap(), dir.path()).unwrap();
    std::fs::write(dir.path().join(RESULT_FILE), "{ not json").unwrap();
    let err = load(dir.path()).unwrap_err();
    assert!(matches!(err, evt_suprema::Error::Format { .. }), "{err}");
}

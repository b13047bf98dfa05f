use wprg::harness::{
    acceptance_suite, gen_instance, run_suite, AcceptMode, Check, Estimator, Experiment, FamilySpec, Mode, Schedule, ScheduleRef,
    SuiteConfig,
};
use wprg::perm::{perm_chain, perm_wprg, PermLevel, PermSchedule};
use wprg::robp::RobpClass;
use wprg::wpr::WeightedGenerator;

fn perm_family(n: usize, w: usize, seed: u64) -> FamilySpec {
    FamilySpec { class: RobpClass::Permutation, n, n_min: None, w, w_min: None, s: 1, count: 4, seed, accept: AcceptMode::Single }
}

#[test]
fn generator_is_width_oblivious() {
    let sched = PermSchedule { levels: vec![PermLevel { k: 1, lambda: 0.7, max_degree_bits: 8, tau: None }] };
    let narrow = gen_instance(&perm_family(8, 2, 1), 0).unwrap();
    let wide = gen_instance(&perm_family(8, 6, 2), 0).unwrap();
    let a = perm_wprg(&perm_chain(8, 1, &sched, &[narrow], 24).unwrap()).unwrap();
    let b = perm_wprg(&perm_chain(8, 1, &sched, &[wide], 24).unwrap()).unwrap();
    assert_eq!(a.seed_bits(), b.seed_bits());
    for seed in (0..1u64 << a.seed_bits()).step_by(7) {
        assert_eq!(a.eval(seed).unwrap(), b.eval(seed).unwrap());
    }
}

#[test]
fn empty_suite_passes() {
    let report = run_suite(&SuiteConfig::new(Vec::new())).unwrap();
    assert!(report.experiments.is_empty());
    assert_eq!(report.summary.records, 0);
    assert!(report.summary.pass);
}

fn small_suite() -> SuiteConfig {
    let regular = FamilySpec { class: RobpClass::Regular, n_min: Some(1), w_min: Some(1), ..perm_family(6, 5, 3) };
    SuiteConfig::new(vec![
        Experiment::Verify { name: "transform".into(), family: Some(regular), check: Check::Transform },
        Experiment::Verify {
            name: "derand-walk".into(),
            family: Some(FamilySpec { class: RobpClass::Regular, ..perm_family(8, 4, 4) }),
            check: Check::DerandWalk { lambda: 0.7, max_degree_bits: 8, k: 1 },
        },
        Experiment::Estimate {
            name: "perm".into(),
            family: perm_family(8, 3, 5),
            schedule: ScheduleRef::Inline(Schedule::Perm {
                levels: vec![PermLevel { k: 1, lambda: 0.7, max_degree_bits: 8, tau: None }],
                multi_accept: false,
            }),
            estimator: Estimator::Structured,
        },
    ])
}

#[test]
fn fast_and_reproducible_agree() {
    let mut cfg = small_suite();
    let slow = run_suite(&cfg).unwrap();
    cfg.mode = Mode::Fast;
    let fast = run_suite(&cfg).unwrap();
    let (a, b): (Vec<_>, Vec<_>) = (slow.records().collect(), fast.records().collect());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!((x.instance_id, &x.pipeline), (y.instance_id, &y.pipeline));
        assert!((x.measured_err - y.measured_err).abs() <= 1e-9);
        assert_eq!(x.wall_ms, 0);
    }
}

#[test]
fn schedule_files_resolve_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let sched = Schedule::Perm { levels: vec![PermLevel { k: 1, lambda: 0.7, max_degree_bits: 8, tau: None }], multi_accept: false };
    std::fs::write(dir.path().join("perm.json"), serde_json::to_string(&sched).unwrap()).unwrap();
    let text = r#"{"experiments":[{"kind":"estimate","name":"p","schedule":{"file":"perm.json"},
        "family":{"class":"permutation","n":4,"w":3,"s":1,"count":2,"seed":9}}]}"#;
    std::fs::write(dir.path().join("suite.json"), text).unwrap();
    let cfg = SuiteConfig::load(&dir.path().join("suite.json")).unwrap();
    match &cfg.experiments[0] {
        Experiment::Estimate { schedule: ScheduleRef::Inline(s), .. } => assert_eq!(s, &sched),
        e => panic!("schedule not inlined: {e:?}"),
    }
    assert!(run_suite(&cfg).unwrap().summary.pass);
}

#[test]
fn shipped_acceptance_config_matches_builtin() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/acceptance.json");
    let shipped = SuiteConfig::load(std::path::Path::new(path)).unwrap();
    assert_eq!(shipped, acceptance_suite());
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = small_suite();
    cfg.cap_bits = 0;
    assert!(run_suite(&cfg).is_err());
    let mut cfg = small_suite();
    let dup = cfg.experiments[0].clone();
    cfg.experiments.push(dup);
    assert!(cfg.validate().is_err());
    let cfg = SuiteConfig::new(vec![Experiment::Verify { name: "t".into(), family: None, check: Check::Transform }]);
    assert!(cfg.validate().is_err());
}

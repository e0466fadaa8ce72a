use std::fs;
use std::path::Path;

use mmpd_core::cli::{run, EXIT_INVALID, EXIT_OK};
use mmpd_core::metrics::ComparisonReport;
use mmpd_core::store::{ExperimentConfig, Registry};

const TINY: &str = r#"{
  "sac": {"hidden_sizes": [8], "batch_size": 16, "warmup_steps": 100},
  "train_steps": 300,
  "demo_episodes": 2,
  "eval_episodes": 3,
  "compare": {"episodes": 2, "chunk_len": 8}
}"#;

fn mmpd(reg: &Path, args: &[&str]) -> i32 {
    let mut argv = vec!["mmpd", "--registry", reg.to_str().unwrap()];
    argv.extend_from_slice(args);
    run(argv)
}

fn setup() -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.json");
    fs::write(&cfg, TINY).unwrap();
    let cfg = cfg.to_str().unwrap().to_string();
    (dir, cfg)
}

#[test]
fn dump_defaults_and_bad_flags() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(mmpd(dir.path(), &["dump-defaults"]), EXIT_OK);
    assert_eq!(
        mmpd(dir.path(), &["--bogus", "dump-defaults"]),
        EXIT_INVALID
    );
    assert_eq!(mmpd(dir.path(), &["eval", "missing"]), EXIT_INVALID);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"arena": {"gun_range_m": -1}}"#).unwrap();
    assert_eq!(
        mmpd(
            dir.path(),
            &["--config", bad.to_str().unwrap(), "train-base"]
        ),
        EXIT_INVALID
    );
    // invalid configs never start training
    assert!(Registry::open(dir.path()).unwrap().ids().is_empty());
}

#[test]
fn schedule_with_unknown_id_fails_before_training() {
    let (dir, cfg) = setup();
    let sched = dir.path().join("s.json");
    fs::write(
        &sched,
        r#"[{"id": "base"}, {"id": "l1", "agents": [1], "known": ["ghost"]}]"#,
    )
    .unwrap();
    assert_eq!(
        mmpd(
            dir.path(),
            &["--config", &cfg, "diversify", sched.to_str().unwrap()]
        ),
        EXIT_INVALID
    );
    assert!(Registry::open(dir.path()).unwrap().ids().is_empty());
}

#[test]
fn full_schedule_compare_and_plot() {
    let (dir, cfg) = setup();
    let reg = dir.path();
    let sched = reg.join("s.json");
    fs::write(
        &sched,
        r#"[{"id": "base"}, {"id": "l1", "agents": [1], "known": ["base"]}, {"id": "l2", "agents": [1, 2], "known": ["base"]}]"#,
    )
    .unwrap();
    assert_eq!(
        mmpd(
            reg,
            &["--config", &cfg, "diversify", sched.to_str().unwrap()]
        ),
        EXIT_OK
    );
    let ids = Registry::open(reg).unwrap().ids();
    assert_eq!(ids, vec!["base", "l1", "l2"]);

    // rerunning resumes: nothing is retrained
    let ckpt = reg.join("l2.ckpt.json");
    let before = fs::read(&ckpt).unwrap();
    let stamp = fs::metadata(&ckpt).unwrap().modified().unwrap();
    assert_eq!(mmpd(reg, &["diversify", sched.to_str().unwrap()]), EXIT_OK);
    assert_eq!(fs::read(&ckpt).unwrap(), before);
    assert_eq!(fs::metadata(&ckpt).unwrap().modified().unwrap(), stamp);

    // a changed budget under the same ids is refused
    assert_eq!(
        mmpd(
            reg,
            &["--steps", "301", "diversify", sched.to_str().unwrap()]
        ),
        EXIT_INVALID
    );

    assert_eq!(mmpd(reg, &["compare", "base", "base"]), EXIT_OK);
    let text = fs::read_to_string(reg.join("compare/base__base.json")).unwrap();
    let report: ComparisonReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.frechet_mean, [0.0, 0.0]);
    assert!(report.mmd.mmd <= 1e-12);
    let csv = fs::read_to_string(reg.join("compare/base__base.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);

    assert_eq!(mmpd(reg, &["compare", "base", "l1"]), EXIT_OK);
    assert!(reg.join("compare/base__l1.csv").exists());

    assert_eq!(mmpd(reg, &["plot", "base", "l1"]), EXIT_INVALID);
    assert_eq!(mmpd(reg, &["eval", "base"]), EXIT_OK);
    assert_eq!(mmpd(reg, &["eval", "l1"]), EXIT_OK);
    assert_eq!(
        mmpd(reg, &["plot", "base", "l1", "--episode", "1"]),
        EXIT_OK
    );
    let svg = reg.join("plots/base__l1__ep1.svg");
    let first = fs::read(&svg).unwrap();
    assert_eq!(
        mmpd(reg, &["plot", "base", "l1", "--episode", "1"]),
        EXIT_OK
    );
    assert_eq!(fs::read(&svg).unwrap(), first);
    assert_eq!(
        mmpd(reg, &["plot", "base", "--episode", "99"]),
        EXIT_INVALID
    );

    let saved: ExperimentConfig =
        serde_json::from_str(&fs::read_to_string(reg.join("config.json")).unwrap()).unwrap();
    assert_eq!(saved.train_steps, 300);
}

#[test]
fn skill_baselines_are_registered_under_their_names() {
    let (dir, cfg) = setup();
    assert_eq!(
        mmpd(dir.path(), &["--config", &cfg, "train-skill", "gun"]),
        EXIT_OK
    );
    assert_eq!(
        mmpd(
            dir.path(),
            &["--config", &cfg, "train-skill", "bomb", "--id", "b2"]
        ),
        EXIT_OK
    );
    assert_eq!(
        mmpd(dir.path(), &["--config", &cfg, "train-skill", "knife"]),
        EXIT_INVALID
    );
    assert_eq!(Registry::open(dir.path()).unwrap().ids(), vec!["b2", "gun"]);
}

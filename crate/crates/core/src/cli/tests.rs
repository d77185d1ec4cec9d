use super::*;
use crate::table::body;

const SMOKE: &str = include_str!("../../configs/square_smoke.json");

fn small_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_json(SMOKE).unwrap();
    cfg.mesh = MeshSpec {
        n: Some(8),
        h: None,
        grading: None,
    };
    cfg.training_count = 12;
    cfg.n = 4;
    cfg.test_count = 4;
    cfg.nncheck_samples = 10;
    cfg.grid_n = 16;
    cfg.sweep = SweepSpec {
        epsilon: vec![0.1],
        n: vec![2, 4],
    };
    cfg
}

fn write_config(dir: &Path, cfg: &ExperimentConfig) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> u8 {
    let mut args = vec![
        "richop".to_string(),
        cmd.to_string(),
        "--config".into(),
        config.display().to_string(),
        "--out".into(),
        out.display().to_string(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    run_with_args(args)
}

#[test]
fn bundled_config_parses() {
    let cfg = ExperimentConfig::from_json(SMOKE).unwrap();
    assert_eq!(cfg.name, "square_smoke");
    assert_eq!(cfg.hash().len(), 16);
    assert_eq!(cfg.hash(), ExperimentConfig::from_json(SMOKE).unwrap().hash());
}

#[test]
fn hash_tracks_effective_config() {
    let a = small_config();
    let mut b = a.clone();
    b.seed += 1;
    assert_ne!(a.hash(), b.hash());
}

#[test]
fn invalid_beta_is_a_config_error() {
    let mut cfg = small_config();
    cfg.beta = cfg.alpha;
    let msg = cfg.validate().unwrap_err().to_string();
    assert!(msg.contains("beta < alpha"), "{msg}");
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &cfg);
    assert_eq!(run("mesh", &path, &dir.path().join("o"), &[]), EXIT_CONFIG);
}

#[test]
fn unknown_fields_and_missing_files_are_config_errors() {
    let mut v: serde_json::Value = serde_json::from_str(SMOKE).unwrap();
    v["bogus"] = serde_json::json!(1);
    assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("mesh", &dir.path().join("none.json"), dir.path(), &[]), EXIT_CONFIG);
    assert_eq!(run_with_args(["richop", "frobnicate"]), EXIT_CONFIG);
}

#[test]
fn mesh_spec_rules() {
    let both = MeshSpec {
        n: Some(4),
        h: Some(0.1),
        grading: None,
    };
    assert!(both.build(&DomainSpec::Square).is_err());
    let n_on_l = MeshSpec {
        n: Some(4),
        h: None,
        grading: None,
    };
    assert!(n_on_l.build(&DomainSpec::Lshape).is_err());
    let graded = MeshSpec {
        n: None,
        h: Some(0.5),
        grading: Some(GradingSpec {
            grading: 0.5,
            levels: 1,
        }),
    };
    let m = graded.build(&DomainSpec::Lshape).unwrap();
    assert!(m.check_conforming().is_ok());
}

#[test]
fn run_is_deterministic_and_stored_bundle_evaluates() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &small_config());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run("run", &path, &a, &[]), 0);
    assert_eq!(run("run", &path, &b, &["--threads", "2"]), 0);
    for name in [
        "mesh.csv", "snapshots.csv", "greedy.csv", "delta.csv", "contraction.csv", "convergence.csv", "build.csv",
        "eval.csv", "sweep.csv", "errors.csv", "nncheck.csv",
    ] {
        let x = fs::read_to_string(a.join(name)).unwrap();
        let y = fs::read_to_string(b.join(name)).unwrap();
        assert!(x.starts_with("# generated"));
        assert_eq!(body(&x), body(&y), "{name}");
    }
    let first = fs::read_to_string(a.join("eval.csv")).unwrap();
    assert_eq!(run("eval", &path, &a, &[]), 0);
    assert_eq!(body(&first), body(&fs::read_to_string(a.join("eval.csv")).unwrap()));
    assert_eq!(run("decompose", &path, &a, &[]), 0);
    let sweep = fs::read_to_string(a.join("sweep.csv")).unwrap();
    assert_eq!(body(&sweep).lines().count(), 3);
}

#[test]
fn seed_flag_changes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &small_config());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run("snapshots", &path, &a, &[]), 0);
    assert_eq!(run("snapshots", &path, &b, &["--seed", "99"]), 0);
    let x = fs::read_to_string(a.join("snapshots.csv")).unwrap();
    let y = fs::read_to_string(b.join("snapshots.csv")).unwrap();
    assert_ne!(body(&x), body(&y));
}

#[test]
fn eval_without_bundle_fails_as_build_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &small_config());
    assert_eq!(run("eval", &path, &dir.path().join("empty"), &[]), EXIT_BUILD);
}

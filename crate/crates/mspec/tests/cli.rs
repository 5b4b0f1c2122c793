use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn mspec(args: &[&str], seed: Option<u64>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_mspec"));
    cmd.args(args).env_remove("MSPEC_SEED");
    if let Some(s) = seed {
        cmd.env("MSPEC_SEED", s.to_string());
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn ok(out: Output) -> Output {
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, json).unwrap();
    p
}

fn small_config(dir: &Path, model: &str, extra_train: &str) -> PathBuf {
    let json = format!(
        r#"{{
  "model": {{ "name": "{model}" }},
  "network": {{ "summary_dim": 2, "equivariant_widths": [16], "invariant_widths": [16],
               "flow_layers": 2, "flow_hidden_widths": [16] }},
  "train": {{ "n_steps": 10, "batch_size": 16, "learning_rate": 0.001 {extra_train} }},
  "detector": {{ "validation_m": 200 }},
  "output_dir": "{out}",
  "seed": 7
}}"#,
        out = dir.join("run").display()
    );
    write_config(dir, "config.json", &json)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_counts_rows_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "gaussian2d", "");
    let one = dir.path().join("one");
    ok(mspec(&["simulate", "--config", p(&cfg), "--n", "1", "--k", "1", "--out", p(&one)], None));
    let data = std::fs::read_to_string(one.join("data.csv")).unwrap();
    assert_eq!(data.lines().count(), 2);
    assert!(data.starts_with("dataset_id,obs_id,x0,x1\n"));

    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        ok(mspec(&["simulate", "--config", p(&cfg), "--n", "100", "--k", "100", "--out", p(out)], None));
    }
    for f in ["data.csv", "params.csv", "manifest.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{}", f);
    }
    assert_eq!(std::fs::read_to_string(a.join("data.csv")).unwrap().lines().count(), 10_001);
    assert_eq!(std::fs::read_to_string(a.join("params.csv")).unwrap().lines().count(), 101);
    let manifest = read_json(&a.join("manifest.json"));
    assert_eq!(manifest["runs"]["simulate"]["seed"], 7);
    assert_eq!(manifest["runs"]["simulate"]["files"]["data.csv"]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn seed_environment_variable_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "gaussian2d", "");
    let run = |name: &str, seed: Option<u64>| {
        let out = dir.path().join(name);
        ok(mspec(&["simulate", "--config", p(&cfg), "--n", "3", "--out", p(&out)], seed));
        std::fs::read_to_string(out.join("data.csv")).unwrap()
    };
    let config_seed = run("c", None);
    let env_seed = run("e", Some(8));
    assert_ne!(config_seed, env_seed);
    assert_eq!(run("e2", Some(8)), env_seed);
    assert_eq!(run("c2", Some(7)), config_seed);
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.json", r#"{"model": {"name": "gaussian2d"}, "extra": true}"#);
    let out = mspec(&["simulate", "--config", p(&bad), "--n", "1"], None);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("extra"));
    let missing = mspec(&["simulate", "--config", p(&dir.path().join("nope.json")), "--n", "1"], None);
    assert_eq!(code(&missing), 2);
    assert_eq!(code(&mspec(&["simulate"], None)), 2);
}

#[test]
fn schema_command_prints_the_published_schema() {
    let out = ok(mspec(&["schema"], None));
    let schema: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(schema["additionalProperties"], Value::Bool(false));
    assert!(schema["properties"]["train"]["properties"]["gamma"].is_object());
}

#[test]
fn train_writes_artifacts_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "gaussian2d", r#", "gamma": 0"#);
    ok(mspec(&["train", "--config", p(&cfg)], None));
    let run = dir.path().join("run");
    for f in ["card.json", "validation.csv", "trace.csv", "manifest.json"] {
        assert!(run.join(f).exists(), "{}", f);
    }
    let card = read_json(&run.join("card.json"));
    assert_eq!(card["train"]["gamma"], 0.0);
    assert_eq!(card["steps_completed"], 10);
    assert_eq!(std::fs::read_to_string(run.join("validation.csv")).unwrap().lines().count(), 201);

    ok(mspec(&["train", "--config", p(&cfg), "--resume", p(&run.join("card.json"))], None));
    let card = read_json(&run.join("card.json"));
    assert_eq!(card["steps_completed"], 20);
    assert_eq!(card["train"]["gamma"], 0.0);
    let trace = std::fs::read_to_string(run.join("trace.csv")).unwrap();
    let steps: Vec<usize> = trace.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(steps, (0..20).collect::<Vec<_>>());
}

#[test]
fn numerical_failure_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "gaussian2d", r#", "learning_rate": 1e300, "clip_norm": null, "schedule": "constant""#);
    let text = std::fs::read_to_string(&cfg).unwrap().replace(r#""learning_rate": 0.001 ,"#, "");
    std::fs::write(&cfg, text.replace(r#""n_steps": 10"#, r#""n_steps": 200"#)).unwrap();
    let out = mspec(&["train", "--config", p(&cfg)], None);
    assert_eq!(code(&out), 4, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn trained_card(dir: &Path, model: &str, steps: usize) -> PathBuf {
    let cfg = small_config(dir, model, "");
    let text = std::fs::read_to_string(&cfg).unwrap().replace(r#""n_steps": 10"#, &format!(r#""n_steps": {}"#, steps));
    std::fs::write(&cfg, text).unwrap();
    ok(mspec(&["train", "--config", p(&cfg)], None));
    dir.join("run").join("card.json")
}

#[test]
fn diagnose_is_calibrated_and_rejects_corrupt_input() {
    let dir = tempfile::tempdir().unwrap();
    let card = trained_card(dir.path(), "gaussian2d", 10);
    let cfg = dir.path().join("config.json");

    let corrupt = dir.path().join("corrupt.csv");
    std::fs::write(&corrupt, "dataset_id,obs_id,x0,x1\n0,0,0.1,zz\n").unwrap();
    let out = mspec(&["diagnose", "--card", p(&card), "--data", p(&corrupt), "--null", "100"], None);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let runs = 20;
    let mut accepted = 0;
    for seed in 0..runs {
        let data_dir = dir.path().join(format!("sim{}", seed));
        ok(mspec(&["simulate", "--config", p(&cfg), "--n", "20", "--k", "20", "--out", p(&data_dir)], Some(100 + seed)));
        let out = mspec(
            &["diagnose", "--card", p(&card), "--data", p(&data_dir.join("data.csv")), "--null", "100", "--out", p(&data_dir)],
            None,
        );
        match code(&out) {
            0 => accepted += 1,
            3 => {}
            c => panic!("unexpected exit {}: {}", c, String::from_utf8_lossy(&out.stderr)),
        }
        let report = read_json(&data_dir.join("diagnosis.json"));
        assert_eq!(report["result"]["reject"].as_bool().unwrap(), code(&out) == 3);
        assert!(data_dir.join("observed_summaries.csv").exists());
    }
    // 95% acceptance expected; 16 of 20 is below the 1% binomial tail
    assert!(accepted >= 16, "accepted {} of {}", accepted, runs);
}

#[test]
fn necrosis_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let card = trained_card(dir.path(), "cancer_stromal", 300);
    let shifted = write_config(
        dir.path(),
        "shifted.json",
        r#"{"model": {"name": "cancer_stromal", "misspec": {"variant": "necrosis", "pi": 0.75}}, "seed": 3}"#,
    );
    let data = dir.path().join("necrotic");
    ok(mspec(&["simulate", "--config", p(&shifted), "--n", "100", "--out", p(&data)], None));
    let out = mspec(&["diagnose", "--card", p(&card), "--data", p(&data.join("data.csv")), "--null", "200", "--out", p(&data)], None);
    assert_eq!(code(&out), 3, "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn analysis_commands_produce_artifacts_independent_of_workers() {
    let dir = tempfile::tempdir().unwrap();
    let card = trained_card(dir.path(), "gaussian2d", 10);
    let power = |workers: &str, out: &Path| {
        ok(mspec(
            &[
                "power", "--card", p(&card), "--misspec", r#"{"variant": "prior_location", "mu0": [3.0]}"#,
                "--n", "20", "--trials", "30", "--null", "100", "--workers", workers, "--out", p(out),
            ],
            None,
        ));
        read_json(&out.join("power.json"))
    };
    let serial = power("1", &dir.path().join("p1"));
    let parallel = power("3", &dir.path().join("p3"));
    assert_eq!(serial, parallel);
    assert!(serial["power"].as_f64().unwrap() > 0.5);

    let sweep = dir.path().join("sweep");
    ok(mspec(
        &[
            "sweep", "--card", p(&card), "--axis", "mu0=0,2", "--axis", "tau0=1,3", "--n", "20", "--reps", "3",
            "--null", "100", "--workers", "2", "--posterior-draws", "50", "--out", p(&sweep),
        ],
        None,
    ));
    assert_eq!(std::fs::read_to_string(sweep.join("sweep.csv")).unwrap().lines().count(), 5);
    let grid = read_json(&sweep.join("sweep.json"));
    assert!(grid["grid"]["cells"][0]["median_posterior_error"].is_number());

    let sbc = dir.path().join("sbc");
    ok(mspec(&["sbc", "--card", p(&card), "--n", "20", "--l", "50", "--out", p(&sbc)], None));
    assert_eq!(read_json(&sbc.join("sbc.json"))["uniformity"].as_array().unwrap().len(), 2);

    let pca = dir.path().join("pca");
    ok(mspec(&["pca", "--card", p(&card), "--n", "200", "--out", p(&pca)], None));
    let result = read_json(&pca.join("pca.json"));
    let total: f64 = result["explained_ratio"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
    let again = dir.path().join("pca2");
    ok(mspec(&["pca", "--summaries", p(&pca.join("pca_summaries.csv")), "--out", p(&again)], None));
    assert_eq!(read_json(&again.join("pca.json")), result);
    for d in [&sweep, &sbc, &pca] {
        assert!(d.join("manifest.json").exists());
    }
}

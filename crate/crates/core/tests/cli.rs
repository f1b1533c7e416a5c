use std::path::Path;
use std::process::{Command, Output};

fn aslsl(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aslsl"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn ok(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn generate_inject_fit_rank_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s);
    ok(&aslsl(
        &p("gen"),
        &["generate", "--n", "90", "--dim", "12", "--seed", "3"],
    ));
    let manifest = p("gen/manifest.json");
    assert!(manifest.exists() && p("gen/informative.json").exists());

    ok(&aslsl(
        &p("inj"),
        &["inject", "--manifest", manifest.to_str().unwrap(), "--ratio", "0.3"],
    ));
    let masked = aslsl::load_dataset(p("inj/manifest.json")).unwrap();
    for v in masked.views() {
        assert_eq!(v.n_present(), 90 - 27);
    }

    let inj = p("inj/manifest.json");
    let summary = ok(&aslsl(
        &p("fit"),
        &[
            "fit",
            "--manifest",
            inj.to_str().unwrap(),
            "--max-iters",
            "30",
            "--seed",
            "1",
        ],
    ));
    let summary: serde_json::Value = serde_json::from_str(&summary).unwrap();
    assert_eq!(summary["iterations"], 30);
    for f in ["model.json", "convergence.csv", "alpha.csv", "ranking.csv"] {
        assert!(p("fit").join(f).exists(), "{f}");
    }

    let model = p("fit/model.json");
    let selected = ok(&aslsl(
        &p("rank"),
        &["rank", "--model", model.to_str().unwrap(), "--fraction", "0.25"],
    ));
    let selected: Vec<Vec<usize>> = serde_json::from_str(&selected).unwrap();
    assert_eq!(selected.iter().map(Vec::len).sum::<usize>(), 9);

    let metrics = ok(&aslsl(
        &p("eval"),
        &[
            "evaluate",
            "--manifest",
            inj.to_str().unwrap(),
            "--model",
            model.to_str().unwrap(),
            "--mlknn-k",
            "5",
        ],
    ));
    let m: aslsl::MetricReport = serde_json::from_str(&metrics).unwrap();
    assert!((0.0..=1.0).contains(&m.average_precision));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{
            "source": {"kind": "synthetic", "n": 50, "k": 2, "dims": [8, 8], "informative_per_view": 2, "noise_level": 0.1, "seed": 4},
            "missing_ratios": [0.2], "lambda": [1.0], "eta": [1.0], "delta": [1.0], "gamma": [2.0],
            "trials": 5, "max_iters": 20, "mlknn_neighbors": 3
        }"#,
    )
    .unwrap();
    let out = dir.path().join("run");
    ok(&aslsl(
        &out,
        &[
            "run",
            "--config",
            cfg.to_str().unwrap(),
            "--trials",
            "2",
            "--gamma",
            "2,3",
        ],
    ));
    let echoed: aslsl::experiment::ExperimentConfig =
        serde_json::from_str(&std::fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(echoed.trials, 2);
    assert_eq!(echoed.gamma, vec![2.0, 3.0]);
    assert_eq!(echoed.max_iters, 20);
    let trials = std::fs::read_to_string(out.join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + 2 * 2);
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_aslsl"))
        .env("ASLSL_OUT_DIR", &out)
        .args(["generate", "--n", "20", "--dim", "4", "--informative", "1"])
        .output()
        .unwrap();
    ok(&o);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn fatal_errors_are_json_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let o = aslsl(dir.path(), &["fit", "--manifest", "does/not/exist.json"]);
    assert!(!o.status.success());
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "io");
    assert!(err["message"].as_str().unwrap().contains("exist.json"));

    let o = aslsl(dir.path(), &["run", "--trials", "0"]);
    assert!(!o.status.success());
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "invalid_parameter");
}

#[test]
fn non_binary_labels_are_reported_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(p.join("v0.csv"), "1,2,3\n4,5,6\n").unwrap();
    std::fs::write(p.join("y.csv"), "1,0,0.5\n").unwrap();
    std::fs::write(p.join("s.csv"), "1,1,1\n").unwrap();
    std::fs::write(
        p.join("manifest.json"),
        r#"{"name":"bad","views":[{"id":0,"path":"v0.csv"}],"labels":"y.csv","masks":"s.csv"}"#,
    )
    .unwrap();
    let o = aslsl(
        &p.join("out"),
        &["fit", "--manifest", p.join("manifest.json").to_str().unwrap()],
    );
    assert!(!o.status.success());
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    let msg = err["message"].as_str().unwrap();
    assert!(msg.contains("non-binary label") && msg.contains("y.csv"), "{msg}");
}

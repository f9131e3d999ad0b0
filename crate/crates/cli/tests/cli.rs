use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn specinfer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specinfer"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

/// Cheap settings so a full pipeline runs in seconds.
const SMALL: &str = r#"
[sensitivity]
n_base = 64
[sampler]
n_steps = 4000
burn_in = 1000
[diagnostics]
n_draws = 50
predict_times = [1.0]
predict_points = 32
"#;

#[test]
fn generate_spatial_writes_the_requested_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = specinfer(&["generate", "--out", out, "--seed", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let x = column(&dir.path().join("observations.csv"), "x");
    let t = column(&dir.path().join("observations.csv"), "t");
    assert_eq!(x.len(), 512);
    assert_eq!(x[0], 0.0);
    assert!(x.iter().all(|&v| (0.0..4.0).contains(&v)));
    assert!(t.iter().all(|&v| v == 0.5));
    let m = manifest(dir.path());
    assert_eq!(m["stages"], serde_json::json!(["generate"]));
    assert_eq!(m["config"]["seed"], 5);
}

#[test]
fn generate_time_series_from_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "[data]\nseries = \"time\"\nn_obs = 32\n").unwrap();
    let out = dir.path().join("run");
    let o = specinfer(&["generate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let t = column(&out.join("observations.csv"), "t");
    let x = column(&out.join("observations.csv"), "x");
    assert_eq!(t.len(), 32);
    assert_eq!(t[0], 0.0);
    assert!((t[31] - 4.0).abs() < 1e-12);
    assert!(x.iter().all(|&v| v == 2.0));
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let digests: Vec<_> = ["a", "b"]
        .iter()
        .map(|name| {
            let out = dir.path().join(name);
            let o = specinfer(&[
                "pipeline",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--seed",
                "11",
            ]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            manifest(&out)["artifacts"].clone()
        })
        .collect();
    assert_eq!(digests[0], digests[1]);

    let out = dir.path().join("a");
    for f in ["chain.csv", "kl.csv", "modes.csv", "correlation.svg", "predictive_fit.csv", "predictive_profile_t1.csv"] {
        assert!(out.join(f).exists(), "missing {f}");
    }
    let m = manifest(&out);
    assert_eq!(
        m["stages"],
        serde_json::json!(["generate", "sensitivity", "optimize", "sample", "diagnose"])
    );
    assert!(m["failed_stage"].is_null());
}

#[test]
fn stages_can_run_one_at_a_time_against_a_data_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let cfg = cfg.to_str().unwrap();
    let data = dir.path().join("data");
    let run = dir.path().join("run");
    let (data, run) = (data.to_str().unwrap(), run.to_str().unwrap());
    assert!(specinfer(&["generate", "--config", cfg, "--out", data]).status.success());
    for stage in ["sensitivity", "optimize", "sample", "diagnose"] {
        let o = specinfer(&[stage, "--config", cfg, "--out", run, "--data", data]);
        assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!Path::new(run).join("observations.csv").exists());
    assert!(Path::new(run).join("diagnostics.json").exists());
}

#[test]
fn failures_exit_with_the_stage_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[data]\nn_obs = \"lots\"\n").unwrap();
    let out = dir.path().join("run");
    let o = specinfer(&["generate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(10));
    assert!(String::from_utf8_lossy(&o.stderr).contains("config stage failed"));

    // Optimizing before screening has nothing to read.
    let o = specinfer(&["generate", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let o = specinfer(&["optimize", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(13));
    let m = manifest(&out);
    assert_eq!(m["failed_stage"], "optimize");
    assert!(m["error"].as_str().unwrap().contains("selection.json"));
}

#[test]
fn small_ensemble_pipeline_writes_held_out_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("hifi.toml");
    fs::write(&cfg, format!("case = \"hifi\"\n{SMALL}\n[hifi]\nnx = 64\nny = 16\nn_members = 12\nn_obs = 8\n")).unwrap();
    let out = dir.path().join("run");
    let o = specinfer(&["pipeline", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ens: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("ensemble.json")).unwrap()).unwrap();
    assert_eq!(ens["seeds"].as_array().unwrap().len(), 12);
    assert_eq!(column(&out.join("observations.csv"), "x").len(), 8);
    assert_eq!(column(&out.join("mean.csv"), "x").len(), 64);
    assert!(out.join("observations_covariance.csv").exists());
    let t = column(&out.join("predictive_extrapolation.csv"), "t");
    assert!(t.iter().all(|&t| t == 1.0));
}

#[test]
fn stages_leave_the_data_directory_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.toml");
    fs::write(&cfg, SMALL).unwrap();
    let cfg = cfg.to_str().unwrap();
    let data = dir.path().join("data");
    assert!(specinfer(&["generate", "--config", cfg, "--out", data.to_str().unwrap()]).status.success());
    let snapshot = |d: &Path| {
        let mut files: Vec<_> = fs::read_dir(d)
            .unwrap()
            .map(|e| {
                let p = e.unwrap().path();
                (p.clone(), fs::read(&p).unwrap())
            })
            .collect();
        files.sort();
        files
    };
    let before = snapshot(&data);
    let run = dir.path().join("run");
    let o = specinfer(&[
        "pipeline",
        "--config",
        cfg,
        "--out",
        run.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(before, snapshot(&data));
}

use std::path::Path;
use std::process::{Command, Output};

fn fedimt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedimt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("exp.toml");
    std::fs::write(
        &path,
        format!(
            "seed = 4\nrounds = 4\nnum_clients = 6\nselection_rate = 0.5\nlocal_epochs = 1\nhidden_layers = [6]\n\
             shards_per_client = 2\nsynthetic_counts = [90, 45, 15]\nsynthetic_dim = 5\n\
             csv_path = \"out/m.csv\"\njson_path = \"out/r.json\"\n{extra}"
        ),
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_writes_files_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let out = fedimt(&["run", "--config", &config]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("out/m.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5);
    assert!(dir.path().join("out/r.json").is_file());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("seed 4:"));
}

#[test]
fn run_twice_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let read = |name: &str| std::fs::read(dir.path().join("out").join(name)).unwrap();
    let mut outputs = Vec::new();
    for _ in 0..2 {
        assert!(fedimt(&["run", "--config", &config]).status.success());
        outputs.push((read("m.csv"), read("r.json")));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn sweep_writes_per_seed_files_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "repeats = 2");
    let out = fedimt(&["sweep", "--config", &config]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for seed in [4, 5] {
        assert!(dir.path().join(format!("out/m_seed{seed}.csv")).is_file());
        assert!(dir.path().join(format!("out/r_seed{seed}.json")).is_file());
    }
    let agg: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("out/r_aggregate.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(agg["seeds"], serde_json::json!([4, 5]));
}

#[test]
fn estimate_only_defaults_to_zero_momentum() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "algorithm = \"baseline\"");
    let out = fedimt(&["estimate-only", "--config", &config]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/r.json")).unwrap())
            .unwrap();
    assert_eq!(report["config"]["fl"]["momentum"], 0.0);
    assert_eq!(report["config"]["fl"]["algorithm"], "fedimt");
    assert!(report["records"][1]["t_j"].is_number());
}

#[test]
fn gen_data_round_trips_through_an_idx_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "");
    let data = dir.path().join("data");
    let out = fedimt(&[
        "gen-data",
        "--config",
        &config,
        "--out",
        &data.to_string_lossy(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let idx_config = dir.path().join("idx.toml");
    std::fs::write(
        &idx_config,
        "train_images = \"data/train-images.idx3-ubyte\"\ntrain_labels = \"data/train-labels.idx1-ubyte\"\n\
         test_images = \"data/test-images.idx3-ubyte\"\ntest_labels = \"data/test-labels.idx1-ubyte\"\n\
         rounds = 2\nnum_clients = 6\nselection_rate = 0.5\nlocal_epochs = 1\nhidden_layers = [6]\n\
         csv_path = \"idx.csv\"\njson_path = \"idx.json\"",
    )
    .unwrap();
    let out = fedimt(&["run", "--config", &idx_config.to_string_lossy()]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(fedimt(&[]).status.code(), Some(2));
    assert_eq!(fedimt(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(fedimt(&["run"]).status.code(), Some(2));
    let missing = fedimt(&["run", "--config", "/nonexistent/exp.toml"]);
    assert_eq!(missing.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&missing.stderr);
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    assert!(stderr.contains("not found"));
}

#[test]
fn bad_config_is_reported_with_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "learning_rat = 0.1");
    let out = fedimt(&["run", "--config", &config]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rat"));
}

#[test]
fn runtime_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // More shards than samples: parses, then fails while partitioning.
    let config = write_config(dir.path(), "");
    std::fs::write(
        &config,
        std::fs::read_to_string(&config).unwrap().replace(
            "synthetic_counts = [90, 45, 15]",
            "synthetic_counts = [3, 2, 1]",
        ),
    )
    .unwrap();
    let out = fedimt(&["run", "--config", &config]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("error: "), "{stderr}");
}

#[test]
fn help_exits_zero() {
    let out = fedimt(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("estimate-only"));
}

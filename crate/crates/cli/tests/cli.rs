use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "geometry": {"length_m": 30},
  "grid": {"spacing_m": 0.5},
  "env": {"initial_positions": [0, 15, 30]},
  "agent": {"episodes": 8},
  "cgan": {"epochs": 2, "train_stride_m": 3}
}"#;

fn apopt(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_apopt"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = apopt(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("small.json"), SMALL).unwrap();
    dir
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn simulate_writes_every_integer_position() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("ten.json"),
        r#"{"geometry": {"length_m": 10}, "env": {"initial_positions": [0, 5, 10]}}"#,
    )
    .unwrap();
    ok(dir.path(), &["simulate", "--config", "ten.json", "--out", "a"]);
    let map = rows(&dir.path().join("a/map.csv"));
    let mut positions: Vec<&str> = map.iter().map(|r| r[0].as_str()).collect();
    positions.dedup();
    assert_eq!(positions.len(), 11);
    assert_eq!(map.len(), 11 * 101);
    // AP at 3 m, receiver at 7.5 m.
    let spot = map.iter().find(|r| r[0] == "3" && r[1] == "75").unwrap();
    assert_eq!(spot[2], "50.200003");
    assert!(dir.path().join("a/config.resolved.json").exists());

    ok(dir.path(), &["simulate", "--config", "ten.json", "--out", "b"]);
    assert_eq!(
        std::fs::read(dir.path().join("a/map.csv")).unwrap(),
        std::fs::read(dir.path().join("b/map.csv")).unwrap()
    );
}

#[test]
fn compare_is_seeded_and_self_consistent() {
    let dir = setup();
    let args = |out| ["compare", "--config", "small.json", "--seed", "4", "--out", out];
    ok(dir.path(), &args("a"));
    ok(dir.path(), &args("b"));
    let a = std::fs::read(dir.path().join("a/comparison.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b/comparison.csv")).unwrap());

    let table = rows(&dir.path().join("a/comparison.csv"));
    let methods: Vec<&str> = table.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(methods, ["hj", "dqn", "dueling_dqn"]);
    for r in &table {
        let init: f64 = r[1].parse().unwrap();
        let opt: f64 = r[2].parse().unwrap();
        let pct: f64 = r[3].parse().unwrap();
        assert!((pct - 100.0 * (init - opt) / init).abs() < 1e-9);
    }
}

#[test]
fn alpha_sweep_respects_the_list() {
    let dir = setup();
    ok(dir.path(), &["alpha-sweep", "--config", "small.json", "--alphas", "0.5", "--out", "one"]);
    assert_eq!(rows(&dir.path().join("one/alpha_sweep.csv")).len(), 1);

    ok(dir.path(), &["alpha-sweep", "--config", "small.json", "--alphas", "0,1", "--out", "ends"]);
    let table = rows(&dir.path().join("ends/alpha_sweep.csv"));
    assert_eq!(table.len(), 2);
    for r in &table {
        let (alpha, cost, f1, f2) = (r[0].as_str(), &r[4], &r[7], &r[8]);
        match alpha {
            "0" => assert_eq!(cost, f2),
            "1" => assert_eq!(cost, f1),
            other => panic!("unexpected alpha {other}"),
        }
    }
}

#[test]
fn stats_and_single_runs() {
    let dir = setup();
    ok(dir.path(), &["stats", "--config", "small.json", "--positions", "2,15,28", "--out", "s"]);
    let hist = rows(&dir.path().join("s/pl_pdf_cdf.csv"));
    assert_eq!(hist.last().unwrap()[3], "1");
    assert_eq!(rows(&dir.path().join("s/coverage.csv")).len(), 61);

    let stdout = ok(dir.path(), &["train", "--config", "small.json", "--method", "dqn", "--out", "t"]);
    assert!(stdout.starts_with("dqn:"));
    assert!(dir.path().join("t/dqn_checkpoint.json").exists());
    ok(dir.path(), &["hj", "--config", "small.json", "--out", "h"]);
    assert!(dir.path().join("h/hj_history.csv").exists());
}

#[test]
fn map_flag_feeds_a_saved_map() {
    let dir = setup();
    ok(dir.path(), &["simulate", "--config", "small.json", "--out", "m"]);
    ok(dir.path(), &["hj", "--config", "small.json", "--out", "x"]);
    ok(dir.path(), &["hj", "--config", "small.json", "--map", "m/map.csv", "--out", "y"]);
    ok(dir.path(), &["hj", "--config", "small.json", "--map", "m/map.csv", "--out", "z"]);
    let read = |d: &str| -> serde_json::Value {
        serde_json::from_str(&std::fs::read_to_string(dir.path().join(d).join("hj_result.json")).unwrap()).unwrap()
    };
    let (x, y) = (read("x"), read("y"));
    assert_eq!(y, read("z"));
    // The CSV holds six decimals, so costs agree to that resolution.
    let (cx, cy) = (x["initial_cost"].as_f64().unwrap(), y["initial_cost"].as_f64().unwrap());
    assert!((cx - cy).abs() < 1e-4, "{cx} vs {cy}");
}

#[test]
fn cgan_train_then_augment() {
    let dir = setup();
    let stdout = ok(dir.path(), &["cgan-train", "--config", "small.json", "--out", "g"]);
    assert!(stdout.contains("validation MAE"));
    for f in ["generator.json", "discriminator.json", "cgan_trace.csv", "error_report.csv", "error_summary.json"] {
        assert!(dir.path().join("g").join(f).exists(), "{f}");
    }
    ok(dir.path(), &["cgan-augment", "--config", "small.json", "--out", "g", "--check-gap"]);
    let aug = rows(&dir.path().join("g/augmented_map.csv"));
    assert_eq!(aug.len(), 31 * 61);
    assert!(dir.path().join("g/augment_gap.json").exists());
}

#[test]
fn exit_codes() {
    let dir = setup();
    std::fs::write(dir.path().join("bad.json"), r#"{"cost": {"alpha": 3}}"#).unwrap();
    std::fs::write(dir.path().join("unknown.json"), r#"{"nope": 1}"#).unwrap();
    std::fs::write(dir.path().join("broken.csv"), "ap_position_m,receiver_index,path_loss_db\n0,0,abc\n").unwrap();

    assert_eq!(apopt(dir.path(), &["hj", "--config", "bad.json"]).status.code(), Some(1));
    assert_eq!(apopt(dir.path(), &["hj", "--config", "unknown.json"]).status.code(), Some(1));
    assert_eq!(apopt(dir.path(), &["hj", "--config", "missing.json"]).status.code(), Some(1));
    assert_eq!(apopt(dir.path(), &["frobnicate"]).status.code(), Some(1));
    let data = apopt(dir.path(), &["hj", "--config", "small.json", "--map", "broken.csv"]);
    assert_eq!(data.status.code(), Some(2));
    assert_eq!(
        apopt(dir.path(), &["cgan-augment", "--config", "small.json", "--generator", "none.json"]).status.code(),
        Some(3)
    );
    assert_eq!(apopt(dir.path(), &["--help"]).status.code(), Some(0));
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use entropystop::tensor::RngStream;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_entropystop"))
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin().args(args).current_dir(dir).output().expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = run(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// `n` rows of `d` standard-normal features; labels alternate when asked.
fn write_random_csv(path: &Path, n: usize, d: usize, labels: bool, seed: u64) {
    let mut rng = RngStream::new(seed);
    let mut s: String = (0..d).map(|i| format!("x{i}")).collect::<Vec<_>>().join(",");
    if labels {
        s.push_str(",label");
    }
    s.push('\n');
    for i in 0..n {
        let row: Vec<String> = (0..d).map(|_| rng.normal().to_string()).collect();
        s.push_str(&row.join(","));
        if labels {
            s.push_str(if i % 2 == 0 { ",0" } else { ",1" });
        }
        s.push('\n');
    }
    fs::write(path, s).unwrap();
}

fn files_with(dir: &Path, suffix: &str) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.to_string_lossy().ends_with(suffix))
        .collect();
    v.sort();
    v
}

#[test]
fn inject_cluster_suite_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    ok(
        &[
            "inject", "--kind", "cluster", "--ratio", "0.1", "--n", "1000", "--d", "8", "--count", "10", "--seed", "1",
            "--out", "suite",
        ],
        tmp.path(),
    );
    let csvs = files_with(&tmp.path().join("suite"), ".csv");
    assert_eq!(csvs.len(), 10);
    for p in &csvs {
        let text = fs::read_to_string(p).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 1112, "{}", p.display());
        let outliers = rows.iter().filter(|r| r.ends_with(",1")).count();
        assert_eq!(outliers, 112);
    }
    assert!(tmp.path().join("suite/manifest.json").exists());
}

#[test]
fn inject_ratio_04_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let out = ok(
        &["inject", "--kind", "global", "--ratio", "0.4", "--n", "1000", "--d", "3", "--count", "1", "--out", "s"],
        tmp.path(),
    );
    assert!(out.contains("1667 rows, 667 outliers"), "{out}");
}

#[test]
fn manifest_replays_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    ok(
        &[
            "inject", "--kind", "local,cluster", "--ratio", "0.05,0.2", "--n", "200", "--d", "4", "--count", "2", "--seed",
            "9", "--out", "a",
        ],
        tmp.path(),
    );
    ok(&["inject", "--manifest", "a/manifest.json", "--out", "b"], tmp.path());
    let a = files_with(&tmp.path().join("a"), "");
    let b = files_with(&tmp.path().join("b"), "");
    assert_eq!(a.len(), 9);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.file_name(), y.file_name());
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap(), "{}", x.display());
    }
}

#[test]
fn train_is_deterministic_and_names_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    write_random_csv(&tmp.path().join("d.csv"), 120, 4, true, 3);
    let args = |out: &'static str| {
        vec![
            "train", "--model", "ae", "--mode", "entropy", "--data", "d.csv", "--seed", "7", "--epochs", "15",
            "--patience", "20", "--out", out,
        ]
    };
    ok(&args("r1"), tmp.path());
    ok(&args("r2"), tmp.path());
    let j1 = files_with(&tmp.path().join("r1"), "_s7.json");
    let j2 = files_with(&tmp.path().join("r2"), "_s7.json");
    assert_eq!(j1.len(), 1);
    assert_eq!(fs::read(&j1[0]).unwrap(), fs::read(&j2[0]).unwrap());
    assert_eq!(files_with(&tmp.path().join("r1"), "_s7.trace.csv").len(), 1);

    let result: serde_json::Value = serde_json::from_slice(&fs::read(&j1[0]).unwrap()).unwrap();
    assert_eq!(result["mode"], "entropy");
    assert_eq!(result["seed"], 7);
    let hash = result["config_hash"].as_str().unwrap();
    assert!(j1[0].to_string_lossy().contains(&hash[..12]));
    assert!(result["selected_iter"].as_u64() <= result["total_iters"].as_u64());
}

#[test]
fn train_from_config_file_with_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    write_random_csv(&tmp.path().join("d.csv"), 60, 3, true, 4);
    let cfg = r#"{
        "model": {"kind": "svdd", "dims": [3, 8, 4], "relu_slope": 0.1},
        "optimizer": {"kind": {"adam": {"beta1": 0.9, "beta2": 0.999, "eps": 1e-8}}, "lr": 0.001, "weight_decay": 0.0},
        "batch_size": 16, "epochs": 50,
        "stopper": {"patience": 10, "r_down": 0.1},
        "n_eval": 32, "seed": 2,
        "data": {"source": "csv", "path": "d.csv"}
    }"#;
    fs::write(tmp.path().join("c.json"), cfg).unwrap();
    let out = ok(&["train", "--config", "c.json", "--mode", "naive", "--epochs", "2", "--out", "r"], tmp.path());
    assert!(out.contains("svdd naive"), "{out}");
    assert!(out.contains("of 8 (max 8)"), "{out}");
}

#[test]
fn untrained_naive_scores_are_uninformative() {
    let tmp = tempfile::tempdir().unwrap();
    write_random_csv(&tmp.path().join("d.csv"), 2000, 6, true, 5);
    ok(
        &["train", "--mode", "naive", "--epochs", "0", "--data", "d.csv", "--seed", "1", "--out", "r"],
        tmp.path(),
    );
    let json = files_with(&tmp.path().join("r"), "_s1.json");
    let result: serde_json::Value = serde_json::from_slice(&fs::read(&json[0]).unwrap()).unwrap();
    assert_eq!(result["total_iters"], 0);
    let auc = result["auc"].as_f64().unwrap();
    assert!((auc - 0.5).abs() < 0.05, "auc {auc}");
}

#[test]
fn optimal_without_labels_fails() {
    let tmp = tempfile::tempdir().unwrap();
    write_random_csv(&tmp.path().join("u.csv"), 50, 3, false, 6);
    let out = run(&["train", "--mode", "optimal", "--data", "u.csv", "--epochs", "1"], tmp.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("invalid input"), "{}", stderr(&out));
}

#[test]
fn bad_csv_reports_line_number() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("bad.csv"), "a,b,label\n1,2,0\n3,oops,1\n").unwrap();
    let out = run(&["train", "--data", "bad.csv"], tmp.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = bin().args(["train", "--frobnicate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--frobnicate"));
}

#[test]
fn bad_thread_cap_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    write_random_csv(&tmp.path().join("d.csv"), 40, 2, true, 7);
    let out = bin()
        .args(["grid", "--data", "d.csv", "--epochs", "1", "--out", "g"])
        .current_dir(tmp.path())
        .env("ENTROPYSTOP_THREADS", "0")
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(stderr(&out).contains("ENTROPYSTOP_THREADS"));
}

#[test]
fn grid_then_report() {
    let tmp = tempfile::tempdir().unwrap();
    write_random_csv(&tmp.path().join("a_x.csv"), 64, 3, true, 8);
    write_random_csv(&tmp.path().join("b_x.csv"), 64, 3, true, 9);
    let out = bin()
        .args([
            "grid", "--data", "a_x.csv", "b_x.csv", "--epochs", "2", "--batch-size", "32", "--n-eval", "32",
            "--modes", "naive,entropy", "--seed", "4", "--out", "g",
        ])
        .current_dir(tmp.path())
        .env("ENTROPYSTOP_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let runs = files_with(&tmp.path().join("g"), ".runs.csv");
    assert_eq!(runs.len(), 1);
    assert!(runs[0].to_string_lossy().contains("_s4."));
    let text = fs::read_to_string(&runs[0]).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 16 * 2);
    assert_eq!(files_with(&tmp.path().join("g"), ".stats.json").len(), 1);

    let runs_arg = runs[0].to_string_lossy().into_owned();
    let first = ok(&["report", &runs_arg, "--out", "rep1.csv"], tmp.path());
    let second = ok(&["report", &runs_arg, "--out", "rep2.csv"], tmp.path());
    assert_eq!(first, second);
    let rep = fs::read_to_string(tmp.path().join("rep1.csv")).unwrap();
    assert_eq!(rep, fs::read_to_string(tmp.path().join("rep2.csv")).unwrap());
    let groups: Vec<&str> = rep.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(groups, vec!["a", "b", "all"]);
}

const RUNS_HEADER: &str = "dataset,group,model,config_hash,seed,activation,dropout,h_dim,lr,layers,epochs,mode,auc,selected_iter,total_iters,max_iters,wall_time_s,error\n";

fn runs_row(dataset: &str, mode: &str, auc: f64) -> String {
    format!("{dataset},cluster,ae,h,0,relu,0.2,64,0.001,2,250,{mode},{auc},10,10,10,1.0,\n")
}

#[test]
fn report_of_identical_modes_has_no_p_value() {
    let tmp = tempfile::tempdir().unwrap();
    let mut s = RUNS_HEADER.to_string();
    for (i, auc) in [0.6, 0.7, 0.8].iter().enumerate() {
        let ds = format!("cluster_{i}");
        s.push_str(&runs_row(&ds, "naive", *auc));
        s.push_str(&runs_row(&ds, "entropy", *auc));
    }
    fs::write(tmp.path().join("runs.csv"), s).unwrap();
    let out = ok(&["report", "runs.csv"], tmp.path());
    assert!(out.contains("n/a"), "{out}");
    assert!(!out.contains(" *"), "{out}");
}

#[test]
fn report_rejects_mismatched_datasets() {
    let tmp = tempfile::tempdir().unwrap();
    let mut s = RUNS_HEADER.to_string();
    s.push_str(&runs_row("cluster_0", "naive", 0.6));
    s.push_str(&runs_row("cluster_0", "entropy", 0.7));
    s.push_str(&runs_row("cluster_1", "naive", 0.6));
    fs::write(tmp.path().join("runs.csv"), s).unwrap();
    let out = run(&["report", "runs.csv"], tmp.path());
    assert!(!out.status.success());
    assert!(stderr(&out).contains("cluster_1"), "{}", stderr(&out));
}

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hrsnn_cli::manifest::Manifest;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hrsnn"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn bundled_configs_validate() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let p = entry.unwrap().path();
        if p.extension().is_some_and(|e| e == "ini") {
            let o = run(&["validate", "--config", p.to_str().unwrap()]);
            assert!(o.status.success(), "{}: {}", p.display(), stderr(&o));
            n += 1;
        }
    }
    assert!(n >= 6);
}

#[test]
fn bad_probability_gives_one_diagnostic_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.ini", "[run]\ntask = mc-eval\n[network]\np_ee = 1.5\n[mc]\n");
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert_eq!(err.trim().lines().count(), 1, "{err}");
    assert!(err.contains("p_ee"), "{err}");
}

#[test]
fn missing_block_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.ini", "[run]\ntask = predict\n[network]\n");
    let o = run(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("[predict]"), "{}", stderr(&o));
}

#[test]
fn unknown_key_is_rejected_before_running() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&[
        "mc-eval",
        "--config",
        configs().join("delay_line.ini").to_str().unwrap(),
        "--set",
        "mc.colour=blue",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"));
    assert!(!out.exists());
}

#[test]
fn missing_config_file_is_an_io_error() {
    let o = run(&["validate", "--config", "/definitely/not/here.ini"]);
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn numerical_failure_exits_3() {
    // A supercritical Hawkes process trips the intensity bound.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "h.ini",
        "[run]\ntask = hawkes-compare\n[hawkes]\nh1_amplitude = 3\nh2_amplitude = 0\nmax_intensity = 1e4\nhorizon = 50\nn_seeds = 2\n",
    );
    let o = run(&[
        "hawkes-compare",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn delay_line_capacity_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dl");
    let o = run(&[
        "mc-eval",
        "--config",
        configs().join("delay_line.ini").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_csv(&out.join("summary.csv"));
    let c: f64 = rows[0][3].parse().unwrap();
    assert!((9.5..=10.5).contains(&c), "C = {c}");
}

#[test]
fn bo_search_with_budget_equal_to_init_is_random_search() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bo");
    let o = run(&[
        "bo-search",
        "--config",
        configs().join("bo_search.ini").to_str().unwrap(),
        "--objective",
        "efficiency",
        "--budget",
        "5",
        "--n-init",
        "5",
        "--set",
        "network.n_neurons=40",
        "--set",
        "mc.n_samples=400",
        "--set",
        "mc.tau_max=10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_csv(&out.join("history_seed0.csv")).len(), 5);
    let m: Manifest = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert!(m.overrides.contains(&"bo.budget=5".to_string()));
}

#[test]
fn hawkes_with_degenerate_kernels_reports_equal_rates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "h.ini",
        "[run]\ntask = hawkes-compare\nseeds = 3\n[hawkes]\nh1_amplitude = 0.5\nh2_amplitude = 2\nhorizon = 10\nn_seeds = 4\n",
    );
    let out = dir.path().join("h");
    let o = run(&["hawkes-compare", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = read_csv(&out.join("summary.csv"));
    let (m, r): (f64, f64) = (rows[0][1].parse().unwrap(), rows[0][2].parse().unwrap());
    assert!((m - r).abs() < 1e-12 && m > 0.0, "{m} vs {r}");
}

#[test]
fn task_must_match_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "classify",
        "--config",
        configs().join("delay_line.ini").to_str().unwrap(),
        "--out",
        dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn outputs_stay_in_out_dir_and_match_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("mc");
    let o = run(&[
        "mc-eval",
        "--config",
        configs().join("mc_eval.ini").to_str().unwrap(),
        "--set",
        "run.seeds=0,1",
        "--set",
        "network.n_neurons=50",
        "--set",
        "mc.n_samples=500",
        "--set",
        "mc.tau_max=10",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let m: Manifest = serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let mut listed: Vec<String> = m.outputs.iter().map(|r| r.file.clone()).collect();
    listed.push("manifest.json".into());
    listed.sort();
    let mut present: Vec<String> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    present.sort();
    assert_eq!(listed, present);
    let top: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(top.len(), 1, "only the output directory is created");
    assert!(present.contains(&"comparison.csv".to_string()));
    assert_eq!(m.seeds, vec![0, 1]);
    assert_eq!(m.task, "mc-eval");
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let go = |w: &str| {
        let out = dir.path().join(format!("w{w}"));
        let o = run(&[
            "mc-eval",
            "--config",
            configs().join("mc_eval.ini").to_str().unwrap(),
            "--set",
            "run.seeds=0,1,2",
            "--set",
            "network.n_neurons=40",
            "--set",
            "mc.n_samples=300",
            "--set",
            "mc.tau_max=10",
            "--workers",
            w,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        std::fs::read(out.join("summary.csv")).unwrap()
    };
    assert_eq!(go("1"), go("3"));
}

#[test]
fn rerun_detects_tampered_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let o = run(&[
        "gen-data",
        "--config",
        configs().join("gen_lorenz63.ini").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let path = out.join("manifest.json");
    let ok = run(&["rerun", "--manifest", path.to_str().unwrap(), "--out", dir.path().join("r1").to_str().unwrap()]);
    assert!(ok.status.success(), "{}", stderr(&ok));

    let mut m: Manifest = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    m.outputs[0].sha256 = "0".repeat(64);
    std::fs::write(&path, m.to_json().unwrap()).unwrap();
    let bad = run(&["rerun", "--manifest", path.to_str().unwrap(), "--out", dir.path().join("r2").to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("data_seed0.csv"));
}

#[test]
fn seed_flag_replaces_seed_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("u");
    let cfg = write(dir.path(), "u.ini", "[run]\ntask = gen-data\nseeds = 1, 2\n[data]\nkind = uniform\nn_samples = 10\n");
    let o = run(&["gen-data", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("data_seed9.csv").exists());
    assert!(!out.join("data_seed1.csv").exists());
    assert_eq!(read_csv(&out.join("data_seed9.csv")).len(), 10);
}

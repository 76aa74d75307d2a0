use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = "\
name = tiny
grid.r0 = 1.0
grid.r_max = 12.0
grid.n = 221
time.dt = 0.01
time.t_end = 0.4
time.sample_every = 5
initial = gaussian{amplitude = 0.5, width = 1.0, center = 4.0}
cutoff.n_tab = 512
diagnostics.interaction = false
ground_state.r_max = 16.0
ground_state.n = 3201
";

fn nlslab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nlslab"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("NLSLAB_OUT")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("run.cfg");
    std::fs::write(&p, text).unwrap();
    p
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn evolve_writes_series_summary_and_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let o = nlslab(&["evolve", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("tiny");
    let csv = std::fs::read_to_string(dir.join("series.csv")).unwrap();
    assert!(csv.starts_with("t,mass,energy"));
    assert_eq!(csv.lines().count(), 1 + 9);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap();
    assert!(summary["verdict"]["kind"].is_string());
    let ck = std::fs::read_to_string(dir.join("checkpoint.json")).unwrap();
    assert!(ck.contains("nlslab-checkpoint-v1"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let cfg = write_config(d.path(), TINY);
        assert_eq!(code(&nlslab(&["evolve", "--config", cfg.to_str().unwrap()], d.path())), 0);
    }
    for f in ["series.csv", "summary.json", "checkpoint.json"] {
        let x = std::fs::read(a.path().join("tiny").join(f)).unwrap();
        let y = std::fs::read(b.path().join("tiny").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn resume_continues_the_series() {
    let tmp = tempfile::tempdir().unwrap();
    let half = write_config(tmp.path(), &TINY.replace("time.t_end = 0.4", "time.t_end = 0.2"));
    let half_out = tmp.path().join("half");
    assert_eq!(code(&nlslab(&["evolve", "--config", half.to_str().unwrap()], &half_out)), 0);
    let full = write_config(tmp.path(), TINY);
    let ck = half_out.join("tiny/checkpoint.json");
    let resumed = tmp.path().join("resumed");
    let o = nlslab(
        &["evolve", "--config", full.to_str().unwrap(), "--resume", ck.to_str().unwrap()],
        &resumed,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let plain = tmp.path().join("plain");
    assert_eq!(code(&nlslab(&["evolve", "--config", full.to_str().unwrap()], &plain)), 0);
    let tail = std::fs::read_to_string(resumed.join("tiny/series.csv")).unwrap();
    let whole = std::fs::read_to_string(plain.join("tiny/series.csv")).unwrap();
    let tail_rows: Vec<&str> = tail.lines().skip(1).collect();
    assert!(tail_rows.len() > 1);
    assert!(whole.ends_with(&(tail_rows.join("\n") + "\n")));
}

#[test]
fn bad_config_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "grid.r0 = 1.0\ngrid.bogus = 3\n");
    let o = nlslab(&["evolve", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("grid.bogus") && err.contains("line 2"), "{err}");
    let missing = tmp.path().join("absent.cfg");
    assert_eq!(code(&nlslab(&["evolve", "--config", missing.to_str().unwrap()], tmp.path())), 2);
}

#[test]
fn truncated_series_names_the_row() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    assert_eq!(code(&nlslab(&["evolve", "--config", cfg.to_str().unwrap()], tmp.path())), 0);
    let series = tmp.path().join("tiny/series.csv");
    let text = std::fs::read_to_string(&series).unwrap();
    let cut = &text[..text.len() - 40];
    std::fs::write(&series, cut).unwrap();
    let o = nlslab(&["diagnose", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("row"));
}

#[test]
fn diagnose_writes_verdict_and_cutoffs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    assert_eq!(code(&nlslab(&["evolve", "--config", cfg.to_str().unwrap()], tmp.path())), 0);
    let o = nlslab(&["diagnose", "--config", cfg.to_str().unwrap(), "--dump-cutoffs"], tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = tmp.path().join("tiny");
    let verdict: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("verdict.json")).unwrap()).unwrap();
    for key in ["kind", "evidence", "window"] {
        assert!(verdict.get(key).is_some(), "missing {key}");
    }
    let cut = std::fs::read_to_string(dir.join("cutoffs.csv")).unwrap();
    assert!(cut.starts_with("r,chi,phi,phi1,psi"));
}

#[test]
fn ground_state_report_has_constants() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let o = nlslab(&["ground-state", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 0);
    let rep: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("tiny/ground_state.json")).unwrap(),
    )
    .unwrap();
    for key in ["a0", "mass", "kinetic", "l4_fourth", "energy", "em_threshold", "k_threshold", "residuals"] {
        assert!(rep.get(key).is_some(), "missing {key}");
    }
    assert!((rep["a0"].as_f64().unwrap() - 4.3374).abs() < 1e-3);
    let csv = std::fs::read_to_string(tmp.path().join("tiny/ground_state.csv")).unwrap();
    assert!(csv.starts_with("r,Q\n"));
}

#[test]
fn empty_sweep_gives_header_only() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let o = nlslab(
        &["sweep", "--config", cfg.to_str().unwrap(), "--param", "initial.amplitude", "--values", ""],
        tmp.path(),
    );
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(tmp.path().join("tiny/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1);
    let bad = nlslab(
        &["sweep", "--config", cfg.to_str().unwrap(), "--param", "grid.nope", "--values", "1"],
        tmp.path(),
    );
    assert_eq!(code(&bad), 2);
}

#[test]
fn sweep_output_does_not_depend_on_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let mut outputs = Vec::new();
    for workers in ["1", "4"] {
        let out = tmp.path().join(workers);
        let o = nlslab(
            &[
                "sweep",
                "--config",
                cfg.to_str().unwrap(),
                "--param",
                "initial.amplitude",
                "--values",
                "0.2,0.4,0.6,0.8",
                "--workers",
                workers,
            ],
            &out,
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(std::fs::read(out.join("tiny/sweep.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn env_var_overrides_out() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), TINY);
    let env_out = tmp.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_nlslab"))
        .args(["ground-state", "--config", cfg.to_str().unwrap(), "--out"])
        .arg(tmp.path().join("from_flag"))
        .env("NLSLAB_OUT", &env_out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(env_out.join("tiny/ground_state.json").exists());
    assert!(!tmp.path().join("from_flag").exists());
}

#[test]
fn expected_scattering_but_blowup_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let text = "\
name = collapse
grid.r0 = 0.0
grid.r_max = 10.0
grid.n = 401
time.dt = 0.005
time.t_end = 1.0
initial = gaussian{amplitude = 6.0, width = 1.0, center = 0.0}
diagnostics.interaction = false
ground_state.r_max = 16.0
ground_state.n = 3201
expect = scattering
";
    let cfg = write_config(tmp.path(), text);
    let o = nlslab(&["evolve", "--config", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn verify_passes_on_a_small_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &TINY.replace("ground_state.r_max = 16.0\nground_state.n = 3201\n", ""));
    let o = nlslab(&["verify", "--config", cfg.to_str().unwrap(), "--seed", "5"], tmp.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{stdout}{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout.contains("PASS morawetz_identity"));
    assert!(!stdout.contains("FAIL"));
}

use std::fs;
use std::process::{Command, Output};

fn raol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_raol"))
        .args(args)
        .env_remove("RAOL_OUT")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn lists_all_scenarios() {
    let o = raol(&["list-scenarios"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 15);
    assert!(text.contains("baseline_ignore_valpha"));
}

#[test]
fn budget_exit_codes() {
    let ok = raol(&[
        "validate-budget",
        "--horizon",
        "4",
        "--nt",
        "4",
        "--a",
        "1",
        "--c",
        "1",
    ]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).contains("lhs=2.000000000 rhs=2.000000000 ok"));

    let bad = raol(&["validate-budget", "--horizon", "100", "--nt", "1"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("VIOLATED"));
    assert!(stdout(&bad).contains("smallest constant n for this budget: 100"));

    let err = raol(&["validate-budget", "--nt", "zero"]);
    assert_eq!(err.status.code(), Some(2));
}

#[test]
fn run_from_config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("out");
    fs::write(
        &cfg,
        format!(
            "scenario = \"valpha_sweep_m1\"\nmode = \"first\"\nruns = 2\nout = \"{}\"\n",
            out.display()
        ),
    )
    .unwrap();
    let o = raol(&["run", "--config", cfg.to_str().unwrap(), "--runs", "1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<_> = fs::read_dir(out.join("valpha_sweep_m1")).unwrap().collect();
    // One trace plus summary, oracle and params.
    assert_eq!(files.len(), 4);
    let params = fs::read_to_string(out.join("valpha_sweep_m1/params.toml")).unwrap();
    assert!(params.contains("v_alpha = 0.7"));
}

#[test]
fn unknown_config_key_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "scenario = \"step\"\nlearning_rate = 2\n").unwrap();
    let o = raol(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_scenario_is_an_error() {
    let o = raol(&["run", "--scenario", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope"));
}

#[test]
fn bounds_suites_report_pass() {
    for lemma in ["4", "5", "7"] {
        let o = raol(&["bounds", "--lemma", lemma, "--trials", "50"]);
        assert_eq!(o.status.code(), Some(0), "lemma {lemma}");
        assert!(stdout(&o).contains("PASS"));
    }
}

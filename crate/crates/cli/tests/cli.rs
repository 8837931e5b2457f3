use std::fs;
use std::process::{Command, Output};

fn adcalc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adcalc")).args(args).env_remove("ADCALC_THREADS").output().unwrap()
}

fn text(o: &Output) -> (String, String) {
    (String::from_utf8_lossy(&o.stdout).into_owned(), String::from_utf8_lossy(&o.stderr).into_owned())
}

#[test]
fn passing_run_writes_a_report_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rep");
    let o = adcalc(&["classify", "--grid-n", "256", "--out", out.to_str().unwrap()]);
    let (stdout, stderr) = text(&o);
    assert_eq!(o.status.code(), Some(0), "{stdout}{stderr}");
    assert!(stdout.contains("classify: pass"));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["scenario"], "classify");
    assert_eq!(summary["pass"], true);
    assert!(out.join("seminorms.csv").is_file());
}

#[test]
fn failed_check_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "scenario = 'classify'\nexpect = 'S_c'\n[family]\ncorpus = 'hermite-4'\n").unwrap();
    let o = adcalc(&["classify", "--config", cfg.to_str().unwrap()]);
    let (stdout, _) = text(&o);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout.contains("FAIL"));
}

#[test]
fn config_errors_name_the_field_and_exit_two() {
    let o = adcalc(&["classify", "--t-min", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).1.contains("quadrature.t_min"), "{}", text(&o).1);

    let o = adcalc(&["quantize-compare", "--grid-n", "100"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).1.contains("grid.n"));
}

#[test]
fn subcommand_must_match_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "scenario = 'corner'\n").unwrap();
    let o = adcalc(&["classify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(text(&o).1.contains("scenario"));
}

#[test]
fn reports_do_not_depend_on_the_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let mut outs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(threads);
        let o = Command::new(env!("CARGO_BIN_EXE_adcalc"))
            .args(["quantize-compare", "--grid-n", "64", "--t-nodes", "33", "--out", out.to_str().unwrap()])
            .env("ADCALC_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.code().is_some_and(|c| c <= 1), "{}", text(&o).1);
        outs.push((fs::read(out.join("summary.json")).unwrap(), fs::read(out.join("probes.csv")).unwrap()));
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn example_configs_parse() {
    let root = concat!(env!("CARGO_MANIFEST_DIR"), "/../../scenarios");
    let mut n = 0;
    for e in fs::read_dir(root).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            let cfg = adcalc::scenario::ScenarioConfig::load(&p).unwrap();
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 8);
}

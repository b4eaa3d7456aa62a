use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cmsw_core::fixtures::{synthetic_oil, synthetic_regions, synthetic_table, write_balance_fixture, SYNTHETIC_FIRST_YEAR};

fn cmsw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmsw"))
        .args(args)
        .env_remove("CMSW_THREADS")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Raw balance files of the small world, then `prepare` on them.
fn prepared(dir: &Path) -> PathBuf {
    let manifest = write_balance_fixture(
        &synthetic_table(),
        &synthetic_regions(),
        &synthetic_oil(SYNTHETIC_FIRST_YEAR, 10),
        &dir.join("raw"),
    )
    .unwrap();
    let out = dir.join("prepared");
    assert_ok(&cmsw(&["prepare", "--inputs", s(&manifest), "--out", s(&out)]));
    out
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn prepare_writes_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = prepared(tmp.path());
    for f in ["production.csv", "desired_demand.csv", "regions.csv", "eta_d.csv", "oil.csv"] {
        assert!(inputs.join(f).is_file(), "{f} missing");
    }
    let regions = fs::read_to_string(inputs.join("regions.csv")).unwrap();
    assert_eq!(regions.lines().count(), 6);
}

#[test]
fn run_then_report_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = prepared(tmp.path());
    let run = tmp.path().join("run");
    assert_ok(&cmsw(&["run", "--inputs", s(&inputs), "--out", s(&run), "--seed", "3"]));
    for f in ["prices.csv", "sessions.csv", "yearly_weighted_price.csv", "flows_2000.csv", "edges_2009.csv"] {
        assert!(run.join(f).is_file(), "{f} missing");
    }
    let prices = fs::read_to_string(run.join("prices.csv")).unwrap();
    assert!(prices.starts_with("year,month,session,price,quantity\n"));
    assert!(run.join("used_quantities_coastal.csv").is_file());

    let before = snapshot(&run);
    assert_ok(&cmsw(&["report", "--inputs", s(&inputs), "--out", s(&run)]));
    assert_eq!(snapshot(&run), before);
    assert_ok(&cmsw(&["report", "--inputs", s(&inputs), "--out", s(&run)]));
    assert_eq!(snapshot(&run), before);
}

#[test]
fn months_limits_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = prepared(tmp.path());
    let run = tmp.path().join("short");
    assert_ok(&cmsw(&["run", "--inputs", s(&inputs), "--out", s(&run), "--months", "18"]));
    let prices = fs::read_to_string(run.join("prices.csv")).unwrap();
    assert!(prices.lines().last().unwrap().starts_with("2001,6,"));
}

#[test]
fn scenario_writes_both_runs_and_gaps() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = prepared(tmp.path());
    let scenario = tmp.path().join("ban.toml");
    fs::write(
        &scenario,
        "name = \"northland ban\"\n\n[[events]]\nregion = \"Northland\"\nflag = \"exportAllowed\"\nvalue = false\nstart = \"2004-08\"\nend = \"2005-07\"\n\n[projection]\nfreezeYear = 2009\nextraMonths = 12\n",
    )
    .unwrap();
    let out = tmp.path().join("cf");
    let res = cmsw(&["scenario", "--inputs", s(&inputs), "--scenario", s(&scenario), "--out", s(&out)]);
    assert_ok(&res);
    assert!(out.join("baseline/prices.csv").is_file());
    assert!(out.join("counterfactual/prices.csv").is_file());
    let gaps = fs::read_to_string(out.join("price_gaps.csv")).unwrap();
    // ten data years plus the projected one
    assert_eq!(gaps.lines().count(), 12);
    assert!(gaps.lines().nth(1).unwrap().ends_with(",0"));
}

#[test]
fn calibrate_writes_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = prepared(tmp.path());
    let spec = tmp.path().join("spec.toml");
    fs::write(
        &spec,
        "observed = [1.0, 1.1, 1.2, 1.1, 1.0, 0.9, 1.0, 1.1, 1.2, 1.3]\npopulation = 6\ngenerations = 3\nrounds = 1\nsweeps = 2\nbeta = 20.0\n",
    )
    .unwrap();
    let out = tmp.path().join("cal");
    assert_ok(&cmsw(&["calibrate", "--inputs", s(&inputs), "--spec", s(&spec), "--out", s(&out), "--seed", "5"]));
    let params = fs::read_to_string(out.join("calibrated_params.csv")).unwrap();
    assert!(params.contains("shareOfDemandToBeMoved,"));
    assert_eq!(fs::read_to_string(out.join("eta_d.csv")).unwrap().lines().count(), 11);
    let trace = fs::read_to_string(out.join("loss_trace.csv")).unwrap();
    let losses: Vec<f64> = trace
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(losses.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let missing = cmsw(&["run", "--out", s(&out)]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--inputs"));

    assert_eq!(cmsw(&["simulate"]).status.code(), Some(2));
    assert_eq!(cmsw(&["run", "--inputs", "x", "--out", "y", "--bogus"]).status.code(), Some(2));
    assert_eq!(cmsw(&[]).status.code(), Some(2));
}

#[test]
fn validation_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = prepared(tmp.path());
    let out = tmp.path().join("o");

    let config = tmp.path().join("bad.toml");
    fs::write(&config, "shareOfDemandToBeMoved = 1.5\n").unwrap();
    let res = cmsw(&["run", "--config", s(&config), "--inputs", s(&inputs), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("shareOfDemandToBeMoved"));

    let res = cmsw(&["run", "--inputs", s(&inputs), "--out", s(&out), "--months", "0"]);
    assert_eq!(res.status.code(), Some(2));

    let scenario = tmp.path().join("s.toml");
    fs::write(
        &scenario,
        "[[events]]\nregion = \"Atlantis\"\nflag = \"exportAllowed\"\nvalue = false\nstart = \"2004-01\"\nend = \"2004-02\"\n",
    )
    .unwrap();
    let res = cmsw(&["scenario", "--inputs", s(&inputs), "--scenario", s(&scenario), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("Atlantis"));

    let threads = Command::new(env!("CARGO_BIN_EXE_cmsw"))
        .args(["run", "--inputs", s(&inputs), "--out", s(&out)])
        .env("CMSW_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn runtime_failures_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let inputs = prepared(tmp.path());
    let out = tmp.path().join("o");
    // the data cover ten years; without a projection the eleventh fails
    let res = cmsw(&["run", "--inputs", s(&inputs), "--out", s(&out), "--months", "132"]);
    assert_eq!(res.status.code(), Some(1));

    let res = cmsw(&["run", "--inputs", s(&tmp.path().join("nowhere")), "--out", s(&out)]);
    assert_eq!(res.status.code(), Some(1));
}

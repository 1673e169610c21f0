//! Exit codes and documented behaviour of the `twistedbad` binary.

use std::process::{Command, Output};

use serde_json::Value;

const SQRT2: &str = "quad:(0+1*sqrt(2))/1-1";
const THETA2: &str = "quad:(0+1*sqrt(2))/1-1,quad:(0+1*sqrt(3))/1-1";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_twistedbad")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn records(o: &Output) -> Vec<Value> {
    String::from_utf8(o.stdout.clone())
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).expect("one JSON value per line"))
        .collect()
}

fn of_type<'a>(recs: &'a [Value], t: &str) -> Vec<&'a Value> {
    recs.iter().filter(|r| r["type"] == t).collect()
}

#[test]
fn bestapprox_sqrt2_gives_pell_denominators() {
    let o = run(&["bestapprox", "--theta", SQRT2, "--j", "1", "--bound", "1e6", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut rows = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(rows.next(), Some("index,m,height,residual"));
    let dens: Vec<u64> = rows.map(|r| r.split(',').nth(1).unwrap().trim_matches('"').parse().unwrap()).collect();
    let mut pell = vec![1u64, 2];
    while pell[pell.len() - 1] * 2 + pell[pell.len() - 2] <= 1_000_000 {
        pell.push(pell[pell.len() - 1] * 2 + pell[pell.len() - 2]);
    }
    assert_eq!(dens, pell);
}

#[test]
fn bestapprox_rational_theta_reports_relation() {
    let o = run(&["bestapprox", "--theta", "rational:3/7", "--j", "1", "--bound", "100"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("v = [7]"));
}

#[test]
fn bestapprox_tiny_bound_is_empty() {
    let o = run(&["bestapprox", "--theta", SQRT2, "--j", "1", "--bound", "0.5"]);
    assert_eq!(code(&o), 0);
    let recs = records(&o);
    assert!(of_type(&recs, "row").is_empty());
    assert_eq!(of_type(&recs, "summary")[0]["entries"], 0);
}

#[test]
fn precision_exhaustion_exits_2() {
    let o = run(&["bestapprox", "--theta", "decimal:0.41421356@12", "--j", "1", "--bound", "1e6"]);
    assert_eq!(code(&o), 2);
    let o = run(&["badness", "--theta", "decimal:0.41421356@12", "--j", "1", "--eta", "rational:0", "--Q", "1000"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    assert_eq!(code(&run(&["bestapprox", "--theta", SQRT2])), 1);
    assert_eq!(code(&run(&["nonsense"])), 1);
    assert_eq!(code(&run(&["bestapprox", "--theta", "pi", "--j", "1", "--bound", "10"])), 1);
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
}

#[test]
fn every_output_carries_the_config_hash() {
    let o = run(&["bestapprox", "--theta", SQRT2, "--j", "1", "--bound", "100"]);
    let recs = records(&o);
    let meta = &recs[0]["meta"];
    assert_eq!(meta["tool"], "twistedbad");
    assert_eq!(meta["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(meta["config_hash"].as_str().unwrap().len(), 16);
    let other = run(&["bestapprox", "--theta", SQRT2, "--j", "1", "--bound", "101"]);
    assert_ne!(records(&other)[0]["meta"]["config_hash"], meta["config_hash"]);
}

#[test]
fn out_file_matches_stdout() {
    let dir = std::env::temp_dir().join(format!("twistedbad-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("seq.jsonl");
    let p = path.to_str().unwrap();
    let a = run(&["bestapprox", "--theta", SQRT2, "--j", "1", "--bound", "1000"]);
    let b = run(&["bestapprox", "--theta", SQRT2, "--j", "1", "--bound", "1000", "--out", p]);
    assert_eq!(code(&b), 0);
    assert_eq!(std::fs::read(&path).unwrap(), a.stdout);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn cantor_depth_zero_is_a_single_box() {
    let o = run(&["cantor", "--theta", THETA2, "--j", "1/2,1/2", "--R", "16", "--epsilon", "1/64", "--depth", "0"]);
    assert_eq!(code(&o), 0);
    let recs = records(&o);
    let rows = of_type(&recs, "row");
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["lower_corner"], "0,0");
}

#[test]
fn cantor_exploratory_tree_and_report() {
    let o = run(&["cantor", "--theta", THETA2, "--j", "1/2,1/2", "--R", "16", "--epsilon", "1/64", "--depth", "3"]);
    assert_eq!(code(&o), 0);
    let recs = records(&o);
    assert!(of_type(&recs, "row").len() > 1);
    assert!(of_type(&recs, "level_mass").iter().all(|r| r["mass"] == "1"));
    assert_eq!(of_type(&recs, "summary")[0]["mass_conserved"], true);
}

#[test]
fn strict_below_threshold_is_refused() {
    let o = run(&[
        "cantor",
        "--theta",
        SQRT2,
        "--j",
        "1",
        "--R",
        "256",
        "--epsilon",
        "1/1048576",
        "--mode",
        "strict",
        "--depth",
        "1",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn saved_params_round_trip_through_dimension() {
    let dir = std::env::temp_dir().join(format!("twistedbad-params-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("tree.params");
    let p = path.to_str().unwrap();
    let args =
        ["--theta", SQRT2, "--j", "1", "--R", "512", "--epsilon", "1/1048576", "--mode", "strict", "--depth", "7"];
    let mut save = vec!["cantor", "--cap", "1000", "--save-params", p];
    save.extend(args);
    assert_eq!(code(&run(&save)), 0);
    let inline = run(&[&["dimension", "--samples", "20"][..], &args].concat());
    let from_file = run(&["dimension", "--samples", "20", "--params", p]);
    assert_eq!(code(&inline), 0);
    assert_eq!(code(&from_file), 0);
    let strip = |o: &Output| records(o).into_iter().skip(1).collect::<Vec<_>>();
    assert_eq!(strip(&inline), strip(&from_file));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn dimension_strict_run_passes_with_bound() {
    let o = run(&[
        "dimension",
        "--theta",
        SQRT2,
        "--j",
        "1",
        "--R",
        "512",
        "--epsilon",
        "1/1048576",
        "--mode",
        "strict",
        "--depth",
        "7",
        "--samples",
        "50",
    ]);
    assert_eq!(code(&o), 0);
    let recs = records(&o);
    let report = recs.iter().find(|r| r.get("claimed").is_some()).expect("mass report");
    assert_eq!(report["pass"], true);
    let bound = of_type(&recs, "dimension_bound");
    assert!(bound[0]["bound"].as_str().unwrap().starts_with("0.7285"));
}

#[test]
fn dimension_missing_params_file_and_zero_samples() {
    assert_eq!(code(&run(&["dimension", "--params", "/nonexistent/tree.params"])), 1);
    let o = run(&[
        "dimension",
        "--theta",
        SQRT2,
        "--j",
        "1",
        "--R",
        "512",
        "--epsilon",
        "1/1048576",
        "--mode",
        "strict",
        "--depth",
        "7",
        "--samples",
        "0",
    ]);
    assert_eq!(code(&o), 0);
}

#[test]
fn badness_zero_eta_matches_classical() {
    let o = run(&[
        "badness",
        "--theta",
        THETA2,
        "--j",
        "1/2,1/2",
        "--eta",
        "rational:0,rational:0",
        "--Q",
        "500",
        "--format",
        "csv",
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let value = |name: &str| text.lines().find(|l| l.starts_with(name)).unwrap().split(',').nth(2).unwrap().to_string();
    assert_eq!(value("twisted,"), value("classical,"));
}

#[test]
fn badness_eta_equal_theta_vanishes_at_one() {
    let o = run(&["badness", "--theta", THETA2, "--j", "1/2,1/2", "--eta", THETA2, "--Q", "50"]);
    assert_eq!(code(&o), 0);
    let recs = records(&o);
    let twisted = of_type(&recs, "row").into_iter().find(|r| r["functional"] == "twisted").unwrap().clone();
    assert_eq!(twisted["value"], "0");
    assert_eq!(twisted["argmin_q"], "1");
}

#[test]
fn badness_tree_sampled_eta_passes_proposition() {
    let o = run(&[
        "badness",
        "--theta",
        THETA2,
        "--j",
        "1/2,1/2",
        "--R",
        "16",
        "--epsilon",
        "1/64",
        "--depth",
        "5",
        "--Q",
        "100",
    ]);
    assert_eq!(code(&o), 0);
    let recs = records(&o);
    let prop = of_type(&recs, "proposition");
    assert_eq!(prop[0]["precondition_met"], true);
    assert_eq!(prop[0]["pass"], true);
}

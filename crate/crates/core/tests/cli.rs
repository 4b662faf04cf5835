use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures")
}

fn triad(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_triad-dynamics"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn fixture_args<'a>(cmd: &'a str, fx: &'a str, out: &'a str) -> Vec<String> {
    vec![
        cmd.into(),
        "--config".into(),
        format!("{fx}/config.json"),
        "--events".into(),
        format!("{fx}/events.csv"),
        "--series".into(),
        format!("{fx}/trade.csv"),
        "--out".into(),
        out.into(),
    ]
}

const TINY: &str = "date,source,target,weight\n2001-01-05,A,B,2\n2001-01-20,B,C,-3\n2001-02-11,C,A,1\n";

#[test]
fn selftest_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = triad(&["selftest"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("selftest passed"));
    assert!(text.contains("expected 93, got 93"));
}

#[test]
fn missing_events_exit_two_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = triad(&["build-networks", "--events", "absent.csv", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.csv"));
}

#[test]
fn bad_flag_value_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "ev.csv", TINY);
    let o = triad(
        &["census", "--events", "ev.csv", "--out", "out", "--balance-model", "heider"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn tiny_fixture_builds_one_network() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "ev.csv", TINY);
    let o = triad(&["build-networks", "--events", "ev.csv", "--out", "out", "--keep-tail"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let manifest = json(&out.join("manifest.json"));
    assert_eq!(manifest["periods"].as_array().unwrap().len(), 1);
    assert_eq!(manifest["periods"][0]["positive_edges"], 2);
    assert_eq!(manifest["periods"][0]["negative_edges"], 1);
    // 3 nodes give 6 ordered pairs: A->B and C->A positive, B->C negative.
    let dyads = std::fs::read_to_string(out.join("dyad_fractions.csv")).unwrap();
    let row: Vec<&str> = dyads.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2], "0.333333333333");
    assert_eq!(row[3], "0.166666666667");
    let net = std::fs::read_to_string(out.join("networks").join("period_000.csv")).unwrap();
    assert_eq!(net, "source_id,target_id,sign\nA,B,1\nB,C,-1\nC,A,1\n");
    assert!(out.join("run_report.json").exists());
    assert!(out.join("timing.json").exists());
}

#[test]
fn tiny_fixture_drops_its_partial_period_by_default() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "ev.csv", TINY);
    let o = triad(&["build-networks", "--events", "ev.csv", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn all_zero_network_is_fully_balanced() {
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "ev.csv",
        "date,source,target,weight\n2001-01-05,A,B,0\n2001-01-06,B,C,0\n2001-01-07,C,A,0\n",
    );
    write(dir.path(), "core.txt", "A\nB\nC\n");
    let o = triad(
        &["census", "--events", "ev.csv", "--out", "out", "--keep-tail", "--core-mode", "fixed:core.txt"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let shares = std::fs::read_to_string(dir.path().join("out").join("balanced_share.csv")).unwrap();
    assert_eq!(shares.lines().nth(1).unwrap(), "0,2001-01-05,1,1,1");
    let types = std::fs::read_to_string(dir.path().join("out").join("type_table.csv")).unwrap();
    let null_type = types
        .lines()
        .skip(1)
        .find(|l| l.split(',').skip(2).take(6).all(|s| s == "0"))
        .map(|l| l.split(',').next().unwrap().parse::<usize>().unwrap())
        .expect("all-null type listed");
    let props = std::fs::read_to_string(dir.path().join("out").join("proportions.csv")).unwrap();
    let values: Vec<&str> = props.lines().nth(1).unwrap().split(',').skip(2).collect();
    for (t, v) in values.iter().enumerate() {
        assert_eq!(*v, if t == null_type { "1" } else { "0" }, "type {t}");
    }
}

#[test]
fn fixture_transitions_are_row_stochastic() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures();
    let args = fixture_args("transitions", fx.to_str().unwrap(), "out");
    let o = triad(&args.iter().map(String::as_str).collect::<Vec<_>>(), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let avg = std::fs::read_to_string(out.join("average.csv")).unwrap();
    let mut sums = std::collections::BTreeMap::<usize, f64>::new();
    for line in avg.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        *sums.entry(f[0].parse().unwrap()).or_default() += f[2].parse::<f64>().unwrap();
    }
    assert_eq!(sums.len(), 138);
    for (row, sum) in sums {
        assert!((sum - 1.0).abs() < 1e-9, "row {row} sums to {sum}");
    }
    let stationary = std::fs::read_to_string(out.join("stationary.csv")).unwrap();
    let mass: f64 = stationary
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap())
        .sum();
    assert!((mass - 1.0).abs() < 1e-9);
}

#[test]
fn estimate_reports_non_convergence_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures();
    let mut args = fixture_args("estimate", fx.to_str().unwrap(), "out");
    args.extend(["--max-iters".into(), "3".into()]);
    let o = triad(&args.iter().map(String::as_str).collect::<Vec<_>>(), dir.path());
    assert_eq!(o.status.code(), Some(1));
    let report = json(&dir.path().join("out").join("run_report.json"));
    assert_eq!(report["details"]["solver"]["converged"], false);
    assert!(dir.path().join("out").join("objective_trace.csv").exists());
}

#[test]
fn correlate_reports_both_alignments() {
    let dir = tempfile::tempdir().unwrap();
    let fx = fixtures();
    let args = fixture_args("correlate", fx.to_str().unwrap(), "out");
    let o = triad(&args.iter().map(String::as_str).collect::<Vec<_>>(), dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let reports = json(&dir.path().join("out").join("correlate.json"));
    let modes: Vec<&str> = reports
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["alignment"]["mode"].as_str().unwrap())
        .collect();
    assert_eq!(modes, ["annualize", "interpolate"]);
    for r in reports.as_array().unwrap() {
        let p = r["pearson"]["p"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert!(r["granger_xy"]["f_stat"].is_number());
    }
}

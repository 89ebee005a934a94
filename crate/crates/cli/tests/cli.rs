use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynrecon"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn dynrecon")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn line<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(": ")))
        .unwrap_or_else(|| panic!("no {key:?} line in\n{text}"))
}

fn field<'a>(csv: &'a str, key: &str) -> &'a str {
    csv.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(',')))
        .unwrap_or_else(|| panic!("no {key:?} row in\n{csv}"))
}

/// Writes a matrix file, prefixing the "rows cols" header.
fn write_matrix(path: impl AsRef<Path>, rows: &str) {
    let lines: Vec<&str> = rows.lines().collect();
    let cols = lines[0].split_whitespace().count();
    fs::write(path, format!("{} {cols}\n{rows}", lines.len())).unwrap();
}

#[test]
fn cyclic_chain_report() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["chain", "--demo", "cyclic", "--csv", "chain.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(line(&text, "dims"), "4 3 2 1 0");
    assert_eq!(line(&text, "k_star"), "5");
    assert_eq!(line(&text, "lower_bound"), "3");
    assert_eq!(line(&text, "optimal"), "no");
    assert_eq!(line(&text, "transverse"), "no no no yes");
    let csv = fs::read_to_string(dir.path().join("chain.csv")).unwrap();
    assert_eq!(csv, "k,dim,transverse\n1,4,na\n2,3,no\n3,2,no\n4,1,no\n5,0,yes\n");
}

#[test]
fn random6_chain_is_optimal() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["chain", "--demo", "random6", "--seed", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(line(&text, "dims"), "4 2 0");
    assert_eq!(line(&text, "optimal"), "yes");
    assert_eq!(line(&text, "stalled_at"), "none");
}

#[test]
fn stalled_chain_from_files() {
    let dir = TempDir::new().unwrap();
    // Rotation in the (x2, x3) plane, which P never sees.
    write_matrix(dir.path().join("l.txt"), "1 0 0\n0 0 -1\n0 1 0\n");
    write_matrix(dir.path().join("p.txt"), "1 0 0\n");
    let o = run(dir.path(), &["chain", "--dynamics", "l.txt", "--projection", "p.txt"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(line(&text, "k_star"), "not reached");
    assert_eq!(line(&text, "stalled_at"), "1");
    assert!(line(&text, "stall_witness").starts_with("dim 2 at N_1"), "{text}");
    assert_eq!(line(&text, "system"), "l.txt");
}

#[test]
fn time_varying_chain_from_files() {
    let dir = TempDir::new().unwrap();
    // Shift down, then shift up: the second step undoes the first.
    write_matrix(dir.path().join("l1.txt"), "0 0 0\n1 0 0\n0 1 0\n");
    write_matrix(dir.path().join("l2.txt"), "0 0 1\n1 0 0\n0 1 0\n");
    write_matrix(dir.path().join("p.txt"), "1 0 0\n");
    let args = ["chain", "--dynamics", "l2.txt", "l2.txt", "--projection", "p.txt", "--time-varying"];
    let o = run(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(line(&stdout(&o), "dims"), "2 1 0");

    let o = run(dir.path(), &["chain", "--dynamics", "l1.txt", "l2.txt", "--projection", "p.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--time-varying"), "{}", stderr(&o));
}

#[test]
fn missing_file_is_input_error() {
    let dir = TempDir::new().unwrap();
    write_matrix(dir.path().join("p.txt"), "1 0\n");
    let o = run(dir.path(), &["chain", "--dynamics", "nope.txt", "--projection", "p.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nope.txt"), "{}", stderr(&o));
}

#[test]
fn malformed_matrix_reports_line() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("l.txt"), "2 2\n1 0\n0 x\n").unwrap();
    write_matrix(dir.path().join("p.txt"), "1 0\n");
    let o = run(dir.path(), &["chain", "--dynamics", "l.txt", "--projection", "p.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("l.txt:3"), "{}", stderr(&o));

    fs::write(dir.path().join("l.txt"), "2 2\n1 0\n0 1 2\n").unwrap();
    let o = run(dir.path(), &["chain", "--dynamics", "l.txt", "--projection", "p.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("l.txt:3"), "{}", stderr(&o));
}

#[test]
fn dimension_mismatch_is_input_error() {
    let dir = TempDir::new().unwrap();
    write_matrix(dir.path().join("l.txt"), "1 0\n0 1\n");
    write_matrix(dir.path().join("p.txt"), "1 0 0\n");
    let o = run(dir.path(), &["chain", "--dynamics", "l.txt", "--projection", "p.txt"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    write_matrix(dir.path().join("x0.txt"), "1 2 3\n");
    let o = run(dir.path(), &["simulate", "--demo", "cyclic", "--x0", "x0.txt", "--steps", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("x0.txt"), "{}", stderr(&o));
}

#[test]
fn simulate_cyclic_unit_vector() {
    let dir = TempDir::new().unwrap();
    write_matrix(dir.path().join("x0.txt"), "1 0 0 0 0 0\n");
    let o = run(dir.path(), &["simulate", "--demo", "cyclic", "--x0", "x0.txt", "--steps", "6"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let data = fs::read_to_string(dir.path().join("sim_data.csv")).unwrap();
    let mut lines = data.lines();
    assert_eq!(lines.next(), Some("t,component_index,value"));
    assert_eq!(lines.count(), 12);
    let states = fs::read_to_string(dir.path().join("sim_states.csv")).unwrap();
    assert_eq!(states.lines().count(), 1 + 36);
    assert!(!dir.path().join("sim_frame_01.pgm").exists());

    let o = run(dir.path(), &["simulate", "--demo", "cyclic", "--x0", "x0.txt", "--steps", "1", "--out", "one"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let data = fs::read_to_string(dir.path().join("one_data.csv")).unwrap();
    assert_eq!(data.lines().count(), 1 + 2);
}

#[test]
fn simulate_blob_writes_frames() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["simulate", "--demo", "l2grid", "--blob", "4,5,1.5", "--steps", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for t in 1..=10 {
        let frame = fs::read_to_string(dir.path().join(format!("sim_frame_{t:02}.pgm"))).unwrap();
        assert!(frame.starts_with("P2"), "frame {t}");
    }
    assert!(!dir.path().join("sim_frame_11.pgm").exists());
}

#[test]
fn blob_needs_grid() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["simulate", "--demo", "cyclic", "--blob", "1,1,1", "--steps", "2"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reconstruct_round_trip() {
    let dir = TempDir::new().unwrap();
    write_matrix(dir.path().join("x0.txt"), "0.5\n-1\n2\n0.25\n3\n-0.75\n");
    let o = run(dir.path(), &["simulate", "--demo", "random6", "--seed", "3", "--x0", "x0.txt", "--steps", "4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(dir.path(), &["reconstruct", "--demo", "random6", "--seed", "3", "--data", "sim_data.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(line(&text, "status"), "unique");
    assert_eq!(line(&text, "rank"), "6");

    let got: Vec<f64> = fs::read_to_string(dir.path().join("rec_x0.txt"))
        .unwrap()
        .split_whitespace()
        .skip(2)
        .map(|s| s.parse().unwrap())
        .collect();
    let want = [0.5, -1.0, 2.0, 0.25, 3.0, -0.75];
    assert_eq!(got.len(), 6);
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 1e-9, "{got:?}");
    }
    let summary = fs::read_to_string(dir.path().join("rec_summary.csv")).unwrap();
    assert_eq!(field(&summary, "status"), "unique");
    assert!(dir.path().join("rec_trajectory.csv").exists());
}

#[test]
fn truncated_data_is_non_unique() {
    let dir = TempDir::new().unwrap();
    write_matrix(dir.path().join("x0.txt"), "1 2 3 4 5 6\n");
    let o = run(dir.path(), &["simulate", "--demo", "random6", "--x0", "x0.txt", "--steps", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(dir.path(), &["reconstruct", "--demo", "random6", "--data", "sim_data.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(line(&text, "status"), "non-unique");
    assert_eq!(line(&text, "rank"), "4");
}

#[test]
fn reconstruct_grid_writes_image() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["simulate", "--demo", "l2grid", "--blob", "3,4,1.2", "--steps", "12"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(dir.path(), &["reconstruct", "--demo", "l2grid", "--data", "sim_data.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(dir.path().join("rec_x0.pgm")).unwrap().starts_with("P2"));
}

#[test]
fn genericity_report() {
    let dir = TempDir::new().unwrap();
    let args = ["experiment", "--genericity", "6", "2", "40", "11"];
    let a = run(dir.path(), &args);
    assert!(a.status.success(), "{}", stderr(&a));
    let csv = stdout(&a);
    assert!(csv.starts_with("field,value\n"));
    assert_eq!(field(&csv, "fraction_optimal"), "1.0");
    assert_eq!(field(&csv, "count_optimal"), "40");
    assert_eq!(field(&csv, "failing_seeds"), "");
    assert_eq!(field(&csv, "lower_bound_violations"), "0");
    let b = run(dir.path(), &args);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn genericity_time_varying_detail() {
    let dir = TempDir::new().unwrap();
    let o = run(
        dir.path(),
        &["experiment", "--genericity", "5", "2", "1", "3", "--time-varying", "--detail", "d.csv", "--out", "g.csv"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let report = fs::read_to_string(dir.path().join("g.csv")).unwrap();
    assert_eq!(field(&report, "time_varying"), "true");
    let detail = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    let lines: Vec<&str> = detail.lines().collect();
    assert_eq!(lines, ["trial,seed,dims,k_star,lower_bound,optimal,all_transverse", "0,3,3 1 0,3,3,true,true"]);
}

#[test]
fn genericity_rejects_bad_m() {
    let dir = TempDir::new().unwrap();
    for m in ["0", "7"] {
        let o = run(dir.path(), &["experiment", "--genericity", "6", m, "10", "0"]);
        assert_eq!(o.status.code(), Some(2), "m={m}");
    }
}

#[test]
fn condstudy_rows() {
    let dir = TempDir::new().unwrap();
    let o = run(dir.path(), &["experiment", "--condstudy", "cyclic", "3", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "T,rank,condition");
    assert_eq!(rows.len(), 6);
    let steps: Vec<&str> = rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect();
    assert_eq!(steps, ["3", "4", "5", "6", "7"]);
    let o = run(dir.path(), &["experiment", "--condstudy", "cyclic", "5", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn outdir_prefixes_outputs() {
    let dir = TempDir::new().unwrap();
    write_matrix(dir.path().join("x0.txt"), "1 0 0 0 0 0\n");
    let o = run(
        dir.path(),
        &["--outdir", "results/a", "simulate", "--demo", "cyclic", "--x0", "x0.txt", "--steps", "3"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("results/a/sim_data.csv").exists());
    assert!(!dir.path().join("sim_data.csv").exists());
}

#[test]
fn usage_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    assert_eq!(run(dir.path(), &["chain"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["chain", "--demo", "nosuch"]).status.code(), Some(2));
    assert_eq!(run(dir.path(), &["experiment"]).status.code(), Some(2));
}

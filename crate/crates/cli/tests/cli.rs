//! End-to-end tests of the binary: exit-code contract, data formats, and
//! byte-level determinism of simulation output.

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

fn mile() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mile"))
}

fn run(args: &[&str]) -> Output {
    mile().args(args).output().expect("binary runs")
}

fn write_file(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(content.as_bytes()).unwrap();
    path
}

// small AR(1) panel with fixed effects, rho = 0.5, written in long format
fn dyn_panel_csv(n: usize, t: usize) -> String {
    let mut out = String::from("i,t,y\n");
    let mut state = 0x9e3779b97f4a7c15u64;
    let mut unif = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for i in 0..n {
        let eta = 2.0 * (unif() - 0.5) * 3.0;
        let mut y = 0.0;
        for s in 1..=t {
            // sum of 12 uniforms minus 6: approximately standard normal
            let mut g = -6.0;
            for _ in 0..12 {
                g += unif();
            }
            y = 0.5 * y + eta + g;
            out.push_str(&format!("{i},{s},{y:.12}\n"));
        }
    }
    out
}

#[test]
fn estimate_dyn_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "panel.csv", &dyn_panel_csv(400, 6));
    let report_path = dir.path().join("report.json");
    let out = run(&[
        "estimate",
        "--model",
        "dyn",
        "--input",
        input.to_str().unwrap(),
        "--output",
        report_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let names: Vec<&str> = report["names"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    let rho_idx = names.iter().position(|&n| n == "rho").unwrap();
    let rho = report["estimates"][rho_idx].as_f64().unwrap();
    assert!((rho - 0.5).abs() < 0.1, "rho = {rho}");
    assert!(report["converged"].as_bool().unwrap());
    assert!(report["std_errors"].is_array());
}

#[test]
fn missing_input_file_is_exit_2() {
    let out = run(&["estimate", "--model", "dyn", "--input", "/nonexistent.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn iv_without_sigma_is_exit_2_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "iv.csv", "y1,y2,z_1\n1.0,0.5,0.2\n0.3,0.1,-0.4\n");
    let out = run(&["estimate", "--model", "iv", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sigma"), "stderr: {err}");
}

#[test]
fn parse_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_file(dir.path(), "bad.csv", "i,t,y\n0,1,1.0\n0,2,oops\n");
    let out = run(&["estimate", "--model", "dyn", "--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3"), "stderr: {err}");
}

#[test]
fn simulate_zero_reps_is_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let design = write_file(
        dir.path(),
        "bad.json",
        r#"{"rho_star":0.5,"effects":"random_normal","errors":"normal",
            "N":[5],"T":[2],"reps":0,"estimators":["mile"],"seed":1}"#,
    );
    let out = run(&["simulate", "--design", design.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let design = write_file(
        dir.path(),
        "tiny.json",
        r#"{"rho_star":0.5,"effects":"random_normal","errors":"normal",
            "N":[8],"T":[3],"reps":12,"estimators":["mile","bcols","ab"],"seed":7}"#,
    );
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    let st = run(&[
        "simulate",
        "--design",
        design.to_str().unwrap(),
        "--output",
        out_a.to_str().unwrap(),
    ]);
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let st = run(&[
        "simulate",
        "--design",
        design.to_str().unwrap(),
        "--output",
        out_b.to_str().unwrap(),
        "--threads",
        "1",
    ]);
    assert!(st.status.success());
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("T,N,mean_mile,mse_mile,failed_mile,mean_bcols"));
}

#[test]
fn simulate_markdown_round_trips_the_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let design = write_file(
        dir.path(),
        "tiny.json",
        r#"{"rho_star":0.5,"effects":"random_normal","errors":"normal",
            "N":[6],"T":[3],"reps":6,"estimators":["mile","bcols"],"seed":3}"#,
    );
    let csv = run(&["simulate", "--design", design.to_str().unwrap()]);
    assert!(csv.status.success());
    let md = run(&[
        "simulate",
        "--design",
        design.to_str().unwrap(),
        "--format",
        "markdown",
    ]);
    assert!(md.status.success());
    let csv_text = String::from_utf8(csv.stdout).unwrap();
    let md_text = String::from_utf8(md.stdout).unwrap();
    for field in csv_text.lines().nth(1).unwrap().split(',') {
        assert!(md_text.contains(field), "missing {field}");
    }
}

#[test]
fn bundled_designs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../designs");
    for name in ["table1", "table2", "table3", "table4", "table5"] {
        let text = std::fs::read_to_string(root.join(format!("{name}.json"))).unwrap();
        mile_core::montecarlo::McDesign::from_json(&text)
            .unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn check_subcommand_passes() {
    let out = run(&["check"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().count() >= 10);
    assert!(text.lines().all(|l| l.starts_with("PASS")));
}

#[test]
fn unknown_format_is_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let design = write_file(
        dir.path(),
        "tiny.json",
        r#"{"rho_star":0.5,"effects":"random_normal","errors":"normal",
            "N":[5],"T":[2],"reps":2,"estimators":["mile"],"seed":1}"#,
    );
    let out = run(&[
        "simulate",
        "--design",
        design.to_str().unwrap(),
        "--format",
        "yaml",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

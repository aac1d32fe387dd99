use std::f64::consts::PI;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sppsband"))
        .args(args)
        .env("NO_COLOR", "1")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Parsed CSV: header and rows of optional numbers (text cells parse to `None`).
fn csv(out: &Output) -> (Vec<String>, Vec<Vec<Option<f64>>>) {
    let text = stdout(out);
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(str::to_owned).collect();
    let rows = lines.map(|l| l.split(',').map(|c| c.parse().ok()).collect()).collect();
    (header, rows)
}

fn column(rows: &[Vec<Option<f64>>], i: usize) -> Vec<f64> {
    rows.iter().map(|r| r[i].unwrap()).collect()
}

#[test]
fn scan_reproduces_the_discriminant_table() {
    let out = run(&[
        "scan",
        "--k0",
        "1",
        "--s",
        "0.1",
        "--k2-min",
        "-2",
        "--k2-max",
        "10",
        "--samples",
        "500",
    ]);
    assert_eq!(code(&out), 0);
    let (header, rows) = csv(&out);
    assert_eq!(header, ["K2", "D_re", "D_im", "in_band", "P_re", "P_im"]);
    assert_eq!(rows.len(), 500);
    let k2 = column(&rows, 0);
    assert_eq!(k2[0], -2.0);
    assert_eq!(k2[499], 10.0);
    for r in &rows {
        if r[3] == Some(1.0) {
            assert!(r[1].unwrap().abs() <= 2.0);
        }
    }
}

#[test]
fn scan_at_zero_coupling_matches_the_free_discriminant() {
    let out = run(&["scan", "--s", "0", "--samples", "200"]);
    assert_eq!(code(&out), 0);
    let (_, rows) = csv(&out);
    for r in rows {
        let (k2, d) = (r[0].unwrap(), r[1].unwrap());
        let exact = if k2 >= -1.0 {
            2.0 * (PI * (1.0 + k2).sqrt()).cos()
        } else {
            2.0 * (PI * (-1.0 - k2).sqrt()).cosh()
        };
        assert!((d - exact).abs() <= 1e-6, "K² = {k2}: {d} vs {exact}");
    }
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        &["scan", "--samples", "1"][..],
        &["scan", "--grid-n", "101"],
        &["scan", "--k2-min", "3", "--k2-max", "1"],
        &["scan", "--bogus"],
        &["edges", "--k2-min", "0", "--k2-max", "5"],
        &["bloch"],
        &["bloch", "--k2", "0.25", "--cells", "65"],
        &["bloch", "--k2", "-1.5"],
    ] {
        let out = run(args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

fn analytic_column(out: &Output) -> Vec<f64> {
    let (header, rows) = csv(out);
    assert_eq!(header, ["n", "parity", "K2_numeric", "K2_analytic", "abs_err"]);
    column(&rows, 3)
}

#[test]
fn edges_match_the_analytic_positions() {
    let out = run(&["edges", "--k0", "1", "--s", "0.1", "--k2-min", "-2", "--k2-max", "10"]);
    assert_eq!(code(&out), 0);
    let got = analytic_column(&out);
    let want = [-1.21, -0.21, 2.79, 7.79];
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() < 1e-12);
    }
    let (_, rows) = csv(&out);
    assert!(rows.iter().all(|r| r[4].unwrap() <= 1e-6));
    assert!(stdout(&out).contains(",periodic,") && stdout(&out).contains(",antiperiodic,"));
}

#[test]
fn edges_at_zero_coupling() {
    let out = run(&["edges", "--s", "0", "--k2-min", "-2", "--k2-max", "4"]);
    assert_eq!(code(&out), 0);
    assert_eq!(analytic_column(&out), [-1.0, 0.0, 3.0]);
}

#[test]
fn window_ending_at_the_seed_energy_has_the_lowest_edge() {
    let out = run(&["edges", "--k2-min", "-2", "--k2-max", "-1.21"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    assert!(text.lines().nth(1).unwrap().starts_with("0,periodic,"), "{text}");
}

#[test]
fn bloch_tabulates_the_figure_energies() {
    let out = run(&[
        "bloch", "--k2", "0.25", "--k2", "2.25", "--k2", "6.25", "--cells", "3", "--grid-n", "2000",
    ]);
    assert_eq!(code(&out), 0);
    let (header, rows) = csv(&out);
    assert_eq!(header.len(), 10);
    assert_eq!(&header[..3], ["K2", "x", "f+_re"]);
    assert_eq!(rows.len(), 3 * 6001);
    let step = PI / 2000.0;
    for block in rows.chunks(6001) {
        let x = column(block, 1);
        for w in x.windows(2) {
            assert!(w[1] > w[0]);
            assert!((w[1] - w[0] - step).abs() < 1e-12);
        }
        for (i, r) in block.iter().enumerate() {
            let at_pole = i % 2000 == 1000;
            assert_eq!(r[6].is_none(), at_pole, "row {i}");
            assert!(r[2].is_some() && r[4].is_some());
        }
        // Unimodular Bloch factor: |f+| repeats from cell to cell.
        let amp = |i: usize| block[i][2].unwrap().hypot(block[i][3].unwrap());
        assert!((amp(2300) / amp(300) - 1.0).abs() < 1e-6);
        assert!((amp(4300) / amp(300) - 1.0).abs() < 1e-6);
    }
}

#[test]
fn bloch_in_a_gap_needs_the_flag() {
    let out = run(&[
        "bloch",
        "--k2",
        "-1.5",
        "--cells",
        "2",
        "--grid-n",
        "200",
        "--allow-gap",
    ]);
    assert_eq!(code(&out), 0);
}

#[test]
fn validate_exit_codes() {
    assert_eq!(code(&run(&["validate"])), 0);
    assert_eq!(code(&run(&["validate", "--s", "0"])), 0);
    let strict = run(&["validate", "--tol", "1e-15"]);
    assert_eq!(code(&strict), 1);
    assert!(String::from_utf8_lossy(&strict.stderr).contains("error:"));
}

#[test]
fn zero_coupling_validation_is_near_machine_precision() {
    let out = run(&["validate", "--s", "0"]);
    let text = stdout(&out);
    let f_line = text.lines().find(|l| l.starts_with("f_vs_exact,")).unwrap();
    let err: f64 = f_line.split(',').nth(1).unwrap().parse().unwrap();
    assert!(err < 1e-10, "{err}");
}

#[test]
fn truncation_exits_3_with_a_hint() {
    let out = run(&["scan", "--k2-max", "400", "--samples", "10"]);
    assert_eq!(code(&out), 3);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("hint:") && err.contains("--spps-terms"), "{err}");
}

#[test]
fn output_is_deterministic_and_file_output_matches_stdout() {
    let args = ["scan", "--samples", "300", "--grid-n", "2000"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.csv");
    let mut with_out = args.to_vec();
    with_out.extend(["--out", path.to_str().unwrap()]);
    let c = run(&with_out);
    assert_eq!(code(&c), 0);
    assert!(c.stdout.is_empty());
    assert_eq!(std::fs::read(&path).unwrap(), a.stdout);
}

#[test]
fn csv_uses_printf_scientific_notation() {
    let out = run(&["scan", "--samples", "2", "--grid-n", "2000"]);
    let text = stdout(&out);
    let first = text.lines().nth(1).unwrap();
    assert!(first.starts_with("-2.00000000000000000e+00,"), "{first}");
    assert!(text.ends_with('\n') && !text.contains('\r'));
}

#[test]
fn json_carries_the_csv_values() {
    let args = ["edges", "--grid-n", "2000"];
    let (_, rows) = csv(&run(&args));
    let mut json_args = args.to_vec();
    json_args.extend(["--format", "json"]);
    let out = run(&json_args);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["columns"][1], "parity");
    let jrows = v["rows"].as_array().unwrap();
    assert_eq!(jrows.len(), rows.len());
    for (j, c) in jrows.iter().zip(&rows) {
        for col in [2, 3, 4] {
            assert_eq!(j[col].as_f64(), c[col]);
        }
        assert_eq!(j[0].as_f64(), c[0]);
    }
}

#[test]
fn json_marks_pole_values_null() {
    let out = run(&[
        "bloch", "--k2", "0.25", "--cells", "1", "--grid-n", "2000", "--format", "json",
    ]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert!(rows[1000][6].is_null());
    assert!(rows[999][6].is_f64());
}

#[test]
fn flags_take_precedence_over_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.conf");
    std::fs::write(&path, "# run settings\ns = 0\nsamples = 7\nk2_max = 4\ngrid_n = 2000\n").unwrap();
    let p = path.to_str().unwrap();

    let (_, rows) = csv(&run(&["scan", "--config", p]));
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[6][0], Some(4.0));
    let d = rows[6][1].unwrap();
    assert!((d - 2.0 * (PI * 5f64.sqrt()).cos()).abs() < 1e-6);

    let (_, rows) = csv(&run(&["scan", "--config", p, "--samples", "3"]));
    assert_eq!(rows.len(), 3);

    std::fs::write(&path, "colour = blue\n").unwrap();
    assert_eq!(code(&run(&["scan", "--config", p])), 2);
    assert_eq!(code(&run(&["scan", "--config", "/nonexistent/run.conf"])), 2);
}

#[test]
fn version_prints_the_package_version() {
    let out = run(&["version"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), format!("sppsband {}", env!("CARGO_PKG_VERSION")));
}

use std::path::Path;
use std::process::{Command, Output};

fn subdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subdiff"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn out_path(dir: &tempfile::TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

#[test]
fn weights_binomial_case() {
    let dir = tempfile::tempdir().unwrap();
    let out = out_path(&dir, "w.csv");
    let o = subdiff(&["weights", "--alpha", "0.5", "--theta", "0.25", "--count", "4", "--out", &out]);
    assert!(o.status.success());
    let (header, rows) = read_csv(Path::new(&out));
    assert_eq!(header, ["k", "omega"]);
    let w: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(w, [1.0, -0.5, -0.125, -0.0625]);
    // 17 significant digits
    assert_eq!(rows[1][1], "-5.0000000000000000e-1");
}

#[test]
fn weights_fbdf2_leading_term() {
    let o = subdiff(&["weights", "--alpha", "0.5", "--count", "1", "--kind", "fbdf2"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let value: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((value - 1.5f64.sqrt()).abs() < 1e-15);
}

#[test]
fn bad_parameters_give_error_line() {
    let o = subdiff(&["weights", "--alpha", "1.5", "--count", "3"]);
    assert!(!o.status.success());
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.starts_with("error: kind=domain msg="), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn solve_scalar_first_step() {
    let o = subdiff(&[
        "solve", "--problem", "scalar", "--alpha", "0.5", "--theta", "0.25", "--nsteps", "10", "--tfinal", "1",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,error"));
    assert_eq!(text.lines().count(), 12);
}

#[test]
fn solve_ex2ii_reports_sup_norm() {
    let o = subdiff(&[
        "solve", "--problem", "ex2ii", "--alpha", "0.5", "--theta", "0.3", "--nsteps", "8", "--ncells", "20",
        "--history", "fast2",
    ]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("t,linf_norm\n"));
    let last: f64 = text.lines().last().unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!(last > 0.0 && last < 1.0);
}

#[test]
fn convergence_table_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = out_path(&dir, "a.csv");
    let b = out_path(&dir, "b.csv");
    let args = |out: &str| {
        vec![
            "convergence".to_string(),
            "--example".into(),
            "ex2i".into(),
            "--alphas".into(),
            "0.9,0.5".into(),
            "--thetas".into(),
            "0.3,0.1".into(),
            "--taus".into(),
            "2^-3..2^-5".into(),
            "--ncells".into(),
            "100".into(),
            "--out".into(),
            out.to_string(),
        ]
    };
    let args_a = args(&a);
    let args_b = args(&b);
    assert!(subdiff(&args_a.iter().map(String::as_str).collect::<Vec<_>>()).status.success());
    assert!(subdiff(&args_b.iter().map(String::as_str).collect::<Vec<_>>()).status.success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let (header, rows) = read_csv(Path::new(&a));
    assert_eq!(header, ["alpha", "theta", "tau", "error", "rate"]);
    assert_eq!(rows.len(), 12);
    // sorted by (α, θ, τ descending within a row)
    let keys: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap()))
        .collect();
    assert!(keys.windows(2).all(|w| w[0] <= w[1]));
    for chunk in rows.chunks(3) {
        assert!(chunk[0][4].is_empty());
        for pair in chunk.windows(2) {
            let e0: f64 = pair[0][3].parse().unwrap();
            let e1: f64 = pair[1][3].parse().unwrap();
            let rate: f64 = pair[1][4].parse().unwrap();
            assert_eq!(rate, (e0 / e1).log2());
        }
    }
}

#[test]
fn convergence_rejects_off_grid_time() {
    let o = subdiff(&[
        "convergence", "--example", "ex1", "--alphas", "0.5", "--thetas", "0.3", "--taus", "0.3", "--ncells", "10",
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8(o.stderr).unwrap().contains("kind=invalid_input"));
}

#[test]
fn fastcheck_accuracy() {
    let o = subdiff(&["fastcheck", "--alpha", "0.5", "--theta", "0.25", "--alg", "1", "--nmax", "120"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("n,exact,fast,abs_error\n"));
    for line in text.lines().skip(50) {
        let err: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(err <= 1e-10, "{line}");
    }
}

#[test]
fn bench_reports_peak_entries() {
    let o = subdiff(&["bench", "--history", "standard", "--nsteps", "200"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "200");
    assert_eq!(row[2], "201");
}

#[test]
fn stability_flags_growth() {
    let o = subdiff(&["stability", "--theta", "0.509", "--tfinal", "2.5", "--ncells", "50"]);
    assert!(o.status.success());
    let err = String::from_utf8(o.stderr).unwrap();
    let growth: f64 = err
        .split("transverse_growth=")
        .nth(1)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(growth > 1.0);
}

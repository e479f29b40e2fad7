use std::fs;
use std::process::Command;

use lapcert_cli::{read_matrix_file, run, EXIT_CONFIG, EXIT_IO, EXIT_OK};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("lapcert").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
        .unwrap_or_else(|| panic!("no `{key}` in {text}"))
}

#[test]
fn sbm_margin() {
    let (code, out, _) = call(&["tail", "--model", "sbm", "--alpha", "9", "--beta", "1"]);
    assert_eq!(code, EXIT_OK);
    let m: f64 = field(&out, "margin").parse().unwrap();
    // sqrt 9 - sqrt 1 - sqrt 2
    assert!((m - (2.0 - 2f64.sqrt())).abs() < 1e-8);
}

#[test]
fn exact_tail() {
    let (code, out, _) = call(&["tail", "--kind", "exact", "--m", "2", "--p", "0.5", "--q", "0.5", "--delta", "0"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(field(&out, "t_exact").parse::<f64>().unwrap(), 0.6875);
}

#[test]
fn montecarlo_tail_reports_standard_error() {
    let (code, out, _) = call(&[
        "tail", "--kind", "montecarlo", "--m", "10", "--p", "0.3", "--q", "0.5", "--delta", "2", "--trials", "20000",
    ]);
    assert_eq!(code, EXIT_OK);
    let exact: f64 = field(&out, "t_exact").parse().unwrap();
    let est: f64 = field(&out, "t_montecarlo").parse().unwrap();
    let se: f64 = field(&out, "std_err").parse().unwrap();
    assert!((est - exact).abs() <= 4.0 * se);
}

#[test]
fn er_sweep_at_the_limits() {
    let (code, out, _) = call(&["sweep", "--experiment", "er", "--n", "4", "--p", "0,1", "--trials", "1"]);
    assert_eq!(code, EXIT_OK, "{out}");
    let freqs: Vec<&str> = out.lines().filter_map(|l| l.split_whitespace().find(|t| t.starts_with("freq_connected="))).collect();
    assert_eq!(freqs, vec!["freq_connected=0", "freq_connected=1"]);
}

#[test]
fn sweep_writes_csv_and_meta() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sbm.csv");
    let p = path.to_str().unwrap();
    let args = ["sweep", "--experiment", "sbm", "--n", "40", "--alpha", "4,10", "--beta", "1", "--trials", "5", "--seed", "3", "--out", p];
    let (code, out, _) = call(&args);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("wrote"));
    let first = fs::read(&path).unwrap();
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 3);
    assert!(dir.path().join("sbm.meta.json").exists());
    let (code, _, _) = call(&args);
    assert_eq!(code, EXIT_OK);
    assert_eq!(fs::read(&path).unwrap(), first);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"experiment": "er", "n": 4, "p": 0, "trials": 3, "seed": 1}"#).unwrap();
    let (code, out, _) = call(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("freq_connected=0"), "{out}");
    let (code, out, _) = call(&["sweep", "--config", cfg.to_str().unwrap(), "--p", "1"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("freq_connected=1"), "{out}");

    fs::write(&cfg, r#"{"experiment": "er", "n": 4, "p": 0, "bogus": 1}"#).unwrap();
    let (code, _, err) = call(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("bogus"), "{err}");
}

#[test]
fn ratio_subcommand() {
    let (code, out, _) = call(&["ratio", "--ensemble", "wigner-neg-laplacian", "--n", "40", "--trials", "4"]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.contains("n=40"));
}

#[test]
fn usage_errors_exit_one() {
    let (code, _, err) = call(&["sweep", "--bogus"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("Usage"), "{err}");
    let (code, _, _) = call(&["sweep", "--experiment", "sbm", "--n", "41", "--alpha", "4", "--beta", "1"]);
    assert_eq!(code, EXIT_CONFIG);
    let (code, _, _) = call(&["tail", "--model", "sbm", "--alpha", "9"]);
    assert_eq!(code, EXIT_CONFIG);
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("sweep"));
}

#[test]
fn missing_files_exit_two() {
    let (code, _, err) = call(&["eig", "/nonexistent/matrix.txt"]);
    assert_eq!(code, EXIT_IO);
    assert!(err.starts_with("error:"));
    let (code, _, _) = call(&["sweep", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(code, EXIT_IO);
}

#[test]
fn eig_on_a_path_laplacian() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    fs::write(&path, "3\n1 -1 0\n-1 2 -1\n0 -1 1\n").unwrap();
    let (code, out, err) = call(&["eig", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(err.is_empty());
    let ev: Vec<f64> = out.lines().map(|l| l.parse().unwrap()).collect();
    for (a, b) in ev.iter().zip([0.0, 1.0, 3.0]) {
        assert!((a - b).abs() < 1e-12);
    }
    let (code, out, _) = call(&["eig", path.to_str().unwrap(), "--k", "2"]);
    assert_eq!(code, EXIT_OK);
    assert!((out.trim().parse::<f64>().unwrap() - 1.0).abs() < 1e-12);
    let (code, _, _) = call(&["eig", path.to_str().unwrap(), "--k", "4"]);
    assert_eq!(code, EXIT_CONFIG);
}

#[test]
fn asymmetric_input_warns_and_averages() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.txt");
    fs::write(&path, "2\n0 1\n3 0\n").unwrap();
    let (m, asym) = read_matrix_file(&path).unwrap();
    assert_eq!(m.get(0, 1), 2.0);
    assert_eq!(asym, 2.0);
    let (code, out, err) = call(&["eig", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(err.contains("warning"));
    assert_eq!(out.lines().map(|l| l.parse::<f64>().unwrap()).collect::<Vec<_>>(), vec![-2.0, 2.0]);

    fs::write(&path, "2\n0 1\n1\n").unwrap();
    let (code, _, err) = call(&["eig", path.to_str().unwrap()]);
    assert_eq!(code, EXIT_IO);
    assert!(err.contains("row 2"), "{err}");
}

#[test]
fn certify_reports() {
    let (code, out, _) = call(&["certify", "--model", "sbm", "--n", "100", "--alpha", "12", "--beta", "1", "--seed", "4"]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert_eq!(field(&out, "tight"), "true");
    assert_eq!(field(&out, "side"), "above");
    assert!(field(&out, "lambda2").parse::<f64>().unwrap() > 0.0);

    let (code, out, _) = call(&["certify", "--model", "er", "--n", "50", "--p", "1"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(field(&out, "connected_spectral"), "true");
    assert_eq!(field(&out, "connected_unionfind"), "true");
    assert!((field(&out, "lambda2").parse::<f64>().unwrap() - 50.0).abs() < 1e-8);

    let (code, out, _) = call(&["certify", "--model", "z2gauss", "--n", "60", "--sigma-scale", "0.3"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(field(&out, "tight"), "true");
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_lapcert");
    let ok = Command::new(bin).args(["tail", "--model", "er", "--rho", "2"]).output().unwrap();
    assert!(ok.status.success());
    assert_eq!(String::from_utf8_lossy(&ok.stdout).trim(), "margin 1");
    let bad = Command::new(bin).arg("--nope").output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(!bad.stderr.is_empty());
    let io = Command::new(bin).args(["eig", "/nonexistent"]).output().unwrap();
    assert_eq!(io.status.code(), Some(2));
}

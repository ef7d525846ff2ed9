use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparse-edge"))
}

fn run_config(text: &str, dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join("run.cfg");
    std::fs::write(&cfg, text).unwrap();
    bin()
        .arg(&cfg)
        .arg("--output")
        .arg(dir)
        .args(extra)
        .output()
        .unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn density_of_the_semicircle_at_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("command = density\nZ = 1, 0\n", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("density.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("schema_version,1"));
    assert_eq!(lines.next(), Some("x,rho"));
    let zero = lines
        .map(|l| l.split_once(',').unwrap())
        .find(|(x, _)| x.parse::<f64>().unwrap() == 0.0)
        .expect("grid contains x = 0");
    let rho: f64 = zero.1.parse().unwrap();
    assert!((rho - std::f64::consts::FRAC_1_PI).abs() < 1e-6, "rho(0) = {rho}");
}

#[test]
fn model_reports_the_plain_edge() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["--command", "model", "--Z", "1,0", "--output"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("model.json")).unwrap()).unwrap();
    assert!((v["edge_root"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((v["tau"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn missing_output_directory_is_an_error_without_files() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out = bin()
        .args(["--command", "density", "--output"])
        .arg(&missing)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!missing.exists());
    assert!(listing(dir.path()).is_empty());
}

#[test]
fn invalid_b_exits_with_one_and_names_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("command = rigidity\nN = 100\nb = 0.6\nM = 50\n", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 3") && err.contains("(0, 0.5)"), "{err}");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("command = density\nZ1 = 1\n", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Z1"));
}

#[test]
fn rigidity_writes_three_files_per_n_and_is_reproducible() {
    let cfg = "command = rigidity\nN = 100,200\nb = 0.2\nfamily = centered_bernoulli\nM = 50\nk = 2\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let out_a = run_config(cfg, a.path(), &["--workers", "1"]);
    let out_b = run_config(cfg, b.path(), &["--workers", "3"]);
    let code = out_a.status.code();
    assert!(matches!(code, Some(0) | Some(2)), "{}", String::from_utf8_lossy(&out_a.stderr));
    assert_eq!(code, out_b.status.code());
    let names = listing(a.path());
    for n in [100, 200] {
        for ext in ["json", "csv", "plot.csv"] {
            assert!(names.contains(&format!("rigidity_N{n}.{ext}")), "{names:?}");
        }
    }
    for extra in ["rigidity.cfg", "rigidity.meta", "rigidity_trend.json"] {
        assert!(names.contains(&extra.to_string()), "{names:?}");
    }
    for name in names.iter().filter(|n| !n.ends_with(".meta") && !n.ends_with(".cfg")) {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(x, y, "{name} differs between worker counts");
    }
    let stdout = String::from_utf8_lossy(&out_a.stdout);
    assert!(stdout.contains("median_s_1 ratio"), "{stdout}");
    let expected = if stdout.lines().all(|l| l.starts_with("PASS")) { 0 } else { 2 };
    assert_eq!(code, Some(expected));
}

#[test]
fn contract_failure_exits_with_two() {
    // With the corrections switched off the corrected and uncorrected
    // statistics coincide, so the variance-reduction contract cannot hold.
    let dir = tempfile::tempdir().unwrap();
    let cfg = "command = fluct\nN = 80\nb = 0.1\nM = 500\nforce_semicircle = true\nks_resamples = 50\n";
    let out = run_config(cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("FAIL") && l.contains("Var(cor)/Var(unc)")), "{stdout}");
}

#[test]
fn engine_errors_exit_with_one_and_flag_partial_outputs() {
    // N = 40 is written before N = 1 fails (k = 2 exceeds N).
    let dir = tempfile::tempdir().unwrap();
    let cfg = "command = rigidity\nN = 40,1\nb = 0.2\nfamily = centered_bernoulli\nc4_floor = 0\nM = 50\nk = 2\n";
    let out = run_config(cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("partial outputs"), "{err}");
    assert!(err.contains("rigidity_N40.json"), "{err}");
}

#[test]
fn sample_and_spectrum_dumps() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("command = sample\nN = 12\nb = 0.2\nindex = 3\n", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let bin = std::fs::read(dir.path().join("sample_N12_i3.bin")).unwrap();
    assert_eq!(bin.len(), 8 + 8 * 144);
    let cfg = std::fs::read_to_string(dir.path().join("sample_N12_i3.cfg")).unwrap();
    assert!(cfg.contains("N = 12"));

    let out = run_config("command = spectrum\nN = 12\nb = 0.2\nindex = 3\n", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("spectrum_N12_i3.csv")).unwrap();
    assert_eq!(text.lines().count(), 2 + 12);
}

#[test]
fn corrections_table_has_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_config("command = corrections\nN = 30\nb = 0.25\nM = 4\n", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("corrections_N30.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[1], "index,seed,z1,z2,x");
    assert_eq!(lines.len(), 2 + 4);
}

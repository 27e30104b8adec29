use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const LINE: &str =
    r#""r_per_km":0.02,"l_per_km":5e-4,"c_per_km":4e-7,"g_per_km":0,"length_km":100"#;

fn lineres(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lineres"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn config(dir: &Path, name: &str, extra: &str) -> PathBuf {
    let path = dir.join(name);
    let body = if extra.is_empty() {
        format!("{{{LINE}}}")
    } else {
        format!("{{{LINE},{extra}}}")
    };
    std::fs::write(&path, body).unwrap();
    path
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn closed_form_spectrum_of_reference_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spectrum.csv");
    let o = lineres(&[
        "spectrum",
        "--method",
        "closed-form",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let rows = rows(&out);
    assert_eq!(rows.len(), 121);
    let reals: Vec<f64> = rows
        .iter()
        .filter(|r| r[1].parse::<f64>().unwrap() == 0.0)
        .map(|r| r[0].parse().unwrap())
        .collect();
    assert_eq!(reals.len(), 1);
    assert!((reals[0] + 40.0).abs() < 1e-9);
    let text = stdout(&o);
    assert!(text.contains("rad/s") && text.contains("Hz"));
}

#[test]
fn spectrum_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "c.json",
        r#""n_sections":9,"load":{"z":3,"g_load":0.05}"#,
    );
    let out = dir.path().join("s.csv");
    let o = lineres(&[
        "spectrum",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    for r in rows(&out) {
        let v: Vec<f64> = r[..5].iter().map(|x| x.parse().unwrap()).collect();
        let omega = v[0].hypot(v[1]);
        assert_eq!(v[2], omega);
        assert_eq!(v[3], v[1] / (2.0 * std::f64::consts::PI));
        assert_eq!(v[4], -v[0] / omega);
    }
}

#[test]
fn numeric_and_closed_form_agree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "c.json", r#""n_sections":20"#);
    let parse = |method: &str| {
        let out = dir.path().join(format!("{method}.csv"));
        let o = lineres(&[
            "spectrum",
            "--config",
            cfg.to_str().unwrap(),
            "--method",
            method,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        rows(&out)
            .iter()
            .map(|r| (r[0].parse::<f64>().unwrap(), r[1].parse::<f64>().unwrap()))
            .collect::<Vec<_>>()
    };
    let a = parse("closed-form");
    let b = parse("numeric");
    assert_eq!(a.len(), b.len());
    let scale = 1.0e7;
    for &(re, im) in &a {
        let nearest = b
            .iter()
            .map(|&(r, i)| (r - re).hypot(i - im))
            .fold(f64::INFINITY, f64::min);
        assert!(nearest <= 1e-6 * scale);
    }
}

#[test]
fn missing_config_is_a_usage_error() {
    let o = lineres(&["spectrum", "--config", "/no/such/config.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/no/such/config.json"));
}

#[test]
fn bad_config_contents_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = config(dir.path(), "u.json", r#""n_sections":9,"colour":"red""#);
    assert_eq!(
        lineres(&["spectrum", "--config", unknown.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    let zero_mode = config(dir.path(), "k.json", r#""n_sections":9,"mode_k":0"#);
    assert_eq!(
        lineres(&["sensitivity", "--config", zero_mode.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    let bad_z = config(
        dir.path(),
        "z.json",
        r#""n_sections":9,"load":{"z":10,"g_load":1}"#,
    );
    assert_eq!(
        lineres(&["spectrum", "--config", bad_z.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        lineres(&["spectrum", "--method", "guess"]).status.code(),
        Some(2)
    );
}

#[test]
fn sweep_reports_optimum_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "c.json",
        r#""n_sections":21,"modes":[1,2],"g_load":0.01"#,
    );
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = lineres(&[
            "sweep",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        (std::fs::read(&out).unwrap(), stdout(&o))
    };
    let (first, summary) = run("a.csv");
    let (second, _) = run("b.csv");
    assert_eq!(first, second);
    assert!(summary.contains("mode 1: optimal z = 11"));
    assert!(summary.contains("mode 2:") && summary.contains("conjecture"));

    let text = String::from_utf8(first).unwrap();
    assert_eq!(text.lines().count(), 1 + 21 * 2 + 2);
    for line in text.lines().skip(1) {
        let f: Vec<f64> = line
            .split(',')
            .skip(2)
            .map(|x| x.parse().unwrap())
            .collect();
        assert_eq!(f[0], -f[1] / f[1].hypot(f[2]));
    }
}

#[test]
fn zero_load_sweep_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "c.json", r#""n_sections":9,"g_load":0"#);
    let out = dir.path().join("w.csv");
    let o = lineres(&[
        "sweep",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("degenerate sweep"));
}

#[test]
fn locus_and_sensitivity_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "c.json", r#""n_sections":9,"z":5"#);
    let out = dir.path().join("l.csv");
    let o = lineres(&[
        "locus",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("stationary traces: 9"));
    assert!(text.contains("asymptotic targets"));
    assert!(std::fs::read_to_string(&out)
        .unwrap()
        .starts_with("trace_id,g_load,re,im\n"));

    let out = dir.path().join("s.csv");
    let o = lineres(&[
        "sensitivity",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("optimal z = 5;"), "{text}");
    assert!(text.contains("-1/(C(n+2))"));
    assert!(text.contains("within 5%"));
    assert_eq!(rows(&out).len(), 9);
}

#[test]
fn simulate_writes_trajectory_and_peaks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "c.json",
        r#""n_sections":10,"dt":2e-5,"t_end":0.05,"stride":10"#,
    );
    let out = dir.path().join("traj.csv");
    let o = lineres(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let traj = std::fs::read_to_string(&out).unwrap();
    assert!(traj.starts_with("t,i_1,v_1,"));
    assert_eq!(traj.lines().count(), 1 + 251);
    let peaks = std::fs::read_to_string(dir.path().join("traj_peaks.csv")).unwrap();
    assert!(peaks.starts_with("f_hz,rel_mag\n"));
    assert!(stdout(&o).contains("first resonance"));

    assert_eq!(
        lineres(&["simulate", "--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn validate_exit_codes_and_determinism() {
    let a = lineres(&["validate", "--seed", "11"]);
    let b = lineres(&["validate", "--seed", "11"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let report = stdout(&a);
    assert!(report.starts_with("name,status,measured,tolerance\n"));
    assert!(report
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(1) == Some("pass")));

    let bad = lineres(&["validate", "--corrupt-recurrence"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("chebyshev_consistency,FAIL"));
}

use std::fs;
use std::path::Path;
use std::process::Command;

use tempfile::TempDir;

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_timoshenko")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("problem.toml");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL_SWEEP: &str = r#"
[geometry]
n = 60
[material]
young = 1.0
[control]
etas = [0.0, 3e-6, 1.2e-5, 2.7e-5]
"#;

fn data_rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn zero_data_gives_zero_fields() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[geometry]\nn = 8\n[data]\nf = { kind = \"zero\" }\n");
    let out = dir.path().join("out");
    let (code, _, err) = run(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");
    for f in ["control.txt", "deflection.txt", "rotation.txt", "adjoint_p.txt", "adjoint_q.txt"] {
        let text = fs::read_to_string(out.join(f)).unwrap();
        for line in text.lines() {
            let cols: Vec<f64> = line.split_whitespace().map(|s| s.parse().unwrap()).collect();
            assert_eq!(cols.len(), 2);
            assert_eq!(cols[1], 0.0, "{f}: {line}");
        }
    }
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("# n=8"));
    let rows = data_rows(&summary);
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[0][5], "8");
}

#[test]
fn sweep_writes_one_row_per_eta() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL_SWEEP);
    let out = dir.path().join("out");
    let (code, _, err) = run(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--jobs", "2"]);
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("eta,cost,l2norm,null"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 4);
    let nulls: Vec<usize> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(nulls.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(nulls[0], 0);
    assert_eq!(*nulls.last().unwrap(), 60);
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SMALL_SWEEP);
    let strip = |p: &Path| -> Vec<String> {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| match l.rsplit_once(',') {
                Some((head, _)) if !l.starts_with('#') => head.to_string(),
                _ => l.to_string(),
            })
            .collect()
    };
    let mut results = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("out{k}"));
        let (code, _, _) = run(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "7"]);
        assert_eq!(code, 0);
        results.push(strip(&out.join("sweep.csv")));
        let (code, _, _) = run(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0);
    }
    assert_eq!(results[0], results[1]);
    let a = fs::read(dir.path().join("out0/control.txt")).unwrap();
    let b = fs::read(dir.path().join("out1/control.txt")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    for body in [
        "[geometry]\nelements = 5\n",
        "[solver]\nscheme = \"cubic\"\n",
        "[control]\nlower = 1.0\n",
        "[control]\netas = [1e-5, 0.0]\n",
        "[geometry]\nn = 1\n",
        "[data]\nf = { kind = \"table\", path = \"missing.txt\" }\n",
        "not toml at all [",
    ] {
        let cfg = write_config(dir.path(), body);
        let (code, _, err) = run(&["solve", "--config", &cfg, "--out", out]);
        assert_eq!(code, 1, "{body}: {err}");
        assert!(err.contains("error"), "{err}");
    }
    let (code, _, _) = run(&["solve", "--config", "/nonexistent/problem.toml", "--out", out]);
    assert_eq!(code, 1);
}

#[test]
fn non_convergence_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "[geometry]\nn = 60\n[material]\nyoung = 1.0\n[control]\neta = 3e-6\n[solver]\nmax_iter = 1\n");
    let out = dir.path().join("out");
    let (code, _, err) = run(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2, "{err}");
    assert!(out.join("summary.csv").exists());
}

#[test]
fn tabulated_data_is_interpolated() {
    let dir = TempDir::new().unwrap();
    let table: String = (0..=100)
        .map(|i| {
            let x = i as f64 / 100.0;
            format!("{x} {}\n", 100.0 * (8.0 * std::f64::consts::PI * x).sin())
        })
        .collect();
    fs::write(dir.path().join("load.txt"), table).unwrap();
    let base = "[geometry]\nn = 40\n[material]\nyoung = 1.0\n[control]\neta = 3e-6\n";
    let cfg_t = write_config(dir.path(), &format!("{base}[data]\nf = {{ kind = \"table\", path = \"load.txt\" }}\n"));
    let out_t = dir.path().join("t");
    assert_eq!(run(&["solve", "--config", &cfg_t, "--out", out_t.to_str().unwrap()]).0, 0);
    let cfg_s = write_config(dir.path(), base);
    let out_s = dir.path().join("s");
    assert_eq!(run(&["solve", "--config", &cfg_s, "--out", out_s.to_str().unwrap()]).0, 0);
    let cost = |p: &Path| -> f64 { data_rows(&fs::read_to_string(p.join("summary.csv")).unwrap())[0][0].parse().unwrap() };
    let (a, b) = (cost(&out_t), cost(&out_s));
    assert!((a - b).abs() <= 0.02 * b, "{a} vs {b}");
}

#[test]
fn locking_and_convergence_write_long_tables() {
    let dir = TempDir::new().unwrap();
    let body = r#"
[material]
young = 12.0
poisson = 0.3
kappa = 1.0
[control]
nu = 1e-6
eta = 1e-5
lower = -2.0
upper = 2.0
[data]
f = { kind = "sine", amplitude = 1.0, frequency = 2.0 }
w_d = { kind = "sine", amplitude = 0.02, frequency = 1.0 }
[locking]
thicknesses = [1e-3]
ns = [8, 16]
[convergence]
thicknesses = [1e-2]
ns = [8, 16, 32]
"#;
    let cfg = write_config(dir.path(), body);
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    assert_eq!(run(&["locking", "--config", &cfg, "--out", o]).0, 0);
    let lock = fs::read_to_string(out.join("locking.csv")).unwrap();
    assert!(lock.contains("# n_ref=128"));
    let rows = data_rows(&lock);
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][0], "standard");
    assert_eq!(rows[3][0], "locking_free");
    assert_eq!(run(&["convergence", "--config", &cfg, "--out", o]).0, 0);
    assert_eq!(data_rows(&fs::read_to_string(out.join("convergence.csv")).unwrap()).len(), 3);
    let rates = data_rows(&fs::read_to_string(out.join("rates.csv")).unwrap());
    assert!(rates[0][1].parse::<f64>().unwrap() > 0.7);
}

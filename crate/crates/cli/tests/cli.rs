use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gradflow::io;

fn gradflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gradflow")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Writes `body` plus an `out_dir` line into `dir/name`.
fn config(dir: &Path, name: &str, body: &str, out: &str) -> PathBuf {
    let path = dir.join(name);
    let out_dir = dir.join(out);
    fs::write(&path, format!("{body}out_dir = {}\n", out_dir.display())).unwrap();
    path
}

const CH: &str = "\
model = ch
correction = eop
nx = 32
tau = 1e-3
T = 0.05
alpha0 = 1e-4
eps = 0.01
M = 0.1
kappa = 4
C0 = 100
init = random offset=0.1 amplitude=0.05
seed = 7
snapshot_every = 25
";

const CASE_B: &str = "\
model = ac
nx = 64
tau = 1e-2
T = 2
alpha0 = 0.01
eps = 0.01
M = 0.51
C0 = 1
";

#[test]
fn missing_config_exits_with_one() {
    let out = gradflow(&["run", "/nonexistent/gradflow.cfg"]);
    assert_eq!(code(&out), 1);
    assert!(!stderr(&out).is_empty());
}

#[test]
fn unknown_key_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "bad.cfg", &format!("{CH}colour = red\n"), "out");
    let out = gradflow(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line 14"), "{}", stderr(&out));
}

#[test]
fn help_and_bad_arguments() {
    assert_eq!(code(&gradflow(&["--help"])), 0);
    assert_eq!(code(&gradflow(&["run"])), 1);
    assert_eq!(code(&gradflow(&["frobnicate"])), 1);
}

#[test]
fn invalid_thread_count_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "ch.cfg", CH, "out");
    let out = Command::new(env!("CARGO_BIN_EXE_gradflow"))
        .args(["run", cfg.to_str().unwrap()])
        .env("GRADFLOW_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&out), 1);
}

#[test]
fn run_is_deterministic_and_conserves_mass() {
    let dir = tempfile::tempdir().unwrap();
    let a = config(dir.path(), "a.cfg", CH, "a");
    let b = config(dir.path(), "b.cfg", CH, "b");
    for cfg in [&a, &b] {
        let out = gradflow(&["run", cfg.to_str().unwrap()]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    let ta = fs::read(dir.path().join("a/trace.csv")).unwrap();
    let tb = fs::read(dir.path().join("b/trace.csv")).unwrap();
    assert_eq!(ta, tb);

    let rows = io::read_trace(dir.path().join("a/trace.csv")).unwrap();
    assert_eq!(rows.len(), 51);
    let m0 = rows[0].mass;
    for r in &rows {
        assert!((r.mass - m0).abs() <= 1e-10 * (1.0 + m0.abs()), "n = {}", r.n);
        assert!(r.e_mod <= rows[0].e_mod + 1e-9 * rows[0].e_mod.abs());
    }

    for n in [0, 25, 50] {
        let snap = io::read_snapshot(dir.path().join(format!("a/snapshot_{n:08}.gfs"))).unwrap();
        assert_eq!((snap.nx, snap.ny), (32, 32));
        assert!((snap.time - n as f64 * 1e-3).abs() < 1e-15);
    }
    let last = io::read_snapshot(dir.path().join("a/snapshot_00000050.gfs")).unwrap();
    let mean = last.values.iter().sum::<f64>() / last.values.len() as f64;
    assert!((mean - 0.1).abs() < 1e-2);
}

#[test]
fn single_compare_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = config(dir.path(), "a.cfg", CH, "a");
    let b = config(dir.path(), "b.cfg", CH, "b");
    assert_eq!(code(&gradflow(&["run", a.to_str().unwrap()])), 0);
    let out = gradflow(&["compare", b.to_str().unwrap(), "--corrections", "eop"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read(dir.path().join("a/trace.csv")).unwrap(), fs::read(dir.path().join("b/trace.csv")).unwrap());
}

#[test]
fn relax_parameter_out_of_range_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "ch.cfg", CH, "out");
    for bad in ["relax:1.5", "relax:-0.1", "relax:x", "exact"] {
        let out = gradflow(&["compare", cfg.to_str().unwrap(), "--corrections", &format!("eop,{bad}")]);
        assert_eq!(code(&out), 1, "{bad}");
    }
    let body = format!("{CH}correction = relax\neta = 2\n").replace("correction = eop\n", "");
    let cfg = config(dir.path(), "eta.cfg", &body, "out");
    assert_eq!(code(&gradflow(&["run", cfg.to_str().unwrap()])), 1);
}

#[test]
fn solver_failure_exits_with_two_and_keeps_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!("{CH}lin_tol = 1e-14\nlin_maxit = 1\n");
    let cfg = config(dir.path(), "ch.cfg", &body, "out");
    let out = gradflow(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("step 1"), "{}", stderr(&out));
    let rows = io::read_trace(dir.path().join("out/trace.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].n, 0);
}

#[test]
fn compare_orders_corrections_by_energy_gap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "b.cfg", CASE_B, "out");
    let out = gradflow(&["compare", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for name in ["trace_baseline.csv", "trace_relax_0.5.csv", "trace_eop.csv"] {
        assert!(dir.path().join("out").join(name).exists(), "{name}");
    }
    let text = fs::read_to_string(dir.path().join("out/compare.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,t,E_ref,gap_baseline,gap_relax:0.5,gap_eop");
    let mut rows = 0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let (base, relax, eop) = (v[3], v[4], v[5]);
        let slack = 1e-9 * (1.0 + v[2].abs());
        assert!(eop <= relax + slack && relax <= base + slack, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 201);
}

#[test]
fn converge_against_itself_has_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let body = CH.replace("correction = eop\n", "stepper = cn\ncorrection = eop\n");
    let cfg = config(dir.path(), "ch.cfg", &body, "out");
    let out = gradflow(&["converge", cfg.to_str().unwrap(), "--tau-list", "1e-3", "--ref-tau", "1e-3"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout, fs::read_to_string(dir.path().join("out/convergence.csv")).unwrap());
    let mut lines = stdout.lines();
    assert_eq!(lines.next().unwrap(), "tau,err_phi,err_q,rate_phi,rate_q");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[1].parse::<f64>().unwrap(), 0.0);
    assert_eq!(row[2].parse::<f64>().unwrap(), 0.0);
    assert_eq!(&row[3..], &["", ""]);
}

#[test]
fn converge_rejects_bad_steps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "ch.cfg", CH, "out");
    let out = gradflow(&["converge", cfg.to_str().unwrap(), "--tau-list", "1e-3,-1", "--ref-tau", "1e-4"]);
    assert_eq!(code(&out), 1);
}

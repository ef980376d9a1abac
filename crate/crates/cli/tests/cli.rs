use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn ahd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ahd")).args(args).env_remove("AHD_OUT_DIR").output().expect("runs ahd")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_toml(out: &Output) -> toml::Table {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8_lossy(&out.stdout).parse().unwrap()
}

fn float(t: &toml::Table, key: &str) -> f64 {
    t[key].as_float().unwrap_or_else(|| panic!("{key} missing"))
}

fn erfc_half(x: f64) -> f64 {
    // Independent oracle: composite Simpson on e^{-t²} over [x, x + 12].
    let n = 20_000;
    let h = 12.0 / n as f64;
    let f = |t: f64| (-t * t).exp();
    let mut sum = f(x) + f(x + 12.0);
    for i in 1..n {
        sum += f(x + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0 / std::f64::consts::PI.sqrt()
}

const CAT_PI_3: &str = r#"
alpha = 0.5
thetas = [1.0471975511965976]
trials = 400
estimator = "mc"
seed = 11

[[ancillae]]
kind = "cat"
re = 1.0
parity = "odd"
"#;

#[test]
fn n0_rb_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "n0.toml", "alpha = 0.5\ntrials = 50\n");
    let t = stdout_toml(&ahd(&["simulate", "--config", s(&cfg)]));
    let expect = erfc_half(0.5 * 2f64.sqrt());
    assert!((float(&t, "estimate") - expect).abs() < 1e-6);
    assert!(float(&t, "ci_low") <= float(&t, "estimate") && float(&t, "estimate") <= float(&t, "ci_high"));
    assert_eq!(t["config_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn simulate_is_deterministic_and_seed_sensitive() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "cat.toml", CAT_PI_3);
    let a = ahd(&["simulate", "--config", s(&cfg)]);
    let b = ahd(&["--workers", "3", "simulate", "--config", s(&cfg)]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = ahd(&["simulate", "--config", s(&cfg), "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
    let t = stdout_toml(&c);
    assert_eq!(t["seed"].as_integer(), Some(12));
}

#[test]
fn bad_priors_name_the_field() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "bad.toml", "alpha = 0.5\npriors = [0.6, 0.6]\n");
    let out = ahd(&["simulate", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("priors"));
    let cfg = write(dir.path(), "typo.toml", "alpha = 0.5\ntrails = 10\n");
    let out = ahd(&["simulate", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trails"));
}

#[test]
fn leakage_is_a_numerical_guard() {
    let out = ahd(&["verify", "fock", "--cutoff", "4", "--alpha", "1.5"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("leakage"));
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "small.toml",
        "alpha = 0.5\ncutoff = 6\nthetas = [0.5]\n[[ancillae]]\nkind = \"coherent\"\nre = 1.5\n",
    );
    assert_eq!(ahd(&["simulate", "--config", s(&cfg)]).status.code(), Some(3));
}

#[test]
fn dump_has_one_row_per_trial() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "cat.toml", CAT_PI_3);
    let dump = dir.path().join("dump.csv");
    assert!(ahd(&["simulate", "--config", s(&cfg), "--dump-trajectories", s(&dump)]).status.success());
    let text = std::fs::read_to_string(&dump).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("trial,truth,y_1,x,cond_error,theta_1,x0,decision"));
    assert_eq!(lines.count(), 400);

    let hist = ahd(&["plotdata", "x0-histogram", "--source", s(&dump), "--config", s(&cfg), "--bins", "12"]);
    assert!(hist.status.success());
    let text = String::from_utf8_lossy(&hist.stdout);
    assert!(text.starts_with("bin_center,count,density,reference_density\n"));
    let total: u64 = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(total, 400);
}

#[test]
fn plotdata_rejects_mismatched_sources() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "cat.toml", CAT_PI_3);
    let out = ahd(&["plotdata", "scan-heatmap", "--source", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let out = ahd(&["plotdata", "x0-histogram", "--source", s(&cfg), "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    // An rb dump has no x₀ column values.
    let rb = write(dir.path(), "rb.toml", &CAT_PI_3.replace("\"mc\"", "\"rb\""));
    let dump = dir.path().join("rb.csv");
    assert!(ahd(&["simulate", "--config", s(&rb), "--dump-trajectories", s(&dump)]).status.success());
    let out = ahd(&["plotdata", "x0-histogram", "--source", s(&dump), "--config", s(&rb)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ber_vs_alpha_rb_is_the_homodyne_curve() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "sweep.toml", "alpha = 0.5\ntrials = 20\nalphas = [0.3, 0.5, 1.0]\n");
    let out = ahd(&["plotdata", "ber-vs-alpha", "--source", s(&cfg)]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("alpha,ber,std_error,ber0"));
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[1] - erfc_half(v[0] * 2f64.sqrt())).abs() < 1e-6);
        assert!((v[3] - erfc_half(v[0] * 2f64.sqrt())).abs() < 1e-9);
    }
}

#[test]
fn exact_n1_examples() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str, text: &str| -> toml::Table {
        let cfg = write(dir.path(), name, text);
        stdout_toml(&ahd(&["exact-n1", "--config", s(&cfg)]))
    };
    let id = run("id.toml", "alpha = 0.5\nthetas = [0.0]\n[[ancillae]]\nkind = \"coherent\"\nre = 0.5\n");
    assert!(float(&id, "difference").abs() < 1e-6);
    let cat = run("cat.toml", CAT_PI_3);
    assert!(float(&cat, "difference").abs() < 1e-4);
    let fock = run("fock.toml", "alpha = 1.0\nthetas = [0.7853981633974483]\n[[ancillae]]\nkind = \"fock\"\nn = 1\n");
    assert!(float(&fock, "difference").abs() < 1e-4);
    assert!((float(&fock, "ber0") - erfc_half(2f64.sqrt())).abs() < 1e-9);

    let n2 = write(dir.path(), "n2.toml", "alpha = 0.5\nthetas = [0.1, 0.2]\n[[ancillae]]\nkind = \"fock\"\nn = 1\n[[ancillae]]\nkind = \"fock\"\nn = 1\n");
    assert_eq!(ahd(&["exact-n1", "--config", s(&n2)]).status.code(), Some(2));
}

const SMOKE_SCAN: &str = r#"
alpha = 0.5

[[ancillae]]
kind = "coherent"
re = 0.5

[[ancillae]]
kind = "cat"
re = 1.0
parity = "odd"

[scan]
theta = [0.0, 0.5235987755982988, 1.0471975511965976]
phi = [0.0, 1.2]
chi = [0.0]
phi0 = [0.0, 0.8]
phi1 = [0.0]
"#;

#[test]
fn scan_smoke_grid() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "scan.toml", SMOKE_SCAN);
    let report = dir.path().join("scan.toml.out");
    assert!(ahd(&["scan-u2", "--config", s(&cfg), "--out", s(&report)]).status.success());
    let t: toml::Table = std::fs::read_to_string(&report).unwrap().parse().unwrap();
    assert_eq!(t["dropped"].as_array().unwrap()[0].as_str(), Some("delta (global phase)"));
    assert!(t["threshold_rule"].as_str().unwrap().contains("threshold"));
    let ber0 = float(&t, "ber0");
    let rows = t["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2 * 3 * 2 * 2);
    let mut last = f64::NEG_INFINITY;
    for r in rows {
        let r = r.as_table().unwrap();
        let (bt, bm) = (float(r, "ber_threshold"), float(r, "ber_ml"));
        assert!(bt >= last);
        last = bt;
        assert!(bm <= bt + 1e-9);
        if float(r, "phi") == 0.0 && float(r, "chi") == 0.0 && float(r, "phi0") == 0.0 {
            assert!((bt - ber0).abs() < 1e-4);
        }
        if float(r, "theta") == 0.0 {
            // Decoupled ancilla: the signal picks up phase φ + χ and is read
            // out at φ₀, which projects its mean onto cos(φ + χ + φ₀).
            let psi = float(r, "phi") + float(r, "chi") + float(r, "phi0");
            let expect = erfc_half(2f64.sqrt() * 0.5 * psi.cos());
            assert!((bt - expect).abs() < 1e-6, "{r:?}");
        }
    }

    let heat = ahd(&["plotdata", "scan-heatmap", "--source", s(&report)]);
    assert!(heat.status.success());
    let text = String::from_utf8_lossy(&heat.stdout);
    assert!(text.starts_with("ancilla,theta,chi,ber_threshold,ber_ml,ber0\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 3);
}

#[test]
fn scan_budget_is_enforced() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "scan.toml", &format!("{SMOKE_SCAN}budget = 5\n"));
    let out = ahd(&["scan-u2", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scan.budget"));
}

#[test]
fn verify_is_deterministic() {
    let a = ahd(&["verify", "all", "--seed", "7"]);
    let b = ahd(&["--workers", "2", "verify", "all", "--seed", "7"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.status.code(), b.status.code());
    let t: toml::Table = String::from_utf8_lossy(&a.stdout).parse().unwrap();
    assert_eq!(t["seed"].as_integer(), Some(7));
    // Every check except the literal signed single-photon convention holds.
    let failures: Vec<_> = t["failures"].as_array().unwrap().iter().map(|f| f.as_str().unwrap().to_string()).collect();
    assert_eq!(failures, ["separability/single-photon-amplitudes-signed"]);
    assert_eq!(a.status.code(), Some(1));
}

#[test]
fn verify_separability_reports_deviations() {
    let out = ahd(&["verify", "separability"]);
    let t: toml::Table = String::from_utf8_lossy(&out.stdout).parse().unwrap();
    let checks = t["checks"].as_array().unwrap();
    let density = checks
        .iter()
        .map(|c| c.as_table().unwrap())
        .find(|c| c["name"].as_str() == Some("rotated-density-max-deviation"))
        .unwrap();
    assert!(float(density, "value") < 1e-6);
    assert_eq!(density["passed"].as_bool(), Some(true));
}

#[test]
fn out_dir_env_sets_default_destination() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "n0.toml", "alpha = 0.5\ntrials = 5\n");
    let out_dir = dir.path().join("results");
    let out = Command::new(env!("CARGO_BIN_EXE_ahd"))
        .args(["simulate", "--config", s(&cfg)])
        .env("AHD_OUT_DIR", &out_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(out_dir.join("simulate.toml")).unwrap();
    assert!(text.contains("estimate"));
}

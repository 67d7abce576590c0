use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_contact-nh"))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env("ENGINE_LOG", "error").output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("system.toml");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn simulate_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("damped_particle.toml");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--x0",
        "1,0,1,1,0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,q1,q2,p1,p2,z,drift,H");
    assert_eq!(lines.len(), 5002);
    let last: Vec<f64> = lines[5001].split(',').map(|s| s.parse().unwrap()).collect();
    assert_eq!(last[0], 5.0);
    assert!(last[6] <= 1e-6);
    // 17 significant digits
    assert!(lines[1].split(',').all(|f| f.split('e').next().unwrap().trim_start_matches('-').len() == 18));

    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["rows"], 5001);
    assert!(manifest["failure"].is_null());
    assert!(manifest["engine_version"].is_string());
    let original: Value = toml::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    assert_eq!(manifest["config"]["hamiltonian"]["expr"], original["hamiltonian"]["expr"]);
    assert_eq!(manifest["config"]["n"], original["n"]);
}

#[test]
fn zero_horizon_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("damped_particle.toml")).unwrap().replace("t_end = 5.0", "t_end = 0.0");
    let cfg = write_config(dir.path(), &text);
    let out_dir = dir.path().join("run");
    let out =
        run(&["simulate", "--config", cfg.to_str().unwrap(), "--x0", "1,0,1,1,0", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn lagrangian_simulation_matches_hamiltonian() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("h"), dir.path().join("l"));
    for (cfg, out) in [("damped_particle.toml", &a), ("damped_particle_lagrangian.toml", &b)] {
        let o = run(&[
            "simulate",
            "--config",
            config(cfg).to_str().unwrap(),
            "--x0",
            "1,0,1,1,0",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
    }
    let read = |p: &Path| -> Vec<Vec<f64>> {
        std::fs::read_to_string(p.join("trajectory.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|s| s.parse().unwrap()).collect())
            .collect()
    };
    let (ha, la) = (read(&a), read(&b));
    assert_eq!(ha.len(), la.len());
    let sup = ha
        .iter()
        .zip(&la)
        .flat_map(|(x, y)| x[1..6].iter().zip(&y[1..6]).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max);
    assert!(sup <= 1e-5, "{sup:e}");
}

#[test]
fn malformed_expression_exits_2_with_offset() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(config("damped_particle.toml")).unwrap().replace("p2 - q1*p1", "p2 - q1*)p1");
    let cfg = write_config(dir.path(), &text);
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--x0",
        "1,0,1,1,0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("syntax error at byte 8"), "{err}");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["simulate"]).status.code(), Some(2));
    let cfg = config("damped_particle.toml");
    let out = run(&["simulate", "--config", cfg.to_str().unwrap(), "--x0", "1,2", "--out", "/tmp"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["verify", "--config", "/nonexistent/system.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn off_m_start_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("damped_particle.toml");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--x0",
        "1,0,1,2,0",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("off the constraint manifold"));
}

#[test]
fn numerical_failure_exits_3_and_keeps_partial_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "mode = \"hamiltonian\"\nn = 1\n[hamiltonian]\nexpr = \"-log(z)\"\n[integrator]\nh = 0.1\nt_end = 10.0\n",
    );
    let out_dir = dir.path().join("run");
    let out =
        run(&["simulate", "--config", cfg.to_str().unwrap(), "--x0", "0,0,0.5", "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let rows = std::fs::read_to_string(out_dir.join("trajectory.csv")).unwrap().lines().count() - 1;
    assert!(rows > 1 && rows < 101, "{rows}");
    let manifest: Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert!(manifest["failure"].as_str().unwrap().contains("domain error"));
}

#[test]
fn verify_passes_and_is_deterministic() {
    let cfg = config("damped_particle_lagrangian.toml");
    let args = ["verify", "--config", cfg.to_str().unwrap(), "--samples", "20", "--seed", "5"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stdout));
    assert_eq!(a.stdout, b.stdout);
    let r = json(&a);
    assert_eq!(r["summary"]["failed"], 0);
    for key in ["tangency", "bracket_coincidence", "legendre.vector_field", "lie_characterization", "projector_algebra"]
    {
        assert_eq!(r["checks"][key]["pass"], true, "{key}");
    }
    let c = run(&["verify", "--config", cfg.to_str().unwrap(), "--samples", "20", "--seed", "6"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn verify_reports_a_reeb_force_violation() {
    let cfg = config("reeb_force.toml");
    let out = run(&["verify", "--config", cfg.to_str().unwrap(), "--samples", "10"]);
    assert_eq!(out.status.code(), Some(3));
    let r = json(&out);
    assert_eq!(r["checks"]["structural_checks.reeb_in_F"]["pass"], false);
    assert_eq!(r["checks"]["tangency"]["pass"], true);
    assert_eq!(r["checks"]["force_membership"]["pass"], true);
    assert!(r["checks"]["lie_characterization"]["skipped"].is_string());
}

#[test]
fn verify_skips_constrained_checks_without_constraints() {
    let cfg = config("free_oscillator.toml");
    let out = run(&["verify", "--config", cfg.to_str().unwrap(), "--samples", "10"]);
    assert!(out.status.success());
    let r = json(&out);
    assert!(r["checks"]["tangency"]["skipped"].is_string());
    assert!(r["checks"]["casimir"]["skipped"].is_string());
    for key in ["dissipation.energy", "dissipation.eta", "dissipation.divergence"] {
        assert_eq!(r["checks"][key]["pass"], true, "{key}");
    }
}

#[test]
fn bracket_examples() {
    let cfg = config("damped_particle_lagrangian.toml");
    let c = cfg.to_str().unwrap();
    let r = json(&run(&["bracket", "--config", c, "--f", "p1^2/2 + p2^2/2 + z", "--g", "q1", "--point", "1,0,1,1,0"]));
    for key in ["nh", "p_nh", "eden"] {
        assert!((r[key].as_f64().unwrap() - 2.0).abs() <= 1e-12, "{key}: {}", r[key]);
    }
    let r =
        json(&run(&["bracket", "--config", c, "--f", "p2 - q1*p1", "--g", "sin(q2) + z*p1", "--point", "1,0,1,1,0"]));
    for key in ["nh", "p_nh", "eden"] {
        assert!(r[key].as_f64().unwrap().abs() <= 1e-9, "{key}");
    }
    let r = json(&run(&["bracket", "--config", c, "--f", "q2*p1", "--g", "q2*p1", "--point", "1,0,1,1,0"]));
    for key in ["nh", "p_nh", "eden"] {
        assert_eq!(r[key].as_f64().unwrap(), 0.0, "{key}");
    }
    let out = run(&["bracket", "--config", c, "--f", "q1", "--g", "z", "--point", "1,0,1,2,0"]);
    assert_eq!(out.status.code(), Some(2));
}

use std::fmt::Write as _;
use std::path::Path;

use contact_nh::calculus::{LagrangianPoint, PhasePoint};
use contact_nh::constrained::ConstrainedSystem;
use contact_nh::integrator::{integrate, integrate_lagrangian, PROJECTION_MAX_ITER, PROJECTION_TOL};
use contact_nh::Error;
use log::info;
use serde_json::{json, Value};

use crate::config::{parse_vector, Mode, SystemConfig};
use crate::error::{CliError, CliResult};
use crate::output::{write_json, write_text};

struct Row {
    t: f64,
    x: PhasePoint,
    drift: f64,
    h: f64,
}

fn csv(n: usize, rows: &[Row]) -> String {
    let mut out = String::from("t");
    for i in 1..=n {
        write!(out, ",q{i}").unwrap();
    }
    for i in 1..=n {
        write!(out, ",p{i}").unwrap();
    }
    out.push_str(",z,drift,H\n");
    for r in rows {
        write!(out, "{:.16e}", r.t).unwrap();
        for v in r.x.as_slice() {
            write!(out, ",{v:.16e}").unwrap();
        }
        writeln!(out, ",{:.16e},{:.16e}", r.drift, r.h).unwrap();
    }
    out
}

fn start_error(e: Error) -> CliError {
    match e {
        Error::OffConstraint { .. } | Error::DimensionMismatch { .. } => CliError::Usage(format!("x0: {e}")),
        e => CliError::Numerical(e),
    }
}

fn hamiltonian_rows(
    sys: &ConstrainedSystem,
    x0: &PhasePoint,
    cfg: &SystemConfig,
) -> CliResult<(Vec<Row>, Option<Error>)> {
    let traj = integrate(sys, x0, cfg.settings()).map_err(start_error)?;
    let rows = traj
        .times
        .iter()
        .zip(&traj.states)
        .zip(&traj.diagnostics)
        .map(|((&t, x), d)| Row { t, x: x.clone(), drift: d.drift, h: d.energy })
        .collect();
    Ok((rows, traj.failure))
}

pub fn run(config: &Path, x0: &str, out: &Path) -> CliResult<()> {
    let cfg = SystemConfig::load(config)?;
    let built = cfg.build()?;
    let sys = &built.system;
    let n = cfg.n;
    let x0v = parse_vector(x0, 2 * n + 1, "x0")?;

    // lagrangian runs start from (q, v, z) and are written through the Legendre map
    let (rows, failure) = match cfg.mode {
        Mode::Hamiltonian => hamiltonian_rows(sys, &PhasePoint::from_slice(n, &x0v)?, &cfg)?,
        Mode::Lagrangian => {
            let mech = built.mechanical.as_ref().expect("lagrangian mode builds a mechanical system");
            let start = LagrangianPoint::from_slice(n, &x0v)?;
            let traj = integrate_lagrangian(mech, &start, cfg.settings()).map_err(start_error)?;
            let mut rows = Vec::with_capacity(traj.len());
            for (&t, x) in traj.times.iter().zip(&traj.states) {
                let y = mech.legendre(x)?;
                rows.push(Row { t, drift: sys.drift(&y)?, h: sys.hamiltonian().eval(&y)?, x: y });
            }
            (rows, traj.failure)
        }
    };

    std::fs::create_dir_all(out).map_err(|source| CliError::Write { path: out.into(), source })?;
    write_text(&out.join("trajectory.csv"), &csv(n, &rows))?;
    let last = rows.last().expect("trajectory holds the initial state");
    let max_drift = rows.iter().fold(0.0f64, |m, r| m.max(r.drift));
    let manifest = json!({
        "command": "simulate",
        "config": serde_json::to_value(&cfg).expect("config serializes"),
        "engine_version": env!("ENGINE_GIT_DESCRIBE"),
        "crate_version": env!("CARGO_PKG_VERSION"),
        "x0": x0v,
        "rows": rows.len(),
        "t_final": last.t,
        "final_drift": last.drift,
        "max_drift": max_drift,
        "failure": failure.as_ref().map(|e| Value::String(e.to_string())),
        "tolerances": {
            "on_m": "1e-8 * (1 + |x|_inf)",
            "projection_tol": PROJECTION_TOL,
            "projection_max_iter": PROJECTION_MAX_ITER,
        },
        "seed": cfg.seed,
    });
    write_json(&out.join("manifest.json"), &manifest)?;
    info!("wrote {} rows to {}", rows.len(), out.display());
    match failure {
        Some(e) => Err(CliError::Numerical(e)),
        None => Ok(()),
    }
}

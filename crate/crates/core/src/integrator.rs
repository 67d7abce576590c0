//! Fixed-step RK4 integration with constraint-drift monitoring.

use log::debug;

use crate::calculus::{LagrangianPoint, PhasePoint, VectorField};
use crate::constrained::ConstrainedSystem;
use crate::error::{DomainKind, Error, Result};
use crate::lagrangian::{LagrangianField, MechanicalSystem};

use std::sync::Arc;

/// Newton iteration limit and tolerance for the post-step projection.
pub const PROJECTION_MAX_ITER: usize = 10;
pub const PROJECTION_TOL: f64 = 1e-12;

/// One classical four-stage Runge-Kutta step.
pub fn rk4_step(field: &dyn VectorField, x: &PhasePoint, h: f64) -> Result<PhasePoint> {
    let k1 = field.eval(x)?;
    let k2 = field.eval(&x.shifted(&k1, h / 2.0))?;
    let k3 = field.eval(&x.shifted(&k2, h / 2.0))?;
    let k4 = field.eval(&x.shifted(&k3, h))?;
    let incr = k1.plus(&k2.scaled(2.0)).plus(&k3.scaled(2.0)).plus(&k4);
    Ok(x.shifted(&incr, h / 6.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSettings {
    pub h: f64,
    pub t_end: f64,
    pub project: bool,
}

impl IntegratorSettings {
    pub fn new(h: f64, t_end: f64, project: bool) -> Self {
        IntegratorSettings { h, t_end, project }
    }

    fn validate(&self) -> Result<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::InvalidSystem(format!("step size must be positive, got {}", self.h)));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::InvalidSystem(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        Ok(())
    }

    /// Number of steps to reach `t_end`; the last step is shortened if needed.
    pub fn steps(&self) -> usize {
        if self.t_end == 0.0 {
            return 0;
        }
        let r = self.t_end / self.h;
        let k = r.round();
        if (r - k).abs() <= 1e-9 * r.max(1.0) {
            k as usize
        } else {
            r.ceil() as usize
        }
    }

    fn time(&self, i: usize) -> f64 {
        if i == self.steps() {
            self.t_end
        } else {
            i as f64 * self.h
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    /// `max_a |phi^a|` (Hamiltonian side) or `max_a |Phi^a(v)|` (Lagrangian side).
    pub drift: f64,
    /// `H` or `E_L`.
    pub energy: f64,
    /// Euclidean norm of the multipliers.
    pub multiplier_norm: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory<S = PhasePoint> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub diagnostics: Vec<StepDiagnostics>,
    /// Set when integration halted early; the rows before it are valid.
    pub failure: Option<Error>,
}

impl<S> Trajectory<S> {
    fn empty() -> Self {
        Trajectory { times: Vec::new(), states: Vec::new(), diagnostics: Vec::new(), failure: None }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn max_drift(&self) -> f64 {
        self.diagnostics.iter().fold(0.0, |m, d| m.max(d.drift))
    }

    pub fn last(&self) -> Option<&S> {
        self.states.last()
    }
}

fn non_finite() -> Error {
    Error::Domain { kind: DomainKind::NonFinite, offset: 0 }
}

fn hamiltonian_diagnostics(sys: &ConstrainedSystem, x: &PhasePoint) -> Result<StepDiagnostics> {
    let d = sys.point_data_unchecked(x)?;
    let lam = d.multipliers_for(d.xh.vector())?;
    Ok(StepDiagnostics { drift: crate::linalg::max_abs(d.phi.as_slice()), energy: d.h, multiplier_norm: lam.norm() })
}

/// Integrates the constrained field from a point of M.
pub fn integrate(sys: &ConstrainedSystem, x0: &PhasePoint, settings: IntegratorSettings) -> Result<Trajectory> {
    settings.validate()?;
    sys.check_on_m(x0)?;
    let field = sys.constrained_field();
    let mut traj = Trajectory::empty();
    traj.times.push(0.0);
    traj.states.push(x0.clone());
    traj.diagnostics.push(hamiltonian_diagnostics(sys, x0)?);

    let mut x = x0.clone();
    for i in 1..=settings.steps() {
        let h = settings.time(i) - settings.time(i - 1);
        let step = rk4_step(&field, &x, h).and_then(|y| {
            let y = if settings.project { sys.project_to_m(&y, PROJECTION_MAX_ITER, PROJECTION_TOL)? } else { y };
            if !y.is_finite() {
                return Err(non_finite());
            }
            let diag = hamiltonian_diagnostics(sys, &y)?;
            Ok((y, diag))
        });
        match step {
            Ok((y, diag)) => {
                traj.times.push(settings.time(i));
                traj.states.push(y.clone());
                traj.diagnostics.push(diag);
                x = y;
            }
            Err(e) => {
                debug!("integration halted at step {i}: {e}");
                traj.failure = Some(e);
                break;
            }
        }
    }
    Ok(traj)
}

fn lagrangian_diagnostics(mech: &MechanicalSystem, x: &LagrangianPoint) -> Result<StepDiagnostics> {
    let (_, lam) = mech.herglotz_unchecked(x)?;
    Ok(StepDiagnostics {
        drift: mech.velocity_residual(x)?,
        energy: mech.energy_and_form(x)?.0,
        multiplier_norm: lam.norm(),
    })
}

/// Integrates the constrained Herglotz field from a point with `v` in `D`.
pub fn integrate_lagrangian(
    mech: &Arc<MechanicalSystem>,
    x0: &LagrangianPoint,
    settings: IntegratorSettings,
) -> Result<Trajectory<LagrangianPoint>> {
    settings.validate()?;
    mech.check_in_d(x0)?;
    let n = mech.n();
    let field = LagrangianField { mech: Arc::clone(mech) };
    let mut traj = Trajectory::empty();
    traj.times.push(0.0);
    traj.states.push(x0.clone());
    traj.diagnostics.push(lagrangian_diagnostics(mech, x0)?);

    let mut x = PhasePoint::from_slice(n, x0.as_slice())?;
    for i in 1..=settings.steps() {
        let h = settings.time(i) - settings.time(i - 1);
        let step = rk4_step(&field, &x, h).and_then(|y| {
            let mut lp = LagrangianPoint::from_slice(n, y.as_slice())?;
            if settings.project {
                lp = mech.project_velocity(&lp)?;
            }
            if !lp.is_finite() {
                return Err(non_finite());
            }
            let diag = lagrangian_diagnostics(mech, &lp)?;
            Ok((lp, diag))
        });
        match step {
            Ok((lp, diag)) => {
                x = PhasePoint::from_slice(n, lp.as_slice())?;
                traj.times.push(settings.time(i));
                traj.states.push(lp);
                traj.diagnostics.push(diag);
            }
            Err(e) => {
                debug!("integration halted at step {i}: {e}");
                traj.failure = Some(e);
                break;
            }
        }
    }
    Ok(traj)
}

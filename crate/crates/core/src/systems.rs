//! Reference systems used by the test-suite, the examples and the CLI.

use std::sync::Arc;

use rand::Rng;

use crate::constrained::{ConstrainedSystem, ForceForm};
use crate::error::Result;
use crate::lagrangian::MechanicalSystem;

/// `L = (v1^2 + v2^2)/2 - gamma z` with `v2 = q1 v1`.
pub fn damped_particle_mechanical(gamma: f64) -> Result<Arc<MechanicalSystem>> {
    let v = format!("-{gamma:?}*z");
    Ok(Arc::new(MechanicalSystem::parse(2, &[vec!["1", "0"], vec!["0", "1"]], &v, &[vec!["-q1", "1"]])?))
}

/// The Hamiltonian counterpart of [`damped_particle_mechanical`] with `gamma = 1`:
/// `H = (p1^2 + p2^2)/2 + z`, `phi = p2 - q1 p1`, `Psi = -q1 dq1 + dq2`.
pub fn damped_particle() -> Result<ConstrainedSystem> {
    let f = ForceForm::parse(2, &["-q1", "1"], &[], "")?;
    Ok(ConstrainedSystem::parse(2, "p1^2/2 + p2^2/2 + z", &["p2 - q1*p1"], vec![f])?
        .with_mechanical_origin(damped_particle_mechanical(1.0)?))
}

/// `g = diag(2, 1)`, `Phi = dq2`, a harmonic well in `q1` and linear damping.
pub fn weighted_oscillator() -> Result<Arc<MechanicalSystem>> {
    Ok(Arc::new(MechanicalSystem::parse(2, &[vec!["2", "0"], vec!["0", "1"]], "-0.5*z - 0.5*q1^2", &[vec!["0", "1"]])?))
}

/// A position-dependent metric with a non-integrable constraint
/// `v2 = q1 v1` and a nonlinear dissipative potential.
pub fn curved_particle() -> Result<Arc<MechanicalSystem>> {
    Ok(Arc::new(MechanicalSystem::parse(
        2,
        &[vec!["1 + q2^2/2", "0"], vec!["0", "1"]],
        "-0.3*z - 0.2*z^2/2 + 0.5*cos(q1)",
        &[vec!["-q1", "1"]],
    )?))
}

/// A knife edge on a plane with an orientation-dependent inertia.
pub fn three_dof_mechanical() -> Result<Arc<MechanicalSystem>> {
    Ok(Arc::new(MechanicalSystem::parse(
        3,
        &[vec!["1", "0", "0"], vec!["0", "1", "0"], vec!["0", "0", "1 + 0.25*sin(q1)^2"]],
        "-0.4*z - 0.5*(q1^2 + q2^2)",
        &[vec!["sin(q3)", "-cos(q3)", "0"]],
    )?))
}

/// A random system with `m` constraints and `m` vertical forces (no `dp`, no
/// `dz` parts), so both structural preconditions hold.
pub fn random_vertical(n: usize, m: usize, rng: &mut impl Rng) -> Result<ConstrainedSystem> {
    let mut c = || rng.random_range(-1.0..=1.0_f64);
    let mut h = String::from("z");
    for i in 1..=n {
        h += &format!(" + p{i}^2/2 + {:?}*cos(q{i})", c());
    }
    let mut constraints = Vec::new();
    let mut forces = Vec::new();
    for a in 0..m {
        // phi^a = p_{a+1} + sum_{i > m} c_i q^1 p_i, dual form dq^{a+1} + ...
        let mut phi = format!("p{}", a + 1);
        let mut dq = vec!["0".to_string(); n];
        dq[a] = "1".into();
        for (i, slot) in dq.iter_mut().enumerate().skip(m) {
            let w = c();
            phi += &format!(" + {w:?}*q1*p{}", i + 1);
            *slot = format!("{w:?}*q1");
        }
        constraints.push(phi);
        let dq: Vec<&str> = dq.iter().map(String::as_str).collect();
        forces.push(ForceForm::parse(n, &dq, &[], "")?);
    }
    let constraints: Vec<&str> = constraints.iter().map(String::as_str).collect();
    ConstrainedSystem::parse(n, &h, &constraints, forces)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_systems_build() {
        damped_particle().unwrap();
        for mech in [damped_particle_mechanical(1.0), weighted_oscillator(), curved_particle(), three_dof_mechanical()]
        {
            mech.unwrap().induced_hamiltonian_system().unwrap();
        }
    }

    #[test]
    fn random_vertical_is_structurally_sound() {
        let mut r = crate::sampling::rng(11);
        for _ in 0..5 {
            let sys = random_vertical(3, 2, &mut r).unwrap();
            let x = crate::sampling::points_on_m(&sys, 1, 5, &Default::default()).unwrap().remove(0);
            let s = sys.structural_checks(&x).unwrap();
            assert!(s.reeb_in_f && s.f_self_orthogonal, "{s:?}");
            assert!(sys.multipliers(&x).is_ok());
        }
    }
}

use contact_nh::calculus::{lie_scalar, PhasePoint};
use contact_nh::constrained::ConstrainedSystem;
use contact_nh::expr::Var;
use contact_nh::integrator::{integrate, rk4_step, IntegratorSettings};
use contact_nh::systems;

fn start() -> PhasePoint {
    PhasePoint::new(&[1.0, 0.0], &[1.0, 1.0], 0.0)
}

/// Global error at `t = 10` of `z' = -z`, `z(0) = 1`, for `h = 0.1 / 2^k`.
fn decay_errors() -> Vec<f64> {
    let sys = ConstrainedSystem::parse(1, "p1^2/2 + z", &[], vec![]).unwrap();
    let x0 = PhasePoint::new(&[0.0], &[0.0], 1.0);
    (0..7)
        .map(|k| {
            let h = 0.1 / 2f64.powi(k);
            let t = integrate(&sys, &x0, IntegratorSettings::new(h, 10.0, false)).unwrap();
            (t.last().unwrap().z() - (-10.0_f64).exp()).abs()
        })
        .collect()
}

#[test]
fn rk4_is_fourth_order() {
    let e = decay_errors();
    for w in e.windows(2) {
        let ratio = w[0] / w[1];
        assert!(ratio >= 14.0, "{e:?}");
    }
}

#[test]
fn unprojected_drift_stays_small() {
    let sys = systems::damped_particle().unwrap();
    let t = integrate(&sys, &start(), IntegratorSettings::new(1e-3, 5.0, false)).unwrap();
    assert!(t.failure.is_none());
    assert_eq!(t.len(), 5001);
    assert!(t.max_drift() <= 1e-6, "{:e}", t.max_drift());
}

#[test]
fn projection_reduces_drift() {
    let sys = systems::damped_particle().unwrap();
    for h in [1e-2, 1e-3] {
        let free = integrate(&sys, &start(), IntegratorSettings::new(h, 5.0, false)).unwrap();
        let proj = integrate(&sys, &start(), IntegratorSettings::new(h, 5.0, true)).unwrap();
        assert!(proj.max_drift() <= 1e-10, "{:e}", proj.max_drift());
        for (a, b) in free.diagnostics.iter().zip(&proj.diagnostics) {
            assert!(b.drift <= a.drift.max(1e-15));
        }
    }
}

#[test]
fn no_constraints_reduces_to_the_contact_flow() {
    let sys = ConstrainedSystem::parse(2, "p1^2/2 + p2^2/2 + 0.2*z + cos(q1)", &[], vec![]).unwrap();
    let x0 = PhasePoint::new(&[0.1, 0.2], &[0.3, -0.4], 0.5);
    let t = integrate(&sys, &x0, IntegratorSettings::new(0.01, 1.0, false)).unwrap();
    let mut x = x0;
    for _ in 0..100 {
        x = rk4_step(sys.hamiltonian_field(), &x, 0.01).unwrap();
    }
    assert!(t.last().unwrap().minus(&x).norm_inf() <= 1e-14);
}

#[test]
fn conservative_energy_is_preserved_to_fourth_order() {
    let sys = ConstrainedSystem::parse(1, "p1^2/2 + 1 - cos(q1)", &[], vec![]).unwrap();
    let x0 = PhasePoint::new(&[1.0], &[0.5], 0.0);
    let drift = |h: f64| {
        let t = integrate(&sys, &x0, IntegratorSettings::new(h, 10.0, false)).unwrap();
        t.diagnostics.iter().map(|d| (d.energy - t.diagnostics[0].energy).abs()).fold(0.0, f64::max)
    };
    let (a, b) = (drift(0.04), drift(0.02));
    assert!(a < 1e-4 && a / b > 10.0, "{a:e} {b:e}");
}

#[test]
fn energy_law_along_the_constrained_flow() {
    // dH/dt = -R(H) H - Q(X_H)(H), checked with a central difference in time
    let sys = systems::damped_particle_mechanical(0.6).unwrap().induced_hamiltonian_system().unwrap();
    let h = 1e-3;
    let t = integrate(&sys, &start(), IntegratorSettings::new(h, 2.0, true)).unwrap();
    let ham = sys.hamiltonian();
    let reaction = sys.reaction_field();
    for i in (1..t.len() - 1).step_by(97) {
        let x = &t.states[i];
        let dh = (t.diagnostics[i + 1].energy - t.diagnostics[i - 1].energy) / (2.0 * h);
        let rh = ham.partial(Var::Z).eval_at(2, x.as_slice()).unwrap();
        let rhs = -rh * ham.eval(x).unwrap() - lie_scalar(&reaction, ham, x).unwrap();
        assert!((dh - rhs).abs() <= 1e-5, "t = {}: {dh} vs {rhs}", t.times[i]);
    }
}

#[test]
fn trajectories_are_reproducible() {
    let sys = systems::curved_particle().unwrap().induced_hamiltonian_system().unwrap();
    let x0 = sys.project_to_m(&PhasePoint::new(&[0.3, 0.1], &[0.5, 0.2], 0.0), 10, 1e-12).unwrap();
    let a = integrate(&sys, &x0, IntegratorSettings::new(1e-2, 3.0, true)).unwrap();
    let b = integrate(&sys, &x0, IntegratorSettings::new(1e-2, 3.0, true)).unwrap();
    assert_eq!(a.states, b.states);
    assert!(a.times.windows(2).all(|w| w[1] > w[0]));
}

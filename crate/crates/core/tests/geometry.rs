use contact_nh::brackets::{jacobiator, BracketRegistry};
use contact_nh::calculus::{lie_scalar, OneFormValue, PhasePoint, ScalarField, VectorField, VectorValue};
use contact_nh::constrained::ConstrainedSystem;
use contact_nh::contact::DarbouxChart;
use contact_nh::expr::Var;
use proptest::prelude::*;

fn triple(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    let v = move || prop::collection::vec(-2.0..2.0f64, 2 * n + 1);
    (v(), v(), v())
}

const HAMILTONIANS: [&str; 3] = [
    "p1^2/2 + p2^2/2 + 0.3*z + cos(q1)",
    "(p1^2 + p2^2)/2 + z^2/4 + q1*q2",
    "exp(tanh(p1)) + sin(q2)*z + p2^2*(1 + q1^2)/2",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn flat_and_sharp_are_inverse((x, v, a) in triple(2)) {
        let chart = DarbouxChart::new(2).unwrap();
        let x = PhasePoint::from_slice(2, &x).unwrap();
        let v = VectorValue::from_slice(2, &v).unwrap();
        let a = OneFormValue::from_slice(2, &a).unwrap();
        prop_assert!(chart.sharp_at(&x, &chart.flat_at(&x, &v)).minus(&v).norm_inf() <= 1e-12 * (1.0 + v.norm_inf()));
        prop_assert!(chart.flat_at(&x, &chart.sharp_at(&x, &a)).minus(&a).norm_inf() <= 1e-12 * (1.0 + a.norm_inf()));
    }

    #[test]
    fn flat_is_the_contraction_formula((x, v, w) in triple(2)) {
        // flat(v)(w) = d eta(v, w) + eta(v) eta(w)
        let chart = DarbouxChart::new(2).unwrap();
        let x = PhasePoint::from_slice(2, &x).unwrap();
        let v = VectorValue::from_slice(2, &v).unwrap();
        let w = VectorValue::from_slice(2, &w).unwrap();
        let lhs = chart.flat_at(&x, &v).pair(&w);
        let rhs = chart.deta_at(&x, &v, &w) + chart.eta_at(&x, &v) * chart.eta_at(&x, &w);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn unconstrained_dissipation_identities(idx in 0usize..3, x in prop::collection::vec(-1.5..1.5f64, 5)) {
        let sys = ConstrainedSystem::parse(2, HAMILTONIANS[idx], &[], vec![]).unwrap();
        let x = PhasePoint::from_slice(2, &x).unwrap();
        let r = sys.identity_report(&x).unwrap();
        prop_assert!(r.passes(), "{:?}", r);
        // the same law evaluated directly from the Hamiltonian field
        let h = sys.hamiltonian();
        let lie = lie_scalar(sys.hamiltonian_field(), h, &x).unwrap();
        let rh = h.partial(Var::Z).eval_at(2, x.as_slice()).unwrap();
        prop_assert!((lie + rh * h.eval(&x).unwrap()).abs() <= 1e-12 * sys.scale(&x).unwrap());
    }
}

#[test]
fn frame_formulas() {
    for n in [1, 2, 4] {
        let chart = DarbouxChart::new(n).unwrap();
        let x = PhasePoint::from_slice(n, &(0..2 * n + 1).map(|i| 0.3 * i as f64 - 0.7).collect::<Vec<_>>()).unwrap();
        for i in 0..n {
            let dqi = OneFormValue::unit(n, Var::Q(i));
            assert_eq!(chart.sharp_at(&x, &dqi), VectorValue::unit(n, Var::P(i)).scaled(-1.0));
            let dpi = OneFormValue::unit(n, Var::P(i));
            let expect = VectorValue::unit(n, Var::Q(i)).plus(&VectorValue::unit(n, Var::Z).scaled(x.p()[i]));
            assert_eq!(chart.sharp_at(&x, &dpi), expect);
        }
        assert_eq!(chart.sharp_at(&x, &chart.eta(&x)), chart.reeb());
    }
}

#[test]
fn jacobi_identity_without_constraints() {
    let sys = ConstrainedSystem::parse(2, HAMILTONIANS[0], &[], vec![]).unwrap();
    let f = ScalarField::parse("q1*p2 + z^2", 2).unwrap();
    let g = ScalarField::parse("sin(p1) + q2*z", 2).unwrap();
    let x = PhasePoint::new(&[0.3, -0.4], &[0.8, 0.1], 0.6);
    let registry = BracketRegistry::default();
    for name in ["nh", "p_nh"] {
        let b = registry.get(name).unwrap();
        let j = jacobiator(&sys, b.as_ref(), &f, &g, sys.hamiltonian(), &x).unwrap();
        assert!(j.abs() <= 1e-6, "{name}: {j}");
    }
}

#[test]
fn hamiltonian_field_jacobian_matches_finite_differences() {
    let sys = ConstrainedSystem::parse(2, HAMILTONIANS[2], &[], vec![]).unwrap();
    let x = PhasePoint::new(&[0.3, -0.4], &[0.8, 0.1], 0.6);
    let field = sys.hamiltonian_field();
    let exact = field.jacobian(&x).unwrap();
    let fd = contact_nh::calculus::fd_jacobian(field, &x).unwrap();
    assert!((exact - fd).amax() < 1e-8);
}

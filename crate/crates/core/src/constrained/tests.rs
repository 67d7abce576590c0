use super::*;
use crate::calculus::ConstantField;

fn particle_force(n: usize) -> ForceForm {
    ForceForm::parse(n, &["-q1", "1"], &[], "").unwrap()
}

fn particle() -> ConstrainedSystem {
    ConstrainedSystem::parse(2, "p1^2/2 + p2^2/2 + z", &["p2 - q1*p1"], vec![particle_force(2)]).unwrap()
}

fn sample() -> PhasePoint {
    PhasePoint::new(&[1.0, 0.0], &[1.0, 1.0], 0.0)
}

#[test]
fn force_fields_examples() {
    let x = sample();
    let xa = particle().force_vector_fields(&x).unwrap();
    assert_eq!(xa[0], VectorValue::new(&[0.0, 0.0], &[1.0, -1.0], 0.0));

    let sys =
        ConstrainedSystem::parse(2, "z", &[], vec![coordinate_form(2, Var::Z), coordinate_form(2, Var::P(0))]).unwrap();
    let xa = sys.force_vector_fields(&x).unwrap();
    assert_eq!(xa[0], VectorValue::new(&[0.0, 0.0], &[-1.0, -1.0], 1.0));
    assert_eq!(xa[1], VectorValue::new(&[1.0, 0.0], &[0.0, 0.0], 1.0));
}

#[test]
fn c_matrix_examples() {
    let sys = particle();
    assert_eq!(sys.c_matrix(&sample()).unwrap(), DMatrix::from_row_slice(1, 1, &[-2.0]));

    let free = ConstrainedSystem::parse(2, "p1^2/2", &[], vec![]).unwrap();
    let c = free.c_matrix(&sample()).unwrap();
    assert_eq!((c.nrows(), c.ncols()), (0, 0));

    let zz = ConstrainedSystem::parse(2, "p1", &["z"], vec![coordinate_form(2, Var::Z)]).unwrap();
    assert_eq!(zz.c_matrix(&sample()).unwrap(), DMatrix::from_row_slice(1, 1, &[1.0]));

    let off = PhasePoint::new(&[1.0, 0.0], &[1.0, 2.0], 0.0);
    assert!(matches!(sys.c_matrix(&off), Err(Error::OffConstraint { .. })));
}

#[test]
fn uniqueness_examples() {
    assert_eq!(particle().uniqueness_check(&sample()).unwrap(), UniquenessReport { unique: true, rank: 1 });
    let tangent = ConstrainedSystem::parse(2, "p1", &["z"], vec![coordinate_form(2, Var::Q(0))]).unwrap();
    assert!(!tangent.uniqueness_check(&sample()).unwrap().unique);
    let free = ConstrainedSystem::parse(2, "p1", &[], vec![]).unwrap();
    assert!(free.uniqueness_check(&sample()).unwrap().unique);
}

#[test]
fn existence_examples() {
    let r = particle().existence_check(&sample()).unwrap();
    assert!(r.exists);
    assert!(r.residual < 1e-10);
    assert_eq!(r.intersection_dim, 0);

    // M = {q1 = p1 = 0}, F = ker dp1: the intersection is spanned by (1, 0, p)
    let x = PhasePoint::new(&[0.0], &[0.0], 0.3);
    let bad = ConstrainedSystem::parse(1, "q1", &["q1", "p1"], vec![coordinate_form(1, Var::P(0))]).unwrap();
    let r = bad.existence_check(&x).unwrap();
    assert_eq!(r.intersection_dim, 1);
    assert!(!r.exists);
    let good = ConstrainedSystem::parse(1, "p1 + z", &["q1", "p1"], vec![coordinate_form(1, Var::P(0))]).unwrap();
    assert!(good.existence_check(&x).unwrap().exists);
}

#[test]
fn hand_solve() {
    let sys = particle();
    let x = sample();
    let solve = sys.multipliers(&x).unwrap();
    assert_eq!(solve.c[(0, 0)], -2.0);
    assert_eq!(solve.lambdas[0], 0.5);
    let v = sys.constrained_vf_at(&x).unwrap();
    assert_eq!(v, VectorValue::new(&[1.0, 1.0], &[-1.5, -0.5], 1.0));
    assert_eq!(sys.tangency_residual(&x, &v).unwrap(), 0.0);
    assert!(sys.force_membership_residual(&x, &v).unwrap() < 1e-15);
}

#[test]
fn unconstrained_field_is_xh() {
    let free = ConstrainedSystem::parse(2, "p1^2/2 + p2^2/2 + z", &[], vec![]).unwrap();
    let x = sample();
    assert_eq!(free.constrained_vf_at(&x).unwrap(), free.hamiltonian_field().eval(&x).unwrap());
}

#[test]
fn projector_examples() {
    let sys = particle();
    let x = sample();
    let xa = sys.force_vector_fields(&x).unwrap().remove(0);
    assert!(sys.projector_p(&x, &xa).unwrap().norm_inf() < 1e-15);
    assert!(sys.projector_q(&x, &xa).unwrap().minus(&xa).norm_inf() < 1e-15);
    let tangent = VectorValue::new(&[1.0, 1.0], &[-1.5, -0.5], 1.0);
    assert_eq!(sys.projector_q(&x, &tangent).unwrap().norm_inf(), 0.0);
    let xh = sys.hamiltonian_field().eval(&x).unwrap();
    assert_eq!(sys.projector_p(&x, &xh).unwrap(), tangent);
    let roman = sys.roman_p_projector(&x, &xh).unwrap();
    assert!(roman.minus(&tangent).norm_inf() < 1e-15);
}

#[test]
fn roman_g_matrix() {
    let sys = particle();
    let x = sample();
    let d = sys.point_data(&x).unwrap();
    let yc = sys.chart().sharp_matrix(&x) * d.dphi.transpose();
    assert_eq!(yc.column(0).as_slice(), &[-1.0, 1.0, 1.0, 0.0, 0.0]);
    let g = &d.psi * &yc;
    assert_eq!(g[(0, 0)], 2.0);
    assert_eq!(g[(0, 0)], -d.c[(0, 0)]);
}

#[test]
fn projector_algebra() {
    let sys = particle();
    let x = PhasePoint::new(&[0.5, 0.2], &[0.8, 0.4], -0.3);
    for name in ["calligraphic", "roman"] {
        let p = ProjectionRegistry::default().get(name).unwrap().matrix(&sys, &x).unwrap();
        let q = DMatrix::identity(5, 5) - &p;
        assert!((&p * &p - &p).amax() < 1e-12, "{name}");
        assert!((&q * &q - &q).amax() < 1e-12, "{name}");
        assert!((&p * &q).amax() < 1e-12, "{name}");
        assert!((&q * &p).amax() < 1e-12, "{name}");
    }
}

#[test]
fn k_less_than_m_uses_checked_least_squares() {
    // M = {z = 0, q1 = 0}, one force dz
    let sys = ConstrainedSystem::parse(1, "p1", &["z", "q1"], vec![coordinate_form(1, Var::Z)]).unwrap();
    let x = PhasePoint::new(&[0.0], &[0.7], 0.0);
    let along = VectorValue::unit(1, Var::Z);
    assert!(sys.projector_q(&x, &along).unwrap().minus(&sys.force_vector_fields(&x).unwrap()[0]).norm_inf() < 1e-14);
    let across = VectorValue::unit(1, Var::Q(0));
    assert!(matches!(sys.projector_q(&x, &across), Err(Error::NotInSplit { .. })));
}

#[test]
fn structural_examples() {
    let x = sample();
    let s = particle().structural_checks(&x).unwrap();
    assert!(s.all());

    let with_dz = particle().with_extra_force(coordinate_form(2, Var::Z)).unwrap();
    assert!(!with_dz.structural_checks(&x).unwrap().reeb_in_f);

    let h_p1 = ConstrainedSystem::parse(2, "p1", &["p2 - q1*p1"], vec![particle_force(2)]).unwrap();
    assert!(!h_p1.structural_checks(&x).unwrap().mechanical);
    let h_q1 = ConstrainedSystem::parse(2, "q1", &["p2 - q1*p1"], vec![particle_force(2)]).unwrap();
    assert!(h_q1.structural_checks(&x).unwrap().mechanical);
}

#[test]
fn singular_c_is_reported() {
    let tangent = ConstrainedSystem::parse(2, "p1", &["z"], vec![coordinate_form(2, Var::Q(0))]).unwrap();
    let x = sample();
    assert!(matches!(tangent.constrained_vf_at(&x), Err(Error::SingularC { .. })));
    assert!(matches!(tangent.projector_p(&x, &tangent.chart().reeb()), Err(Error::SingularC { .. })));
}

#[test]
fn identities_on_the_particle() {
    let r = particle().identity_report(&sample()).unwrap();
    assert!(r.energy_residual < 1e-12);
    assert!(r.eta_residual < 1e-8, "{r:?}");
    assert!(r.divergence_residual < 1e-12);
    assert!(r.reaction_eta_residual.unwrap() < 1e-8, "{r:?}");
}

#[test]
fn conservative_unconstrained_limit() {
    let sys = ConstrainedSystem::parse(2, "p1^2/2 + p2^2/2 + cos(q1)", &[], vec![]).unwrap();
    let x = PhasePoint::new(&[0.4, -1.0], &[0.2, 0.9], 0.5);
    let xv = sys.constrained_vf_at(&x).unwrap();
    assert!(sys.hamiltonian().gradient(&x).unwrap().pair(&xv).abs() < 1e-15);
    assert!(sys.identity_report(&x).unwrap().passes());
}

#[test]
fn lie_characterization_both_directions() {
    let sys = particle();
    let x = sample();
    let field = sys.constrained_field();
    let r = sys.lie_characterization(&field, &x).unwrap();
    assert!(r.equation_holds(1e-7) && r.characterization_holds(1e-7), "{r:?}");

    let bump = VectorValue::new(&[0.1, 0.0], &[0.0, 0.2], 0.05);
    let perturbed = crate::calculus::FnField::new(2, move |y: &PhasePoint| Ok(field.eval(y)?.plus(&bump)));
    let r = sys.lie_characterization(&perturbed, &x).unwrap();
    assert!(!r.equation_holds(1e-7) && !r.characterization_holds(1e-7), "{r:?}");

    let with_dz = sys.with_extra_force(coordinate_form(2, Var::Z)).unwrap();
    let zero = ConstantField(VectorValue::zeros(2));
    assert!(matches!(with_dz.lie_characterization(&zero, &x), Err(Error::PreconditionFailed(_))));
}

#[test]
fn newton_projection_returns_to_m() {
    let sys = particle();
    let x = PhasePoint::new(&[0.9, 0.1], &[1.2, 0.7], 0.3);
    let y = sys.project_to_m(&x, 10, 1e-12).unwrap();
    assert!(sys.drift(&y).unwrap() <= 1e-12);
    // moved only along X_a = (0, 0; q1, -1; 0) at x
    assert_eq!(y.q(), x.q());
    assert_eq!(y.z(), x.z());
}

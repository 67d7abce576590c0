//! Seeded sampling of points on constraint manifolds and of random observables.

use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::{LagrangianPoint, PhasePoint, ScalarField};
use crate::constrained::ConstrainedSystem;
use crate::error::{Error, Result};
use crate::expr::{Expr, Func, Var};
use crate::lagrangian::MechanicalSystem;

/// Axis-aligned sampling box; `p` doubles as the velocity range on the Lagrangian side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleBox {
    pub q: (f64, f64),
    pub p: (f64, f64),
    pub z: (f64, f64),
}

impl Default for SampleBox {
    fn default() -> Self {
        SampleBox { q: (-1.5, 1.5), p: (-1.5, 1.5), z: (-1.0, 1.0) }
    }
}

impl SampleBox {
    fn draw(&self, rng: &mut impl Rng, n: usize) -> (Vec<f64>, Vec<f64>, f64) {
        let q = (0..n).map(|_| rng.random_range(self.q.0..=self.q.1)).collect();
        let p = (0..n).map(|_| rng.random_range(self.p.0..=self.p.1)).collect();
        (q, p, rng.random_range(self.z.0..=self.z.1))
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

const ATTEMPTS_PER_POINT: usize = 50;

/// Draws `count` points of M with a well-posed multiplier problem: ambient
/// samples are Newton-projected onto M and rejected if projection fails or
/// `C` is rank deficient there.
pub fn points_on_m(sys: &ConstrainedSystem, count: usize, seed: u64, bx: &SampleBox) -> Result<Vec<PhasePoint>> {
    sample_m(sys, count, seed, bx, true)
}

/// Like [`points_on_m`] but keeps every point that projects, whether or not
/// the multipliers are determined there.
pub fn projected_points(sys: &ConstrainedSystem, count: usize, seed: u64, bx: &SampleBox) -> Result<Vec<PhasePoint>> {
    sample_m(sys, count, seed, bx, false)
}

fn sample_m(
    sys: &ConstrainedSystem,
    count: usize,
    seed: u64,
    bx: &SampleBox,
    solvable: bool,
) -> Result<Vec<PhasePoint>> {
    let mut rng = rng(seed);
    let n = sys.n();
    let mut out = Vec::with_capacity(count);
    let mut rejected = 0;
    for _ in 0..count * ATTEMPTS_PER_POINT {
        if out.len() == count {
            break;
        }
        let (q, p, z) = bx.draw(&mut rng, n);
        let y = PhasePoint::new(&q, &p, z);
        let accepted = sys.project_to_m(&y, 20, 1e-12).and_then(|x| {
            if solvable {
                if !sys.uniqueness_check(&x)?.unique {
                    return Ok(None);
                }
                sys.multipliers(&x)?;
            }
            Ok(Some(x))
        });
        match accepted {
            Ok(Some(x)) => out.push(x),
            _ => rejected += 1,
        }
    }
    debug!("sampled {} points on M, rejected {rejected}", out.len());
    if out.len() < count {
        return Err(Error::InvalidSystem(format!("only {} of {count} sample points could be placed on M", out.len())));
    }
    Ok(out)
}

/// Draws `count` points `(q, v, z)` with `v` projected onto `D`.
pub fn points_in_d(mech: &MechanicalSystem, count: usize, seed: u64, bx: &SampleBox) -> Result<Vec<LagrangianPoint>> {
    let mut rng = rng(seed);
    let n = mech.n();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count * ATTEMPTS_PER_POINT {
        if out.len() == count {
            break;
        }
        let (q, v, z) = bx.draw(&mut rng, n);
        let accepted = mech.project_velocity(&LagrangianPoint::new(&q, &v, z)).and_then(|x| {
            mech.check_in_d(&x)?;
            mech.herglotz_unchecked(&x)?;
            Ok(x)
        });
        if let Ok(x) = accepted {
            out.push(x);
        }
    }
    if out.len() < count {
        return Err(Error::InvalidSystem(format!("only {} of {count} sample points could be placed in D", out.len())));
    }
    Ok(out)
}

/// A random smooth observable: a constant, three quadratic monomials and a sine term.
pub fn random_observable(n: usize, rng: &mut impl Rng) -> ScalarField {
    let dim = 2 * n + 1;
    let mut var = || Expr::Var(Var::from_slot(rng.random_range(0..dim), n));
    let mut terms = Vec::new();
    for _ in 0..3 {
        terms.push((var(), var()));
    }
    let s = var();
    let mut coef = || Expr::Num(rng.random_range(-1.0..=1.0));
    let mut e = coef();
    for (a, b) in terms {
        e = e + coef() * a * b;
    }
    e = e + coef() * Expr::call(Func::Sin, s);
    ScalarField::new(n, e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constrained::ForceForm;

    fn particle() -> ConstrainedSystem {
        let f = ForceForm::parse(2, &["-q1", "1"], &[], "").unwrap();
        ConstrainedSystem::parse(2, "p1^2/2 + p2^2/2 + z", &["p2 - q1*p1"], vec![f]).unwrap()
    }

    #[test]
    fn samples_lie_on_m_and_are_reproducible() {
        let sys = particle();
        let a = points_on_m(&sys, 20, 7, &SampleBox::default()).unwrap();
        let b = points_on_m(&sys, 20, 7, &SampleBox::default()).unwrap();
        assert_eq!(a, b);
        for x in &a {
            assert!(sys.drift(x).unwrap() <= 1e-12);
        }
        let c = points_on_m(&sys, 20, 8, &SampleBox::default()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_observables_are_finite() {
        let mut r = rng(3);
        let x = PhasePoint::new(&[0.3, -0.2], &[0.1, 0.9], 0.4);
        for _ in 0..10 {
            let f = random_observable(2, &mut r);
            assert!(f.eval(&x).unwrap().is_finite());
        }
    }
}

//! Almost Jacobi brackets on the constraint manifold and their defect meters.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::calculus::{Observable, OneFormValue, PhasePoint, Product, VectorValue};
use crate::constrained::{Calligraphic, ConstrainedSystem, Projection, Roman};
use crate::error::{Error, Result};
use crate::expr::Var;

/// A bracket of observables along the constraint manifold.
pub trait NonholonomicBracket: Send + Sync {
    fn name(&self) -> &'static str;

    /// The bracket at `x` without checking that `x` lies on M.
    fn eval_extended(
        &self,
        sys: &ConstrainedSystem,
        f: &dyn Observable,
        g: &dyn Observable,
        x: &PhasePoint,
    ) -> Result<f64>;

    /// The vector field `R_{H,M}` of the underlying almost Jacobi structure.
    fn reeb(&self, sys: &ConstrainedSystem, x: &PhasePoint) -> Result<VectorValue>;

    fn eval(&self, sys: &ConstrainedSystem, f: &dyn Observable, g: &dyn Observable, x: &PhasePoint) -> Result<f64> {
        sys.check_on_m(x)?;
        self.eval_extended(sys, f, g, x)
    }
}

fn apply_transpose(p: &DMatrix<f64>, a: &OneFormValue) -> OneFormValue {
    OneFormValue::from_vector(a.n(), p.tr_mul(a.vector()))
}

fn reeb_image(p: &DMatrix<f64>, n: usize) -> VectorValue {
    VectorValue::from_vector(n, p.column(2 * n).into_owned())
}

/// `{f, g} = Lambda(P* df, P* dg) - f dg(P R) + g df(P R)` for a projector `P`.
#[derive(Clone)]
pub struct ProjectedBracket {
    name: &'static str,
    projection: Arc<dyn Projection>,
}

impl ProjectedBracket {
    pub fn new(name: &'static str, projection: Arc<dyn Projection>) -> Self {
        ProjectedBracket { name, projection }
    }

    pub fn projection(&self) -> &Arc<dyn Projection> {
        &self.projection
    }
}

impl NonholonomicBracket for ProjectedBracket {
    fn name(&self) -> &'static str {
        self.name
    }

    fn eval_extended(
        &self,
        sys: &ConstrainedSystem,
        f: &dyn Observable,
        g: &dyn Observable,
        x: &PhasePoint,
    ) -> Result<f64> {
        let p = self.projection.matrix(sys, x)?;
        let (fv, gv) = (f.value(x)?, g.value(x)?);
        let (df, dg) = (f.gradient(x)?, g.gradient(x)?);
        let r = reeb_image(&p, x.n());
        let a = apply_transpose(&p, &df);
        let b = apply_transpose(&p, &dg);
        Ok(sys.chart().lambda_at(x, &a, &b) - fv * dg.pair(&r) + gv * df.pair(&r))
    }

    fn reeb(&self, sys: &ConstrainedSystem, x: &PhasePoint) -> Result<VectorValue> {
        Ok(reeb_image(&self.projection.matrix(sys, x)?, x.n()))
    }
}

/// The unconstrained Jacobi bracket of `f o gamma` and `g o gamma`, where
/// `gamma` is the metric splitting projection of a mechanical system.
#[derive(Debug, Clone, Copy, Default)]
pub struct EdenBracket;

impl EdenBracket {
    fn composed(
        sys: &ConstrainedSystem,
        f: &dyn Observable,
        x: &PhasePoint,
    ) -> Result<(f64, OneFormValue, DMatrix<f64>)> {
        let mech = sys
            .mechanical_origin()
            .ok_or_else(|| Error::PreconditionFailed("system was not induced from a mechanical system".into()))?;
        let y = mech.gamma(x)?;
        let j = mech.gamma_jacobian(x)?;
        let df = f.gradient(&y)?;
        Ok((f.value(&y)?, apply_transpose(&j, &df), j))
    }
}

impl NonholonomicBracket for EdenBracket {
    fn name(&self) -> &'static str {
        "eden"
    }

    fn eval_extended(
        &self,
        sys: &ConstrainedSystem,
        f: &dyn Observable,
        g: &dyn Observable,
        x: &PhasePoint,
    ) -> Result<f64> {
        let (fv, df, _) = Self::composed(sys, f, x)?;
        let (gv, dg, _) = Self::composed(sys, g, x)?;
        Ok(sys.chart().lambda_at(x, &df, &dg) - fv * dg.az() + gv * df.az())
    }

    fn reeb(&self, sys: &ConstrainedSystem, x: &PhasePoint) -> Result<VectorValue> {
        let mech = sys
            .mechanical_origin()
            .ok_or_else(|| Error::PreconditionFailed("system was not induced from a mechanical system".into()))?;
        Ok(reeb_image(&mech.gamma_jacobian(x)?, x.n()))
    }
}

/// Named brackets, selectable at runtime.
#[derive(Clone)]
pub struct BracketRegistry {
    entries: BTreeMap<&'static str, Arc<dyn NonholonomicBracket>>,
}

impl BracketRegistry {
    pub fn empty() -> Self {
        BracketRegistry { entries: BTreeMap::new() }
    }

    pub fn register(&mut self, b: Arc<dyn NonholonomicBracket>) {
        self.entries.insert(b.name(), b);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn NonholonomicBracket>> {
        self.entries.get(name).cloned()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<dyn NonholonomicBracket>> {
        self.entries.values()
    }
}

impl Default for BracketRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(ProjectedBracket::new("nh", Arc::new(Calligraphic))));
        r.register(Arc::new(ProjectedBracket::new("p_nh", Arc::new(Roman))));
        r.register(Arc::new(EdenBracket));
        r
    }
}

pub fn nh_bracket(sys: &ConstrainedSystem, f: &dyn Observable, g: &dyn Observable, x: &PhasePoint) -> Result<f64> {
    ProjectedBracket::new("nh", Arc::new(Calligraphic)).eval(sys, f, g, x)
}

pub fn p_nh_bracket(sys: &ConstrainedSystem, f: &dyn Observable, g: &dyn Observable, x: &PhasePoint) -> Result<f64> {
    ProjectedBracket::new("p_nh", Arc::new(Roman)).eval(sys, f, g, x)
}

pub fn eden_bracket(sys: &ConstrainedSystem, f: &dyn Observable, g: &dyn Observable, x: &PhasePoint) -> Result<f64> {
    EdenBracket.eval(sys, f, g, x)
}

/// `|X_{H,M}(f) - ({H, f} - f R_{H,M}(H))|`.
pub fn evolution_check(
    sys: &ConstrainedSystem,
    bracket: &dyn NonholonomicBracket,
    f: &dyn Observable,
    x: &PhasePoint,
) -> Result<f64> {
    let h = sys.hamiltonian();
    let lhs = f.gradient(x)?.pair(&sys.constrained_vf_at(x)?);
    let br = bracket.eval(sys, h, f, x)?;
    let rh = h.gradient(x)?.pair(&bracket.reeb(sys, x)?);
    Ok((lhs - (br - f.value(x)? * rh)).abs())
}

/// The bracket of two observables, re-evaluated as an observable off M with
/// finite-difference gradients.
struct BracketObservable<'a> {
    sys: &'a ConstrainedSystem,
    bracket: &'a dyn NonholonomicBracket,
    a: &'a dyn Observable,
    b: &'a dyn Observable,
}

impl Observable for BracketObservable<'_> {
    fn n(&self) -> usize {
        self.sys.n()
    }

    fn value(&self, x: &PhasePoint) -> Result<f64> {
        self.bracket.eval_extended(self.sys, self.a, self.b, x)
    }

    fn gradient(&self, x: &PhasePoint) -> Result<OneFormValue> {
        let h = 1e-5 * (1.0 + x.norm_inf());
        let n = x.n();
        let mut out = Vec::with_capacity(x.dim());
        for v in Var::all(n) {
            let e = VectorValue::unit(n, v);
            let up = self.value(&x.shifted(&e, h))?;
            let down = self.value(&x.shifted(&e, -h))?;
            out.push((up - down) / (2.0 * h));
        }
        OneFormValue::from_slice(n, &out)
    }
}

/// `{f, {g, h}} + {g, {h, f}} + {h, {f, g}}` at a point of M.
pub fn jacobiator(
    sys: &ConstrainedSystem,
    bracket: &dyn NonholonomicBracket,
    f: &dyn Observable,
    g: &dyn Observable,
    h: &dyn Observable,
    x: &PhasePoint,
) -> Result<f64> {
    sys.check_on_m(x)?;
    let gh = BracketObservable { sys, bracket, a: g, b: h };
    let hf = BracketObservable { sys, bracket, a: h, b: f };
    let fg = BracketObservable { sys, bracket, a: f, b: g };
    Ok(bracket.eval_extended(sys, f, &gh, x)?
        + bracket.eval_extended(sys, g, &hf, x)?
        + bracket.eval_extended(sys, h, &fg, x)?)
}

/// `{f, gh} - g{f, h} - h{f, g} - gh E(f)` with `E = -R_{H,M}`.
pub fn leibniz_defect(
    sys: &ConstrainedSystem,
    bracket: &dyn NonholonomicBracket,
    f: &dyn Observable,
    g: &dyn Observable,
    h: &dyn Observable,
    x: &PhasePoint,
) -> Result<f64> {
    sys.check_on_m(x)?;
    let gh = Product { a: g, b: h };
    let (gv, hv) = (g.value(x)?, h.value(x)?);
    let e_f = -f.gradient(x)?.pair(&bracket.reeb(sys, x)?);
    Ok(bracket.eval_extended(sys, f, &gh, x)?
        - gv * bracket.eval_extended(sys, f, h, x)?
        - hv * bracket.eval_extended(sys, f, g, x)?
        - gv * hv * e_f)
}

//! Points, covectors and vectors in the Darboux frame, scalar and vector
//! fields, and the pointwise operators built from them.

use std::fmt;
use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::{self, Expr, Var};

macro_rules! packed_type {
    ($(#[$m:meta])* $name:ident, $q:ident, $p:ident, $z:ident) => {
        $(#[$m])*
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name {
            n: usize,
            c: DVector<f64>,
        }

        impl $name {
            pub fn new($q: &[f64], $p: &[f64], $z: f64) -> Self {
                assert_eq!($q.len(), $p.len(), "q and p blocks differ in length");
                let n = $q.len();
                let mut c = DVector::zeros(2 * n + 1);
                c.rows_mut(0, n).copy_from_slice($q);
                c.rows_mut(n, n).copy_from_slice($p);
                c[2 * n] = $z;
                $name { n, c }
            }

            pub fn zeros(n: usize) -> Self {
                $name { n, c: DVector::zeros(2 * n + 1) }
            }

            pub fn from_slice(n: usize, v: &[f64]) -> Result<Self> {
                if v.len() != 2 * n + 1 {
                    return Err(Error::DimensionMismatch { expected: 2 * n + 1, got: v.len() });
                }
                Ok($name { n, c: DVector::from_column_slice(v) })
            }

            pub fn from_vector(n: usize, c: DVector<f64>) -> Self {
                assert_eq!(c.len(), 2 * n + 1);
                $name { n, c }
            }

            /// Unit element along a single frame slot.
            pub fn unit(n: usize, v: Var) -> Self {
                let mut out = Self::zeros(n);
                out.c[v.slot(n)] = 1.0;
                out
            }

            pub fn n(&self) -> usize {
                self.n
            }

            pub fn dim(&self) -> usize {
                2 * self.n + 1
            }

            pub fn $q(&self) -> &[f64] {
                &self.c.as_slice()[..self.n]
            }

            pub fn $p(&self) -> &[f64] {
                &self.c.as_slice()[self.n..2 * self.n]
            }

            pub fn $z(&self) -> f64 {
                self.c[2 * self.n]
            }

            pub fn as_slice(&self) -> &[f64] {
                self.c.as_slice()
            }

            pub fn vector(&self) -> &DVector<f64> {
                &self.c
            }

            pub fn into_vector(self) -> DVector<f64> {
                self.c
            }

            pub fn get(&self, v: Var) -> f64 {
                self.c[v.slot(self.n)]
            }

            pub fn norm_inf(&self) -> f64 {
                self.c.amax()
            }

            pub fn is_finite(&self) -> bool {
                self.c.iter().all(|x| x.is_finite())
            }

            pub fn scaled(&self, s: f64) -> Self {
                $name { n: self.n, c: &self.c * s }
            }

            pub fn plus(&self, other: &Self) -> Self {
                $name { n: self.n, c: &self.c + &other.c }
            }

            pub fn minus(&self, other: &Self) -> Self {
                $name { n: self.n, c: &self.c - &other.c }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                let join = |s: &[f64]| s.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",");
                write!(f, "({}; {}; {})", join(self.$q()), join(self.$p()), self.$z())
            }
        }
    };
}

packed_type!(
    /// A point `(q, p, z)` of a Darboux chart.
    PhasePoint, q, p, z
);
packed_type!(
    /// Covector components in the frame `(dq, dp, dz)`.
    OneFormValue, aq, ap, az
);
packed_type!(
    /// Vector components in the frame `(d/dq, d/dp, d/dz)`.
    VectorValue, vq, vp, vz
);

packed_type!(
    /// A point `(q, v, z)` of `TQ x R` in natural coordinates.
    LagrangianPoint, q, v, z
);

impl PhasePoint {
    /// Like [`PhasePoint::from_slice`] but also rejects non-finite coordinates.
    pub fn checked(n: usize, v: &[f64]) -> Result<Self> {
        let x = Self::from_slice(n, v)?;
        if !x.is_finite() {
            return Err(Error::InvalidSystem("non-finite coordinate".into()));
        }
        Ok(x)
    }

    /// The point displaced by `t * v`.
    pub fn shifted(&self, v: &VectorValue, t: f64) -> PhasePoint {
        PhasePoint { n: self.n, c: &self.c + v.vector() * t }
    }
}

impl OneFormValue {
    /// The pairing `a(v)`.
    pub fn pair(&self, v: &VectorValue) -> f64 {
        self.c.dot(v.vector())
    }
}

/// A real function on the chart with a gradient.
pub trait Observable: Send + Sync {
    fn n(&self) -> usize;

    fn value(&self, x: &PhasePoint) -> Result<f64>;

    /// Gradient at `x`. The default is a central finite difference.
    fn gradient(&self, x: &PhasePoint) -> Result<OneFormValue> {
        fd_gradient(self, x)
    }
}

/// Finite-difference step used by every numeric derivative fallback.
pub fn fd_step(x: &PhasePoint) -> f64 {
    1e-5 * x.norm_inf().max(1.0)
}

pub fn fd_gradient<O: Observable + ?Sized>(f: &O, x: &PhasePoint) -> Result<OneFormValue> {
    let h = fd_step(x);
    let dim = x.dim();
    let mut g = DVector::zeros(dim);
    for j in 0..dim {
        let mut a = x.clone();
        let mut b = x.clone();
        a.c[j] += h;
        b.c[j] -= h;
        g[j] = (f.value(&a)? - f.value(&b)?) / (2.0 * h);
    }
    Ok(OneFormValue::from_vector(x.n(), g))
}

/// A scalar field backed by an expression, with symbolic first derivatives.
#[derive(Clone)]
pub struct ScalarField {
    n: usize,
    expr: Arc<Expr>,
    grad: Arc<OnceLock<Vec<Expr>>>,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({})", self.expr)
    }
}

impl ScalarField {
    pub fn new(n: usize, expr: Expr) -> Self {
        ScalarField { n, expr: Arc::new(expr), grad: Arc::new(OnceLock::new()) }
    }

    pub fn parse(text: &str, n: usize) -> Result<Self> {
        Ok(Self::new(n, expr::parse(text, n)?))
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self::new(n, Expr::num(c))
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// Symbolic partials in frame order `(q, p, z)`.
    pub fn partials(&self) -> &[Expr] {
        self.grad.get_or_init(|| Var::all(self.n).map(|v| self.expr.diff(v)).collect())
    }

    pub fn partial(&self, v: Var) -> &Expr {
        &self.partials()[v.slot(self.n)]
    }

    pub fn eval(&self, x: &PhasePoint) -> Result<f64> {
        check_dim(self.n, x.n())?;
        self.expr.eval_at(self.n, x.as_slice())
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected: 2 * expected + 1, got: 2 * got + 1 });
    }
    Ok(())
}

impl Observable for ScalarField {
    fn n(&self) -> usize {
        self.n
    }

    fn value(&self, x: &PhasePoint) -> Result<f64> {
        self.eval(x)
    }

    fn gradient(&self, x: &PhasePoint) -> Result<OneFormValue> {
        check_dim(self.n, x.n())?;
        let vals = self.partials().iter().map(|e| e.eval_at(self.n, x.as_slice())).collect::<Result<Vec<_>>>()?;
        OneFormValue::from_slice(self.n, &vals)
    }
}

/// An observable given by a closure; its gradient is a finite difference.
pub struct FnObservable<F> {
    n: usize,
    f: F,
}

impl<F> FnObservable<F>
where
    F: Fn(&PhasePoint) -> Result<f64> + Send + Sync,
{
    pub fn new(n: usize, f: F) -> Self {
        FnObservable { n, f }
    }
}

impl<F> Observable for FnObservable<F>
where
    F: Fn(&PhasePoint) -> Result<f64> + Send + Sync,
{
    fn n(&self) -> usize {
        self.n
    }

    fn value(&self, x: &PhasePoint) -> Result<f64> {
        (self.f)(x)
    }
}

/// Pointwise product of two observables, differentiated by the product rule.
pub struct Product<'a> {
    pub a: &'a dyn Observable,
    pub b: &'a dyn Observable,
}

impl Observable for Product<'_> {
    fn n(&self) -> usize {
        self.a.n()
    }

    fn value(&self, x: &PhasePoint) -> Result<f64> {
        Ok(self.a.value(x)? * self.b.value(x)?)
    }

    fn gradient(&self, x: &PhasePoint) -> Result<OneFormValue> {
        let (fa, fb) = (self.a.value(x)?, self.b.value(x)?);
        let (ga, gb) = (self.a.gradient(x)?, self.b.gradient(x)?);
        Ok(ga.scaled(fb).plus(&gb.scaled(fa)))
    }
}

/// A vector field on the chart with a Jacobian.
pub trait VectorField: Send + Sync {
    fn n(&self) -> usize;

    fn eval(&self, x: &PhasePoint) -> Result<VectorValue>;

    /// `J[i][j] = dX^i/dx^j`. The default is a central finite difference.
    fn jacobian(&self, x: &PhasePoint) -> Result<DMatrix<f64>> {
        fd_jacobian(self, x)
    }
}

pub fn fd_jacobian<X: VectorField + ?Sized>(field: &X, x: &PhasePoint) -> Result<DMatrix<f64>> {
    let h = fd_step(x);
    let dim = x.dim();
    let mut j = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let mut a = x.clone();
        let mut b = x.clone();
        a.c[col] += h;
        b.c[col] -= h;
        let d = (field.eval(&a)?.into_vector() - field.eval(&b)?.into_vector()) / (2.0 * h);
        j.set_column(col, &d);
    }
    Ok(j)
}

/// A vector field whose components are expressions.
#[derive(Clone)]
pub struct SymbolicField {
    n: usize,
    components: Arc<Vec<Expr>>,
    jac: Arc<OnceLock<Vec<Expr>>>,
}

impl SymbolicField {
    pub fn new(n: usize, components: Vec<Expr>) -> Result<Self> {
        if components.len() != 2 * n + 1 {
            return Err(Error::DimensionMismatch { expected: 2 * n + 1, got: components.len() });
        }
        Ok(SymbolicField { n, components: Arc::new(components), jac: Arc::new(OnceLock::new()) })
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    fn jacobian_exprs(&self) -> &[Expr] {
        self.jac.get_or_init(|| {
            let mut out = Vec::with_capacity(self.components.len().pow(2));
            for c in self.components.iter() {
                for v in Var::all(self.n) {
                    out.push(c.diff(v));
                }
            }
            out
        })
    }
}

impl VectorField for SymbolicField {
    fn n(&self) -> usize {
        self.n
    }

    fn eval(&self, x: &PhasePoint) -> Result<VectorValue> {
        check_dim(self.n, x.n())?;
        let vals = self.components.iter().map(|e| e.eval_at(self.n, x.as_slice())).collect::<Result<Vec<_>>>()?;
        VectorValue::from_slice(self.n, &vals)
    }

    fn jacobian(&self, x: &PhasePoint) -> Result<DMatrix<f64>> {
        check_dim(self.n, x.n())?;
        let dim = 2 * self.n + 1;
        let vals = self.jacobian_exprs().iter().map(|e| e.eval_at(self.n, x.as_slice())).collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_row_slice(dim, dim, &vals))
    }
}

/// A vector field given by a closure; its Jacobian is a finite difference.
pub struct FnField<F> {
    n: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&PhasePoint) -> Result<VectorValue> + Send + Sync,
{
    pub fn new(n: usize, f: F) -> Self {
        FnField { n, f }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&PhasePoint) -> Result<VectorValue> + Send + Sync,
{
    fn n(&self) -> usize {
        self.n
    }

    fn eval(&self, x: &PhasePoint) -> Result<VectorValue> {
        (self.f)(x)
    }
}

/// A field with constant components.
pub struct ConstantField(pub VectorValue);

impl VectorField for ConstantField {
    fn n(&self) -> usize {
        self.0.n()
    }

    fn eval(&self, _x: &PhasePoint) -> Result<VectorValue> {
        Ok(self.0.clone())
    }

    fn jacobian(&self, x: &PhasePoint) -> Result<DMatrix<f64>> {
        Ok(DMatrix::zeros(x.dim(), x.dim()))
    }
}

pub fn gradient(f: &dyn Observable, x: &PhasePoint) -> Result<OneFormValue> {
    f.gradient(x)
}

/// `X(f)` at `x`.
pub fn lie_scalar(field: &dyn VectorField, f: &dyn Observable, x: &PhasePoint) -> Result<f64> {
    Ok(f.gradient(x)?.pair(&field.eval(x)?))
}

/// `L_X eta = i_X d(eta) + d(eta(X))` at `x`.
pub fn lie_eta(field: &dyn VectorField, x: &PhasePoint) -> Result<OneFormValue> {
    let n = x.n();
    let xv = field.eval(x)?;
    let j = field.jacobian(x)?;
    // eta components: -p on q rows, 0 on p rows, 1 on z
    let mut eta = DVector::zeros(2 * n + 1);
    for i in 0..n {
        eta[i] = -x.p()[i];
    }
    eta[2 * n] = 1.0;
    let mut out = j.tr_mul(&eta);
    for k in 0..n {
        out[k] -= xv.vp()[k];
    }
    Ok(OneFormValue::from_vector(n, out))
}

pub fn divergence(field: &dyn VectorField, x: &PhasePoint) -> Result<f64> {
    Ok(field.jacobian(x)?.trace())
}

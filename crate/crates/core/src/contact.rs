//! Canonical contact structure `eta = dz - p dq` on a Darboux chart.

use nalgebra::DMatrix;

use crate::calculus::{Observable, OneFormValue, PhasePoint, ScalarField, SymbolicField, VectorValue};
use crate::error::{Error, Result};
use crate::expr::{Expr, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DarbouxChart {
    n: usize,
}

impl DarbouxChart {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSystem("chart half-dimension must be at least 1".into()));
        }
        Ok(DarbouxChart { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    fn check(&self, k: usize) {
        assert_eq!(k, self.n, "dimension mismatch with chart");
    }

    pub fn eta(&self, x: &PhasePoint) -> OneFormValue {
        self.check(x.n());
        let neg_p: Vec<f64> = x.p().iter().map(|v| -v).collect();
        OneFormValue::new(&neg_p, &vec![0.0; self.n], 1.0)
    }

    pub fn eta_at(&self, x: &PhasePoint, v: &VectorValue) -> f64 {
        self.check(x.n());
        let pv: f64 = x.p().iter().zip(v.vq()).map(|(a, b)| a * b).sum();
        v.vz() - pv
    }

    pub fn deta_at(&self, _x: &PhasePoint, v: &VectorValue, w: &VectorValue) -> f64 {
        (0..self.n).map(|i| v.vq()[i] * w.vp()[i] - v.vp()[i] * w.vq()[i]).sum()
    }

    /// `i_v d(eta) + eta(v) eta`.
    pub fn flat_at(&self, x: &PhasePoint, v: &VectorValue) -> OneFormValue {
        let e = self.eta_at(x, v);
        let aq: Vec<f64> = (0..self.n).map(|i| -v.vp()[i] - e * x.p()[i]).collect();
        OneFormValue::new(&aq, v.vq(), e)
    }

    pub fn sharp_at(&self, x: &PhasePoint, a: &OneFormValue) -> VectorValue {
        self.check(x.n());
        let p = x.p();
        let az = a.az();
        let vp: Vec<f64> = (0..self.n).map(|i| -a.aq()[i] - az * p[i]).collect();
        let vz = az + p.iter().zip(a.ap()).map(|(x, y)| x * y).sum::<f64>();
        VectorValue::new(a.ap(), &vp, vz)
    }

    /// Matrix of `flat` at `x`: `flat(v) = F v`.
    pub fn flat_matrix(&self, x: &PhasePoint) -> DMatrix<f64> {
        self.columns(|v| self.flat_at(x, &VectorValue::from_slice(self.n, v).unwrap()).into_vector())
    }

    /// Matrix of `sharp` at `x`: `sharp(a) = S a`.
    pub fn sharp_matrix(&self, x: &PhasePoint) -> DMatrix<f64> {
        self.columns(|a| self.sharp_at(x, &OneFormValue::from_slice(self.n, a).unwrap()).into_vector())
    }

    fn columns(&self, f: impl Fn(&[f64]) -> nalgebra::DVector<f64>) -> DMatrix<f64> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        let mut e = vec![0.0; dim];
        for j in 0..dim {
            e[j] = 1.0;
            m.set_column(j, &f(&e));
            e[j] = 0.0;
        }
        m
    }

    pub fn reeb(&self) -> VectorValue {
        VectorValue::unit(self.n, Var::Z)
    }

    /// `Lambda(a, b) = -d(eta)(sharp a, sharp b)`.
    pub fn lambda_at(&self, x: &PhasePoint, a: &OneFormValue, b: &OneFormValue) -> f64 {
        -self.deta_at(x, &self.sharp_at(x, a), &self.sharp_at(x, b))
    }

    pub fn sharp_lambda_at(&self, x: &PhasePoint, a: &OneFormValue) -> VectorValue {
        let s = self.sharp_at(x, a);
        s.minus(&self.reeb().scaled(a.az()))
    }

    /// `X_H` evaluated pointwise from a gradient and value of `H`.
    pub fn hamiltonian_vector(&self, x: &PhasePoint, h: f64, dh: &OneFormValue) -> VectorValue {
        let p = x.p();
        let hz = dh.az();
        let vp: Vec<f64> = (0..self.n).map(|i| -(dh.aq()[i] + p[i] * hz)).collect();
        let vz = p.iter().zip(dh.ap()).map(|(a, b)| a * b).sum::<f64>() - h;
        VectorValue::new(dh.ap(), &vp, vz)
    }

    /// The contact Hamiltonian vector field of `h`, with symbolic components.
    pub fn hamiltonian_vf(&self, h: &ScalarField) -> SymbolicField {
        let n = self.n;
        let d = |v: Var| h.partial(v).clone();
        let mut comps = Vec::with_capacity(2 * n + 1);
        for i in 0..n {
            comps.push(d(Var::P(i)));
        }
        for i in 0..n {
            let pi_hz = Expr::var(Var::P(i)) * d(Var::Z);
            comps.push(-(d(Var::Q(i)) + pi_hz));
        }
        let mut z = Expr::zero();
        for i in 0..n {
            z = z + Expr::var(Var::P(i)) * d(Var::P(i));
        }
        comps.push(z - h.expr().clone());
        SymbolicField::new(n, comps).expect("component count matches chart")
    }

    /// `{f, g} = Lambda(df, dg) + f E(g) - g E(f)` with `E = -R`.
    pub fn jacobi_bracket(&self, f: &dyn Observable, g: &dyn Observable, x: &PhasePoint) -> Result<f64> {
        let (fv, gv) = (f.value(x)?, g.value(x)?);
        let (df, dg) = (f.gradient(x)?, g.gradient(x)?);
        Ok(self.lambda_at(x, &df, &dg) - fv * dg.az() + gv * df.az())
    }
}

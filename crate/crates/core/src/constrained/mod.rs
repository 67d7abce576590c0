//! Constrained contact Hamiltonian systems: multiplier matrix, existence and
//! uniqueness tests, projectors and the constrained vector field.

mod checks;
mod projection;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::calculus::{Observable, OneFormValue, PhasePoint, ScalarField, SymbolicField, VectorField, VectorValue};
use crate::contact::DarbouxChart;
use crate::error::{Error, Result};
use crate::expr::{self, Expr, Var};
use crate::lagrangian::MechanicalSystem;
use crate::linalg;

pub use checks::{ExistenceReport, IdentityReport, LieCharacterizationReport, StructuralReport, UniquenessReport};
pub use projection::{Calligraphic, Projection, ProjectionRegistry, Roman};

/// Tolerance for accepting a point as lying on the constraint manifold.
pub fn tol_on_m(x: &PhasePoint) -> f64 {
    1e-8 * (1.0 + x.norm_inf())
}

/// One-form `Psi = Phi_i dq^i + Psi^i dp_i + mu dz` spanning part of ann F.
#[derive(Debug, Clone)]
pub struct ForceForm {
    pub dq: Vec<Expr>,
    pub dp: Vec<Expr>,
    pub dz: Expr,
}

impl ForceForm {
    pub fn new(dq: Vec<Expr>, dp: Vec<Expr>, dz: Expr) -> Result<Self> {
        if dq.len() != dp.len() {
            return Err(Error::DimensionMismatch { expected: dq.len(), got: dp.len() });
        }
        Ok(ForceForm { dq, dp, dz })
    }

    /// Parses the component strings. Empty `dp` means all zero.
    pub fn parse(n: usize, dq: &[&str], dp: &[&str], dz: &str) -> Result<Self> {
        let comps = |s: &[&str]| -> Result<Vec<Expr>> {
            if s.is_empty() {
                return Ok(vec![Expr::zero(); n]);
            }
            if s.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: s.len() });
            }
            s.iter().map(|t| expr::parse(t, n)).collect()
        };
        let dz = if dz.trim().is_empty() { Expr::zero() } else { expr::parse(dz, n)? };
        ForceForm::new(comps(dq)?, comps(dp)?, dz)
    }

    pub fn n(&self) -> usize {
        self.dq.len()
    }

    pub fn eval(&self, x: &PhasePoint) -> Result<OneFormValue> {
        let n = self.n();
        let s = x.as_slice();
        let mut out = Vec::with_capacity(2 * n + 1);
        for e in self.dq.iter().chain(self.dp.iter()) {
            out.push(e.eval_at(n, s)?);
        }
        out.push(self.dz.eval_at(n, s)?);
        OneFormValue::from_slice(n, &out)
    }
}

#[derive(Clone)]
pub struct ConstrainedSystem {
    chart: DarbouxChart,
    h: ScalarField,
    xh: SymbolicField,
    constraints: Vec<ScalarField>,
    forces: Vec<ForceForm>,
    mechanical: Option<Arc<MechanicalSystem>>,
}

impl std::fmt::Debug for ConstrainedSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstrainedSystem")
            .field("n", &self.chart.n())
            .field("h", &self.h)
            .field("constraints", &self.constraints)
            .field("forces", &self.forces.len())
            .finish()
    }
}

/// Everything evaluated once at a point and reused by the solves.
#[derive(Debug, Clone)]
pub struct PointData {
    pub x: PhasePoint,
    pub h: f64,
    pub dh: OneFormValue,
    pub xh: VectorValue,
    pub phi: DVector<f64>,
    /// Rows are `d phi^a`.
    pub dphi: DMatrix<f64>,
    /// Rows are `Psi^a`.
    pub psi: DMatrix<f64>,
    /// Columns are `X_a = sharp(Psi^a)`.
    pub xa: DMatrix<f64>,
    /// `C[a][b] = X_b(phi^a)`.
    pub c: DMatrix<f64>,
}

impl PointData {
    pub fn n(&self) -> usize {
        self.x.n()
    }

    pub fn m(&self) -> usize {
        self.dphi.nrows()
    }

    pub fn k(&self) -> usize {
        self.psi.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    /// `1 + |H(x)| + |x|_inf`.
    pub fn scale(&self) -> f64 {
        1.0 + self.h.abs() + self.x.norm_inf()
    }

    pub fn reeb_h(&self) -> f64 {
        self.dh.az()
    }

    pub fn force_fields(&self) -> Vec<VectorValue> {
        (0..self.k()).map(|a| VectorValue::from_vector(self.n(), self.xa.column(a).into_owned())).collect()
    }

    /// Coefficients `lambda` with `C lambda = Y(phi)`.
    pub fn multipliers_for(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let rhs = &self.dphi * y;
        solve_c(&self.c, &rhs)
    }

    /// `Q(Y) = lambda_a X_a` with `C lambda = Y(phi)`.
    pub fn q_apply(&self, y: &VectorValue) -> Result<VectorValue> {
        let lam = self.multipliers_for(y.vector())?;
        Ok(VectorValue::from_vector(self.n(), &self.xa * lam))
    }

    pub fn p_apply(&self, y: &VectorValue) -> Result<VectorValue> {
        Ok(y.minus(&self.q_apply(y)?))
    }

    /// Matrix of the calligraphic projector `P = I - X C^+ D(phi)`.
    pub fn p_matrix(&self) -> Result<DMatrix<f64>> {
        let dim = self.dim();
        let (m, k) = (self.m(), self.k());
        let r = linalg::rank(&self.c);
        if r < k {
            return Err(Error::SingularC { rank: r, rows: m, cols: k });
        }
        if k == 0 {
            return Ok(DMatrix::identity(dim, dim));
        }
        let left_inv = if k == m {
            linalg::inverse(&self.c).ok_or(Error::SingularC { rank: r, rows: m, cols: k })?
        } else {
            let ctc = self.c.tr_mul(&self.c);
            linalg::inverse(&ctc).ok_or(Error::SingularC { rank: r, rows: m, cols: k })? * self.c.transpose()
        };
        Ok(DMatrix::identity(dim, dim) - &self.xa * left_inv * &self.dphi)
    }

    /// Basis (columns) of F = ker Psi.
    pub fn f_basis(&self) -> DMatrix<f64> {
        linalg::null_space(&self.psi)
    }

    /// `flat(X) - dH + (H + R(H)) eta` for a vector `X` at this point.
    pub fn force_defect(&self, chart: &DarbouxChart, v: &VectorValue) -> OneFormValue {
        let flat = chart.flat_at(&self.x, v);
        let eta = chart.eta(&self.x);
        flat.minus(&self.dh).plus(&eta.scaled(self.h + self.reeb_h()))
    }
}

/// Solves `C lambda = rhs` for the multiplier coefficients.
///
/// `k = m` uses a direct solve. `k < m` uses least squares and rejects
/// right-hand sides outside the range of `C`.
pub(crate) fn solve_c(c: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let (m, k) = (c.nrows(), c.ncols());
    let r = linalg::rank(c);
    if r < k || k > m {
        return Err(Error::SingularC { rank: r, rows: m, cols: k });
    }
    if k == 0 {
        let resid = linalg::max_abs(rhs.as_slice());
        if resid > 1e-8 {
            return Err(Error::NotInSplit { residual: resid });
        }
        return Ok(DVector::zeros(0));
    }
    if k == m {
        return linalg::solve_square(c, rhs).ok_or(Error::SingularC { rank: r, rows: m, cols: k });
    }
    let lam = linalg::lstsq(c, rhs).ok_or(Error::SingularC { rank: r, rows: m, cols: k })?;
    let resid = linalg::max_abs((c * &lam - rhs).as_slice());
    if resid > 1e-8 * linalg::max_abs(rhs.as_slice()).max(1.0) {
        return Err(Error::NotInSplit { residual: resid });
    }
    Ok(lam)
}

/// Result of the multiplier solve at a point.
#[derive(Debug, Clone)]
pub struct MultiplierSolve {
    pub c: DMatrix<f64>,
    pub lambdas: DVector<f64>,
    pub rank: usize,
    pub force_fields: Vec<VectorValue>,
}

impl ConstrainedSystem {
    pub fn new(n: usize, h: ScalarField, constraints: Vec<ScalarField>, forces: Vec<ForceForm>) -> Result<Self> {
        let chart = DarbouxChart::new(n)?;
        if h.n() != n || constraints.iter().any(|c| c.n() != n) || forces.iter().any(|f| f.n() != n) {
            return Err(Error::InvalidSystem("all fields must live on the same chart".into()));
        }
        let (m, k) = (constraints.len(), forces.len());
        if m > 2 * n {
            return Err(Error::InvalidSystem(format!("{m} constraints exceed 2n = {}", 2 * n)));
        }
        if k > 2 * n + 1 {
            return Err(Error::InvalidSystem(format!("{k} force forms exceed 2n+1 = {}", 2 * n + 1)));
        }
        let xh = chart.hamiltonian_vf(&h);
        Ok(ConstrainedSystem { chart, h, xh, constraints, forces, mechanical: None })
    }

    /// Builds a system from expression strings.
    pub fn parse(n: usize, h: &str, constraints: &[&str], forces: Vec<ForceForm>) -> Result<Self> {
        let h = ScalarField::parse(h, n)?;
        let cs = constraints.iter().map(|c| ScalarField::parse(c, n)).collect::<Result<Vec<_>>>()?;
        Self::new(n, h, cs, forces)
    }

    /// Records the mechanical system this one was induced from.
    pub fn with_mechanical_origin(mut self, mech: Arc<MechanicalSystem>) -> Self {
        self.mechanical = Some(mech);
        self
    }

    pub fn mechanical_origin(&self) -> Option<&Arc<MechanicalSystem>> {
        self.mechanical.as_ref()
    }

    pub fn chart(&self) -> &DarbouxChart {
        &self.chart
    }

    pub fn n(&self) -> usize {
        self.chart.n()
    }

    pub fn hamiltonian(&self) -> &ScalarField {
        &self.h
    }

    pub fn hamiltonian_field(&self) -> &SymbolicField {
        &self.xh
    }

    pub fn constraints(&self) -> &[ScalarField] {
        &self.constraints
    }

    pub fn forces(&self) -> &[ForceForm] {
        &self.forces
    }

    /// A copy with an extra force form appended.
    pub fn with_extra_force(&self, f: ForceForm) -> Result<Self> {
        let mut forces = self.forces.clone();
        forces.push(f);
        let mut out = Self::new(self.n(), self.h.clone(), self.constraints.clone(), forces)?;
        out.mechanical = self.mechanical.clone();
        Ok(out)
    }

    /// A copy with force form `index` replaced.
    pub fn with_force_replaced(&self, index: usize, f: ForceForm) -> Result<Self> {
        let mut forces = self.forces.clone();
        forces[index] = f;
        Self::new(self.n(), self.h.clone(), self.constraints.clone(), forces)
    }

    pub fn is_unconstrained(&self) -> bool {
        self.constraints.is_empty() && self.forces.is_empty()
    }

    pub fn constraint_values(&self, x: &PhasePoint) -> Result<DVector<f64>> {
        let vals = self.constraints.iter().map(|c| c.eval(x)).collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(vals))
    }

    /// `max_a |phi^a(x)|`.
    pub fn drift(&self, x: &PhasePoint) -> Result<f64> {
        Ok(linalg::max_abs(self.constraint_values(x)?.as_slice()))
    }

    pub fn check_on_m(&self, x: &PhasePoint) -> Result<()> {
        if x.n() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.chart.dim(), got: x.dim() });
        }
        let residual = self.drift(x)?;
        let tolerance = tol_on_m(x);
        if residual > tolerance {
            return Err(Error::OffConstraint { residual, tolerance });
        }
        Ok(())
    }

    pub fn scale(&self, x: &PhasePoint) -> Result<f64> {
        Ok(1.0 + self.h.eval(x)?.abs() + x.norm_inf())
    }

    /// Evaluates all per-point data without checking membership in M.
    pub fn point_data_unchecked(&self, x: &PhasePoint) -> Result<PointData> {
        if x.n() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.chart.dim(), got: x.dim() });
        }
        let dim = x.dim();
        let (m, k) = (self.constraints.len(), self.forces.len());
        let h = self.h.eval(x)?;
        let dh = self.h.gradient(x)?;
        let xh = self.chart.hamiltonian_vector(x, h, &dh);
        let mut phi = DVector::zeros(m);
        let mut dphi = DMatrix::zeros(m, dim);
        for (a, c) in self.constraints.iter().enumerate() {
            phi[a] = c.eval(x)?;
            dphi.row_mut(a).copy_from_slice(c.gradient(x)?.as_slice());
        }
        let mut psi = DMatrix::zeros(k, dim);
        for (a, f) in self.forces.iter().enumerate() {
            psi.row_mut(a).copy_from_slice(f.eval(x)?.as_slice());
        }
        let xa = self.chart.sharp_matrix(x) * psi.transpose();
        let c = &dphi * &xa;
        Ok(PointData { x: x.clone(), h, dh, xh, phi, dphi, psi, xa, c })
    }

    /// Per-point data at a point of M.
    pub fn point_data(&self, x: &PhasePoint) -> Result<PointData> {
        self.check_on_m(x)?;
        self.point_data_unchecked(x)
    }

    pub fn force_vector_fields(&self, x: &PhasePoint) -> Result<Vec<VectorValue>> {
        Ok(self.point_data_unchecked(x)?.force_fields())
    }

    pub fn c_matrix(&self, x: &PhasePoint) -> Result<DMatrix<f64>> {
        Ok(self.point_data(x)?.c)
    }

    pub fn multipliers(&self, x: &PhasePoint) -> Result<MultiplierSolve> {
        let d = self.point_data(x)?;
        let lambdas = d.multipliers_for(d.xh.vector())?;
        Ok(MultiplierSolve { rank: linalg::rank(&d.c), force_fields: d.force_fields(), lambdas, c: d.c })
    }

    /// `X_{H,M}(x) = X_H - lambda_a X_a`, at a point of M.
    pub fn constrained_vf_at(&self, x: &PhasePoint) -> Result<VectorValue> {
        self.check_on_m(x)?;
        constrained_vector(&self.point_data_unchecked(x)?)
    }

    /// The constrained field extended off M by the same formula.
    pub fn constrained_field(&self) -> ConstrainedField {
        ConstrainedField { sys: self.clone() }
    }

    /// The reaction part `Q(X_H)` extended off M.
    pub fn reaction_field(&self) -> ReactionField {
        ReactionField { sys: self.clone() }
    }

    pub fn projector_q(&self, x: &PhasePoint, y: &VectorValue) -> Result<VectorValue> {
        self.point_data(x)?.q_apply(y)
    }

    pub fn projector_p(&self, x: &PhasePoint, y: &VectorValue) -> Result<VectorValue> {
        self.point_data(x)?.p_apply(y)
    }

    pub fn roman_p_projector(&self, x: &PhasePoint, y: &VectorValue) -> Result<VectorValue> {
        let pm = Roman.matrix(self, x)?;
        Ok(VectorValue::from_vector(self.n(), pm * y.vector()))
    }

    /// Newton projection of `x` onto `{phi = 0}` along the force directions at `x`.
    pub fn project_to_m(&self, x: &PhasePoint, max_iter: usize, tol: f64) -> Result<PhasePoint> {
        let m = self.constraints.len();
        if m == 0 {
            return Ok(x.clone());
        }
        let base = self.point_data_unchecked(x)?;
        let xa = &base.xa;
        let mut coef = DVector::zeros(base.k());
        let mut y = x.clone();
        let mut resid = linalg::max_abs(base.phi.as_slice());
        for _ in 0..max_iter {
            if resid <= tol {
                return Ok(y);
            }
            let phi = self.constraint_values(&y)?;
            let mut dphi = DMatrix::zeros(m, y.dim());
            for (a, c) in self.constraints.iter().enumerate() {
                dphi.row_mut(a).copy_from_slice(c.gradient(&y)?.as_slice());
            }
            let jac = dphi * xa;
            let step = linalg::pinv_solve(&jac, &phi).ok_or(Error::ProjectionFailed { residual: resid })?;
            coef -= step;
            y = PhasePoint::from_vector(self.n(), x.vector() + xa * &coef);
            resid = self.drift(&y)?;
        }
        if resid <= tol.max(1e-10) {
            Ok(y)
        } else {
            Err(Error::ProjectionFailed { residual: resid })
        }
    }
}

fn constrained_vector(d: &PointData) -> Result<VectorValue> {
    let lam = d.multipliers_for(d.xh.vector())?;
    Ok(VectorValue::from_vector(d.n(), d.xh.vector() - &d.xa * lam))
}

/// `X_{H,M}` as a field, evaluated by the multiplier formula at any point
/// where `C` is solvable.
#[derive(Clone)]
pub struct ConstrainedField {
    sys: ConstrainedSystem,
}

impl VectorField for ConstrainedField {
    fn n(&self) -> usize {
        self.sys.n()
    }

    fn eval(&self, x: &PhasePoint) -> Result<VectorValue> {
        if self.sys.is_unconstrained() {
            return self.sys.xh.eval(x);
        }
        constrained_vector(&self.sys.point_data_unchecked(x)?)
    }

    fn jacobian(&self, x: &PhasePoint) -> Result<DMatrix<f64>> {
        if self.sys.is_unconstrained() {
            return self.sys.xh.jacobian(x);
        }
        crate::calculus::fd_jacobian(self, x)
    }
}

/// `Q(X_H)` as a field.
#[derive(Clone)]
pub struct ReactionField {
    sys: ConstrainedSystem,
}

impl VectorField for ReactionField {
    fn n(&self) -> usize {
        self.sys.n()
    }

    fn eval(&self, x: &PhasePoint) -> Result<VectorValue> {
        let d = self.sys.point_data_unchecked(x)?;
        d.q_apply(&d.xh)
    }
}

/// A one-form basis element `dv` for chart variable `v`.
pub fn coordinate_form(n: usize, v: Var) -> ForceForm {
    let mut dq = vec![Expr::zero(); n];
    let mut dp = vec![Expr::zero(); n];
    let mut dz = Expr::zero();
    match v {
        Var::Q(i) => dq[i] = Expr::one(),
        Var::P(i) => dp[i] = Expr::one(),
        Var::Z => dz = Expr::one(),
    }
    ForceForm { dq, dp, dz }
}

#[cfg(test)]
mod tests;

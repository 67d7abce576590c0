//! Mechanical-type contact Lagrangians `L = g(v, v)/2 + V(q, z)` with linear
//! velocity constraints, their Legendre transform and the induced
//! Hamiltonian system.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::calculus::{LagrangianPoint, OneFormValue, PhasePoint, ScalarField, VectorField, VectorValue};
use crate::constrained::{ConstrainedSystem, ForceForm, Projection};
use crate::error::{Error, Result};
use crate::expr::{self, Expr, Var};
use crate::linalg;

/// Largest configuration dimension for which the inverse metric is built symbolically.
pub const MAX_SYMBOLIC_N: usize = 6;

#[derive(Debug, Clone)]
pub struct MechanicalSystem {
    n: usize,
    /// Row-major `g[i][j]`.
    metric: Vec<Expr>,
    potential: Expr,
    /// `forms[a][i]` is the `dq^i` component of `Phi^a`.
    forms: Vec<Vec<Expr>>,
    /// `metric_d[k][i * n + j] = d g_ij / dq^k`.
    metric_d: Vec<Vec<Expr>>,
    potential_dq: Vec<Expr>,
    potential_dz: Expr,
    /// `forms_d[a][k][i] = d Phi^a_i / dq^k`.
    forms_d: Vec<Vec<Vec<Expr>>>,
}

/// Everything about the metric and constraints at one configuration.
struct Local {
    g: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    /// `dg[k]` is `d g / dq^k`.
    dg: Vec<DMatrix<f64>>,
    phi: DMatrix<f64>,
    dphi: Vec<DMatrix<f64>>,
}

fn only_depends_on(e: &Expr, allowed: impl Fn(Var) -> bool) -> bool {
    e.variables().into_iter().all(allowed)
}

fn is_q(v: Var) -> bool {
    matches!(v, Var::Q(_))
}

impl MechanicalSystem {
    pub fn new(n: usize, metric: Vec<Vec<Expr>>, potential: Expr, forms: Vec<Vec<Expr>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidSystem("configuration dimension must be at least 1".into()));
        }
        if metric.len() != n || metric.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidSystem(format!("metric must be {n}x{n}")));
        }
        for (i, row) in metric.iter().enumerate() {
            for (j, e) in row.iter().enumerate().take(i) {
                if e.to_string() != metric[j][i].to_string() {
                    return Err(Error::InvalidSystem(format!("metric is not symmetric at ({}, {})", i + 1, j + 1)));
                }
            }
        }
        if !metric.iter().flatten().all(|e| only_depends_on(e, is_q)) {
            return Err(Error::InvalidSystem("metric entries may only depend on q".into()));
        }
        if !only_depends_on(&potential, |v| !matches!(v, Var::P(_))) {
            return Err(Error::InvalidSystem("potential may only depend on q and z".into()));
        }
        if forms.iter().any(|f| f.len() != n) {
            return Err(Error::InvalidSystem(format!("constraint forms must have {n} components")));
        }
        if !forms.iter().flatten().all(|e| only_depends_on(e, is_q)) {
            return Err(Error::InvalidSystem("constraint forms may only depend on q".into()));
        }
        if forms.len() > n {
            return Err(Error::InvalidSystem("more constraint forms than configuration dimensions".into()));
        }
        let metric: Vec<Expr> = metric.into_iter().flatten().collect();
        let metric_d = (0..n).map(|k| metric.iter().map(|e| e.diff(Var::Q(k))).collect()).collect();
        let potential_dq = (0..n).map(|k| potential.diff(Var::Q(k))).collect();
        let potential_dz = potential.diff(Var::Z);
        let forms_d =
            forms.iter().map(|f| (0..n).map(|k| f.iter().map(|e| e.diff(Var::Q(k))).collect()).collect()).collect();
        Ok(MechanicalSystem { n, metric, potential, forms, metric_d, potential_dq, potential_dz, forms_d })
    }

    /// Builds a system from expression strings; `metric` is given row by row.
    pub fn parse<S: AsRef<str>>(n: usize, metric: &[Vec<S>], potential: &str, forms: &[Vec<S>]) -> Result<Self> {
        let p = |s: &S| expr::parse(s.as_ref(), n);
        let metric = metric.iter().map(|r| r.iter().map(p).collect()).collect::<Result<Vec<Vec<_>>>>()?;
        let forms = forms.iter().map(|r| r.iter().map(p).collect()).collect::<Result<Vec<Vec<_>>>>()?;
        Self::new(n, metric, expr::parse(potential, n)?, forms)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.forms.len()
    }

    pub fn potential(&self) -> &Expr {
        &self.potential
    }

    fn eval_mat(&self, exprs: &[Expr], rows: usize, cols: usize, at: &[f64]) -> Result<DMatrix<f64>> {
        let vals = exprs.iter().map(|e| e.eval_at(self.n, at)).collect::<Result<Vec<_>>>()?;
        Ok(DMatrix::from_row_slice(rows, cols, &vals))
    }

    fn forms_flat(&self, a: &[Vec<Expr>]) -> Vec<Expr> {
        a.iter().flatten().cloned().collect()
    }

    /// `g(q)` from any packed slice whose first `n` entries are `q`.
    pub fn metric_at(&self, packed: &[f64]) -> Result<DMatrix<f64>> {
        self.eval_mat(&self.metric, self.n, self.n, packed)
    }

    /// `Phi(q)` as an `m x n` matrix.
    pub fn constraint_matrix(&self, packed: &[f64]) -> Result<DMatrix<f64>> {
        self.eval_mat(&self.forms_flat(&self.forms), self.m(), self.n, packed)
    }

    fn local(&self, packed: &[f64]) -> Result<Local> {
        let n = self.n;
        let g = self.metric_at(packed)?;
        let chol = Cholesky::new(g.clone()).ok_or(Error::NotPositiveDefinite)?;
        let dg = (0..n).map(|k| self.eval_mat(&self.metric_d[k], n, n, packed)).collect::<Result<Vec<_>>>()?;
        let phi = self.constraint_matrix(packed)?;
        let dphi = (0..n)
            .map(|k| {
                let exprs: Vec<Expr> = self.forms_d.iter().flat_map(|fa| fa[k].iter().cloned()).collect();
                self.eval_mat(&exprs, self.m(), n, packed)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Local { g, chol, dg, phi, dphi })
    }

    /// `W = d^2 L / dv dv = g(q)` and its inverse.
    pub fn hessian_w(&self, x: &LagrangianPoint) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let loc = self.local(x.as_slice())?;
        let inv = loc.chol.inverse();
        Ok((loc.g, inv))
    }

    pub fn lagrangian(&self, x: &LagrangianPoint) -> Result<f64> {
        let g = self.metric_at(x.as_slice())?;
        let v = DVector::from_column_slice(x.v());
        Ok(0.5 * v.dot(&(&g * &v)) + self.potential.eval_at(self.n, x.as_slice())?)
    }

    /// `E_L = g(v, v)/2 - V` and `eta_L = dz - (g v)_i dq^i` in the frame `(dq, dv, dz)`.
    pub fn energy_and_form(&self, x: &LagrangianPoint) -> Result<(f64, OneFormValue)> {
        let g = self.metric_at(x.as_slice())?;
        Cholesky::new(g.clone()).ok_or(Error::NotPositiveDefinite)?;
        let v = DVector::from_column_slice(x.v());
        let gv = &g * &v;
        let e = 0.5 * v.dot(&gv) - self.potential.eval_at(self.n, x.as_slice())?;
        let aq: Vec<f64> = gv.iter().map(|c| -c).collect();
        Ok((e, OneFormValue::new(&aq, &vec![0.0; self.n], 1.0)))
    }

    /// `FL(q, v, z) = (q, g v, z)`.
    pub fn legendre(&self, x: &LagrangianPoint) -> Result<PhasePoint> {
        let g = self.metric_at(x.as_slice())?;
        Cholesky::new(g.clone()).ok_or(Error::NotPositiveDefinite)?;
        let p = &g * DVector::from_column_slice(x.v());
        Ok(PhasePoint::new(x.q(), p.as_slice(), x.z()))
    }

    pub fn legendre_inverse(&self, x: &PhasePoint) -> Result<LagrangianPoint> {
        let g = self.metric_at(x.as_slice())?;
        let chol = Cholesky::new(g).ok_or(Error::NotPositiveDefinite)?;
        let v = chol.solve(&DVector::from_column_slice(x.p()));
        Ok(LagrangianPoint::new(x.q(), v.as_slice(), x.z()))
    }

    /// Tangent map of `FL` applied to `w` in the frame `(dq, dv, dz)`.
    pub fn legendre_tangent(&self, x: &LagrangianPoint, w: &VectorValue) -> Result<VectorValue> {
        let loc = self.local(x.as_slice())?;
        let v = DVector::from_column_slice(x.v());
        let mut dp = &loc.g * DVector::from_column_slice(w.vp());
        for k in 0..self.n {
            dp += &loc.dg[k] * &v * w.vq()[k];
        }
        Ok(VectorValue::new(w.vq(), dp.as_slice(), w.vz()))
    }

    /// `max_a |Phi^a(v)|`.
    pub fn velocity_residual(&self, x: &LagrangianPoint) -> Result<f64> {
        let phi = self.constraint_matrix(x.as_slice())?;
        Ok(linalg::max_abs((phi * DVector::from_column_slice(x.v())).as_slice()))
    }

    pub fn check_in_d(&self, x: &LagrangianPoint) -> Result<()> {
        let residual = self.velocity_residual(x)?;
        let tolerance = 1e-8 * (1.0 + x.norm_inf());
        if residual > tolerance {
            return Err(Error::OffConstraint { residual, tolerance });
        }
        Ok(())
    }

    /// Metric-orthogonal projection of the velocity onto `D`.
    pub fn project_velocity(&self, x: &LagrangianPoint) -> Result<LagrangianPoint> {
        if self.m() == 0 {
            return Ok(x.clone());
        }
        let loc = self.local(x.as_slice())?;
        let v = DVector::from_column_slice(x.v());
        let ginv_phit = loc.chol.solve(&loc.phi.transpose());
        let s = &loc.phi * &ginv_phit;
        let coef = linalg::solve_square(&s, &(&loc.phi * &v)).ok_or(Error::SingularC {
            rank: linalg::rank(&s),
            rows: s.nrows(),
            cols: s.ncols(),
        })?;
        let v = v - ginv_phit * coef;
        Ok(LagrangianPoint::new(x.q(), v.as_slice(), x.z()))
    }

    /// The constrained Herglotz field `(v, vdot, L)` and its multipliers, without
    /// checking that `v` lies in `D`.
    pub fn herglotz_unchecked(&self, x: &LagrangianPoint) -> Result<(VectorValue, DVector<f64>)> {
        let n = self.n;
        let loc = self.local(x.as_slice())?;
        let v = DVector::from_column_slice(x.v());
        let at = x.as_slice();
        let vz = self.potential_dz.eval_at(n, at)?;
        let gv = &loc.g * &v;
        let mut f = DVector::zeros(n);
        for i in 0..n {
            let mut s = 0.5 * v.dot(&(&loc.dg[i] * &v));
            for k in 0..n {
                s -= v[k] * loc.dg[k].row(i).transpose().dot(&v);
            }
            f[i] = s + self.potential_dq[i].eval_at(n, at)? + gv[i] * vz;
        }
        let lambda = if self.m() == 0 {
            DVector::zeros(0)
        } else {
            let ginv_phit = loc.chol.solve(&loc.phi.transpose());
            let c = &loc.phi * &ginv_phit;
            let mut accel = DVector::zeros(self.m());
            for k in 0..n {
                accel += &loc.dphi[k] * &v * v[k];
            }
            let rhs = -(&loc.phi * loc.chol.solve(&f)) - accel;
            linalg::solve_square(&c, &rhs).ok_or(Error::SingularC {
                rank: linalg::rank(&c),
                rows: c.nrows(),
                cols: c.ncols(),
            })?
        };
        let force = if self.m() == 0 { f } else { f + loc.phi.transpose() * &lambda };
        let vdot = loc.chol.solve(&force);
        let l = 0.5 * v.dot(&gv) + self.potential.eval_at(n, at)?;
        Ok((VectorValue::new(x.v(), vdot.as_slice(), l), lambda))
    }

    /// The constrained Herglotz field at a point with `v` in `D`.
    pub fn lagrangian_constrained_vf(&self, x: &LagrangianPoint) -> Result<VectorValue> {
        self.check_in_d(x)?;
        Ok(self.herglotz_unchecked(x)?.0)
    }

    /// `TFL` applied to the Lagrangian field at `x`.
    pub fn pushforward(&self, x: &LagrangianPoint) -> Result<VectorValue> {
        let gamma = self.lagrangian_constrained_vf(x)?;
        self.legendre_tangent(x, &gamma)
    }

    /// `|TFL(Gamma(x)) - X_{H,M}(FL(x))|_inf`.
    pub fn correspondence_residual(&self, sys: &ConstrainedSystem, x: &LagrangianPoint) -> Result<f64> {
        let lhs = self.pushforward(x)?;
        let rhs = sys.constrained_vf_at(&self.legendre(x)?)?;
        Ok(lhs.minus(&rhs).norm_inf())
    }

    /// `H = g^{ij} p_i p_j / 2 - V` with `g^{ij}` built symbolically.
    pub fn hamiltonian_expr(&self) -> Result<Expr> {
        let ginv = self.inverse_metric_expr()?;
        let n = self.n;
        let mut kin = Expr::zero();
        for i in 0..n {
            for j in 0..n {
                let pp = Expr::var(Var::P(i)) * Expr::var(Var::P(j));
                kin = kin + ginv[i * n + j].clone() * pp;
            }
        }
        Ok(Expr::num(0.5) * kin - self.potential.clone())
    }

    /// `phi^a = p_i g^{ij} Phi^a_j`.
    pub fn constraint_exprs(&self) -> Result<Vec<Expr>> {
        let ginv = self.inverse_metric_expr()?;
        let n = self.n;
        Ok(self
            .forms
            .iter()
            .map(|form| {
                let mut out = Expr::zero();
                for i in 0..n {
                    let mut z = Expr::zero();
                    for j in 0..n {
                        z = z + ginv[i * n + j].clone() * form[j].clone();
                    }
                    out = out + Expr::var(Var::P(i)) * z;
                }
                out
            })
            .collect())
    }

    fn inverse_metric_expr(&self) -> Result<Vec<Expr>> {
        if self.n > MAX_SYMBOLIC_N {
            return Err(Error::InvalidSystem(format!("symbolic metric inverse supports n <= {MAX_SYMBOLIC_N}")));
        }
        Ok(symbolic_inverse(&self.metric, self.n))
    }

    /// The Hamiltonian constrained system induced by the Legendre transform.
    pub fn induced_hamiltonian_system(self: &Arc<Self>) -> Result<ConstrainedSystem> {
        let n = self.n;
        let h = ScalarField::new(n, self.hamiltonian_expr()?);
        let constraints = self.constraint_exprs()?.into_iter().map(|e| ScalarField::new(n, e)).collect();
        let forces = self
            .forms
            .iter()
            .map(|f| ForceForm::new(f.clone(), vec![Expr::zero(); n], Expr::zero()))
            .collect::<Result<Vec<_>>>()?;
        Ok(ConstrainedSystem::new(n, h, constraints, forces)?.with_mechanical_origin(Arc::clone(self)))
    }

    /// The metric splitting projection `gamma(q, p, z) = (q, p - Phi^T S^{-1} Phi g^{-1} p, z)`
    /// with `S = Phi g^{-1} Phi^T`.
    pub fn gamma(&self, x: &PhasePoint) -> Result<PhasePoint> {
        if self.m() == 0 {
            return Ok(x.clone());
        }
        let loc = self.local(x.as_slice())?;
        let p = DVector::from_column_slice(x.p());
        let (a, _, _) = self.gamma_blocks(&loc)?;
        let p = &p - a * &p;
        Ok(PhasePoint::new(x.q(), p.as_slice(), x.z()))
    }

    /// `A = Phi^T S^{-1} Phi g^{-1}` together with `g^{-1}` and `S^{-1}`.
    fn gamma_blocks(&self, loc: &Local) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let ginv = loc.chol.inverse();
        let s = &loc.phi * &ginv * loc.phi.transpose();
        let sinv =
            linalg::inverse(&s).ok_or(Error::SingularC { rank: linalg::rank(&s), rows: s.nrows(), cols: s.ncols() })?;
        let a = loc.phi.transpose() * &sinv * &loc.phi * &ginv;
        Ok((a, ginv, sinv))
    }

    /// Jacobian of `gamma` at `x`.
    pub fn gamma_jacobian(&self, x: &PhasePoint) -> Result<DMatrix<f64>> {
        let n = self.n;
        let dim = 2 * n + 1;
        let mut j = DMatrix::identity(dim, dim);
        if self.m() == 0 {
            return Ok(j);
        }
        let loc = self.local(x.as_slice())?;
        let p = DVector::from_column_slice(x.p());
        let (a, ginv, sinv) = self.gamma_blocks(&loc)?;
        j.view_mut((n, n), (n, n)).copy_from(&(DMatrix::identity(n, n) - &a));
        let phi = &loc.phi;
        for k in 0..n {
            let dphi = &loc.dphi[k];
            let dginv = -(&ginv * &loc.dg[k] * &ginv);
            let ds = dphi * &ginv * phi.transpose() + phi * &dginv * phi.transpose() + phi * &ginv * dphi.transpose();
            let dsinv = -(&sinv * ds * &sinv);
            let da = dphi.transpose() * &sinv * phi * &ginv
                + phi.transpose() * dsinv * phi * &ginv
                + phi.transpose() * &sinv * dphi * &ginv
                + phi.transpose() * &sinv * phi * dginv;
            let col = -(da * &p);
            j.view_mut((n, k), (n, 1)).copy_from(&col);
        }
        Ok(j)
    }
}

/// Inverse of a symbolic `n x n` matrix by cofactors.
pub fn symbolic_inverse(m: &[Expr], n: usize) -> Vec<Expr> {
    fn det(m: &[Expr], n: usize, rows: &[usize], cols: &[usize]) -> Expr {
        if rows.len() == 1 {
            return m[rows[0] * n + cols[0]].clone();
        }
        let mut acc = Expr::zero();
        for (jj, &c) in cols.iter().enumerate() {
            let entry = m[rows[0] * n + c].clone();
            if entry.is_zero() {
                continue;
            }
            let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
            let term = entry * det(m, n, &rows[1..], &rest);
            acc = if jj % 2 == 0 { acc + term } else { acc - term };
        }
        acc
    }
    let all: Vec<usize> = (0..n).collect();
    let d = det(m, n, &all, &all);
    let mut out = vec![Expr::zero(); n * n];
    for i in 0..n {
        for j in 0..n {
            // inverse[i][j] = cofactor[j][i] / det
            let rows: Vec<usize> = all.iter().copied().filter(|&r| r != j).collect();
            let cols: Vec<usize> = all.iter().copied().filter(|&c| c != i).collect();
            let minor = if n == 1 { Expr::one() } else { det(m, n, &rows, &cols) };
            let cof = if (i + j) % 2 == 0 { minor } else { Expr::neg(minor) };
            out[i * n + j] = Expr::div(cof, d.clone());
        }
    }
    out
}

/// The Legendre-side Herglotz field as a vector field over packed `(q, v, z)`.
#[derive(Clone)]
pub struct LagrangianField {
    pub mech: Arc<MechanicalSystem>,
}

impl VectorField for LagrangianField {
    fn n(&self) -> usize {
        self.mech.n()
    }

    fn eval(&self, x: &PhasePoint) -> Result<VectorValue> {
        let lp = LagrangianPoint::from_slice(x.n(), x.as_slice())?;
        Ok(self.mech.herglotz_unchecked(&lp)?.0)
    }
}

/// The tangent map of the metric splitting projection, for systems induced
/// from a mechanical one.
#[derive(Debug, Clone, Copy, Default)]
pub struct EdenGamma;

impl Projection for EdenGamma {
    fn name(&self) -> &'static str {
        "eden-gamma"
    }

    fn matrix(&self, sys: &ConstrainedSystem, x: &PhasePoint) -> Result<DMatrix<f64>> {
        let mech = sys
            .mechanical_origin()
            .ok_or_else(|| Error::PreconditionFailed("system was not induced from a mechanical system".into()))?;
        mech.gamma_jacobian(x)
    }
}

use nalgebra::{DMatrix, DVector};

use super::{ConstrainedSystem, PointData};
use crate::calculus::{divergence, lie_eta, PhasePoint, VectorField, VectorValue};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniquenessReport {
    pub unique: bool,
    pub rank: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExistenceReport {
    pub exists: bool,
    pub residual: f64,
    pub tolerance: f64,
    /// Dimension of the intersection of `TM^perp` with `F`.
    pub intersection_dim: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructuralReport {
    pub reeb_in_f: bool,
    pub f_self_orthogonal: bool,
    pub mechanical: bool,
    pub reeb_residual: f64,
    pub orthogonality_residual: f64,
    pub mechanical_residual: f64,
    pub tolerance: f64,
}

impl StructuralReport {
    pub fn all(&self) -> bool {
        self.reeb_in_f && self.f_self_orthogonal && self.mechanical
    }
}

/// Residuals of the dissipation identities along the constrained flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    /// `X(H) + R(H) H + Q(X_H)(H)`.
    pub energy_residual: f64,
    /// `L_X eta + R(H) eta + L_{Q(X_H)} eta`, max over components.
    pub eta_residual: f64,
    /// `div(X_H) + (n + 1) R(H)` for the unconstrained field.
    pub divergence_residual: f64,
    /// Max pairing of `L_{Q(X_H)} eta` against a basis of F, when R lies in F.
    pub reaction_eta_residual: Option<f64>,
    pub tolerance: f64,
}

impl IdentityReport {
    pub fn max_residual(&self) -> f64 {
        self.energy_residual
            .max(self.eta_residual)
            .max(self.divergence_residual)
            .max(self.reaction_eta_residual.unwrap_or(0.0))
    }

    pub fn passes(&self) -> bool {
        self.max_residual() <= self.tolerance
    }
}

/// Both sides of the Lie-derivative characterization of the constrained equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LieCharacterizationReport {
    /// Max pairing of `flat(X) - dH + (H + R(H)) eta` against a basis of F.
    pub force_residual: f64,
    /// `|eta(X) + H|`.
    pub eta_residual: f64,
    /// Max pairing of `L_X eta + R(H) eta` against a basis of F.
    pub lie_residual: f64,
}

impl LieCharacterizationReport {
    pub fn equation_holds(&self, tol: f64) -> bool {
        self.force_residual <= tol
    }

    pub fn characterization_holds(&self, tol: f64) -> bool {
        self.eta_residual <= tol && self.lie_residual <= tol
    }
}

fn max_pairing(form: &DVector<f64>, basis: &DMatrix<f64>) -> f64 {
    if basis.ncols() == 0 {
        return 0.0;
    }
    linalg::max_abs(basis.tr_mul(form).as_slice())
}

impl ConstrainedSystem {
    pub fn uniqueness_check(&self, x: &PhasePoint) -> Result<UniquenessReport> {
        let d = self.point_data(x)?;
        let rank = linalg::rank(&d.c);
        Ok(UniquenessReport { unique: d.k() <= d.m() && rank == d.k(), rank })
    }

    pub fn existence_check(&self, x: &PhasePoint) -> Result<ExistenceReport> {
        let d = self.point_data(x)?;
        let dim = d.dim();
        let tm = linalg::null_space(&d.dphi);
        let omega = self.chart().flat_matrix(x);
        // v in TM^perp  <=>  flat(v)(w) = w^T Omega v = 0 for all w in TM
        let perp_rows = tm.tr_mul(&omega);
        let mut stacked = DMatrix::zeros(perp_rows.nrows() + d.k(), dim);
        stacked.view_mut((0, 0), (perp_rows.nrows(), dim)).copy_from(&perp_rows);
        stacked.view_mut((perp_rows.nrows(), 0), (d.k(), dim)).copy_from(&d.psi);
        let basis = linalg::null_space(&stacked);
        let eta = self.chart().eta(x);
        let form = d.dh.vector() - eta.vector() * (d.h + d.reeb_h());
        let residual = max_pairing(&form, &basis);
        let tolerance = 1e-8 * d.scale();
        Ok(ExistenceReport { exists: residual <= tolerance, residual, tolerance, intersection_dim: basis.ncols() })
    }

    pub fn structural_checks(&self, x: &PhasePoint) -> Result<StructuralReport> {
        let d = self.point_data(x)?;
        Ok(structural(&d))
    }

    /// `max_a |V(phi^a)|`.
    pub fn tangency_residual(&self, x: &PhasePoint, v: &VectorValue) -> Result<f64> {
        let d = self.point_data_unchecked(x)?;
        Ok(linalg::max_abs((&d.dphi * v.vector()).as_slice()))
    }

    /// Max pairing of `flat(V) - dH + (H + R(H)) eta` against a basis of F.
    pub fn force_membership_residual(&self, x: &PhasePoint, v: &VectorValue) -> Result<f64> {
        let d = self.point_data_unchecked(x)?;
        let defect = d.force_defect(self.chart(), v);
        Ok(max_pairing(defect.vector(), &d.f_basis()))
    }

    /// Evaluates both readings of the constrained equation for `field` at `x`.
    /// Requires the Reeb field to lie in F.
    pub fn lie_characterization(&self, field: &dyn VectorField, x: &PhasePoint) -> Result<LieCharacterizationReport> {
        let d = self.point_data(x)?;
        let s = structural(&d);
        if !s.reeb_in_f {
            return Err(Error::PreconditionFailed("the Reeb field is not tangent to F".into()));
        }
        let v = field.eval(x)?;
        let basis = d.f_basis();
        let force_residual = max_pairing(d.force_defect(self.chart(), &v).vector(), &basis);
        let eta_residual = (self.chart().eta_at(x, &v) + d.h).abs();
        let le = lie_eta(field, x)?;
        let form = le.vector() + self.chart().eta(x).vector() * d.reeb_h();
        let lie_residual = max_pairing(&form, &basis);
        Ok(LieCharacterizationReport { force_residual, eta_residual, lie_residual })
    }

    pub fn identity_report(&self, x: &PhasePoint) -> Result<IdentityReport> {
        let d = self.point_data(x)?;
        let n = d.n();
        let rh = d.reeb_h();
        let xf = self.constrained_field();
        let qf = self.reaction_field();
        let xv = xf.eval(x)?;
        let qv = qf.eval(x)?;

        let energy_residual = (d.dh.pair(&xv) + rh * d.h + d.dh.pair(&qv)).abs();

        let eta = self.chart().eta(x);
        let (lx, lq) = if self.is_unconstrained() {
            (lie_eta(self.hamiltonian_field(), x)?, crate::calculus::OneFormValue::zeros(n))
        } else {
            (lie_eta(&xf, x)?, lie_eta(&qf, x)?)
        };
        let eta_form = lx.vector() + eta.vector() * rh + lq.vector();
        let eta_residual = eta_form.amax();

        let divergence_residual = (divergence(self.hamiltonian_field(), x)? + (n as f64 + 1.0) * rh).abs();

        let reaction_eta_residual =
            if structural(&d).reeb_in_f { Some(max_pairing(lq.vector(), &d.f_basis())) } else { None };
        Ok(IdentityReport {
            energy_residual,
            eta_residual,
            divergence_residual,
            reaction_eta_residual,
            tolerance: 1e-7 * d.scale(),
        })
    }
}

pub(crate) fn structural(d: &PointData) -> StructuralReport {
    let tolerance = 1e-9 * d.scale();
    let dz = 2 * d.n();
    let reeb_residual = (0..d.k()).fold(0.0_f64, |m, a| m.max(d.psi[(a, dz)].abs()));
    // Psi^b(X_a) for all pairs
    let pairing = &d.psi * &d.xa;
    let orthogonality_residual = linalg::max_abs_mat(&pairing);
    let mechanical_residual = linalg::max_abs(d.xa.tr_mul(d.dh.vector()).as_slice());
    StructuralReport {
        reeb_in_f: reeb_residual <= tolerance,
        f_self_orthogonal: orthogonality_residual <= tolerance,
        mechanical: mechanical_residual <= tolerance,
        reeb_residual,
        orthogonality_residual,
        mechanical_residual,
        tolerance,
    }
}

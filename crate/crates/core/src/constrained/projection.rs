use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::checks::structural;
use super::ConstrainedSystem;
use crate::calculus::PhasePoint;
use crate::error::{Error, Result};
use crate::linalg;

/// A projector of `T_x P` onto admissible directions of a constrained system.
pub trait Projection: Send + Sync {
    fn name(&self) -> &'static str;

    /// Matrix of the projector at `x`. Membership of `x` in M is not checked,
    /// so the same formula serves as an extension off M.
    fn matrix(&self, sys: &ConstrainedSystem, x: &PhasePoint) -> Result<DMatrix<f64>>;
}

/// `P = I - X C^{-1} D(phi)`, the projector along the force fields onto TM.
#[derive(Debug, Clone, Copy, Default)]
pub struct Calligraphic;

impl Projection for Calligraphic {
    fn name(&self) -> &'static str {
        "calligraphic"
    }

    fn matrix(&self, sys: &ConstrainedSystem, x: &PhasePoint) -> Result<DMatrix<f64>> {
        sys.point_data_unchecked(x)?.p_matrix()
    }
}

/// The projector onto `TM ∩ F` built from `Y_c = sharp(d phi^c)` and
/// `G[d][c] = Psi^d(Y_c)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Roman;

impl Projection for Roman {
    fn name(&self) -> &'static str {
        "roman"
    }

    fn matrix(&self, sys: &ConstrainedSystem, x: &PhasePoint) -> Result<DMatrix<f64>> {
        let d = sys.point_data_unchecked(x)?;
        let s = structural(&d);
        // the mechanical condition only constrains dH along M
        let on_m = linalg::max_abs(d.phi.as_slice()) <= super::tol_on_m(x);
        if !(s.reeb_in_f && s.f_self_orthogonal && (s.mechanical || !on_m)) {
            let mut failed = Vec::new();
            if !s.reeb_in_f {
                failed.push("reeb_in_F");
            }
            if !s.f_self_orthogonal {
                failed.push("F_self_orthogonal");
            }
            if !s.mechanical {
                failed.push("mechanical");
            }
            return Err(Error::PreconditionFailed(format!("structural checks failed: {}", failed.join(", "))));
        }
        let dim = d.dim();
        let (m, k) = (d.m(), d.k());
        if m == 0 && k == 0 {
            return Ok(DMatrix::identity(dim, dim));
        }
        let yc = sys.chart().sharp_matrix(x) * d.dphi.transpose();
        let g = &d.psi * &yc;
        let g_inv = linalg::inverse(&g).ok_or(Error::SingularG { rank: linalg::rank(&g), rows: k, cols: m })?;
        let c_inv = linalg::inverse(&d.c).ok_or(Error::SingularC { rank: linalg::rank(&d.c), rows: m, cols: k })?;
        // Q = Yc G^-1 Psi + X C^-1 (D(phi) - D(phi) Yc G^-1 Psi)
        let nu = &g_inv * &d.psi;
        let q = &yc * &nu + &d.xa * c_inv * (&d.dphi - &d.dphi * &yc * &nu);
        Ok(DMatrix::identity(dim, dim) - q)
    }
}

/// Named projections, selectable at runtime.
#[derive(Clone)]
pub struct ProjectionRegistry {
    entries: BTreeMap<&'static str, Arc<dyn Projection>>,
}

impl ProjectionRegistry {
    pub fn empty() -> Self {
        ProjectionRegistry { entries: BTreeMap::new() }
    }

    pub fn register(&mut self, p: Arc<dyn Projection>) {
        self.entries.insert(p.name(), p);
    }

    pub fn get(&self, name: &str) -> Option<Arc<dyn Projection>> {
        self.entries.get(name).cloned()
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }
}

impl Default for ProjectionRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(Calligraphic));
        r.register(Arc::new(Roman));
        r.register(Arc::new(crate::lagrangian::EdenGamma));
        r
    }
}

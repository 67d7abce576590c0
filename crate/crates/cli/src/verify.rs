//! The `verify` suite: invariant checks at seeded sample points of M.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use contact_nh::brackets::{evolution_check, BracketRegistry, NonholonomicBracket};
use contact_nh::calculus::{LagrangianPoint, Observable, PhasePoint, ScalarField, VectorField, VectorValue};
use contact_nh::constrained::{coordinate_form, ConstrainedSystem, ProjectionRegistry};
use contact_nh::expr::Var;
use contact_nh::integrator::{integrate, IntegratorSettings};
use contact_nh::lagrangian::MechanicalSystem;
use contact_nh::sampling::{points_in_d, points_on_m, projected_points, random_observable, rng, SampleBox};
use contact_nh::{Error, Result};
use log::{info, warn};
use nalgebra::DMatrix;
use serde_json::{json, Map, Value};

use crate::config::SystemConfig;
use crate::error::{CliError, CliResult};
use crate::output::{to_json, write_json};

const TOL_SOLUTION: f64 = 1e-9;
const TOL_STRUCTURAL: f64 = 1e-9;
const TOL_EXISTENCE: f64 = 1e-8;
const TOL_IDENTITY: f64 = 1e-7;
const TOL_LIE: f64 = 1e-7;
const TOL_BRACKET: f64 = 1e-8;
const TOL_CASIMIR: f64 = 1e-9;
const TOL_PROJECTOR: f64 = 1e-10;
const TOL_LEGENDRE: f64 = 1e-8;
const RANDOM_PAIRS: usize = 3;

/// Running maximum of a scale-normalized residual over sample points.
#[derive(Debug)]
struct Measure {
    tolerance: f64,
    max: f64,
    samples: usize,
    error: Option<String>,
}

impl Measure {
    fn new(tolerance: f64) -> Self {
        Measure { tolerance, max: 0.0, samples: 0, error: None }
    }

    fn add(&mut self, r: f64) {
        self.samples += 1;
        if r.is_nan() {
            self.error.get_or_insert_with(|| "non-finite residual".into());
        }
        self.max = self.max.max(r);
    }

    fn record(&mut self, r: Result<f64>) {
        match r {
            Ok(r) => self.add(r),
            Err(e) => {
                self.samples += 1;
                self.error.get_or_insert_with(|| e.to_string());
            }
        }
    }

    fn pass(&self) -> bool {
        self.error.is_none() && self.max <= self.tolerance
    }
}

enum Entry {
    Measured(Measure),
    Skipped(String),
    Control { expected: &'static str, observed: String, pass: bool },
}

impl Entry {
    fn to_json(&self) -> Value {
        match self {
            Entry::Measured(m) => {
                let mut o = json!({
                    "max_residual": m.max,
                    "tolerance": m.tolerance,
                    "samples": m.samples,
                    "pass": m.pass(),
                });
                if let Some(e) = &m.error {
                    o["error"] = e.clone().into();
                }
                o
            }
            Entry::Skipped(why) => json!({ "skipped": why }),
            Entry::Control { expected, observed, pass } => {
                json!({ "expected": expected, "observed": observed, "pass": pass })
            }
        }
    }

    fn status(&self) -> Option<bool> {
        match self {
            Entry::Measured(m) => Some(m.pass()),
            Entry::Skipped(_) => None,
            Entry::Control { pass, .. } => Some(*pass),
        }
    }
}

#[derive(Default)]
pub struct Report {
    entries: BTreeMap<String, Entry>,
    samples: usize,
    seed: u64,
}

impl Report {
    fn measure(&mut self, key: &str, tolerance: f64) -> &mut Measure {
        let e = self.entries.entry(key.to_string()).or_insert_with(|| Entry::Measured(Measure::new(tolerance)));
        match e {
            Entry::Measured(m) => m,
            _ => unreachable!("{key} is not a measured check"),
        }
    }

    fn skip(&mut self, key: &str, why: &str) {
        self.entries.insert(key.to_string(), Entry::Skipped(why.to_string()));
    }

    fn control(&mut self, key: &str, expected: &'static str, observed: String, pass: bool) {
        self.entries.insert(key.to_string(), Entry::Control { expected, observed, pass });
    }

    /// Expected checks that saw no applicable point become skipped.
    fn finish(&mut self, expected: &[&str]) {
        for key in expected {
            if !self.entries.contains_key(*key) {
                self.skip(key, "not applicable at any sample point");
            }
        }
        for e in self.entries.values_mut() {
            if let Entry::Measured(m) = e {
                if m.samples == 0 {
                    *e = Entry::Skipped("not applicable at any sample point".into());
                }
            }
        }
    }

    pub fn failed(&self) -> Vec<&str> {
        self.entries.iter().filter(|(_, e)| e.status() == Some(false)).map(|(k, _)| k.as_str()).collect()
    }

    pub fn to_json(&self, cfg: &SystemConfig) -> Value {
        let checks: Map<String, Value> = self.entries.iter().map(|(k, e)| (k.clone(), e.to_json())).collect();
        let count = |s: Option<bool>| self.entries.values().filter(|e| e.status() == s).count();
        json!({
            "checks": checks,
            "config": serde_json::to_value(cfg).expect("config serializes"),
            "engine_version": env!("ENGINE_GIT_DESCRIBE"),
            "samples": self.samples,
            "seed": self.seed,
            "summary": { "passed": count(Some(true)), "failed": count(Some(false)), "skipped": count(None) },
        })
    }
}

const CONSTRAINED_CHECKS: &[&str] = &[
    "tangency",
    "force_membership",
    "uniqueness",
    "existence",
    "structural_checks.reeb_in_F",
    "structural_checks.F_self_orthogonal",
    "structural_checks.mechanical",
    "lie_characterization",
    "projector_algebra",
    "projector_coincidence",
    "casimir",
    "evolution",
    "bracket_coincidence",
    "negative_control.off_m_start",
];

fn not_applicable(e: &Error) -> bool {
    matches!(e, Error::PreconditionFailed(_) | Error::SingularG { .. })
}

/// Brackets that can be evaluated on this system at `x`.
fn available_brackets(
    sys: &ConstrainedSystem,
    registry: &BracketRegistry,
    x: &PhasePoint,
) -> Vec<Arc<dyn NonholonomicBracket>> {
    let probe = ScalarField::constant(sys.n(), 0.0);
    registry
        .iter()
        .filter(|b| !matches!(b.eval(sys, &probe, &probe, x), Err(ref e) if not_applicable(e)))
        .cloned()
        .collect()
}

fn projector_defect(p: &DMatrix<f64>) -> f64 {
    (p * p - p).amax()
}

struct Context<'a> {
    sys: &'a ConstrainedSystem,
    brackets: BracketRegistry,
    projections: ProjectionRegistry,
    pairs: Vec<(ScalarField, ScalarField)>,
}

impl Context<'_> {
    fn constrained_point(&self, report: &mut Report, x: &PhasePoint, scale: f64) {
        let sys = self.sys;
        let v = sys.constrained_vf_at(x);
        report
            .measure("tangency", TOL_SOLUTION)
            .record(v.clone().and_then(|v| sys.tangency_residual(x, &v)).map(|r| r / scale));
        report
            .measure("force_membership", TOL_SOLUTION)
            .record(v.and_then(|v| sys.force_membership_residual(x, &v)).map(|r| r / scale));
        report.measure("uniqueness", 0.0).record(sys.uniqueness_check(x).map(|u| if u.unique { 0.0 } else { 1.0 }));
        report.measure("existence", TOL_EXISTENCE).record(sys.existence_check(x).map(|r| r.residual / scale));

        let structural = sys.structural_checks(x);
        let reeb_in_f = structural.as_ref().map(|s| s.reeb_in_f).unwrap_or(false);
        report
            .measure("structural_checks.reeb_in_F", TOL_STRUCTURAL)
            .record(structural.clone().map(|s| s.reeb_residual / scale));
        report
            .measure("structural_checks.F_self_orthogonal", TOL_STRUCTURAL)
            .record(structural.clone().map(|s| s.orthogonality_residual / scale));
        report
            .measure("structural_checks.mechanical", TOL_STRUCTURAL)
            .record(structural.map(|s| s.mechanical_residual / scale));

        if reeb_in_f {
            let field = sys.constrained_field();
            let r = sys.lie_characterization(&field, x).map(|r| {
                let both = r.equation_holds(TOL_LIE * scale) == r.characterization_holds(TOL_LIE * scale);
                let worst = r.force_residual.max(r.eta_residual).max(r.lie_residual) / scale;
                if both {
                    worst
                } else {
                    f64::INFINITY
                }
            });
            report.measure("lie_characterization", TOL_LIE).record(r);
        }

        let xh = sys.hamiltonian_field().eval(x);
        let mut matrices = Vec::new();
        for name in ["calligraphic", "roman"] {
            match self.projections.get(name).expect("registered").matrix(sys, x) {
                Ok(p) => matrices.push((name, p)),
                Err(e) if not_applicable(&e) => {}
                Err(e) => report.measure("projector_algebra", TOL_PROJECTOR).record(Err(e)),
            }
        }
        for (_, p) in &matrices {
            report.measure("projector_algebra", TOL_PROJECTOR).add(projector_defect(p));
        }
        if let ([(_, a), (_, b)], Ok(xh)) = (matrices.as_slice(), &xh) {
            let d = (a - b) * xh.vector();
            report.measure("projector_coincidence", TOL_SOLUTION).add(d.amax() / scale);
        }

        let available = available_brackets(sys, &self.brackets, x);
        let f = &self.pairs[0].0;
        for b in &available {
            for phi in sys.constraints() {
                report.measure("casimir", TOL_CASIMIR).record(b.eval(sys, phi, f, x).map(|c| c.abs() / scale));
            }
            report.measure("evolution", TOL_BRACKET).record(evolution_check(sys, b.as_ref(), f, x).map(|e| e / scale));
        }
        if available.len() >= 2 {
            for (f, g) in &self.pairs {
                let values: Result<Vec<f64>> = available.iter().map(|b| b.eval(sys, f, g, x)).collect();
                let spread = values.map(|v| v.iter().fold(0.0f64, |m, a| m.max((a - v[0]).abs())) / scale);
                report.measure("bracket_coincidence", TOL_BRACKET).record(spread);
            }
        }
    }

    fn identities(&self, report: &mut Report, x: &PhasePoint, scale: f64) {
        match self.sys.identity_report(x) {
            Ok(r) => {
                report.measure("dissipation.energy", TOL_IDENTITY).add(r.energy_residual / scale);
                report.measure("dissipation.eta", TOL_IDENTITY).add(r.eta_residual / scale);
                report.measure("dissipation.divergence", TOL_IDENTITY).add(r.divergence_residual / scale);
                if let Some(e) = r.reaction_eta_residual {
                    report.measure("dissipation.reaction_eta", TOL_IDENTITY).add(e / scale);
                }
            }
            Err(e) => {
                for key in ["dissipation.energy", "dissipation.eta", "dissipation.divergence"] {
                    report.measure(key, TOL_IDENTITY).record(Err(e.clone()));
                }
            }
        }
    }
}

fn legendre_checks(report: &mut Report, sys: &ConstrainedSystem, mech: &MechanicalSystem, points: &[LagrangianPoint]) {
    let n = mech.n();
    for x in points {
        let r = (|| -> Result<(f64, f64, f64)> {
            let (el, eta_l) = mech.energy_and_form(x)?;
            let scale = 1.0 + el.abs() + x.norm_inf();
            let y = mech.legendre(x)?;
            let energy = (sys.hamiltonian().eval(&y)? - el).abs() / scale;
            let mut form = 0.0f64;
            for v in Var::all(n) {
                let pulled = sys.chart().eta_at(&y, &mech.legendre_tangent(x, &VectorValue::unit(n, v))?);
                form = form.max((pulled - eta_l.get(v)).abs() / scale);
            }
            Ok((energy, form, mech.correspondence_residual(sys, x)? / scale))
        })();
        report.measure("legendre.energy", TOL_LEGENDRE).record(r.clone().map(|r| r.0));
        report.measure("legendre.contact_form", TOL_LEGENDRE).record(r.clone().map(|r| r.1));
        report.measure("legendre.vector_field", TOL_LEGENDRE).record(r.map(|r| r.2));
    }
}

fn negative_controls(report: &mut Report, sys: &ConstrainedSystem, x: &PhasePoint) {
    let n = sys.n();
    let dz = coordinate_form(n, Var::Z);

    let observed = sys.with_extra_force(dz.clone()).and_then(|s| s.structural_checks(x));
    let (text, pass) = match observed {
        Ok(s) => (format!("reeb_in_F = {}", s.reeb_in_f), !s.reeb_in_f),
        Err(e) => (e.to_string(), false),
    };
    report.control("negative_control.reeb_force", "adding dz to F makes reeb_in_F false", text, pass);

    // two equal force forms give C two equal columns
    let dup = match sys.forces().first() {
        Some(f) => sys.with_extra_force(f.clone()),
        None => sys.with_extra_force(dz.clone()).and_then(|s| s.with_extra_force(dz)),
    };
    let (text, pass) = match dup.and_then(|s| s.multipliers(x)) {
        Err(e @ Error::SingularC { .. }) => (e.to_string(), true),
        Err(e) => (e.to_string(), false),
        Ok(_) => ("multipliers solved".into(), false),
    };
    report.control("negative_control.singular_c", "duplicated force form raises SingularC", text, pass);

    if sys.constraints().is_empty() {
        return;
    }
    let observed = (|| -> Result<String> {
        let grad = sys.constraints()[0].gradient(x)?;
        let dir = VectorValue::from_slice(n, grad.as_slice())?;
        let mut step = 1e-3 * (1.0 + x.norm_inf()) / dir.norm_inf().max(1e-12);
        let mut off = x.shifted(&dir, step);
        while sys.drift(&off)? <= 1e-6 * (1.0 + off.norm_inf()) && step < 1e3 {
            step *= 10.0;
            off = x.shifted(&dir, step);
        }
        match integrate(sys, &off, IntegratorSettings::new(1e-3, 1e-3, false)) {
            Err(e @ Error::OffConstraint { .. }) => Ok(format!("OffConstraint: {e}")),
            Err(e) => Ok(e.to_string()),
            Ok(_) => Ok("integration started".into()),
        }
    })();
    let observed = observed.unwrap_or_else(|e| e.to_string());
    let pass = observed.starts_with("OffConstraint");
    report.control("negative_control.off_m_start", "an off-M start raises OffConstraint", observed, pass);
}

pub fn verify(cfg: &SystemConfig, samples: usize, seed: u64) -> CliResult<Report> {
    let built = cfg.build()?;
    let sys = &built.system;
    let bx = SampleBox::default();
    let mut report = Report { samples, seed, ..Default::default() };

    let lag_points = match &built.mechanical {
        Some(mech) => Some(points_in_d(mech, samples, seed, &bx)?),
        None => None,
    };
    let points = match (&built.mechanical, &lag_points) {
        (Some(mech), Some(lp)) => lp.iter().map(|x| mech.legendre(x)).collect::<Result<Vec<_>>>()?,
        _ => match points_on_m(sys, samples, seed, &bx) {
            Ok(p) => p,
            Err(e) => {
                warn!("no well-posed sample points ({e}); falling back to plain projection");
                report.control("sampling", "multipliers determined at sampled points", e.to_string(), false);
                projected_points(sys, samples, seed, &bx)?
            }
        },
    };
    info!("verifying at {} sample points", points.len());

    let mut r = rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    let pairs =
        (0..RANDOM_PAIRS).map(|_| (random_observable(cfg.n, &mut r), random_observable(cfg.n, &mut r))).collect();
    let ctx = Context { sys, brackets: BracketRegistry::default(), projections: ProjectionRegistry::default(), pairs };
    let constrained = !sys.constraints().is_empty();
    for x in &points {
        let scale = sys.scale(x).unwrap_or(1.0 + x.norm_inf());
        if constrained {
            ctx.constrained_point(&mut report, x, scale);
        }
        ctx.identities(&mut report, x, scale);
    }
    if !constrained {
        for key in CONSTRAINED_CHECKS {
            report.skip(key, "system has no constraints");
        }
    }
    match (&built.mechanical, &lag_points) {
        (Some(mech), Some(lp)) => legendre_checks(&mut report, sys, mech, lp),
        _ => {
            for key in ["legendre.energy", "legendre.contact_form", "legendre.vector_field"] {
                report.skip(key, "hamiltonian mode");
            }
        }
    }
    negative_controls(&mut report, sys, &points[0]);
    report.finish(CONSTRAINED_CHECKS);
    Ok(report)
}

pub fn run(config: &Path, samples: Option<usize>, seed: Option<u64>, out: Option<&Path>) -> CliResult<()> {
    let cfg = SystemConfig::load(config)?;
    let samples = samples.unwrap_or(cfg.sample_count);
    if samples == 0 {
        return Err(CliError::Usage("--samples must be positive".into()));
    }
    let report = verify(&cfg, samples, seed.unwrap_or(cfg.seed))?;
    let json = report.to_json(&cfg);
    print!("{}", to_json(&json));
    if let Some(path) = out {
        write_json(path, &json)?;
    }
    let failed = report.failed();
    if failed.is_empty() {
        Ok(())
    } else {
        warn!("failed checks: {}", failed.join(", "));
        Err(CliError::ChecksFailed(failed.len()))
    }
}

//! TOML system configuration.

use std::path::Path;
use std::sync::Arc;

use contact_nh::constrained::{ConstrainedSystem, ForceForm};
use contact_nh::integrator::IntegratorSettings;
use contact_nh::lagrangian::MechanicalSystem;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Hamiltonian,
    Lagrangian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub mode: Mode,
    pub n: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_sample_count")]
    pub sample_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hamiltonian: Option<HamiltonianSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lagrangian: Option<LagrangianSection>,
    #[serde(default)]
    pub integrator: IntegratorSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSection {
    pub expr: String,
    #[serde(default)]
    pub constraints: Vec<String>,
    #[serde(default)]
    pub forces: Vec<ForceSection>,
}

/// `Psi = sum dq[i] dq^i + sum dp[i] dp_i + dz dz`; omitted parts are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceSection {
    #[serde(default)]
    pub dq: Vec<String>,
    #[serde(default)]
    pub dp: Vec<String>,
    #[serde(default)]
    pub dz: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LagrangianSection {
    /// Row-major `g_ij(q)`.
    pub metric: Vec<Vec<String>>,
    pub potential: String,
    /// `constraint_forms[a][i]` is the `dq^i` component of `Phi^a`.
    #[serde(default)]
    pub constraint_forms: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_h")]
    pub h: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default)]
    pub project: bool,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        IntegratorSection { h: default_h(), t_end: default_t_end(), project: false }
    }
}

fn default_seed() -> u64 {
    42
}

fn default_sample_count() -> usize {
    100
}

fn default_h() -> f64 {
    1e-3
}

fn default_t_end() -> f64 {
    5.0
}

/// The engine objects a config describes.
pub struct Built {
    pub system: ConstrainedSystem,
    pub mechanical: Option<Arc<MechanicalSystem>>,
}

fn expression_error(context: impl Into<String>) -> impl FnOnce(contact_nh::Error) -> CliError {
    let context = context.into();
    move |source| CliError::Expression { context, source }
}

impl SystemConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> CliResult<Self> {
        let cfg: SystemConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.n == 0 {
            return Err(CliError::Config("n must be at least 1".into()));
        }
        match (self.mode, &self.hamiltonian, &self.lagrangian) {
            (Mode::Hamiltonian, Some(_), None) | (Mode::Lagrangian, None, Some(_)) => {}
            (mode, _, _) => {
                let want = match mode {
                    Mode::Hamiltonian => "hamiltonian",
                    Mode::Lagrangian => "lagrangian",
                };
                return Err(CliError::Config(format!("mode `{want}` requires exactly one [{want}] section")));
            }
        }
        if self.sample_count == 0 {
            return Err(CliError::Config("sample_count must be positive".into()));
        }
        Ok(())
    }

    pub fn settings(&self) -> IntegratorSettings {
        IntegratorSettings::new(self.integrator.h, self.integrator.t_end, self.integrator.project)
    }

    pub fn build(&self) -> CliResult<Built> {
        let n = self.n;
        if let Some(ls) = &self.lagrangian {
            let mech = MechanicalSystem::parse(n, &ls.metric, &ls.potential, &ls.constraint_forms)
                .map_err(expression_error("lagrangian"))?;
            let mech = Arc::new(mech);
            let system = mech.induced_hamiltonian_system().map_err(expression_error("lagrangian"))?;
            return Ok(Built { system, mechanical: Some(mech) });
        }
        let hs = self.hamiltonian.as_ref().expect("validated");
        let mut forces = Vec::with_capacity(hs.forces.len());
        for (i, f) in hs.forces.iter().enumerate() {
            let dq: Vec<&str> = f.dq.iter().map(String::as_str).collect();
            let dp: Vec<&str> = f.dp.iter().map(String::as_str).collect();
            forces.push(ForceForm::parse(n, &dq, &dp, &f.dz).map_err(expression_error(format!("forces[{i}]")))?);
        }
        for (i, c) in hs.constraints.iter().enumerate() {
            contact_nh::expr::parse(c, n).map_err(expression_error(format!("constraints[{i}]")))?;
        }
        contact_nh::expr::parse(&hs.expr, n).map_err(expression_error("hamiltonian.expr"))?;
        let constraints: Vec<&str> = hs.constraints.iter().map(String::as_str).collect();
        let system =
            ConstrainedSystem::parse(n, &hs.expr, &constraints, forces).map_err(expression_error("hamiltonian"))?;
        Ok(Built { system, mechanical: None })
    }
}

/// Parses `"v1,v2,..."` into exactly `len` numbers.
pub fn parse_vector(text: &str, len: usize, what: &str) -> CliResult<Vec<f64>> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("{what}: `{}`: {e}", s.trim()))))
        .collect::<CliResult<_>>()?;
    if values.len() != len {
        return Err(CliError::Usage(format!("{what}: expected {len} comma-separated values, got {}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Usage(format!("{what}: values must be finite")));
    }
    Ok(values)
}

use std::path::Path;

use contact_nh::brackets::{jacobiator, leibniz_defect, BracketRegistry};
use contact_nh::calculus::{PhasePoint, ScalarField};
use contact_nh::Error;
use serde_json::{Map, Value};

use crate::config::{parse_vector, SystemConfig};
use crate::error::{CliError, CliResult};
use crate::output::to_json;

fn observable(text: &str, n: usize, what: &str) -> CliResult<ScalarField> {
    ScalarField::parse(text, n).map_err(|source| CliError::Expression { context: what.into(), source })
}

/// Evaluates every registered bracket of `f` and `g` at `point`, together with a
/// Jacobiator sample and the Leibniz defect (third function `H`, bracket `nh`).
pub fn evaluate(cfg: &SystemConfig, f: &str, g: &str, point: &str) -> CliResult<Value> {
    let built = cfg.build()?;
    let sys = &built.system;
    let n = cfg.n;
    let f = observable(f, n, "f")?;
    let g = observable(g, n, "g")?;
    let x = PhasePoint::from_slice(n, &parse_vector(point, 2 * n + 1, "point")?)?;
    sys.check_on_m(&x).map_err(|e| CliError::Usage(format!("point: {e}")))?;

    let registry = BracketRegistry::default();
    let mut out = Map::new();
    let mut unavailable = Map::new();
    for b in registry.iter() {
        match b.eval(sys, &f, &g, &x) {
            Ok(v) => {
                out.insert(b.name().into(), v.into());
            }
            Err(e @ (Error::PreconditionFailed(_) | Error::SingularG { .. })) => {
                unavailable.insert(b.name().into(), e.to_string().into());
            }
            Err(e) => return Err(e.into()),
        }
    }
    let nh = registry.get("nh").expect("nh is registered");
    let h = sys.hamiltonian();
    out.insert("jacobiator_sample".into(), jacobiator(sys, nh.as_ref(), &f, &g, h, &x)?.into());
    out.insert("leibniz_defect".into(), leibniz_defect(sys, nh.as_ref(), &f, &g, h, &x)?.into());
    out.insert("unavailable".into(), Value::Object(unavailable));
    Ok(Value::Object(out))
}

pub fn run(config: &Path, f: &str, g: &str, point: &str) -> CliResult<()> {
    let cfg = SystemConfig::load(config)?;
    print!("{}", to_json(&evaluate(&cfg, f, g, point)?));
    Ok(())
}

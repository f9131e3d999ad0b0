//! Run configuration: preset defaults, then a TOML or JSON file, then flags.

use std::path::Path;

use serde_json::Value;
use specinfer::campaign::{Case, Preset, RunConfig};

use crate::error::CliError;

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn parse_file(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<Preset>,
    pub config: Option<std::path::PathBuf>,
    pub seed: Option<u64>,
    pub case: Option<Case>,
}

pub fn resolve(o: &Overrides) -> Result<RunConfig, CliError> {
    let base = RunConfig::preset(o.preset.unwrap_or(Preset::Desk));
    let mut value = serde_json::to_value(&base).map_err(|e| CliError::config(e.to_string()))?;
    if let Some(path) = &o.config {
        merge(&mut value, parse_file(path)?);
    }
    let mut cfg: RunConfig = serde_json::from_value(value).map_err(|e| CliError::config(e.to_string()))?;
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(c) = o.case {
        cfg.case = c;
    }
    Ok(cfg)
}

//! Loading scenario descriptions from built-in ids or JSON files.

use std::path::{Path, PathBuf};

use fullerkit_core::scenarios::{self, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {origin}: {source}")]
    Parse { origin: String, source: serde_json::Error },
    #[error("unknown built-in scenario '{0}' (see list-scenarios)")]
    UnknownBuiltin(String),
    #[error("scenario {origin} violates the schema: {reason}")]
    SchemaViolation { origin: String, reason: String },
}

/// Parses and validates scenario JSON.
pub fn parse_scenario(text: &str, origin: &str) -> Result<Scenario, LoadError> {
    let s: Scenario =
        serde_json::from_str(text).map_err(|source| LoadError::Parse { origin: origin.into(), source })?;
    s.validate().map_err(|reason| LoadError::SchemaViolation { origin: origin.into(), reason })?;
    Ok(s)
}

pub fn load_scenario_file(path: &Path) -> Result<Scenario, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.into(), source })?;
    parse_scenario(&text, &path.display().to_string())
}

/// A built-in id, or a path when the argument names an existing file or ends
/// in `.json`.
pub fn load_scenario(arg: &str) -> Result<Scenario, LoadError> {
    let path = Path::new(arg);
    if path.is_file() || arg.ends_with(".json") {
        return load_scenario_file(path);
    }
    scenarios::builtin(arg).ok_or_else(|| LoadError::UnknownBuiltin(arg.into()))
}

/// Pretty JSON of a scenario, as stored under `scenarios/`.
pub fn to_json(s: &Scenario) -> String {
    let mut out = serde_json::to_string_pretty(s).expect("scenarios serialise");
    out.push('\n');
    out
}

//! Run configuration: TOML or JSON file plus `key=value` overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::scenarios::{self, Mode};

pub const DEFAULT_HORIZON: f64 = 10.0;
pub const DEFAULT_STEP: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    xi: Option<Vec<f64>>,
    g: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Option<String>,
    mode: Option<Mode>,
    #[serde(rename = "T")]
    horizon: Option<f64>,
    h: Option<f64>,
    output: Option<PathBuf>,
    formats: Option<Vec<Format>>,
    strict: Option<bool>,
    initial: Option<RawInitial>,
    parameters: Option<BTreeMap<String, f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct InitialConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi: Option<Vec<f64>>,
    /// Flat group element: rotations row-major, then translations, then angles.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
}

/// Validated, fully defaulted run configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: String,
    pub mode: Mode,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub h: f64,
    pub initial: InitialConfig,
    /// Effective scenario parameters, defaults included.
    pub parameters: BTreeMap<String, f64>,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    pub formats: Vec<Format>,
    pub strict: bool,
}

fn read_document(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| Error::config("config", format!("invalid JSON: {e}")))
    } else {
        let table: toml::Table =
            toml::from_str(&text).map_err(|e| Error::config("config", format!("invalid TOML: {e}")))?;
        serde_json::to_value(table).map_err(|e| Error::config("config", e.to_string()))
    }
}

/// Parses the right-hand side of `--set key=value` as a TOML value, falling
/// back to a bare string.
fn parse_override_value(raw: &str) -> Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .and_then(|v| serde_json::to_value(v).ok())
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::config(assignment, "override must have the form key=value"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::config(key, "empty key in override"));
    }
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = doc;
    for (i, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| Error::config(parts[..i].join("."), "not a table"))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), parse_override_value(raw.trim()));
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

/// Loads `path` (if any), applies overrides in order, fills defaults and
/// validates.
pub fn parse_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let mut doc = match path {
        Some(p) => read_document(p)?,
        None => Value::Object(Default::default()),
    };
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let raw: RawConfig = serde_path_to_error::deserialize(doc).map_err(|e| {
        let key = e.path().to_string();
        Error::config(
            if key == "." { "config".into() } else { key },
            e.into_inner().to_string(),
        )
    })?;
    validate(raw)
}

fn validate(raw: RawConfig) -> Result<RunConfig> {
    let scenario = raw.scenario.ok_or_else(|| Error::config("scenario", "missing"))?;
    let mode = raw.mode.unwrap_or(Mode::Geodesic);
    let horizon = raw.horizon.unwrap_or(DEFAULT_HORIZON);
    let h = raw.h.unwrap_or(DEFAULT_STEP);
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::config("T", "must be positive and finite"));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::config("h", "must be positive and finite"));
    }
    if h > horizon {
        return Err(Error::config("h", "exceeds horizon"));
    }
    let overrides = raw.parameters.unwrap_or_default();
    let built = scenarios::build(&scenario, &overrides).map_err(|e| match e {
        Error::Config { .. } | Error::UnknownScenario(_) => e,
        other => Error::config("parameters", other.to_string()),
    })?;
    if !built.supports(mode) {
        return Err(Error::config(
            "mode",
            format!("scenario `{scenario}` does not support mode `{mode}`"),
        ));
    }
    let initial = raw.initial.unwrap_or_default();
    if let Some(xi) = &initial.xi {
        if xi.len() != built.signature().dim() {
            return Err(Error::config(
                "initial.xi",
                format!("expected {} values, found {}", built.signature().dim(), xi.len()),
            ));
        }
    }
    if let Some(g) = &initial.g {
        let n = built.initial.g.to_flat().len();
        if g.len() != n {
            return Err(Error::config(
                "initial.g",
                format!("expected {n} values, found {}", g.len()),
            ));
        }
    }
    let mut formats = raw.formats.unwrap_or_else(|| vec![Format::Csv, Format::Json]);
    formats.dedup();
    if formats.is_empty() {
        return Err(Error::config("formats", "at least one output format is required"));
    }
    Ok(RunConfig {
        scenario,
        mode,
        horizon,
        h,
        initial: InitialConfig {
            xi: initial.xi,
            g: initial.g,
        },
        parameters: built.parameters.clone(),
        output: raw.output,
        formats,
        strict: raw.strict.unwrap_or(false),
    })
}

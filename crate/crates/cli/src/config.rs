//! Layered configuration: a JSON file tagged with `"command"`, overridden
//! by whatever flags were given on the command line.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::Failure;

fn read_file(path: &Path, command: &str) -> Result<Map<String, Value>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    let Value::Object(mut map) = value else {
        return Err(Failure::invalid(format!("{}: config must be a JSON object", path.display())));
    };
    match map.remove("command") {
        Some(Value::String(c)) if c == command => Ok(map),
        Some(other) => Err(Failure::invalid(format!(
            "{}: config is for command {other}, not \"{command}\"",
            path.display()
        ))),
        None => Err(Failure::invalid(format!(
            "{}: config needs a \"command\" field",
            path.display()
        ))),
    }
}

/// Merges the config file (if any) with the flags and deserializes the
/// result. Flags left unset serialize to nothing and keep the file value.
pub fn resolve<F: Serialize, C: DeserializeOwned>(
    file: Option<&PathBuf>,
    command: &str,
    flags: &F,
) -> Result<C, Failure> {
    let mut merged = match file {
        Some(path) => read_file(path, command)?,
        None => Map::new(),
    };
    let Value::Object(flags) = serde_json::to_value(flags).expect("flags serialize") else {
        unreachable!("flag structs serialize to objects");
    };
    for (key, value) in flags {
        if !value.is_null() {
            merged.insert(key, value);
        }
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| Failure::invalid(format!("{command} configuration: {e}")))
}

/// Removes `key` from a config map that is about to be handed to a
/// library type, returning it as a path.
pub fn take_path(map: &mut Map<String, Value>, key: &str) -> Result<Option<PathBuf>, Failure> {
    match map.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(PathBuf::from(s))),
        Some(other) => Err(Failure::invalid(format!("{key} must be a path, got {other}"))),
    }
}

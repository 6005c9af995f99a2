//! Run configuration files: a JSON object or `key = value` lines, merged
//! over the defaults of whatever structure the subcommand needs.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Reads a config file into a JSON object. Files whose first non-blank
/// character is `{` are JSON; anything else is `key = value` lines where
/// dotted keys nest (`diffusion.k = 20`), `#` starts a comment, and values
/// that parse as JSON scalars keep their type (otherwise they are strings).
pub fn read_config(path: &Path) -> Result<Map<String, Value>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    parse_config(&text).map_err(|e| format!("config {}: {e}", path.display()))
}

pub fn parse_config(text: &str) -> Result<Map<String, Value>, String> {
    if text.trim_start().starts_with('{') {
        return match serde_json::from_str(text) {
            Ok(Value::Object(map)) => Ok(map),
            Ok(_) => Err("top level must be an object".into()),
            Err(e) => Err(e.to_string()),
        };
    }
    let mut root = Map::new();
    for (number, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key = value", number + 1))?;
        let key = key.trim();
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(format!("line {}: bad key {key:?}", number + 1));
        }
        let value = value.trim();
        let value = match serde_json::from_str::<Value>(value) {
            Ok(v) if !v.is_object() && !v.is_array() => v,
            _ => Value::String(value.to_string()),
        };
        insert_dotted(&mut root, key, value).map_err(|e| format!("line {}: {e}", number + 1))?;
    }
    Ok(root)
}

fn insert_dotted(root: &mut Map<String, Value>, key: &str, value: Value) -> Result<(), String> {
    let mut parts = key.split('.').peekable();
    let mut node = root;
    while let Some(part) = parts.next() {
        if parts.peek().is_none() {
            if node.insert(part.to_string(), value).is_some() {
                return Err(format!("duplicate key {key}"));
            }
            return Ok(());
        }
        let entry = node.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
        node = entry
            .as_object_mut()
            .ok_or_else(|| format!("{key}: {part} is not a section"))?;
    }
    Ok(())
}

/// Removes a top-level string entry (used for paths that are not part of
/// the library configuration).
pub fn take_path(map: &mut Map<String, Value>, key: &str) -> Result<Option<String>, String> {
    match map.remove(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(other) => Err(format!("{key} must be a path, got {other}")),
    }
}

/// Overlays `overrides` on the serialized `base` and deserializes the
/// result. Unknown keys surface as errors from the target type.
pub fn merge_into<T: Serialize + DeserializeOwned>(base: &T, overrides: Map<String, Value>) -> Result<T, String> {
    let mut value = serde_json::to_value(base).map_err(|e| e.to_string())?;
    merge(&mut value, Value::Object(overrides));
    serde_json::from_value(value).map_err(|e| format!("invalid config: {e}"))
}

fn merge(base: &mut Value, overrides: Value) {
    match (base, overrides) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tumorseg::PipelineConfig;

    #[test]
    fn key_value_nests_and_types() {
        let map = parse_config("# comment\ndiffusion.k = 20\ncleanup = true\ntruth = a/b.pgm\n").unwrap();
        assert_eq!(map["diffusion"]["k"], Value::from(20));
        assert_eq!(map["cleanup"], Value::Bool(true));
        assert_eq!(map["truth"], Value::from("a/b.pgm"));
    }

    #[test]
    fn merged_config_keeps_defaults() {
        let map = parse_config("diffusion.k = 20\ntrain.nu = 0.2").unwrap();
        let cfg = merge_into(&PipelineConfig::default(), map).unwrap();
        assert_eq!(cfg.diffusion.k, 20.0);
        assert_eq!(cfg.diffusion.iterations, PipelineConfig::default().diffusion.iterations);
        assert_eq!(cfg.train.nu, 0.2);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in ["bogus = 1", "diffusion.kk = 3", "{\"train\": {\"nuu\": 0.1}}"] {
            let map = parse_config(text).unwrap();
            assert!(merge_into(&PipelineConfig::default(), map).is_err(), "{text}");
        }
    }

    #[test]
    fn malformed_lines_rejected() {
        assert!(parse_config("just words").is_err());
        assert!(parse_config("a = 1\na = 2").is_err());
        assert!(parse_config("a = 1\na.b = 2").is_err());
        assert!(parse_config("[1, 2]").is_err());
        assert!(parse_config("{\"a\": 1").is_err());
    }
}

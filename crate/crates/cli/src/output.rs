//! Deterministic output plumbing: fixed-precision JSON, atomic writes, and
//! config-file merging.

use multicause_core::{Error, Result};
use serde::Serialize;
use serde_json::Value;
use std::path::Path;

/// Round every float in a JSON tree to 12 significant digits so golden
/// files stay byte-stable.
pub fn round_floats(v: &mut Value) {
    match v {
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.is_f64() && f.is_finite() {
                    let rounded: f64 = format!("{f:.11e}").parse().expect("roundtrip");
                    *v = serde_json::Number::from_f64(rounded)
                        .map(Value::Number)
                        .unwrap_or(Value::Null);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_floats),
        Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}

/// Serialize with 12-significant-digit floats and write atomically
/// (temp file in the same directory, then rename).
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut v = serde_json::to_value(value)?;
    round_floats(&mut v);
    let body = serde_json::to_string_pretty(&v)? + "\n";
    write_atomic(path, body.as_bytes())
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    std::io::Write::write_all(&mut tmp.as_file(), bytes)?;
    tmp.persist(path)
        .map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Load an optional JSON config file; flat object whose keys match the
/// long flag names.
pub fn load_config(path: Option<&str>) -> Result<Value> {
    match path {
        None => Ok(Value::Object(Default::default())),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            let v: Value = serde_json::from_str(&text)?;
            if !v.is_object() {
                return Err(Error::Shape("config file must hold a JSON object".into()));
            }
            Ok(v)
        }
    }
}

/// Fill a missing flag from the config file (flags always win).
pub fn fill<T: serde::de::DeserializeOwned>(
    slot: &mut Option<T>,
    cfg: &Value,
    key: &str,
) -> Result<()> {
    if slot.is_none() {
        if let Some(raw) = cfg.get(key) {
            let parsed: T = serde_json::from_value(raw.clone())
                .map_err(|e| Error::Shape(format!("config key `{key}`: {e}")))?;
            *slot = Some(parsed);
        }
    }
    Ok(())
}

pub fn parse_usize_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| Error::Shape(format!("bad integer `{t}` in list `{s}`")))
        })
        .collect()
}

pub fn parse_f64_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Shape(format!("bad number `{t}` in list `{s}`")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    #[allow(clippy::excessive_precision)]
    fn rounding_trims_significant_digits() {
        let mut v = serde_json::json!({"x": 0.123456789012345678, "n": 3, "a": [1.0000000000000002]});
        round_floats(&mut v);
        assert_eq!(v["x"], serde_json::json!(0.123456789012));
        assert_eq!(v["n"], serde_json::json!(3));
        assert_eq!(v["a"][0], serde_json::json!(1.0));
    }

    #[test]
    fn list_parsers() {
        assert_eq!(parse_usize_list("1, 0,2").unwrap(), vec![1, 0, 2]);
        assert!(parse_usize_list("1,x").is_err());
        assert_eq!(parse_f64_list("0,0.5").unwrap(), vec![0.0, 0.5]);
    }
}

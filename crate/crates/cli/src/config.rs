//! Effective configuration: built-in defaults, then the command's section
//! of an optional JSON file, then flags.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

fn overlay(base: &mut Map<String, Value>, top: Map<String, Value>) {
    for (k, v) in top {
        base.insert(k, v);
    }
}

fn object(v: Value, what: &str) -> Result<Map<String, Value>, String> {
    match v {
        Value::Object(m) => Ok(m),
        Value::Null => Ok(Map::new()),
        _ => Err(format!("{what} must be a JSON object")),
    }
}

/// Reads the `command` section of a config file. A missing section is empty.
pub fn file_section(path: &Path, command: &str) -> Result<Map<String, Value>, CliError> {
    let err = |message: String| CliError::Config {
        path: path.to_path_buf(),
        message,
    };
    let text = std::fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
    let mut top = object(doc, "config file").map_err(err)?;
    object(top.remove(command).unwrap_or(Value::Null), command).map_err(err)
}

/// Merges defaults < file < flags. `flags` serialises only the options the
/// user actually passed.
pub fn resolve<C>(file: Option<&Path>, command: &str, flags: &impl Serialize) -> Result<C, CliError>
where
    C: Serialize + DeserializeOwned + Default,
{
    let usage = |e: serde_json::Error| CliError::Usage(e.to_string());
    let mut merged = object(serde_json::to_value(C::default()).map_err(usage)?, command).map_err(CliError::Usage)?;
    if let Some(path) = file {
        overlay(&mut merged, file_section(path, command)?);
        let snapshot: Result<C, _> = serde_json::from_value(Value::Object(merged.clone()));
        snapshot.map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
    }
    let flags = object(serde_json::to_value(flags).map_err(usage)?, command).map_err(CliError::Usage)?;
    overlay(&mut merged, flags);
    serde_json::from_value(Value::Object(merged)).map_err(usage)
}

/// Parses `start:end:step` or a single count.
pub fn parse_range(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("range {s:?} is not N or START:END:STEP"));
    let parts: Vec<usize> = s
        .split(':')
        .map(|p| p.trim().parse::<usize>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    match parts[..] {
        [n] => Ok(vec![n]),
        [a, b, step] if step > 0 && a <= b => Ok((a..=b).step_by(step).collect()),
        _ => Err(bad()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize, Default, Debug, PartialEq)]
    #[serde(default, deny_unknown_fields)]
    struct Demo {
        a: u32,
        b: String,
    }

    #[derive(Serialize)]
    struct Flags {
        #[serde(skip_serializing_if = "Option::is_none")]
        a: Option<u32>,
    }

    #[test]
    fn precedence() {
        let dir = std::env::temp_dir().join(format!("zaps-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("c.json");
        std::fs::write(&p, r#"{"demo": {"a": 4, "b": "file"}}"#).unwrap();
        let d: Demo = resolve(None, "demo", &Flags { a: None }).unwrap();
        assert_eq!(d, Demo::default());
        let d: Demo = resolve(Some(&p), "demo", &Flags { a: None }).unwrap();
        assert_eq!(d, Demo { a: 4, b: "file".into() });
        let d: Demo = resolve(Some(&p), "demo", &Flags { a: Some(9) }).unwrap();
        assert_eq!(d, Demo { a: 9, b: "file".into() });
        std::fs::write(&p, r#"{"demo": {"c": 1}}"#).unwrap();
        assert!(matches!(resolve::<Demo>(Some(&p), "demo", &Flags { a: None }), Err(CliError::Config { .. })));
        std::fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("10:100:10").unwrap().len(), 10);
        assert_eq!(parse_range("7").unwrap(), vec![7]);
        assert!(parse_range("5:1:1").is_err());
        assert!(parse_range("1:5:0").is_err());
        assert!(parse_range("x").is_err());
    }
}

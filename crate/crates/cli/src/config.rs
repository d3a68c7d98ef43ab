//! Flat `key = value` config files.
//!
//! One pair per line; blank lines and lines starting with `#` are skipped.
//! Keys use lowercase letters, digits, `-` and `_` (`_` reads as `-`).

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("config line {line}: {msg}")]
pub struct ConfigError {
    pub line: usize,
    pub msg: String,
}

pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let err = |msg: String| ConfigError { line: i + 1, msg };
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(err(format!("expected key = value, got '{line}'")));
        };
        let key = k.trim().replace('_', "-");
        let value = v.trim();
        let valid = key.starts_with(|c: char| c.is_ascii_lowercase())
            && key
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-');
        if !valid {
            return Err(err(format!("invalid key '{}'", k.trim())));
        }
        if value.is_empty() {
            return Err(err(format!("empty value for '{key}'")));
        }
        if out.iter().any(|(seen, _)| *seen == key) {
            return Err(err(format!("duplicate key '{key}'")));
        }
        out.push((key, value.to_string()));
    }
    Ok(out)
}

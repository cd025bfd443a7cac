//! Flat `key = value` configuration with per-subcommand defaults.
//!
//! Values come from three layers: built-in defaults, an optional file and
//! command-line flags, later layers winning. Every key must be known to the
//! subcommand.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use anyhow::{Context, Result};

/// An error tied to one configuration key.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyError {
    pub key: String,
    pub message: String,
}

impl KeyError {
    pub fn new(key: &str, message: impl Into<String>) -> Self {
        Self {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for KeyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}`: {}", self.key, self.message)
    }
}

impl std::error::Error for KeyError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Default,
    File,
    Flag,
}

/// Effective settings of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub command: &'static str,
    keys: Vec<&'static str>,
    values: BTreeMap<&'static str, (String, Source)>,
}

impl ExperimentConfig {
    /// Starts from `defaults`, which must list every accepted key.
    pub fn with_defaults(command: &'static str, defaults: &[(&'static str, &str)]) -> Self {
        let keys = defaults.iter().map(|(k, _)| *k).collect();
        let values = defaults
            .iter()
            .map(|(k, v)| (*k, (v.to_string(), Source::Default)))
            .collect();
        Self { command, keys, values }
    }

    fn lookup(&self, key: &str) -> Option<&'static str> {
        self.keys.iter().copied().find(|k| *k == key)
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn merge_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .with_context(|| format!("{origin}:{}: expected `key = value`, got `{line}`", n + 1))?;
            let key = key.trim();
            let known = self.lookup(key).ok_or_else(|| {
                KeyError::new(key, format!("unknown key for `{}` ({origin}:{})", self.command, n + 1))
            })?;
            self.values.insert(known, (value.trim().to_string(), Source::File));
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        self.merge_text(&text, &path.display().to_string())
    }

    /// Applies flag values; `None` leaves the current value.
    pub fn merge_flags(&mut self, flags: Vec<(&'static str, Option<String>)>) -> Result<()> {
        for (key, value) in flags {
            let Some(value) = value else { continue };
            let known = self
                .lookup(key)
                .ok_or_else(|| KeyError::new(key, format!("unknown key for `{}`", self.command)))?;
            self.values.insert(known, (value, Source::Flag));
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> &str {
        &self.values.get(key).unwrap_or_else(|| panic!("key `{key}` has no default")).0
    }

    pub fn source(&self, key: &str) -> Source {
        self.values.get(key).map_or(Source::Default, |v| v.1)
    }

    pub fn f64(&self, key: &str) -> Result<f64, KeyError> {
        let raw = self.raw(key);
        match raw.parse::<f64>() {
            Ok(v) if !v.is_nan() => Ok(v),
            _ => Err(KeyError::new(key, format!("expected a number, got `{raw}`"))),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, KeyError> {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|_| KeyError::new(key, format!("expected a non-negative integer, got `{raw}`")))
    }

    pub fn u64(&self, key: &str) -> Result<u64, KeyError> {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|_| KeyError::new(key, format!("expected a non-negative integer, got `{raw}`")))
    }

    pub fn bool(&self, key: &str) -> Result<bool, KeyError> {
        match self.raw(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(KeyError::new(key, format!("expected true or false, got `{other}`"))),
        }
    }

    /// Comma-separated numbers.
    pub fn list(&self, key: &str) -> Result<Vec<f64>, KeyError> {
        let raw = self.raw(key);
        if raw.trim().is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| KeyError::new(key, format!("expected comma-separated numbers, got `{raw}`")))
            })
            .collect()
    }

    pub fn positive(&self, key: &str) -> Result<f64, KeyError> {
        let v = self.f64(key)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(KeyError::new(key, format!("must be positive, got {v}")))
        }
    }

    /// The effective configuration in the same `key = value` format the
    /// file parser reads.
    pub fn render(&self) -> String {
        let mut out = format!("# metadyn {}\n", self.command);
        for key in &self.keys {
            out.push_str(&format!("{key} = {}\n", self.raw(key)));
        }
        out
    }
}

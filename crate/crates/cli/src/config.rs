//! Flat `key = value` run configuration.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {reason}")]
    BadValue { key: String, reason: String },
    #[error("cannot read config file {path}: {reason}")]
    Unreadable { path: String, reason: String },
}

/// Every key with its default. Solver tolerances are fixed in the library and
/// listed here so that every artifact records them.
pub const DEFAULTS: &[(&str, &str)] = &[
    ("N", "6"),
    ("a_end", "auto"),
    ("a_start", "1"),
    ("bracket", "0.5:26"),
    ("eps_grid", "4e-3:1.5:8"),
    ("fit_min_points", "6"),
    ("format", "json"),
    ("grid_n", "2048"),
    ("lambda", "lambda0"),
    ("lmax", "24"),
    ("m", "1"),
    ("ode_tol", "1e-12"),
    ("out", "."),
    ("points", "auto"),
    ("root_tol", "1e-15"),
    ("s", "0.75"),
    ("sweep_grid_n", "4096"),
    ("tail", "10"),
    ("tau_multipliers", "0.5,1,2"),
];

const FIXED: &[&str] = &["ode_tol", "root_tol", "fit_min_points"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn normalise(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl Default for RunConfig {
    fn default() -> Self {
        let mut values: BTreeMap<String, String> =
            DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        if let Ok(dir) = std::env::var("BN6_OUT") {
            if !dir.is_empty() {
                values.insert("out".into(), dir);
            }
        }
        Self { values }
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = normalise(key);
        let Some((_, default)) = DEFAULTS.iter().find(|(k, _)| *k == key) else {
            return Err(ConfigError::UnknownKey(key));
        };
        let value = value.trim();
        if FIXED.contains(&key.as_str()) && value.parse::<f64>().ok() != default.parse::<f64>().ok() {
            return Err(ConfigError::BadValue { key, reason: format!("fixed at {default} in this build") });
        }
        self.values.insert(key, value.to_string());
        Ok(())
    }

    /// Applies a config file's contents; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1, text: raw.to_string() })?;
            if k.trim().is_empty() {
                return Err(ConfigError::Syntax { line: i + 1, text: raw.to_string() });
            }
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        &self.values[key]
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    fn bad(key: &str, reason: impl Into<String>) -> ConfigError {
        ConfigError::BadValue { key: key.to_string(), reason: reason.into() }
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self.get(key);
        v.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| Self::bad(key, format!("{v:?} is not a number")))
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        let v = self.get(key);
        v.parse::<usize>().map_err(|_| Self::bad(key, format!("{v:?} is not a non-negative integer")))
    }

    /// `None` for `auto`.
    pub fn auto_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        if self.get(key) == "auto" {
            Ok(None)
        } else {
            self.f64(key).map(Some)
        }
    }

    pub fn auto_usize(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        if self.get(key) == "auto" {
            Ok(None)
        } else {
            self.usize(key).map(Some)
        }
    }

    pub fn dim(&self) -> Result<usize, ConfigError> {
        let n = self.usize("N")?;
        if (3..=15).contains(&n) {
            Ok(n)
        } else {
            Err(Self::bad("N", format!("{n} outside 3..=15")))
        }
    }

    /// `(start, ratio, count)` from `start:ratio:count`.
    pub fn eps_grid(&self) -> Result<(f64, f64, usize), ConfigError> {
        let v = self.get("eps_grid");
        let parts: Vec<&str> = v.split(':').collect();
        let err = || Self::bad("eps_grid", format!("{v:?} is not start:ratio:count"));
        if parts.len() != 3 {
            return Err(err());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| err())?;
        let ratio: f64 = parts[1].trim().parse().map_err(|_| err())?;
        let count: usize = parts[2].trim().parse().map_err(|_| err())?;
        if !(start != 0.0 && start.is_finite() && ratio > 0.0 && ratio.is_finite() && count > 0) {
            return Err(err());
        }
        Ok((start, ratio, count))
    }

    pub fn pair(&self, key: &str) -> Result<(f64, f64), ConfigError> {
        let v = self.get(key);
        let err = || Self::bad(key, format!("{v:?} is not lo:hi"));
        let (a, b) = v.split_once(':').ok_or_else(err)?;
        let lo: f64 = a.trim().parse().map_err(|_| err())?;
        let hi: f64 = b.trim().parse().map_err(|_| err())?;
        if lo < hi {
            Ok((lo, hi))
        } else {
            Err(err())
        }
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let v = self.get(key);
        v.split(',')
            .map(|s| s.trim().parse::<f64>().ok().filter(|x| *x > 0.0 && x.is_finite()))
            .collect::<Option<Vec<_>>>()
            .filter(|l| !l.is_empty())
            .ok_or_else(|| Self::bad(key, format!("{v:?} is not a comma list of positive numbers")))
    }

    pub fn is_json(&self) -> Result<bool, ConfigError> {
        match self.get("format") {
            "json" => Ok(true),
            "csv" => Ok(false),
            other => Err(Self::bad("format", format!("{other:?} is neither csv nor json"))),
        }
    }
}

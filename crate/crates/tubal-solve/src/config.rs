//! Flat `key=value` experiment configs with list-valued keys.
//!
//! Any value may be a comma-separated list; the cartesian product of all
//! list keys forms the experiment grid. `#` starts a comment. The
//! measurement count comes from exactly one of `m` (explicit),
//! `m_factor` (`m = m_factor * n * r * k`) or `cm` (`m = 2 * cm * n * r * k`).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Parsed config: every key maps to a list of values.
#[derive(Debug, Clone, Default)]
pub struct Config {
    entries: BTreeMap<String, Vec<String>>,
}

pub const KNOWN_KEYS: &[&str] = &[
    "task", "seed", "repeats", "n", "n1", "n2", "k", "r", "R", "m", "m_factor", "cm", "sigma",
    "b", "lambda", "mu", "noise", "eta", "T", "alpha", "init", "val_frac", "diag_stride", "p",
    "trials", "reseeds", "guard", "truth",
];

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("line {}: expected key=value", lineno + 1));
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return err(format!("line {}: unknown key '{key}'", lineno + 1));
            }
            let values: Vec<String> = value
                .split(',')
                .map(|v| v.trim().to_string())
                .filter(|v| !v.is_empty())
                .collect();
            if values.is_empty() {
                return err(format!("line {}: empty value for '{key}'", lineno + 1));
            }
            if entries.insert(key.clone(), values).is_some() {
                return err(format!("line {}: duplicate key '{key}'", lineno + 1));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn values(&self, key: &str) -> Option<&[String]> {
        self.entries.get(key).map(|v| v.as_slice())
    }

    /// Single-valued lookup; lists are rejected.
    pub fn scalar(&self, key: &str) -> Result<Option<&str>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) if v.len() == 1 => Ok(Some(&v[0])),
            Some(_) => err(format!("key '{key}' must be single-valued")),
        }
    }

    pub fn scalar_or<'a>(&'a self, key: &str, default: &'a str) -> Result<&'a str, ConfigError> {
        Ok(self.scalar(key)?.unwrap_or(default))
    }

    /// Keys that participate in grid expansion, i.e. everything except the
    /// bookkeeping keys.
    fn grid_keys(&self) -> Vec<&str> {
        self.entries
            .keys()
            .map(String::as_str)
            .filter(|k| !matches!(*k, "task" | "seed" | "repeats" | "diag_stride" | "guard"))
            .collect()
    }

    /// Cartesian product over all list-valued keys, in sorted key order.
    pub fn expand_grid(&self) -> Vec<GridPoint> {
        let keys = self.grid_keys();
        let mut points = vec![BTreeMap::new()];
        for key in keys {
            let values = &self.entries[key];
            let mut next = Vec::with_capacity(points.len() * values.len());
            for p in &points {
                for v in values {
                    let mut q = p.clone();
                    q.insert(key.to_string(), v.clone());
                    next.push(q);
                }
            }
            points = next;
        }
        points.into_iter().map(GridPoint).collect()
    }
}

/// One concrete assignment of grid keys.
#[derive(Debug, Clone)]
pub struct GridPoint(pub BTreeMap<String, String>);

impl GridPoint {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        let v = self
            .get(key)
            .ok_or_else(|| ConfigError(format!("missing key '{key}'")))?;
        v.parse()
            .map_err(|_| ConfigError(format!("key '{key}': '{v}' is not an integer")))
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError(format!("key '{key}': '{v}' is not an integer"))),
        }
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self
            .get(key)
            .ok_or_else(|| ConfigError(format!("missing key '{key}'")))?;
        v.parse()
            .map_err(|_| ConfigError(format!("key '{key}': '{v}' is not a number")))
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError(format!("key '{key}': '{v}' is not a number"))),
        }
    }

    /// Stable canonical form, used for seed derivation and row ordering.
    pub fn canonical(&self) -> String {
        self.0
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Measurement count from `m`, `m_factor` or `cm`.
    pub fn measurements(&self, n: usize, r: usize, k: usize) -> Result<usize, ConfigError> {
        let given = [self.get("m"), self.get("m_factor"), self.get("cm")]
            .iter()
            .filter(|v| v.is_some())
            .count();
        if given != 1 {
            return err("exactly one of m, m_factor, cm must be set");
        }
        if self.get("m").is_some() {
            return self.usize("m");
        }
        if self.get("m_factor").is_some() {
            let f = self.f64("m_factor")?;
            return Ok((f * (n * r * k) as f64).round() as usize);
        }
        let c = self.f64("cm")?;
        Ok((2.0 * c * (n * r * k) as f64).round() as usize)
    }
}

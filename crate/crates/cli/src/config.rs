//! Key-value run configuration: `key = value` lines with `#` comments.
//! Command-line flags override anything set here.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

pub const KNOWN_KEYS: [&str; 16] = [
    "day-start-hour",
    "bin-width",
    "min-days",
    "min-cluster-size",
    "min-samples",
    "max-wait-minutes",
    "timeout-hours",
    "grid-lo",
    "grid-hi",
    "grid-step",
    "east-share",
    "peak-share",
    "buffer",
    "capacity",
    "noise-scale",
    "denominator",
];

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!("{}:{}: expected 'key = value'", path.display(), lineno + 1);
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!("{}:{}: unknown config key '{key}'", path.display(), lineno + 1);
            }
            values.insert(key, value.trim().to_string());
        }
        Ok(RunConfig { values })
    }

    /// Flag value if set, else config value, else the built-in default.
    pub fn resolve<T: std::str::FromStr + Copy>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(raw) => raw
                .parse()
                .map_err(|e| anyhow::anyhow!("config key '{key}': bad value '{raw}': {e}")),
            None => Ok(default),
        }
    }
}

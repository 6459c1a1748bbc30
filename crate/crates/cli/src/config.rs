//! Flat `key=value` configuration files merged with command-line flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use herman_core::model::HermanConfig;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

const OUTPUT_KEYS: [&str; 3] = ["out", "log", "report"];

/// Settings after merging the config file with flags; flags win.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    /// Parses `key=value` lines; `#` starts a comment, blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("config line {}: expected key=value, got {raw:?}", i + 1)))?;
            let key = key.trim().replace('-', "_");
            if key.is_empty() {
                return Err(CliError::Config(format!("config line {}: empty key", i + 1)));
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(Self(map))
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    /// Overrides `key` when the flag was given.
    pub fn set<T: ToString>(&mut self, key: &str, flag: Option<T>) {
        if let Some(v) = flag {
            self.0.insert(key.to_string(), v.to_string());
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key).ok_or_else(|| CliError::Config(format!("missing required setting `{key}` (flag --{})", key.replace('_', "-"))))
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::Config(format!("setting `{key}`: cannot parse {v:?}: {e}"))))
            .transpose()
    }

    /// Keeps only the listed keys, rejecting anything else.
    pub fn restrict(&self, allowed: &[&str]) -> Result<(), CliError> {
        let model_keys = model_keys();
        for key in self.0.keys() {
            if !allowed.contains(&key.as_str()) && !model_keys.contains(key) {
                return Err(CliError::Config(format!("unknown setting `{key}`")));
            }
        }
        Ok(())
    }

    /// Builds and validates the model configuration from the model keys.
    pub fn model_config(&self) -> Result<HermanConfig, CliError> {
        let defaults = serde_json::to_value(HermanConfig::default()).expect("config serializes");
        let defaults = defaults.as_object().expect("config is an object");
        let mut obj = Map::new();
        for (key, default) in defaults {
            let Some(raw) = self.get(key) else { continue };
            let value = match default {
                Value::Bool(_) => raw
                    .parse::<bool>()
                    .map(Value::Bool)
                    .map_err(|_| CliError::Config(format!("setting `{key}`: expected true or false, got {raw:?}")))?,
                Value::Number(_) => {
                    let n: f64 = raw.parse().map_err(|_| CliError::Config(format!("setting `{key}`: expected a number, got {raw:?}")))?;
                    if default.is_f64() {
                        Value::from(n)
                    } else if n >= 0.0 && n.fract() == 0.0 {
                        Value::from(n as u64)
                    } else {
                        return Err(CliError::Config(format!("setting `{key}`: expected a non-negative integer, got {raw:?}")));
                    }
                }
                _ => Value::String(raw.to_string()),
            };
            obj.insert(key.clone(), value);
        }
        let config: HermanConfig = serde_json::from_value(Value::Object(obj)).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Renders the settings back into the `key=value` format.
    pub fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Hex SHA-256 of the rendered settings, leaving out where outputs go so
    /// that identical runs into different files share a hash.
    pub fn hash(&self) -> String {
        let mut inputs = self.clone();
        inputs.0.retain(|k, _| !OUTPUT_KEYS.contains(&k.as_str()));
        hex::encode(Sha256::digest(inputs.render().as_bytes()))
    }

    /// Records every model setting explicitly, so a dump is self-contained.
    pub fn with_model(mut self, config: &HermanConfig) -> Self {
        let value = serde_json::to_value(config).expect("config serializes");
        for (k, v) in value.as_object().expect("config is an object") {
            let text = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            self.0.insert(k.clone(), text);
        }
        self
    }
}

fn model_keys() -> Vec<String> {
    serde_json::to_value(HermanConfig::default())
        .expect("config serializes")
        .as_object()
        .expect("config is an object")
        .keys()
        .cloned()
        .collect()
}

//! Experiment configuration: defaults, then a JSON config file, then
//! command-line flags, later sources overriding earlier ones key by key.
//!
//! The resolved configuration is written next to the outputs as
//! `<command>.config.json` and can be passed back with `--config` to repeat
//! the run. Its SHA-256 (over the compact JSON form) is embedded in every
//! artifact.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 1234;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Resolved<T> {
    pub command: String,
    pub seed: u64,
    pub settings: T,
}

impl<T: Serialize> Resolved<T> {
    pub fn hash(&self) -> Result<String> {
        let compact = serde_json::to_vec(self)?;
        let digest = Sha256::digest(&compact);
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn file_name(&self) -> String {
        format!("{}.config.json", self.command)
    }
}

fn merge(base: &mut Map<String, Value>, overlay: Map<String, Value>) {
    for (k, v) in overlay {
        base.insert(k, v);
    }
}

fn as_object(v: Value, what: &str) -> Result<Map<String, Value>> {
    match v {
        Value::Object(m) => Ok(m),
        Value::Null => Ok(Map::new()),
        other => Err(Error::Config(format!("{what} must be a JSON object, got {other}"))),
    }
}

/// Resolve `T` for `command` from its defaults, an optional config file and
/// flag overrides (`None` flags are skipped when serialized).
pub fn resolve<T, F>(
    command: &str,
    config_file: Option<&Path>,
    seed_flag: Option<u64>,
    flags: &F,
) -> Result<Resolved<T>>
where
    T: Serialize + DeserializeOwned + Default,
    F: Serialize,
{
    let mut settings = as_object(serde_json::to_value(T::default())?, "defaults")?;
    let mut seed = DEFAULT_SEED;

    if let Some(path) = config_file {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut file = as_object(serde_json::from_str(&text)?, "config file")?;
        if let Some(c) = file.remove("command") {
            if c.as_str() != Some(command) {
                return Err(Error::Config(format!(
                    "config file is for command {c}, not `{command}`"
                )));
            }
        }
        if let Some(s) = file.remove("seed") {
            seed = s
                .as_u64()
                .ok_or_else(|| Error::Config(format!("seed must be an unsigned integer, got {s}")))?;
        }
        if let Some(s) = file.remove("settings") {
            merge(&mut settings, as_object(s, "settings")?);
        }
        if let Some(k) = file.keys().next() {
            return Err(Error::Config(format!("unknown top-level config key `{k}`")));
        }
    }

    merge(&mut settings, as_object(serde_json::to_value(flags)?, "flags")?);
    if let Some(s) = seed_flag {
        seed = s;
    }
    let settings: T = serde_json::from_value(Value::Object(settings))
        .map_err(|e| Error::Config(format!("invalid {command} settings: {e}")))?;
    Ok(Resolved {
        command: command.to_string(),
        seed,
        settings,
    })
}

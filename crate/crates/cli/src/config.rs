//! JSON configuration files. Keys mirror the long flags with `_` in place of
//! `-`; flags given on the command line take precedence.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};

/// Settings shared by every subcommand.
#[derive(Debug, Default)]
pub struct Common {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Subcommand arguments that can be filled in from a config file.
pub trait Merge: DeserializeOwned + Default {
    /// Fills fields left unset on the command line from `file`.
    fn merge(&mut self, file: Self);
}

#[macro_export]
macro_rules! impl_merge {
    ($ty:ty { $($field:ident),* $(,)? }) => {
        impl $crate::config::Merge for $ty {
            fn merge(&mut self, file: Self) {
                $( if self.$field.is_none() { self.$field = file.$field; } )*
            }
        }
    };
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Reads `path`, splits off the shared keys and deserializes the rest into `T`.
pub fn load<T: Merge>(path: &Path) -> Result<(Common, T), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    parse::<T>(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
}

pub fn parse<T: Merge>(text: &str) -> Result<(Common, T), ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
    let Value::Object(mut map) = value else {
        return Err(ConfigError("top level must be a JSON object".into()));
    };
    let common = Common {
        seed: take(&mut map, "seed")?,
        out: take(&mut map, "out")?,
    };
    let rest = Value::Object(map);
    let args = serde_path_to_error::deserialize(rest).map_err(|e| ConfigError(format!("at `{}`: {}", e.path(), e.inner())))?;
    Ok((common, args))
}

fn take<T: DeserializeOwned>(map: &mut Map<String, Value>, key: &str) -> Result<Option<T>, ConfigError> {
    match map.remove(key) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v)
            .map(Some)
            .map_err(|e| ConfigError(format!("at `{key}`: {e}"))),
    }
}

//! Layered settings: a TOML file supplies defaults and command-line flags
//! override it.
//!
//! Top-level scalar keys apply to every subcommand that knows them. Keys
//! inside a `[subcommand]` table apply to that subcommand only and must be
//! recognised.

use std::fmt;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

/// A problem with the user's input rather than with a computation.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Parsed configuration file.
#[derive(Debug, Default)]
pub struct FileConfig {
    table: Map<String, Value>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| config_error(e.to_string()))?;
        match serde_json::to_value(table)? {
            Value::Object(table) => Ok(Self { table }),
            _ => unreachable!("a TOML document is a table"),
        }
    }

    /// A top-level scalar setting, if present.
    pub fn top(&self, key: &str) -> Option<&Value> {
        self.table.get(key).filter(|v| !v.is_object())
    }

    /// Merges file values for `section` under the non-null fields of `flags`
    /// and deserializes the result.
    pub fn resolve<T>(&self, section: &str, flags: &T) -> anyhow::Result<T>
    where
        T: Serialize + DeserializeOwned + Default,
    {
        let known = match serde_json::to_value(T::default())? {
            Value::Object(m) => m,
            _ => unreachable!("settings serialize as maps"),
        };
        let mut merged = Map::new();
        for (k, v) in &self.table {
            if !v.is_object() && known.contains_key(k) {
                merged.insert(k.clone(), v.clone());
            }
        }
        match self.table.get(section) {
            Some(Value::Object(m)) => {
                for (k, v) in m {
                    if !known.contains_key(k) {
                        return Err(config_error(format!("unknown key `{k}` in [{section}]")));
                    }
                    merged.insert(k.clone(), v.clone());
                }
            }
            Some(_) => return Err(config_error(format!("`{section}` must be a table"))),
            None => {}
        }
        if let Value::Object(m) = serde_json::to_value(flags)? {
            merged.extend(m.into_iter().filter(|(_, v)| !v.is_null()));
        }
        serde_json::from_value(Value::Object(merged))
            .map_err(|e| config_error(format!("invalid setting for `{section}`: {e}")))
    }
}

/// Accepts either a single value or a list.
pub fn one_or_many<'de, D, T>(d: D) -> Result<Option<Vec<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Either<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(Option::<Either<T>>::deserialize(d)?.map(|e| match e {
        Either::One(x) => vec![x],
        Either::Many(v) => v,
    }))
}

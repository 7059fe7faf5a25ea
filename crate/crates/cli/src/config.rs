//! Flat `key = value` configuration with dotted section names.
//!
//! ```text
//! # comment
//! scenario = simulate
//! grid.dim = 1
//! initial.density.kind = cosine
//! initial.density.mode = 1, 0, 0
//! ```
//!
//! Keys are unique; blank lines and `#` comments are skipped. Every key has
//! to be consumed by the scenario, so typos surface as validation errors.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::{Map, Number, Value};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("field `{key}`: {message}")]
    Field { key: String, message: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl ConfigError {
    pub fn field(key: &str, message: impl Into<String>) -> Self {
        ConfigError::Field {
            key: key.to_string(),
            message: message.into(),
        }
    }
}

pub type ConfigResult<T> = Result<T, ConfigError>;

#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
    /// Directory relative paths in values are resolved against.
    base: PathBuf,
    used: RefCell<BTreeSet<String>>,
}

impl Config {
    pub fn parse(text: &str) -> ConfigResult<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    message: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = key.trim();
            let valid = !key.is_empty()
                && key.split('.').all(|part| {
                    !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
                });
            if !valid {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    message: format!("malformed key `{key}`"),
                });
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    message: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(Self {
            entries,
            ..Self::default()
        })
    }

    pub fn load(path: &Path) -> ConfigResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        let v = self.entries.get(key)?;
        self.used.borrow_mut().insert(key.to_string());
        Some(v)
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn has_section(&self, prefix: &str) -> bool {
        let dotted = format!("{prefix}.");
        self.entries.keys().any(|k| k.starts_with(&dotted))
    }

    pub fn string(&self, key: &str) -> ConfigResult<String> {
        self.raw(key)
            .map(str::to_string)
            .ok_or_else(|| ConfigError::field(key, "missing"))
    }

    pub fn parsed<T: std::str::FromStr>(&self, key: &str) -> ConfigResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| ConfigError::field(key, format!("`{v}`: {e}"))))
            .transpose()
    }

    pub fn parsed_or<T: std::str::FromStr>(&self, key: &str, default: T) -> ConfigResult<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn required<T: std::str::FromStr>(&self, key: &str) -> ConfigResult<T>
    where
        T::Err: std::fmt::Display,
    {
        self.parsed(key)?.ok_or_else(|| ConfigError::field(key, "missing"))
    }

    /// Comma-separated list.
    pub fn list<T: std::str::FromStr>(&self, key: &str) -> ConfigResult<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .map(|s| {
                let s = s.trim();
                s.parse::<T>().map_err(|e| ConfigError::field(key, format!("`{s}`: {e}")))
            })
            .collect::<ConfigResult<Vec<T>>>()
            .map(Some)
    }

    /// A path value, resolved against the directory of the config file.
    pub fn path(&self, key: &str) -> ConfigResult<Option<PathBuf>> {
        Ok(self.raw(key).map(|v| {
            let p = PathBuf::from(v);
            if p.is_absolute() {
                p
            } else {
                self.base.join(p)
            }
        }))
    }

    /// Deserializes every `prefix.*` key into `T`, typing values as numbers,
    /// numeric lists, or strings. Keys named in `pad3` are padded with zeros
    /// to three entries so lower-dimensional configs can list fewer.
    pub fn section<T: DeserializeOwned>(&self, prefix: &str, pad3: &[&str]) -> ConfigResult<T> {
        let dotted = format!("{prefix}.");
        let mut map = Map::new();
        let keys: Vec<String> = self.entries.keys().filter(|k| k.starts_with(&dotted)).cloned().collect();
        for key in keys {
            let name = &key[dotted.len()..];
            let raw = self.raw(&key).unwrap_or_default();
            let mut value = typed_value(raw);
            if pad3.contains(&name) {
                let mut items = match value {
                    Value::Array(items) => items,
                    other => vec![other],
                };
                if items.len() > 3 {
                    return Err(ConfigError::field(&key, "at most three entries"));
                }
                items.resize(3, Value::from(0));
                value = Value::Array(items);
            }
            map.insert(name.to_string(), value);
        }
        if map.is_empty() {
            return Err(ConfigError::field(prefix, "section missing"));
        }
        serde_json::from_value(Value::Object(map)).map_err(|e| ConfigError::field(prefix, e.to_string()))
    }

    /// Keys never read.
    pub fn unused(&self) -> Vec<String> {
        let used = self.used.borrow();
        self.entries.keys().filter(|k| !used.contains(*k)).cloned().collect()
    }

    pub fn reject_unused(&self) -> ConfigResult<()> {
        match self.unused().first() {
            Some(k) => Err(ConfigError::field(k, "unknown key")),
            None => Ok(()),
        }
    }
}

fn scalar_value(s: &str) -> Value {
    if let Ok(i) = s.parse::<i64>() {
        return Value::from(i);
    }
    if let Ok(u) = s.parse::<u64>() {
        return Value::from(u);
    }
    match s.parse::<f64>().ok().and_then(Number::from_f64) {
        Some(n) => Value::Number(n),
        None => Value::String(s.to_string()),
    }
}

fn typed_value(raw: &str) -> Value {
    if raw.contains(',') {
        Value::Array(raw.split(',').map(|s| scalar_value(s.trim())).collect())
    } else {
        scalar_value(raw)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ekp_core::profiles::DensityProfile;

    #[test]
    fn parses_comments_sections_and_lists() {
        let cfg = Config::parse("# c\n\n a.b = 3 \nx = 1.5, 2\ninitial.density.kind = cosine\ninitial.density.mean = 1\ninitial.density.amplitude = 0.5\ninitial.density.mode = 2\n").unwrap();
        assert_eq!(cfg.required::<usize>("a.b").unwrap(), 3);
        assert_eq!(cfg.list::<f64>("x").unwrap().unwrap(), vec![1.5, 2.0]);
        let p: DensityProfile = cfg.section("initial.density", &["mode", "center"]).unwrap();
        assert_eq!(p, DensityProfile::Cosine { mean: 1.0, amplitude: 0.5, mode: [2, 0, 0] });
        assert!(cfg.unused().is_empty());
    }

    #[test]
    fn errors_name_the_line_or_field() {
        let e = Config::parse("a = 1\nnonsense\n").unwrap_err();
        assert!(e.to_string().starts_with("line 2"));
        let e = Config::parse("a = 1\na = 2\n").unwrap_err();
        assert!(e.to_string().contains("duplicate key `a`"));
        assert!(Config::parse("a..b = 1").is_err());
        let cfg = Config::parse("grid.n = many\nspare = 1").unwrap();
        let e = cfg.required::<usize>("grid.n").unwrap_err();
        assert!(e.to_string().contains("`grid.n`"));
        assert!(cfg.required::<usize>("grid.dim").unwrap_err().to_string().contains("missing"));
        assert!(cfg.reject_unused().unwrap_err().to_string().contains("`spare`"));
    }

    #[test]
    fn section_errors_name_the_prefix() {
        let cfg = Config::parse("initial.density.kind = cosine\ninitial.density.mean = 1").unwrap();
        let e = cfg.section::<DensityProfile>("initial.density", &["mode"]).unwrap_err();
        assert!(e.to_string().contains("initial.density"), "{e}");
    }
}

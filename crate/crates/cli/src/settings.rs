//! Config resolution: built-in defaults, then the config file, then flags.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use expca::config::MODEL_KEYS;
use expca::{Config, ModelSpec};

use crate::CliError;

pub struct Settings {
    merged: Config,
    resolved: Config,
}

impl Settings {
    /// `defaults` sit under the file, `overrides` (from flags) on top.
    /// Keys outside `allowed` and [`MODEL_KEYS`] (when `model` is set) are
    /// rejected.
    pub fn load(
        defaults: &[(&str, &str)],
        file: Option<&Path>,
        overrides: &[(String, String)],
        allowed: &[&str],
        model: bool,
    ) -> Result<Self, CliError> {
        let mut merged = Config::new();
        for (k, v) in defaults {
            merged.set(k, v);
        }
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            merged.merge(&Config::parse(&text).map_err(CliError::usage)?);
        }
        for (k, v) in overrides {
            merged.set(k, v);
        }
        let mut keys: Vec<&str> = allowed.to_vec();
        if model {
            keys.extend(MODEL_KEYS);
        }
        merged.check_known(&keys).map_err(CliError::usage)?;
        Ok(Settings {
            merged,
            resolved: Config::new(),
        })
    }

    pub fn value<T: FromStr + Display>(&mut self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let v = self.merged.get_or(key, default).map_err(CliError::usage)?;
        self.resolved.set(key, &v);
        Ok(v)
    }

    pub fn optional<T: FromStr + Display>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        let v: Option<T> = self.merged.get(key).map_err(CliError::usage)?;
        if let Some(v) = &v {
            self.resolved.set(key, v);
        }
        Ok(v)
    }

    pub fn required<T: FromStr + Display>(&mut self, key: &str, flag: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.optional(key)?
            .ok_or_else(|| CliError::Usage(format!("{flag} (config key '{key}') is required")))
    }

    pub fn list<T: FromStr + Display + Clone>(&mut self, key: &str, default: &[T]) -> Result<Vec<T>, CliError>
    where
        T::Err: Display,
    {
        let v = self
            .merged
            .get_list(key)
            .map_err(CliError::usage)?
            .unwrap_or_else(|| default.to_vec());
        let text: Vec<String> = v.iter().map(ToString::to_string).collect();
        self.resolved.set(key, text.join(","));
        Ok(v)
    }

    pub fn path(&mut self, key: &str, flag: &str) -> Result<PathBuf, CliError> {
        let p: String = self.required(key, flag)?;
        Ok(PathBuf::from(p))
    }

    pub fn model(&mut self) -> Result<ModelSpec, CliError> {
        let spec = ModelSpec::from_config(&self.merged).map_err(CliError::usage)?;
        spec.write_config(&mut self.resolved);
        Ok(spec)
    }

    /// The values actually used, every key filled in.
    pub fn resolved(&self) -> String {
        self.resolved.to_string()
    }
}

/// Files are collected in memory and written only once the command has
/// succeeded, so a failing run leaves nothing behind.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    pub fn add(&mut self, path: PathBuf, bytes: Vec<u8>) {
        self.files.push((path, bytes));
    }

    pub fn write(self) -> Result<(), CliError> {
        for (path, bytes) in self.files {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
            }
            fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        }
        Ok(())
    }
}

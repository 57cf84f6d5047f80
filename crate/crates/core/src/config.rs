//! Plain-text `key = value` configuration with `#` comments and dotted keys.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::models::{Family, ModelSpec};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected 'key = value', got '{line}'", i + 1))
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Config(format!("line {}: invalid key '{key}'", i + 1)));
            }
            cfg.set(key, value.trim());
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| Error::Config(format!("{key} = '{v}': {e}")))
            })
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        self.get(key)?
            .ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<T>()
                            .map_err(|e| Error::Config(format!("{key}: '{s}': {e}")))
                    })
                    .collect()
            })
            .transpose()
    }

    /// Entries of `other` replace those in `self`.
    pub fn merge(&mut self, other: &Config) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    /// Rejects keys outside `allowed`; entries ending in `.*` allow a prefix.
    pub fn check_known(&self, allowed: &[&str]) -> Result<()> {
        for key in self.entries.keys() {
            let ok = allowed.iter().any(|a| match a.strip_suffix('*') {
                Some(prefix) => key.starts_with(prefix),
                None => a == key,
            });
            if !ok {
                return Err(Error::Config(format!("unknown key '{key}'")));
            }
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

pub const MODEL_KEYS: [&str; 8] = [
    "model.family",
    "model.d",
    "model.p",
    "model.alpha",
    "model.theta",
    "model.dirichlet_params",
    "model.noise_sigma",
    "model.rotation_angle_bound",
];

impl ModelSpec {
    /// Reads `model.*` keys; unspecified fields take the family defaults.
    pub fn from_config(cfg: &Config) -> Result<Self> {
        let family: Family = cfg.get_or("model.family", Family::Dirichlet)?;
        let d = cfg.get_or("model.d", 10usize)?;
        let p = cfg.get_or("model.p", 2usize)?;
        let default_alpha = if family == Family::Gumbel { 2.0 } else { 1.0 };
        let alpha = cfg.get_or("model.alpha", default_alpha)?;
        let mut spec = match family {
            Family::Gumbel => ModelSpec::gumbel(d, p, alpha, 2.0),
            Family::Dirichlet => ModelSpec::dirichlet(d, p, alpha),
            Family::DirichletRotated => ModelSpec::dirichlet_rotated(d, p, alpha),
        };
        if let Some(theta) = cfg.get("model.theta")? {
            spec.theta = theta;
        }
        if let Some(params) = cfg.get_list("model.dirichlet_params")? {
            spec.dirichlet_params = params;
        }
        if let Some(s) = cfg.get("model.noise_sigma")? {
            spec.noise_sigma = s;
        }
        if let Some(b) = cfg.get("model.rotation_angle_bound")? {
            spec.rotation_angle_bound = b;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn write_config(&self, cfg: &mut Config) {
        cfg.set("model.family", self.family);
        cfg.set("model.d", self.d);
        cfg.set("model.p", self.p);
        cfg.set("model.alpha", self.alpha);
        cfg.set("model.noise_sigma", self.noise_sigma);
        match self.family {
            Family::Gumbel => cfg.set("model.theta", self.theta),
            _ => {
                let params: Vec<String> = self.dirichlet_params.iter().map(f64::to_string).collect();
                cfg.set("model.dirichlet_params", params.join(","));
                if self.family == Family::DirichletRotated {
                    cfg.set("model.rotation_angle_bound", self.rotation_angle_bound);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parsing() {
        let cfg = Config::parse("# comment\nmodel.family = gumbel\n\n  n=1000 # trailing\nk.grid = 10, 20,30\n").unwrap();
        assert_eq!(cfg.raw("model.family"), Some("gumbel"));
        assert_eq!(cfg.get::<usize>("n").unwrap(), Some(1000));
        assert_eq!(cfg.get_list::<usize>("k.grid").unwrap(), Some(vec![10, 20, 30]));
        assert!(cfg.get::<usize>("model.family").is_err());
        assert!(Config::parse("novalue\n").is_err());
        assert!(Config::parse("a b = 1\n").is_err());
        assert!(cfg.check_known(&["model.*", "n"]).is_err());
        assert!(cfg.check_known(&["model.*", "n", "k.grid"]).is_ok());
    }

    #[test]
    fn display_round_trips() {
        let cfg = Config::parse("b = 2\na = 1\n").unwrap();
        assert_eq!(cfg.to_string(), "a = 1\nb = 2\n");
        assert_eq!(Config::parse(&cfg.to_string()).unwrap(), cfg);
    }

    #[test]
    fn model_spec_round_trip() {
        for spec in [
            ModelSpec::gumbel(10, 2, 2.0, 2.0),
            ModelSpec::dirichlet(10, 2, 1.0).with_noise(0.5),
            ModelSpec::dirichlet_rotated(6, 3, 1.5).with_params(vec![1.0, 2.0, 3.0]),
        ] {
            let mut cfg = Config::new();
            spec.write_config(&mut cfg);
            assert_eq!(ModelSpec::from_config(&cfg).unwrap(), spec);
        }
        let bad = Config::parse("model.family = hr\n").unwrap();
        assert!(ModelSpec::from_config(&bad).is_err());
        let bad = Config::parse("model.p = 10\n").unwrap();
        assert!(ModelSpec::from_config(&bad).is_err());
    }
}

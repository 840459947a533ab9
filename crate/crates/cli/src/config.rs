//! Flat `key = value` configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Every key must be
//! known to the command that reads it; anything else is rejected so that a
//! typo cannot silently fall back to a default.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Parsed key-value pairs plus a record of every value a command resolved.
#[derive(Clone, Debug, Default)]
pub struct Config {
    raw: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut raw = BTreeMap::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config(format!(
                    "line {}: expected `key = value`",
                    lineno + 1
                )));
            };
            let key = k.trim();
            if key.is_empty() {
                return Err(CliError::Config(format!("line {}: empty key", lineno + 1)));
            }
            if raw.insert(key.to_string(), v.trim().to_string()).is_some() {
                return Err(CliError::Config(format!(
                    "line {}: duplicate key `{key}`",
                    lineno + 1
                )));
            }
        }
        Ok(Config {
            raw,
            resolved: BTreeMap::new(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Overrides (or adds) a key, as done for command-line flags.
    pub fn set(&mut self, key: &str, value: impl Display) {
        self.raw.insert(key.to_string(), value.to_string());
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), CliError> {
        let unknown: Vec<&str> = self
            .raw
            .keys()
            .map(String::as_str)
            .filter(|k| !allowed.contains(k))
            .collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(format!(
                "unknown key(s) {}; accepted keys: {}",
                unknown.join(", "),
                allowed.join(", ")
            )))
        }
    }

    fn record(&mut self, key: &str, value: String) {
        self.resolved.insert(key.to_string(), value);
    }

    pub fn get<T: FromStr + Display>(&mut self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        let v = match self.raw.get(key) {
            Some(s) => s
                .parse::<T>()
                .map_err(|e| CliError::Config(format!("key `{key}`: cannot parse `{s}`: {e}")))?,
            None => default,
        };
        self.record(key, v.to_string());
        Ok(v)
    }

    pub fn get_opt<T: FromStr + Display>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        match self.raw.get(key).cloned() {
            Some(s) => {
                let v = s.parse::<T>().map_err(|e| {
                    CliError::Config(format!("key `{key}`: cannot parse `{s}`: {e}"))
                })?;
                self.record(key, v.to_string());
                Ok(Some(v))
            }
            None => Ok(None),
        }
    }

    /// Comma-separated list; an empty value is an empty list.
    pub fn get_list<T: FromStr + Display + Clone>(
        &mut self,
        key: &str,
        default: &[T],
    ) -> Result<Vec<T>, CliError>
    where
        T::Err: Display,
    {
        let v: Vec<T> = match self.raw.get(key) {
            Some(s) => s
                .split(',')
                .map(str::trim)
                .filter(|p| !p.is_empty())
                .map(|p| {
                    p.parse::<T>().map_err(|e| {
                        CliError::Config(format!("key `{key}`: cannot parse `{p}`: {e}"))
                    })
                })
                .collect::<Result<_, _>>()?,
            None => default.to_vec(),
        };
        let shown: Vec<String> = v.iter().map(ToString::to_string).collect();
        self.record(key, shown.join(","));
        Ok(v)
    }

    /// Every resolved key with the value actually used, sorted by key.
    pub fn resolved(&self) -> &BTreeMap<String, String> {
        &self.resolved
    }
}

/// Learning-rate rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EtaRule {
    Explicit(f64),
    /// `eta = 1 / (L sqrt(T))`
    OneOverLSqrtT,
}

/// Horizon rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepsRule {
    Explicit(usize),
    EqualN,
    SqrtN,
}

impl StepsRule {
    pub fn steps(self, n: usize) -> usize {
        match self {
            StepsRule::Explicit(t) => t,
            StepsRule::EqualN => n,
            StepsRule::SqrtN => ((n as f64).sqrt().ceil() as usize).max(1),
        }
    }
}

impl EtaRule {
    pub fn eta(self, lipschitz: f64, steps: usize) -> f64 {
        match self {
            EtaRule::Explicit(e) => e,
            EtaRule::OneOverLSqrtT => 1.0 / (lipschitz * (steps as f64).sqrt()),
        }
    }
}

/// Reads `eta_rule` (with `eta` when explicit) and `t_rule` (with `steps`).
pub fn rules(cfg: &mut Config) -> Result<(EtaRule, StepsRule), CliError> {
    let eta_rule: String = cfg.get("eta_rule", "one-over-l-sqrt-t".to_string())?;
    let eta = match eta_rule.as_str() {
        "explicit" => {
            let e: f64 = cfg
                .get_opt("eta")?
                .ok_or_else(|| CliError::Config("eta_rule = explicit needs `eta`".into()))?;
            if !(e > 0.0) {
                return Err(CliError::Config(format!("eta must be positive, got {e}")));
            }
            EtaRule::Explicit(e)
        }
        "one-over-l-sqrt-t" => EtaRule::OneOverLSqrtT,
        other => {
            return Err(CliError::Config(format!(
                "eta_rule must be `explicit` or `one-over-l-sqrt-t`, got `{other}`"
            )))
        }
    };
    let t_rule: String = cfg.get("t_rule", "equal-n".to_string())?;
    let steps = match t_rule.as_str() {
        "explicit" => {
            let t: usize = cfg
                .get_opt("steps")?
                .ok_or_else(|| CliError::Config("t_rule = explicit needs `steps`".into()))?;
            if t == 0 {
                return Err(CliError::Config("steps must be >= 1".into()));
            }
            StepsRule::Explicit(t)
        }
        "equal-n" => StepsRule::EqualN,
        "sqrt-n" => StepsRule::SqrtN,
        other => {
            return Err(CliError::Config(format!(
                "t_rule must be `explicit`, `equal-n` or `sqrt-n`, got `{other}`"
            )))
        }
    };
    Ok((eta, steps))
}

pub fn require_positive(name: &str, v: usize) -> Result<(), CliError> {
    if v == 0 {
        return Err(CliError::Config(format!("{name} must be >= 1")));
    }
    Ok(())
}

pub fn require_probability(name: &str, v: f64) -> Result<(), CliError> {
    if !(v > 0.0 && v < 1.0) {
        return Err(CliError::Config(format!(
            "{name} must lie in (0, 1), got {v}"
        )));
    }
    Ok(())
}

pub fn require_counts(name: &str, v: &[usize]) -> Result<(), CliError> {
    if v.is_empty() || v.contains(&0) {
        return Err(CliError::Config(format!(
            "{name} must be a non-empty list of positive counts"
        )));
    }
    Ok(())
}

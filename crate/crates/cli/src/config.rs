//! Flat `key = value` configuration files.
//!
//! One key per line; `#` starts a comment; blank lines are ignored. Every
//! key must be consumed by the command that reads the file, so typos are
//! reported instead of silently ignored.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use densiwae::{ContaminationLaw, KernelSpec, LatentLawSpec};

use crate::error::{CliError, CliResult};

#[derive(Debug, Default)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
}

impl KvConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("line {}: expected `key = value`, got `{}`", lineno + 1, raw.trim())))?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(CliError::config(format!("line {}: empty key", lineno + 1)));
            }
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(CliError::config(format!("line {}: duplicate key `{}`", lineno + 1, key)));
            }
        }
        Ok(KvConfig {
            entries,
            used: RefCell::default(),
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| CliError::config(format!("key `{}`: cannot parse `{}`: {}", key, v, e))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> CliResult<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.raw(key) else { return Ok(None) };
        v.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|e| CliError::config(format!("key `{}`: cannot parse `{}`: {}", key, s.trim(), e)))
            })
            .collect::<CliResult<Vec<T>>>()
            .map(Some)
    }

    /// Errors on any key that no getter asked for.
    pub fn finish(&self) -> CliResult<()> {
        let used = self.used.borrow();
        let unknown: Vec<&str> = self.entries.keys().filter(|k| !used.contains(*k)).map(String::as_str).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(CliError::config(format!("unknown keys: {}", unknown.join(", "))))
        }
    }
}

/// `gaussian`, `beta` (Beta(0.5, 0.8)), `beta(a;b)`, `exp` (rate 1) or
/// `exp(rate)`, with dimension `k`.
pub fn parse_latent(s: &str, k: usize) -> CliResult<LatentLawSpec> {
    let (name, args) = split_call(s)?;
    let spec = match (name, args.as_slice()) {
        ("gaussian", []) => LatentLawSpec::gaussian(k),
        ("beta", []) => LatentLawSpec::beta_default(k),
        ("beta", [a, b]) => LatentLawSpec::BetaMarginals { a: *a, b: *b, k },
        ("exp", []) => LatentLawSpec::exp_default(k),
        ("exp", [rate]) => LatentLawSpec::ExpMarginals { rate: *rate, k },
        _ => return Err(CliError::config(format!("unknown latent law `{}`", s))),
    };
    spec.validate()?;
    Ok(spec)
}

/// `gaussian(bw)` or `energy(alpha)`.
pub fn parse_kernel(s: &str) -> CliResult<KernelSpec> {
    let (name, args) = split_call(s)?;
    let k = match (name, args.as_slice()) {
        ("gaussian", [bw]) => KernelSpec::gaussian(*bw)?,
        ("energy", [alpha]) => KernelSpec::energy(*alpha)?,
        _ => return Err(CliError::config(format!("unknown kernel `{}`", s))),
    };
    Ok(k)
}

/// `gaussian`, `cauchy` or `dirichlet(a;b;c)`.
pub fn parse_contamination_law(s: &str) -> CliResult<ContaminationLaw> {
    let (name, args) = split_call(s)?;
    match (name, args.as_slice()) {
        ("gaussian", []) => Ok(ContaminationLaw::Gaussian),
        ("cauchy", []) => Ok(ContaminationLaw::Cauchy),
        ("dirichlet", a) if !a.is_empty() => Ok(ContaminationLaw::Dirichlet(a.to_vec())),
        _ => Err(CliError::config(format!("unknown contamination law `{}`", s))),
    }
}

fn split_call(s: &str) -> CliResult<(&str, Vec<f64>)> {
    let s = s.trim();
    let Some(open) = s.find('(') else { return Ok((s, Vec::new())) };
    let inner = s[open + 1..]
        .strip_suffix(')')
        .ok_or_else(|| CliError::config(format!("unbalanced parentheses in `{}`", s)))?;
    let args = inner
        .split(';')
        .map(|a| a.trim().parse::<f64>().map_err(|e| CliError::config(format!("`{}` in `{}`: {}", a, s, e))))
        .collect::<CliResult<Vec<f64>>>()?;
    Ok((s[..open].trim(), args))
}

//! Run configuration: defaults, flat `key=value` files and flag overrides.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use sppsband::spps::{DEFAULT_DEPTH, DEFAULT_INTERVALS, MIN_INTERVALS};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format `{other}` (expected csv or json)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// Fully resolved settings shared by every subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub k0: f64,
    pub s: f64,
    pub k2_min: f64,
    pub k2_max: f64,
    pub samples: usize,
    pub grid_n: usize,
    pub spps_terms: usize,
    pub tol: f64,
    pub out_path: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k0: 1.0,
            s: 0.1,
            k2_min: -2.0,
            k2_max: 10.0,
            samples: 500,
            grid_n: DEFAULT_INTERVALS,
            spps_terms: DEFAULT_DEPTH,
            tol: 1e-6,
            out_path: None,
            format: Format::Csv,
        }
    }
}

/// Partial settings from one source; `None` leaves the lower layer in place.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub k0: Option<f64>,
    pub s: Option<f64>,
    pub k2_min: Option<f64>,
    pub k2_max: Option<f64>,
    pub samples: Option<usize>,
    pub grid_n: Option<usize>,
    pub spps_terms: Option<usize>,
    pub tol: Option<f64>,
    pub out_path: Option<PathBuf>,
    pub format: Option<Format>,
}

impl Overrides {
    /// Parses a flat `key=value` file; `#` starts a comment, keys may use `-` or `_`.
    pub fn parse(text: &str, origin: &str) -> Result<Self, CliError> {
        let mut o = Overrides::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = || format!("{origin}:{}", i + 1);
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("{}: expected key=value, got `{line}`", at())))?;
            let key = key.trim().replace('-', "_");
            let value = value.trim();
            let bad = |e: String| CliError::Usage(format!("{}: invalid value for `{key}`: {e}", at()));
            match key.as_str() {
                "k0" => o.k0 = Some(parse_num(value).map_err(bad)?),
                "s" => o.s = Some(parse_num(value).map_err(bad)?),
                "k2_min" => o.k2_min = Some(parse_num(value).map_err(bad)?),
                "k2_max" => o.k2_max = Some(parse_num(value).map_err(bad)?),
                "samples" => o.samples = Some(parse_num(value).map_err(bad)?),
                "grid_n" => o.grid_n = Some(parse_num(value).map_err(bad)?),
                "spps_terms" => o.spps_terms = Some(parse_num(value).map_err(bad)?),
                "tol" => o.tol = Some(parse_num(value).map_err(bad)?),
                "out" => o.out_path = Some(PathBuf::from(value)),
                "format" => o.format = Some(value.parse().map_err(bad)?),
                _ => return Err(CliError::Usage(format!("{}: unknown key `{key}`", at()))),
            }
        }
        Ok(o)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    fn apply(self, cfg: &mut RunConfig) {
        macro_rules! take {
            ($($field:ident),*) => { $(if let Some(v) = self.$field { cfg.$field = v; })* };
        }
        take!(k0, s, k2_min, k2_max, samples, grid_n, spps_terms, tol, format);
        if self.out_path.is_some() {
            cfg.out_path = self.out_path;
        }
    }
}

fn parse_num<T: FromStr>(value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e: T::Err| e.to_string())
}

impl RunConfig {
    /// Layers `file` then `flags` over the defaults and validates the result.
    pub fn resolve(file: Option<Overrides>, flags: Overrides) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(f) = file {
            f.apply(&mut cfg);
        }
        flags.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let fail = |m: String| Err(CliError::Usage(m));
        if !(self.k0.is_finite() && self.k0 > 0.0) {
            return fail(format!("k0 must be positive and finite, got {}", self.k0));
        }
        if !self.s.is_finite() {
            return fail(format!("s must be finite, got {}", self.s));
        }
        if !(self.k2_min.is_finite() && self.k2_max.is_finite() && self.k2_min < self.k2_max) {
            return fail(format!("need k2-min < k2-max, got [{}, {}]", self.k2_min, self.k2_max));
        }
        if self.samples < 2 {
            return fail(format!("samples must be at least 2, got {}", self.samples));
        }
        if self.grid_n < MIN_INTERVALS || self.grid_n % 2 != 0 {
            return fail(format!(
                "grid-n must be even and at least {MIN_INTERVALS}, got {}",
                self.grid_n
            ));
        }
        if self.spps_terms < 1 {
            return fail("spps-terms must be at least 1".into());
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return fail(format!("tol must be positive, got {}", self.tol));
        }
        Ok(())
    }
}

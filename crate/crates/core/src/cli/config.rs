use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::CliError;
use crate::entanglement::DEFAULT_ARTIFACT_THRESHOLD;
use crate::entropy::DEFAULT_EPS;
use crate::states::{AtomState, BlochParams};
use crate::sweep::Diagnostics;

/// Keys accepted in a config file. They mirror the long flag names.
pub const KNOWN_KEYS: &[&str] = &[
    "n-bar",
    "n-f",
    "atom",
    "t-max",
    "dt",
    "eps",
    "artifact-threshold",
    "diagnostics",
    "grid",
    "workers",
    "out",
];

/// Field cutoff: an explicit `n_f` or automatic truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldCutoff {
    Auto,
    Fixed(usize),
}

impl FromStr for FieldCutoff {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(FieldCutoff::Auto);
        }
        match s.parse::<usize>() {
            Ok(n) if n >= 1 => Ok(FieldCutoff::Fixed(n)),
            _ => Err(format!("expected `auto` or an integer >= 1, got `{s}`")),
        }
    }
}

impl fmt::Display for FieldCutoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldCutoff::Auto => f.write_str("auto"),
            FieldCutoff::Fixed(n) => write!(f, "{n}"),
        }
    }
}

/// Initial atom as written on the command line: `ground`, `excited`, or
/// `r=..,theta=..,phi=..` (phi defaults to 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AtomSpec {
    Ground,
    Excited,
    Bloch { r: f64, theta: f64, phi: f64 },
}

impl AtomSpec {
    pub fn to_state(self) -> crate::Result<AtomState> {
        Ok(match self {
            AtomSpec::Ground => AtomState::Ground,
            AtomSpec::Excited => AtomState::Excited,
            AtomSpec::Bloch { r, theta, phi } => AtomState::Bloch(BlochParams::new(r, theta, phi)?),
        })
    }
}

impl FromStr for AtomSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        match s.to_ascii_lowercase().as_str() {
            "ground" | "g" => return Ok(AtomSpec::Ground),
            "excited" | "e" => return Ok(AtomSpec::Excited),
            _ => {}
        }
        let (mut r, mut theta, mut phi) = (None, None, 0.0);
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got `{part}`"))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|_| format!("`{}` is not a number", value.trim()))?;
            match key.trim() {
                "r" => r = Some(value),
                "theta" => theta = Some(value),
                "phi" => phi = value,
                other => return Err(format!("unknown atom parameter `{other}`")),
            }
        }
        match (r, theta) {
            (Some(r), Some(theta)) => {
                BlochParams::new(r, theta, phi).map_err(|e| e.to_string())?;
                Ok(AtomSpec::Bloch { r, theta, phi })
            }
            _ => Err("expected `ground`, `excited` or `r=..,theta=..[,phi=..]`".into()),
        }
    }
}

/// Sweep resolution `THETAxR`, e.g. `51x51`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GridShape {
    pub n_theta: usize,
    pub n_r: usize,
}

impl FromStr for GridShape {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .trim()
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected THETAxR such as 51x51, got `{s}`"))?;
        let parse = |v: &str| match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(format!("grid sizes must be integers >= 1, got `{s}`")),
        };
        Ok(GridShape {
            n_theta: parse(a)?,
            n_r: parse(b)?,
        })
    }
}

impl fmt::Display for GridShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.n_theta, self.n_r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub n_bar: f64,
    pub n_f: FieldCutoff,
    pub atom: AtomSpec,
    pub t_max: f64,
    pub dt: f64,
    pub eps: f64,
    pub artifact_threshold: f64,
    pub diagnostics: Diagnostics,
    pub grid: GridShape,
    pub workers: Option<usize>,
    pub output_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_bar: 0.1,
            n_f: FieldCutoff::Auto,
            atom: AtomSpec::Ground,
            t_max: 25.0,
            dt: 0.01,
            eps: DEFAULT_EPS,
            artifact_threshold: DEFAULT_ARTIFACT_THRESHOLD,
            diagnostics: Diagnostics::ALL,
            grid: GridShape {
                n_theta: 51,
                n_r: 51,
            },
            workers: None,
            output_path: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::Config(format!(
                    "{name}: must be positive and finite, got {v}"
                )))
            }
        };
        positive("n-bar", self.n_bar)?;
        positive("dt", self.dt)?;
        positive("eps", self.eps)?;
        positive("artifact-threshold", self.artifact_threshold)?;
        if !(self.t_max >= self.dt && self.t_max.is_finite()) {
            return Err(CliError::Config(format!(
                "t-max: must be finite and >= dt ({}), got {}",
                self.dt, self.t_max
            )));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers: must be >= 1".into()));
        }
        Ok(())
    }
}

/// Flat `key = value` file. Blank lines and `#` comments are ignored.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("config: cannot read {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "config line {}: expected key = value, got `{line}`",
                    lineno + 1
                ))
            })?;
            let key = key.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::Config(format!(
                    "config line {}: unknown key `{key}`",
                    lineno + 1
                )));
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(Self { entries })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: fmt::Display,
    {
        self.entries
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| CliError::Config(format!("{key}: {e} (from config file)")))
            })
            .transpose()
    }
}

/// Flag values; `None` falls through to the config file, then the default.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub n_bar: Option<f64>,
    pub n_f: Option<FieldCutoff>,
    pub atom: Option<AtomSpec>,
    pub t_max: Option<f64>,
    pub dt: Option<f64>,
    pub eps: Option<f64>,
    pub artifact_threshold: Option<f64>,
    pub diagnostics: Option<Diagnostics>,
    pub grid: Option<GridShape>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

pub fn resolve(file: &ConfigFile, flags: Overrides) -> Result<RunConfig, CliError> {
    let d = RunConfig::default();
    let cfg = RunConfig {
        n_bar: flags.n_bar.or(file.get("n-bar")?).unwrap_or(d.n_bar),
        n_f: flags.n_f.or(file.get("n-f")?).unwrap_or(d.n_f),
        atom: flags.atom.or(file.get("atom")?).unwrap_or(d.atom),
        t_max: flags.t_max.or(file.get("t-max")?).unwrap_or(d.t_max),
        dt: flags.dt.or(file.get("dt")?).unwrap_or(d.dt),
        eps: flags.eps.or(file.get("eps")?).unwrap_or(d.eps),
        artifact_threshold: flags
            .artifact_threshold
            .or(file.get("artifact-threshold")?)
            .unwrap_or(d.artifact_threshold),
        diagnostics: flags
            .diagnostics
            .or(file.get("diagnostics")?)
            .unwrap_or(d.diagnostics),
        grid: flags.grid.or(file.get("grid")?).unwrap_or(d.grid),
        workers: flags.workers.or(file.get("workers")?),
        output_path: flags.out.or(file.get("out")?),
    };
    cfg.validate()?;
    Ok(cfg)
}

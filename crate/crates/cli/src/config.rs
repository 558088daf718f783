//! Run configuration shared by the flag parser and JSON config files.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use symext::protocols::{Direction, ProtocolName};
use symext::quantum::MAX_DEPOLARIZING_ERROR;
use symext::SdpSettings;

/// Environment variable naming the directory for relative output paths.
pub const OUT_DIR_ENV: &str = "SYMEXT_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Bound,
    Sweep,
    Cutoff,
    CheckExtendible,
}

/// `four-state`, `six-state` or `custom:<path>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ProtocolChoice {
    Builtin(ProtocolName),
    Custom(PathBuf),
}

impl FromStr for ProtocolChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "four-state" => Ok(Self::Builtin(ProtocolName::FourState)),
            "six-state" => Ok(Self::Builtin(ProtocolName::SixState)),
            _ => match s.strip_prefix("custom:") {
                Some(path) if !path.is_empty() => Ok(Self::Custom(PathBuf::from(path))),
                _ => Err(format!(
                    "unknown protocol '{s}' (expected four-state, six-state or custom:<path>)"
                )),
            },
        }
    }
}

impl TryFrom<String> for ProtocolChoice {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ProtocolChoice> for String {
    fn from(p: ProtocolChoice) -> Self {
        p.to_string()
    }
}

impl fmt::Display for ProtocolChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Builtin(ProtocolName::FourState) => f.write_str("four-state"),
            Self::Builtin(ProtocolName::SixState) => f.write_str("six-state"),
            Self::Builtin(ProtocolName::Custom) => f.write_str("custom"),
            Self::Custom(path) => write!(f, "custom:{}", path.display()),
        }
    }
}

/// Uniform grid `start:stop:count`, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.start + step * i as f64).collect()
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, count] = parts[..] else {
            return Err(format!("grid '{s}' is not start:stop:count"));
        };
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("'{v}' is not a number"));
        let count: usize = count
            .trim()
            .parse()
            .map_err(|_| format!("grid count '{count}' is not a positive integer"))?;
        if count == 0 {
            return Err("grid count must be at least 1".into());
        }
        Ok(Self {
            start: num(start)?,
            stop: num(stop)?,
            count,
        })
    }
}

impl TryFrom<String> for Grid {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Grid> for String {
    fn from(g: Grid) -> Self {
        format!("{}:{}:{}", g.start, g.stop, g.count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub gap: f64,
    pub feasibility: f64,
    pub max_iter: usize,
    /// Bracket half-width for the cutoff search.
    pub cutoff: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let s = SdpSettings::default();
        Self {
            gap: s.gap_tol,
            feasibility: s.feas_tol,
            max_iter: s.max_iter,
            cutoff: 1e-4,
        }
    }
}

impl Tolerances {
    pub fn solver_settings(&self) -> SdpSettings {
        SdpSettings {
            gap_tol: self.gap,
            feas_tol: self.feasibility,
            max_iter: self.max_iter,
            ..SdpSettings::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub protocol: ProtocolChoice,
    #[serde(default)]
    pub e: Option<f64>,
    #[serde(default)]
    pub grid: Option<Grid>,
    /// Overrides the direction stored in a custom protocol file.
    #[serde(default)]
    pub direction: Option<Direction>,
    #[serde(default = "yes")]
    pub source_constraint: bool,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default)]
    pub jobs: Option<usize>,
    #[serde(default)]
    pub emit_gnuplot: bool,
}

fn yes() -> bool {
    true
}

impl RunConfig {
    pub fn new(command: Command, protocol: ProtocolChoice) -> Self {
        Self {
            command,
            protocol,
            e: None,
            grid: None,
            direction: None,
            source_constraint: true,
            tolerances: Tolerances::default(),
            out: None,
            format: OutputFormat::Csv,
            jobs: None,
            emit_gnuplot: false,
        }
    }

    /// Parses a JSON config; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let ProtocolChoice::Custom(p) = &mut cfg.protocol {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Checks everything that can be checked without solving.
    pub fn validate(&self) -> Result<(), String> {
        let custom = matches!(self.protocol, ProtocolChoice::Custom(_));
        let check_e = |e: f64| {
            if (0.0..=MAX_DEPOLARIZING_ERROR).contains(&e) {
                Ok(())
            } else {
                Err(format!("error rate {e} outside [0, {MAX_DEPOLARIZING_ERROR:.6}]"))
            }
        };
        match self.command {
            Command::Bound | Command::CheckExtendible => {
                if self.grid.is_some() {
                    return Err("--grid only applies to sweep".into());
                }
                match (self.e, custom) {
                    (Some(e), false) => check_e(e)?,
                    (None, false) => return Err("--e is required for built-in protocols".into()),
                    (Some(_), true) => return Err("--e does not apply to custom protocols".into()),
                    (None, true) => {}
                }
            }
            Command::Sweep => {
                if custom {
                    return Err("sweep needs a built-in protocol".into());
                }
                if self.e.is_some() {
                    return Err("sweep takes --grid, not --e".into());
                }
                let grid = self.grid.ok_or("sweep requires --grid start:stop:count")?;
                for v in [grid.start, grid.stop] {
                    check_e(v)?;
                }
            }
            Command::Cutoff => {
                if custom {
                    return Err("cutoff needs a built-in protocol".into());
                }
                if self.e.is_some() || self.grid.is_some() {
                    return Err("cutoff takes neither --e nor --grid".into());
                }
                if !self.tolerances.cutoff.is_finite() || self.tolerances.cutoff <= 0.0 {
                    return Err(format!("cutoff tolerance {} must be positive", self.tolerances.cutoff));
                }
            }
        }
        let t = &self.tolerances;
        if [t.gap, t.feasibility].iter().any(|v| v.is_nan() || *v <= 0.0) || t.max_iter == 0 {
            return Err("solver tolerances must be positive".into());
        }
        if self.jobs == Some(0) {
            return Err("--jobs must be at least 1".into());
        }
        if self.emit_gnuplot && (self.command != Command::Sweep || self.out.is_none()) {
            return Err("--emit-gnuplot needs sweep with --out".into());
        }
        if self.emit_gnuplot && self.format != OutputFormat::Csv {
            return Err("--emit-gnuplot needs CSV output".into());
        }
        Ok(())
    }

    /// `out` resolved against [`OUT_DIR_ENV`] when relative.
    pub fn output_path(&self) -> Option<PathBuf> {
        let out = self.out.as_ref()?;
        if out.is_relative() {
            if let Some(dir) = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()) {
                return Some(PathBuf::from(dir).join(out));
            }
        }
        Some(out.clone())
    }
}

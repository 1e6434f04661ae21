//! Run configuration: defaults, the `BELLWIGNER_SEED` fallback, a flat JSON
//! config file, and command-line overrides, applied in that order.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bellwigner::interpretations::{ScaleKind, DEFAULT_DURATION_S, DEFAULT_RATE_PER_PARTICLE};
use serde_json::Value;
use thiserror::Error;

pub const SEED_ENV: &str = "BELLWIGNER_SEED";

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {message}")]
    Read { path: PathBuf, message: String },
    #[error("config file {path} is not valid JSON: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("config file {path} must hold a JSON object of scalars")]
    NotAnObject { path: PathBuf },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}` expects {expected}, found {found}")]
    TypeMismatch {
        key: String,
        expected: &'static str,
        found: String,
    },
    #[error("{SEED_ENV}={0:?} is not an unsigned 64-bit integer")]
    BadEnvSeed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// A CHSH setting pair written as two digits, `i` for Alice then `j` for Bob.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Setting {
    pub alice: usize,
    pub bob: usize,
}

impl FromStr for Setting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.as_bytes() {
            [a @ (b'0' | b'1'), b @ (b'0' | b'1')] => Ok(Self {
                alice: (a - b'0') as usize,
                bob: (b - b'0') as usize,
            }),
            _ => Err(format!("setting must be one of 00, 01, 10, 11, got `{s}`")),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.alice, self.bob)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Scale {
    #[default]
    Micro,
    Macro,
}

impl From<Scale> for ScaleKind {
    fn from(s: Scale) -> Self {
        match s {
            Scale::Micro => ScaleKind::Microscopic,
            Scale::Macro => ScaleKind::Macroscopic,
        }
    }
}

/// Everything a subcommand needs besides its name.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub shots: u64,
    pub trials: u64,
    pub n_particles: f64,
    pub duration_s: f64,
    pub rate_per_particle: f64,
    pub setting: Setting,
    pub scale: Scale,
    pub format: Format,
    pub output_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            shots: 10_000,
            trials: 1_000_000,
            n_particles: 100.0,
            duration_s: DEFAULT_DURATION_S,
            rate_per_particle: DEFAULT_RATE_PER_PARTICLE,
            setting: Setting::default(),
            scale: Scale::default(),
            format: Format::default(),
            output_path: None,
        }
    }
}

/// Values set explicitly on the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub trials: Option<u64>,
    pub n_particles: Option<f64>,
    pub duration_s: Option<f64>,
    pub rate_per_particle: Option<f64>,
    pub setting: Option<Setting>,
    pub scale: Option<Scale>,
    pub format: Option<Format>,
    pub output_path: Option<PathBuf>,
}

fn type_name(v: &Value) -> String {
    match v {
        Value::Null => "null".into(),
        Value::Bool(_) => "a boolean".into(),
        Value::Number(n) => format!("the number {n}"),
        Value::String(s) => format!("the string {s:?}"),
        Value::Array(_) => "an array".into(),
        Value::Object(_) => "an object".into(),
    }
}

fn mismatch(key: &str, expected: &'static str, v: &Value) -> ConfigError {
    ConfigError::TypeMismatch {
        key: key.to_string(),
        expected,
        found: type_name(v),
    }
}

fn as_u64(key: &str, v: &Value) -> Result<u64, ConfigError> {
    v.as_u64()
        .ok_or_else(|| mismatch(key, "an unsigned integer", v))
}

fn as_f64(key: &str, v: &Value) -> Result<f64, ConfigError> {
    v.as_f64().ok_or_else(|| mismatch(key, "a number", v))
}

fn as_str<'a>(key: &str, v: &'a Value, expected: &'static str) -> Result<&'a str, ConfigError> {
    v.as_str().ok_or_else(|| mismatch(key, expected, v))
}

fn parse_enum<T: clap::ValueEnum>(
    key: &str,
    v: &Value,
    expected: &'static str,
) -> Result<T, ConfigError> {
    let s = as_str(key, v, expected)?;
    T::from_str(s, false).map_err(|_| mismatch(key, expected, v))
}

impl RunConfig {
    /// Applies a parsed config document on top of `self`.
    pub fn merge_document(&mut self, doc: &Value, path: &Path) -> Result<(), ConfigError> {
        let map = doc.as_object().ok_or_else(|| ConfigError::NotAnObject {
            path: path.to_path_buf(),
        })?;
        for (key, v) in map {
            match key.as_str() {
                "seed" => self.seed = as_u64(key, v)?,
                "shots" => self.shots = as_u64(key, v)?,
                "trials" => self.trials = as_u64(key, v)?,
                "n_particles" => self.n_particles = as_f64(key, v)?,
                "duration_s" => self.duration_s = as_f64(key, v)?,
                "rate_per_particle" => self.rate_per_particle = as_f64(key, v)?,
                "setting" => {
                    let expected = "one of \"00\", \"01\", \"10\", \"11\"";
                    self.setting = as_str(key, v, expected)?
                        .parse()
                        .map_err(|_| mismatch(key, expected, v))?
                }
                "scale" => self.scale = parse_enum(key, v, "\"micro\" or \"macro\"")?,
                "format" => self.format = parse_enum(key, v, "\"json\" or \"csv\"")?,
                "output_path" => {
                    self.output_path = Some(PathBuf::from(as_str(key, v, "a path string")?))
                }
                _ => return Err(ConfigError::UnknownKey(key.clone())),
            }
        }
        Ok(())
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = o.$field.clone() { self.$field = v; })*
            };
        }
        take!(
            seed,
            shots,
            trials,
            n_particles,
            duration_s,
            rate_per_particle,
            setting,
            scale,
            format
        );
        if let Some(p) = &o.output_path {
            self.output_path = Some(p.clone());
        }
    }
}

/// Reads a config file on top of the defaults.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    merge_file(&mut cfg, path)?;
    Ok(cfg)
}

fn merge_file(cfg: &mut RunConfig, path: &Path) -> Result<(), ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    cfg.merge_document(&doc, path)
}

/// Defaults, then the environment seed, then the config file, then flags.
pub fn resolve(
    env_seed: Option<&str>,
    config_path: Option<&Path>,
    overrides: &Overrides,
) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    if let Some(s) = env_seed {
        cfg.seed = s
            .trim()
            .parse()
            .map_err(|_| ConfigError::BadEnvSeed(s.to_string()))?;
    }
    if let Some(path) = config_path {
        merge_file(&mut cfg, path)?;
    }
    cfg.apply(overrides);
    Ok(cfg)
}

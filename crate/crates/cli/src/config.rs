//! JSON configuration files for each subcommand.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use twodelay::{Nonlinearity, Parameters, RandomGShape};

/// A config or input file that could not be parsed. Maps to exit code 1.
#[derive(Debug)]
pub struct InputError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{line}: {}", self.path.display(), self.message),
            None => write!(f, "{}: {}", self.path.display(), self.message),
        }
    }
}

impl std::error::Error for InputError {}

impl InputError {
    pub fn new(path: &Path, line: Option<usize>, message: impl Into<String>) -> Self {
        Self {
            path: path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T, InputError> {
    let text = fs::read_to_string(path).map_err(|e| InputError::new(path, None, e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| {
        let line = (e.line() > 0).then_some(e.line());
        // serde_json appends its own "at line L column C"; keep only the column
        let msg = e.to_string();
        let msg = msg
            .rsplit_once(" at line ")
            .map_or(msg.as_str(), |(head, _)| head)
            .to_string();
        InputError::new(path, line, format!("{msg} (column {})", e.column()))
    })
}

/// Resolve `p` against the directory holding the config file.
pub fn relative_to(config: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        return p.to_path_buf();
    }
    config
        .parent()
        .map_or_else(|| p.to_path_buf(), |dir| dir.join(p))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Steps,
    Renewal,
}

/// Where the initial history comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSource {
    Constant {
        value: f64,
    },
    /// A segment CSV as written by `build-init`.
    Csv {
        path: PathBuf,
    },
    /// A D0 segment from a random age profile.
    RandomD0 {
        seed: u64,
        #[serde(default)]
        shape: RandomGShape,
    },
    /// A random D0 segment raised to the given `H0`.
    Lifted {
        seed: u64,
        h0: f64,
        #[serde(default)]
        shape: RandomGShape,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub params: Parameters,
    pub nonlinearity: Nonlinearity,
    pub initial: InitialSource,
    pub t_end: f64,
    pub h: f64,
    #[serde(default)]
    pub scheme: Scheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub params: Parameters,
    pub nonlinearity: Nonlinearity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AgeSource {
    Random {
        seed: u64,
        #[serde(default)]
        shape: RandomGShape,
    },
    /// CSV with columns `a,g` on `[0, tau]`.
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuildConfig {
    pub params: Parameters,
    pub nonlinearity: Nonlinearity,
    pub h: f64,
    pub g: AgeSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    pub params: Parameters,
    pub nonlinearity: Nonlinearity,
    /// Finest step; the study also runs at `2h` and `4h`.
    pub h: f64,
    pub t_end: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub shape: RandomGShape,
}

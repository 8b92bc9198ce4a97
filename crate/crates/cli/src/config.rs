use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Text,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TheoryConfig {
    pub m: u32,
    pub d: u32,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        TheoryConfig { m: 3, d: 6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bounds {
    pub loop_bound: u32,
    /// Highest total ε-degree kept in printed expansions.
    pub truncation_order: i64,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds { loop_bound: 3, truncation_order: ckren::pfalg::DEFAULT_TRUNCATION }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub closed_form: f64,
    pub expansion_fit: f64,
    pub finite_part: f64,
    pub scaling_degree: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { closed_form: 1e-8, expansion_fit: 1e-5, finite_part: 1e-6, scaling_degree: 0.05 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CacheConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub format: Format,
}

/// Every setting of a run. Loaded from TOML, then overridden by the
/// environment and by flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub theory: TheoryConfig,
    pub bounds: Bounds,
    pub tolerances: Tolerances,
    pub cache: CacheConfig,
    pub output: OutputConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

pub const ENV_CACHE_DIR: &str = "CKREN_CACHE_DIR";
pub const ENV_THREADS: &str = "CKREN_THREADS";

impl RunConfig {
    pub fn from_toml(s: &str) -> Result<Self, CliError> {
        let c: RunConfig = toml::from_str(s).map_err(|e| CliError::Input(format!("config: {e}")))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let s = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Self::from_toml(&s)
    }

    /// Apply `CKREN_CACHE_DIR` and `CKREN_THREADS` from `env`.
    pub fn apply_env(&mut self, env: impl Fn(&str) -> Option<String>) -> Result<(), CliError> {
        if let Some(d) = env(ENV_CACHE_DIR).filter(|d| !d.is_empty()) {
            self.cache.dir = Some(PathBuf::from(d));
        }
        if let Some(t) = env(ENV_THREADS).filter(|t| !t.is_empty()) {
            let n = t.parse().map_err(|_| CliError::Input(format!("{ENV_THREADS}={t} is not a thread count")))?;
            self.threads = Some(n);
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Input(m.to_string()));
        if self.theory.m < 3 || self.theory.d == 0 {
            return bad("theory needs m >= 3 and d >= 1");
        }
        if self.bounds.loop_bound == 0 || self.bounds.truncation_order <= 0 {
            return bad("bounds must be positive");
        }
        let t = &self.tolerances;
        if [t.closed_form, t.expansion_fit, t.finite_part, t.scaling_degree].iter().any(|x| !(*x > 0.0)) {
            return bad("tolerances must be positive");
        }
        if self.threads == Some(0) {
            return bad("thread count must be positive");
        }
        Ok(())
    }
}

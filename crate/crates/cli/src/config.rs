//! Optional TOML configuration. Each table mirrors one subcommand and each
//! key mirrors the long flag of the same name with `-` replaced by `_`.
//! Flags given on the command line take precedence over file values.
//!
//! ```toml
//! [fit]
//! input = "data.csv"
//! space = "hill+power"
//! draws = 20000
//! seed = 7
//!
//! [simulate]
//! truth = ["hill", "power"]
//! n = [50, 100]
//! methods = ["nlfs_hill_os", "bspline"]
//! reps = 25
//!
//! [summarize]
//! level = 0.9
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub fit: FitFile,
    #[serde(default)]
    pub simulate: SimulateFile,
    #[serde(default)]
    pub summarize: SummarizeFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitFile {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub method: Option<String>,
    pub space: Option<String>,
    pub shrinkage: Option<String>,
    pub draws: Option<usize>,
    pub burn_in: Option<usize>,
    pub knots: Option<usize>,
    pub tau2_min: Option<f64>,
    pub tau2_max: Option<f64>,
    pub intercept_mean: Option<f64>,
    pub intercept_var: Option<f64>,
    pub grid_points: Option<usize>,
    pub level: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateFile {
    pub truth: Option<Vec<String>>,
    pub n: Option<Vec<usize>>,
    pub sigma2: Option<Vec<f64>>,
    pub methods: Option<Vec<String>>,
    pub reps: Option<usize>,
    pub workers: Option<usize>,
    pub draws: Option<usize>,
    pub burn_in: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummarizeFile {
    pub draws: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub level: Option<f64>,
}

impl ConfigFile {
    /// An absent path yields the empty configuration.
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
    }
}

//! Run configuration: a single JSON document. Unknown keys are errors, so a
//! typo in an exponent name cannot silently invalidate a run.

use std::path::PathBuf;
use std::sync::Arc;

use serde::Deserialize;

use groundstate::field::{FieldError, RadialGrid};
use groundstate::solver::ShootingConfig;
use groundstate::SystemParams;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub params: SystemParams,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub grid: GridConfig,
    /// Check names for `verify`; empty means the regime-appropriate set.
    #[serde(default)]
    pub checks: Vec<String>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    /// Optional decay-fit window for the analysis checks.
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
    /// Optional σ ladder for the critical blow-up fit.
    #[serde(default)]
    pub blowup_ladder: Option<Vec<f64>>,
    /// Load an existing state (u/v/diagnostics emitted by `solve`) from this
    /// directory instead of solving afresh.
    #[serde(default)]
    pub state_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Shooting,
    Picard,
    Both,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub method: Method,
    pub shooting: ShootingConfig,
    pub picard: PicardConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Shooting,
            shooting: ShootingConfig::default(),
            picard: PicardConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PicardConfig {
    pub damping: f64,
    pub max_iters: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self {
            damping: groundstate::solver::PICARD_DEFAULT_DAMPING,
            max_iters: 400,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub rho_min: f64,
    pub rho_max: f64,
    pub points: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            rho_min: 1e-4,
            rho_max: 1e6,
            points: 4096,
        }
    }
}

impl GridConfig {
    pub fn build(&self, n: u32) -> Result<Arc<RadialGrid>, FieldError> {
        RadialGrid::new(n, self.rho_min, self.rho_max, self.points)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![Format::Csv, Format::Json],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// One axis of a parameter sweep.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RangeSpec {
    /// A single value.
    Value(f64),
    /// An explicit list.
    List(Vec<f64>),
    /// `count` evenly spaced values on `[start, stop]`.
    Linspace { start: f64, stop: f64, count: usize },
    /// Derived axis; only `"critical-hyperbola"` (for `p`) is recognized.
    Derived(String),
}

impl RangeSpec {
    pub fn values(&self) -> Option<Vec<f64>> {
        match self {
            RangeSpec::Value(x) => Some(vec![*x]),
            RangeSpec::List(xs) => Some(xs.clone()),
            RangeSpec::Linspace { start, stop, count } => {
                if *count == 0 {
                    return Some(Vec::new());
                }
                if *count == 1 {
                    return Some(vec![*start]);
                }
                let step = (stop - start) / (*count as f64 - 1.0);
                Some((0..*count).map(|i| start + i as f64 * step).collect())
            }
            RangeSpec::Derived(_) => None,
        }
    }

    pub fn is_hyperbola(&self) -> bool {
        matches!(self, RangeSpec::Derived(s) if s == "critical-hyperbola")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub n: Vec<u32>,
    pub p: RangeSpec,
    pub q: RangeSpec,
    pub r: RangeSpec,
    pub s: RangeSpec,
}

/// `p` on the critical hyperbola `1/a + 1/b = (n-2)/n` as a function of the
/// other exponents.
pub fn hyperbola_p(n: f64, q: f64, r: f64, s: f64) -> f64 {
    ((n - 2.0) * (r - 1.0) * (s - 1.0) + 2.0 * (q - s - r + 2.0)) / ((n - 2.0) * q - 2.0)
}

pub fn load_config(path: &std::path::Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| format!("invalid config {}: {e}", path.display()))?;
    config
        .params
        .validate()
        .map_err(|e| format!("invalid params in {}: {e}", path.display()))?;
    Ok(config)
}

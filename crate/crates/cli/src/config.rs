//! Suite configuration, read from TOML. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const SEED_ENV: &str = "NLDIRAC_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    pub dimensions: Vec<usize>,
    pub grid: GridConfig,
    pub quadrature: QuadratureConfig,
    /// Replacement limits keyed by check id; only one-sided checks accept one.
    pub tolerances: BTreeMap<String, f64>,
    pub bubbles: Vec<BubbleConfig>,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Half-width of the residual box in units of the bubble scale.
    pub half_width: f64,
    /// Points per axis on the fine grid; the per-dimension default when absent.
    pub points: Option<usize>,
    pub stencil_order: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureConfig {
    pub sphere_order: usize,
    pub volume_spacing: f64,
    pub series_terms: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BubbleConfig {
    /// Restricts the entry to one dimension; required when `center` is given.
    pub dimension: Option<usize>,
    pub scale: f64,
    pub center: Option<Vec<f64>>,
    /// Multiplies the ground-state amplitude; anything but 1 injects a fault.
    pub amplitude_scale: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub report: Option<PathBuf>,
    /// Per-record wall time; off by default so reports are reproducible byte for byte.
    pub record_runtime: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            dimensions: vec![2, 3],
            grid: GridConfig::default(),
            quadrature: QuadratureConfig::default(),
            tolerances: BTreeMap::new(),
            bubbles: Vec::new(),
            output: OutputConfig::default(),
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            half_width: 4.0,
            points: None,
            stencil_order: 2,
        }
    }
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            sphere_order: 64,
            volume_spacing: 0.1,
            series_terms: 60,
        }
    }
}

impl Default for BubbleConfig {
    fn default() -> Self {
        Self {
            dimension: None,
            scale: 1.0,
            center: None,
            amplitude_scale: 1.0,
        }
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must be positive, got {v}")))
    }
}

impl SuiteConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let config: SuiteConfig = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Applies the seed override from the environment, if set.
    pub fn with_env_seed(mut self) -> Result<Self, CliError> {
        if let Ok(raw) = std::env::var(SEED_ENV) {
            self.seed = raw
                .trim()
                .parse()
                .map_err(|_| invalid(format!("{SEED_ENV} must be a decimal integer, got {raw:?}")))?;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.dimensions.is_empty() {
            return Err(CliError::NothingToVerify);
        }
        for &n in &self.dimensions {
            if !(2..=nldirac::clifford::MAX_DIM).contains(&n) {
                return Err(invalid(format!(
                    "dimension {n} outside the supported range 2..={}",
                    nldirac::clifford::MAX_DIM
                )));
            }
        }
        let mut sorted = self.dimensions.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.dimensions.len() {
            return Err(invalid("dimensions must not repeat"));
        }
        positive("grid.half_width", self.grid.half_width)?;
        if let Some(m) = self.grid.points {
            if m < 9 || m.is_multiple_of(2) {
                return Err(invalid(format!("grid.points must be odd and >= 9, got {m}")));
            }
        }
        if !matches!(self.grid.stencil_order, 2 | 4) {
            return Err(invalid(format!(
                "grid.stencil_order must be 2 or 4, got {}",
                self.grid.stencil_order
            )));
        }
        if self.quadrature.sphere_order == 0 || self.quadrature.sphere_order > nldirac::geometry::MAX_SPHERE_ORDER {
            return Err(invalid(format!(
                "quadrature.sphere_order must lie in 1..={}",
                nldirac::geometry::MAX_SPHERE_ORDER
            )));
        }
        positive("quadrature.volume_spacing", self.quadrature.volume_spacing)?;
        if self.quadrature.volume_spacing >= 1.0 {
            return Err(invalid("quadrature.volume_spacing must be below 1"));
        }
        if self.quadrature.series_terms == 0 || self.quadrature.series_terms > nldirac::greenkernel::MAX_DEGREE {
            return Err(invalid(format!(
                "quadrature.series_terms must lie in 1..={}",
                nldirac::greenkernel::MAX_DEGREE
            )));
        }
        for (id, tol) in &self.tolerances {
            positive(&format!("tolerances.{id}"), *tol)?;
        }
        for (i, b) in self.bubbles.iter().enumerate() {
            positive(&format!("bubbles[{i}].scale"), b.scale)?;
            positive(&format!("bubbles[{i}].amplitude_scale"), b.amplitude_scale)?;
            if let Some(n) = b.dimension {
                if !self.dimensions.contains(&n) {
                    return Err(invalid(format!("bubbles[{i}] targets dimension {n}, which is not selected")));
                }
            }
            if let Some(c) = &b.center {
                match b.dimension {
                    None => return Err(invalid(format!("bubbles[{i}].center needs a dimension"))),
                    Some(n) if c.len() != n => {
                        return Err(invalid(format!(
                            "bubbles[{i}].center has {} components, dimension is {n}",
                            c.len()
                        )))
                    }
                    _ => {}
                }
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(invalid(format!("bubbles[{i}].center must be finite")));
                }
            }
        }
        Ok(())
    }

    /// Bubble entries that apply to dimension `n`; the standard bubble when none do.
    pub fn bubbles_for(&self, n: usize) -> Vec<BubbleConfig> {
        let chosen: Vec<BubbleConfig> = self
            .bubbles
            .iter()
            .filter(|b| b.dimension.is_none_or(|d| d == n))
            .cloned()
            .collect();
        if chosen.is_empty() {
            vec![BubbleConfig::default()]
        } else {
            chosen
        }
    }
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fbm::{FbmMethod, HurstIndex, TimeGrid};
use crate::fisher::FisherOptions;
use crate::mckean::ModelSpec;

/// One JSON document describing a rate sweep. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub hurst: Vec<f64>,
    /// Noise levels, strictly decreasing in `(0, 1)`.
    pub epsilons: Vec<f64>,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    pub n_steps: usize,
    /// Particles per interacting system.
    pub n_particles: usize,
    /// Fluctuation samples per cell; a multiple of `n_particles`, the
    /// quotient being the number of independent particle systems.
    pub n_samples: usize,
    pub seed: u64,
    /// Observation time; defaults to `t_end`.
    #[serde(default)]
    pub target_time: Option<f64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub fbm_method: FbmMethod,
    /// Run the pure-noise control next to the main model.
    #[serde(default = "default_true")]
    pub control: bool,
    #[serde(default)]
    pub validation: ValidationOptions,
}

fn default_t_end() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub fisher: FisherOptions,
    /// A Fisher estimate enters the rate fit only above this multiple of the
    /// pure-noise floor.
    pub floor_multiplier: f64,
    /// The floor is the control estimate plus this many standard errors.
    pub floor_stderrs: f64,
    pub tolerances: Tolerances,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            fisher: FisherOptions { bandwidth_scale: 1.5, variance_correction: true, ..FisherOptions::default() },
            floor_multiplier: 3.0,
            floor_stderrs: 2.0,
            tolerances: Tolerances::default(),
        }
    }
}

/// Half-widths of the accepted slope intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub strong: f64,
    pub moment: f64,
    pub fisher: f64,
    pub linearisation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { strong: 0.25, moment: 0.3, fisher: 0.5, linearisation: 0.5 }
    }
}

/// Settings for the consolidated property checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationOptions {
    /// Multiplies the kernel constant; anything but 1 is a deliberate fault.
    pub kernel_constant_scale: f64,
    /// Run the `H = 1/2` checks instead of the fractional ones.
    pub brownian_sanity: bool,
    pub fbm_paths: usize,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { kernel_constant_scale: 1.0, brownian_sanity: false, fbm_paths: 4000 }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.t_end, self.n_steps)
    }

    pub fn target(&self) -> f64 {
        self.target_time.unwrap_or(self.t_end)
    }

    pub fn replicas(&self) -> usize {
        self.n_samples / self.n_particles.max(1)
    }

    pub fn hurst_indices(&self) -> Result<Vec<HurstIndex>> {
        self.hurst.iter().map(|&h| HurstIndex::new(h)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.hurst.is_empty() {
            return bad("hurst list is empty".into());
        }
        self.hurst_indices().map_err(|e| Error::Config(e.to_string()))?;
        if self.epsilons.len() < super::fit::MIN_FIT_POINTS {
            return bad(format!("need at least {} epsilons for a rate fit", super::fit::MIN_FIT_POINTS));
        }
        if self.epsilons.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            return bad("epsilons must lie in (0, 1)".into());
        }
        if self.epsilons.windows(2).any(|w| w[1] >= w[0]) {
            return bad("epsilons must be strictly decreasing".into());
        }
        if self.n_steps == 0 || self.n_particles < 2 || self.n_samples == 0 {
            return bad("n_steps, n_samples must be positive and n_particles at least 2".into());
        }
        if self.n_samples % self.n_particles != 0 {
            return bad(format!("n_samples {} is not a multiple of n_particles {}", self.n_samples, self.n_particles));
        }
        let grid = self.grid().map_err(|e| Error::Config(e.to_string()))?;
        let t = self.target();
        if !(t > 0.0 && t <= self.t_end) {
            return bad(format!("target_time {t} must lie in (0, t_end]"));
        }
        grid.index_of(t).map_err(|_| Error::Config(format!("target_time {t} is not a grid point")))?;
        let est = &self.estimator;
        if !(est.floor_multiplier > 0.0 && est.floor_stderrs >= 0.0) {
            return bad("floor_multiplier must be positive and floor_stderrs non-negative".into());
        }
        if !(est.fisher.bandwidth_scale > 0.0 && est.fisher.density_floor >= 0.0) {
            return bad("bandwidth_scale must be positive and density_floor non-negative".into());
        }
        if !(self.validation.kernel_constant_scale > 0.0) || self.validation.fbm_paths < 100 {
            return bad("kernel_constant_scale must be positive and fbm_paths at least 100".into());
        }
        self.model.build().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

//! Fractional Brownian motion: parameters, grids, kernel calculus and path generation.

mod cm;
mod generate;
mod kernel;
mod table;

pub use cm::{cm_inner, CameronMartin, StepFunction};
pub use generate::{generate_fbm, CholeskyFactor, FbmGenerator, FbmMethod, FbmPath};
pub use kernel::{fbm_covariance, VolterraKernel};
pub use table::{KernelTable, QuadratureId};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hurst index `H ∈ (1/2, 1)`, or exactly `1/2` in Brownian sanity mode.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct HurstIndex(f64);

impl HurstIndex {
    pub fn new(h: f64) -> Result<Self> {
        if h.is_finite() && h > 0.5 && h < 1.0 {
            Ok(Self(h))
        } else {
            Err(Error::InvalidHurst(h))
        }
    }

    /// Standard Brownian motion, `H = 1/2`. Only covariance and path
    /// generation accept it; kernel operations reject it.
    pub fn brownian() -> Self {
        Self(0.5)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_brownian(self) -> bool {
        self.0 == 0.5
    }

    /// `H(2H − 1)`, the constant of the Cameron–Martin form.
    pub fn alpha(self) -> f64 {
        self.0 * (2.0 * self.0 - 1.0)
    }

    /// `C_H = (H(2H − 1) / B(2 − 2H, H − 1/2))^{1/2}`.
    pub fn kernel_constant(self) -> f64 {
        let h = self.0;
        (self.alpha() / statrs::function::beta::beta(2.0 - 2.0 * h, h - 0.5)).sqrt()
    }
}

impl TryFrom<f64> for HurstIndex {
    type Error = Error;
    fn try_from(h: f64) -> Result<Self> {
        Self::new(h)
    }
}

impl From<HurstIndex> for f64 {
    fn from(h: HurstIndex) -> f64 {
        h.0
    }
}

/// Uniform grid `0 = t_0 < … < t_n = T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_end: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::InvalidGrid(format!("horizon must be positive, got {t_end}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidGrid("need at least one step".into()));
        }
        Ok(Self { t_end, n_steps })
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    pub fn point(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_end
        } else {
            k as f64 * self.dt()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|k| self.point(k)).collect()
    }

    /// Index of the grid point equal to `t` (up to rounding).
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let x = t / self.dt();
        let k = x.round();
        if k < 0.0 || k > self.n_steps as f64 || (x - k).abs() > 1e-9 * x.abs().max(1.0) {
            return Err(Error::NotGridPoint(t));
        }
        Ok(k as usize)
    }

    /// Cell `[t_k, t_{k+1})` containing `t`, clamped to the last cell at `T`.
    pub fn cell_of(&self, t: f64) -> usize {
        let k = (t / self.dt()).floor();
        if k < 0.0 {
            0
        } else {
            (k as usize).min(self.n_steps - 1)
        }
    }
}

use serde::{Deserialize, Serialize};

use super::CoefficientModel;
use crate::error::{Error, Result};
use crate::fbm::TimeGrid;
use crate::measure::EmpiricalMeasure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdeScheme {
    #[default]
    Rk4,
    /// Explicit Euler; matches the particle scheme step for step.
    Euler,
}

/// Deterministic limit path `x_t` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OdePath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl OdePath {
    pub fn value_at(&self, t: f64) -> Result<f64> {
        Ok(self.values[self.grid.index_of(t)?])
    }

    /// Law of the deterministic state at step `k`, a point mass.
    pub fn law(&self, k: usize) -> EmpiricalMeasure {
        EmpiricalMeasure::dirac(self.values[k])
    }
}

/// `x' = b(t, x, δ_x)` by classical Runge–Kutta.
pub fn solve_ode(model: &dyn CoefficientModel, grid: TimeGrid) -> Result<OdePath> {
    solve_ode_with(model, grid, OdeScheme::Rk4)
}

pub fn solve_ode_with(model: &dyn CoefficientModel, grid: TimeGrid, scheme: OdeScheme) -> Result<OdePath> {
    let f = |t: f64, x: f64| model.drift(t, x, &EmpiricalMeasure::dirac(x));
    let dt = grid.dt();
    let mut values = Vec::with_capacity(grid.n_steps() + 1);
    let mut x = model.initial_value();
    values.push(x);
    for k in 0..grid.n_steps() {
        let t = grid.point(k);
        x = match scheme {
            OdeScheme::Euler => x + dt * f(t, x),
            OdeScheme::Rk4 => {
                let k1 = f(t, x);
                let k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1);
                let k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2);
                let k4 = f(t + dt, x + dt * k3);
                x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            }
        };
        if !x.is_finite() {
            return Err(Error::NonFinite { step: k + 1, particle: 0 });
        }
        values.push(x);
    }
    Ok(OdePath { grid, values })
}

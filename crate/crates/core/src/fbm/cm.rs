use super::{HurstIndex, TimeGrid};
use crate::error::{Error, Result};
use crate::quadrature::{gl32, left_power};

/// Function constant on each grid cell `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    grid: TimeGrid,
    values: Vec<f64>,
}

impl StepFunction {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_steps() {
            return Err(Error::domain(format!(
                "step function needs {} cell values, got {}",
                grid.n_steps(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zero(grid: TimeGrid) -> Self {
        Self { grid, values: vec![0.0; grid.n_steps()] }
    }

    /// `1_{[0, t]}` for a grid point `t`.
    pub fn indicator(grid: TimeGrid, t: f64) -> Result<Self> {
        let m = grid.index_of(t)?;
        let values = (0..grid.n_steps()).map(|k| if k < m { 1.0 } else { 0.0 }).collect();
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 || t > self.grid.t_end() {
            0.0
        } else {
            self.values[self.grid.cell_of(t)]
        }
    }
}

/// Cameron–Martin form `α_H ∫∫ φ(u) ψ(v) |u − v|^{2H−2} du dv` on a uniform grid.
///
/// For step functions the form is a Toeplitz quadratic form in the cell
/// values; the weights `W_k = ∫_{I_0} ∫_{I_k} |u − v|^{2H−2}` are computed once.
#[derive(Debug, Clone)]
pub struct CameronMartin {
    h: HurstIndex,
    grid: TimeGrid,
    weights: Vec<f64>,
}

impl CameronMartin {
    pub fn new(h: HurstIndex, grid: TimeGrid) -> Result<Self> {
        if h.is_brownian() {
            return Err(Error::domain("Cameron–Martin weights need H > 1/2"));
        }
        let n = grid.n_steps();
        let scale = grid.dt().powf(2.0 * h.value());
        let weights = unit_cell_weights(h.value(), n).into_iter().map(|w| w * scale).collect();
        Ok(Self { h, grid, weights })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    /// `α_H W_{|i−j|}` is the covariance of the i-th and j-th fBm increments.
    pub fn increment_covariance(&self, lag: usize) -> f64 {
        self.h.alpha() * self.weights[lag]
    }

    pub fn inner(&self, phi: &StepFunction, psi: &StepFunction) -> Result<f64> {
        if phi.grid() != self.grid || psi.grid() != self.grid {
            return Err(Error::domain("step functions live on a different grid"));
        }
        Ok(self.inner_values(phi.values(), psi.values()))
    }

    /// Form evaluated on raw cell values (missing trailing cells count as zero).
    pub fn inner_values(&self, phi: &[f64], psi: &[f64]) -> f64 {
        let mut total = 0.0;
        for (i, &a) in phi.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let row: f64 = psi.iter().enumerate().map(|(j, &b)| b * self.weights[i.abs_diff(j)]).sum();
            total += a * row;
        }
        self.h.alpha() * total
    }
}

/// `∫_φ ∫_ψ` convenience wrapper building the weights on the fly.
pub fn cm_inner(h: HurstIndex, phi: &StepFunction, psi: &StepFunction) -> Result<f64> {
    CameronMartin::new(h, phi.grid())?.inner(phi, psi)
}

/// Weights for unit cells, `W_k = ∫_0^1 du ∫_k^{k+1} |u − v|^{2H−2} dv`.
///
/// With the lag `r = v − u` the double integral becomes
/// `∫ |r|^{2H−2} (1 − |r − k|)_+ dr`, singular only at `r = 0`.
fn unit_cell_weights(h: f64, n: usize) -> Vec<f64> {
    let g = 2.0 * h - 1.0;
    let mut w = Vec::with_capacity(n);
    w.push(2.0 * left_power(|r| 1.0 - r, 0.0, g, 0.0, 1.0, gl32(), 2));
    for k in 1..n {
        let kf = k as f64;
        let tent = |r: f64| 1.0 - (r - kf).abs();
        let v = if k == 1 {
            left_power(tent, 0.0, g, 0.0, 1.0, gl32(), 2) + left_power(tent, 0.0, g, 1.0, 2.0, gl32(), 1)
        } else {
            gl32().integrate(kf - 1.0, kf, |r| tent(r) * r.powf(g - 1.0))
                + gl32().integrate(kf, kf + 1.0, |r| tent(r) * r.powf(g - 1.0))
        };
        w.push(v);
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::fbm_covariance;

    #[test]
    fn indicator_self_product_is_variance() {
        let h = HurstIndex::new(0.7).unwrap();
        let grid = TimeGrid::new(2.0, 32).unwrap();
        let one = StepFunction::indicator(grid, 2.0).unwrap();
        let v = cm_inner(h, &one, &one).unwrap();
        assert!((v - 2f64.powf(1.4)).abs() < 1e-9, "{v}");
        assert!((v - 2.6390).abs() < 1e-4);
    }

    #[test]
    fn indicator_cross_product_is_covariance() {
        let h = HurstIndex::new(0.8).unwrap();
        let grid = TimeGrid::new(3.0, 30).unwrap();
        let a = StepFunction::indicator(grid, 1.0).unwrap();
        let b = StepFunction::indicator(grid, 3.0).unwrap();
        let v = cm_inner(h, &a, &b).unwrap();
        let want = fbm_covariance(h, 1.0, 3.0).unwrap();
        assert!((v - want).abs() < 1e-9, "{v} vs {want}");
    }

    #[test]
    fn zero_function() {
        let h = HurstIndex::new(0.6).unwrap();
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let phi = StepFunction::new(grid, (0..8).map(|k| k as f64 - 3.0).collect()).unwrap();
        assert_eq!(cm_inner(h, &phi, &StepFunction::zero(grid)).unwrap(), 0.0);
    }

    #[test]
    fn weights_reproduce_increment_covariance() {
        let h = HurstIndex::new(0.65).unwrap();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let cm = CameronMartin::new(h, grid).unwrap();
        let d = grid.dt();
        for lag in 0..10 {
            let k = lag as f64;
            let e = 2.0 * h.value();
            let want = 0.5 * d.powf(e) * ((k + 1.0).powf(e) + (k - 1.0).abs().powf(e) - 2.0 * k.powf(e));
            assert!((cm.increment_covariance(lag) - want).abs() < 1e-12, "lag {lag}");
        }
    }
}

use super::{HurstIndex, StepFunction};
use crate::error::{Error, Result};
use crate::quadrature::{endpoint_power, gl32, left_power, left_power_graded};

/// `E[B_s B_t] = ½(t^{2H} + s^{2H} − |t − s|^{2H})`.
pub fn fbm_covariance(h: HurstIndex, s: f64, t: f64) -> Result<f64> {
    if s < 0.0 || t < 0.0 || !s.is_finite() || !t.is_finite() {
        return Err(Error::domain(format!("times must be non-negative, got s={s}, t={t}")));
    }
    let e = 2.0 * h.value();
    Ok(0.5 * (t.powf(e) + s.powf(e) - (t - s).abs().powf(e)))
}

/// Volterra kernel `K_H(t, s)` of the representation `B^H_t = ∫_0^t K_H(t, s) dW_s`.
#[derive(Debug, Clone, Copy)]
pub struct VolterraKernel {
    h: HurstIndex,
    constant: f64,
}

impl VolterraKernel {
    pub fn new(h: HurstIndex) -> Result<Self> {
        if h.is_brownian() {
            return Err(Error::domain("the Volterra kernel needs H > 1/2"));
        }
        Ok(Self { h, constant: h.kernel_constant() })
    }

    /// Kernel with `C_H` multiplied by `scale`. Used by the validation suite to
    /// check that a wrong constant is detected.
    pub fn with_constant_scale(h: HurstIndex, scale: f64) -> Result<Self> {
        let mut k = Self::new(h)?;
        k.constant *= scale;
        Ok(k)
    }

    pub fn hurst(&self) -> HurstIndex {
        self.h
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// `C_H s^{1/2−H} ∫_s^t (u − s)^{H−3/2} u^{H−1/2} du` for `0 < s ≤ t`.
    pub fn value(&self, t: f64, s: f64) -> Result<f64> {
        if !(s > 0.0 && s <= t) {
            return Err(Error::domain(format!("kernel needs 0 < s <= t, got s={s}, t={t}")));
        }
        Ok(self.value_unchecked(t, s))
    }

    pub(crate) fn value_unchecked(&self, t: f64, s: f64) -> f64 {
        if s >= t {
            return 0.0;
        }
        let h = self.h.value();
        let integral = left_power_graded(|u| u.powf(h - 0.5), s, h - 0.5, s, t, gl32());
        self.constant * s.powf(0.5 - h) * integral
    }

    /// `∂K_H/∂t (t, s) = C_H (t − s)^{H−3/2} (s/t)^{1/2−H}` for `0 < s < t`.
    pub fn time_derivative(&self, t: f64, s: f64) -> Result<f64> {
        if !(s > 0.0 && s < t) {
            return Err(Error::domain(format!("kernel derivative needs 0 < s < t, got s={s}, t={t}")));
        }
        Ok(self.time_derivative_unchecked(t, s))
    }

    pub(crate) fn time_derivative_unchecked(&self, t: f64, s: f64) -> f64 {
        let h = self.h.value();
        self.constant * (t - s).powf(h - 1.5) * (s / t).powf(0.5 - h)
    }

    /// The smooth factor of the derivative once `(t − s)^{H−3/2}` is removed.
    pub(crate) fn derivative_smooth_part(&self, t: f64, s: f64) -> f64 {
        self.constant * (s / t).powf(0.5 - self.h.value())
    }

    /// `(K*_H φ)(s) = ∫_s^T φ(t) ∂K_H/∂t (t, s) dt` for a step function `φ`.
    pub fn k_star(&self, phi: &StepFunction, s: f64) -> Result<f64> {
        let grid = phi.grid();
        if !(s > 0.0 && s < grid.t_end()) {
            return Err(Error::domain(format!("k_star needs 0 < s < T, got {s}")));
        }
        let h = self.h.value();
        let first = grid.cell_of(s);
        let mut total = 0.0;
        for (j, &v) in phi.values().iter().enumerate().skip(first) {
            if v == 0.0 {
                continue;
            }
            let a = grid.point(j).max(s);
            let b = grid.point(j + 1);
            total += v * left_power(|u| self.derivative_smooth_part(u, s), s, h - 0.5, a, b, gl32(), 1);
        }
        Ok(total)
    }

    /// `∫_0^t K_H(t, s)² ds`, which equals `t^{2H}` for the correct constant.
    pub fn square_integral(&self, t: f64) -> f64 {
        let h = self.h.value();
        endpoint_power(
            |s| {
                let k = self.value_unchecked(t, s);
                k * k
            },
            0.0,
            t,
            1.0 - 2.0 * h,
            2.0 * h - 1.0,
            4,
        )
    }
}

use super::{CoefficientModel, DrivingNoise, OdePath, OdeScheme, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::fbm::{CameronMartin, FbmGenerator, FbmMethod, HurstIndex};
use crate::measure::EmpiricalMeasure;

/// Gaussian law of the fluctuation limit `Z_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitLaw {
    pub t: f64,
    pub mean: f64,
    pub variance: f64,
    /// `a(t_k) = ∂b/∂x(t_k, x_{t_k}, δ_{x_{t_k}})` for `t_k ≤ t`.
    pub decay: Vec<f64>,
    /// `f(t_k) = exp(∫_{t_k}^t a) σ(t_k, δ_{x_{t_k}})` for `t_k ≤ t`.
    pub integrand: Vec<f64>,
}

/// Variance `α_H ∫∫ f(u) f(v) |u − v|^{2H−2} du dv` of `Z_t`.
pub fn limit_law(model: &dyn CoefficientModel, ode: &OdePath, t: f64, h: HurstIndex) -> Result<LimitLaw> {
    limit_law_with(model, ode, t, h, OdeScheme::Rk4)
}

/// With [`OdeScheme::Rk4`] the propagator `exp(∫ a)` is integrated by the
/// trapezoid rule and `f` is averaged over each cell. With
/// [`OdeScheme::Euler`] the cell values are `σ_k Π_{j>k} (1 + a_j Δ)`, which
/// is the exact variance of the Euler recursion used by [`simulate_z`].
pub fn limit_law_with(
    model: &dyn CoefficientModel,
    ode: &OdePath,
    t: f64,
    h: HurstIndex,
    scheme: OdeScheme,
) -> Result<LimitLaw> {
    let grid = ode.grid;
    let m = grid.index_of(t)?;
    let dt = grid.dt();
    let decay: Vec<f64> = (0..=m)
        .map(|k| model.drift_dx(grid.point(k), ode.values[k], &ode.law(k)))
        .collect();
    let sigma: Vec<f64> = (0..=m).map(|k| model.diffusion(grid.point(k), &ode.law(k))).collect();

    // log-propagator from t_k to t
    let mut log_prop = vec![0.0; m + 1];
    for k in (0..m).rev() {
        log_prop[k] = log_prop[k + 1] + 0.5 * dt * (decay[k] + decay[k + 1]);
    }
    let integrand: Vec<f64> = (0..=m).map(|k| log_prop[k].exp() * sigma[k]).collect();

    let cells: Vec<f64> = match scheme {
        OdeScheme::Rk4 => (0..m).map(|k| 0.5 * (integrand[k] + integrand[k + 1])).collect(),
        OdeScheme::Euler => {
            let mut g = vec![0.0; m];
            let mut prop = 1.0;
            for k in (0..m).rev() {
                g[k] = sigma[k] * prop;
                prop *= 1.0 + decay[k] * dt;
            }
            g
        }
    };
    let variance = if m == 0 || h.is_brownian() {
        if h.is_brownian() {
            cells.iter().map(|c| c * c * dt).sum()
        } else {
            0.0
        }
    } else {
        CameronMartin::new(h, grid)?.inner_values(&cells, &cells)
    };
    Ok(LimitLaw { t, mean: 0.0, variance: variance.max(0.0), decay, integrand })
}

/// Samples of `Z_t` from fresh circulant-embedding noise.
pub fn simulate_z(
    model: &dyn CoefficientModel,
    ode: &OdePath,
    h: HurstIndex,
    seed: u64,
    n_samples: usize,
    t: f64,
) -> Result<Vec<f64>> {
    let generator = FbmGenerator::new(h, ode.grid, FbmMethod::Circulant)?;
    let noise = DrivingNoise::generate(&generator, seed, n_samples);
    simulate_z_with_noise(model, ode, &noise, t)
}

/// Euler scheme `Z_{k+1} = Z_k + (a_k Z_k + λ_k Z̄_k) Δ + σ_k ΔB_k`, where
/// `Z̄_k` is the sample mean across all paths (the pathwise counterpart of
/// `E[Z_s]` in the mean-field term).
pub fn simulate_z_with_noise(
    model: &dyn CoefficientModel,
    ode: &OdePath,
    noise: &DrivingNoise,
    t: f64,
) -> Result<Vec<f64>> {
    let grid = ode.grid;
    if noise.grid() != grid {
        return Err(Error::domain("noise and ODE path use different grids"));
    }
    let m = grid.index_of(t)?;
    let dt = grid.dt();
    let n = noise.len();
    let mut z = vec![0.0; n];
    for k in 0..m {
        let tk = grid.point(k);
        let law = ode.law(k);
        let a = model.drift_dx(tk, ode.values[k], &law);
        let lambda = model.mf_sensitivity(tk, ode.values[k]);
        let sig = model.diffusion(tk, &law);
        let zbar = if lambda != 0.0 { z.iter().sum::<f64>() / n as f64 } else { 0.0 };
        for (i, zi) in z.iter_mut().enumerate() {
            *zi += (a * *zi + lambda * zbar) * dt + sig * noise.increment(i, k);
        }
    }
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { step: m, particle: i });
    }
    Ok(z)
}

/// `(X^i_t − x_t) / ε^H` for every particle.
pub fn fluctuation(ensemble: &ParticleEnsemble, ode: &OdePath, t: f64) -> Result<Vec<f64>> {
    if ensemble.grid != ode.grid {
        return Err(Error::domain("ensemble and ODE path use different grids"));
    }
    let m = ode.grid.index_of(t)?;
    let scale = ensemble.epsilon.powf(ensemble.h.value());
    let x = ode.values[m];
    Ok(ensemble.step(m).iter().map(|v| (v - x) / scale).collect())
}

/// Euler scheme for
/// `U_t = ∫ ∂b/∂x(s, x_s, μ_s) U_s ds + ε^{−H} ∫ (b(s, x_s, μ_s) − b(s, x_s, δ_{x_s})) ds + ∫ σ(s, δ_{x_s}) dB^H_s`,
/// with `μ_s` the empirical measure of `ensemble` and path `i` driven by
/// `noise` path `i`.
pub fn simulate_u(
    model: &dyn CoefficientModel,
    ode: &OdePath,
    ensemble: &ParticleEnsemble,
    noise: &DrivingNoise,
    t: f64,
) -> Result<Vec<f64>> {
    let grid = ode.grid;
    if ensemble.grid != grid || noise.grid() != grid {
        return Err(Error::domain("ensemble, noise and ODE path use different grids"));
    }
    let m = grid.index_of(t)?;
    let dt = grid.dt();
    let inv_scale = ensemble.epsilon.powf(-ensemble.h.value());
    let mut u = vec![0.0; noise.len()];
    for k in 0..m {
        let tk = grid.point(k);
        let xk = ode.values[k];
        let point = EmpiricalMeasure::dirac(xk);
        let mu = ensemble.measure(k);
        let a = model.drift_dx(tk, xk, &mu);
        let law_gap = inv_scale * (model.drift(tk, xk, &mu) - model.drift(tk, xk, &point));
        let sig = model.diffusion(tk, &point);
        for (i, ui) in u.iter_mut().enumerate() {
            *ui += (a * *ui + law_gap) * dt + sig * noise.increment(i, k);
        }
    }
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::TimeGrid;
    use crate::mckean::{solve_ode, solve_ode_with, solve_particles_with_noise, MeanFieldOu, PureNoise};
    use crate::quadrature::{gl32, left_power};
    use crate::stats::{mean, sample_variance, standard_error};

    fn hurst(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    #[test]
    fn pure_noise_limit_is_fbm() {
        let grid = TimeGrid::new(1.0, 64).unwrap();
        let ode = solve_ode(&PureNoise::default(), grid).unwrap();
        let law = limit_law(&PureNoise::default(), &ode, 1.0, hurst(0.7)).unwrap();
        assert!((law.variance - 1.0).abs() < 1e-10);
        assert_eq!(law.mean, 0.0);
        let gen = FbmGenerator::new(hurst(0.7), grid, FbmMethod::Circulant).unwrap();
        let noise = DrivingNoise::generate(&gen, 4, 10);
        let z = simulate_z_with_noise(&PureNoise::default(), &ode, &noise, 1.0).unwrap();
        for (i, zi) in z.iter().enumerate() {
            assert!((zi - noise.path_values(i)[64]).abs() < 1e-12);
        }
    }

    #[test]
    fn fractional_ou_variance_matches_brute_force() {
        // a = -α, σ = σ₀: variance = α_H σ₀² ∫∫ e^{-α(t-u)} e^{-α(t-v)} |u-v|^{2H-2}
        let (alpha, sigma0, h, t) = (0.8, 1.3, 0.7, 1.0);
        let m = MeanFieldOu::new(alpha, 0.0, 0.0, sigma0);
        let grid = TimeGrid::new(t, 400).unwrap();
        let ode = solve_ode(&m, grid).unwrap();
        let law = limit_law(&m, &ode, t, hurst(h)).unwrap();
        // Brute force: with r = v - u the inner integral in u is explicit,
        // leaving ∫_0^t r^{2H-2} 2 e^{-α(2t-r)}(e^{α(t-r)}... ) dr evaluated by
        // the power substitution.
        let f = |r: f64| {
            // ∫_0^{t-r} e^{-α(t-u)} e^{-α(t-u-r)} du, doubled for symmetry
            let c = (-alpha * (2.0 * t - r)).exp();
            2.0 * c * ((2.0 * alpha * (t - r)).exp() - 1.0) / (2.0 * alpha)
        };
        let brute = h * (2.0 * h - 1.0) * sigma0 * sigma0 * left_power(f, 0.0, 2.0 * h - 1.0, 0.0, t, gl32(), 8);
        assert!((law.variance / brute - 1.0).abs() < 1e-4, "{} vs {brute}", law.variance);
    }

    #[test]
    fn variance_scales_under_time_dilation() {
        let h = hurst(0.65);
        let m = PureNoise::default();
        let g1 = TimeGrid::new(1.0, 32).unwrap();
        let g2 = TimeGrid::new(3.0, 32).unwrap();
        let v1 = limit_law(&m, &solve_ode(&m, g1).unwrap(), 1.0, h).unwrap().variance;
        let v2 = limit_law(&m, &solve_ode(&m, g2).unwrap(), 3.0, h).unwrap().variance;
        assert!((v2 / v1 - 3f64.powf(1.3)).abs() < 1e-10);
    }

    #[test]
    fn simulated_z_matches_limit_variance() {
        let h = hurst(0.7);
        let grid = TimeGrid::new(1.0, 128).unwrap();
        let m = MeanFieldOu::new(0.5, 0.25, 0.5, 1.0).with_curvature(1.0, 0.7);
        let ode = solve_ode_with(&m, grid, OdeScheme::Euler).unwrap();
        let z = simulate_z(&m, &ode, h, 21, 10_000, 1.0).unwrap();
        for scheme in [OdeScheme::Euler, OdeScheme::Rk4] {
            let law = limit_law_with(&m, &ode, 1.0, h, scheme).unwrap();
            let var = sample_variance(&z);
            let se = law.variance * (2.0 / 10_000f64).sqrt();
            assert!((var - law.variance).abs() < 5.0 * se, "{scheme:?}: {var} vs {}", law.variance);
        }
        assert!(mean(&z).abs() < 5.0 * standard_error(&z));
    }

    #[test]
    fn u_equals_z_without_drift() {
        let h = hurst(0.7);
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let m = PureNoise::default();
        let ode = solve_ode(&m, grid).unwrap();
        let gen = FbmGenerator::new(h, grid, FbmMethod::Circulant).unwrap();
        let noise = DrivingNoise::generate(&gen, 8, 50);
        let ens = solve_particles_with_noise(&m, &noise, 0.3, h).unwrap();
        let u = simulate_u(&m, &ode, &ens, &noise, 1.0).unwrap();
        let z = simulate_z_with_noise(&m, &ode, &noise, 1.0).unwrap();
        let x = fluctuation(&ens, &ode, 1.0).unwrap();
        for i in 0..50 {
            assert!((u[i] - z[i]).abs() < 1e-12);
            assert!((x[i] - z[i]).abs() < 1e-9);
        }
    }
}

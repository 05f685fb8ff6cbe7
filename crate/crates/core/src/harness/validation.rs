use serde::Serialize;

use super::config::ExperimentConfig;
use crate::error::Result;
use crate::fbm::{cm_inner, fbm_covariance, FbmGenerator, FbmMethod, HurstIndex, StepFunction, TimeGrid, VolterraKernel};
use crate::fisher::{fisher_distance, gaussian_fisher_oracle, SampleSet};
use crate::malliavin::{Malliavin, MeasureHistory};
use crate::measure::{wasserstein, EmpiricalMeasure};
use crate::mckean::{limit_law, solve_ode, DrivingNoise, PureNoise};
use crate::rng::{derive_seed, stream_rng};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationCheck {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
    pub passed: bool,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &ValidationCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Default)]
struct Suite {
    checks: Vec<ValidationCheck>,
}

impl Suite {
    fn absolute(&mut self, name: &str, detail: String, measured: f64, expected: f64, tolerance: f64) {
        let passed = (measured - expected).abs() <= tolerance;
        self.checks.push(ValidationCheck { name: name.into(), passed, measured, expected, tolerance, detail });
    }

    fn relative(&mut self, name: &str, detail: String, measured: f64, expected: f64, tolerance: f64) {
        self.absolute(name, detail, measured, expected, tolerance * expected.abs());
    }

    fn error(&mut self, name: &str, detail: String, e: impl std::fmt::Display) {
        self.checks.push(ValidationCheck {
            name: name.into(),
            passed: false,
            measured: f64::NAN,
            expected: f64::NAN,
            tolerance: 0.0,
            detail: format!("{detail}: {e}"),
        });
    }
}

/// Executes the cross-module property checks at a small budget.
///
/// `config.validation.kernel_constant_scale` perturbs the Volterra kernel
/// constant (the kernel identity check must then fail), and
/// `brownian_sanity` switches to the `H = 1/2` checks.
pub fn run_validation_suite(config: &ExperimentConfig) -> Result<ValidationReport> {
    config.validate()?;
    let opts = &config.validation;
    let mut suite = Suite::default();
    if opts.brownian_sanity {
        brownian_checks(&mut suite, config)?;
    } else {
        for h in config.hurst_indices()? {
            fractional_checks(&mut suite, config, h)?;
        }
    }
    common_checks(&mut suite, config);
    let passed = suite.checks.iter().all(|c| c.passed);
    Ok(ValidationReport { checks: suite.checks, passed })
}

/// Largest entrywise deviation of the sample covariance in units of its standard error.
fn covariance_z_score(h: HurstIndex, paths: usize, seed: u64) -> Result<f64> {
    let grid = TimeGrid::new(1.0, 16)?;
    let generator = FbmGenerator::new(h, grid, FbmMethod::Circulant)?;
    let noise = DrivingNoise::generate(&generator, seed, paths);
    let values: Vec<Vec<f64>> = (0..paths).map(|i| noise.path_values(i)).collect();
    let mut worst: f64 = 0.0;
    for a in 1..=16 {
        for b in a..=16 {
            let prods: Vec<f64> = values.iter().map(|v| v[a] * v[b]).collect();
            let m = crate::stats::mean(&prods);
            let se = crate::stats::standard_error(&prods);
            let want = fbm_covariance(h, grid.point(a), grid.point(b))?;
            worst = worst.max((m - want).abs() / se);
        }
    }
    Ok(worst)
}

fn fractional_checks(suite: &mut Suite, config: &ExperimentConfig, h: HurstIndex) -> Result<()> {
    let hv = h.value();
    let opts = &config.validation;
    let kernel = VolterraKernel::with_constant_scale(h, opts.kernel_constant_scale)?;
    for t in [0.25, 1.0] {
        suite.relative("kernel_identity", format!("H={hv} t={t}"), kernel.square_integral(t), t.powf(2.0 * hv), 1e-3);
    }

    let grid = TimeGrid::new(1.0, 32)?;
    for (s, t) in [(0.25, 1.0), (0.5, 0.75)] {
        let inner = cm_inner(h, &StepFunction::indicator(grid, s)?, &StepFunction::indicator(grid, t)?)?;
        suite.relative("cameron_martin_covariance", format!("H={hv} s={s} t={t}"), inner, fbm_covariance(h, s, t)?, 1e-6);
    }
    let ind = StepFunction::indicator(grid, 0.75)?;
    for s in [0.1, 0.4, 0.7] {
        suite.relative("k_star_indicator", format!("H={hv} s={s}"), kernel.k_star(&ind, s)?, kernel.value(0.75, s)?, 1e-6);
    }

    let z = covariance_z_score(h, opts.fbm_paths, derive_seed(&[config.seed, hv.to_bits()]))?;
    suite.absolute("fbm_covariance", format!("H={hv}, max |z| over 16-point grid"), z, 0.0, 5.0);

    let path_grid = TimeGrid::new(1.0, 64)?;
    let model = PureNoise::default();
    let ode = solve_ode(&model, path_grid)?;
    let law = limit_law(&model, &ode, 1.0, h)?;
    suite.relative("pure_noise_limit_variance", format!("H={hv}"), law.variance, 1.0, 1e-8);
    let history = MeasureHistory::from_ode(&ode);
    let eps: f64 = 0.25;
    let mall = Malliavin::with_kernel(&model, &history, kernel, eps)?;
    let path = vec![0.0; path_grid.n_steps() + 1];
    for r in [0.2, 0.6] {
        let want = eps.powf(hv) * VolterraKernel::new(h)?.value(1.0, r)?;
        match mall.first(&path, r, 1.0) {
            Ok(d) => suite.relative("malliavin_pure_noise", format!("H={hv} r={r}"), d, want, 1e-3),
            Err(e) => suite.error("malliavin_pure_noise", format!("H={hv} r={r}"), e),
        }
    }
    let unit = Malliavin::new(&model, &history, h, 1.0)?;
    match unit.nondegeneracy(1.0, 17.0) {
        Ok(n) => suite.absolute("nondegeneracy_unit", format!("H={hv}"), n.value, 1.0, 1e-3),
        Err(e) => suite.error("nondegeneracy_unit", format!("H={hv}"), e),
    }
    Ok(())
}

fn brownian_checks(suite: &mut Suite, config: &ExperimentConfig) -> Result<()> {
    let h = HurstIndex::brownian();
    let z = covariance_z_score(h, config.validation.fbm_paths, derive_seed(&[config.seed, 5]))?;
    suite.absolute("brownian_covariance", "max |z| over 16-point grid".into(), z, 0.0, 5.0);
    suite.absolute("brownian_covariance_formula", "E[B_s B_t] at s=0.3, t=0.8".into(), fbm_covariance(h, 0.3, 0.8)?, 0.3, 1e-12);

    // lag-one increment correlation vanishes
    let grid = TimeGrid::new(1.0, 16)?;
    let generator = FbmGenerator::new(h, grid, FbmMethod::Circulant)?;
    let n = config.validation.fbm_paths;
    let noise = DrivingNoise::generate(&generator, config.seed, n);
    let prods: Vec<f64> = (0..n).map(|i| noise.increment(i, 3) * noise.increment(i, 4)).collect();
    let m = crate::stats::mean(&prods);
    let se = crate::stats::standard_error(&prods);
    suite.absolute("brownian_increment_correlation", "E[ΔB_3 ΔB_4] in standard errors".into(), m / se, 0.0, 5.0);

    let ode = solve_ode(&PureNoise::default(), TimeGrid::new(1.0, 64)?)?;
    let law = limit_law(&PureNoise::default(), &ode, 0.5, h)?;
    suite.relative("brownian_limit_variance", "t = 0.5".into(), law.variance, 0.5, 1e-10);
    Ok(())
}

fn common_checks(suite: &mut Suite, config: &ExperimentConfig) {
    // sorted coupling against brute force over all pairings
    let mut rng = stream_rng(config.seed, 77);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        use rand::Rng;
        let n = rng.random_range(1..=5usize);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let theta = rng.random_range(1.0..3.0);
        let sorted = wasserstein(&EmpiricalMeasure::new(a.clone()).unwrap(), &EmpiricalMeasure::new(b.clone()).unwrap(), theta).unwrap();
        let brute = brute_force_wasserstein(&a, &b, theta);
        worst = worst.max((sorted - brute).abs());
    }
    suite.absolute("wasserstein_sorted_coupling", "50 random instances, N <= 5".into(), worst, 0.0, 1e-12);

    let mut rng = stream_rng(config.seed, 78);
    let shifted: Vec<f64> = (0..100_000)
        .map(|_| 1.0 + rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal))
        .collect();
    let oracle = gaussian_fisher_oracle(1.0, 1.0, 0.0, 1.0).unwrap_or(f64::NAN);
    match SampleSet::new(shifted, "shifted").and_then(|s| fisher_distance(&s, 0.0, 1.0)) {
        Ok(est) => suite.relative("fisher_gaussian_oracle", "N(1,1) against N(0,1)".into(), est.value, oracle, 0.15),
        Err(e) => suite.error("fisher_gaussian_oracle", "N(1,1) against N(0,1)".into(), e),
    }
}

fn brute_force_wasserstein(a: &[f64], b: &[f64], theta: f64) -> f64 {
    fn permute(k: usize, perm: &mut Vec<usize>, a: &[f64], b: &[f64], theta: f64, best: &mut f64) {
        if k == perm.len() {
            let cost: f64 = perm.iter().enumerate().map(|(i, &j)| (a[i] - b[j]).abs().powf(theta)).sum();
            *best = best.min(cost);
            return;
        }
        for i in k..perm.len() {
            perm.swap(k, i);
            permute(k + 1, perm, a, b, theta, best);
            perm.swap(k, i);
        }
    }
    let mut perm: Vec<usize> = (0..a.len()).collect();
    let mut best = f64::INFINITY;
    permute(0, &mut perm, a, b, theta, &mut best);
    (best / a.len() as f64).powf(1.0 / theta)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(extra: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(&format!(
            r#"{{
                "model": {{"id": "pure_noise"}},
                "hurst": [0.7],
                "epsilons": [0.5, 0.25, 0.125, 0.0625],
                "n_steps": 32,
                "n_particles": 100,
                "n_samples": 200,
                "seed": 1{extra}
            }}"#
        ))
        .unwrap()
    }

    #[test]
    fn default_suite_passes() {
        let report = run_validation_suite(&config("")).unwrap();
        let failed: Vec<_> = report.failures().collect();
        assert!(report.passed, "{failed:#?}");
    }

    #[test]
    fn tampered_kernel_constant_is_caught() {
        let report = run_validation_suite(&config(r#", "validation": {"kernel_constant_scale": 1.1}"#)).unwrap();
        assert!(!report.passed);
        assert!(report.failures().any(|c| c.name == "kernel_identity"));
    }

    #[test]
    fn brownian_sanity_mode() {
        let report = run_validation_suite(&config(r#", "validation": {"brownian_sanity": true}"#)).unwrap();
        assert!(report.passed, "{:#?}", report.failures().collect::<Vec<_>>());
        assert!(report.checks.iter().any(|c| c.name == "brownian_covariance"));
    }
}

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{wasserstein, EmpiricalMeasure};
use crate::rng::stream_rng;

/// Coefficients `b(t, x, μ)` and `σ(t, μ)` of a distribution-dependent SDE.
pub trait CoefficientModel: Send + Sync + std::fmt::Debug {
    fn id(&self) -> &'static str;

    fn initial_value(&self) -> f64;

    fn drift(&self, t: f64, x: f64, mu: &EmpiricalMeasure) -> f64;

    fn diffusion(&self, t: f64, mu: &EmpiricalMeasure) -> f64;

    /// `∂b/∂x`.
    fn drift_dx(&self, t: f64, x: f64, mu: &EmpiricalMeasure) -> f64;

    /// `∂²b/∂x²`.
    fn drift_dxx(&self, t: f64, x: f64, mu: &EmpiricalMeasure) -> f64;

    /// Lions derivative of the drift in its measure argument, evaluated along
    /// the deterministic path: `D^L b(t, x, ·)(δ_x)(x)`.
    fn mf_sensitivity(&self, t: f64, x: f64) -> f64;

    /// Order of the Wasserstein distance in the Lipschitz condition.
    fn theta(&self) -> f64 {
        2.0
    }

    /// Declared Lipschitz constant `K(T)`.
    fn lipschitz_budget(&self) -> f64;

    /// True when `∂b/∂x` does not depend on the state, which lets Malliavin
    /// computations skip path continuations.
    fn drift_dx_is_state_free(&self) -> bool {
        false
    }
}

/// `b = 0`, `σ = 1`: the solution is `x_0 + ε^H B^H`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PureNoise {
    #[serde(default)]
    pub x0: f64,
}

impl CoefficientModel for PureNoise {
    fn id(&self) -> &'static str {
        "pure_noise"
    }
    fn initial_value(&self) -> f64 {
        self.x0
    }
    fn drift(&self, _: f64, _: f64, _: &EmpiricalMeasure) -> f64 {
        0.0
    }
    fn diffusion(&self, _: f64, _: &EmpiricalMeasure) -> f64 {
        1.0
    }
    fn drift_dx(&self, _: f64, _: f64, _: &EmpiricalMeasure) -> f64 {
        0.0
    }
    fn drift_dxx(&self, _: f64, _: f64, _: &EmpiricalMeasure) -> f64 {
        0.0
    }
    fn mf_sensitivity(&self, _: f64, _: f64) -> f64 {
        0.0
    }
    fn lipschitz_budget(&self) -> f64 {
        0.0
    }
    fn drift_dx_is_state_free(&self) -> bool {
        true
    }
}

/// Mean-field Ornstein–Uhlenbeck family
///
/// `b(t, x, μ) = −α x + β mean(μ) − κ sin x`,
/// `σ(t, μ) = σ₀ + γ mean(μ) + η sd(μ)`.
///
/// With `κ = η = 0` the fluctuation limit is exactly Gaussian at every noise
/// level; `κ` and `η` add the drift curvature and dispersion feedback that
/// make the small-noise rates visible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanFieldOu {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub sigma0: f64,
    #[serde(default)]
    pub kappa: f64,
    #[serde(default)]
    pub eta: f64,
    #[serde(default = "default_x0")]
    pub x0: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default)]
    pub lipschitz_budget: Option<f64>,
}

fn default_x0() -> f64 {
    1.0
}

fn default_theta() -> f64 {
    2.0
}

impl MeanFieldOu {
    pub fn new(alpha: f64, beta: f64, gamma: f64, sigma0: f64) -> Self {
        Self {
            alpha,
            beta,
            gamma,
            sigma0,
            kappa: 0.0,
            eta: 0.0,
            x0: 1.0,
            theta: 2.0,
            lipschitz_budget: None,
        }
    }

    pub fn with_curvature(mut self, kappa: f64, eta: f64) -> Self {
        self.kappa = kappa;
        self.eta = eta;
        self
    }

    pub fn with_x0(mut self, x0: f64) -> Self {
        self.x0 = x0;
        self
    }

    fn validate(&self) -> Result<()> {
        let all = [self.alpha, self.beta, self.gamma, self.sigma0, self.kappa, self.eta, self.x0, self.theta];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("mf_ou parameters must be finite".into()));
        }
        if self.theta < 1.0 {
            return Err(Error::Config(format!("theta must be >= 1, got {}", self.theta)));
        }
        if self.eta != 0.0 && self.theta < 2.0 {
            return Err(Error::Config("eta != 0 needs theta >= 2 (sd is W_2-Lipschitz)".into()));
        }
        Ok(())
    }
}

impl CoefficientModel for MeanFieldOu {
    fn id(&self) -> &'static str {
        "mf_ou"
    }
    fn initial_value(&self) -> f64 {
        self.x0
    }
    fn drift(&self, _: f64, x: f64, mu: &EmpiricalMeasure) -> f64 {
        -self.alpha * x + self.beta * mu.mean() - self.kappa * x.sin()
    }
    fn diffusion(&self, _: f64, mu: &EmpiricalMeasure) -> f64 {
        self.sigma0 + self.gamma * mu.mean() + self.eta * mu.std_dev()
    }
    fn drift_dx(&self, _: f64, x: f64, _: &EmpiricalMeasure) -> f64 {
        -self.alpha - self.kappa * x.cos()
    }
    fn drift_dxx(&self, _: f64, x: f64, _: &EmpiricalMeasure) -> f64 {
        self.kappa * x.sin()
    }
    fn mf_sensitivity(&self, _: f64, _: f64) -> f64 {
        self.beta
    }
    fn theta(&self) -> f64 {
        self.theta
    }
    fn lipschitz_budget(&self) -> f64 {
        self.lipschitz_budget.unwrap_or_else(|| {
            (self.alpha.abs() + self.kappa.abs())
                .max(self.beta.abs())
                .max(self.gamma.abs() + self.eta.abs())
        })
    }
    fn drift_dx_is_state_free(&self) -> bool {
        self.kappa == 0.0
    }
}

/// Model selection by string id, as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum ModelSpec {
    PureNoise(PureNoise),
    MfOu(MeanFieldOu),
}

impl ModelSpec {
    /// Gallery entry with default parameters.
    pub fn from_id(id: &str) -> Result<Self> {
        match id {
            "pure_noise" => Ok(ModelSpec::PureNoise(PureNoise::default())),
            "mf_ou" => Ok(ModelSpec::MfOu(MeanFieldOu::new(1.0, 0.5, 0.0, 1.0))),
            other => Err(Error::UnknownModel(other.to_string())),
        }
    }

    pub fn id(&self) -> &'static str {
        match self {
            ModelSpec::PureNoise(_) => "pure_noise",
            ModelSpec::MfOu(_) => "mf_ou",
        }
    }

    pub fn build(&self) -> Result<Box<dyn CoefficientModel>> {
        match self {
            ModelSpec::PureNoise(m) => Ok(Box::new(*m)),
            ModelSpec::MfOu(m) => {
                m.validate()?;
                Ok(Box::new(*m))
            }
        }
    }
}

/// Randomly probe `|b(t,x,μ) − b(t,y,ν)| ≤ K (|x − y| + W_θ(μ, ν))` and the
/// analogous bound for `σ`. Returns a description of every violation.
pub fn probe_lipschitz(model: &dyn CoefficientModel, t_end: f64, seed: u64, probes: usize) -> Vec<String> {
    let mut rng = stream_rng(seed, 0x11F5);
    let budget = model.lipschitz_budget();
    let theta = model.theta();
    let mut violations = Vec::new();
    let atoms = 16;
    for _ in 0..probes {
        let t = rng.random::<f64>() * t_end;
        let x = rng.random_range(-5.0..5.0);
        let y = rng.random_range(-5.0..5.0);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            let m = rng.random_range(-3.0..3.0);
            let s = rng.random_range(0.0..2.0);
            let v: Vec<f64> = (0..atoms).map(|_| m + s * rng.sample::<f64, _>(StandardNormal)).collect();
            EmpiricalMeasure::new(v).expect("finite atoms")
        };
        let mu = draw(&mut rng);
        let nu = draw(&mut rng);
        let w = wasserstein(&mu, &nu, theta).expect("equal sizes");
        let db = (model.drift(t, x, &mu) - model.drift(t, y, &nu)).abs();
        let ds = (model.diffusion(t, &mu) - model.diffusion(t, &nu)).abs();
        let bound = budget * ((x - y).abs() + w) * (1.0 + 1e-9) + 1e-12;
        if db > bound {
            violations.push(format!("drift: |Δb| = {db:.4e} > {bound:.4e} at t={t:.3}, x={x:.3}, y={y:.3}"));
        }
        if ds > budget * w * (1.0 + 1e-9) + 1e-12 {
            violations.push(format!("diffusion: |Δσ| = {ds:.4e} > {:.4e} at t={t:.3}", budget * w));
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trip_and_unknown_fields() {
        let spec: ModelSpec =
            serde_json::from_str(r#"{"id":"mf_ou","alpha":1.0,"beta":0.5,"gamma":0.2,"sigma0":1.0}"#).unwrap();
        match &spec {
            ModelSpec::MfOu(m) => {
                assert_eq!(m.kappa, 0.0);
                assert_eq!(m.x0, 1.0);
                assert_eq!(m.theta, 2.0);
            }
            _ => panic!("wrong variant"),
        }
        let bad = serde_json::from_str::<ModelSpec>(r#"{"id":"mf_ou","alpha":1,"beta":0,"gamma":0,"sigma0":1,"zeta":3}"#);
        assert!(bad.is_err());
        assert!(serde_json::from_str::<ModelSpec>(r#"{"id":"nope"}"#).is_err());
        let pure: ModelSpec = serde_json::from_str(r#"{"id":"pure_noise"}"#).unwrap();
        assert_eq!(pure.id(), "pure_noise");
        assert!(matches!(ModelSpec::from_id("gbm"), Err(Error::UnknownModel(_))));
    }

    #[test]
    fn gallery_models_respect_their_budget() {
        let m = MeanFieldOu::new(0.5, 0.25, 0.5, 1.0).with_curvature(1.0, 0.7);
        assert!(probe_lipschitz(&m, 1.0, 1, 500).is_empty());
        assert!(probe_lipschitz(&PureNoise::default(), 1.0, 1, 100).is_empty());
        let mut tight = m;
        tight.lipschitz_budget = Some(0.1);
        assert!(!probe_lipschitz(&tight, 1.0, 1, 200).is_empty());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let m = MeanFieldOu::new(0.5, 0.25, 0.5, 1.0).with_curvature(1.0, 0.7);
        let mu = EmpiricalMeasure::new(vec![0.1, 0.5, 1.3]).unwrap();
        let (x, h) = (0.7, 1e-5);
        let fd = (m.drift(0.0, x + h, &mu) - m.drift(0.0, x - h, &mu)) / (2.0 * h);
        assert!((fd - m.drift_dx(0.0, x, &mu)).abs() < 1e-8);
        let fd2 = (m.drift_dx(0.0, x + h, &mu) - m.drift_dx(0.0, x - h, &mu)) / (2.0 * h);
        assert!((fd2 - m.drift_dxx(0.0, x, &mu)).abs() < 1e-8);
    }
}

//! Kernel score estimation and distances to a normal law.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Smallest sample accepted by the estimators.
pub const MIN_SAMPLES: usize = 100;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// `∫ φ(z)² dz` for the standard normal kernel.
const ROUGHNESS_K: f64 = 0.282_094_791_773_878_14;
/// `∫ φ'(z)² dz`.
const ROUGHNESS_DK: f64 = 0.141_047_395_886_939_07;

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub values: Vec<f64>,
    pub label: String,
}

impl SampleSet {
    pub fn new(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::domain(format!("sample {i} is not finite")));
        }
        Ok(Self { values, label: label.into() })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn require(&self, need: usize) -> Result<()> {
        if self.len() < need {
            return Err(Error::TooFewSamples { need, got: self.len() });
        }
        Ok(())
    }
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let m = values.iter().sum::<f64>() / n;
    let v = values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, v.sqrt())
}

/// `1.06 σ̂ n^{−1/5}`.
pub fn silverman_bandwidth(values: &[f64]) -> f64 {
    let (_, sd) = mean_and_sd(values);
    1.06 * sd * (values.len() as f64).powf(-0.2)
}

/// Gaussian KDE tabulated on a fine uniform grid by linear binning, with its
/// first two derivatives. Values between nodes use cubic Hermite interpolation.
#[derive(Debug, Clone)]
pub struct BinnedKde {
    lo: f64,
    step: f64,
    bandwidth: f64,
    density: Vec<f64>,
    slope: Vec<f64>,
    curvature: Vec<f64>,
}

impl BinnedKde {
    const NODES_PER_BANDWIDTH: f64 = 40.0;
    const MAX_NODES: usize = 1 << 18;
    const REACH: f64 = 8.0;

    pub fn new(values: &[f64], bandwidth: f64) -> Self {
        Self::covering(values, bandwidth, None)
    }

    /// KDE whose grid also covers `[lo, hi]`.
    pub fn covering(values: &[f64], bandwidth: f64, range: Option<(f64, f64)>) -> Self {
        let h = bandwidth;
        let (mut min, mut max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        if let Some((a, b)) = range {
            min = min.min(a);
            max = max.max(b);
        }
        let lo = min - Self::REACH * h;
        let hi = max + Self::REACH * h;
        let nodes = (((hi - lo) / h * Self::NODES_PER_BANDWIDTH).ceil() as usize + 1).clamp(64, Self::MAX_NODES);
        let step = (hi - lo) / (nodes - 1) as f64;

        let mut counts = vec![0.0; nodes];
        for &x in values {
            let pos = (x - lo) / step;
            let i = (pos.floor() as usize).min(nodes - 2);
            let frac = pos - i as f64;
            counts[i] += 1.0 - frac;
            counts[i + 1] += frac;
        }

        let n = values.len() as f64;
        let reach = ((Self::REACH * h / step).ceil() as usize).min(nodes - 1);
        let mut k0 = Vec::with_capacity(reach + 1);
        let mut k1 = Vec::with_capacity(reach + 1);
        let mut k2 = Vec::with_capacity(reach + 1);
        for j in 0..=reach {
            let z = j as f64 * step / h;
            let phi = INV_SQRT_2PI * (-0.5 * z * z).exp() / (n * h);
            k0.push(phi);
            k1.push(-z * phi / h);
            k2.push((z * z - 1.0) * phi / (h * h));
        }
        // density(g) = Σ_j c_j K((g − g_j)/h); offsets d = g − g_j
        let mut density = vec![0.0; nodes];
        let mut slope = vec![0.0; nodes];
        let mut curvature = vec![0.0; nodes];
        for (j, &c) in counts.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let a = j.saturating_sub(reach);
            let b = (j + reach).min(nodes - 1);
            for g in a..=b {
                let (d, sign) = if g >= j { (g - j, 1.0) } else { (j - g, -1.0) };
                density[g] += c * k0[d];
                slope[g] += sign * c * k1[d];
                curvature[g] += c * k2[d];
            }
        }
        Self { lo, step, bandwidth: h, density, slope, curvature }
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn peak(&self) -> f64 {
        self.density.iter().cloned().fold(0.0, f64::max)
    }

    fn locate(&self, x: f64) -> Option<(usize, f64)> {
        let pos = (x - self.lo) / self.step;
        if pos < 0.0 || pos > (self.density.len() - 1) as f64 {
            return None;
        }
        let i = (pos.floor() as usize).min(self.density.len() - 2);
        Some((i, pos - i as f64))
    }

    fn hermite(&self, v: &[f64], dv: &[f64], i: usize, s: f64) -> f64 {
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * v[i] + h10 * self.step * dv[i] + h01 * v[i + 1] + h11 * self.step * dv[i + 1]
    }

    pub fn density_at(&self, x: f64) -> f64 {
        self.locate(x).map_or(0.0, |(i, s)| self.hermite(&self.density, &self.slope, i, s).max(0.0))
    }

    pub fn derivative_at(&self, x: f64) -> f64 {
        self.locate(x).map_or(0.0, |(i, s)| self.hermite(&self.slope, &self.curvature, i, s))
    }
}

/// Score estimate at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Score {
    Value(f64),
    /// Density below the floor `10⁻⁴ · max p̂`; the score is not reported.
    Clipped,
}

/// `p̂'(x) / p̂(x)` with exact Gaussian-kernel sums.
pub fn score_kde(samples: &SampleSet, x: f64, bandwidth: f64) -> Result<Score> {
    if !(bandwidth > 0.0) {
        return Err(Error::domain(format!("bandwidth must be positive, got {bandwidth}")));
    }
    samples.require(1)?;
    let h = bandwidth;
    let n = samples.len() as f64;
    let (mut p, mut dp) = (0.0, 0.0);
    for &xi in &samples.values {
        let z = (x - xi) / h;
        let k = (-0.5 * z * z).exp();
        p += k;
        dp -= z * k;
    }
    let norm = INV_SQRT_2PI / (n * h);
    let (p, dp) = (p * norm, dp * norm / h);
    let floor = 1e-4 * BinnedKde::new(&samples.values, h).peak();
    if p < floor || p == 0.0 {
        return Ok(Score::Clipped);
    }
    Ok(Score::Value(dp / p))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FisherOptions {
    /// Fixed bandwidth; Silverman's rule when absent.
    pub bandwidth: Option<f64>,
    /// Multiplier applied to the bandwidth.
    pub bandwidth_scale: f64,
    /// Density floor relative to the KDE maximum.
    pub density_floor: f64,
    /// Subtract the first-order variance of the plug-in score from each term.
    pub debias: bool,
    /// Shrink the sample towards its mean by `√(1 − h²/s²)` before smoothing
    /// so that the smoothed density keeps the sample variance.
    pub variance_correction: bool,
}

impl Default for FisherOptions {
    fn default() -> Self {
        Self { bandwidth: None, bandwidth_scale: 1.0, density_floor: 1e-4, debias: true, variance_correction: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherEstimate {
    pub value: f64,
    /// Plug-in average before the variance correction.
    pub raw_value: f64,
    pub bandwidth: f64,
    pub clipped_fraction: f64,
    pub n: usize,
    /// Standard error of `value` from the spread of the per-point terms.
    pub stderr: f64,
    /// More than 20 % of the sample was clipped.
    pub unreliable: bool,
}

/// JSON record emitted for every estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherRecord {
    pub estimator: String,
    pub value: f64,
    pub bandwidth: f64,
    pub clipped_fraction: f64,
    pub n: usize,
}

impl FisherEstimate {
    pub fn record(&self) -> FisherRecord {
        FisherRecord {
            estimator: "fisher_kde".into(),
            value: self.value,
            bandwidth: self.bandwidth,
            clipped_fraction: self.clipped_fraction,
            n: self.n,
        }
    }
}

/// `I(F ‖ N(μ, σ²)) = E[(ρ_F(F) + (F − μ)/σ²)²]` with default options.
pub fn fisher_distance(samples: &SampleSet, mu: f64, sigma2: f64) -> Result<FisherEstimate> {
    fisher_distance_with(samples, mu, sigma2, &FisherOptions::default())
}

pub fn fisher_distance_with(samples: &SampleSet, mu: f64, sigma2: f64, opts: &FisherOptions) -> Result<FisherEstimate> {
    samples.require(MIN_SAMPLES)?;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::domain(format!("target variance must be positive, got {sigma2}")));
    }
    let x = &samples.values;
    let n = x.len();
    let base = match opts.bandwidth {
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(Error::domain(format!("bandwidth must be positive, got {h}"))),
        None => silverman_bandwidth(x),
    };
    let h = base * opts.bandwidth_scale;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Numerical(format!("degenerate bandwidth {h} (constant sample?)")));
    }
    let kde = if opts.variance_correction {
        let (m, s) = mean_and_sd(x);
        let shrink = (1.0 - (h / s).powi(2)).max(0.0).sqrt();
        let shrunk: Vec<f64> = x.iter().map(|v| m + shrink * (v - m)).collect();
        BinnedKde::new(&shrunk, h)
    } else {
        BinnedKde::new(x, h)
    };
    let floor = opts.density_floor * kde.peak();
    let nf = n as f64;
    let mut terms = Vec::with_capacity(n);
    let mut raw = 0.0;
    for &xi in x {
        let p = kde.density_at(xi);
        if p < floor || p <= 0.0 {
            continue;
        }
        let rho = kde.derivative_at(xi) / p;
        let term = (rho + (xi - mu) / sigma2).powi(2);
        raw += term;
        let correction = if opts.debias {
            ROUGHNESS_DK / (nf * h.powi(3) * p) + rho * rho * ROUGHNESS_K / (nf * h * p)
        } else {
            0.0
        };
        terms.push(term - correction);
    }
    let used = terms.len();
    if used < 2 {
        return Err(Error::Numerical("every sample point fell below the density floor".into()));
    }
    let uf = used as f64;
    let mean = terms.iter().sum::<f64>() / uf;
    let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (uf - 1.0);
    let clipped_fraction = (n - used) as f64 / nf;
    Ok(FisherEstimate {
        value: mean.max(0.0),
        raw_value: raw / uf,
        bandwidth: h,
        clipped_fraction,
        n,
        stderr: (var / uf).sqrt(),
        unreliable: clipped_fraction > 0.2,
    })
}

/// `(μ₁ − μ₂)²/σ₂⁴ + σ₁² (1/σ₂² − 1/σ₁²)²`: Fisher distance of `N(μ₁, σ₁²)` to `N(μ₂, σ₂²)`.
pub fn gaussian_fisher_oracle(mu1: f64, var1: f64, mu2: f64, var2: f64) -> Result<f64> {
    if !(var1 > 0.0 && var2 > 0.0) {
        return Err(Error::domain("variances must be positive"));
    }
    Ok((mu1 - mu2).powi(2) / (var2 * var2) + var1 * (1.0 / var2 - 1.0 / var1).powi(2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvEstimate {
    pub value: f64,
    /// Delete-a-group jackknife standard error.
    pub stderr: f64,
    pub bandwidth: f64,
}

const TV_NODES: usize = 2048;
const JACKKNIFE_GROUPS: usize = 10;

fn tv_with_bandwidth(a: &[f64], b: &[f64], h: f64) -> f64 {
    let (min, max) = a.iter().chain(b).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let lo = min - 3.0 * h;
    let hi = max + 3.0 * h;
    let ka = BinnedKde::covering(a, h, Some((lo, hi)));
    let kb = BinnedKde::covering(b, h, Some((lo, hi)));
    let step = (hi - lo) / (TV_NODES - 1) as f64;
    let mut total = 0.0;
    for i in 0..TV_NODES {
        let x = lo + i as f64 * step;
        let w = if i == 0 || i + 1 == TV_NODES { 0.5 } else { 1.0 };
        total += w * (ka.density_at(x) - kb.density_at(x)).abs();
    }
    0.5 * total * step
}

/// `½ ∫ |p̂_a − p̂_b|` with a shared pooled Silverman bandwidth.
pub fn tv_distance(a: &SampleSet, b: &SampleSet) -> Result<f64> {
    Ok(tv_distance_with_se(a, b)?.value)
}

pub fn tv_distance_with_se(a: &SampleSet, b: &SampleSet) -> Result<TvEstimate> {
    a.require(MIN_SAMPLES)?;
    b.require(MIN_SAMPLES)?;
    let pooled: Vec<f64> = a.values.iter().chain(&b.values).cloned().collect();
    let h = silverman_bandwidth(&pooled);
    if !(h > 0.0) {
        return Ok(TvEstimate { value: 0.0, stderr: 0.0, bandwidth: 0.0 });
    }
    let value = tv_with_bandwidth(&a.values, &b.values, h);
    let g = JACKKNIFE_GROUPS;
    let leave_out = |v: &[f64], k: usize| -> Vec<f64> { v.iter().enumerate().filter(|(i, _)| i % g != k).map(|(_, &x)| x).collect() };
    let reps: Vec<f64> = (0..g).map(|k| tv_with_bandwidth(&leave_out(&a.values, k), &leave_out(&b.values, k), h)).collect();
    let mean = reps.iter().sum::<f64>() / g as f64;
    let var = (g as f64 - 1.0) / g as f64 * reps.iter().map(|r| (r - mean).powi(2)).sum::<f64>();
    Ok(TvEstimate { value, stderr: var.sqrt(), bandwidth: h })
}

/// Closed-form total variation between `N(μ₁, σ²)` and `N(μ₂, σ²)`.
pub fn gaussian_tv_equal_variance(mu1: f64, mu2: f64, var: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    2.0 * normal.cdf((mu1 - mu2).abs() / (2.0 * var.sqrt())) - 1.0
}

/// Optional Malliavin inputs to [`decomposition_diagnostics`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MalliavinTerms {
    /// Mean of the nondegeneracy functional `Θ`.
    pub theta: f64,
    /// `E ∫ |D_r X̃|² dr`.
    pub first_derivative_sq: f64,
    /// `E ∫∫ |D_θ D_r X̃|² dθ dr`.
    pub second_derivative_sq: f64,
}

/// Measurable numerators of the Fisher bound: squared mean and variance gaps
/// plus the Malliavin scalings when provided.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub mean_gap_sq: f64,
    pub var_gap_sq: f64,
    pub malliavin: Option<MalliavinTerms>,
}

pub fn decomposition_diagnostics(
    samples: &SampleSet,
    mu: f64,
    sigma2: f64,
    malliavin: Option<MalliavinTerms>,
) -> Result<Decomposition> {
    samples.require(2)?;
    let n = samples.len() as f64;
    let m = samples.values.iter().sum::<f64>() / n;
    let v = samples.values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    Ok(Decomposition { mean_gap_sq: (m - mu).powi(2), var_gap_sq: (v - sigma2).powi(2), malliavin })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn normal_samples(seed: u64, n: usize, mu: f64, sd: f64) -> SampleSet {
        let mut rng = stream_rng(seed, 0);
        SampleSet::new((0..n).map(|_| mu + sd * rng.sample::<f64, _>(StandardNormal)).collect(), "normal").unwrap()
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(gaussian_fisher_oracle(0.0, 1.0, 0.0, 1.0).unwrap(), 0.0);
        assert_eq!(gaussian_fisher_oracle(0.0, 1.0, 0.0, 2.0).unwrap(), 0.25);
        assert_eq!(gaussian_fisher_oracle(1.0, 1.0, 0.0, 1.0).unwrap(), 1.0);
        assert!(gaussian_fisher_oracle(0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn score_examples() {
        let s = normal_samples(1, 100_000, 0.0, 1.0);
        let h = silverman_bandwidth(&s.values);
        let Score::Value(at0) = score_kde(&s, 0.0, h).unwrap() else { panic!() };
        // pointwise score noise is about 0.05 at this n and bandwidth
        assert!(at0.abs() < 0.15, "{at0}");
        let Score::Value(at1) = score_kde(&s, 1.0, h).unwrap() else { panic!() };
        assert!((at1 + 1.0).abs() < 0.15, "{at1}");
        assert_eq!(score_kde(&s, 40.0, h).unwrap(), Score::Clipped);

        let sym = SampleSet::new([-1.3, 1.3].repeat(200), "sym").unwrap();
        assert_eq!(score_kde(&sym, 0.0, 0.5).unwrap(), Score::Value(0.0));
        assert!(score_kde(&sym, 0.0, 0.0).is_err());
    }

    #[test]
    fn binned_kde_matches_exact_sums() {
        let s = normal_samples(2, 5000, 0.5, 2.0);
        let h = silverman_bandwidth(&s.values);
        let kde = BinnedKde::new(&s.values, h);
        for &x in &[-3.0, 0.0, 0.7, 2.5, 4.0] {
            let (mut p, mut dp) = (0.0, 0.0);
            for &xi in &s.values {
                let z = (x - xi) / h;
                let k = INV_SQRT_2PI * (-0.5 * z * z).exp() / (5000.0 * h);
                p += k;
                dp -= z * k / h;
            }
            assert!((kde.density_at(x) - p).abs() < 1e-4 * kde.peak(), "p at {x}");
            assert!((kde.derivative_at(x) - dp).abs() < 1e-3 * kde.peak() / h, "p' at {x}");
        }
    }

    #[test]
    fn gaussian_examples() {
        let s = normal_samples(3, 100_000, 0.0, 1.0);
        let same = fisher_distance(&s, 0.0, 1.0).unwrap();
        assert!(same.value < 0.05 && same.value >= 0.0);
        let wide = fisher_distance(&s, 0.0, 2.0).unwrap();
        assert!((wide.value / 0.25 - 1.0).abs() < 0.15, "{}", wide.value);
        let shifted = normal_samples(4, 100_000, 1.0, 1.0);
        let est = fisher_distance(&shifted, 0.0, 1.0).unwrap();
        assert!((est.value - 1.0).abs() < 0.15, "{}", est.value);
        assert!(!est.unreliable);
        let json = serde_json::to_string(&est.record()).unwrap();
        assert!(json.starts_with(r#"{"estimator":"fisher_kde","value":"#), "{json}");
        assert!(json.contains(r#""bandwidth":"#) && json.contains(r#""clipped_fraction":"#) && json.ends_with(r#""n":100000}"#));
    }

    #[test]
    fn location_scale_equivariance() {
        let s = normal_samples(5, 20_000, 0.3, 1.2);
        let base = fisher_distance(&s, 0.0, 1.0).unwrap().value;
        let (a, b) = (2.5, -4.0);
        let t = SampleSet::new(s.values.iter().map(|x| a * x + b).collect(), "t").unwrap();
        let moved = fisher_distance(&t, b, a * a).unwrap().value;
        assert!((moved - base / (a * a)).abs() < 1e-6 * base.max(1e-3), "{moved} vs {}", base / (a * a));
    }

    #[test]
    fn estimates_are_nonnegative_and_validate_inputs() {
        let s = normal_samples(6, 1000, 0.0, 1.0);
        for v in [0.5, 1.0, 3.0] {
            assert!(fisher_distance(&s, 0.0, v).unwrap().value >= 0.0);
        }
        assert!(fisher_distance(&s, 0.0, 0.0).is_err());
        let tiny = SampleSet::new(vec![0.0; 10], "tiny").unwrap();
        assert!(matches!(fisher_distance(&tiny, 0.0, 1.0), Err(Error::TooFewSamples { .. })));
        assert!(SampleSet::new(vec![f64::NAN], "bad").is_err());
    }

    #[test]
    fn total_variation_examples() {
        let a = normal_samples(7, 100_000, 0.0, 1.0);
        assert_eq!(tv_distance(&a, &a).unwrap(), 0.0);
        let b = normal_samples(8, 100_000, 4.0, 1.0);
        let tv = tv_distance(&a, &b).unwrap();
        let exact = gaussian_tv_equal_variance(0.0, 4.0, 1.0);
        assert!((exact - 0.9545).abs() < 1e-4);
        assert!((tv - exact).abs() < 0.02, "{tv} vs {exact}");
        let c = normal_samples(9, 20_000, 0.2, 1.0);
        let est = tv_distance_with_se(&a, &c).unwrap();
        let exact = gaussian_tv_equal_variance(0.0, 0.2, 1.0);
        assert!(est.stderr > 0.0 && (est.value - exact).abs() < 5.0 * est.stderr + 0.01, "{est:?} vs {exact}");
    }

    #[test]
    fn decomposition_terms() {
        let s = normal_samples(10, 10_000, 0.0, 1.0);
        let n = s.len() as f64;
        let m = s.values.iter().sum::<f64>() / n;
        let v = s.values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
        let d = decomposition_diagnostics(&s, m, v, None).unwrap();
        assert!(d.mean_gap_sq < 1e-20 && d.var_gap_sq < 1e-20);
        let d = decomposition_diagnostics(&s, 1.0, 3.0, None).unwrap();
        assert!(d.mean_gap_sq >= 0.0 && d.var_gap_sq >= 0.0);
    }
}

//! Uniform empirical measures on the real line.

use crate::error::{Error, Result};

/// Uniform probability measure on `N ≥ 1` finite atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMeasure {
    atoms: Vec<f64>,
    mean: f64,
    variance: f64,
}

impl EmpiricalMeasure {
    pub fn new(atoms: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::domain("empirical measure needs at least one atom"));
        }
        if let Some(i) = atoms.iter().position(|x| !x.is_finite()) {
            return Err(Error::domain(format!("atom {i} is not finite")));
        }
        let n = atoms.len() as f64;
        let mean = atoms.iter().sum::<f64>() / n;
        let variance = atoms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        Ok(Self { atoms, mean, variance })
    }

    /// Point mass at `x`.
    pub fn dirac(x: f64) -> Self {
        Self { atoms: vec![x], mean: x, variance: 0.0 }
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population variance (1/N normalisation).
    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// `(1/N) Σ |x_i|^p`.
    pub fn moment(&self, p: f64) -> Result<f64> {
        if !(p >= 1.0) {
            return Err(Error::domain(format!("moment order must be >= 1, got {p}")));
        }
        Ok(self.atoms.iter().map(|x| x.abs().powf(p)).sum::<f64>() / self.atoms.len() as f64)
    }

    fn sorted(&self) -> Vec<f64> {
        let mut v = self.atoms.clone();
        v.sort_by(f64::total_cmp);
        v
    }
}

/// `W_θ` between equal-size empirical measures via the monotone coupling.
pub fn wasserstein(mu: &EmpiricalMeasure, nu: &EmpiricalMeasure, theta: f64) -> Result<f64> {
    if !(theta >= 1.0) {
        return Err(Error::domain(format!("Wasserstein order must be >= 1, got {theta}")));
    }
    if mu.len() != nu.len() {
        return Err(Error::SizeMismatch(mu.len(), nu.len()));
    }
    let (a, b) = (mu.sorted(), nu.sorted());
    let n = a.len() as f64;
    let sum: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs().powf(theta)).sum();
    Ok((sum / n).powf(1.0 / theta))
}

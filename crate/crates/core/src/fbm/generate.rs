use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{num_complex::Complex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::{fbm_covariance, HurstIndex, TimeGrid};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FbmMethod {
    /// Davies–Harte circulant embedding of the increment covariance.
    #[default]
    Circulant,
    /// Cholesky factor of the full path covariance.
    Cholesky,
}

/// One sampled path on a grid, with the standard normals that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FbmPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub seed_normals: Vec<f64>,
}

impl FbmPath {
    pub fn increments(&self) -> Vec<f64> {
        self.values.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// Lower-triangular factor `L` of the covariance of `(B_{t_1}, …, B_{t_n})`.
///
/// Row `k` expresses `B_{t_{k+1}}` through the first `k + 1` innovations, so
/// the factor is causal: fixing innovations `0..j` fixes the path up to `t_j`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    n: usize,
    lower: Vec<f64>,
}

impl CholeskyFactor {
    pub fn new(h: HurstIndex, grid: TimeGrid) -> Result<Self> {
        let n = grid.n_steps();
        let times: Vec<f64> = (1..=n).map(|k| grid.point(k)).collect();
        let mut cov = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let c = fbm_covariance(h, times[i], times[j])?;
                cov[(i, j)] = c;
                cov[(j, i)] = c;
            }
        }
        let scale = cov.diagonal().max();
        for attempt in 0..4 {
            let mut m = cov.clone();
            if attempt > 0 {
                let jitter = scale * 10f64.powi(-14 + 2 * attempt);
                for i in 0..n {
                    m[(i, i)] += jitter;
                }
                log::debug!("Cholesky retry {attempt} with jitter {jitter:e}");
            }
            if let Some(ch) = m.cholesky() {
                let l = ch.l();
                let mut lower = Vec::with_capacity(n * (n + 1) / 2);
                for i in 0..n {
                    for j in 0..=i {
                        lower.push(l[(i, j)]);
                    }
                }
                return Ok(Self { n, lower });
            }
        }
        Err(Error::Cholesky(n))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        debug_assert!(j <= i);
        self.lower[i * (i + 1) / 2 + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.lower[start..start + i + 1]
    }

    /// Path values `B_{t_1..t_n}` for innovations `xi` (length `n`).
    pub fn apply(&self, xi: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            *o = self.row(i).iter().zip(xi).map(|(a, b)| a * b).sum();
        }
    }
}

enum Backend {
    Circulant { sqrt_eig: Vec<f64>, fft: Arc<dyn Fft<f64>> },
    Cholesky(CholeskyFactor),
}

/// Reusable sampler of fBm paths on a fixed grid.
pub struct FbmGenerator {
    h: HurstIndex,
    grid: TimeGrid,
    method: FbmMethod,
    backend: Backend,
    diagnostics: Vec<String>,
}

impl std::fmt::Debug for FbmGenerator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FbmGenerator")
            .field("h", &self.h)
            .field("grid", &self.grid)
            .field("method", &self.method)
            .field("diagnostics", &self.diagnostics)
            .finish()
    }
}

impl FbmGenerator {
    pub fn new(h: HurstIndex, grid: TimeGrid, method: FbmMethod) -> Result<Self> {
        let mut diagnostics = Vec::new();
        if method == FbmMethod::Circulant {
            match circulant_eigenvalues(h, grid) {
                Ok(eig) => {
                    let m = eig.len();
                    let sqrt_eig = eig.iter().map(|&l| (l.max(0.0) / m as f64).sqrt()).collect();
                    let fft = FftPlanner::new().plan_fft_forward(m);
                    return Ok(Self {
                        h,
                        grid,
                        method,
                        backend: Backend::Circulant { sqrt_eig, fft },
                        diagnostics,
                    });
                }
                Err(min) => {
                    let msg = format!("circulant embedding has eigenvalue {min:e}; falling back to Cholesky");
                    log::warn!("{msg}");
                    diagnostics.push(msg);
                }
            }
        }
        let factor = CholeskyFactor::new(h, grid)?;
        Ok(Self { h, grid, method: FbmMethod::Cholesky, backend: Backend::Cholesky(factor), diagnostics })
    }

    pub fn hurst(&self) -> HurstIndex {
        self.h
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    /// Method actually in use (after any fallback).
    pub fn method(&self) -> FbmMethod {
        self.method
    }

    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    /// Number of standard normals consumed per call of [`Self::sample_pair_into`].
    fn normals_per_draw(&self) -> usize {
        match &self.backend {
            Backend::Circulant { sqrt_eig, .. } => 2 * sqrt_eig.len(),
            Backend::Cholesky(f) => 2 * f.dim(),
        }
    }

    /// Full path for `(seed, stream)`.
    pub fn sample(&self, seed: u64, stream: u64) -> FbmPath {
        let n = self.grid.n_steps();
        let mut rng = stream_rng(seed, stream);
        let normals: Vec<f64> = (0..self.normals_per_draw()).map(|_| rng.sample(StandardNormal)).collect();
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        self.increments_from_normals(&normals, &mut a, &mut b);
        let mut values = Vec::with_capacity(n + 1);
        values.push(0.0);
        let mut acc = 0.0;
        for d in a {
            acc += d;
            values.push(acc);
        }
        FbmPath { grid: self.grid, values, seed_normals: normals }
    }

    /// Two independent increment sequences from one random draw. Both the real
    /// and the imaginary part of the circulant transform are exact samples.
    pub fn sample_pair_into<R: Rng + ?Sized>(&self, rng: &mut R, first: &mut [f64], second: &mut [f64]) {
        let normals: Vec<f64> = (0..self.normals_per_draw()).map(|_| rng.sample(StandardNormal)).collect();
        self.increments_from_normals(&normals, first, second);
    }

    fn increments_from_normals(&self, normals: &[f64], first: &mut [f64], second: &mut [f64]) {
        let n = self.grid.n_steps();
        match &self.backend {
            Backend::Circulant { sqrt_eig, fft } => {
                let mut buf: Vec<Complex<f64>> = sqrt_eig
                    .iter()
                    .enumerate()
                    .map(|(j, &s)| Complex::new(s * normals[2 * j], s * normals[2 * j + 1]))
                    .collect();
                fft.process(&mut buf);
                for k in 0..n {
                    first[k] = buf[k].re;
                    second[k] = buf[k].im;
                }
            }
            Backend::Cholesky(f) => {
                for (xi, out) in [(&normals[..n], &mut *first), (&normals[n..], &mut *second)] {
                    let mut prev = 0.0;
                    for (i, o) in out.iter_mut().enumerate().take(n) {
                        let v: f64 = f.row(i).iter().zip(xi).map(|(a, b)| a * b).sum();
                        *o = v - prev;
                        prev = v;
                    }
                }
            }
        }
    }
}

/// Eigenvalues of the circulant embedding of the fGn covariance, or the most
/// negative one if the embedding is not PSD.
fn circulant_eigenvalues(h: HurstIndex, grid: TimeGrid) -> std::result::Result<Vec<f64>, f64> {
    let n = grid.n_steps();
    let e = 2.0 * h.value();
    let scale = grid.dt().powf(e);
    let gamma = |k: usize| {
        let k = k as f64;
        0.5 * scale * ((k + 1.0).powf(e) + (k - 1.0).abs().powf(e) - 2.0 * k.powf(e))
    };
    let m = 2 * n;
    let mut c: Vec<Complex<f64>> = (0..m)
        .map(|j| {
            let lag = if j <= n { j } else { m - j };
            Complex::new(gamma(lag), 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(m).process(&mut c);
    let eig: Vec<f64> = c.iter().map(|z| z.re).collect();
    let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-10 {
        Err(min)
    } else {
        Ok(eig)
    }
}

/// Single path with stream 0.
pub fn generate_fbm(h: HurstIndex, grid: TimeGrid, seed: u64, method: FbmMethod) -> Result<FbmPath> {
    Ok(FbmGenerator::new(h, grid, method)?.sample(seed, 0))
}

//! Malliavin derivatives of the particle solution along stored paths.
//!
//! With `σ` free of the state, `D_r X_t` solves the linear equation
//! `D_r X_t = ε^H ∫_r^t σ(s, μ_s) ∂K_H/∂s (s, r) ds + ∫_r^t ∂b/∂x (u, X_u, μ_u) D_r X_u du`
//! whose solution is
//! `D_r X_t = ε^H ∫_r^t σ(s, μ_s) ∂K_H/∂s (s, r) exp(∫_s^t ∂b/∂x (u, X_u, μ_u) du) ds`.
//! Coefficients are frozen on grid cells (left-point values), matching the
//! Euler scheme that produced the path.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fbm::{CholeskyFactor, HurstIndex, TimeGrid, VolterraKernel};
use crate::mckean::{CoefficientModel, OdePath, ParticleEnsemble};
use crate::measure::EmpiricalMeasure;
use crate::quadrature::{gl32, gl8, left_power, left_power_graded, power_nodes, GaussLegendre};
use crate::rng::stream_rng;

/// Frozen empirical measures `μ_{t_k}` of a particle run.
#[derive(Debug, Clone)]
pub struct MeasureHistory {
    grid: TimeGrid,
    measures: Vec<EmpiricalMeasure>,
}

impl MeasureHistory {
    pub fn from_ensemble(ensemble: &ParticleEnsemble) -> Self {
        Self { grid: ensemble.grid, measures: ensemble.measure_history() }
    }

    /// Point masses along a deterministic path.
    pub fn from_ode(ode: &OdePath) -> Self {
        Self { grid: ode.grid, measures: (0..ode.values.len()).map(|k| ode.law(k)).collect() }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn at(&self, k: usize) -> &EmpiricalMeasure {
        &self.measures[k]
    }
}

/// A particle path together with the innovations of its driving fBm in the
/// causal Cholesky representation, which allows conditioning on `F_r`.
#[derive(Debug, Clone)]
pub struct TaggedPath {
    pub values: Vec<f64>,
    pub innovations: Vec<f64>,
}

/// `D_r X_t` for a fixed `t` and several `r`.
#[derive(Debug, Clone, Serialize)]
pub struct MalliavinSlice {
    pub t: f64,
    pub epsilon: f64,
    pub h: f64,
    pub r: Vec<f64>,
    pub d_values: Vec<f64>,
}

impl MalliavinSlice {
    /// CSV `t,r,d_first`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "t,r,d_first")?;
        for (r, d) in self.r.iter().zip(&self.d_values) {
            writeln!(w, "{:?},{r:?},{d:?}", self.t)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThetaValue {
    pub t: f64,
    pub value: f64,
    pub epsilon: f64,
}

/// CSV `t,theta`.
pub fn write_theta_csv<W: Write>(w: &mut W, values: &[ThetaValue]) -> Result<()> {
    writeln!(w, "t,theta")?;
    for v in values {
        writeln!(w, "{:?},{:?}", v.t, v.value)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaOptions {
    /// Continuations per conditioning cell.
    pub continuations: usize,
    pub seed: u64,
}

impl Default for ThetaOptions {
    fn default() -> Self {
        Self { continuations: 64, seed: 0 }
    }
}

/// Result of the nondegeneracy check `|∫_0^t (∫_r^t σ ∂K_H/∂s ds)² dr|^{−p_0}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonDegeneracy {
    pub t: f64,
    pub p0: f64,
    /// The inner functional `∫_0^t (∫_r^t σ ∂K_H/∂s ds)² dr`.
    pub functional: f64,
    /// `functional^{−p_0}`, or `+∞` when the functional vanishes.
    pub value: f64,
    pub diagnostic: Option<String>,
}

/// Derivative calculator for one measure history and noise level.
pub struct Malliavin<'a> {
    model: &'a dyn CoefficientModel,
    history: &'a MeasureHistory,
    kernel: VolterraKernel,
    epsilon: f64,
    sigma: Vec<f64>,
}

impl<'a> Malliavin<'a> {
    pub fn new(model: &'a dyn CoefficientModel, history: &'a MeasureHistory, h: HurstIndex, epsilon: f64) -> Result<Self> {
        Self::with_kernel(model, history, VolterraKernel::new(h)?, epsilon)
    }

    pub fn with_kernel(
        model: &'a dyn CoefficientModel,
        history: &'a MeasureHistory,
        kernel: VolterraKernel,
        epsilon: f64,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::domain(format!("epsilon must lie in (0, 1], got {epsilon}")));
        }
        let grid = history.grid;
        let sigma = (0..=grid.n_steps()).map(|k| model.diffusion(grid.point(k), history.at(k))).collect();
        Ok(Self { model, history, kernel, epsilon, sigma })
    }

    pub fn grid(&self) -> TimeGrid {
        self.history.grid
    }

    fn scale(&self) -> f64 {
        self.epsilon.powf(self.kernel.hurst().value())
    }

    /// `∂b/∂x (t_k, X_k, μ_k)` along a path.
    pub fn decay(&self, path: &[f64]) -> Vec<f64> {
        let grid = self.grid();
        path.iter()
            .enumerate()
            .map(|(k, &x)| self.model.drift_dx(grid.point(k), x, self.history.at(k)))
            .collect()
    }

    fn check_path(&self, path: &[f64]) -> Result<()> {
        if path.len() != self.grid().n_steps() + 1 {
            return Err(Error::domain("path length does not match the measure history grid"));
        }
        Ok(())
    }

    /// `D_r X_t` for a grid point `t` and any `r`. Zero when `r > t`.
    pub fn first(&self, path: &[f64], r: f64, t: f64) -> Result<f64> {
        self.check_path(path)?;
        self.grid().index_of(t)?;
        if r > t {
            return Ok(0.0);
        }
        if !(r > 0.0) {
            return Err(Error::domain(format!("r must be positive, got {r}")));
        }
        let decay = self.decay(path);
        Ok(self.scale() * self.unscaled(&decay, r, t, true, gl8()))
    }

    /// `D_r X_s` for any `0 < r ≤ s ≤ T` (not necessarily grid points).
    pub fn first_at(&self, path: &[f64], r: f64, s: f64) -> Result<f64> {
        self.check_path(path)?;
        if !(r > 0.0 && s <= self.grid().t_end()) {
            return Err(Error::domain(format!("need 0 < r and s <= T, got r={r}, s={s}")));
        }
        if r >= s {
            return Ok(0.0);
        }
        let decay = self.decay(path);
        Ok(self.scale() * self.unscaled(&decay, r, s, true, gl8()))
    }

    pub fn slice(&self, path: &[f64], t: f64, rs: &[f64]) -> Result<MalliavinSlice> {
        let d_values = rs.iter().map(|&r| self.first(path, r, t)).collect::<Result<Vec<_>>>()?;
        Ok(MalliavinSlice {
            t,
            epsilon: self.epsilon,
            h: self.kernel.hurst().value(),
            r: rs.to_vec(),
            d_values,
        })
    }

    /// `∫_r^s σ_c ∂K_H/∂u (u, r) exp(∫_u^s a) du` with cell-wise constant
    /// `σ` and `a`; without the `ε^H` prefactor. `with_decay = false` drops
    /// the exponential.
    fn unscaled(&self, decay: &[f64], r: f64, s: f64, with_decay: bool, rule: &GaussLegendre) -> f64 {
        if r >= s {
            return 0.0;
        }
        let grid = self.grid();
        let alpha = self.kernel.hurst().value() - 0.5;
        let first = grid.cell_of(r);
        let last = grid.cell_of(s);
        let last = if grid.point(last) >= s && last > first { last - 1 } else { last };
        // tail[c] = ∫_{t_{c+1}}^s a for cells c in first..=last
        let mut tail = vec![0.0; last - first + 1];
        if with_decay {
            let mut acc = 0.0;
            for c in (first..=last).rev() {
                tail[c - first] = acc;
                let lo = grid.point(c);
                let hi = grid.point(c + 1).min(s);
                acc += decay[c] * (hi - lo);
            }
        }
        let mut total = 0.0;
        for c in first..=last {
            let sig = self.sigma[c];
            if sig == 0.0 {
                continue;
            }
            let a = if with_decay { decay[c] } else { 0.0 };
            let hi = grid.point(c + 1).min(s);
            let lo = grid.point(c).max(r);
            let end_tail = tail[c - first];
            let f = |u: f64| self.kernel.derivative_smooth_part(u, r) * (a * (hi - u) + end_tail).exp();
            let v = if c == first {
                left_power_graded(f, r, alpha, lo, hi, rule)
            } else {
                left_power(f, r, alpha, lo, hi, rule, 1)
            };
            total += sig * v;
        }
        total
    }

    /// Quadrature nodes `(cell, r, weight)` for `∫_0^t g(r) dr` with the
    /// endpoint behaviour of `(D_r X_t)²`: `r^{1−2H}` at 0 and `(t − r)^{2H−1}` at t.
    fn r_nodes(&self, m: usize, rule: &GaussLegendre) -> Vec<(usize, f64, f64)> {
        let grid = self.grid();
        let h = self.kernel.hurst().value();
        let mut nodes = Vec::with_capacity(8 * m + 8);
        for c in 0..m {
            let (a, b) = (grid.point(c), grid.point(c + 1));
            let mut push = |pts: Vec<(f64, f64)>| nodes.extend(pts.into_iter().map(|(r, w)| (c, r, w)));
            match (c == 0, c + 1 == m) {
                (true, true) => {
                    let mid = 0.5 * (a + b);
                    push(power_nodes(a, mid, 2.0 - 2.0 * h, true, rule));
                    push(power_nodes(mid, b, 2.0 * h, false, rule));
                }
                (true, false) => push(power_nodes(a, b, 2.0 - 2.0 * h, true, rule)),
                (false, true) => push(power_nodes(a, b, 2.0 * h, false, rule)),
                (false, false) => push(rule.mapped(a, b).collect()),
            }
        }
        nodes
    }

    /// Path driven by a fresh fBm sample in Cholesky form, evolved through
    /// the frozen measure history.
    pub fn tag_path(&self, causal: &CholeskyFactor, seed: u64, stream: u64) -> Result<TaggedPath> {
        let n = self.grid().n_steps();
        if causal.dim() != n {
            return Err(Error::domain("Cholesky factor does not match the grid"));
        }
        let mut rng = stream_rng(seed, stream);
        let innovations: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let mut fbm = vec![0.0; n];
        causal.apply(&innovations, &mut fbm);
        let values = self.evolve(0, self.model.initial_value(), &fbm)?;
        Ok(TaggedPath { values, innovations })
    }

    /// Euler evolution from step `start` with state `x`, given `B_{t_1..t_n}`.
    fn evolve(&self, start: usize, x: f64, fbm: &[f64]) -> Result<Vec<f64>> {
        let grid = self.grid();
        let n = grid.n_steps();
        let dt = grid.dt();
        let scale = self.scale();
        let mut out = vec![0.0; n + 1];
        out[start] = x;
        let mut x = x;
        for k in start..n {
            let b_prev = if k == 0 { 0.0 } else { fbm[k - 1] };
            let t = grid.point(k);
            x += self.model.drift(t, x, self.history.at(k)) * dt + scale * self.sigma[k] * (fbm[k] - b_prev);
            if !x.is_finite() {
                return Err(Error::NonFinite { step: k + 1, particle: 0 });
            }
            out[k + 1] = x;
        }
        Ok(out)
    }

    /// `Θ = ε^{−2H} ∫_0^t D_r X_t E[D_r X_t | F_r] dr`.
    ///
    /// `F_r` is approximated by the information up to the grid point below
    /// `r`: the path's first innovations are kept and the rest resampled.
    pub fn theta(&self, path: &TaggedPath, causal: &CholeskyFactor, t: f64, opts: ThetaOptions) -> Result<ThetaValue> {
        self.check_path(&path.values)?;
        let m = self.grid().index_of(t)?;
        if m == 0 {
            return Ok(ThetaValue { t, value: 0.0, epsilon: self.epsilon });
        }
        let n = self.grid().n_steps();
        let decay = self.decay(&path.values);
        let nodes = self.r_nodes(m, gl8());
        let state_free = self.model.drift_dx_is_state_free();
        let mut value = 0.0;
        let mut cell = usize::MAX;
        let mut continuation_decays: Vec<Vec<f64>> = Vec::new();
        for &(c, r, w) in &nodes {
            let d = self.unscaled(&decay, r, t, true, gl8());
            if state_free {
                value += w * d * d;
                continue;
            }
            if c != cell {
                cell = c;
                continuation_decays.clear();
                let mut rng = stream_rng(opts.seed, c as u64);
                let mut xi = path.innovations.clone();
                let mut fbm = vec![0.0; n];
                for _ in 0..opts.continuations {
                    for v in xi.iter_mut().skip(c) {
                        *v = rng.sample(StandardNormal);
                    }
                    causal.apply(&xi, &mut fbm);
                    let cont = self.evolve(c, path.values[c], &fbm)?;
                    continuation_decays.push(self.decay(&cont));
                }
            }
            let cond: f64 = continuation_decays.iter().map(|dec| self.unscaled(dec, r, t, true, gl8())).sum::<f64>()
                / continuation_decays.len() as f64;
            value += w * d * cond;
        }
        let min_sigma = self.sigma[..m].iter().cloned().fold(f64::INFINITY, f64::min);
        if min_sigma > 0.0 && !(value > 0.0) {
            return Err(Error::Numerical(format!("Θ = {value} is not positive although σ >= {min_sigma}")));
        }
        Ok(ThetaValue { t, value, epsilon: self.epsilon })
    }

    /// `∫_0^t (∫_r^t σ(s, μ_s) ∂K_H/∂s (s, r) ds)² dr`.
    pub fn kernel_functional(&self, t: f64) -> Result<f64> {
        let m = self.grid().index_of(t)?;
        let zeros = vec![0.0; self.grid().n_steps() + 1];
        let mut nodes = self.r_nodes(m, gl32());
        if m > 1 {
            // the square has mixed powers r^{1−2H}, r^0, r^{2H−1} at 0: grade the first cell dyadically
            nodes.retain(|n| n.0 != 0);
            let h = self.kernel.hurst().value();
            let mut hi = self.grid().point(1);
            for _ in 0..40 {
                nodes.extend(gl32().mapped(0.5 * hi, hi).map(|(r, w)| (0, r, w)));
                hi *= 0.5;
            }
            nodes.extend(power_nodes(0.0, hi, 2.0 - 2.0 * h, true, gl32()).into_iter().map(|(r, w)| (0, r, w)));
        }
        Ok(nodes
            .iter()
            .map(|&(_, r, w)| {
                let j = self.unscaled(&zeros, r, t, false, gl32());
                w * j * j
            })
            .sum())
    }

    /// Lower bound `e^{−2 K T} ∫_0^t (∫_r^t σ ∂K_H/∂s ds)² dr` for `Θ`, valid when
    /// `∂b/∂x ≥ −K` and `σ ≥ 0`.
    pub fn theta_lower_bound(&self, t: f64) -> Result<f64> {
        let budget = self.model.lipschitz_budget();
        Ok((-2.0 * budget * self.grid().t_end()).exp() * self.kernel_functional(t)?)
    }

    pub fn nondegeneracy(&self, t: f64, p0: f64) -> Result<NonDegeneracy> {
        if !(p0 > 16.0) {
            return Err(Error::domain(format!("p0 must exceed 16, got {p0}")));
        }
        if !(t > 0.0) {
            return Err(Error::domain("t must be positive"));
        }
        let functional = self.kernel_functional(t)?;
        if functional <= 0.0 {
            return Ok(NonDegeneracy {
                t,
                p0,
                functional,
                value: f64::INFINITY,
                diagnostic: Some("kernel functional vanishes: diffusion is degenerate on [0, t]".into()),
            });
        }
        let value = functional.powf(-p0);
        let diagnostic = (!value.is_finite()).then(|| "functional^-p0 overflows".to_string());
        Ok(NonDegeneracy { t, p0, functional, value, diagnostic })
    }

    /// `D_θ D_r X_t` by explicit Euler of
    /// `Y' = ∂b/∂x Y + ∂²b/∂x² D_r X D_θ X`, `Y = 0` at `r ∨ θ`.
    pub fn second(&self, path: &[f64], theta_time: f64, r: f64, t: f64) -> Result<f64> {
        self.check_path(path)?;
        let grid = self.grid();
        let m = grid.index_of(t)?;
        let kr = grid.index_of(r)?;
        let kq = grid.index_of(theta_time)?;
        if !(r > 0.0 && theta_time > 0.0) || r >= t || theta_time >= t {
            return Err(Error::domain(format!("need 0 < r, θ < t, got r={r}, θ={theta_time}, t={t}")));
        }
        let dt = grid.dt();
        let decay = self.decay(path);
        let scale = self.scale();
        let mut y = 0.0;
        for k in kr.max(kq)..m {
            let tk = grid.point(k);
            let curv = self.model.drift_dxx(tk, path[k], self.history.at(k));
            let source = if curv == 0.0 {
                0.0
            } else {
                let dr = scale * self.unscaled(&decay, r, tk, true, gl8());
                let dq = scale * self.unscaled(&decay, theta_time, tk, true, gl8());
                curv * dr * dq
            };
            y += (decay[k] * y + source) * dt;
        }
        Ok(y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::FbmMethod;
    use crate::fbm::FbmGenerator;
    use crate::mckean::{solve_ode, solve_particles_with_noise, DrivingNoise, MeanFieldOu, PureNoise};
    use crate::quadrature::gl32;

    fn hurst(v: f64) -> HurstIndex {
        HurstIndex::new(v).unwrap()
    }

    fn ensemble(model: &dyn CoefficientModel, n_steps: usize, eps: f64, h: HurstIndex) -> ParticleEnsemble {
        let grid = TimeGrid::new(1.0, n_steps).unwrap();
        let gen = FbmGenerator::new(h, grid, FbmMethod::Circulant).unwrap();
        let noise = DrivingNoise::generate(&gen, 17, 200);
        solve_particles_with_noise(model, &noise, eps, h).unwrap()
    }

    #[test]
    fn pure_noise_first_derivative_is_kernel() {
        let h = hurst(0.7);
        let ens = ensemble(&PureNoise::default(), 64, 0.3, h);
        let hist = MeasureHistory::from_ensemble(&ens);
        let model = PureNoise::default();
        let mal = Malliavin::new(&model, &hist, h, 0.3).unwrap();
        let kernel = VolterraKernel::new(h).unwrap();
        let path = ens.trajectory(5);
        for &r in &[1.0 / 64.0, 0.1, 0.37, 0.5, 0.98] {
            let d = mal.first(&path, r, 1.0).unwrap();
            let want = 0.3f64.powf(0.7) * kernel.value(1.0, r).unwrap();
            assert!((d / want - 1.0).abs() < 1e-6, "r={r}: {d} vs {want}");
        }
        assert_eq!(mal.first(&path, 0.8, 0.5).unwrap(), 0.0);
        assert!(mal.first(&path, 0.0, 0.5).is_err());
    }

    #[test]
    fn closed_form_solves_the_linear_equation() {
        // D_r X_s = ε^H ∫_r^s σ ∂K ds + ∫_r^s a(u) D_r X_u du, checked at s = 1
        // with the first term from kernel values and the second by Gauss–Legendre.
        let h = hurst(0.7);
        let model = MeanFieldOu::new(0.5, 0.25, 0.5, 1.0).with_curvature(1.0, 0.7);
        let eps = 0.25;
        let ens = ensemble(&model, 32, eps, h);
        let hist = MeasureHistory::from_ensemble(&ens);
        let mal = Malliavin::new(&model, &hist, h, eps).unwrap();
        let kernel = VolterraKernel::new(h).unwrap();
        let grid = hist.grid();
        let path = ens.trajectory(3);
        let decay = mal.decay(&path);
        let scale = eps.powf(0.7);
        for &r in &[0.05, 0.3, 0.61] {
            let lhs = mal.first(&path, r, 1.0).unwrap();
            let mut source = 0.0;
            let mut feedback = 0.0;
            for c in grid.cell_of(r)..grid.n_steps() {
                let lo = grid.point(c).max(r);
                let hi = grid.point(c + 1);
                let k_lo = if lo == r { 0.0 } else { kernel.value(lo, r).unwrap() };
                source += mal.sigma[c] * (kernel.value(hi, r).unwrap() - k_lo);
                feedback += decay[c]
                    * left_power(|u| mal.first_at(&path, r, u).unwrap() / (u - r).powf(0.2), r, 1.2, lo, hi, gl32(), 1);
            }
            let rhs = scale * source + feedback;
            assert!((lhs - rhs).abs() < 1e-4 * lhs.abs().max(1e-3), "r={r}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn pure_noise_theta_and_nondegeneracy() {
        let h = hurst(0.7);
        let model = PureNoise::default();
        let ens = ensemble(&model, 32, 0.5, h);
        let hist = MeasureHistory::from_ensemble(&ens);
        let mal = Malliavin::new(&model, &hist, h, 0.5).unwrap();
        let causal = CholeskyFactor::new(h, hist.grid()).unwrap();
        let path = mal.tag_path(&causal, 1, 0).unwrap();
        for &t in &[0.25, 0.5, 1.0] {
            let th = mal.theta(&path, &causal, t, ThetaOptions::default()).unwrap();
            let want = t.powf(1.4);
            assert!((th.value / want - 1.0).abs() < 1e-3, "t={t}: {} vs {want}", th.value);
        }
        let nd = mal.nondegeneracy(1.0, 17.0).unwrap();
        assert!((nd.value - 1.0).abs() < 1e-9, "{:.15}", nd.value);
        let nd = mal.nondegeneracy(0.5, 17.0).unwrap();
        assert!((nd.value / 0.5f64.powf(-23.8) - 1.0).abs() < 1e-2, "{}", nd.value);
        assert!((0.5f64.powf(-23.8) - 1.46e7).abs() < 0.01e7);
        assert!(mal.nondegeneracy(1.0, 16.0).is_err());
    }

    #[test]
    fn degenerate_diffusion_gives_infinite_sentinel() {
        let h = hurst(0.7);
        let model = MeanFieldOu::new(1.0, 0.0, 0.0, 0.0);
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let ode = solve_ode(&model, grid).unwrap();
        let hist = MeasureHistory::from_ode(&ode);
        let mal = Malliavin::new(&model, &hist, h, 0.5).unwrap();
        let nd = mal.nondegeneracy(1.0, 20.0).unwrap();
        assert_eq!(nd.value, f64::INFINITY);
        assert!(nd.diagnostic.is_some());
    }

    #[test]
    fn theta_exceeds_its_lower_bound() {
        let h = hurst(0.7);
        let model = MeanFieldOu::new(0.5, 0.25, 0.5, 1.0).with_curvature(1.0, 0.7);
        let ens = ensemble(&model, 32, 0.5, h);
        let hist = MeasureHistory::from_ensemble(&ens);
        let mal = Malliavin::new(&model, &hist, h, 0.5).unwrap();
        let causal = CholeskyFactor::new(h, hist.grid()).unwrap();
        for stream in 0..3 {
            let path = mal.tag_path(&causal, 5, stream).unwrap();
            let th = mal.theta(&path, &causal, 1.0, ThetaOptions { continuations: 16, seed: stream }).unwrap();
            let lb = mal.theta_lower_bound(1.0).unwrap();
            assert!(th.value > 0.0);
            assert!(th.value >= lb, "{} < {lb}", th.value);
        }
    }

    #[test]
    fn second_derivative_vanishes_for_linear_drift() {
        let h = hurst(0.7);
        for model in [
            Box::new(MeanFieldOu::new(1.0, 0.5, 0.3, 1.0)) as Box<dyn CoefficientModel>,
            Box::new(PureNoise::default()),
        ] {
            let ens = ensemble(model.as_ref(), 16, 0.5, h);
            let hist = MeasureHistory::from_ensemble(&ens);
            let mal = Malliavin::new(model.as_ref(), &hist, h, 0.5).unwrap();
            let path = ens.trajectory(0);
            assert_eq!(mal.second(&path, 0.25, 0.5, 1.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn csv_dumps() {
        let h = hurst(0.6);
        let model = PureNoise::default();
        let ens = ensemble(&model, 8, 0.5, h);
        let hist = MeasureHistory::from_ensemble(&ens);
        let mal = Malliavin::new(&model, &hist, h, 0.5).unwrap();
        let slice = mal.slice(&ens.trajectory(0), 1.0, &[0.25, 0.5]).unwrap();
        let mut out = Vec::new();
        slice.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("t,r,d_first\n1.0,0.25,"));
        let mut out = Vec::new();
        write_theta_csv(&mut out, &[ThetaValue { t: 1.0, value: 1.0, epsilon: 0.5 }]).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "t,theta\n1.0,1.0\n");
    }
}

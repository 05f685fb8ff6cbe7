use std::io::Write;

use super::{probe_lipschitz, CoefficientModel};
use crate::error::{Error, Result};
use crate::fbm::{FbmGenerator, FbmMethod, HurstIndex, TimeGrid};
use crate::measure::EmpiricalMeasure;
use crate::rng::stream_rng;

/// Increments of independent fBm paths on a common grid, stored path-major.
#[derive(Debug, Clone)]
pub struct DrivingNoise {
    grid: TimeGrid,
    n_paths: usize,
    increments: Vec<f64>,
}

impl DrivingNoise {
    /// Path pair `p` uses random stream `p` of `seed`, so any prefix of paths
    /// is independent of how many paths are requested.
    pub fn generate(generator: &FbmGenerator, seed: u64, n_paths: usize) -> Self {
        let grid = generator.grid();
        let n = grid.n_steps();
        let mut increments = vec![0.0; n_paths.div_ceil(2) * 2 * n];
        for (p, chunk) in increments.chunks_mut(2 * n).enumerate() {
            let mut rng = stream_rng(seed, p as u64);
            let (a, b) = chunk.split_at_mut(n);
            generator.sample_pair_into(&mut rng, a, b);
        }
        increments.truncate(n_paths * n);
        Self { grid, n_paths, increments }
    }

    pub fn from_increments(grid: TimeGrid, n_paths: usize, increments: Vec<f64>) -> Result<Self> {
        if increments.len() != n_paths * grid.n_steps() {
            return Err(Error::domain("increment array does not match grid and path count"));
        }
        Ok(Self { grid, n_paths, increments })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn len(&self) -> usize {
        self.n_paths
    }

    pub fn is_empty(&self) -> bool {
        self.n_paths == 0
    }

    pub fn path_increments(&self, i: usize) -> &[f64] {
        let n = self.grid.n_steps();
        &self.increments[i * n..(i + 1) * n]
    }

    #[inline]
    pub fn increment(&self, i: usize, k: usize) -> f64 {
        self.increments[i * self.grid.n_steps() + k]
    }

    /// `B^H` at the grid points of path `i`.
    pub fn path_values(&self, i: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.grid.n_steps() + 1);
        out.push(0.0);
        let mut acc = 0.0;
        for d in self.path_increments(i) {
            acc += d;
            out.push(acc);
        }
        out
    }
}

/// Trajectories of `N` interacting particles, stored time-major.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    pub grid: TimeGrid,
    pub epsilon: f64,
    pub h: HurstIndex,
    pub n_particles: usize,
    pub seed: Option<u64>,
    pub model_id: &'static str,
    states: Vec<f64>,
}

impl ParticleEnsemble {
    /// Positions of all particles at step `k`.
    pub fn step(&self, k: usize) -> &[f64] {
        &self.states[k * self.n_particles..(k + 1) * self.n_particles]
    }

    pub fn state(&self, k: usize, i: usize) -> f64 {
        self.states[k * self.n_particles + i]
    }

    pub fn trajectory(&self, i: usize) -> Vec<f64> {
        (0..=self.grid.n_steps()).map(|k| self.state(k, i)).collect()
    }

    pub fn measure(&self, k: usize) -> EmpiricalMeasure {
        EmpiricalMeasure::new(self.step(k).to_vec()).expect("states are finite")
    }

    /// Empirical measures at every grid point.
    pub fn measure_history(&self) -> Vec<EmpiricalMeasure> {
        (0..=self.grid.n_steps()).map(|k| self.measure(k)).collect()
    }

    /// CSV with header `t,particle_id,value`, one row per grid point and particle.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "t,particle_id,value")?;
        for k in 0..=self.grid.n_steps() {
            let t = self.grid.point(k);
            for (i, v) in self.step(k).iter().enumerate() {
                writeln!(w, "{t:?},{i},{v:?}")?;
            }
        }
        Ok(())
    }
}

/// Euler scheme for the particle system driven by fresh circulant-embedding noise.
pub fn solve_particles(
    model: &dyn CoefficientModel,
    grid: TimeGrid,
    n_particles: usize,
    epsilon: f64,
    h: HurstIndex,
    seed: u64,
) -> Result<ParticleEnsemble> {
    for v in probe_lipschitz(model, grid.t_end(), seed, 64) {
        log::warn!("{} Lipschitz probe: {v}", model.id());
    }
    let generator = FbmGenerator::new(h, grid, FbmMethod::Circulant)?;
    let noise = DrivingNoise::generate(&generator, seed, n_particles);
    let mut ens = solve_particles_with_noise(model, &noise, epsilon, h)?;
    ens.seed = Some(seed);
    Ok(ens)
}

/// `X_{k+1} = X_k + b(t_k, X_k, μ_k) Δ + ε^H σ(t_k, μ_k) ΔB_k` with `μ_k` the
/// empirical measure of all particles at step `k`.
pub fn solve_particles_with_noise(
    model: &dyn CoefficientModel,
    noise: &DrivingNoise,
    epsilon: f64,
    h: HurstIndex,
) -> Result<ParticleEnsemble> {
    let n = noise.len();
    if n < 2 {
        return Err(Error::domain(format!("need at least 2 particles, got {n}")));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::domain(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    let grid = noise.grid();
    let steps = grid.n_steps();
    let dt = grid.dt();
    let scale = epsilon.powf(h.value());
    let mut states = vec![0.0; (steps + 1) * n];
    states[..n].fill(model.initial_value());
    for k in 0..steps {
        let t = grid.point(k);
        let (done, rest) = states.split_at_mut((k + 1) * n);
        let current = &done[k * n..];
        let mu = EmpiricalMeasure::new(current.to_vec()).map_err(|_| Error::NonFinite { step: k, particle: 0 })?;
        let sig = scale * model.diffusion(t, &mu);
        for (i, (next, &x)) in rest[..n].iter_mut().zip(current).enumerate() {
            let v = x + model.drift(t, x, &mu) * dt + sig * noise.increment(i, k);
            if !v.is_finite() {
                return Err(Error::NonFinite { step: k + 1, particle: i });
            }
            *next = v;
        }
    }
    Ok(ParticleEnsemble { grid, epsilon, h, n_particles: n, seed: None, model_id: model.id(), states })
}

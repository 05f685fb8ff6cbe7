//! Distribution-dependent SDEs: coefficient models, the particle solver,
//! the deterministic limit and the Gaussian fluctuation limit.

mod limit;
mod model;
mod ode;
mod particles;

pub use limit::{fluctuation, limit_law, limit_law_with, simulate_u, simulate_z, simulate_z_with_noise, LimitLaw};
pub use model::{probe_lipschitz, CoefficientModel, MeanFieldOu, ModelSpec, PureNoise};
pub use ode::{solve_ode, solve_ode_with, OdePath, OdeScheme};
pub use particles::{solve_particles, solve_particles_with_noise, DrivingNoise, ParticleEnsemble};

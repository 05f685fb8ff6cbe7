//! Small-noise McKean–Vlasov equations driven by fractional Brownian motion.
//!
//! The crate is organised bottom-up:
//!
//! * [`fbm`]: Hurst index, time grids, the Volterra kernel, Cameron–Martin
//!   products and exact path generation.
//! * [`measure`]: empirical measures and one-dimensional Wasserstein distances.
//! * [`mckean`]: coefficient models, the interacting particle solver, the
//!   deterministic limit and the Gaussian fluctuation limit.
//! * [`malliavin`]: first and second Malliavin derivatives along stored paths
//!   and the nondegeneracy functional.
//! * [`fisher`]: kernel score estimation, Fisher-information and total-variation
//!   distances.
//! * [`harness`]: configuration, rate experiments and the validation suite.

pub mod error;
pub mod fbm;
pub mod fisher;
pub mod harness;
pub mod malliavin;
pub mod mckean;
pub mod measure;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};

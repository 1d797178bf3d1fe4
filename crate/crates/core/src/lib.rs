//! Maps of dynamics learned from pedestrian trajectories, and long-horizon
//! trajectory prediction guided by them.
//!
//! Three map kinds are provided: [`cliff::CliffMap`] (velocity mixtures per
//! grid cell), [`cliff::TcCliffMap`] (one such map per time-of-day interval)
//! and [`stef::StefMap`] (per-cell orientation bins with periodic temporal
//! models). Any of them drives [`predictor::predict_ranked`] through the
//! [`MoDSampler`] trait; [`evaluation::evaluate`] scores predictions with
//! ADE/FDE over a sweep of horizons.

pub mod cliff;
mod error;
pub mod evaluation;
pub mod exec;
pub mod grid;
pub mod ingest;
mod io_util;
pub mod motion;
pub mod predictor;
pub mod sampler;
pub mod stef;

pub use error::{Error, Result};
pub use exec::Exec;
pub use motion::{State, Trajectory, Velocity};
pub use sampler::{MoDSampler, SampleQuery, VelocitySample};

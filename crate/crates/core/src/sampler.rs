//! The single point where a map of dynamics plugs into the predictor.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::motion::Velocity;

/// A velocity drawn from a map, with its likelihood under that map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocitySample {
    pub velocity: Velocity,
    /// Density or probability mass of `velocity`; finite and positive.
    pub fitness: f64,
}

impl VelocitySample {
    /// Clamps fitness into the positive normal range so its log is finite.
    pub(crate) fn new(velocity: Velocity, fitness: f64) -> Self {
        let fitness = if fitness.is_finite() {
            fitness.max(f64::MIN_POSITIVE)
        } else {
            f64::MAX
        };
        Self { velocity, fitness }
    }
}

/// Where and when a velocity is requested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleQuery {
    pub x: f64,
    pub y: f64,
    /// Absolute time in epoch seconds.
    pub t: f64,
    pub prev_speed: f64,
    /// Search radius for map locations.
    pub radius: f64,
}

/// Any map that can propose velocities. `None` means no dynamics data is
/// available near the query. Implementations must be deterministic given the
/// RNG state.
pub trait MoDSampler: Sync {
    fn sample(&self, query: &SampleQuery, rng: &mut dyn RngCore) -> Option<VelocitySample>;
}

impl<S: MoDSampler + ?Sized> MoDSampler for &S {
    fn sample(&self, query: &SampleQuery, rng: &mut dyn RngCore) -> Option<VelocitySample> {
        (**self).sample(query, rng)
    }
}

impl<S: MoDSampler + ?Sized> MoDSampler for Box<S> {
    fn sample(&self, query: &SampleQuery, rng: &mut dyn RngCore) -> Option<VelocitySample> {
        (**self).sample(query, rng)
    }
}

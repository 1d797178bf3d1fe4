use serde::{Deserialize, Serialize};

use super::angle::circular_weighted_mean;
use super::state::{State, Velocity};
use crate::error::{Error, Result};

/// Settings for the Gaussian-weighted estimate of the current velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservedVelocityConfig {
    /// Kernel width in timesteps.
    pub sigma: f64,
    /// Number of trailing states that contribute (`O_p`).
    pub steps: usize,
    /// Normalize the kernel weights to sum to one. Disabling this scales the
    /// speed by the raw kernel mass, as in the unnormalized formula.
    pub normalize: bool,
}

impl Default for ObservedVelocityConfig {
    fn default() -> Self {
        Self {
            sigma: 1.5,
            steps: 3,
            normalize: true,
        }
    }
}

/// Zero-mean Gaussian kernel `g(t) = exp(-t²/2σ²) / (σ√2π)`.
pub fn observation_weight(t: f64, sigma: f64) -> f64 {
    (-(t * t) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Weighted average of the velocities in `history` (ordered oldest to
/// newest). The newest state has lag `t = 1`.
///
/// Headings are averaged on the circle. If the weighted headings cancel out
/// exactly, the newest heading is used.
pub fn estimate_observed_velocity(history: &[State], sigma: f64, normalize: bool) -> Result<Velocity> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    let weights: Vec<f64> = (1..=history.len())
        .map(|lag| observation_weight(lag as f64, sigma))
        .collect();
    let total: f64 = weights.iter().sum();
    let newest_first = history.iter().rev();

    let weighted_speed: f64 = newest_first
        .clone()
        .zip(&weights)
        .map(|(s, w)| s.speed() * w)
        .sum();
    let speed = if normalize {
        weighted_speed / total
    } else {
        weighted_speed
    };

    let headings: Vec<f64> = newest_first.map(State::heading).collect();
    let heading = match circular_weighted_mean(&headings, &weights) {
        Ok(h) => h,
        Err(Error::DegenerateMean(_)) => headings[0],
        Err(e) => return Err(e),
    };
    Velocity::new(speed.max(0.0), heading)
}

/// Advances a position by one step of the state's own velocity.
pub fn propagate(s: &State, dt: f64) -> (f64, f64) {
    let (vx, vy) = s.velocity().components();
    (s.x() + vx * dt, s.y() + vy * dt)
}

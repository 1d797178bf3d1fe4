use serde::{Deserialize, Serialize};

use super::angle::wrap;
use crate::error::{Error, Result};

/// Speed and heading of a moving agent.
///
/// Speed is non-negative and the heading is kept wrapped to `[-π, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Velocity {
    speed: f64,
    heading: f64,
}

impl Velocity {
    pub fn new(speed: f64, heading: f64) -> Result<Self> {
        if !speed.is_finite() {
            return Err(Error::NonFinite("speed"));
        }
        if !heading.is_finite() {
            return Err(Error::NonFinite("heading"));
        }
        if speed < 0.0 {
            return Err(Error::invalid(format!("negative speed {speed}")));
        }
        Ok(Self {
            speed,
            heading: wrap(heading),
        })
    }

    /// Builds a velocity from finite components, clamping speed at zero.
    pub(crate) fn clamped(speed: f64, heading: f64) -> Self {
        debug_assert!(speed.is_finite() && heading.is_finite());
        Self {
            speed: speed.max(0.0),
            heading: wrap(heading),
        }
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    /// Cartesian velocity components `(vx, vy)`.
    pub fn components(&self) -> (f64, f64) {
        let (s, c) = self.heading.sin_cos();
        (self.speed * c, self.speed * s)
    }
}

/// Position plus velocity at one timestep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    x: f64,
    y: f64,
    velocity: Velocity,
}

impl State {
    pub fn new(x: f64, y: f64, speed: f64, heading: f64) -> Result<Self> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::NonFinite("position"));
        }
        Ok(Self {
            x,
            y,
            velocity: Velocity::new(speed, heading)?,
        })
    }

    pub fn from_parts(x: f64, y: f64, velocity: Velocity) -> Result<Self> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::NonFinite("position"));
        }
        Ok(Self { x, y, velocity })
    }

    pub(crate) fn raw(x: f64, y: f64, velocity: Velocity) -> Self {
        Self { x, y, velocity }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn velocity(&self) -> Velocity {
        self.velocity
    }

    pub fn speed(&self) -> f64 {
        self.velocity.speed
    }

    pub fn heading(&self) -> f64 {
        self.velocity.heading
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Seconds since the Unix epoch.
    pub t: f64,
    pub state: State,
}

/// A time-ordered track of one person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    person_id: String,
    samples: Vec<Sample>,
}

impl Trajectory {
    /// Fails unless timestamps are finite and strictly increasing.
    pub fn new(person_id: impl Into<String>, samples: Vec<Sample>) -> Result<Self> {
        if samples.iter().any(|s| !s.t.is_finite()) {
            return Err(Error::NonFinite("timestamp"));
        }
        if let Some(w) = samples.windows(2).find(|w| w[1].t <= w[0].t) {
            return Err(Error::invalid(format!(
                "timestamps not strictly increasing ({} then {})",
                w[0].t, w[1].t
            )));
        }
        Ok(Self {
            person_id: person_id.into(),
            samples,
        })
    }

    pub fn person_id(&self) -> &str {
        &self.person_id
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn start_time(&self) -> Option<f64> {
        self.samples.first().map(|s| s.t)
    }

    pub fn end_time(&self) -> Option<f64> {
        self.samples.last().map(|s| s.t)
    }

    pub fn states(&self) -> impl Iterator<Item = &State> + '_ {
        self.samples.iter().map(|s| &s.state)
    }

    /// Nominal spacing if all consecutive timestamps agree with the first gap
    /// to within `tol` seconds.
    pub fn uniform_dt(&self, tol: f64) -> Option<f64> {
        let first = self.samples.windows(2).next().map(|w| w[1].t - w[0].t)?;
        self.samples
            .windows(2)
            .all(|w| ((w[1].t - w[0].t) - first).abs() <= tol)
            .then_some(first)
    }
}

//! Semi-wrapped Gaussian mixtures over `(heading, speed)`.
//!
//! The heading axis is wrapped modulo 2π; the speed axis is linear. The
//! wrapped density is truncated to the three nearest windings
//! `k ∈ {-1, 0, 1}`, which is exact to better than 1e-8 for heading standard
//! deviations below π/2.

use std::f64::consts::TAU;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::angle::wrap;
use crate::motion::Velocity;

pub const WINDINGS: [f64; 3] = [-1.0, 0.0, 1.0];
/// Smallest admissible covariance eigenvalue.
pub const MIN_EIGENVALUE: f64 = 1e-10;

/// Symmetric 2×2 covariance over `(heading, speed)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cov2 {
    pub tt: f64,
    pub tr: f64,
    pub rr: f64,
}

impl Cov2 {
    pub fn diag(tt: f64, rr: f64) -> Self {
        Self { tt, tr: 0.0, rr }
    }

    pub fn det(&self) -> f64 {
        self.tt * self.rr - self.tr * self.tr
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mid = 0.5 * (self.tt + self.rr);
        let rad = (0.5 * (self.tt - self.rr)).hypot(self.tr);
        (mid - rad, mid + rad)
    }

    /// Raises every eigenvalue to at least `floor`, keeping eigenvectors.
    pub fn floored(&self, floor: f64) -> Self {
        let (lo, hi) = self.eigenvalues();
        if lo >= floor {
            return *self;
        }
        let hi_f = hi.max(floor);
        let lo_f = lo.max(floor);
        if self.tr.abs() < 1e-300 {
            return Self {
                tt: self.tt.max(floor),
                tr: 0.0,
                rr: self.rr.max(floor),
            };
        }
        // eigenvector for `hi` is (tr, hi - tt), normalised
        let (vx, vy) = (self.tr, hi - self.tt);
        let n = vx.hypot(vy);
        let (cx, cy) = (vx / n, vy / n);
        Self {
            tt: hi_f * cx * cx + lo_f * cy * cy,
            tr: (hi_f - lo_f) * cx * cy,
            rr: hi_f * cy * cy + lo_f * cx * cx,
        }
    }

    fn validate(&self) -> Result<()> {
        if ![self.tt, self.tr, self.rr].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidCovariance("non-finite entry".into()));
        }
        let (lo, _) = self.eigenvalues();
        if lo <= MIN_EIGENVALUE {
            return Err(Error::InvalidCovariance(format!(
                "smallest eigenvalue {lo:e} not above {MIN_EIGENVALUE:e}"
            )));
        }
        Ok(())
    }
}

/// One weighted Gaussian of a mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawComponent", into = "RawComponent")]
pub struct SwgmmComponent {
    weight: f64,
    mean_heading: f64,
    mean_speed: f64,
    cov: Cov2,
    // cached inverse covariance and log normaliser
    inv: Cov2,
    log_norm: f64,
}

#[derive(Serialize, Deserialize)]
struct RawComponent {
    weight: f64,
    mean_heading: f64,
    mean_speed: f64,
    cov: Cov2,
}

impl TryFrom<RawComponent> for SwgmmComponent {
    type Error = Error;
    fn try_from(r: RawComponent) -> Result<Self> {
        SwgmmComponent::new(r.weight, r.mean_heading, r.mean_speed, r.cov)
    }
}

impl From<SwgmmComponent> for RawComponent {
    fn from(c: SwgmmComponent) -> Self {
        RawComponent {
            weight: c.weight,
            mean_heading: c.mean_heading,
            mean_speed: c.mean_speed,
            cov: c.cov,
        }
    }
}

impl SwgmmComponent {
    /// Checks `0 < weight <= 1` and positive-definiteness. The mean heading is
    /// wrapped into `[-π, π)`.
    pub fn new(weight: f64, mean_heading: f64, mean_speed: f64, cov: Cov2) -> Result<Self> {
        if !(weight > 0.0 && weight <= 1.0) {
            return Err(Error::invalid(format!("component weight {weight} not in (0, 1]")));
        }
        if !mean_heading.is_finite() || !mean_speed.is_finite() {
            return Err(Error::NonFinite("component mean"));
        }
        cov.validate()?;
        let det = cov.det();
        let inv = Cov2 {
            tt: cov.rr / det,
            tr: -cov.tr / det,
            rr: cov.tt / det,
        };
        Ok(Self {
            weight,
            mean_heading: wrap(mean_heading),
            mean_speed,
            cov,
            inv,
            log_norm: -(TAU.ln()) - 0.5 * det.ln(),
        })
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn mean(&self) -> (f64, f64) {
        (self.mean_heading, self.mean_speed)
    }

    pub fn cov(&self) -> Cov2 {
        self.cov
    }

    /// Log density of the unwrapped Gaussian at `(heading, speed)`.
    #[inline]
    pub(crate) fn log_gauss(&self, heading: f64, speed: f64) -> f64 {
        let dt = heading - self.mean_heading;
        let dr = speed - self.mean_speed;
        let q = self.inv.tt * dt * dt + 2.0 * self.inv.tr * dt * dr + self.inv.rr * dr * dr;
        self.log_norm - 0.5 * q
    }

    /// Wrapped density of this component alone (without its weight).
    pub fn wrapped_density(&self, heading: f64, speed: f64) -> f64 {
        WINDINGS
            .iter()
            .map(|k| self.log_gauss(heading + TAU * k, speed).exp())
            .sum()
    }

    fn with_weight(&self, weight: f64) -> Self {
        Self {
            weight,
            ..self.clone()
        }
    }
}

/// Mixture at one map location plus the fraction of time motion was seen there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Swgmm {
    components: Vec<SwgmmComponent>,
    motion_intensity: f64,
    observation_count: usize,
}

impl Swgmm {
    /// Weights must sum to one within 1e-9.
    pub fn new(
        components: Vec<SwgmmComponent>,
        motion_intensity: f64,
        observation_count: usize,
    ) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        if !(0.0..=1.0).contains(&motion_intensity) {
            return Err(Error::invalid(format!(
                "motion intensity {motion_intensity} not in [0, 1]"
            )));
        }
        if observation_count == 0 {
            return Err(Error::invalid("observation count must be at least 1"));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("component weights sum to {total}")));
        }
        Ok(Self {
            components,
            motion_intensity,
            observation_count,
        })
    }

    /// Builds a mixture from weights that only need to be positive; they are
    /// normalized here.
    pub(crate) fn normalized(
        components: Vec<SwgmmComponent>,
        motion_intensity: f64,
        observation_count: usize,
    ) -> Result<Self> {
        let total: f64 = components.iter().map(|c| c.weight).sum();
        let components = components
            .iter()
            .map(|c| c.with_weight(c.weight / total))
            .collect();
        Self::new(components, motion_intensity, observation_count)
    }

    pub fn components(&self) -> &[SwgmmComponent] {
        &self.components
    }

    pub fn motion_intensity(&self) -> f64 {
        self.motion_intensity
    }

    pub fn observation_count(&self) -> usize {
        self.observation_count
    }

    /// Joint density at a velocity whose heading lies in `[-π, π)`.
    pub fn pdf(&self, v: &Velocity) -> f64 {
        self.pdf_raw(v.heading(), v.speed())
    }

    pub(crate) fn pdf_raw(&self, heading: f64, speed: f64) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * c.wrapped_density(heading, speed))
            .sum()
    }

    /// Draws a component by weight, then a Gaussian velocity from it. The
    /// heading is wrapped and negative speeds are clamped to zero.
    pub fn sample(&self, rng: &mut dyn RngCore) -> Velocity {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = &self.components[self.components.len() - 1];
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                chosen = c;
                break;
            }
        }
        let z0: f64 = rng.sample(StandardNormal);
        let z1: f64 = rng.sample(StandardNormal);
        let l00 = chosen.cov.tt.sqrt();
        let l10 = chosen.cov.tr / l00;
        let l11 = (chosen.cov.rr - l10 * l10).max(0.0).sqrt();
        let heading = chosen.mean_heading + l00 * z0;
        let speed = chosen.mean_speed + l10 * z0 + l11 * z1;
        Velocity::clamped(speed, heading)
    }

    /// Component with the largest weight.
    pub fn dominant(&self) -> &SwgmmComponent {
        self.components
            .iter()
            .max_by(|a, b| a.weight.total_cmp(&b.weight))
            .expect("nonempty mixture")
    }
}

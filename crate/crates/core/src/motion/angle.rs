//! Circular arithmetic on headings.
//!
//! All headings live in the half-open interval `[-π, π)`. A value that lands
//! exactly on the seam is reported as `-π`.

use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Resultant vectors shorter than this are treated as having no direction.
pub const MIN_RESULTANT: f64 = 1e-12;

/// Wraps a finite angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::NonFinite("angle"));
    }
    Ok(wrap(a))
}

/// Unchecked variant of [`wrap_angle`] for hot loops with finite input.
#[inline]
pub fn wrap(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        return a;
    }
    let r = (a + PI).rem_euclid(TAU) - PI;
    // rem_euclid may round up to exactly TAU
    if r >= PI {
        r - TAU
    } else {
        r
    }
}

/// Shortest signed arc from `b` to `a`, i.e. `wrap(a - b)`.
pub fn angle_diff(a: f64, b: f64) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("angle"));
    }
    Ok(wrap(a - b))
}

#[inline]
pub(crate) fn diff(a: f64, b: f64) -> f64 {
    wrap(a - b)
}

/// Weighted circular mean via the resultant vector.
pub fn circular_weighted_mean(angles: &[f64], weights: &[f64]) -> Result<f64> {
    if angles.len() != weights.len() {
        return Err(Error::invalid(format!(
            "{} angles but {} weights",
            angles.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::invalid("weights must be finite and non-negative"));
    }
    if angles.iter().any(|a| !a.is_finite()) {
        return Err(Error::NonFinite("angle"));
    }
    let (s, c) = angles
        .iter()
        .zip(weights)
        .fold((0.0, 0.0), |(s, c), (a, w)| (s + w * a.sin(), c + w * a.cos()));
    let len = s.hypot(c);
    if len < MIN_RESULTANT {
        return Err(Error::DegenerateMean(len));
    }
    Ok(wrap(s.atan2(c)))
}

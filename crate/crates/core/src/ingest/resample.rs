use crate::error::{Error, Result};
use crate::motion::{Sample, State, Trajectory, Velocity};

/// Velocities from consecutive positions. Sample `i > 0` gets the motion
/// from `i - 1` to `i`; the first sample copies the second. A step without
/// displacement keeps the previous heading (0 if nothing moved yet).
pub fn derive_velocities(times: &[f64], positions: &[(f64, f64)]) -> Vec<Velocity> {
    let n = positions.len();
    let mut out = Vec::with_capacity(n);
    let mut heading = 0.0;
    for i in 1..n {
        let (dx, dy) = (positions[i].0 - positions[i - 1].0, positions[i].1 - positions[i - 1].1);
        let dist = dx.hypot(dy);
        if dist > 0.0 {
            heading = dy.atan2(dx);
        }
        out.push(Velocity::clamped(dist / (times[i] - times[i - 1]), heading));
    }
    let first = out.first().copied().unwrap_or(Velocity::clamped(0.0, 0.0));
    out.insert(0, first);
    out.truncate(n);
    out
}

/// Builds a trajectory from timestamped positions, deriving velocities.
pub(crate) fn from_positions(id: &str, times: &[f64], positions: &[(f64, f64)]) -> Result<Trajectory> {
    let v = derive_velocities(times, positions);
    let samples = times
        .iter()
        .zip(positions)
        .zip(v)
        .map(|((&t, &(x, y)), v)| {
            Ok(Sample {
                t,
                state: State::from_parts(x, y, v)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Trajectory::new(id, samples)
}

/// Linear interpolation onto `t0 + i/rate`, with velocities recomputed from
/// the resampled positions.
pub fn resample(traj: &Trajectory, target_rate: f64) -> Result<Trajectory> {
    if !(target_rate > 0.0 && target_rate.is_finite()) {
        return Err(Error::invalid(format!("target rate must be positive, got {target_rate}")));
    }
    let dt = 1.0 / target_rate;
    let s = traj.samples();
    if s.len() < 2 || s[s.len() - 1].t - s[0].t < dt - 1e-9 {
        return Err(Error::InsufficientData { got: s.len(), need: 2 });
    }
    let t0 = s[0].t;
    let t_end = s[s.len() - 1].t;
    let n = ((t_end - t0) / dt + 1e-9).floor() as usize + 1;
    let mut times = Vec::with_capacity(n);
    let mut positions = Vec::with_capacity(n);
    let mut j = 0;
    for i in 0..n {
        let t = t0 + i as f64 * dt;
        while j + 2 < s.len() && s[j + 1].t <= t {
            j += 1;
        }
        let (a, b) = (&s[j], &s[j + 1]);
        let u = ((t - a.t) / (b.t - a.t)).clamp(0.0, 1.0);
        positions.push((
            a.state.x() + u * (b.state.x() - a.state.x()),
            a.state.y() + u * (b.state.y() - a.state.y()),
        ));
        times.push(t);
    }
    from_positions(traj.person_id(), &times, &positions)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ResampleReport {
    pub kept: usize,
    /// Person ids of trajectories too short to resample.
    pub dropped: Vec<String>,
}

pub fn resample_all(trajs: &[Trajectory], target_rate: f64) -> Result<(Vec<Trajectory>, ResampleReport)> {
    let mut out = Vec::with_capacity(trajs.len());
    let mut report = ResampleReport::default();
    for t in trajs {
        match resample(t, target_rate) {
            Ok(r) => out.push(r),
            Err(Error::InsufficientData { .. }) => report.dropped.push(t.person_id().to_string()),
            Err(e) => return Err(e),
        }
    }
    report.kept = out.len();
    Ok((out, report))
}

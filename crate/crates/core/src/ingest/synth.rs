use std::f64::consts::{FRAC_PI_2, PI};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::resample::from_positions;
use crate::error::{Error, Result};
use crate::grid::mix_seed;
use crate::motion::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Straight eastward corridor.
    Corridor,
    /// Eastward approach turning 90° left into a northward corridor.
    Bend,
    /// Shared corridor walked eastward by the majority and westward by the rest.
    Bimodal,
    /// Northward approach turning east or west depending on time of day.
    TimeVarying,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Corridor => "corridor",
            Scenario::Bend => "bend",
            Scenario::Bimodal => "bimodal",
            Scenario::TimeVarying => "time_varying",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "corridor" => Ok(Scenario::Corridor),
            "bend" => Ok(Scenario::Bend),
            "bimodal" => Ok(Scenario::Bimodal),
            "time_varying" | "time-varying" => Ok(Scenario::TimeVarying),
            _ => Err(Error::UnknownScenario(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub n_trajectories: usize,
    /// Mean walking speed, m/s.
    pub speed: f64,
    /// Spread of per-person speeds.
    pub speed_sd: f64,
    /// People keep a lateral offset drawn uniformly from this width.
    pub lane_width: f64,
    /// Stationary std. dev. of the lateral wander, m.
    pub noise_sigma: f64,
    /// Correlation time of the lateral wander, s.
    pub noise_tau: f64,
    pub dt: f64,
    /// Epoch time of the first trajectory.
    pub start_time: f64,
    /// Seconds between consecutive trajectory starts (not time_varying).
    pub spacing: f64,
    /// Days covered by time_varying.
    pub days: u32,
    /// Seconds between direction flips, counted from local midnight.
    pub flip_interval: f64,
    pub utc_offset: f64,
    /// Share of people walking eastward in bimodal.
    pub majority: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            n_trajectories: 100,
            speed: 1.2,
            speed_sd: 0.05,
            lane_width: 3.0,
            noise_sigma: 0.05,
            noise_tau: 5.0,
            dt: 1.0,
            // 2024-01-01 00:00 UTC
            start_time: 1_704_067_200.0,
            spacing: 10.0,
            days: 4,
            flip_interval: 43_200.0,
            utc_offset: 0.0,
            majority: 0.8,
        }
    }
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        let ok = self.speed > 0.0
            && self.speed_sd >= 0.0
            && self.lane_width >= 0.0
            && self.lane_width < 2.0 * TURN_RADIUS
            && self.noise_sigma >= 0.0
            && self.noise_tau > 0.0
            && self.dt > 0.0
            && self.spacing >= 0.0
            && self.days >= 1
            && self.flip_interval > 0.0
            && (0.0..=1.0).contains(&self.majority)
            && self.start_time.is_finite()
            && self.utc_offset.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid("synthetic parameters out of range"))
        }
    }
}

const TURN_RADIUS: f64 = 6.0;

#[derive(Debug, Clone, Copy)]
enum Segment {
    Straight(f64),
    /// Signed turn angle, positive to the left.
    Arc(f64),
}

#[derive(Debug, Clone)]
struct Path {
    start: (f64, f64),
    heading: f64,
    segments: Vec<Segment>,
}

impl Path {
    fn length(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| match *s {
                Segment::Straight(l) => l,
                Segment::Arc(a) => a.abs() * TURN_RADIUS,
            })
            .sum()
    }

    /// Centreline point and heading at arc length `s`, plus the lateral
    /// offset `d` to the left.
    fn point(&self, mut s: f64, d: f64) -> (f64, f64) {
        let (mut x, mut y, mut h) = (self.start.0, self.start.1, self.heading);
        for seg in &self.segments {
            match *seg {
                Segment::Straight(l) => {
                    let u = s.min(l);
                    x += u * h.cos();
                    y += u * h.sin();
                    if s <= l {
                        break;
                    }
                    s -= l;
                }
                Segment::Arc(a) => {
                    let l = a.abs() * TURN_RADIUS;
                    let u = s.min(l);
                    let sign = a.signum();
                    // centre of the turn, on the inside
                    let (cx, cy) = (x - sign * TURN_RADIUS * h.sin(), y + sign * TURN_RADIUS * h.cos());
                    let h2 = h + sign * u / TURN_RADIUS;
                    x = cx + sign * TURN_RADIUS * h2.sin();
                    y = cy - sign * TURN_RADIUS * h2.cos();
                    h = h2;
                    if s <= l {
                        break;
                    }
                    s -= l;
                }
            }
        }
        (x - d * h.sin(), y + d * h.cos())
    }
}

fn corridor() -> Path {
    Path {
        start: (0.0, 0.0),
        heading: 0.0,
        segments: vec![Segment::Straight(40.0)],
    }
}

fn bend() -> Path {
    Path {
        start: (-8.0 - TURN_RADIUS, 0.0),
        heading: 0.0,
        segments: vec![Segment::Straight(8.0), Segment::Arc(FRAC_PI_2), Segment::Straight(30.0)],
    }
}

fn two_way(east: bool) -> Path {
    if east {
        corridor()
    } else {
        Path {
            start: (40.0, 0.0),
            heading: PI,
            segments: vec![Segment::Straight(40.0)],
        }
    }
}

fn junction(east: bool) -> Path {
    let turn = if east { -FRAC_PI_2 } else { FRAC_PI_2 };
    Path {
        start: (0.0, -8.0 - TURN_RADIUS),
        heading: FRAC_PI_2,
        segments: vec![Segment::Straight(8.0), Segment::Arc(turn), Segment::Straight(25.0)],
    }
}

/// True when epoch time `t` falls in an eastward phase of time_varying.
fn eastward(t: f64, p: &SynthParams) -> bool {
    let tod = (t + p.utc_offset).rem_euclid(86_400.0);
    ((tod / p.flip_interval).floor() as i64) % 2 == 0
}

/// Deterministic trajectories for a scenario. Person `i` draws from its own
/// random stream, so changing `n_trajectories` keeps earlier people intact.
pub fn generate_synthetic(scenario: Scenario, params: &SynthParams, seed: u64) -> Result<Vec<Trajectory>> {
    params.validate()?;
    let speed_dist = Normal::new(params.speed, params.speed_sd).map_err(|e| Error::invalid(e.to_string()))?;
    let span = params.days as f64 * 86_400.0;
    (0..params.n_trajectories)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, &[i as i64]));
            let start = match scenario {
                Scenario::TimeVarying => {
                    let slot = span / params.n_trajectories as f64;
                    params.start_time + (i as f64 + rng.random::<f64>()) * slot
                }
                _ => params.start_time + i as f64 * params.spacing,
            };
            let path = match scenario {
                Scenario::Corridor => corridor(),
                Scenario::Bend => bend(),
                Scenario::Bimodal => two_way(rng.random::<f64>() < params.majority),
                Scenario::TimeVarying => junction(eastward(start, params)),
            };
            let speed = speed_dist.sample(&mut rng).max(0.2 * params.speed);
            let lane = (rng.random::<f64>() - 0.5) * params.lane_width;
            let a = (-params.dt / params.noise_tau).exp();
            let kick = params.noise_sigma * (1.0 - a * a).sqrt();
            let mut wander = params.noise_sigma * rng.sample::<f64, _>(StandardNormal);
            let n = (path.length() / (speed * params.dt)).floor() as usize + 1;
            let mut times = Vec::with_capacity(n);
            let mut pos = Vec::with_capacity(n);
            for k in 0..n {
                times.push(start + k as f64 * params.dt);
                pos.push(path.point(k as f64 * speed * params.dt, lane + wander));
                wander = a * wander + kick * rng.sample::<f64, _>(StandardNormal);
            }
            from_positions(&format!("{}-{i:05}", scenario.name()), &times, &pos)
        })
        .collect()
}

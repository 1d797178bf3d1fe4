use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::em::EmConfig;
use super::map::{build_from_observations, infer_dt, observations, CliffMap, Observation};
use crate::error::{Error, Result};
use crate::sampler::{MoDSampler, SampleQuery, VelocitySample};
use crate::motion::Trajectory;

pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Partition of the day into equal intervals (the last may be shorter).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayIntervals {
    pub length: f64,
    /// Added to epoch time before taking the time of day, for local clocks.
    #[serde(default)]
    pub utc_offset: f64,
}

impl DayIntervals {
    pub fn new(length: f64) -> Result<Self> {
        Self::with_offset(length, 0.0)
    }

    pub fn with_offset(length: f64, utc_offset: f64) -> Result<Self> {
        if !(length > 0.0) || length > SECONDS_PER_DAY || !utc_offset.is_finite() {
            return Err(Error::invalid(format!(
                "interval length must be in (0, 86400], got {length}"
            )));
        }
        Ok(Self { length, utc_offset })
    }

    pub fn count(&self) -> u32 {
        (SECONDS_PER_DAY / self.length).ceil() as u32
    }

    pub fn index(&self, t: f64) -> u32 {
        let tod = (t + self.utc_offset).rem_euclid(SECONDS_PER_DAY);
        ((tod / self.length).floor() as u32).min(self.count() - 1)
    }
}

/// One map per time-of-day interval that had training data.
#[derive(Debug, Clone, PartialEq)]
pub struct TcCliffMap {
    intervals: DayIntervals,
    resolution: f64,
    em_seed: u64,
    maps: BTreeMap<u32, CliffMap>,
}

impl TcCliffMap {
    pub fn new(
        intervals: DayIntervals,
        resolution: f64,
        em_seed: u64,
        maps: BTreeMap<u32, CliffMap>,
    ) -> Result<Self> {
        if let Some(bad) = maps.keys().find(|i| **i >= intervals.count()) {
            return Err(Error::invalid(format!(
                "interval index {bad} out of range for {} intervals",
                intervals.count()
            )));
        }
        Ok(Self {
            intervals,
            resolution,
            em_seed,
            maps,
        })
    }

    pub fn intervals(&self) -> DayIntervals {
        self.intervals
    }

    pub fn interval_length(&self) -> f64 {
        self.intervals.length
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn em_seed(&self) -> u64 {
        self.em_seed
    }

    pub fn interval_maps(&self) -> &BTreeMap<u32, CliffMap> {
        &self.maps
    }

    /// Map for the interval containing epoch time `t`, if one was trained.
    pub fn map_at(&self, t: f64) -> Option<&CliffMap> {
        self.maps.get(&self.intervals.index(t))
    }
}

impl MoDSampler for TcCliffMap {
    fn sample(&self, q: &SampleQuery, rng: &mut dyn RngCore) -> Option<VelocitySample> {
        self.map_at(q.t)?.sample(q, rng)
    }
}

/// Trains one map per time-of-day interval. Each sample contributes to the
/// interval of its own timestamp, so a trajectory may feed several maps.
pub fn build_tc_cliff_map(
    trajectories: &[Trajectory],
    resolution: f64,
    intervals: DayIntervals,
    config: &EmConfig,
) -> Result<TcCliffMap> {
    let dt = infer_dt(trajectories);
    let mut buckets: BTreeMap<u32, Vec<Observation>> = BTreeMap::new();
    for o in observations(trajectories) {
        buckets.entry(intervals.index(o.t)).or_default().push(o);
    }
    let mut maps = BTreeMap::new();
    for (idx, obs) in buckets {
        maps.insert(idx, build_from_observations(&obs, resolution, dt, config)?);
    }
    TcCliffMap::new(intervals, resolution, config.seed, maps)
}

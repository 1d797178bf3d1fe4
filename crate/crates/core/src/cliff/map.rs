use std::collections::BTreeMap;

use rand::RngCore;

use super::em::{fit_swgmm, EmConfig};
use super::swgmm::Swgmm;
use crate::error::{Error, Result};
use crate::grid::{mix_seed, Bounds, CellIndex, Grid};
use crate::motion::{Trajectory, Velocity};
use crate::sampler::{MoDSampler, SampleQuery, VelocitySample};

/// Grid of velocity mixtures.
#[derive(Debug, Clone, PartialEq)]
pub struct CliffMap {
    grid: Grid,
    bounds: Bounds,
    locations: BTreeMap<CellIndex, Swgmm>,
    em_seed: u64,
}

/// A stored mixture found by a radius query.
#[derive(Debug, Clone, Copy)]
pub struct NearSwgmm<'a> {
    pub cell: CellIndex,
    pub center: (f64, f64),
    pub distance: f64,
    pub swgmm: &'a Swgmm,
}

impl CliffMap {
    /// Fails if a location lies outside `bounds`.
    pub fn new(
        resolution: f64,
        bounds: Bounds,
        locations: BTreeMap<CellIndex, Swgmm>,
        em_seed: u64,
    ) -> Result<Self> {
        let grid = Grid::new(resolution)?;
        for &cell in locations.keys() {
            let (x, y) = grid.center(cell);
            if !bounds.contains(x, y) {
                return Err(Error::invalid(format!(
                    "location ({x}, {y}) outside map bounds"
                )));
            }
        }
        Ok(Self {
            grid,
            bounds,
            locations,
            em_seed,
        })
    }

    pub fn empty(resolution: f64, em_seed: u64) -> Result<Self> {
        Self::new(resolution, Bounds::empty(), BTreeMap::new(), em_seed)
    }

    pub fn resolution(&self) -> f64 {
        self.grid.resolution()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn em_seed(&self) -> u64 {
        self.em_seed
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn get(&self, cell: CellIndex) -> Option<&Swgmm> {
        self.locations.get(&cell)
    }

    pub fn locations(&self) -> &BTreeMap<CellIndex, Swgmm> {
        &self.locations
    }

    /// Iterates `(centre, mixture)` in cell order.
    pub fn iter(&self) -> impl Iterator<Item = ((f64, f64), &Swgmm)> + '_ {
        self.locations
            .iter()
            .map(|(c, s)| (self.grid.center(*c), s))
    }

    /// All stored mixtures whose centre is within `radius` of `(x, y)`.
    pub fn near(&self, x: f64, y: f64, radius: f64) -> Vec<NearSwgmm<'_>> {
        if self.locations.is_empty() {
            return Vec::new();
        }
        self.grid
            .cells_within(x, y, radius)
            .filter_map(|(cell, distance)| {
                self.locations.get(&cell).map(|swgmm| NearSwgmm {
                    cell,
                    center: self.grid.center(cell),
                    distance,
                    swgmm,
                })
            })
            .collect()
    }

    /// The nearby mixture with the highest motion intensity. Ties go to the
    /// nearest centre, then to the lexicographically smallest `(x, y)`.
    pub fn select(&self, x: f64, y: f64, radius: f64) -> Option<NearSwgmm<'_>> {
        self.near(x, y, radius).into_iter().min_by(|a, b| {
            b.swgmm
                .motion_intensity()
                .total_cmp(&a.swgmm.motion_intensity())
                .then(a.distance.total_cmp(&b.distance))
                .then(a.center.0.total_cmp(&b.center.0))
                .then(a.center.1.total_cmp(&b.center.1))
        })
    }
}

/// Draws a velocity from the highest-intensity mixture within `r_s`.
/// Returns `None` when no mixture is in range.
pub fn sample_velocity_from_cliff(
    x: f64,
    y: f64,
    map: &CliffMap,
    r_s: f64,
    rng: &mut dyn RngCore,
) -> Option<VelocitySample> {
    let near = map.select(x, y, r_s)?;
    let v = near.swgmm.sample(rng);
    Some(VelocitySample::new(v, near.swgmm.pdf(&v)))
}

impl MoDSampler for CliffMap {
    fn sample(&self, q: &SampleQuery, rng: &mut dyn RngCore) -> Option<VelocitySample> {
        sample_velocity_from_cliff(q.x, q.y, self, q.radius, rng)
    }
}

/// Sampling period of resampled trajectories, falling back to one second.
pub(crate) fn infer_dt<'a>(trajectories: impl IntoIterator<Item = &'a Trajectory>) -> f64 {
    trajectories
        .into_iter()
        .find_map(|t| t.uniform_dt(1e-6))
        .filter(|dt| *dt > 0.0)
        .unwrap_or(1.0)
}

/// A single velocity observation with its timestamp.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Observation {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub velocity: Velocity,
}

pub(crate) fn observations<'a>(
    trajectories: impl IntoIterator<Item = &'a Trajectory>,
) -> Vec<Observation> {
    trajectories
        .into_iter()
        .flat_map(|tr| {
            tr.samples().iter().map(|s| Observation {
                t: s.t,
                x: s.state.x(),
                y: s.state.y(),
                velocity: s.state.velocity(),
            })
        })
        .collect()
}

/// Builds a map from trajectories resampled to a uniform period.
///
/// Every cell receiving at least `min_observations` velocities gets a fitted
/// mixture. Motion intensity is the fraction of sampling-period bins, across
/// the time span of all input data, in which the cell saw an observation.
pub fn build_cliff_map(
    trajectories: &[Trajectory],
    resolution: f64,
    config: &EmConfig,
) -> Result<CliffMap> {
    let dt = infer_dt(trajectories);
    build_from_observations(&observations(trajectories), resolution, dt, config)
}

pub(crate) fn build_from_observations(
    obs: &[Observation],
    resolution: f64,
    dt: f64,
    config: &EmConfig,
) -> Result<CliffMap> {
    config.validate()?;
    let grid = Grid::new(resolution)?;
    if obs.is_empty() {
        return CliffMap::empty(resolution, config.seed);
    }
    let t_min = obs.iter().map(|o| o.t).fold(f64::INFINITY, f64::min);
    let t_max = obs.iter().map(|o| o.t).fold(f64::NEG_INFINITY, f64::max);
    let bin_of = |t: f64| ((t - t_min) / dt + 1e-9).floor() as i64;
    let total_bins = bin_of(t_max) + 1;

    let mut cells: BTreeMap<CellIndex, (Vec<Velocity>, Vec<i64>)> = BTreeMap::new();
    for o in obs {
        let entry = cells.entry(grid.cell_of(o.x, o.y)).or_default();
        entry.0.push(o.velocity);
        entry.1.push(bin_of(o.t));
    }
    let bounds = Bounds::of_cells(&grid, cells.keys());
    let work: Vec<(CellIndex, Vec<Velocity>, Vec<i64>)> = cells
        .into_iter()
        .map(|(c, (v, b))| (c, v, b))
        .collect();

    let fitted = config.exec.map_slice(&work, |_, (cell, velocities, bins)| {
        let cfg = EmConfig {
            seed: mix_seed(config.seed, &[cell.0, cell.1]),
            ..config.clone()
        };
        match fit_swgmm(velocities, &cfg) {
            Ok(m) => {
                let mut bins = bins.clone();
                bins.sort_unstable();
                bins.dedup();
                let intensity = (bins.len() as f64 / total_bins as f64).min(1.0);
                Swgmm::new(m.components().to_vec(), intensity, velocities.len())
                    .map(|m| Some((*cell, m)))
            }
            Err(Error::InsufficientData { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    });
    let mut locations = BTreeMap::new();
    for r in fitted {
        if let Some((cell, m)) = r? {
            locations.insert(cell, m);
        }
    }
    CliffMap::new(resolution, bounds, locations, config.seed)
}

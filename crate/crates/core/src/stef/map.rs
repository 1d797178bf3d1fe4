use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::fremen::{daily_harmonics, fit_sparse, phase_sums, FremenModel};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::{CellIndex, Grid};
use crate::motion::{Trajectory, Velocity};
use crate::sampler::{MoDSampler, SampleQuery, VelocitySample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StefConfig {
    /// Number of orientation bins.
    pub k: usize,
    /// Histogram interval, seconds.
    pub t_interval: f64,
    /// Spectral components kept per bin.
    pub m: usize,
    /// Candidate frequencies, rad/s.
    pub candidates: Vec<f64>,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for StefConfig {
    fn default() -> Self {
        Self {
            k: 8,
            t_interval: 600.0,
            m: 2,
            candidates: daily_harmonics(24),
            exec: Exec::default(),
        }
    }
}

impl StefConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::invalid(format!("k must be at least 2, got {}", self.k)));
        }
        if !(self.t_interval > 0.0 && self.t_interval.is_finite()) {
            return Err(Error::invalid("t_interval must be positive"));
        }
        if self.candidates.len() < self.m {
            return Err(Error::invalid(format!(
                "{} candidate frequencies for m = {}",
                self.candidates.len(),
                self.m
            )));
        }
        if self.candidates.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("candidate frequencies must be positive"));
        }
        Ok(())
    }
}

/// Orientation bin nearest to `heading`. A heading exactly between two bin
/// centres goes to the lower index.
pub fn orientation_bin(heading: f64, k: usize) -> usize {
    let u = crate::motion::angle::wrap(heading) * k as f64 / TAU;
    let lo = u.floor();
    let idx = |v: f64| (v as i64).rem_euclid(k as i64) as usize;
    if u - lo == 0.5 {
        idx(lo).min(idx(lo + 1.0))
    } else {
        idx(u.round())
    }
}

pub fn bin_center(bin: usize, k: usize) -> f64 {
    crate::motion::angle::wrap(bin as f64 * TAU / k as f64)
}

/// Normalized per-cell orientation histograms on a fixed interval timeline.
/// Only intervals with detections are stored; all others are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BinHistograms {
    pub grid: Grid,
    pub k: usize,
    pub t_interval: f64,
    /// Interval indices are `floor(t / t_interval)`.
    pub first_interval: i64,
    pub n_intervals: usize,
    pub cells: BTreeMap<CellIndex, BTreeMap<i64, Vec<f64>>>,
}

impl BinHistograms {
    /// Midpoint time of interval `j`.
    pub fn interval_time(&self, j: i64) -> f64 {
        (j as f64 + 0.5) * self.t_interval
    }

    pub fn interval_times(&self) -> impl Iterator<Item = f64> + Clone + '_ {
        (0..self.n_intervals as i64).map(move |i| self.interval_time(self.first_interval + i))
    }

    /// Full series of one bin, zeros included.
    pub fn series(&self, cell: CellIndex, bin: usize) -> (Vec<f64>, Vec<f64>) {
        let stored = self.cells.get(&cell);
        (0..self.n_intervals as i64)
            .map(|i| {
                let j = self.first_interval + i;
                let v = stored.and_then(|s| s.get(&j)).map_or(0.0, |h| h[bin]);
                (self.interval_time(j), v)
            })
            .unzip()
    }

    pub fn training_span(&self) -> Option<(f64, f64)> {
        (self.n_intervals > 0).then(|| {
            (
                self.first_interval as f64 * self.t_interval,
                (self.first_interval + self.n_intervals as i64) as f64 * self.t_interval,
            )
        })
    }
}

pub fn accumulate_bin_histograms(
    trajectories: &[Trajectory],
    resolution: f64,
    k: usize,
    t_interval: f64,
) -> Result<BinHistograms> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be at least 2, got {k}")));
    }
    if !(t_interval > 0.0 && t_interval.is_finite()) {
        return Err(Error::invalid("t_interval must be positive"));
    }
    let grid = Grid::new(resolution)?;
    let mut cells: BTreeMap<CellIndex, BTreeMap<i64, Vec<f64>>> = BTreeMap::new();
    let (mut j_min, mut j_max) = (i64::MAX, i64::MIN);
    for s in trajectories.iter().flat_map(|t| t.samples()) {
        let j = (s.t / t_interval).floor() as i64;
        j_min = j_min.min(j);
        j_max = j_max.max(j);
        let h = cells
            .entry(grid.cell_of(s.state.x(), s.state.y()))
            .or_default()
            .entry(j)
            .or_insert_with(|| vec![0.0; k]);
        h[orientation_bin(s.state.heading(), k)] += 1.0;
    }
    for h in cells.values_mut().flat_map(|c| c.values_mut()) {
        let total: f64 = h.iter().sum();
        h.iter_mut().for_each(|v| *v /= total);
    }
    let (first_interval, n_intervals) = if cells.is_empty() {
        (0, 0)
    } else {
        (j_min, (j_max - j_min + 1) as usize)
    };
    Ok(BinHistograms {
        grid,
        k,
        t_interval,
        first_interval,
        n_intervals,
        cells,
    })
}

/// One temporal model per orientation bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StefCell {
    bins: Vec<FremenModel>,
}

impl StefCell {
    pub fn new(bins: Vec<FremenModel>) -> Result<Self> {
        if bins.len() < 2 {
            return Err(Error::invalid("a cell needs at least 2 orientation bins"));
        }
        Ok(Self { bins })
    }

    pub fn bins(&self) -> &[FremenModel] {
        &self.bins
    }

    pub fn k(&self) -> usize {
        self.bins.len()
    }
}

/// Raw per-bin probabilities at epoch time `t`, clipped to [0, 1] and not
/// renormalized.
pub fn predict_bin_probs(cell: &StefCell, t: f64) -> Vec<f64> {
    cell.bins.iter().map(|m| m.probability(t)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct StefMap {
    grid: Grid,
    k: usize,
    t_interval: f64,
    m: usize,
    candidates: Vec<f64>,
    training_span: Option<(f64, f64)>,
    cells: BTreeMap<CellIndex, StefCell>,
}

impl StefMap {
    pub fn new(
        resolution: f64,
        config: &StefConfig,
        training_span: Option<(f64, f64)>,
        cells: BTreeMap<CellIndex, StefCell>,
    ) -> Result<Self> {
        config.validate()?;
        if let Some(bad) = cells.values().find(|c| c.k() != config.k) {
            return Err(Error::invalid(format!(
                "cell with {} bins in a map with k = {}",
                bad.k(),
                config.k
            )));
        }
        if let Some((a, b)) = training_span {
            let n = (b - a) / config.t_interval;
            if !(n >= 0.0 && (n - n.round()).abs() < 1e-6) {
                return Err(Error::invalid("training span is not a whole number of intervals"));
            }
        }
        Ok(Self {
            grid: Grid::new(resolution)?,
            k: config.k,
            t_interval: config.t_interval,
            m: config.m,
            candidates: config.candidates.clone(),
            training_span,
            cells,
        })
    }

    pub fn resolution(&self) -> f64 {
        self.grid.resolution()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn t_interval(&self) -> f64 {
        self.t_interval
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn candidates(&self) -> &[f64] {
        &self.candidates
    }

    pub fn training_span(&self) -> Option<(f64, f64)> {
        self.training_span
    }

    pub fn cells(&self) -> &BTreeMap<CellIndex, StefCell> {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn config(&self) -> StefConfig {
        StefConfig {
            k: self.k,
            t_interval: self.t_interval,
            m: self.m,
            candidates: self.candidates.clone(),
            exec: Exec::default(),
        }
    }

    /// Nearest stored cell whose centre is within `radius`; ties go to the
    /// smaller cell index.
    pub fn nearest_cell(&self, x: f64, y: f64, radius: f64) -> Option<(CellIndex, &StefCell)> {
        if self.cells.is_empty() {
            return None;
        }
        self.grid
            .cells_within(x, y, radius)
            .filter_map(|(c, d)| self.cells.get(&c).map(|s| (c, d, s)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .map(|(c, _, s)| (c, s))
    }

    /// Orientation with the highest predicted probability in each cell.
    pub fn dominant_bins(&self, t: f64) -> BTreeMap<CellIndex, usize> {
        self.cells
            .iter()
            .map(|(&c, cell)| {
                let p = predict_bin_probs(cell, t);
                let best = (0..p.len()).fold(0, |b, i| if p[i] > p[b] { i } else { b });
                (c, best)
            })
            .collect()
    }
}

pub fn build_stef_map(trajectories: &[Trajectory], resolution: f64, config: &StefConfig) -> Result<StefMap> {
    config.validate()?;
    let hist = accumulate_bin_histograms(trajectories, resolution, config.k, config.t_interval)?;
    let all_times = phase_sums(hist.interval_times(), &config.candidates);
    let work: Vec<(&CellIndex, &BTreeMap<i64, Vec<f64>>)> = hist.cells.iter().collect();
    let fitted = config.exec.map_slice(&work, |_, (cell, series)| {
        let bins = (0..config.k)
            .map(|b| {
                let entries = series
                    .iter()
                    .filter(|(_, h)| h[b] != 0.0)
                    .map(|(&j, h)| (hist.interval_time(j), h[b]));
                fit_sparse(entries, hist.n_intervals, &all_times, &config.candidates, config.m)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((**cell, StefCell::new(bins)?))
    });
    let cells = fitted.into_iter().collect::<Result<BTreeMap<_, _>>>()?;
    StefMap::new(resolution, config, hist.training_span(), cells)
}

/// Draws an orientation bin in proportion to its predicted probability and
/// keeps the previous speed. Fitness is the normalized bin weight.
pub fn sample_velocity_from_stef(
    x: f64,
    y: f64,
    map: &StefMap,
    t: f64,
    prev_speed: f64,
    r_s: f64,
    rng: &mut dyn RngCore,
) -> Option<VelocitySample> {
    let (_, cell) = map.nearest_cell(x, y, r_s)?;
    let p = predict_bin_probs(cell, t);
    let total: f64 = p.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut chosen = p.iter().rposition(|v| *v > 0.0)?;
    for (i, v) in p.iter().enumerate() {
        acc += v;
        if u < acc && *v > 0.0 {
            chosen = i;
            break;
        }
    }
    let v = Velocity::clamped(prev_speed, bin_center(chosen, map.k));
    Some(VelocitySample::new(v, p[chosen] / total))
}

impl MoDSampler for StefMap {
    fn sample(&self, q: &SampleQuery, rng: &mut dyn RngCore) -> Option<VelocitySample> {
        sample_velocity_from_stef(q.x, q.y, self, q.t, q.prev_speed, q.radius, rng)
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_8, PI};

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::motion::{Sample, State};

    fn traj(id: &str, pts: &[(f64, f64, f64, f64)]) -> Trajectory {
        let samples = pts
            .iter()
            .map(|&(t, x, y, h)| Sample {
                t,
                state: State::new(x, y, 1.0, h).unwrap(),
            })
            .collect();
        Trajectory::new(id, samples).unwrap()
    }

    fn cell_of(means: &[f64]) -> StefCell {
        StefCell::new(means.iter().map(|&m| FremenModel::constant(m).unwrap()).collect()).unwrap()
    }

    fn single_cell_map(means: &[f64]) -> StefMap {
        let mut cells = BTreeMap::new();
        cells.insert((0, 0), cell_of(means));
        StefMap::new(1.0, &StefConfig { k: means.len(), ..Default::default() }, None, cells).unwrap()
    }

    #[test]
    fn bin_assignment() {
        assert_eq!(orientation_bin(0.0, 8), 0);
        assert_eq!(orientation_bin(FRAC_PI_8, 8), 0);
        assert_eq!(orientation_bin(FRAC_PI_8 + 1e-9, 8), 1);
        assert_eq!(orientation_bin(-FRAC_PI_8, 8), 0);
        assert_eq!(orientation_bin(PI, 8), 4);
        assert_eq!(orientation_bin(-PI, 8), 4);
        assert_eq!(orientation_bin(FRAC_PI_2, 8), 2);
        assert_eq!(orientation_bin(-0.1, 8), 0);
        assert_eq!(bin_center(4, 8), -PI);
    }

    #[test]
    fn histograms_normalize_per_interval() {
        let a = traj("a", &[(0.0, 0.0, 0.0, 0.0), (1.0, 0.1, 0.0, 0.0), (700.0, 0.0, 0.0, 0.0)]);
        let b = traj("b", &[(2.0, 0.0, 0.1, PI), (3.0, 0.0, 0.1, PI)]);
        let h = accumulate_bin_histograms(&[a, b], 1.0, 8, 600.0).unwrap();
        assert_eq!(h.n_intervals, 2);
        let c = &h.cells[&(0, 0)];
        assert_eq!(c[&0][0], 0.5);
        assert_eq!(c[&0][4], 0.5);
        assert_eq!(c[&1][0], 1.0);
        for hist in c.values() {
            assert!((hist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert_eq!(h.training_span(), Some((0.0, 1200.0)));
    }

    #[test]
    fn empty_input_gives_empty_map() {
        let m = build_stef_map(&[], 1.0, &StefConfig::default()).unwrap();
        assert!(m.is_empty());
        assert_eq!(m.training_span(), None);
    }

    #[test]
    fn raw_probabilities() {
        let cell = cell_of(&[0.8, 0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(predict_bin_probs(&cell, 0.0), predict_bin_probs(&cell, 1e6));
        assert_eq!(predict_bin_probs(&cell, 5.0)[..2], [0.8, 0.2]);
    }

    #[test]
    fn single_bin_always_chosen() {
        let map = single_cell_map(&[0.0, 0.0, 0.6, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let s = sample_velocity_from_stef(0.2, -0.1, &map, 0.0, 1.37, 1.0, &mut rng).unwrap();
            assert_eq!(s.velocity.heading(), FRAC_PI_2);
            assert_eq!(s.velocity.speed().to_bits(), 1.37f64.to_bits());
            assert_eq!(s.fitness, 1.0);
        }
        assert!(sample_velocity_from_stef(5.0, 5.0, &map, 0.0, 1.0, 1.0, &mut rng).is_none());
    }

    #[test]
    fn three_to_one_odds() {
        let map = single_cell_map(&[0.75, 0.0, 0.0, 0.0, 0.25, 0.0, 0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut zero = 0usize;
        for _ in 0..10_000 {
            let s = sample_velocity_from_stef(0.0, 0.0, &map, 0.0, 1.0, 1.0, &mut rng).unwrap();
            if s.velocity.heading() == 0.0 {
                assert_eq!(s.fitness, 0.75);
                zero += 1;
            } else {
                assert_eq!(s.fitness, 0.25);
            }
        }
        let ratio = zero as f64 / (10_000 - zero) as f64;
        assert!((ratio / 3.0 - 1.0).abs() < 0.05, "ratio {ratio}");
    }

    #[test]
    fn all_zero_bins_mean_no_data() {
        let map = single_cell_map(&[0.0; 8]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_velocity_from_stef(0.0, 0.0, &map, 0.0, 1.0, 1.0, &mut rng).is_none());
    }

    #[test]
    fn stationary_flow_is_flat() {
        let trajs: Vec<Trajectory> = (0..40)
            .map(|i| {
                let t0 = i as f64 * 3000.0;
                let pts: Vec<_> = (0..5).map(|s| (t0 + s as f64, s as f64, 0.0, 0.0)).collect();
                traj(&i.to_string(), &pts)
            })
            .collect();
        let map = build_stef_map(&trajs, 1.0, &StefConfig::default()).unwrap();
        assert_eq!(map.len(), 5);
        for (_, b) in map.dominant_bins(12_345.0) {
            assert_eq!(b, 0);
        }
        for cell in map.cells().values() {
            assert_eq!(cell.bins()[0].components().len(), 2);
            assert!(cell.bins()[4].mean() == 0.0);
        }
    }
}

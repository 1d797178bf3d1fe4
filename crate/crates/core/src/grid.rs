//! Uniform square grid shared by the map types.
//!
//! Cell `(i, j)` is centred at `(i·res, j·res)` and covers the half-open box
//! `[(i-½)·res, (i+½)·res) × [(j-½)·res, (j+½)·res)`.

use serde::{Deserialize, Serialize};

pub type CellIndex = (i64, i64);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    resolution: f64,
}

impl Grid {
    pub fn new(resolution: f64) -> crate::Result<Self> {
        if !(resolution > 0.0) || !resolution.is_finite() {
            return Err(crate::Error::invalid(format!(
                "resolution must be positive, got {resolution}"
            )));
        }
        Ok(Self { resolution })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn cell_of(&self, x: f64, y: f64) -> CellIndex {
        (
            (x / self.resolution + 0.5).floor() as i64,
            (y / self.resolution + 0.5).floor() as i64,
        )
    }

    pub fn center(&self, cell: CellIndex) -> (f64, f64) {
        (cell.0 as f64 * self.resolution, cell.1 as f64 * self.resolution)
    }

    /// Cells whose centre lies within Euclidean distance `radius` of `(x, y)`,
    /// paired with that distance.
    pub fn cells_within(&self, x: f64, y: f64, radius: f64) -> impl Iterator<Item = (CellIndex, f64)> + '_ {
        let reach = (radius / self.resolution).ceil() as i64 + 1;
        let (ci, cj) = self.cell_of(x, y);
        (ci - reach..=ci + reach)
            .flat_map(move |i| (cj - reach..=cj + reach).map(move |j| (i, j)))
            .filter_map(move |cell| {
                let (cx, cy) = self.center(cell);
                let d = (cx - x).hypot(cy - y);
                (d <= radius).then_some((cell, d))
            })
    }
}

/// Axis-aligned rectangle in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn empty() -> Self {
        Self {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.min_x > self.max_x || self.min_y > self.max_y
    }

    pub fn include(&mut self, x: f64, y: f64) {
        self.min_x = self.min_x.min(x);
        self.min_y = self.min_y.min(y);
        self.max_x = self.max_x.max(x);
        self.max_y = self.max_y.max(y);
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    /// Bounds covering the full extent of the given cells.
    pub fn of_cells<'a>(grid: &Grid, cells: impl IntoIterator<Item = &'a CellIndex>) -> Self {
        let half = grid.resolution() / 2.0;
        let mut b = Self::empty();
        for &c in cells {
            let (x, y) = grid.center(c);
            b.include(x - half, y - half);
            b.include(x + half, y + half);
        }
        b
    }
}

/// SplitMix64 finaliser, used to derive per-item seeds from a base seed.
pub(crate) fn mix_seed(base: u64, parts: &[i64]) -> u64 {
    let mut z = base;
    for &p in parts {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p as u64);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_are_centred_on_multiples() {
        let g = Grid::new(1.0).unwrap();
        assert_eq!(g.cell_of(0.0, 0.0), (0, 0));
        assert_eq!(g.cell_of(0.49, -0.49), (0, 0));
        assert_eq!(g.cell_of(0.5, -0.5), (1, 0));
        assert_eq!(g.cell_of(-0.51, 2.2), (-1, 2));
        let g = Grid::new(0.5).unwrap();
        assert_eq!(g.center((3, -2)), (1.5, -1.0));
        assert!(Grid::new(0.0).is_err());
    }

    #[test]
    fn radius_query() {
        let g = Grid::new(1.0).unwrap();
        let mut cells: Vec<_> = g.cells_within(0.0, 0.0, 1.0).map(|(c, _)| c).collect();
        cells.sort();
        assert_eq!(cells, vec![(-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)]);
        assert_eq!(g.cells_within(0.3, 0.3, 0.1).count(), 0);
    }

    #[test]
    fn seeds_differ_per_part() {
        assert_ne!(mix_seed(1, &[0, 1]), mix_seed(1, &[1, 0]));
        assert_eq!(mix_seed(7, &[3]), mix_seed(7, &[3]));
    }
}

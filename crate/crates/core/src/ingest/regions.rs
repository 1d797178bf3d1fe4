use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::motion::Trajectory;

pub const MARGINAL: &str = "marginal";
pub const LIFT: &str = "lift";

#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub label: String,
    pub vertices: Vec<(f64, f64)>,
}

impl Polygon {
    /// Even-odd rule; points on an edge may fall either way.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let v = &self.vertices;
        let mut inside = false;
        let mut j = v.len() - 1;
        for i in 0..v.len() {
            let ((xi, yi), (xj, yj)) = (v[i], v[j]);
            if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
                inside = !inside;
            }
            j = i;
        }
        inside
    }
}

/// Labelled polygons in metres. Text form: one polygon per line,
/// `label: x1 y1, x2 y2, x3 y3, ...`; `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Regions {
    pub polygons: Vec<Polygon>,
}

impl Regions {
    pub fn parse(text: &str) -> Result<Self> {
        let mut polygons = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let bad = |m: &str| Error::Format(format!("regions line {}: {m}", n + 1));
            let (label, rest) = line.split_once(':').ok_or_else(|| bad("expected `label: x y, ...`"))?;
            let vertices = rest
                .split(',')
                .map(|p| {
                    let v: Vec<f64> = p.split_whitespace().map(str::parse).collect::<Result<_, _>>().map_err(|_| bad("bad number"))?;
                    match v[..] {
                        [x, y] if x.is_finite() && y.is_finite() => Ok((x, y)),
                        _ => Err(bad("each vertex needs two numbers")),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            if vertices.len() < 3 {
                return Err(bad("a polygon needs at least 3 vertices"));
            }
            polygons.push(Polygon {
                label: label.trim().to_string(),
                vertices,
            });
        }
        Ok(Self { polygons })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn has(&self, label: &str) -> bool {
        self.polygons.iter().any(|p| p.label == label)
    }

    /// True if any polygon with `label` contains the point.
    pub fn contains(&self, label: &str, x: f64, y: f64) -> bool {
        self.polygons.iter().any(|p| p.label == label && p.contains(x, y))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FilterReport {
    pub input: usize,
    pub outside_marginal: usize,
    pub too_short: usize,
    pub lift_to_lift: usize,
}

impl FilterReport {
    pub fn kept(&self) -> usize {
        self.input - self.outside_marginal - self.too_short - self.lift_to_lift
    }
}

/// Drops trajectories that start or end outside the marginal area, have
/// fewer than `min_points` samples, or both start and end next to a lift.
/// Each removal is counted under the first rule that applies.
pub fn filter_edinburgh(trajs: &[Trajectory], regions: &Regions, min_points: usize) -> Result<(Vec<Trajectory>, FilterReport)> {
    for label in [MARGINAL, LIFT] {
        if !regions.has(label) {
            return Err(Error::MissingRegions(format!("no `{label}` polygon")));
        }
    }
    let mut report = FilterReport {
        input: trajs.len(),
        ..Default::default()
    };
    let mut kept = Vec::new();
    for t in trajs {
        let (Some(first), Some(last)) = (t.samples().first(), t.samples().last()) else {
            report.too_short += 1;
            continue;
        };
        let (a, b) = (first.state.position(), last.state.position());
        if !regions.contains(MARGINAL, a.0, a.1) || !regions.contains(MARGINAL, b.0, b.1) {
            report.outside_marginal += 1;
        } else if t.len() < min_points {
            report.too_short += 1;
        } else if regions.contains(LIFT, a.0, a.1) && regions.contains(LIFT, b.0, b.1) {
            report.lift_to_lift += 1;
        } else {
            kept.push(t.clone());
        }
    }
    Ok((kept, report))
}

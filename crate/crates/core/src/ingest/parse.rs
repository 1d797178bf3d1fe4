use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::resample::from_positions;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::motion::{Sample, State, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    /// `time[s], id, x, y, z, velocity, motion angle, facing angle`, no header.
    Atc,
    /// `TRACK.<id>=[[x y frame];[x y frame];...];` lines.
    Edinburgh,
    #[default]
    GenericCsv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub format: DatasetFormat,
    /// Metres per source position unit.
    pub unit_scale: f64,
    /// Seconds per source time unit.
    pub time_scale: f64,
    /// Epoch seconds added to every scaled timestamp.
    pub time_offset: f64,
    /// Resampling rate, Hz.
    pub target_rate: f64,
    /// Labelled polygons for the Edinburgh filter.
    pub regions: Option<PathBuf>,
    /// Raw points a trajectory needs to survive filtering.
    pub min_points: usize,
    /// Seconds added to epoch time to get local time.
    pub utc_offset: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            format: DatasetFormat::GenericCsv,
            unit_scale: 1.0,
            time_scale: 1.0,
            time_offset: 0.0,
            target_rate: 1.0,
            regions: None,
            min_points: 30,
            utc_offset: 0.0,
        }
    }
}

impl DatasetConfig {
    pub fn atc() -> Self {
        Self {
            format: DatasetFormat::Atc,
            unit_scale: 0.001,
            utc_offset: 9.0 * 3600.0,
            ..Self::default()
        }
    }

    pub fn edinburgh() -> Self {
        Self {
            format: DatasetFormat::Edinburgh,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (v, name) in [
            (self.unit_scale, "unit_scale"),
            (self.time_scale, "time_scale"),
            (self.target_rate, "target_rate"),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !self.time_offset.is_finite() || !self.utc_offset.is_finite() {
            return Err(Error::NonFinite("time offset"));
        }
        Ok(())
    }
}

/// One row of a source file, already scaled to metres and seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDetection {
    pub t: f64,
    pub person_id: String,
    pub x: f64,
    pub y: f64,
    pub speed: Option<f64>,
    pub heading: Option<f64>,
    pub facing: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParseOutcome {
    pub trajectories: Vec<Trajectory>,
    pub rows: usize,
    /// Malformed rows and repeated timestamps.
    pub skipped: usize,
}

pub const GENERIC_HEADER: [&str; 6] = ["timestamp_s", "person_id", "x_m", "y_m", "speed_mps", "heading_rad"];

pub fn parse(path: &Path, config: &DatasetConfig) -> Result<ParseOutcome> {
    let file = fs::File::open(path)?;
    parse_reader(file, config).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            path: path.to_path_buf(),
            message,
        },
        e => e,
    })
}

/// Parses several files and merges people that appear in more than one.
pub fn parse_files(paths: &[PathBuf], config: &DatasetConfig, exec: Exec) -> Result<ParseOutcome> {
    let parts = exec.map_slice(paths, |_, p| parse(p, config));
    let mut rows = 0;
    let mut skipped = 0;
    let mut all = Vec::new();
    for part in parts {
        let part = part?;
        rows += part.rows;
        skipped += part.skipped;
        all.extend(part.trajectories);
    }
    let mut merged: BTreeMap<String, Vec<Sample>> = BTreeMap::new();
    for t in all {
        merged.entry(t.person_id().to_string()).or_default().extend_from_slice(t.samples());
    }
    let mut trajectories = Vec::with_capacity(merged.len());
    for (id, mut samples) in merged {
        samples.sort_by(|a, b| a.t.total_cmp(&b.t));
        let before = samples.len();
        samples.dedup_by(|b, a| a.t == b.t);
        skipped += before - samples.len();
        trajectories.push(Trajectory::new(id, samples)?);
    }
    Ok(ParseOutcome {
        trajectories,
        rows,
        skipped,
    })
}

pub fn parse_reader<R: Read>(input: R, config: &DatasetConfig) -> Result<ParseOutcome> {
    config.validate()?;
    let (detections, rows, mut skipped) = match config.format {
        DatasetFormat::Edinburgh => read_edinburgh(input, config)?,
        _ => read_table(input, config)?,
    };
    if detections.is_empty() {
        return Err(Error::Parse {
            path: PathBuf::from("<input>"),
            message: format!("no valid rows ({skipped} malformed)"),
        });
    }
    let (trajectories, dup) = group(detections, config.format == DatasetFormat::GenericCsv)?;
    skipped += dup;
    Ok(ParseOutcome {
        trajectories,
        rows,
        skipped,
    })
}

fn read_table<R: Read>(input: R, config: &DatasetConfig) -> Result<(Vec<RawDetection>, usize, usize)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input);
    let num = |s: &str| s.parse::<f64>().ok().filter(|v| v.is_finite());
    let mut out = Vec::new();
    let (mut rows, mut skipped) = (0, 0);
    for (i, rec) in rdr.records().enumerate() {
        let rec = match rec {
            Ok(r) => r,
            Err(_) => {
                rows += 1;
                skipped += 1;
                continue;
            }
        };
        if i == 0 && config.format == DatasetFormat::GenericCsv && rec.get(0) == Some(GENERIC_HEADER[0]) {
            continue;
        }
        rows += 1;
        let field = |k: usize| rec.get(k).and_then(num);
        let det = match (field(0), rec.get(1), field(2), field(3)) {
            (Some(t), Some(id), Some(x), Some(y)) if !id.is_empty() => {
                let t = t * config.time_scale + config.time_offset;
                let s = config.unit_scale;
                match config.format {
                    DatasetFormat::Atc => RawDetection {
                        t,
                        person_id: id.to_string(),
                        x: x * s,
                        y: y * s,
                        speed: field(5).map(|v| v * s),
                        heading: field(6),
                        facing: field(7),
                    },
                    _ => RawDetection {
                        t,
                        person_id: id.to_string(),
                        x: x * s,
                        y: y * s,
                        speed: field(4).map(|v| v * s),
                        heading: field(5),
                        facing: None,
                    },
                }
            }
            _ => {
                skipped += 1;
                continue;
            }
        };
        out.push(det);
    }
    Ok((out, rows, skipped))
}

fn read_edinburgh<R: Read>(mut input: R, config: &DatasetConfig) -> Result<(Vec<RawDetection>, usize, usize)> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut out = Vec::new();
    let (mut rows, mut skipped) = (0, 0);
    for line in text.lines().map(str::trim) {
        let Some(rest) = line.strip_prefix("TRACK.") else {
            continue;
        };
        let Some((id, body)) = rest.split_once('=') else {
            skipped += 1;
            continue;
        };
        let id = id.trim();
        if id.starts_with('F') || id.starts_with('P') {
            continue;
        }
        for point in body.split(';') {
            let p = point.trim_matches(|c: char| c == '[' || c == ']' || c.is_whitespace());
            if p.is_empty() {
                continue;
            }
            rows += 1;
            let v: Vec<f64> = p.split_whitespace().filter_map(|s| s.parse().ok()).collect();
            match v[..] {
                [x, y, frame] if x.is_finite() && y.is_finite() && frame.is_finite() => out.push(RawDetection {
                    t: frame * config.time_scale + config.time_offset,
                    person_id: id.to_string(),
                    x: x * config.unit_scale,
                    y: y * config.unit_scale,
                    speed: None,
                    heading: None,
                    facing: None,
                }),
                _ => skipped += 1,
            }
        }
    }
    Ok((out, rows, skipped))
}

/// Groups by person, sorts by time and drops repeated timestamps. With
/// `use_stored`, velocities are kept when every detection of a person has
/// them; otherwise they are recomputed from positions.
fn group(detections: Vec<RawDetection>, use_stored: bool) -> Result<(Vec<Trajectory>, usize)> {
    let mut by_id: BTreeMap<String, Vec<RawDetection>> = BTreeMap::new();
    for d in detections {
        by_id.entry(d.person_id.clone()).or_default().push(d);
    }
    let mut dup = 0;
    let mut out = Vec::with_capacity(by_id.len());
    for (id, mut ds) in by_id {
        ds.sort_by(|a, b| a.t.total_cmp(&b.t));
        let before = ds.len();
        ds.dedup_by(|b, a| a.t == b.t);
        dup += before - ds.len();
        let stored = use_stored
            && ds
                .iter()
                .all(|d| d.speed.is_some_and(|s| s >= 0.0) && d.heading.is_some());
        let traj = if stored {
            let samples = ds
                .iter()
                .map(|d| {
                    Ok(Sample {
                        t: d.t,
                        state: State::new(d.x, d.y, d.speed.unwrap(), d.heading.unwrap())?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Trajectory::new(id, samples)?
        } else {
            let times: Vec<f64> = ds.iter().map(|d| d.t).collect();
            let pos: Vec<(f64, f64)> = ds.iter().map(|d| (d.x, d.y)).collect();
            from_positions(&id, &times, &pos)?
        };
        out.push(traj);
    }
    Ok((out, dup))
}

/// Writes the generic format, velocities included, in shortest round-trip
/// float form.
pub fn write_generic<W: Write>(out: W, trajectories: &[Trajectory]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(GENERIC_HEADER)?;
    for t in trajectories {
        for s in t.samples() {
            w.write_record([
                s.t.to_string(),
                t.person_id().to_string(),
                s.state.x().to_string(),
                s.state.y().to_string(),
                s.state.speed().to_string(),
                s.state.heading().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

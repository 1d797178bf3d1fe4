//! A STeF map on disk is a directory with `stef.csv`, one row per
//! (cell, bin, component) where component 0 holds the mean, and a
//! `manifest.json` with the build parameters.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::fremen::{FremenModel, SpectralComponent};
use super::map::{StefCell, StefConfig, StefMap};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::Grid;
use crate::io_util::parse_f64;

pub const STEF_HEADER: [&str; 7] = ["x", "y", "bin", "comp_index", "freq", "amplitude", "phase"];
pub const STEF_TABLE: &str = "stef.csv";
pub const STEF_MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StefManifest {
    pub kind: String,
    pub resolution: f64,
    pub k: usize,
    pub t_interval: f64,
    pub m: usize,
    pub candidate_freqs: Vec<f64>,
    pub training_span: Option<(f64, f64)>,
    pub cells: usize,
    pub table: String,
}

pub fn write_stef_table<W: std::io::Write>(map: &StefMap, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STEF_HEADER)?;
    for (&cell, c) in map.cells() {
        let (x, y) = map.grid().center(cell);
        for (b, model) in c.bins().iter().enumerate() {
            let mean = SpectralComponent {
                frequency: 0.0,
                amplitude: model.mean(),
                phase: 0.0,
            };
            for (i, comp) in std::iter::once(&mean).chain(model.components()).enumerate() {
                w.write_record(&[
                    x.to_string(),
                    y.to_string(),
                    b.to_string(),
                    i.to_string(),
                    comp.frequency.to_string(),
                    comp.amplitude.to_string(),
                    comp.phase.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_stef_table<R: std::io::Read>(input: R, resolution: f64, config: &StefConfig, training_span: Option<(f64, f64)>) -> Result<StefMap> {
    let grid = Grid::new(resolution)?;
    let mut rdr = csv::Reader::from_reader(input);
    if rdr.headers()?.iter().ne(STEF_HEADER) {
        return Err(Error::Format(format!("unexpected stef header {:?}", rdr.headers()?)));
    }
    type Rows = BTreeMap<usize, BTreeMap<usize, SpectralComponent>>;
    let mut cells: BTreeMap<_, Rows> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let f = |i: usize| parse_f64(&rec[i], STEF_HEADER[i]);
        let int = |i: usize| {
            rec[i]
                .parse::<usize>()
                .map_err(|_| Error::Format(format!("row {}: bad {}", line + 1, STEF_HEADER[i])))
        };
        let (bin, comp) = (int(2)?, int(3)?);
        if bin >= config.k || comp > config.m {
            return Err(Error::Format(format!("row {}: bin or component out of range", line + 1)));
        }
        let prev = cells
            .entry(grid.cell_of(f(0)?, f(1)?))
            .or_default()
            .entry(bin)
            .or_default()
            .insert(
                comp,
                SpectralComponent {
                    frequency: f(4)?,
                    amplitude: f(5)?,
                    phase: f(6)?,
                },
            );
        if prev.is_some() {
            return Err(Error::Format(format!("row {}: duplicate entry", line + 1)));
        }
    }
    let cells = cells
        .into_iter()
        .map(|(cell, bins)| {
            if bins.len() != config.k {
                return Err(Error::Format(format!("cell {cell:?} has {} of {} bins", bins.len(), config.k)));
            }
            let models = bins
                .into_values()
                .map(|comps| {
                    let mean = comps
                        .get(&0)
                        .ok_or_else(|| Error::Format(format!("cell {cell:?}: bin without mean row")))?
                        .amplitude;
                    FremenModel::new(mean, comps.into_iter().filter(|(i, _)| *i > 0).map(|(_, c)| c).collect())
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((cell, StefCell::new(models)?))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;
    StefMap::new(resolution, config, training_span, cells)
}

pub fn save_stef_map(map: &StefMap, dir: &Path) -> Result<StefManifest> {
    fs::create_dir_all(dir)?;
    write_stef_table(map, std::io::BufWriter::new(fs::File::create(dir.join(STEF_TABLE))?))?;
    let manifest = StefManifest {
        kind: "stef".into(),
        resolution: map.resolution(),
        k: map.k(),
        t_interval: map.t_interval(),
        m: map.m(),
        candidate_freqs: map.candidates().to_vec(),
        training_span: map.training_span(),
        cells: map.len(),
        table: STEF_TABLE.into(),
    };
    fs::write(dir.join(STEF_MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

pub fn load_stef_map(dir: &Path) -> Result<StefMap> {
    let manifest: StefManifest = serde_json::from_str(&fs::read_to_string(dir.join(STEF_MANIFEST))?)?;
    if manifest.kind != "stef" {
        return Err(Error::Format(format!("manifest kind `{}` is not stef", manifest.kind)));
    }
    let config = StefConfig {
        k: manifest.k,
        t_interval: manifest.t_interval,
        m: manifest.m,
        candidates: manifest.candidate_freqs,
        exec: Exec::default(),
    };
    read_stef_table(
        fs::File::open(dir.join(&manifest.table))?,
        manifest.resolution,
        &config,
        manifest.training_span,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directory_round_trip() {
        let config = StefConfig::default();
        let w = config.candidates[1];
        let model = |mean: f64, a: f64| {
            FremenModel::new(
                mean,
                vec![
                    SpectralComponent { frequency: w, amplitude: a, phase: 0.3 },
                    SpectralComponent { frequency: 2.0 * w, amplitude: a / 3.0, phase: -1.1 },
                ],
            )
            .unwrap()
        };
        let mut cells = BTreeMap::new();
        cells.insert((1, -2), StefCell::new((0..8).map(|b| model(b as f64 / 10.0, 0.1)).collect()).unwrap());
        let mut degenerate: Vec<_> = (0..8).map(|_| FremenModel::constant(0.125).unwrap()).collect();
        degenerate[3] = model(0.5, 0.2);
        cells.insert((4, 0), StefCell::new(degenerate).unwrap());
        let map = StefMap::new(1.0, &config, Some((0.0, 6000.0)), cells).unwrap();

        let dir = tempfile::tempdir().unwrap();
        save_stef_map(&map, dir.path()).unwrap();
        let first = fs::read(dir.path().join(STEF_TABLE)).unwrap();
        let back = load_stef_map(dir.path()).unwrap();
        assert_eq!(back, map);
        save_stef_map(&back, dir.path()).unwrap();
        assert_eq!(fs::read(dir.path().join(STEF_TABLE)).unwrap(), first);
    }

    #[test]
    fn missing_bins_rejected() {
        let text = "x,y,bin,comp_index,freq,amplitude,phase\n0,0,0,0,0,0.5,0\n";
        assert!(read_stef_table(text.as_bytes(), 1.0, &StefConfig::default(), None).is_err());
    }
}

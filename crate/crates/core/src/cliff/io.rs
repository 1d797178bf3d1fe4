//! Text serialisation of CLiFF maps.
//!
//! A single map is a CSV table with one row per (location, component),
//! preceded by `# key=value` metadata lines. Floats are written in Rust's
//! shortest round-trip form, so save → load → save is byte-identical.
//!
//! A time-conditioned map is a directory holding `interval_NN.csv` files and
//! a `manifest.json`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::map::CliffMap;
use super::swgmm::{Cov2, Swgmm, SwgmmComponent};
use super::tc::{DayIntervals, TcCliffMap};
use crate::error::{Error, Result};
use crate::grid::{Bounds, Grid};
use crate::io_util::{parse_f64, split_metadata};

pub const CLIFF_HEADER: [&str; 10] = [
    "x[m]",
    "y[m]",
    "motion_intensity[1]",
    "component_weight[1]",
    "mean_theta[rad]",
    "mean_rho[m/s]",
    "cov_tt[rad^2]",
    "cov_tr[rad*m/s]",
    "cov_rr[(m/s)^2]",
    "observation_count",
];
const CLIFF_MAGIC: &str = "cliff-map v1";

pub fn write_cliff_map<W: Write>(map: &CliffMap, mut out: W) -> Result<()> {
    let b = map.bounds();
    let mut head = String::new();
    writeln!(head, "# {CLIFF_MAGIC}").unwrap();
    writeln!(head, "# resolution={}", map.resolution()).unwrap();
    writeln!(head, "# bounds={},{},{},{}", b.min_x, b.min_y, b.max_x, b.max_y).unwrap();
    writeln!(head, "# em_seed={}", map.em_seed()).unwrap();
    out.write_all(head.as_bytes())?;

    let mut w = csv::Writer::from_writer(out);
    w.write_record(CLIFF_HEADER)?;
    for ((x, y), m) in map.iter() {
        for c in m.components() {
            let (mt, mr) = c.mean();
            let cov = c.cov();
            w.write_record(&[
                x.to_string(),
                y.to_string(),
                m.motion_intensity().to_string(),
                c.weight().to_string(),
                mt.to_string(),
                mr.to_string(),
                cov.tt.to_string(),
                cov.tr.to_string(),
                cov.rr.to_string(),
                m.observation_count().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_cliff_map<R: Read>(mut input: R) -> Result<CliffMap> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let (meta, body) = split_metadata(&text);
    if !meta.contains_key(CLIFF_MAGIC) {
        return Err(Error::Format(format!("missing `# {CLIFF_MAGIC}` line")));
    }
    let resolution = parse_f64(meta_value(&meta, "resolution")?, "resolution")?;
    let bounds = parse_bounds(meta_value(&meta, "bounds")?)?;
    let em_seed: u64 = meta_value(&meta, "em_seed")?
        .parse()
        .map_err(|_| Error::Format("bad em_seed".into()))?;
    let grid = Grid::new(resolution)?;

    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CLIFF_HEADER {
        return Err(Error::Format(format!("unexpected header {header:?}")));
    }
    let mut cells: BTreeMap<_, (f64, usize, Vec<SwgmmComponent>)> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let f = |i: usize| parse_f64(&rec[i], CLIFF_HEADER[i]);
        let (x, y) = (f(0)?, f(1)?);
        let count: usize = rec[9]
            .parse()
            .map_err(|_| Error::Format(format!("row {}: bad observation_count", line + 1)))?;
        let comp = SwgmmComponent::new(
            f(3)?,
            f(4)?,
            f(5)?,
            Cov2 {
                tt: f(6)?,
                tr: f(7)?,
                rr: f(8)?,
            },
        )?;
        let entry = cells
            .entry(grid.cell_of(x, y))
            .or_insert_with(|| (0.0, count, Vec::new()));
        entry.0 = f(2)?;
        entry.2.push(comp);
    }
    let locations = cells
        .into_iter()
        .map(|(cell, (intensity, count, comps))| Ok((cell, Swgmm::new(comps, intensity, count)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    CliffMap::new(resolution, bounds, locations, em_seed)
}

fn meta_value<'a>(meta: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    meta.get(key)
        .map(String::as_str)
        .ok_or_else(|| Error::Format(format!("missing `# {key}=` line")))
}

fn parse_bounds(s: &str) -> Result<Bounds> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| parse_f64(p.trim(), "bounds"))
        .collect::<Result<_>>()?;
    match v[..] {
        [min_x, min_y, max_x, max_y] => Ok(Bounds {
            min_x,
            min_y,
            max_x,
            max_y,
        }),
        _ => Err(Error::Format(format!("bounds need 4 values, got {}", v.len()))),
    }
}

pub fn save_cliff_map(map: &CliffMap, path: &Path) -> Result<()> {
    let f = fs::File::create(path)?;
    write_cliff_map(map, std::io::BufWriter::new(f))
}

pub fn load_cliff_map(path: &Path) -> Result<CliffMap> {
    read_cliff_map(fs::File::open(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TcManifest {
    pub kind: String,
    pub interval_length: f64,
    pub utc_offset: f64,
    pub resolution: f64,
    pub bounds: Option<Bounds>,
    pub em_seed: u64,
    pub intervals: BTreeMap<u32, String>,
}

pub const TC_MANIFEST: &str = "manifest.json";

pub fn interval_file_name(index: u32) -> String {
    format!("interval_{index:02}.csv")
}

pub fn save_tc_cliff_map(map: &TcCliffMap, dir: &Path) -> Result<TcManifest> {
    fs::create_dir_all(dir)?;
    let mut bounds = Bounds::empty();
    let mut intervals = BTreeMap::new();
    for (&idx, m) in map.interval_maps() {
        let name = interval_file_name(idx);
        save_cliff_map(m, &dir.join(&name))?;
        let b = m.bounds();
        if !b.is_empty() {
            bounds.include(b.min_x, b.min_y);
            bounds.include(b.max_x, b.max_y);
        }
        intervals.insert(idx, name);
    }
    let manifest = TcManifest {
        kind: "tc_cliff".into(),
        interval_length: map.interval_length(),
        utc_offset: map.intervals().utc_offset,
        resolution: map.resolution(),
        bounds: (!bounds.is_empty()).then_some(bounds),
        em_seed: map.em_seed(),
        intervals,
    };
    fs::write(dir.join(TC_MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

pub fn load_tc_cliff_map(dir: &Path) -> Result<TcCliffMap> {
    let manifest: TcManifest = serde_json::from_str(&fs::read_to_string(dir.join(TC_MANIFEST))?)?;
    if manifest.kind != "tc_cliff" {
        return Err(Error::Format(format!(
            "manifest kind `{}` is not tc_cliff",
            manifest.kind
        )));
    }
    let intervals = DayIntervals::with_offset(manifest.interval_length, manifest.utc_offset)?;
    let maps = manifest
        .intervals
        .iter()
        .map(|(&idx, name)| Ok((idx, load_cliff_map(&dir.join(name))?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    TcCliffMap::new(intervals, manifest.resolution, manifest.em_seed, maps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_map() -> CliffMap {
        let grid = Grid::new(0.5).unwrap();
        let mut locs = BTreeMap::new();
        let c1 = SwgmmComponent::new(0.7, 0.1, 1.3, Cov2 { tt: 0.05, tr: 0.01, rr: 0.02 }).unwrap();
        let c2 = SwgmmComponent::new(0.3, -3.0, 0.4, Cov2::diag(0.1, 0.1)).unwrap();
        locs.insert((2, -1), Swgmm::new(vec![c1.clone(), c2], 0.125, 40).unwrap());
        let c3 = SwgmmComponent::new(1.0, 0.1, 1.3, c1.cov()).unwrap();
        locs.insert((3, -1), Swgmm::new(vec![c3], 1.0 / 3.0, 12).unwrap());
        let bounds = Bounds::of_cells(&grid, locs.keys());
        CliffMap::new(0.5, bounds, locs, 42).unwrap()
    }

    #[test]
    fn round_trip_is_byte_exact() {
        let map = sample_map();
        let mut a = Vec::new();
        write_cliff_map(&map, &mut a).unwrap();
        let back = read_cliff_map(a.as_slice()).unwrap();
        assert_eq!(back, map);
        let mut b = Vec::new();
        write_cliff_map(&back, &mut b).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert!(text.contains("x[m],y[m],motion_intensity[1]"));
    }

    #[test]
    fn empty_map_round_trips() {
        let map = CliffMap::empty(1.0, 7).unwrap();
        let mut a = Vec::new();
        write_cliff_map(&map, &mut a).unwrap();
        let back = read_cliff_map(a.as_slice()).unwrap();
        assert_eq!(back.len(), 0);
        assert_eq!(back.em_seed(), 7);
    }

    #[test]
    fn rejects_bad_header() {
        let text = "# cliff-map v1\n# resolution=1\n# bounds=0,0,1,1\n# em_seed=0\nx,y\n";
        assert!(matches!(read_cliff_map(text.as_bytes()), Err(Error::Format(_))));
        assert!(read_cliff_map("x,y\n".as_bytes()).is_err());
    }

    #[test]
    fn tc_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut maps = BTreeMap::new();
        maps.insert(9, sample_map());
        maps.insert(14, sample_map());
        let tc = TcCliffMap::new(DayIntervals::new(3600.0).unwrap(), 0.5, 42, maps).unwrap();
        let manifest = save_tc_cliff_map(&tc, dir.path()).unwrap();
        assert_eq!(manifest.intervals.len(), 2);
        assert!(dir.path().join("interval_09.csv").exists());
        let back = load_tc_cliff_map(dir.path()).unwrap();
        assert_eq!(back, tc);
    }
}

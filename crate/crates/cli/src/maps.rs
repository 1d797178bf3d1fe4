use std::fs;
use std::path::Path;

use dynmap::cliff::io::{load_cliff_map, load_tc_cliff_map};
use dynmap::cliff::{CliffMap, TcCliffMap};
use dynmap::grid::Bounds;
use dynmap::stef::io::load_stef_map;
use dynmap::stef::StefMap;
use dynmap::MoDSampler;

use crate::{CliError, MapKind};

/// File holding a plain CLiFF map inside a map directory.
pub const CLIFF_FILE: &str = "cliff.csv";

pub enum LoadedMap {
    Cliff(CliffMap),
    TcCliff(TcCliffMap),
    Stef(StefMap),
}

impl LoadedMap {
    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let parse = |e: dynmap::Error| CliError::Parse(format!("{}: {e}", dir.display()));
        if dir.join(CLIFF_FILE).is_file() {
            return load_cliff_map(&dir.join(CLIFF_FILE)).map(LoadedMap::Cliff).map_err(parse);
        }
        let text = fs::read_to_string(dir.join("manifest.json"))
            .map_err(|e| CliError::Parse(format!("{}: not a map directory ({e})", dir.display())))?;
        let kind: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Parse(e.to_string()))?;
        match kind.get("kind").and_then(|k| k.as_str()) {
            Some("tc_cliff") => load_tc_cliff_map(dir).map(LoadedMap::TcCliff).map_err(parse),
            Some("stef") => load_stef_map(dir).map(LoadedMap::Stef).map_err(parse),
            other => Err(CliError::Parse(format!("{}: unknown map kind {other:?}", dir.display()))),
        }
    }

    pub fn kind(&self) -> MapKind {
        match self {
            LoadedMap::Cliff(_) => MapKind::Cliff,
            LoadedMap::TcCliff(_) => MapKind::TcCliff,
            LoadedMap::Stef(_) => MapKind::Stef,
        }
    }

    pub fn sampler(&self) -> &dyn MoDSampler {
        match self {
            LoadedMap::Cliff(m) => m,
            LoadedMap::TcCliff(m) => m,
            LoadedMap::Stef(m) => m,
        }
    }

    /// Extent of all cells with data.
    pub fn bounds(&self) -> Bounds {
        match self {
            LoadedMap::Cliff(m) => m.bounds(),
            LoadedMap::TcCliff(m) => {
                let mut b = Bounds::empty();
                for m in m.interval_maps().values().map(CliffMap::bounds).filter(|b| !b.is_empty()) {
                    b.include(m.min_x, m.min_y);
                    b.include(m.max_x, m.max_y);
                }
                b
            }
            LoadedMap::Stef(m) => Bounds::of_cells(m.grid(), m.cells().keys()),
        }
    }
}

//! Circular-linear flow field maps: grids of semi-wrapped Gaussian mixtures
//! over velocity, and their time-of-day conditioned collection.

pub mod em;
pub mod io;
mod map;
pub mod swgmm;
mod tc;

pub use em::{fit_swgmm, fit_swgmm_detailed, EmConfig, SwgmmFit};
pub use map::{build_cliff_map, sample_velocity_from_cliff, CliffMap, NearSwgmm};
pub use swgmm::{Cov2, Swgmm, SwgmmComponent};
pub use tc::{build_tc_cliff_map, DayIntervals, TcCliffMap, SECONDS_PER_DAY};

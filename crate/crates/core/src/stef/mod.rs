//! Spatio-temporal flow maps: per-cell orientation bins whose probabilities
//! are periodic functions of absolute time.

mod fremen;
pub mod io;
mod map;

pub use fremen::{daily_harmonics, fit_fremen, FremenModel, SpectralComponent};
pub use map::{
    accumulate_bin_histograms, bin_center, build_stef_map, orientation_bin, predict_bin_probs,
    sample_velocity_from_stef, BinHistograms, StefCell, StefConfig, StefMap,
};

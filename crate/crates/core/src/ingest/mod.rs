//! Trajectory datasets: parsing, resampling, filtering, splitting and
//! synthetic generation.
//!
//! All adapters produce [`Trajectory`] values in metres and epoch seconds.
//! The generic interchange format is a CSV table
//! `timestamp_s,person_id,x_m,y_m[,speed_mps,heading_rad]`.

mod parse;
mod regions;
mod resample;
mod split;
mod synth;

pub use parse::{
    parse, parse_files, parse_reader, write_generic, DatasetConfig, DatasetFormat, ParseOutcome, RawDetection,
    GENERIC_HEADER,
};
pub use regions::{filter_edinburgh, FilterReport, Polygon, Regions, LIFT, MARGINAL};
pub use resample::{derive_velocities, resample, resample_all, ResampleReport};
pub use split::{day_of, split_by_day, DaySplit};
pub use synth::{generate_synthetic, Scenario, SynthParams};

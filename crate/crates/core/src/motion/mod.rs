//! Shared state types, circular arithmetic and constant-velocity kinematics.

pub mod angle;
mod kinematics;
mod state;

pub use angle::{angle_diff, circular_weighted_mean, wrap_angle};
pub use kinematics::{
    estimate_observed_velocity, observation_weight, propagate, ObservedVelocityConfig,
};
pub use state::{Sample, State, Trajectory, Velocity};

//! Stochastic rollouts of constant-velocity motion biased toward velocities
//! drawn from a map of dynamics, and their ranking by accumulated log fitness.

use std::cmp::Ordering;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::motion::{angle, estimate_observed_velocity, propagate, ObservedVelocityConfig, State, Velocity};
use crate::sampler::{MoDSampler, SampleQuery};

/// What a rollout does when the map has no data near the current position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopPolicy {
    /// End the rollout.
    #[default]
    Truncate,
    /// Keep the current velocity for this step and add nothing to the fitness.
    CvmContinue,
}

/// Time passed to the sampler at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeMode {
    /// Every step queries the map at the start time.
    #[default]
    Freeze,
    /// Step `n` queries the map at `t0 + n·dt`.
    Advance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorParams {
    pub beta: f64,
    pub r_s: f64,
    pub dt: f64,
    /// Prediction steps.
    pub t_p: usize,
    /// Rollouts per prediction.
    pub k: usize,
    pub stop_policy: StopPolicy,
    pub time_mode: TimeMode,
    pub observed: ObservedVelocityConfig,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for PredictorParams {
    fn default() -> Self {
        Self {
            beta: 1.0,
            r_s: 1.0,
            dt: 1.0,
            t_p: 60,
            k: 5,
            stop_policy: StopPolicy::default(),
            time_mode: TimeMode::default(),
            observed: ObservedVelocityConfig::default(),
            exec: Exec::default(),
        }
    }
}

impl PredictorParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.beta, "beta")?;
        positive(self.r_s, "r_s")?;
        positive(self.dt, "dt")?;
        positive(self.observed.sigma, "observation sigma")?;
        if self.t_p == 0 || self.k == 0 || self.observed.steps == 0 {
            return Err(Error::invalid("t_p, k and observation steps must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    /// Index of the rollout that produced this result.
    pub rollout: usize,
    /// The current state built from the observation.
    pub start: State,
    /// Predicted states for steps `1..=len`.
    pub states: Vec<State>,
    /// Log fitness added at each predicted step.
    pub step_log_fitness: Vec<f64>,
    pub log_fitness: f64,
    /// 1-based step at which a truncated rollout found no map data.
    pub stopped_at: Option<usize>,
}

impl PredictionResult {
    pub fn stopped_early(&self) -> bool {
        self.stopped_at.is_some()
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Log fitness accumulated over the first `steps` steps.
    pub fn log_fitness_until(&self, steps: usize) -> f64 {
        self.step_log_fitness.iter().take(steps).sum()
    }

    pub fn positions(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.states.iter().map(State::position)
    }
}

/// Kernel-weighted blend of the previous velocity toward a sampled one.
/// The heading difference is taken on the circle.
pub fn bias_velocity(prev: Velocity, sampled: Velocity, beta: f64) -> Velocity {
    let kernel = |d: f64| d * (-beta * d * d).exp();
    let d_speed = sampled.speed() - prev.speed();
    let d_heading = angle::diff(sampled.heading(), prev.heading());
    Velocity::clamped(
        prev.speed() + kernel(d_speed),
        prev.heading() + kernel(d_heading),
    )
}

/// The state at the last observation, with the velocity estimated from the
/// trailing `observed.steps` states.
pub fn current_state(history: &[State], observed: &ObservedVelocityConfig) -> Result<State> {
    let last = history.last().ok_or(Error::EmptyHistory)?;
    let recent = &history[history.len().saturating_sub(observed.steps.max(1))..];
    let v = estimate_observed_velocity(recent, observed.sigma, observed.normalize)?;
    State::from_parts(last.x(), last.y(), v)
}

/// One rollout. `history` is ordered oldest to newest; `start_time` is the
/// epoch time of its last state.
pub fn predict_one<S: MoDSampler + ?Sized>(
    history: &[State],
    sampler: &S,
    params: &PredictorParams,
    start_time: f64,
    rng: &mut dyn RngCore,
) -> Result<PredictionResult> {
    params.validate()?;
    let start = current_state(history, &params.observed)?;
    Ok(rollout(start, sampler, params, start_time, rng, 0))
}

fn rollout<S: MoDSampler + ?Sized>(
    start: State,
    sampler: &S,
    params: &PredictorParams,
    start_time: f64,
    rng: &mut dyn RngCore,
    index: usize,
) -> PredictionResult {
    let mut states = Vec::with_capacity(params.t_p);
    let mut step_log_fitness = Vec::with_capacity(params.t_p);
    let mut stopped_at = None;
    let mut current = start;
    for step in 1..=params.t_p {
        let (x, y) = propagate(&current, params.dt);
        let t = match params.time_mode {
            TimeMode::Freeze => start_time,
            TimeMode::Advance => start_time + step as f64 * params.dt,
        };
        let query = SampleQuery {
            x,
            y,
            t,
            prev_speed: current.speed(),
            radius: params.r_s,
        };
        let (velocity, log_p) = match sampler.sample(&query, rng) {
            Some(s) => (bias_velocity(current.velocity(), s.velocity, params.beta), s.fitness.ln()),
            None => match params.stop_policy {
                StopPolicy::Truncate => {
                    stopped_at = Some(step);
                    break;
                }
                StopPolicy::CvmContinue => (current.velocity(), 0.0),
            },
        };
        current = State::raw(x, y, velocity);
        states.push(current);
        step_log_fitness.push(log_p);
    }
    PredictionResult {
        rollout: index,
        start,
        log_fitness: step_log_fitness.iter().sum(),
        states,
        step_log_fitness,
        stopped_at,
    }
}

/// Ranking order: higher log fitness first, then longer rollouts, then lower
/// rollout index.
pub fn rank_order(a: &PredictionResult, b: &PredictionResult) -> Ordering {
    b.log_fitness
        .total_cmp(&a.log_fitness)
        .then(b.states.len().cmp(&a.states.len()))
        .then(a.rollout.cmp(&b.rollout))
}

/// `params.k` independent rollouts sorted best first. Rollout `i` uses
/// stream `i` of a generator seeded from one draw of `rng`, so results do not
/// depend on whether rollouts run in parallel.
pub fn predict_ranked<S: MoDSampler + ?Sized>(
    history: &[State],
    sampler: &S,
    params: &PredictorParams,
    start_time: f64,
    rng: &mut dyn RngCore,
) -> Result<Vec<PredictionResult>> {
    params.validate()?;
    let start = current_state(history, &params.observed)?;
    let base = rng.next_u64();
    let mut results = params.exec.map_range(params.k, |i| {
        let mut stream = ChaCha8Rng::seed_from_u64(base);
        stream.set_stream(i as u64);
        rollout(start, sampler, params, start_time, &mut stream, i)
    });
    results.sort_by(rank_order);
    Ok(results)
}

/// Constant-velocity baseline using the default observation settings.
pub fn cvm_predict(history: &[State], t_p: usize, dt: f64) -> Result<PredictionResult> {
    cvm_predict_with(history, t_p, dt, &ObservedVelocityConfig::default())
}

pub fn cvm_predict_with(
    history: &[State],
    t_p: usize,
    dt: f64,
    observed: &ObservedVelocityConfig,
) -> Result<PredictionResult> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let start = current_state(history, observed)?;
    let mut states = Vec::with_capacity(t_p);
    let mut current = start;
    for _ in 0..t_p {
        let (x, y) = propagate(&current, dt);
        current = State::raw(x, y, start.velocity());
        states.push(current);
    }
    Ok(PredictionResult {
        rollout: 0,
        start,
        step_log_fitness: vec![0.0; t_p],
        log_fitness: 0.0,
        states,
        stopped_at: None,
    })
}

//! Displacement metrics over a sweep of horizons.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::mix_seed;
use crate::motion::{State, Trajectory};
use crate::predictor::{cvm_predict_with, predict_ranked, PredictionResult, PredictorParams};
use crate::sampler::MoDSampler;

/// Per-step Euclidean errors over the common prefix of both sequences.
pub fn displacement_errors(pred: &[State], gt: &[State]) -> Result<Vec<f64>> {
    if pred.is_empty() || gt.is_empty() {
        return Err(Error::UndefinedMetric("empty prediction or ground truth"));
    }
    Ok(pred
        .iter()
        .zip(gt)
        .map(|(p, g)| (p.x() - g.x()).hypot(p.y() - g.y()))
        .collect())
}

/// Average displacement error.
pub fn ade(pred: &[State], gt: &[State]) -> Result<f64> {
    let e = displacement_errors(pred, gt)?;
    Ok(compensated_sum(e.iter().copied()) / e.len() as f64)
}

/// Final displacement error, at the last compared step.
pub fn fde(pred: &[State], gt: &[State]) -> Result<f64> {
    Ok(*displacement_errors(pred, gt)?.last().unwrap())
}

/// Neumaier summation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        c += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + c
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    let var = compensated_sum(values.iter().map(|v| (v - mean) * (v - mean))) / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalCase {
    pub id: String,
    /// Observed states, oldest first; the last one is the current state.
    pub observation: Vec<State>,
    pub ground_truth: Vec<State>,
    /// Epoch time of the last observed state.
    pub start_time: f64,
}

impl EvalCase {
    pub fn new(id: impl Into<String>, observation: Vec<State>, ground_truth: Vec<State>, start_time: f64) -> Result<Self> {
        if observation.is_empty() {
            return Err(Error::EmptyHistory);
        }
        if ground_truth.is_empty() {
            return Err(Error::invalid("ground truth needs at least one state"));
        }
        Ok(Self {
            id: id.into(),
            observation,
            ground_truth,
            start_time,
        })
    }
}

/// Splits each trajectory into `observe_steps + 1` observed samples and up to
/// `max_steps` ground-truth samples. Trajectories too short to leave any
/// ground truth are skipped.
pub fn cases_from_trajectories(trajectories: &[Trajectory], observe_steps: usize, max_steps: usize) -> Vec<EvalCase> {
    trajectories
        .iter()
        .filter(|t| t.len() > observe_steps + 1)
        .map(|t| {
            let s = t.samples();
            let obs = &s[..=observe_steps];
            let gt = &s[observe_steps + 1..(observe_steps + 1 + max_steps).min(s.len())];
            EvalCase {
                id: t.person_id().to_string(),
                observation: obs.iter().map(|x| x.state).collect(),
                ground_truth: gt.iter().map(|x| x.state).collect(),
                start_time: obs.last().unwrap().t,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Score the top-ranked rollout.
    #[default]
    MostLikely,
    /// Average the metrics of all rollouts.
    MeanOverK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ranking {
    /// Rank on fitness of the full rollout.
    #[default]
    Full,
    /// Rank on fitness accumulated within each horizon.
    PerHorizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    /// Horizons in seconds.
    pub horizons: Vec<f64>,
    pub selection: Selection,
    pub ranking: Ranking,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            horizons: (1..=60).map(f64::from).collect(),
            selection: Selection::MostLikely,
            ranking: Ranking::Full,
            seed: 0,
        }
    }
}

/// How predictions are produced.
#[derive(Clone, Copy)]
pub enum Method<'a> {
    Mod(&'a dyn MoDSampler),
    Cvm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub horizon: f64,
    pub n_cases: usize,
    pub ade_mean: f64,
    pub ade_std: f64,
    pub fde_mean: f64,
    pub fde_std: f64,
}

/// Metrics of one case at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMetric {
    pub case_id: String,
    pub horizon: f64,
    pub ade: f64,
    pub fde: f64,
    /// Steps compared, averaged over rollouts for mean-over-k.
    pub steps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub rows: Vec<MetricRow>,
    pub per_case: Vec<CaseMetric>,
    /// `(horizon, cases without a defined metric)` for horizons that lost cases.
    pub skipped: Vec<(f64, usize)>,
    /// Wall-clock prediction time per case, milliseconds.
    pub runtime_ms: Vec<f64>,
}

impl Evaluation {
    pub fn mean_runtime_ms(&self) -> f64 {
        if self.runtime_ms.is_empty() {
            0.0
        } else {
            compensated_sum(self.runtime_ms.iter().copied()) / self.runtime_ms.len() as f64
        }
    }

    pub fn row(&self, horizon: f64) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.horizon == horizon)
    }
}

fn horizon_steps(h: f64, dt: f64) -> usize {
    (h / dt).round() as usize
}

/// Runs every case once at the largest horizon and scores the predictions
/// truncated to each horizon.
pub fn evaluate(cases: &[EvalCase], method: Method<'_>, params: &PredictorParams, options: &EvalOptions) -> Result<Evaluation> {
    if cases.is_empty() {
        return Err(Error::NoCases);
    }
    params.validate()?;
    if options.horizons.is_empty() {
        return Err(Error::invalid("no horizons"));
    }
    let mut steps = Vec::with_capacity(options.horizons.len());
    for &h in &options.horizons {
        let s = horizon_steps(h, params.dt);
        if !(h > 0.0) || s == 0 || s > params.t_p {
            return Err(Error::invalid(format!(
                "horizon {h} s outside (0, {}] s",
                params.t_p as f64 * params.dt
            )));
        }
        steps.push(s);
    }
    let run_params = PredictorParams {
        t_p: *steps.iter().max().unwrap(),
        ..params.clone()
    };

    let per_case = params.exec.map_slice(cases, |i, case| -> Result<_> {
        let clock = Instant::now();
        let ranked = match method {
            Method::Mod(sampler) => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(options.seed, &[i as i64]));
                predict_ranked(&case.observation, sampler, &run_params, case.start_time, &mut rng)?
            }
            Method::Cvm => vec![cvm_predict_with(&case.observation, run_params.t_p, run_params.dt, &run_params.observed)?],
        };
        let runtime = clock.elapsed().as_secs_f64() * 1e3;
        let scores: Vec<Option<(f64, f64, f64)>> = steps
            .iter()
            .map(|&h| score(&ranked, &case.ground_truth, h, options))
            .collect();
        Ok((runtime, scores))
    });

    let mut runtime_ms = Vec::with_capacity(cases.len());
    let mut by_horizon: Vec<Vec<(f64, f64)>> = vec![Vec::new(); steps.len()];
    let mut per_case_log = Vec::new();
    for (case, result) in cases.iter().zip(per_case) {
        let (runtime, scores) = result?;
        runtime_ms.push(runtime);
        for (j, s) in scores.into_iter().enumerate() {
            if let Some((a, f, n)) = s {
                by_horizon[j].push((a, f));
                per_case_log.push(CaseMetric {
                    case_id: case.id.clone(),
                    horizon: options.horizons[j],
                    ade: a,
                    fde: f,
                    steps: n,
                });
            }
        }
    }

    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (j, v) in by_horizon.iter().enumerate() {
        let h = options.horizons[j];
        if v.len() < cases.len() {
            skipped.push((h, cases.len() - v.len()));
        }
        if v.is_empty() {
            continue;
        }
        let (ade_mean, ade_std) = mean_std(&v.iter().map(|x| x.0).collect::<Vec<_>>());
        let (fde_mean, fde_std) = mean_std(&v.iter().map(|x| x.1).collect::<Vec<_>>());
        rows.push(MetricRow {
            horizon: h,
            n_cases: v.len(),
            ade_mean,
            ade_std,
            fde_mean,
            fde_std,
        });
    }
    Ok(Evaluation {
        rows,
        per_case: per_case_log,
        skipped,
        runtime_ms,
    })
}

/// `(ade, fde, compared steps)` at a horizon of `h` steps, or `None` when no
/// rollout has a prediction to compare.
fn score(ranked: &[PredictionResult], gt: &[State], h: usize, options: &EvalOptions) -> Option<(f64, f64, f64)> {
    let gt = &gt[..h.min(gt.len())];
    let metric = |r: &PredictionResult| {
        let pred = &r.states[..h.min(r.states.len())];
        let e = displacement_errors(pred, gt).ok()?;
        Some((compensated_sum(e.iter().copied()) / e.len() as f64, *e.last().unwrap(), e.len() as f64))
    };
    match options.selection {
        Selection::MostLikely => {
            let best = match options.ranking {
                Ranking::Full => ranked.first()?,
                Ranking::PerHorizon => ranked.iter().min_by(|a, b| {
                    b.log_fitness_until(h)
                        .total_cmp(&a.log_fitness_until(h))
                        .then(b.states.len().min(h).cmp(&a.states.len().min(h)))
                        .then(a.rollout.cmp(&b.rollout))
                })?,
            };
            metric(best)
        }
        Selection::MeanOverK => {
            let all: Vec<_> = ranked.iter().filter_map(metric).collect();
            if all.is_empty() {
                return None;
            }
            let n = all.len() as f64;
            Some((
                compensated_sum(all.iter().map(|m| m.0)) / n,
                compensated_sum(all.iter().map(|m| m.1)) / n,
                compensated_sum(all.iter().map(|m| m.2)) / n,
            ))
        }
    }
}

pub const RESULTS_HEADER: [&str; 9] = [
    "method",
    "dataset",
    "horizon_s",
    "n_cases",
    "ade_mean",
    "ade_std",
    "fde_mean",
    "fde_std",
    "mean_runtime_ms",
];

/// Writes rows with three decimals. Set `header` for the first block.
pub fn write_results<W: Write>(out: W, method: &str, dataset: &str, eval: &Evaluation, header: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if header {
        w.write_record(RESULTS_HEADER)?;
    }
    let rt = format!("{:.3}", eval.mean_runtime_ms());
    for r in &eval.rows {
        w.write_record([
            method.to_string(),
            dataset.to_string(),
            format!("{}", r.horizon),
            r.n_cases.to_string(),
            format!("{:.3}", r.ade_mean),
            format!("{:.3}", r.ade_std),
            format!("{:.3}", r.fde_mean),
            format!("{:.3}", r.fde_std),
            rt.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const CASE_LOG_HEADER: [&str; 7] = ["method", "dataset", "case_id", "horizon_s", "ade", "fde", "steps"];

pub fn write_case_log<W: Write>(out: W, method: &str, dataset: &str, eval: &Evaluation, header: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if header {
        w.write_record(CASE_LOG_HEADER)?;
    }
    for c in &eval.per_case {
        w.write_record([
            method.to_string(),
            dataset.to_string(),
            c.case_id.clone(),
            format!("{}", c.horizon),
            format!("{:.6}", c.ade),
            format!("{:.6}", c.fde),
            format!("{}", c.steps),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const PLOT_HEADER: [&str; 8] = ["method", "horizon_s", "ade_mean", "ade_lo", "ade_hi", "fde_mean", "fde_lo", "fde_hi"];

/// Mean ± one standard deviation per horizon.
pub fn write_plot_data<W: Write>(out: W, method: &str, eval: &Evaluation, header: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if header {
        w.write_record(PLOT_HEADER)?;
    }
    for r in &eval.rows {
        w.write_record([
            method.to_string(),
            format!("{}", r.horizon),
            format!("{:.3}", r.ade_mean),
            format!("{:.3}", r.ade_mean - r.ade_std),
            format!("{:.3}", r.ade_mean + r.ade_std),
            format!("{:.3}", r.fde_mean),
            format!("{:.3}", r.fde_mean - r.fde_std),
            format!("{:.3}", r.fde_mean + r.fde_std),
        ])?;
    }
    w.flush()?;
    Ok(())
}

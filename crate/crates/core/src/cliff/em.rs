//! Expectation-maximisation for semi-wrapped Gaussian mixtures.
//!
//! Each observation is treated as drawn from one of `K × 3` latent
//! Gaussians: a component `j` and a winding `k ∈ {-1, 0, 1}` of the heading.
//! The M-step is the usual weighted Gaussian update on the unwrapped points,
//! after which mean headings are wrapped back into `[-π, π)`. Covariance
//! eigenvalues are floored at `cov_floor`.
//!
//! Initial assignments come from k-means++ on `(cos θ, sin θ, ρ / ρ_scale)`,
//! which has no seam, and the component count is chosen by BIC.

use std::f64::consts::TAU;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::swgmm::{Cov2, Swgmm, SwgmmComponent, WINDINGS};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::grid::mix_seed;
use crate::motion::angle::{circular_weighted_mean, diff};
use crate::motion::Velocity;

/// Observations per free parameter required before a component count is
/// considered by model selection.
const OBS_PER_PARAMETER: usize = 2;
const PARAMS_PER_COMPONENT: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmConfig {
    pub max_components: usize,
    pub min_observations: usize,
    /// Stop when the total log-likelihood improves by less than this.
    pub tol: f64,
    pub max_iter: usize,
    pub cov_floor: f64,
    pub kmeans_iters: usize,
    pub seed: u64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for EmConfig {
    fn default() -> Self {
        Self {
            max_components: 5,
            min_observations: 10,
            tol: 1e-6,
            max_iter: 200,
            cov_floor: 1e-4,
            kmeans_iters: 30,
            seed: 0,
            exec: Exec::default(),
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_components == 0 {
            return Err(Error::invalid("max_components must be at least 1"));
        }
        if self.min_observations == 0 {
            return Err(Error::invalid("min_observations must be at least 1"));
        }
        if !(self.cov_floor > super::swgmm::MIN_EIGENVALUE) {
            return Err(Error::invalid(format!(
                "cov_floor {} must exceed {:e}",
                self.cov_floor,
                super::swgmm::MIN_EIGENVALUE
            )));
        }
        if !(self.tol >= 0.0) {
            return Err(Error::invalid("tol must be non-negative"));
        }
        Ok(())
    }
}

/// Result of one EM run with a fixed component count.
#[derive(Debug, Clone)]
pub struct EmRun {
    pub components: Vec<SwgmmComponent>,
    pub log_likelihood: f64,
    /// Total log-likelihood before each M-step, then after the last one.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl EmRun {
    pub fn bic(&self, n: usize) -> f64 {
        let p = (PARAMS_PER_COMPONENT * self.components.len() - 1) as f64;
        -2.0 * self.log_likelihood + p * (n as f64).ln()
    }
}

/// Model-selection outcome of [`fit_swgmm_detailed`].
#[derive(Debug, Clone)]
pub struct SwgmmFit {
    pub mixture: Swgmm,
    pub selected: EmRun,
    /// `(requested components, BIC)` for every candidate that was fitted.
    pub candidates: Vec<(usize, f64)>,
}

/// Fits a mixture with BIC-selected component count. The returned mixture
/// carries `motion_intensity = 1`; map building overwrites it.
pub fn fit_swgmm(observations: &[Velocity], config: &EmConfig) -> Result<Swgmm> {
    fit_swgmm_detailed(observations, config).map(|f| f.mixture)
}

pub fn fit_swgmm_detailed(observations: &[Velocity], config: &EmConfig) -> Result<SwgmmFit> {
    config.validate()?;
    let n = observations.len();
    if n < config.min_observations {
        return Err(Error::InsufficientData {
            got: n,
            need: config.min_observations,
        });
    }
    let points: Vec<(f64, f64)> = observations
        .iter()
        .map(|v| (v.heading(), v.speed()))
        .collect();
    let k_max = config
        .max_components
        .min(n / (OBS_PER_PARAMETER * PARAMS_PER_COMPONENT))
        .max(1);

    let mut best: Option<(f64, EmRun)> = None;
    let mut candidates = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, &[k as i64]));
        let run = fit_em(&points, k, config, &mut rng)?;
        let bic = run.bic(n);
        candidates.push((k, bic));
        if best.as_ref().is_none_or(|(b, _)| bic < *b) {
            best = Some((bic, run));
        }
    }
    let (_, selected) = best.expect("at least one candidate");
    let mixture = Swgmm::normalized(selected.components.clone(), 1.0, n)?;
    Ok(SwgmmFit {
        mixture,
        selected,
        candidates,
    })
}

/// Runs EM with `k` requested components. Components whose responsibility
/// mass vanishes are dropped, so the result may hold fewer.
pub fn fit_em(
    points: &[(f64, f64)],
    k: usize,
    config: &EmConfig,
    rng: &mut dyn RngCore,
) -> Result<EmRun> {
    if points.is_empty() {
        return Err(Error::InsufficientData {
            got: 0,
            need: 1,
        });
    }
    let mut comps = initialise(points, k, config, rng)?;
    let n = points.len();
    let mut trace = Vec::new();
    let mut resp = vec![0.0; n * comps.len() * WINDINGS.len()];
    let mut converged = false;
    let mut iterations = 0;
    let mut ll = e_step(points, &comps, &mut resp);
    trace.push(ll);

    while iterations < config.max_iter {
        iterations += 1;
        comps = m_step(points, &comps, &resp, config.cov_floor)?;
        resp.resize(n * comps.len() * WINDINGS.len(), 0.0);
        let next = e_step(points, &comps, &mut resp);
        trace.push(next);
        let delta = next - ll;
        ll = next;
        if delta.abs() < config.tol {
            converged = true;
            break;
        }
    }
    Ok(EmRun {
        components: comps,
        log_likelihood: ll,
        trace,
        iterations,
        converged,
    })
}

/// Total log-likelihood of `points` under a mixture.
pub fn log_likelihood(points: &[(f64, f64)], comps: &[SwgmmComponent]) -> f64 {
    points
        .iter()
        .map(|&(t, r)| {
            let terms = comps.iter().flat_map(|c| {
                let lw = c.weight().ln();
                WINDINGS
                    .iter()
                    .map(move |k| lw + c.log_gauss(t + TAU * k, r))
            });
            log_sum_exp(terms)
        })
        .sum()
}

fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Fills `resp` (row-major `n × K × 3`) and returns the log-likelihood.
fn e_step(points: &[(f64, f64)], comps: &[SwgmmComponent], resp: &mut [f64]) -> f64 {
    let stride = comps.len() * WINDINGS.len();
    let mut ll = 0.0;
    for (i, &(t, r)) in points.iter().enumerate() {
        let row = &mut resp[i * stride..(i + 1) * stride];
        let mut m = f64::NEG_INFINITY;
        for (j, c) in comps.iter().enumerate() {
            let lw = c.weight().ln();
            for (w, k) in WINDINGS.iter().enumerate() {
                let v = lw + c.log_gauss(t + TAU * k, r);
                row[j * WINDINGS.len() + w] = v;
                m = m.max(v);
            }
        }
        let s: f64 = row.iter().map(|v| (v - m).exp()).sum();
        let lse = m + s.ln();
        for v in row.iter_mut() {
            *v = (*v - lse).exp();
        }
        ll += lse;
    }
    ll
}

fn m_step(
    points: &[(f64, f64)],
    comps: &[SwgmmComponent],
    resp: &[f64],
    cov_floor: f64,
) -> Result<Vec<SwgmmComponent>> {
    let n = points.len();
    let stride = comps.len() * WINDINGS.len();
    let mut out = Vec::with_capacity(comps.len());
    for j in 0..comps.len() {
        let mut mass = 0.0;
        let (mut st, mut sr) = (0.0, 0.0);
        for (i, &(t, r)) in points.iter().enumerate() {
            for (w, k) in WINDINGS.iter().enumerate() {
                let g = resp[i * stride + j * WINDINGS.len() + w];
                mass += g;
                st += g * (t + TAU * k);
                sr += g * r;
            }
        }
        if mass < 1e-10 * n as f64 {
            continue;
        }
        let (mt, mr) = (st / mass, sr / mass);
        let (mut ctt, mut ctr, mut crr) = (0.0, 0.0, 0.0);
        for (i, &(t, r)) in points.iter().enumerate() {
            for (w, k) in WINDINGS.iter().enumerate() {
                let g = resp[i * stride + j * WINDINGS.len() + w];
                let dt = t + TAU * k - mt;
                let dr = r - mr;
                ctt += g * dt * dt;
                ctr += g * dt * dr;
                crr += g * dr * dr;
            }
        }
        let cov = Cov2 {
            tt: ctt / mass,
            tr: ctr / mass,
            rr: crr / mass,
        }
        .floored(cov_floor);
        let weight = (mass / n as f64).min(1.0);
        out.push(SwgmmComponent::new(weight, mt, mr, cov)?);
    }
    if out.is_empty() {
        return Err(Error::InvalidCovariance("all components collapsed".into()));
    }
    Ok(out)
}

fn initialise(
    points: &[(f64, f64)],
    k: usize,
    config: &EmConfig,
    rng: &mut dyn RngCore,
) -> Result<Vec<SwgmmComponent>> {
    let n = points.len();
    let mean_r = points.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let var_r = points.iter().map(|p| (p.1 - mean_r).powi(2)).sum::<f64>() / n as f64;
    let scale = if var_r.sqrt() > 1e-9 { var_r.sqrt() } else { 1.0 };
    let embedded: Vec<[f64; 3]> = points
        .iter()
        .map(|&(t, r)| [t.cos(), t.sin(), r / scale])
        .collect();
    let labels = kmeans_pp(&embedded, k, config.kmeans_iters, rng);
    let clusters = labels.iter().copied().max().map_or(0, |m| m + 1);

    let mut comps = Vec::with_capacity(clusters);
    for c in 0..clusters {
        let members: Vec<(f64, f64)> = labels
            .iter()
            .zip(points)
            .filter(|(l, _)| **l == c)
            .map(|(_, p)| *p)
            .collect();
        if members.is_empty() {
            continue;
        }
        let m = members.len() as f64;
        let headings: Vec<f64> = members.iter().map(|p| p.0).collect();
        let mt = circular_weighted_mean(&headings, &vec![1.0; members.len()]).unwrap_or(headings[0]);
        let mr = members.iter().map(|p| p.1).sum::<f64>() / m;
        let (mut ctt, mut ctr, mut crr) = (0.0, 0.0, 0.0);
        for &(t, r) in &members {
            let dt = diff(t, mt);
            let dr = r - mr;
            ctt += dt * dt;
            ctr += dt * dr;
            crr += dr * dr;
        }
        let cov = Cov2 {
            tt: ctt / m,
            tr: ctr / m,
            rr: crr / m,
        }
        .floored(config.cov_floor);
        comps.push(SwgmmComponent::new(m / n as f64, mt, mr, cov)?);
    }
    Ok(comps)
}

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// k-means++ seeding followed by Lloyd iterations. Returns a dense label per
/// point; fewer than `k` labels are used when points coincide.
pub(crate) fn kmeans_pp(points: &[[f64; 3]], k: usize, iters: usize, rng: &mut dyn RngCore) -> Vec<usize> {
    let n = points.len();
    let mut centers: Vec<[f64; 3]> = vec![points[rng.random_range(0..n)]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut u = rng.random::<f64>() * total;
        let mut pick = n - 1;
        for (i, d) in d2.iter().enumerate() {
            if u < *d {
                pick = i;
                break;
            }
            u -= d;
        }
        centers.push(points[pick]);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, &points[pick]));
        }
    }

    let assign = |centers: &[[f64; 3]]| -> Vec<usize> {
        points
            .iter()
            .map(|p| {
                centers
                    .iter()
                    .enumerate()
                    .map(|(i, c)| (i, dist2(p, c)))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(i, _)| i)
                    .unwrap_or(0)
            })
            .collect()
    };
    let mut labels = assign(&centers);
    for _ in 0..iters {
        let mut sums = vec![[0.0; 3]; centers.len()];
        let mut counts = vec![0usize; centers.len()];
        for (l, p) in labels.iter().zip(points) {
            counts[*l] += 1;
            for d in 0..3 {
                sums[*l][d] += p[d];
            }
        }
        for (c, (s, cnt)) in centers.iter_mut().zip(sums.iter().zip(&counts)) {
            if *cnt > 0 {
                *c = s.map(|v| v / *cnt as f64);
            }
        }
        let next = assign(&centers);
        if next == labels {
            break;
        }
        labels = next;
    }

    // compact label ids so that empty clusters leave no gaps
    let mut remap = vec![usize::MAX; centers.len()];
    let mut next_id = 0;
    for l in labels.iter_mut() {
        if remap[*l] == usize::MAX {
            remap[*l] = next_id;
            next_id += 1;
        }
        *l = remap[*l];
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn obs(pairs: &[(f64, f64)]) -> Vec<Velocity> {
        pairs
            .iter()
            .map(|&(t, r)| Velocity::new(r, t).unwrap())
            .collect()
    }

    #[test]
    fn too_few_observations() {
        let v = obs(&[(0.0, 1.0); 5]);
        assert!(matches!(
            fit_swgmm(&v, &EmConfig::default()),
            Err(Error::InsufficientData { got: 5, need: 10 })
        ));
    }

    #[test]
    fn identical_points_fit_floor_covariance() {
        let v = obs(&[(0.3, 1.0); 40]);
        let m = fit_swgmm(&v, &EmConfig::default()).unwrap();
        assert_eq!(m.components().len(), 1);
        let c = &m.components()[0];
        assert!((c.mean().0 - 0.3).abs() < 1e-12);
        assert!((c.cov().tt - 1e-4).abs() < 1e-12);
    }

    #[test]
    fn seam_cluster_is_not_split() {
        // headings straddling ±π must form one component centred on the seam
        let pts: Vec<(f64, f64)> = (0..60)
            .map(|i| {
                let off = (i as f64 / 59.0 - 0.5) * 0.4;
                (crate::motion::angle::wrap(PI + off), 1.0 + 0.01 * (i % 7) as f64)
            })
            .collect();
        let m = fit_swgmm(&obs(&pts), &EmConfig::default()).unwrap();
        assert_eq!(m.components().len(), 1);
        assert!(m.components()[0].mean().0.abs() > PI - 0.05);
    }

    #[test]
    fn kmeans_handles_duplicates() {
        let pts = vec![[1.0, 0.0, 0.0]; 10];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let labels = kmeans_pp(&pts, 3, 10, &mut rng);
        assert!(labels.iter().all(|&l| l == 0));
    }
}

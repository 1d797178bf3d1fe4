//! Cross-module invariants checked on generated inputs.

use std::f64::consts::{PI, TAU};

use chrono::NaiveDate;
use dynmap::cliff::em::{fit_em, log_likelihood};
use dynmap::cliff::{build_cliff_map, build_tc_cliff_map, fit_swgmm, Cov2, DayIntervals, EmConfig, Swgmm, SwgmmComponent};
use dynmap::ingest::{
    day_of, filter_edinburgh, generate_synthetic, parse_reader, resample, split_by_day, write_generic, DatasetConfig, Regions,
    Scenario, SynthParams,
};
use dynmap::motion::Sample;
use dynmap::stef::{
    self, build_stef_map, daily_harmonics, predict_bin_probs, FremenModel, StefCell, StefConfig, StefMap,
};
use dynmap::{State, Trajectory, Velocity};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn component() -> impl Strategy<Value = (f64, f64, f64, f64, f64)> {
    // (weight, heading, speed, sd_heading, sd_speed) with speed mass 3 sd above 0
    (0.1f64..1.0, -PI..PI, 0.3f64..0.5, 0.05f64..0.8, 0.6f64..2.0)
        .prop_map(|(w, h, sd_r, sd_h, mean_r)| (w, h, mean_r.max(3.0 * sd_r + 0.05), sd_h, sd_r))
}

fn mixture(parts: &[(f64, f64, f64, f64, f64)], rho: f64) -> Swgmm {
    let total: f64 = parts.iter().map(|p| p.0).sum();
    let comps = parts
        .iter()
        .map(|&(w, h, r, sh, sr)| {
            let c = rho * sh * sr;
            SwgmmComponent::new(w / total, h, r, Cov2 { tt: sh * sh, tr: c, rr: sr * sr }).unwrap()
        })
        .collect();
    Swgmm::new(comps, 1.0, 100).unwrap()
}

fn integrate(m: &Swgmm, r_max: f64) -> f64 {
    let (nh, nr) = (360, 600);
    let (wh, wr) = (TAU / nh as f64, r_max / nr as f64);
    let mut acc = 0.0;
    for i in 0..nh {
        for j in 0..nr {
            let v = Velocity::new((j as f64 + 0.5) * wr, -PI + (i as f64 + 0.5) * wh).unwrap();
            acc += m.pdf(&v);
        }
    }
    acc * wh * wr
}

fn gaussian_draws(c: (f64, f64, f64, f64), n: usize, seed: u64) -> Vec<Velocity> {
    use rand_distr::{Distribution, Normal};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, r) = (Normal::new(c.0, c.2).unwrap(), Normal::new(c.1, c.3).unwrap());
    (0..n)
        .map(|_| Velocity::new(r.sample(&mut rng).max(0.0), h.sample(&mut rng)).unwrap())
        .collect()
}

fn points(v: &[Velocity]) -> Vec<(f64, f64)> {
    v.iter().map(|v| (v.heading(), v.speed())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn swgmm_pdf_integrates_to_one(parts in prop::collection::vec(component(), 1..4), rho in -0.6f64..0.6) {
        let m = mixture(&parts, rho);
        let r_max = parts.iter().map(|p| p.2 + 8.0 * p.4).fold(0.0, f64::max);
        let mass = integrate(&m, r_max);
        prop_assert!((mass - 1.0).abs() < 0.02, "mass {mass}");
    }

    #[test]
    fn em_log_likelihood_never_decreases(
        centres in prop::collection::vec((-PI..PI, 0.3f64..2.0), 1..4),
        k in 1usize..5,
        seed in 0u64..1000,
    ) {
        let mut data = Vec::new();
        for (i, &(h, r)) in centres.iter().enumerate() {
            data.extend(gaussian_draws((h, r, 0.3, 0.15), 60, seed + i as u64));
        }
        let pts = points(&data);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let run = fit_em(&pts, k, &EmConfig::default(), &mut rng).unwrap();
        for w in run.trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-8, "trace dropped {} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn held_out_likelihood_close_to_truth() {
    for (seed, c) in [(1u64, (0.5, 1.2, 0.2, 0.1)), (2, (PI - 0.1, 0.9, 0.3, 0.15)), (3, (-2.0, 1.5, 0.1, 0.2))] {
        let train = gaussian_draws(c, 500, seed);
        let held = points(&gaussian_draws(c, 500, seed + 100));
        let fit = fit_swgmm(&train, &EmConfig::default()).unwrap();
        let truth = [SwgmmComponent::new(1.0, c.0, c.1, Cov2::diag(c.2 * c.2, c.3 * c.3)).unwrap()];
        let n = held.len() as f64;
        let ll_fit = log_likelihood(&held, fit.components()) / n;
        let ll_true = log_likelihood(&held, &truth) / n;
        assert!(((ll_fit - ll_true) / ll_true).abs() < 0.05, "fit {ll_fit} true {ll_true}");
    }
}

#[test]
fn whole_day_interval_matches_plain_map() {
    let p = SynthParams { n_trajectories: 60, ..SynthParams::default() };
    let trajs = generate_synthetic(Scenario::Bend, &p, 5).unwrap();
    let cfg = EmConfig { seed: 17, ..EmConfig::default() };
    let plain = build_cliff_map(&trajs, 1.0, &cfg).unwrap();
    let tc = build_tc_cliff_map(&trajs, 1.0, DayIntervals::new(86_400.0).unwrap(), &cfg).unwrap();
    assert_eq!(tc.interval_maps().len(), 1);
    let only = &tc.interval_maps()[&0];
    assert_eq!(only.locations(), plain.locations());
    assert_eq!(only.bounds(), plain.bounds());
}

fn at_hour(hour: f64, day: u32, i: usize) -> f64 {
    1_704_067_200.0 + day as f64 * 86_400.0 + hour * 3600.0 + i as f64 * 60.0
}

fn corridor_at(t0: f64, heading: f64, id: String) -> Trajectory {
    let samples = (0..12)
        .map(|k| {
            let s = k as f64 * 1.2;
            let (x, y) = if heading == 0.0 { (s, 0.3) } else { (12.0 - s, 0.3) };
            Sample { t: t0 + k as f64, state: State::new(x, y, 1.2, heading).unwrap() }
        })
        .collect();
    Trajectory::new(id, samples).unwrap()
}

#[test]
fn tc_maps_follow_time_of_day() {
    let mut trajs = Vec::new();
    for day in 0..3 {
        for i in 0..40 {
            trajs.push(corridor_at(at_hour(9.0, day, i), 0.0, format!("e{day}-{i}")));
            trajs.push(corridor_at(at_hour(14.0, day, i), PI, format!("w{day}-{i}")));
        }
    }
    let tc = build_tc_cliff_map(&trajs, 1.0, DayIntervals::new(3600.0).unwrap(), &EmConfig::default()).unwrap();
    let maps = tc.interval_maps();
    assert_eq!(maps.keys().copied().collect::<Vec<_>>(), vec![9, 14]);
    for (_, m) in maps[&9].iter() {
        assert!(m.dominant().mean().0.abs() < 0.1);
    }
    for (_, m) in maps[&14].iter() {
        assert!(m.dominant().mean().0.abs() > PI - 0.1);
    }
}

/// One corridor cell whose direction flips every `half_period` seconds,
/// observed every 10 minutes for 4 days.
fn flipping_flow(half_period: f64) -> Vec<Trajectory> {
    (0..4 * 144)
        .map(|i| {
            let t = 1_704_067_200.0 + i as f64 * 600.0 + 100.0;
            let east = ((t - 1_704_067_200.0) / half_period).floor() as i64 % 2 == 0;
            let h = if east { 0.0 } else { PI };
            let s = Sample { t, state: State::new(0.1, 0.1, 1.0, h).unwrap() };
            Trajectory::new(format!("p{i:04}"), vec![s]).unwrap()
        })
        .collect()
}

fn dominant_frequency(trajs: &[Trajectory], candidates: Vec<f64>) -> f64 {
    let cfg = StefConfig { candidates, ..StefConfig::default() };
    let map = build_stef_map(trajs, 1.0, &cfg).unwrap();
    map.cells()[&(0, 0)].bins()[0].components()[0].frequency
}

#[test]
fn periodic_flow_dominant_frequency() {
    let mut candidates = daily_harmonics(24);
    assert!(candidates.contains(&(TAU / 43_200.0)));
    // a 12 h cycle (6 h each way) peaks at the 12 h harmonic
    assert_eq!(dominant_frequency(&flipping_flow(21_600.0), candidates.clone()), TAU / 43_200.0);
    // flipping every 12 h is a 24 h cycle
    assert_eq!(dominant_frequency(&flipping_flow(43_200.0), candidates.clone()), TAU / 86_400.0);
    candidates.retain(|&w| w != TAU / 86_400.0);
    assert_ne!(dominant_frequency(&flipping_flow(43_200.0), candidates), TAU / 43_200.0);
}

fn stef_cell(mean: f64, comps: &[(f64, f64, f64)]) -> StefCell {
    let mut bins: Vec<FremenModel> = (0..8).map(|_| FremenModel::constant(0.0).unwrap()).collect();
    let c = comps.iter().map(|&(f, a, p)| stef::SpectralComponent { frequency: f, amplitude: a, phase: p }).collect();
    bins[2] = FremenModel::new(mean, c).unwrap();
    bins[5] = FremenModel::constant(0.3).unwrap();
    StefCell::new(bins).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mean_only_model_is_constant_in_time(mean in 0.0f64..1.0, t1 in 0.0f64..1e9, t2 in 0.0f64..1e9) {
        let c = stef_cell(mean, &[]);
        prop_assert_eq!(predict_bin_probs(&c, t1), predict_bin_probs(&c, t2));
    }

    #[test]
    fn stef_speed_passes_through(prev in 0.0f64..5.0, t in 0.0f64..1e9, seed in any::<u64>()) {
        let mut cells = std::collections::BTreeMap::new();
        cells.insert((0, 0), stef_cell(0.5, &[(TAU / 86_400.0, 0.3, 1.0)]));
        let map = StefMap::new(1.0, &StefConfig::default(), None, cells).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = stef::sample_velocity_from_stef(0.2, -0.3, &map, t, prev, 1.0, &mut rng).unwrap();
        prop_assert_eq!(s.velocity.speed().to_bits(), prev.to_bits());
    }
}

fn track(id: usize, start: f64, steps: &[(f64, f64, f64)]) -> Trajectory {
    let mut t = start;
    let (mut x, mut y) = (0.0, 0.0);
    let samples = steps
        .iter()
        .map(|&(dt, dx, dy)| {
            t += dt;
            x += dx;
            y += dy;
            Sample { t, state: State::new(x, y, dx.hypot(dy) / dt, dy.atan2(dx)).unwrap() }
        })
        .collect();
    Trajectory::new(format!("p{id}"), samples).unwrap()
}

fn steps() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((0.05f64..2.0, -2.0f64..2.0, -2.0f64..2.0), 2..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generic_format_round_trips(tracks in prop::collection::vec((0.0f64..2e9, steps()), 1..6)) {
        let trajs: Vec<Trajectory> = tracks.iter().enumerate().map(|(i, (s, st))| track(i, *s, st)).collect();
        let mut buf = Vec::new();
        write_generic(&mut buf, &trajs).unwrap();
        let cfg = DatasetConfig::default();
        let back = parse_reader(buf.as_slice(), &cfg).unwrap().trajectories;
        prop_assert_eq!(back, trajs);
    }

    #[test]
    fn resampling_keeps_endpoints(st in steps(), rate in 0.25f64..4.0) {
        let t = track(0, 100.0, &st);
        let s = t.samples();
        prop_assume!(s[s.len() - 1].t - s[0].t >= 1.0 / rate);
        let r = resample(&t, rate).unwrap();
        let rho_max = s.windows(2)
            .map(|w| (w[1].state.x() - w[0].state.x()).hypot(w[1].state.y() - w[0].state.y()) / (w[1].t - w[0].t))
            .fold(0.0, f64::max);
        let dist = |a: &Sample, b: &Sample| (a.state.x() - b.state.x()).hypot(a.state.y() - b.state.y());
        let slack = rho_max / rate * (1.0 + 1e-9) + 1e-9;
        prop_assert!(dist(&r.samples()[0], &s[0]) <= slack);
        prop_assert!(dist(r.samples().last().unwrap(), s.last().unwrap()) <= slack);
    }

    #[test]
    fn filtering_is_idempotent(tracks in prop::collection::vec(steps(), 1..12), min_points in 1usize..30) {
        let regions = Regions::parse("marginal: -6 -6, 6 -6, 6 6, -6 6\nlift: -6 -6, 0 -6, 0 0, -6 0\n").unwrap();
        let trajs: Vec<Trajectory> = tracks.iter().enumerate().map(|(i, st)| track(i, 0.0, st)).collect();
        let (once, _) = filter_edinburgh(&trajs, &regions, min_points).unwrap();
        let (twice, report) = filter_edinburgh(&once, &regions, min_points).unwrap();
        prop_assert_eq!(&twice, &once);
        prop_assert_eq!(report.kept(), once.len());
    }

    #[test]
    fn day_split_partitions(starts in prop::collection::vec(0.0f64..10.0 * 86_400.0, 0..40), offset in -12i32..13, train_mask in 0u16..1024, test_mask in prop::option::of(0u16..1024)) {
        let base = 1_704_067_200.0;
        let offset = offset as f64 * 3600.0;
        let trajs: Vec<Trajectory> = starts.iter().enumerate().map(|(i, s)| track(i, base + s, &[(1.0, 1.0, 0.0)])).collect();
        let day0 = NaiveDate::from_ymd_opt(2023, 12, 31).unwrap();
        let days = |mask: u16| (0..11).filter(|b| mask & (1 << b) != 0).map(|b| day0 + chrono::Days::new(b)).collect::<Vec<_>>();
        let train = days(train_mask);
        let test = test_mask.map(|m| days(m).into_iter().filter(|d| !train.contains(d)).collect::<Vec<_>>());
        let split = split_by_day(&trajs, &train, test.as_deref(), offset);
        prop_assert_eq!(split.train.len() + split.test.len() + split.unassigned, trajs.len());
        for t in &split.test {
            prop_assert!(!split.train.iter().any(|u| u.person_id() == t.person_id()));
            prop_assert!(!train.contains(&day_of(t.start_time().unwrap(), offset).unwrap()));
        }
    }
}

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use dynmap::cliff::io::{save_cliff_map, save_tc_cliff_map};
use dynmap::cliff::{build_cliff_map, build_tc_cliff_map, CliffMap, DayIntervals};
use dynmap::evaluation::{
    cases_from_trajectories, evaluate as run_evaluation, write_case_log, write_plot_data, write_results, Method,
};
use dynmap::ingest::{
    filter_edinburgh, generate_synthetic, parse_files, resample_all, split_by_day, write_generic, DatasetConfig,
    DatasetFormat, Regions, SynthParams,
};
use dynmap::predictor::predict_ranked;
use dynmap::stef::build_stef_map;
use dynmap::stef::io::save_stef_map;
use dynmap::Trajectory;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::maps::{LoadedMap, CLIFF_FILE};
use crate::{manifest, BuildArgs, CliError, ConvertArgs, EvaluateArgs, MapKind, PredictArgs, SynthArgs};

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// True when the file holds nothing beyond an optional header line.
fn has_no_rows(path: &Path) -> Result<bool, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    Ok(text.lines().filter(|l| !l.trim().is_empty()).count() <= 1)
}

/// Reads generic CSV files as they are; no resampling. Files without data
/// rows contribute nothing instead of failing.
fn read_generic(paths: &[PathBuf], cfg: &RunConfig) -> Result<Vec<Trajectory>, CliError> {
    let c = DatasetConfig {
        format: DatasetFormat::GenericCsv,
        ..cfg.dataset.clone()
    };
    let mut nonempty = Vec::with_capacity(paths.len());
    for p in paths {
        if !has_no_rows(p)? {
            nonempty.push(p.clone());
        }
    }
    if nonempty.is_empty() {
        return Ok(Vec::new());
    }
    let out = parse_files(&nonempty, &c, cfg.exec()).map_err(|e| CliError::Parse(e.to_string()))?;
    if out.skipped > 0 {
        eprintln!("warning: skipped {} malformed or duplicate rows", out.skipped);
    }
    Ok(out.trajectories)
}

fn fmt_stats(map: &CliffMap) -> String {
    let comps: usize = map.locations().values().map(|m| m.components().len()).sum();
    let obs: usize = map.locations().values().map(|m| m.observation_count()).sum();
    let intensity = if map.is_empty() {
        0.0
    } else {
        map.locations().values().map(|m| m.motion_intensity()).sum::<f64>() / map.len() as f64
    };
    format!(
        "{} cells, {} components ({:.2} per cell), {} observations, mean motion intensity {:.4}",
        map.len(),
        comps,
        if map.is_empty() { 0.0 } else { comps as f64 / map.len() as f64 },
        obs,
        intensity
    )
}

pub fn build_mod(a: &BuildArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let trajs = read_generic(&a.input, cfg)?;
    if trajs.is_empty() {
        eprintln!("warning: no trajectories in input; the map will be empty");
    }
    create_dir(&a.out)?;
    let res = cfg.map.resolution;
    let outputs: Vec<String> = match a.kind {
        MapKind::Cliff => {
            let map = build_cliff_map(&trajs, res, &cfg.map.em).map_err(runtime)?;
            save_cliff_map(&map, &a.out.join(CLIFF_FILE)).map_err(runtime)?;
            println!("cliff: {}", fmt_stats(&map));
            vec![CLIFF_FILE.into()]
        }
        MapKind::TcCliff => {
            let iv = DayIntervals::with_offset(cfg.map.tc_interval, cfg.dataset.utc_offset)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let map = build_tc_cliff_map(&trajs, res, iv, &cfg.map.em).map_err(runtime)?;
            let m = save_tc_cliff_map(&map, &a.out).map_err(runtime)?;
            println!("tc_cliff: {} of {} intervals with data", map.interval_maps().len(), iv.count());
            for (idx, m) in map.interval_maps() {
                println!("  interval {idx:02}: {}", fmt_stats(m));
            }
            std::iter::once("manifest.json".to_string()).chain(m.intervals.into_values()).collect()
        }
        MapKind::Stef => {
            let map = build_stef_map(&trajs, res, &cfg.map.stef).map_err(runtime)?;
            save_stef_map(&map, &a.out).map_err(runtime)?;
            let bins = map.cells().values().flat_map(|c| c.bins()).count();
            let flat = map.cells().values().flat_map(|c| c.bins()).filter(|b| b.is_degenerate()).count();
            println!("stef: {} cells, {} bin models ({} mean-only)", map.len(), bins, flat);
            vec!["manifest.json".into(), "stef.csv".into()]
        }
    };
    let inputs: Vec<&Path> = a.input.iter().map(PathBuf::as_path).collect();
    let outputs: Vec<&str> = outputs.iter().map(String::as_str).collect();
    manifest::write(&a.out, &format!("build-mod {}", a.kind.name()), cfg, &inputs, &outputs)
}

pub const PREDICTIONS_FILE: &str = "predictions.csv";
const PREDICTIONS_HEADER: &str = "case_id,rank,rollout,log_fitness,stopped_at,step,t,x,y,speed,heading";

pub fn predict(a: &PredictArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let map = LoadedMap::load(&a.map)?;
    let trajs = read_generic(std::slice::from_ref(&a.input), cfg)?;
    let mut params = cfg.predictor.clone();
    if let Some(h) = a.horizon {
        if !(h > 0.0) {
            return Err(CliError::Config(format!("horizon must be positive, got {h}")));
        }
        params.t_p = (h / params.dt - 1e-9).ceil() as usize;
    }
    let bounds = map.bounds();
    create_dir(&a.out)?;
    let mut w = create(&a.out.join(PREDICTIONS_FILE))?;
    writeln!(w, "{PREDICTIONS_HEADER}").map_err(runtime)?;
    for (i, t) in trajs.iter().enumerate() {
        let last = t.samples().last().expect("trajectories are non-empty");
        if !bounds.contains(last.state.x(), last.state.y()) {
            eprintln!("warning: {} starts outside the map bounds", t.person_id());
        }
        let history: Vec<_> = t.states().copied().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(i as u64);
        let ranked = predict_ranked(&history, map.sampler(), &params, last.t, &mut rng).map_err(runtime)?;
        for (rank, r) in ranked.iter().enumerate() {
            let stopped = r.stopped_at.map(|s| s.to_string()).unwrap_or_default();
            for (step, s) in r.states.iter().enumerate() {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    t.person_id(),
                    rank + 1,
                    r.rollout,
                    r.log_fitness,
                    stopped,
                    step + 1,
                    last.t + (step + 1) as f64 * params.dt,
                    s.x(),
                    s.y(),
                    s.speed(),
                    s.heading()
                )
                .map_err(runtime)?;
            }
        }
    }
    w.flush().map_err(runtime)?;
    println!("predicted {} cases with {} rollouts each", trajs.len(), params.k);
    manifest::write(&a.out, "predict", cfg, &[&a.map, &a.input], &[PREDICTIONS_FILE])
}

pub const RESULTS_FILE: &str = "results.csv";
pub const CASES_FILE: &str = "cases.csv";
pub const PLOT_FILE: &str = "plot.csv";

enum MethodSpec {
    Cvm,
    Map(String, PathBuf, LoadedMap),
}

fn method_spec(s: &str) -> Result<MethodSpec, CliError> {
    if s == "cvm" {
        return Ok(MethodSpec::Cvm);
    }
    let (label, dir) = match s.split_once('=') {
        Some((l, d)) => (Some(l.to_string()), PathBuf::from(d)),
        None => (None, PathBuf::from(s)),
    };
    let map = LoadedMap::load(&dir)?;
    let label = label.unwrap_or_else(|| map.kind().name().to_string());
    Ok(MethodSpec::Map(label, dir, map))
}

pub fn evaluate(a: &EvaluateArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let specs = a.methods.iter().map(|m| method_spec(m)).collect::<Result<Vec<_>, _>>()?;
    let trajs = read_generic(&a.input, cfg)?;
    let mut params = cfg.predictor.clone();
    let opts = cfg.eval_options();
    let max_steps = (cfg.evaluation.max_horizon / params.dt - 1e-9).ceil() as usize;
    params.t_p = max_steps;
    let cases = cases_from_trajectories(&trajs, cfg.evaluation.observe_steps, max_steps);
    if cases.is_empty() {
        return Err(CliError::Runtime(format!(
            "no test trajectory is longer than {} samples",
            cfg.evaluation.observe_steps + 1
        )));
    }
    create_dir(&a.out)?;
    let mut results = create(&a.out.join(RESULTS_FILE))?;
    let mut log = create(&a.out.join(CASES_FILE))?;
    let mut plot = if a.plot { Some(create(&a.out.join(PLOT_FILE))?) } else { None };
    let mut inputs: Vec<&Path> = a.input.iter().map(PathBuf::as_path).collect();
    for (i, spec) in specs.iter().enumerate() {
        let (label, method) = match spec {
            MethodSpec::Cvm => ("cvm", Method::Cvm),
            MethodSpec::Map(label, dir, map) => {
                inputs.push(dir);
                (label.as_str(), Method::Mod(map.sampler()))
            }
        };
        let e = run_evaluation(&cases, method, &params, &opts).map_err(runtime)?;
        if let (Some(first), Some(last)) = (e.skipped.first(), e.skipped.last()) {
            let most = e.skipped.iter().map(|s| s.1).max().unwrap_or(0);
            eprintln!(
                "warning: {label}: up to {most} cases without a prediction at horizons {} to {} s",
                first.0, last.0
            );
        }
        write_results(&mut results, label, &a.dataset, &e, i == 0).map_err(runtime)?;
        write_case_log(&mut log, label, &a.dataset, &e, i == 0).map_err(runtime)?;
        if let Some(p) = plot.as_mut() {
            write_plot_data(p, label, &e, i == 0).map_err(runtime)?;
        }
        let last = e.rows.last();
        println!(
            "{label}: {} cases, ADE {:.3} FDE {:.3} at {} s, {:.3} ms per case",
            cases.len(),
            last.map_or(f64::NAN, |r| r.ade_mean),
            last.map_or(f64::NAN, |r| r.fde_mean),
            last.map_or(0.0, |r| r.horizon),
            e.mean_runtime_ms()
        );
    }
    for w in [&mut results, &mut log].into_iter().chain(plot.as_mut()) {
        w.flush().map_err(runtime)?;
    }
    let mut outputs = vec![RESULTS_FILE, CASES_FILE];
    if a.plot {
        outputs.push(PLOT_FILE);
    }
    manifest::write(&a.out, "evaluate", cfg, &inputs, &outputs)
}

pub const TRAJECTORIES_FILE: &str = "trajectories.csv";

fn write_trajectories(path: &Path, trajs: &[Trajectory]) -> Result<(), CliError> {
    let mut w = create(path)?;
    write_generic(&mut w, trajs).map_err(runtime)?;
    w.flush().map_err(runtime)
}

pub fn synth(a: &SynthArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let mut p = SynthParams {
        n_trajectories: a.count,
        utc_offset: cfg.dataset.utc_offset,
        ..SynthParams::default()
    };
    if let Some(t) = a.start_time {
        p.start_time = t;
    }
    if let Some(d) = a.days {
        p.days = d;
    }
    let trajs = generate_synthetic(a.scenario, &p, cfg.seed).map_err(|e| CliError::Config(e.to_string()))?;
    create_dir(&a.out)?;
    write_trajectories(&a.out.join(TRAJECTORIES_FILE), &trajs)?;
    println!("{} {} trajectories", trajs.len(), a.scenario.name());
    manifest::write(&a.out, &format!("synth {}", a.scenario.name()), cfg, &[], &[TRAJECTORIES_FILE])
}

fn parse_days(days: &[String]) -> Result<Vec<NaiveDate>, CliError> {
    days.iter()
        .map(|d| NaiveDate::parse_from_str(d.trim(), "%Y-%m-%d").map_err(|e| CliError::Config(format!("day `{d}`: {e}"))))
        .collect()
}

pub fn convert(a: &ConvertArgs, cfg: &RunConfig) -> Result<(), CliError> {
    let parsed = parse_files(&a.input, &cfg.dataset, cfg.exec()).map_err(|e| CliError::Parse(e.to_string()))?;
    println!("read {} rows, {} people, {} rows skipped", parsed.rows, parsed.trajectories.len(), parsed.skipped);
    let mut trajs = parsed.trajectories;
    let mut inputs: Vec<&Path> = a.input.iter().map(PathBuf::as_path).collect();
    if let Some(path) = &cfg.dataset.regions {
        let regions = Regions::load(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
        let (kept, r) = filter_edinburgh(&trajs, &regions, cfg.dataset.min_points).map_err(|e| CliError::Config(e.to_string()))?;
        println!(
            "filter: {} in, {} outside marginal area, {} too short, {} lift to lift, {} kept",
            r.input,
            r.outside_marginal,
            r.too_short,
            r.lift_to_lift,
            r.kept()
        );
        trajs = kept;
        inputs.push(path);
    }
    let (trajs, report) = resample_all(&trajs, cfg.dataset.target_rate).map_err(runtime)?;
    if !report.dropped.is_empty() {
        eprintln!("warning: {} trajectories too short to resample", report.dropped.len());
    }
    create_dir(&a.out)?;
    let outputs = if a.train_days.is_empty() {
        write_trajectories(&a.out.join(TRAJECTORIES_FILE), &trajs)?;
        println!("wrote {} trajectories", trajs.len());
        vec![TRAJECTORIES_FILE]
    } else {
        let train = parse_days(&a.train_days)?;
        let test = a.test_days.as_deref().map(parse_days).transpose()?;
        let split = split_by_day(&trajs, &train, test.as_deref(), cfg.dataset.utc_offset);
        for w in &split.warnings {
            eprintln!("warning: {w}");
        }
        write_trajectories(&a.out.join("train.csv"), &split.train)?;
        write_trajectories(&a.out.join("test.csv"), &split.test)?;
        println!(
            "wrote {} train, {} test, {} unassigned trajectories",
            split.train.len(),
            split.test.len(),
            split.unassigned
        );
        vec!["train.csv", "test.csv"]
    };
    manifest::write(&a.out, "convert", cfg, &inputs, &outputs)
}

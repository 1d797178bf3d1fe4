use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

// 2024-01-01 09:00 UTC
const NINE_AM: f64 = 1_704_099_600.0;

fn dynmap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynmap"))
        .args(args)
        .env_remove("DYNMAP_WORKERS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = dynmap(args);
    assert!(
        out.status.success(),
        "dynmap {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, name: &str, scenario: &str, n: usize, seed: u64, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let seed = seed.to_string();
    let n = n.to_string();
    let mut args = vec!["--seed", &seed, "synth", "--scenario", scenario, "-n", &n, "-o", p(&out)];
    args.extend_from_slice(extra);
    ok(&args);
    out.join("trajectories.csv")
}

/// First `n` rows of every person in a generic CSV.
fn heads(src: &Path, dst: &Path, n: usize) {
    let text = fs::read_to_string(src).unwrap();
    let mut lines = text.lines();
    let mut out = vec![lines.next().unwrap().to_string()];
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for l in lines {
        let id = l.split(',').nth(1).unwrap().to_string();
        let c = seen.entry(id).or_default();
        if *c < n {
            out.push(l.to_string());
        }
        *c += 1;
    }
    fs::write(dst, out.join("\n") + "\n").unwrap();
}

fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn corridor_cliff_map_covers_the_corridor() {
    let d = tempfile::tempdir().unwrap();
    let train = synth(d.path(), "train", "corridor", 100, 1, &[]);
    let map = d.path().join("map");
    let stdout = ok(&["build-mod", "--kind", "cliff", "-i", p(&train), "-o", p(&map)]);

    // oracle: cells holding at least min_observations samples
    let mut counts: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for r in rows(&train) {
        let (x, y): (f64, f64) = (r[2].parse().unwrap(), r[3].parse().unwrap());
        *counts.entry((x.round() as i64, y.round() as i64)).or_default() += 1;
    }
    let expected: BTreeSet<(i64, i64)> = counts.into_iter().filter(|c| c.1 >= 10).map(|c| c.0).collect();
    // at most 41 columns along x and three rows across a 3 m lane
    assert!(expected.iter().all(|&(x, y)| (0..=40).contains(&x) && (-1..=1).contains(&y)));
    assert!(expected.len() > 100, "{}", expected.len());

    let text = fs::read_to_string(map.join("cliff.csv")).unwrap();
    let got: BTreeSet<(i64, i64)> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('x'))
        .map(|l| {
            let mut f = l.split(',').map(|v| v.parse::<f64>().unwrap().round() as i64);
            (f.next().unwrap(), f.next().unwrap())
        })
        .collect();
    assert_eq!(got, expected);
    assert!(stdout.contains(&format!("{} cells", expected.len())), "{stdout}");
}

#[test]
fn tc_cliff_writes_one_file_per_interval_with_data() {
    let d = tempfile::tempdir().unwrap();
    let start = NINE_AM.to_string();
    // 500 people, 10 s apart: 09:00 to about 10:23
    let train = synth(d.path(), "train", "corridor", 500, 2, &["--start-time", &start]);
    let map = d.path().join("tc");
    ok(&["build-mod", "--kind", "tc-cliff", "--interval", "3600", "-i", p(&train), "-o", p(&map)]);
    let mut files: Vec<String> = fs::read_dir(&map)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("interval_"))
        .collect();
    files.sort();
    assert_eq!(files, vec!["interval_09.csv", "interval_10.csv"]);
}

#[test]
fn stef_on_empty_input_warns_and_succeeds() {
    let d = tempfile::tempdir().unwrap();
    let empty = d.path().join("empty.csv");
    fs::write(&empty, "timestamp_s,person_id,x_m,y_m\n").unwrap();
    let out = dynmap(&["build-mod", "--kind", "stef", "-i", p(&empty), "-o", p(&d.path().join("stef"))]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 cells"));
    assert_eq!(rows(&d.path().join("stef/stef.csv")).len(), 0);
}

#[test]
fn predictions_are_ranked_bounded_and_reproducible() {
    let d = tempfile::tempdir().unwrap();
    let train = synth(d.path(), "train", "bend", 150, 3, &[]);
    let test = synth(d.path(), "test", "bend", 10, 4, &[]);
    let obs = d.path().join("obs.csv");
    heads(&test, &obs, 4);
    let map = d.path().join("map");
    ok(&["build-mod", "--kind", "cliff", "-i", p(&train), "-o", p(&map)]);

    let run = |name: &str| {
        let out = d.path().join(name);
        ok(&["--seed", "7", "predict", "--map", p(&map), "-i", p(&obs), "-o", p(&out), "--horizon", "60"]);
        out.join("predictions.csv")
    };
    let (a, b) = (run("p1"), run("p2"));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let mut by_case: BTreeMap<String, BTreeMap<usize, (f64, usize)>> = BTreeMap::new();
    for r in rows(&a) {
        let e = by_case.entry(r[0].clone()).or_default().entry(r[1].parse().unwrap()).or_insert((r[3].parse().unwrap(), 0));
        e.1 = e.1.max(r[5].parse().unwrap());
    }
    assert_eq!(by_case.len(), 10);
    for ranks in by_case.values() {
        assert_eq!(ranks.keys().copied().collect::<Vec<_>>(), vec![1, 2, 3, 4, 5]);
        let fit: Vec<f64> = ranks.values().map(|v| v.0).collect();
        assert!(fit.windows(2).all(|w| w[0] >= w[1]), "{fit:?}");
        assert!(ranks.values().all(|v| v.1 <= 60));
    }
}

#[test]
fn evaluate_four_methods_over_twenty_horizons() {
    let d = tempfile::tempdir().unwrap();
    let train = synth(d.path(), "train", "corridor", 150, 5, &[]);
    let test = synth(d.path(), "test", "corridor", 20, 6, &[]);
    for kind in ["cliff", "tc-cliff", "stef"] {
        ok(&["build-mod", "--kind", kind, "--interval", "86400", "-i", p(&train), "-o", p(&d.path().join(kind))]);
    }
    let out = d.path().join("eval");
    let (c, t, s) = (d.path().join("cliff"), d.path().join("tc-cliff"), d.path().join("stef"));
    ok(&[
        "--profile", "edinburgh", "evaluate", "-m", p(&t), "-m", p(&c), "-m", p(&s), "-m", "cvm", "-i", p(&test), "-o",
        p(&out), "--plot", "--dataset", "corridor",
    ]);
    let results = rows(&out.join("results.csv"));
    let mut per_method: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for r in &results {
        per_method.entry(r[0].clone()).or_default().push(r[2].parse().unwrap());
        let runtime: f64 = r[8].parse().unwrap();
        assert!(runtime > 0.0 || r[0] == "cvm" && runtime >= 0.0);
        assert_eq!(r[8].split('.').nth(1).unwrap().len(), 3);
    }
    let expected: Vec<f64> = (1..=20).map(f64::from).collect();
    assert_eq!(per_method.keys().cloned().collect::<Vec<_>>(), vec!["cliff", "cvm", "stef", "tc_cliff"]);
    assert!(per_method.values().all(|h| *h == expected));
    assert_eq!(rows(&out.join("plot.csv")).len(), 80);
    assert!(out.join("cases.csv").is_file());
}

#[test]
fn manifest_reproduces_outputs() {
    let d = tempfile::tempdir().unwrap();
    let train = synth(d.path(), "train", "bimodal", 120, 8, &[]);
    let a = d.path().join("a");
    ok(&["--seed", "11", "--set", "map.em.max_components=3", "build-mod", "--kind", "cliff", "-i", p(&train), "-o", p(&a)]);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(a.join("run.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 11);
    assert_eq!(manifest["config"]["map"]["em"]["max_components"], 3);
    let hash = manifest["inputs"][p(&train)].as_str().unwrap();
    assert_eq!(hash.len(), 64);

    let b = d.path().join("b");
    let cfg = a.join("run.json");
    ok(&["--config", p(&cfg), "build-mod", "--kind", "cliff", "-i", p(&train), "-o", p(&b)]);
    assert_eq!(fs::read(a.join("cliff.csv")).unwrap(), fs::read(b.join("cliff.csv")).unwrap());
    assert_eq!(fs::read(a.join("run.json")).unwrap().len(), fs::read(b.join("run.json")).unwrap().len());
}

#[test]
fn worker_count_does_not_change_results() {
    let d = tempfile::tempdir().unwrap();
    let train = synth(d.path(), "train", "bend", 100, 9, &[]);
    let test = synth(d.path(), "test", "bend", 15, 10, &[]);
    let mut outputs = Vec::new();
    for workers in ["1", "4"] {
        let map = d.path().join(format!("map{workers}"));
        let out = d.path().join(format!("eval{workers}"));
        let run = |args: &[&str]| {
            let o = Command::new(env!("CARGO_BIN_EXE_dynmap")).args(args).env("DYNMAP_WORKERS", workers).output().unwrap();
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        };
        run(&["build-mod", "--kind", "cliff", "-i", p(&train), "-o", p(&map)]);
        run(&["--set", "evaluation.max_horizon=20", "evaluate", "-m", p(&map), "-i", p(&test), "-o", p(&out)]);
        let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
        assert_eq!(manifest["config"]["workers"], workers.parse::<u64>().unwrap());
        outputs.push((fs::read(map.join("cliff.csv")).unwrap(), fs::read(out.join("cases.csv")).unwrap()));
    }
    assert!(outputs[0] == outputs[1]);
}

#[test]
fn exit_codes_by_error_kind() {
    let d = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| dynmap(args).status.code().unwrap();

    assert_eq!(code(&["--set", "predictor.beta=-1", "synth", "--scenario", "bend", "-o", p(d.path())]), 2);
    assert_eq!(code(&["--set", "no_such_key=1", "synth", "--scenario", "bend", "-o", p(d.path())]), 2);
    assert_eq!(code(&["synth", "--scenario", "spiral", "-o", p(d.path())]), 2);

    let bad = d.path().join("bad.csv");
    fs::write(&bad, "not,a,valid\nfile").unwrap();
    assert_eq!(code(&["build-mod", "--kind", "cliff", "-i", p(&bad), "-o", p(&d.path().join("m"))]), 3);
    assert_eq!(code(&["predict", "--map", p(d.path()), "-i", p(&bad), "-o", p(&d.path().join("p"))]), 3);

    // every test trajectory is too short to form a case
    let train = synth(d.path(), "train", "corridor", 30, 1, &[]);
    let short = d.path().join("short.csv");
    heads(&train, &short, 3);
    assert_eq!(code(&["evaluate", "-m", "cvm", "-i", p(&short), "-o", p(&d.path().join("e"))]), 4);
}

#[test]
fn convert_atc_and_split_by_day() {
    let d = tempfile::tempdir().unwrap();
    let raw = d.path().join("atc.csv");
    let mut text = String::new();
    // two people on consecutive local days, 10 Hz, 1.2 m/s east
    for (pid, t0) in [(7, 1_351_033_200.0), (8, 1_351_033_200.0 + 86_400.0)] {
        for i in 0..100 {
            let t = t0 + i as f64 * 0.1;
            text += &format!("{t:.3},{pid},{},{},1000,1200,0.0,0.0\n", i * 120, 500);
        }
    }
    fs::write(&raw, text).unwrap();
    let out = d.path().join("conv");
    ok(&[
        "--profile", "atc", "convert", "-i", p(&raw), "-o", p(&out), "--train-days", "2012-10-24", "--test-days", "2012-10-25",
    ]);
    let (train, test) = (rows(&out.join("train.csv")), rows(&out.join("test.csv")));
    assert!(train.iter().all(|r| r[1] == "7") && test.iter().all(|r| r[1] == "8"));
    // 9.9 s resampled at 1 Hz
    assert_eq!(train.len(), 10);
    let x: Vec<f64> = train.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!((x[1] - x[0] - 1.2).abs() < 1e-9);
    assert_eq!(train[0][3].parse::<f64>().unwrap(), 0.5);
}

#[test]
fn convert_edinburgh_with_regions() {
    let d = tempfile::tempdir().unwrap();
    let regions = d.path().join("regions.txt");
    fs::write(&regions, "marginal: -1 -1, 2 -1, 2 41, -1 41\nlift: 30 -1, 41 -1, 41 41, 30 41\n").unwrap();
    let track = |id: &str, x0: f64, x1: f64, n: usize| {
        let pts: Vec<String> = (0..n)
            .map(|i| format!("{} 5 {}", x0 + (x1 - x0) * i as f64 / (n - 1) as f64, i))
            .collect();
        format!("TRACK.{id}=[[{}]];\n", pts.join("];["))
    };
    let raw = d.path().join("tracks.txt");
    // starts and ends in the marginal band; too short; ends outside the band
    fs::write(&raw, track("1", 0.0, 0.5, 40) + &track("2", 0.0, 0.5, 10) + &track("3", 0.0, 20.0, 40)).unwrap();
    let out = d.path().join("conv");
    let stdout = ok(&[
        "--profile", "edinburgh", "--set", "dataset.time_scale=1", "convert", "-i", p(&raw), "-o", p(&out), "--regions",
        p(&regions),
    ]);
    assert!(stdout.contains("1 kept"), "{stdout}");
    let ids: BTreeSet<String> = rows(&out.join("trajectories.csv")).into_iter().map(|r| r[1].clone()).collect();
    assert_eq!(ids, BTreeSet::from(["1".to_string()]));
}

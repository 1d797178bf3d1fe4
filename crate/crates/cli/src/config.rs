use std::path::Path;

use clap::ValueEnum;
use dynmap::cliff::EmConfig;
use dynmap::evaluation::{EvalOptions, Ranking, Selection};
use dynmap::ingest::DatasetConfig;
use dynmap::predictor::PredictorParams;
use dynmap::stef::StefConfig;
use dynmap::Exec;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Atc,
    Edinburgh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MapConfig {
    /// Cell size, metres.
    pub resolution: f64,
    /// Time-of-day interval for tc_cliff, seconds.
    pub tc_interval: f64,
    pub em: EmConfig,
    pub stef: StefConfig,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            resolution: 1.0,
            tc_interval: 3600.0,
            em: EmConfig::default(),
            stef: StefConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Observed steps before the prediction start (`O_p`).
    pub observe_steps: usize,
    /// Largest horizon, seconds; horizons run from `step` to here.
    pub max_horizon: f64,
    pub horizon_step: f64,
    pub selection: Selection,
    pub ranking: Ranking,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            observe_steps: 3,
            max_horizon: 60.0,
            horizon_step: 1.0,
            selection: Selection::MostLikely,
            ranking: Ranking::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub profile: Option<Profile>,
    /// Master seed. Overrides `map.em.seed` and every evaluation seed.
    pub seed: u64,
    pub workers: Option<usize>,
    pub dataset: DatasetConfig,
    pub map: MapConfig,
    pub predictor: PredictorParams,
    pub evaluation: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            profile: None,
            seed: 0,
            workers: None,
            dataset: DatasetConfig::default(),
            map: MapConfig::default(),
            predictor: PredictorParams::default(),
            evaluation: EvalConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn for_profile(profile: Option<Profile>) -> Self {
        let mut c = Self {
            profile,
            ..Self::default()
        };
        match profile {
            Some(Profile::Atc) => {
                c.dataset = DatasetConfig::atc();
                c.predictor.t_p = 60;
                c.evaluation.max_horizon = 60.0;
            }
            Some(Profile::Edinburgh) => {
                c.dataset = DatasetConfig::edinburgh();
                c.predictor.t_p = 20;
                c.evaluation.max_horizon = 20.0;
            }
            None => {}
        }
        c
    }

    pub fn exec(&self) -> Exec {
        match self.workers {
            Some(1) => Exec::Sequential,
            _ => Exec::default(),
        }
    }

    /// Pushes the master seed and execution mode into the component configs.
    pub fn finish(mut self) -> Result<Self, CliError> {
        let exec = self.exec();
        self.map.em.seed = self.seed;
        self.map.em.exec = exec;
        self.map.stef.exec = exec;
        self.predictor.exec = exec;
        let bad = |e: dynmap::Error| CliError::Config(e.to_string());
        self.dataset.validate().map_err(bad)?;
        self.map.em.validate().map_err(bad)?;
        self.map.stef.validate().map_err(bad)?;
        self.predictor.validate().map_err(bad)?;
        if !(self.map.resolution > 0.0 && self.map.resolution.is_finite()) {
            return Err(CliError::Config("map.resolution must be positive".into()));
        }
        let e = &self.evaluation;
        if !(e.horizon_step > 0.0 && e.max_horizon >= e.horizon_step) {
            return Err(CliError::Config("evaluation horizons need 0 < horizon_step <= max_horizon".into()));
        }
        if self.workers == Some(0) {
            return Err(CliError::Config("workers must be at least 1".into()));
        }
        Ok(self)
    }

    pub fn eval_options(&self) -> EvalOptions {
        let e = &self.evaluation;
        let n = (e.max_horizon / e.horizon_step + 1e-9).floor() as usize;
        EvalOptions {
            horizons: (1..=n).map(|i| i as f64 * e.horizon_step).collect(),
            selection: e.selection,
            ranking: e.ranking,
            seed: self.seed,
        }
    }
}

/// Reads a TOML or JSON config. A `run.json` written by any command is
/// accepted too: its `config` member is used.
pub fn read_file(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    let v: Value = if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
    };
    match v {
        Value::Object(mut m) if m.contains_key("command") && m.contains_key("config") => Ok(m.remove("config").unwrap()),
        v => Ok(v),
    }
}

/// Recursively overlays `top` onto `base`.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

/// Applies `a.b.c=value`. The value is read as JSON when it parses, else as
/// a string.
pub fn set_path(root: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{assignment}`")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = root;
    for key in path.split('.') {
        if !slot.is_object() {
            *slot = Value::Object(Default::default());
        }
        slot = slot.as_object_mut().unwrap().entry(key).or_insert(Value::Null);
    }
    *slot = value;
    Ok(())
}

/// Defaults, then profile, then file, then `--set` assignments, then the
/// explicit flag overrides in `flags`.
pub fn resolve(
    profile_flag: Option<Profile>,
    file: Option<&Path>,
    sets: &[String],
    flags: Value,
) -> Result<RunConfig, CliError> {
    let file_value = file.map(read_file).transpose()?;
    let file_profile = file_value
        .as_ref()
        .and_then(|v| v.get("profile"))
        .filter(|p| !p.is_null())
        .map(|p| serde_json::from_value::<Profile>(p.clone()))
        .transpose()
        .map_err(|e| CliError::Config(format!("profile: {e}")))?;
    let profile = profile_flag.or(file_profile);
    let mut v = serde_json::to_value(RunConfig::for_profile(profile)).expect("config serialises");
    if let Some(f) = file_value {
        merge(&mut v, f);
    }
    if let Some(p) = profile_flag {
        v["profile"] = serde_json::to_value(p).unwrap();
    }
    for s in sets {
        set_path(&mut v, s)?;
    }
    merge(&mut v, flags);
    let cfg: RunConfig = serde_json::from_value(v).map_err(|e| CliError::Config(e.to_string()))?;
    cfg.finish()
}

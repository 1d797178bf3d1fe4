//! `dynmap` command-line interface.

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dynmap::ingest::{DatasetFormat, Scenario};
use serde_json::{json, Value};

mod commands;
mod config;
mod manifest;
mod maps;

use config::Profile;

#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments. Exit code 2.
    Config(String),
    /// Unreadable or malformed input. Exit code 3.
    Parse(String),
    /// Failure while computing or writing results. Exit code 4.
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Parse(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Parse(m) => write!(f, "parse error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

/// Learn maps of dynamics from trajectory logs and predict with them.
#[derive(Debug, Parser)]
#[command(name = "dynmap", version)]
struct Cli {
    /// TOML or JSON config file; a `run.json` from an earlier run also works.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Parameter profile applied before the config file.
    #[arg(long, global = true, value_enum)]
    profile: Option<Profile>,
    /// Master random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true, env = "DYNMAP_WORKERS")]
    workers: Option<usize>,
    /// Override any config value, e.g. `--set predictor.beta=0.5`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MapKind {
    Cliff,
    TcCliff,
    Stef,
}

impl MapKind {
    pub fn name(self) -> &'static str {
        match self {
            MapKind::Cliff => "cliff",
            MapKind::TcCliff => "tc_cliff",
            MapKind::Stef => "stef",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Atc,
    Edinburgh,
    Generic,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a CLiFF, time-conditioned CLiFF or STeF map from generic CSV.
    BuildMod(BuildArgs),
    /// Ranked predictions for every trajectory of an observation file.
    Predict(PredictArgs),
    /// ADE/FDE of one or more methods over a horizon sweep.
    Evaluate(EvaluateArgs),
    /// Write a synthetic scenario as generic CSV.
    Synth(SynthArgs),
    /// Convert dataset files to resampled generic CSV.
    Convert(ConvertArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    #[arg(long, value_enum)]
    pub kind: MapKind,
    /// Generic CSV training files.
    #[arg(long, short, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Cell size, metres.
    #[arg(long)]
    resolution: Option<f64>,
    /// Interval length for tc_cliff, seconds.
    #[arg(long)]
    interval: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Map directory written by build-mod.
    #[arg(long)]
    pub map: PathBuf,
    /// Generic CSV; each trajectory is one observed history.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Prediction horizon, seconds; defaults to `predictor.t_p` steps.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Rollouts per case.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// `cvm`, or `[label=]DIR` for a map directory. Repeatable.
    #[arg(long = "method", short, required = true)]
    pub methods: Vec<String>,
    /// Generic CSV test trajectories.
    #[arg(long, short, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Dataset label written to the results table.
    #[arg(long, default_value = "dataset")]
    pub dataset: String,
    /// Largest horizon, seconds.
    #[arg(long)]
    horizon: Option<f64>,
    /// Also write per-horizon mean and std for plotting.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// corridor, bend, bimodal or time_varying.
    #[arg(long)]
    pub scenario: Scenario,
    #[arg(long, short = 'n', default_value_t = 100)]
    pub count: usize,
    #[arg(long, short)]
    pub out: PathBuf,
    /// Epoch seconds of the first trajectory.
    #[arg(long)]
    pub start_time: Option<f64>,
    /// Days spanned by time_varying.
    #[arg(long)]
    pub days: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long, short, required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    #[arg(long, short)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Region polygons; enables the Edinburgh filter.
    #[arg(long)]
    regions: Option<PathBuf>,
    /// Local days (YYYY-MM-DD) for train.csv; others go to test.csv.
    #[arg(long, value_delimiter = ',')]
    pub train_days: Vec<String>,
    /// Restrict test.csv to these days.
    #[arg(long, value_delimiter = ',')]
    pub test_days: Option<Vec<String>>,
}

fn flag_overrides(cli: &Cli) -> Value {
    let mut v = json!({});
    if let Some(s) = cli.seed {
        v["seed"] = json!(s);
    }
    if let Some(w) = cli.workers {
        v["workers"] = json!(w);
    }
    match &cli.command {
        Command::BuildMod(a) => {
            if let Some(r) = a.resolution {
                v["map"]["resolution"] = json!(r);
            }
            if let Some(i) = a.interval {
                v["map"]["tc_interval"] = json!(i);
            }
        }
        Command::Predict(a) => {
            if let Some(k) = a.k {
                v["predictor"]["k"] = json!(k);
            }
            if let Some(b) = a.beta {
                v["predictor"]["beta"] = json!(b);
            }
        }
        Command::Evaluate(a) => {
            if let Some(h) = a.horizon {
                v["evaluation"]["max_horizon"] = json!(h);
            }
        }
        Command::Convert(a) => {
            if let Some(f) = a.format {
                let f = match f {
                    FormatArg::Atc => DatasetFormat::Atc,
                    FormatArg::Edinburgh => DatasetFormat::Edinburgh,
                    FormatArg::Generic => DatasetFormat::GenericCsv,
                };
                v["dataset"]["format"] = serde_json::to_value(f).unwrap();
            }
            if let Some(r) = &a.regions {
                v["dataset"]["regions"] = json!(r);
            }
        }
        Command::Synth(_) => {}
    }
    v
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = config::resolve(cli.profile, cli.config.as_deref(), &cli.sets, flag_overrides(&cli))?;
    if let Some(n) = cfg.workers.filter(|&n| n > 1) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match &cli.command {
        Command::BuildMod(a) => commands::build_mod(a, &cfg),
        Command::Predict(a) => commands::predict(a, &cfg),
        Command::Evaluate(a) => commands::evaluate(a, &cfg),
        Command::Synth(a) => commands::synth(a, &cfg),
        Command::Convert(a) => commands::convert(a, &cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dynmap: {e}");
            ExitCode::from(e.code())
        }
    }
}

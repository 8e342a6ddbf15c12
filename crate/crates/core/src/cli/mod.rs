//! Command-line front end: argument parsing, config resolution, run
//! manifests, and atomic output.
//!
//! Settings resolve as flags > config file > built-in defaults. The config
//! file is TOML with optional top-level `seed` and `workers` plus one table
//! per subcommand (`[fit-lsm]`, `[fit-influence]`, `[simulate]`, `[study]`,
//! `[s50]`) holding that subcommand's resolved-config fields.

pub mod s50;

use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::influence::{
    fit_influence, model_panel, InfluenceError, InfluenceModel, InfluenceSpec, LatentPositions,
};
use crate::io::{load_study, parse_adjacency, parse_attribute_panel, IoError, StudyPaths};
use crate::lsm::{mcmc_sample, DyadicCovariate, LsmError, LsmFitSummary, LsmSpec, McmcControl};
use crate::sim::{simulate_panel, SimConfig, SimError};
use crate::study::{run_study, StudyConfig, StudyError, StudyReport};

use s50::S50Config;

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable or malformed input, or an invalid setting (exit 1).
    #[error("{0}")]
    Input(String),
    /// Estimation failed on valid input (exit 2).
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<LsmError> for CliError {
    fn from(e: LsmError) -> Self {
        match e {
            LsmError::DimensionMismatch(_) | LsmError::InvalidControl(_) => {
                CliError::Input(e.to_string())
            }
            LsmError::NonFiniteLikelihood | LsmError::NoDraws => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<InfluenceError> for CliError {
    fn from(e: InfluenceError) -> Self {
        match e {
            InfluenceError::RankDeficient(_) | InfluenceError::ZeroVariance(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<StudyError> for CliError {
    fn from(e: StudyError) -> Self {
        match e {
            StudyError::InvalidConfig(_) => CliError::Input(e.to_string()),
            StudyError::AllFailed(_) => CliError::Numerical(e.to_string()),
            StudyError::Sim(e) => e.into(),
            StudyError::Lsm(e) => e.into(),
            StudyError::Influence(e) => e.into(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "latent-influence",
    version,
    about = "Latent-space adjusted estimation of social influence in longitudinal networks"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Base seed for all randomness.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for outputs and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// TOML config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a latent-distance model to one network.
    FitLsm(FitLsmArgs),
    /// Fit the naive or latent-adjusted influence regression.
    FitInfluence(FitInfluenceArgs),
    /// Simulate a confounded network/behavior panel.
    Simulate(SimulateArgs),
    /// Monte Carlo comparison of naive and adjusted estimators.
    Study(StudyArgs),
    /// End-to-end analysis of the 50-pupil three-wave cohort files.
    S50(S50Args),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::FitLsm(_) => "fit-lsm",
            Command::FitInfluence(_) => "fit-influence",
            Command::Simulate(_) => "simulate",
            Command::Study(_) => "study",
            Command::S50(_) => "s50",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct McmcArgs {
    /// Latent space dimension.
    #[arg(long = "d", visible_alias = "dim")]
    pub dim: Option<usize>,
    #[arg(long)]
    pub sample_size: Option<usize>,
    #[arg(long)]
    pub burnin: Option<usize>,
    #[arg(long)]
    pub interval: Option<usize>,
    /// Position proposal scale (divided by sqrt(n) per coordinate).
    #[arg(long)]
    pub pos_step: Option<f64>,
    #[arg(long)]
    pub coef_step: Option<f64>,
}

impl McmcArgs {
    fn apply(&self, dim: &mut usize, c: &mut McmcControl) {
        if let Some(v) = self.dim {
            *dim = v;
        }
        if let Some(v) = self.sample_size {
            c.sample_size = v;
        }
        if let Some(v) = self.burnin {
            c.burnin = v;
        }
        if let Some(v) = self.interval {
            c.interval = v;
        }
        if let Some(v) = self.pos_step {
            c.pos_step = v;
        }
        if let Some(v) = self.coef_step {
            c.coef_step = v;
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub waves: Option<usize>,
    #[arg(long)]
    pub trait_sd: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sel_alpha: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sel_homophily_obs: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub sel_homophily_latent: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub b2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub bx: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub bc: Option<f64>,
    #[arg(long)]
    pub noise_sd: Option<f64>,
}

impl SimArgs {
    fn apply(&self, c: &mut SimConfig) {
        let pairs = [
            (self.trait_sd, &mut c.trait_sd),
            (self.sel_alpha, &mut c.sel_alpha),
            (self.sel_homophily_obs, &mut c.sel_homophily_obs),
            (self.sel_homophily_latent, &mut c.sel_homophily_latent),
            (self.b0, &mut c.beh_b0),
            (self.b1, &mut c.beh_b1),
            (self.b2, &mut c.beh_b2),
            (self.bx, &mut c.beh_bx),
            (self.bc, &mut c.beh_bc),
            (self.noise_sd, &mut c.noise_sd),
        ];
        for (flag, field) in pairs {
            if let Some(v) = flag {
                *field = v;
            }
        }
        if let Some(v) = self.n {
            c.n = v;
        }
        if let Some(v) = self.waves {
            c.waves = v;
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct FitLsmArgs {
    /// Adjacency matrix file.
    #[arg(long)]
    pub adj: PathBuf,
    /// Wave label recorded in the fit.
    #[arg(long, default_value_t = 1)]
    pub wave: usize,
    /// Absolute-difference covariates as `label=path:column` (1-based column).
    #[arg(long, value_delimiter = ',')]
    pub attrs: Vec<String>,
    #[command(flatten)]
    pub mcmc: McmcArgs,
    /// Also write every retained draw as CSV.
    #[arg(long)]
    pub draws_csv: bool,
}

#[derive(Debug, Clone, Args)]
pub struct FitInfluenceArgs {
    /// Adjacency files in wave order.
    #[arg(long, num_args = 1.., required = true)]
    pub adj: Vec<PathBuf>,
    /// Attribute panels as `name=path`.
    #[arg(long = "attr", value_delimiter = ',')]
    pub attrs: Vec<String>,
    #[arg(long)]
    pub outcome: Option<String>,
    /// Concurrent covariates, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// Name of the lagged-outcome column (default `lag_<outcome>`).
    #[arg(long)]
    pub lag_label: Option<String>,
    /// Latent-space fit JSON files, one per non-final wave.
    #[arg(long, num_args = 1..)]
    pub adjust: Vec<PathBuf>,
    /// Also write the stacked regression panel as CSV.
    #[arg(long)]
    pub panel_csv: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub sim: SimArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StudyArgs {
    #[arg(long)]
    pub reps: Option<usize>,
    /// Attributes entering the latent-space model, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub lsm_covariates: Option<Vec<String>>,
    #[command(flatten)]
    pub sim: SimArgs,
    #[command(flatten)]
    pub mcmc: McmcArgs,
}

#[derive(Debug, Clone, Args)]
pub struct S50Args {
    /// Directory holding `<prefix>-network{1,2,3}.dat` and the attribute files.
    #[arg(long, default_value = ".")]
    pub data_dir: PathBuf,
    #[arg(long, default_value = "s50")]
    pub prefix: String,
    #[command(flatten)]
    pub mcmc: McmcArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitLsmConfig {
    pub dim: usize,
    pub mcmc: McmcControl,
}

impl Default for FitLsmConfig {
    fn default() -> Self {
        Self {
            dim: 1,
            mcmc: McmcControl::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitInfluenceConfig {
    pub outcome: Option<String>,
    pub covariates: Vec<String>,
    pub lag_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub workers: Option<usize>,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub version: String,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn file_name(subcommand: &str) -> String {
        format!("{subcommand}-manifest.json")
    }
}

pub fn digest_file(path: &Path) -> Result<InputDigest, CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    Ok(InputDigest {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

/// Writes `contents` to `dir/name` through a temporary file in `dir`.
pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> Result<(), CliError> {
    let fail = |e: std::io::Error| CliError::Input(format!("cannot write {name}: {e}"));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(fail)?;
    tmp.write_all(contents).map_err(fail)?;
    tmp.as_file().sync_all().map_err(fail)?;
    tmp.persist(dir.join(name)).map_err(|e| fail(e.error))?;
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output types serialize") + "\n"
}

/// Everything a finished command hands back for writing.
struct RunOutput {
    config: serde_json::Value,
    inputs: Vec<PathBuf>,
    files: Vec<(String, String)>,
    stdout: String,
}

/// Parsed config file.
#[derive(Debug, Default)]
struct ConfigFile {
    seed: Option<u64>,
    workers: Option<usize>,
    sections: toml::Table,
}

const SECTIONS: [&str; 5] = ["fit-lsm", "fit-influence", "simulate", "study", "s50"];

fn read_config(path: Option<&Path>) -> Result<ConfigFile, CliError> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let mut table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut file = ConfigFile::default();
    let non_negative = |key: &str, v: toml::Value| -> Result<u64, CliError> {
        v.as_integer()
            .and_then(|i| u64::try_from(i).ok())
            .ok_or_else(|| CliError::Input(format!("config {key} must be a non-negative integer")))
    };
    if let Some(v) = table.remove("seed") {
        file.seed = Some(non_negative("seed", v)?);
    }
    if let Some(v) = table.remove("workers") {
        file.workers = Some(non_negative("workers", v)? as usize);
    }
    for (key, value) in table {
        if !SECTIONS.contains(&key.as_str()) || !value.is_table() {
            return Err(CliError::Input(format!("unknown config entry {key:?}")));
        }
        file.sections.insert(key, value);
    }
    Ok(file)
}

fn merge(base: &mut toml::Value, overlay: &toml::Value) {
    match (base, overlay) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(existing) => merge(existing, v),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

/// Keys in `given` that are absent from `known`, as dotted paths.
fn unknown_keys(given: &toml::Value, known: &toml::Value, prefix: &str, out: &mut Vec<String>) {
    if let (toml::Value::Table(g), toml::Value::Table(k)) = (given, known) {
        for (key, value) in g {
            let path = format!("{prefix}{key}");
            match k.get(key) {
                Some(inner) => unknown_keys(value, inner, &format!("{path}."), out),
                None => out.push(path),
            }
        }
    }
}

/// Defaults overlaid with the config file's section for this subcommand.
fn resolve<T: Serialize + DeserializeOwned>(
    defaults: &T,
    file: &ConfigFile,
    section: &str,
) -> Result<T, CliError> {
    let Some(overlay) = file.sections.get(section) else {
        return Ok(
            serde_json::from_value(serde_json::to_value(defaults).expect("serializes"))
                .expect("round trip"),
        );
    };
    let mut value = toml::Value::try_from(defaults).expect("defaults serialize to TOML");
    let mut unknown = Vec::new();
    unknown_keys(overlay, &value, &format!("{section}."), &mut unknown);
    if !unknown.is_empty() {
        return Err(CliError::Input(format!(
            "unknown config keys: {}",
            unknown.join(", ")
        )));
    }
    merge(&mut value, overlay);
    value
        .try_into()
        .map_err(|e| CliError::Input(format!("config [{section}]: {e}")))
}

/// Parses `args` and runs the selected subcommand; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let started_unix_seconds = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    let file = read_config(cli.common.config.as_deref())?;
    let seed = cli.common.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    let workers = cli.common.workers.or(file.workers);
    if workers == Some(0) {
        return Err(CliError::Input("--workers must be ≥ 1".into()));
    }
    let name = cli.command.name();
    let output = match &cli.command {
        Command::FitLsm(args) => cmd_fit_lsm(args, &file, seed)?,
        Command::FitInfluence(args) => cmd_fit_influence(args, &file)?,
        Command::Simulate(args) => cmd_simulate(args, &file, seed)?,
        Command::Study(args) => cmd_study(args, &file, seed, workers)?,
        Command::S50(args) => cmd_s50(args, &file, seed, workers)?,
    };

    let mut inputs = output
        .inputs
        .iter()
        .map(|p| digest_file(p))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(path) = &cli.common.config {
        inputs.push(digest_file(path)?);
    }
    let dir = &cli.common.out_dir;
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))?;
    for (file_name, contents) in &output.files {
        write_atomic(dir, file_name, contents.as_bytes())?;
    }
    let manifest = RunManifest {
        subcommand: name.to_string(),
        config: output.config,
        seed,
        workers,
        inputs,
        outputs: output.files.iter().map(|(f, _)| f.clone()).collect(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix_seconds,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_atomic(
        dir,
        &RunManifest::file_name(name),
        to_json(&manifest).as_bytes(),
    )?;
    print!("{}", output.stdout);
    Ok(())
}

/// Splits `label=rest`.
fn split_assignment<'a>(spec: &'a str, what: &str) -> Result<(&'a str, &'a str), CliError> {
    spec.split_once('=')
        .filter(|(l, r)| !l.is_empty() && !r.is_empty())
        .ok_or_else(|| CliError::Input(format!("{what} must look like name=value, got {spec:?}")))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn lsm_text(fit: &LsmFitSummary) -> String {
    let mut out = format!(
        "wave {} (n = {}, d = {})\nalpha        {:.5}\n",
        fit.wave, fit.n, fit.dim, fit.alpha
    );
    for (label, b) in fit.beta_labels.iter().zip(&fit.beta) {
        out.push_str(&format!("{:12} {b:.5}\n", format!("absdiff.{label}")));
    }
    out.push_str(&format!(
        "acceptance   positions {}, coefficients {:.3}\n",
        fit.acceptance
            .positions
            .map_or("-".to_string(), |p| format!("{p:.3}")),
        fit.acceptance.coefficients
    ));
    out
}

fn cmd_fit_lsm(args: &FitLsmArgs, file: &ConfigFile, seed: u64) -> Result<RunOutput, CliError> {
    let mut cfg = resolve(&FitLsmConfig::default(), file, "fit-lsm")?;
    args.mcmc.apply(&mut cfg.dim, &mut cfg.mcmc);
    cfg.mcmc.seed = seed;
    cfg.mcmc.validate()?;

    let net = parse_adjacency(&read_text(&args.adj)?, args.wave)
        .map_err(|e| CliError::Input(format!("{}: {e}", args.adj.display())))?;
    let mut inputs = vec![args.adj.clone()];
    let mut covariates = Vec::new();
    for spec in &args.attrs {
        let (label, rest) = split_assignment(spec, "--attrs entry")?;
        let (path, col) = rest
            .rsplit_once(':')
            .ok_or_else(|| CliError::Input(format!("--attrs entry {spec:?} needs :column")))?;
        let col: usize = col
            .parse()
            .ok()
            .filter(|&c| c >= 1)
            .ok_or_else(|| CliError::Input(format!("bad column in {spec:?}")))?;
        let path = PathBuf::from(path);
        let panel = parse_attribute_panel(&read_text(&path)?, label)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        if col > panel.waves() {
            return Err(CliError::Input(format!(
                "{} has {} columns, column {col} requested",
                path.display(),
                panel.waves()
            )));
        }
        covariates.push(DyadicCovariate::absdiff(label, &panel.column(col - 1)));
        inputs.push(path);
    }
    let spec = LsmSpec::new(cfg.dim, covariates);
    let fit = mcmc_sample(&net, &spec, &cfg.mcmc)?;
    let summary = fit.summary();
    let mut files = vec![(format!("lsm-fit-w{}.json", args.wave), to_json(&summary))];
    if args.draws_csv {
        files.push((format!("lsm-draws-w{}.csv", args.wave), fit.draws_csv()));
    }
    Ok(RunOutput {
        config: serde_json::json!({
            "fit": cfg,
            "wave": args.wave,
            "attrs": args.attrs,
            "draws_csv": args.draws_csv,
        }),
        inputs,
        files,
        stdout: lsm_text(&summary),
    })
}

fn cmd_fit_influence(args: &FitInfluenceArgs, file: &ConfigFile) -> Result<RunOutput, CliError> {
    let mut cfg = resolve(&FitInfluenceConfig::default(), file, "fit-influence")?;
    if let Some(v) = &args.outcome {
        cfg.outcome = Some(v.clone());
    }
    if let Some(v) = &args.covariates {
        cfg.covariates = v.clone();
    }
    if let Some(v) = &args.lag_label {
        cfg.lag_label = Some(v.clone());
    }
    let outcome = cfg
        .outcome
        .clone()
        .ok_or_else(|| CliError::Input("--outcome is required".into()))?;

    let mut paths = StudyPaths {
        networks: args.adj.clone(),
        attributes: Vec::new(),
    };
    for spec in &args.attrs {
        let (name, path) = split_assignment(spec, "--attr entry")?;
        paths
            .attributes
            .push((name.to_string(), PathBuf::from(path)));
    }
    let study = load_study(&paths)?;
    let mut spec = InfluenceSpec::new(outcome, cfg.covariates.clone());
    if let Some(label) = &cfg.lag_label {
        spec = spec.with_lag_label(label.clone());
    }

    let mut inputs: Vec<PathBuf> = s50::input_files(&paths);
    let model = if args.adjust.is_empty() {
        InfluenceModel::Naive
    } else {
        let mut latent = Vec::new();
        for path in &args.adjust {
            let fit: LsmFitSummary = serde_json::from_str(&read_text(path)?)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            latent.push(LatentPositions::from(&fit));
            inputs.push(path.clone());
        }
        InfluenceModel::Adjusted(latent)
    };
    let kind = match model {
        InfluenceModel::Naive => "naive",
        InfluenceModel::Adjusted(_) => "adjusted",
    };
    let fit = fit_influence(&study, &spec, &model)?;
    let table = fit.table();
    let mut files = vec![
        (format!("influence-{kind}.json"), to_json(&fit)),
        (format!("influence-{kind}.txt"), table.clone()),
    ];
    if args.panel_csv {
        let panel = model_panel(&study, &spec, &model)?;
        files.push((format!("influence-{kind}-panel.csv"), panel.to_csv()));
    }
    Ok(RunOutput {
        config: serde_json::json!({
            "spec": spec,
            "adjust": args.adjust,
            "panel_csv": args.panel_csv,
        }),
        inputs,
        files,
        stdout: table,
    })
}

fn cmd_simulate(args: &SimulateArgs, file: &ConfigFile, seed: u64) -> Result<RunOutput, CliError> {
    let mut cfg = resolve(&SimConfig::default(), file, "simulate")?;
    args.sim.apply(&mut cfg);
    cfg.seed = seed;
    let out = simulate_panel(&cfg)?;
    let files = out.files(&cfg);
    let stdout = files
        .iter()
        .map(|(name, _)| format!("wrote {name}\n"))
        .collect();
    Ok(RunOutput {
        config: serde_json::to_value(cfg).expect("serializes"),
        inputs: Vec::new(),
        files,
        stdout,
    })
}

fn study_text(report: &StudyReport) -> String {
    let mut out = format!(
        "{:10} {:>9} {:>10} {:>9} {:>9} {:>9}\n",
        "estimator", "mean", "mean bias", "MC SE", "RMSE", "coverage"
    );
    for (name, s) in [("naive", &report.naive), ("adjusted", &report.adjusted)] {
        out.push_str(&format!(
            "{name:10} {:>9.4} {:>10.4} {:>9} {:>9.4} {:>9.3}\n",
            s.mean,
            s.mean_bias,
            s.mc_se.map_or("-".to_string(), |v| format!("{v:.4}")),
            s.rmse,
            s.coverage
        ));
    }
    out.push_str(&format!(
        "\nreplications {} (failed {}), true beta2 {}\nattenuation ratio {:.4}\nbias gap {:.4} (MC SE {})\n",
        report.records.len(),
        report.failures.len(),
        report.config.sim.beh_b2,
        report.attenuation_ratio,
        report.bias_gap,
        report
            .bias_gap_mc_se
            .map_or("-".to_string(), |v| format!("{v:.4}"))
    ));
    out
}

fn cmd_study(
    args: &StudyArgs,
    file: &ConfigFile,
    seed: u64,
    workers: Option<usize>,
) -> Result<RunOutput, CliError> {
    let mut cfg = resolve(&StudyConfig::default(), file, "study")?;
    if let Some(v) = args.reps {
        cfg.reps = v;
    }
    if let Some(v) = &args.lsm_covariates {
        cfg.lsm_covariates = v.clone();
    }
    args.sim.apply(&mut cfg.sim);
    args.mcmc.apply(&mut cfg.dim, &mut cfg.mcmc);
    cfg.sim.seed = seed;
    cfg.mcmc.seed = seed;
    let report = run_study(&cfg, seed, workers)?;
    Ok(RunOutput {
        config: serde_json::to_value(&cfg).expect("serializes"),
        inputs: Vec::new(),
        files: vec![
            ("study-report.json".into(), to_json(&report)),
            ("study-summary.csv".into(), report.summary_csv()),
        ],
        stdout: study_text(&report),
    })
}

fn cmd_s50(
    args: &S50Args,
    file: &ConfigFile,
    seed: u64,
    workers: Option<usize>,
) -> Result<RunOutput, CliError> {
    let mut cfg = resolve(&S50Config::default(), file, "s50")?;
    args.mcmc.apply(&mut cfg.dim, &mut cfg.mcmc);
    cfg.mcmc.seed = seed;
    cfg.mcmc.validate()?;
    let paths = s50::paths(&args.data_dir, &args.prefix);
    let study = load_study(&paths)?;
    let report = s50::run(&study, &cfg, seed, workers)?;

    let mut stdout = String::new();
    stdout.push_str("Correlations\n");
    stdout.push_str(&report.correlations.table());
    stdout.push_str("\nNaive influence model\n");
    stdout.push_str(&report.naive.table());
    for fit in &report.lsm {
        stdout.push_str("\nLatent space model, ");
        stdout.push_str(&lsm_text(fit));
    }
    stdout.push_str("\nAdjusted influence model\n");
    stdout.push_str(&report.adjusted.table());
    stdout.push('\n');
    stdout.push_str(&report.attenuation.text());

    let mut files = vec![
        ("s50-correlations.txt".into(), report.correlations.table()),
        ("s50-naive.txt".into(), report.naive.table()),
        ("s50-adjusted.txt".into(), report.adjusted.table()),
        ("s50-attenuation.txt".into(), report.attenuation.text()),
    ];
    for fit in &report.lsm {
        files.push((format!("s50-lsm-w{}.json", fit.wave), to_json(fit)));
    }
    files.push(("s50-report.json".into(), to_json(&report)));
    Ok(RunOutput {
        config: serde_json::json!({
            "s50": cfg,
            "data_dir": args.data_dir,
            "prefix": args.prefix,
        }),
        inputs: s50::input_files(&paths),
        files,
        stdout,
    })
}

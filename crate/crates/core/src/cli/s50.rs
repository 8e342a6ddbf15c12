//! The three-wave, four-attribute school cohort pipeline: naive and
//! latent-adjusted influence models for alcohol use.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::influence::{
    correlation_matrix, fit_influence, model_panel, CorrelationMatrix, InfluenceFit,
    InfluenceModel, InfluenceSpec, LatentPositions,
};
use crate::io::{StudyData, StudyPaths};
use crate::lsm::{mcmc_sample, DyadicCovariate, LsmFitSummary, LsmSpec, McmcControl};
use crate::seed;

use super::CliError;

/// Reference overestimation of the naive exposure effect, in percent.
pub const REFERENCE_OVERESTIMATION_PCT: f64 = 18.0;

pub const OUTCOME: &str = "alcohol";
pub const LAG: &str = "lag_alc";
pub const EXPOSURE: &str = "expo";

/// `(attribute name, file stem, dyadic label)`.
pub const ATTRIBUTES: [(&str, &str, &str); 4] = [
    ("alcohol", "alcohol", "a"),
    ("smoke", "smoke", "s"),
    ("sport", "sport", "sp"),
    ("drug", "drugs", "d"),
];

/// Observed columns of the correlation table, in display order.
pub const OBSERVED_COLUMNS: [&str; 6] = ["alcohol", "lag_alc", "expo", "drug", "smoke", "sport"];

pub fn paths(dir: &Path, prefix: &str) -> StudyPaths {
    let file = |stem: &str| dir.join(format!("{prefix}-{stem}.dat"));
    StudyPaths {
        networks: (1..=3).map(|w| file(&format!("network{w}"))).collect(),
        attributes: ATTRIBUTES
            .iter()
            .map(|(name, stem, _)| (name.to_string(), file(stem)))
            .collect(),
    }
}

/// Every file `paths` refers to, networks first.
pub fn input_files(paths: &StudyPaths) -> Vec<PathBuf> {
    paths
        .networks
        .iter()
        .chain(paths.attributes.iter().map(|(_, p)| p))
        .cloned()
        .collect()
}

/// `alcohol ~ lag_alc + expo + smoke + sport + drug`.
pub fn influence_spec() -> InfluenceSpec {
    InfluenceSpec::new(OUTCOME, vec!["smoke".into(), "sport".into(), "drug".into()])
        .with_lag_label(LAG)
}

/// Latent-space spec for network `wave_idx` (0-based) with absolute
/// differences of the four attributes measured at that wave.
pub fn lsm_spec(study: &StudyData, wave_idx: usize, dim: usize) -> Result<LsmSpec, CliError> {
    let covariates = ATTRIBUTES
        .iter()
        .map(|(name, _, label)| {
            let panel = study
                .attribute(name)
                .ok_or_else(|| CliError::Input(format!("missing attribute {name}")))?;
            Ok(DyadicCovariate::absdiff(*label, &panel.column(wave_idx)))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(LsmSpec::new(dim, covariates))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct S50Config {
    pub dim: usize,
    pub mcmc: McmcControl,
}

impl Default for S50Config {
    fn default() -> Self {
        Self {
            dim: 1,
            mcmc: McmcControl::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attenuation {
    pub naive_expo: f64,
    pub adjusted_expo: f64,
    /// `(naive / adjusted − 1) · 100`.
    pub overestimation_pct: f64,
    pub reference_pct: f64,
}

impl Attenuation {
    pub fn new(naive_expo: f64, adjusted_expo: f64) -> Self {
        Self {
            naive_expo,
            adjusted_expo,
            overestimation_pct: (naive_expo / adjusted_expo - 1.0) * 100.0,
            reference_pct: REFERENCE_OVERESTIMATION_PCT,
        }
    }

    pub fn text(&self) -> String {
        format!(
            "naive expo      {:.6}\nadjusted expo   {:.6}\noverestimation  {:.1}% (reference ~{:.0}%)\n",
            self.naive_expo, self.adjusted_expo, self.overestimation_pct, self.reference_pct
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S50Report {
    pub observed_correlations: CorrelationMatrix,
    pub correlations: CorrelationMatrix,
    pub naive: InfluenceFit,
    pub lsm: Vec<LsmFitSummary>,
    pub adjusted: InfluenceFit,
    pub attenuation: Attenuation,
}

/// Naive fit and observed correlations; no sampling involved.
pub fn naive(study: &StudyData) -> Result<(InfluenceFit, CorrelationMatrix), CliError> {
    let spec = influence_spec();
    let panel = model_panel(study, &spec, &InfluenceModel::Naive)?;
    let cor = correlation_matrix(&panel, &OBSERVED_COLUMNS)?;
    Ok((fit_influence(study, &spec, &InfluenceModel::Naive)?, cor))
}

/// Full pipeline. The chain for network `w` (1-based) is seeded with
/// `seed::derive(seed, w)`; the two fits run on up to `workers` threads.
pub fn run(
    study: &StudyData,
    cfg: &S50Config,
    seed: u64,
    workers: Option<usize>,
) -> Result<S50Report, CliError> {
    if study.waves() != 3 {
        return Err(CliError::Input(format!(
            "expected 3 waves, found {}",
            study.waves()
        )));
    }
    let (naive, observed_correlations) = naive(study)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Input(e.to_string()))?;
    let (first, second) = pool.install(|| {
        rayon::join(
            || fit_wave(study, cfg, seed, 0),
            || fit_wave(study, cfg, seed, 1),
        )
    });
    let lsm = vec![first?, second?];

    let spec = influence_spec();
    let model = InfluenceModel::Adjusted(lsm.iter().map(LatentPositions::from).collect());
    let adjusted = fit_influence(study, &spec, &model)?;
    let panel = model_panel(study, &spec, &model)?;
    let mut columns: Vec<&str> = OBSERVED_COLUMNS.to_vec();
    columns.extend(
        panel.names()[OBSERVED_COLUMNS.len()..]
            .iter()
            .map(String::as_str),
    );
    let correlations = correlation_matrix(&panel, &columns)?;

    let coef = |fit: &InfluenceFit| fit.coef(EXPOSURE).map(|c| c.estimate).unwrap_or(f64::NAN);
    let attenuation = Attenuation::new(coef(&naive), coef(&adjusted));
    Ok(S50Report {
        observed_correlations,
        correlations,
        naive,
        lsm,
        adjusted,
        attenuation,
    })
}

fn fit_wave(
    study: &StudyData,
    cfg: &S50Config,
    seed: u64,
    wave_idx: usize,
) -> Result<LsmFitSummary, CliError> {
    let spec = lsm_spec(study, wave_idx, cfg.dim)?;
    let control = cfg
        .mcmc
        .with_seed(seed::derive(seed, (wave_idx + 1) as u64));
    let fit = mcmc_sample(study.network(wave_idx), &spec, &control)?;
    log::info!(
        "wave {} fit: acceptance positions {:.3}, coefficients {:.3}",
        wave_idx + 1,
        fit.acceptance.positions.unwrap_or(f64::NAN),
        fit.acceptance.coefficients
    );
    Ok(fit.summary())
}

//! Monte Carlo comparison of the naive and latent-adjusted influence
//! estimators on simulated confounded panels.
//!
//! Replication `r` of a study with master seed `s` uses `rep_seed = s + r`.
//! Within a replication the panel is simulated from `rep_seed` and the
//! latent-space chain for wave `w` uses `seed::derive(rep_seed, w)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::influence::{
    fit_influence, InfluenceError, InfluenceModel, InfluenceSpec, LatentPositions,
};
use crate::lsm::{mcmc_sample, DyadicCovariate, LsmError, LsmSpec, McmcControl};
use crate::seed;
use crate::sim::{simulate_panel, SimConfig, SimError, BEHAVIOR, COVARIATE};

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid study config: {0}")]
    InvalidConfig(String),
    #[error("all {0} replications failed")]
    AllFailed(usize),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Lsm(#[from] LsmError),
    #[error(transparent)]
    Influence(#[from] InfluenceError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub sim: SimConfig,
    pub reps: usize,
    pub mcmc: McmcControl,
    /// Attributes entering the latent-space model as absolute differences.
    pub lsm_covariates: Vec<String>,
    pub dim: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            reps: 100,
            mcmc: McmcControl::reduced(),
            lsm_covariates: vec![COVARIATE.to_string()],
            dim: 1,
        }
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<(), StudyError> {
        if self.reps == 0 {
            return Err(StudyError::InvalidConfig("reps must be ≥ 1".into()));
        }
        if self.dim == 0 {
            return Err(StudyError::InvalidConfig("dim must be ≥ 1".into()));
        }
        self.sim.validate()?;
        self.mcmc.validate()?;
        Ok(())
    }

    fn influence_spec(&self) -> InfluenceSpec {
        InfluenceSpec::new(BEHAVIOR, vec![COVARIATE.to_string()])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub std_error: f64,
    pub df: usize,
}

impl Estimate {
    /// Two-sided t interval.
    pub fn interval(&self, level: f64) -> (f64, f64) {
        let t = StudentsT::new(0.0, 1.0, self.df as f64)
            .expect("df ≥ 1")
            .inverse_cdf(0.5 + level / 2.0);
        (
            self.estimate - t * self.std_error,
            self.estimate + t * self.std_error,
        )
    }

    pub fn covers(&self, truth: f64, level: f64) -> bool {
        let (lo, hi) = self.interval(level);
        lo <= truth && truth <= hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub index: usize,
    pub seed: u64,
    pub beta2_true: f64,
    pub naive: Estimate,
    pub adjusted: Estimate,
    /// |corr(latent position, trait)| per fitted wave.
    pub trait_correlation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedReplication {
    pub index: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub mean: f64,
    pub mean_bias: f64,
    /// Standard error of `mean`; `None` with a single replication.
    pub mc_se: Option<f64>,
    pub rmse: f64,
    pub coverage: f64,
}

impl EstimatorSummary {
    fn from_estimates(estimates: &[Estimate], truth: &[f64]) -> Self {
        let m = estimates.len() as f64;
        let mean = estimates.iter().map(|e| e.estimate).sum::<f64>() / m;
        let mean_bias = estimates
            .iter()
            .zip(truth)
            .map(|(e, t)| e.estimate - t)
            .sum::<f64>()
            / m;
        let rmse = (estimates
            .iter()
            .zip(truth)
            .map(|(e, t)| (e.estimate - t).powi(2))
            .sum::<f64>()
            / m)
            .sqrt();
        let covered = estimates
            .iter()
            .zip(truth)
            .filter(|(e, t)| e.covers(**t, 0.95))
            .count();
        Self {
            mean,
            mean_bias,
            mc_se: standard_error(estimates.iter().map(|e| e.estimate)),
            rmse,
            coverage: covered as f64 / m,
        }
    }
}

fn standard_error(values: impl Iterator<Item = f64>) -> Option<f64> {
    let values: Vec<f64> = values.collect();
    if values.len() < 2 {
        return None;
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Some((var / m).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub master_seed: u64,
    pub records: Vec<ReplicationRecord>,
    pub failures: Vec<FailedReplication>,
    pub naive: EstimatorSummary,
    pub adjusted: EstimatorSummary,
    /// mean(naive) / mean(adjusted).
    pub attenuation_ratio: f64,
    /// |mean bias(naive)| − |mean bias(adjusted)|.
    pub bias_gap: f64,
    /// Standard error of the mean paired difference naive − adjusted.
    pub bias_gap_mc_se: Option<f64>,
}

impl StudyReport {
    pub fn summary_csv(&self) -> String {
        let mut out = String::from("estimator,reps,mean,mean_bias,mc_se,rmse,coverage\n");
        for (name, s) in [("naive", &self.naive), ("adjusted", &self.adjusted)] {
            out.push_str(&format!(
                "{name},{},{},{},{},{},{}\n",
                self.records.len(),
                s.mean,
                s.mean_bias,
                s.mc_se.map_or(String::new(), |v| v.to_string()),
                s.rmse,
                s.coverage
            ));
        }
        out
    }
}

fn pearson_abs(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).abs()
}

pub fn run_replication(
    cfg: &StudyConfig,
    index: usize,
    rep_seed: u64,
) -> Result<ReplicationRecord, StudyError> {
    let sim_cfg = SimConfig {
        seed: rep_seed,
        ..cfg.sim
    };
    let out = simulate_panel(&sim_cfg)?;
    let study = &out.study;
    let mut latent = Vec::with_capacity(study.waves() - 1);
    let mut trait_correlation = Vec::with_capacity(study.waves() - 1);
    for w in 0..study.waves() - 1 {
        let covariates = cfg
            .lsm_covariates
            .iter()
            .map(|name| {
                let panel = study.attribute(name).ok_or_else(|| {
                    StudyError::InvalidConfig(format!("unknown LSM covariate {name:?}"))
                })?;
                Ok(DyadicCovariate::absdiff(name.clone(), &panel.column(w)))
            })
            .collect::<Result<Vec<_>, StudyError>>()?;
        let spec = LsmSpec::new(cfg.dim, covariates);
        let control = cfg.mcmc.with_seed(seed::derive(rep_seed, (w + 1) as u64));
        let fit = mcmc_sample(study.network(w), &spec, &control)?;
        trait_correlation.push(pearson_abs(&fit.point.axis(0), &out.traits));
        latent.push(LatentPositions::from(&fit));
    }
    let spec = cfg.influence_spec();
    let estimate = |model: &InfluenceModel| -> Result<Estimate, StudyError> {
        let fit = fit_influence(study, &spec, model)?;
        let c = fit
            .coef(&spec.exposure_label)
            .expect("exposure is always in the design");
        Ok(Estimate {
            estimate: c.estimate,
            std_error: c.std_error,
            df: fit.df_resid,
        })
    };
    Ok(ReplicationRecord {
        index,
        seed: rep_seed,
        beta2_true: cfg.sim.beh_b2,
        naive: estimate(&InfluenceModel::Naive)?,
        adjusted: estimate(&InfluenceModel::Adjusted(latent))?,
        trait_correlation,
    })
}

/// Aggregates finished replications. Records must be sorted by index.
pub fn summarize(
    cfg: &StudyConfig,
    master_seed: u64,
    records: Vec<ReplicationRecord>,
    failures: Vec<FailedReplication>,
) -> Result<StudyReport, StudyError> {
    if records.is_empty() {
        return Err(StudyError::AllFailed(failures.len()));
    }
    let truth: Vec<f64> = records.iter().map(|r| r.beta2_true).collect();
    let naive_est: Vec<Estimate> = records.iter().map(|r| r.naive).collect();
    let adjusted_est: Vec<Estimate> = records.iter().map(|r| r.adjusted).collect();
    let naive = EstimatorSummary::from_estimates(&naive_est, &truth);
    let adjusted = EstimatorSummary::from_estimates(&adjusted_est, &truth);
    let bias_gap_mc_se = standard_error(
        records
            .iter()
            .map(|r| r.naive.estimate - r.adjusted.estimate),
    );
    Ok(StudyReport {
        config: cfg.clone(),
        master_seed,
        attenuation_ratio: naive.mean / adjusted.mean,
        bias_gap: naive.mean_bias.abs() - adjusted.mean_bias.abs(),
        bias_gap_mc_se,
        naive,
        adjusted,
        records,
        failures,
    })
}

/// Runs `cfg.reps` replications on up to `workers` threads (all cores when
/// `None`). The report depends only on the config and `master_seed`.
pub fn run_study(
    cfg: &StudyConfig,
    master_seed: u64,
    workers: Option<usize>,
) -> Result<StudyReport, StudyError> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| StudyError::InvalidConfig(e.to_string()))?;
    let outcomes: Vec<(usize, u64, Result<ReplicationRecord, StudyError>)> = pool.install(|| {
        (0..cfg.reps)
            .into_par_iter()
            .map(|index| {
                let rep_seed = master_seed.wrapping_add(index as u64);
                let outcome = run_replication(cfg, index, rep_seed);
                match &outcome {
                    Ok(r) => log::info!(
                        "replication {}/{} seed {rep_seed}: naive {:.4} adjusted {:.4}",
                        index + 1,
                        cfg.reps,
                        r.naive.estimate,
                        r.adjusted.estimate
                    ),
                    Err(e) => log::warn!(
                        "replication {}/{} seed {rep_seed} failed: {e}",
                        index + 1,
                        cfg.reps
                    ),
                }
                (index, rep_seed, outcome)
            })
            .collect()
    });
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (index, seed, outcome) in outcomes {
        match outcome {
            Ok(record) => records.push(record),
            Err(e) => failures.push(FailedReplication {
                index,
                seed,
                error: e.to_string(),
            }),
        }
    }
    summarize(cfg, master_seed, records, failures)
}

//! Logistic latent-distance network model.
//!
//! The log-odds of a tie i→j is `alpha + beta·x_ij − ‖c_i − c_j‖`, where `x_ij`
//! are dyadic covariates and `c_i` are latent positions in `dim` dimensions.
//! Parameters are sampled by random-walk Metropolis-Hastings; retained
//! position draws are aligned (centering, reflection, and rotation when
//! `dim > 1`) before being summarized by their posterior means.

mod align;
mod init;
mod likelihood;
mod sampler;

pub use align::{align_draws, center_columns, point_estimates};
pub use init::{geodesic_distances, initialize_positions};
pub use likelihood::{dyad_log_lik, log_likelihood, softplus};
pub use sampler::mcmc_sample;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::Network;

/// Prior standard deviation of intercept and covariate coefficients.
pub const PRIOR_SD_COEF: f64 = 10.0;
/// Prior standard deviation of each latent coordinate.
pub const PRIOR_SD_POSITION: f64 = 10.0;

#[derive(Debug, Error)]
pub enum LsmError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid MCMC control: {0}")]
    InvalidControl(String),
    #[error("log-likelihood is not finite at the initial state")]
    NonFiniteLikelihood,
    #[error("no draws to summarize")]
    NoDraws,
}

/// n×n dyadic covariate with zero diagonal, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicCovariate {
    label: String,
    n: usize,
    values: Vec<f64>,
}

impl DyadicCovariate {
    pub fn new(label: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self, LsmError> {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(LsmError::DimensionMismatch(format!(
                    "covariate row {} has {} entries, expected {n}",
                    i + 1,
                    row.len()
                )));
            }
            if row[i] != 0.0 {
                return Err(LsmError::DimensionMismatch(format!(
                    "covariate has nonzero diagonal at node {}",
                    i + 1
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(LsmError::DimensionMismatch(format!(
                    "covariate row {} has a non-finite entry",
                    i + 1
                )));
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            label: label.into(),
            n,
            values,
        })
    }

    /// `|attr_i − attr_j|` covariate.
    pub fn absdiff(label: impl Into<String>, attr: &[f64]) -> Self {
        let n = attr.len();
        let mut values = Vec::with_capacity(n * n);
        for &a in attr {
            values.extend(attr.iter().map(|&b| (a - b).abs()));
        }
        Self {
            label: label.into(),
            n,
            values,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// `M[i][j] = |attr[i] − attr[j]|`.
pub fn dyadic_absdiff(attr: &[f64]) -> Vec<Vec<f64>> {
    attr.iter()
        .map(|&a| attr.iter().map(|&b| (a - b).abs()).collect())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsmSpec {
    pub dim: usize,
    pub covariates: Vec<DyadicCovariate>,
}

impl LsmSpec {
    pub fn new(dim: usize, covariates: Vec<DyadicCovariate>) -> Self {
        Self { dim, covariates }
    }

    pub fn labels(&self) -> Vec<String> {
        self.covariates
            .iter()
            .map(|c| c.label().to_string())
            .collect()
    }

    pub(crate) fn validate(&self, n: usize) -> Result<(), LsmError> {
        if self.dim == 0 {
            return Err(LsmError::DimensionMismatch(
                "latent dimension must be at least 1".into(),
            ));
        }
        if let Some(c) = self.covariates.iter().find(|c| c.n() != n) {
            return Err(LsmError::DimensionMismatch(format!(
                "covariate {:?} is {}×{} but the network has {n} nodes",
                c.label(),
                c.n(),
                c.n()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsmParams {
    pub alpha: f64,
    pub beta: Vec<f64>,
    /// n rows of `dim` coordinates.
    pub positions: Vec<Vec<f64>>,
}

impl LsmParams {
    pub(crate) fn validate(&self, net: &Network, spec: &LsmSpec) -> Result<(), LsmError> {
        spec.validate(net.n())?;
        if self.beta.len() != spec.covariates.len() {
            return Err(LsmError::DimensionMismatch(format!(
                "{} coefficients for {} covariates",
                self.beta.len(),
                spec.covariates.len()
            )));
        }
        if self.positions.len() != net.n() {
            return Err(LsmError::DimensionMismatch(format!(
                "{} positions for {} nodes",
                self.positions.len(),
                net.n()
            )));
        }
        if let Some(row) = self.positions.iter().find(|r| r.len() != spec.dim) {
            return Err(LsmError::DimensionMismatch(format!(
                "position of dimension {} in a {}-dimensional model",
                row.len(),
                spec.dim
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.positions.first().map_or(0, Vec::len)
    }

    /// Positions along one latent axis, in node order.
    pub fn axis(&self, k: usize) -> Vec<f64> {
        self.positions.iter().map(|row| row[k]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcControl {
    pub sample_size: usize,
    pub burnin: usize,
    pub interval: usize,
    pub pos_step: f64,
    pub coef_step: f64,
    pub seed: u64,
    /// Keep positions fixed at their initial values and sample only the
    /// coefficients.
    pub freeze_positions: bool,
    /// Tune the coefficient proposal during burn-in.
    pub adapt: bool,
}

impl Default for McmcControl {
    fn default() -> Self {
        Self {
            sample_size: 5000,
            burnin: 20000,
            interval: 10,
            pos_step: 5.0,
            coef_step: 0.5,
            seed: 0,
            freeze_positions: false,
            adapt: true,
        }
    }
}

impl McmcControl {
    /// Shorter chains used per replication in Monte Carlo studies.
    pub fn reduced() -> Self {
        Self {
            sample_size: 1000,
            burnin: 5000,
            interval: 5,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn iterations(&self) -> usize {
        self.burnin + self.sample_size * self.interval
    }

    pub fn validate(&self) -> Result<(), LsmError> {
        if self.sample_size == 0 {
            return Err(LsmError::InvalidControl("sample_size must be ≥ 1".into()));
        }
        if self.interval == 0 {
            return Err(LsmError::InvalidControl("interval must be ≥ 1".into()));
        }
        if !(self.pos_step > 0.0 && self.pos_step.is_finite()) {
            return Err(LsmError::InvalidControl("pos_step must be > 0".into()));
        }
        if !(self.coef_step > 0.0 && self.coef_step.is_finite()) {
            return Err(LsmError::InvalidControl("coef_step must be > 0".into()));
        }
        Ok(())
    }
}

/// Metropolis acceptance rates per update block. `positions` is `None` when
/// positions were frozen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub positions: Option<f64>,
    pub coefficients: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsmFit {
    pub wave: usize,
    pub labels: Vec<String>,
    pub draws: Vec<LsmParams>,
    pub acceptance: Acceptance,
    pub point: LsmParams,
    pub loglik_trace: Vec<f64>,
    pub control: McmcControl,
}

/// Compact JSON form of a fit: point estimates, acceptance, and controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsmFitSummary {
    pub wave: usize,
    pub n: usize,
    pub dim: usize,
    pub alpha: f64,
    pub beta: Vec<f64>,
    pub beta_labels: Vec<String>,
    pub positions: Vec<Vec<f64>>,
    pub acceptance: Acceptance,
    pub controls: McmcControl,
    pub seed: u64,
    pub mean_loglik: f64,
}

impl LsmFit {
    pub fn summary(&self) -> LsmFitSummary {
        LsmFitSummary {
            wave: self.wave,
            n: self.point.positions.len(),
            dim: self.point.dim(),
            alpha: self.point.alpha,
            beta: self.point.beta.clone(),
            beta_labels: self.labels.clone(),
            positions: self.point.positions.clone(),
            acceptance: self.acceptance,
            controls: self.control,
            seed: self.control.seed,
            mean_loglik: self.loglik_trace.iter().sum::<f64>() / self.loglik_trace.len() as f64,
        }
    }

    /// One row per retained draw: draw index, log-likelihood, alpha, betas,
    /// then positions node by node.
    pub fn draws_csv(&self) -> String {
        let mut out = String::from("draw,loglik,alpha");
        for label in &self.labels {
            out.push_str(&format!(",beta_{label}"));
        }
        let dim = self.point.dim();
        for i in 0..self.point.positions.len() {
            for k in 0..dim {
                out.push_str(&format!(",pos_{}_{}", i + 1, k + 1));
            }
        }
        out.push('\n');
        for (t, (draw, ll)) in self.draws.iter().zip(&self.loglik_trace).enumerate() {
            out.push_str(&format!("{},{ll},{}", t + 1, draw.alpha));
            for b in &draw.beta {
                out.push_str(&format!(",{b}"));
            }
            for row in &draw.positions {
                for v in row {
                    out.push_str(&format!(",{v}"));
                }
            }
            out.push('\n');
        }
        out
    }
}

impl LsmFitSummary {
    /// Positions along one latent axis, in node order.
    pub fn axis(&self, k: usize) -> Vec<f64> {
        self.positions.iter().map(|row| row[k]).collect()
    }
}

//! Dynamic linear-in-means influence model.
//!
//! For each transition t−1 → t the outcome at wave t is regressed on the
//! outcome at t−1, the out-neighbor average of the outcome at t−1 over the
//! wave t−1 network (the exposure), concurrent covariates from wave t, and
//! optionally per-wave latent positions. Transitions are stacked latest
//! first.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};
use thiserror::Error;

use crate::io::{Network, StudyData};
use crate::lsm::{LsmFit, LsmFitSummary};

pub const INTERCEPT: &str = "(Intercept)";

#[derive(Debug, Error)]
pub enum InfluenceError {
    #[error("at least 2 waves are needed, found {0}")]
    TooFewWaves(usize),
    #[error("no attribute named {0:?}")]
    MissingAttribute(String),
    #[error("panel has no column {0:?}")]
    MissingColumn(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("design matrix is rank deficient at column {0:?}")]
    RankDeficient(String),
    #[error("{rows} rows cannot identify {cols} coefficients")]
    TooFewRows { rows: usize, cols: usize },
    #[error("column {0:?} has zero variance")]
    ZeroVariance(String),
    #[error("latent positions: {0}")]
    Latent(String),
}

/// `E_i = Σ_j adj_ij·behavior_j / Σ_j adj_ij`, or 0 for nodes without
/// out-ties.
pub fn exposure(net: &Network, behavior: &[f64]) -> Vec<f64> {
    (0..net.n())
        .map(|i| {
            let row = net.row(i);
            let degree: usize = row.iter().map(|&v| v as usize).sum();
            if degree == 0 {
                return 0.0;
            }
            let total: f64 = row
                .iter()
                .zip(behavior)
                .filter(|(&t, _)| t == 1)
                .map(|(_, &b)| b)
                .sum();
            total / degree as f64
        })
        .collect()
}

/// Which attribute is the outcome and which enter as concurrent covariates,
/// plus the column labels used in the panel and the coefficient table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceSpec {
    pub outcome: String,
    pub lag_label: String,
    pub exposure_label: String,
    pub covariates: Vec<String>,
}

impl InfluenceSpec {
    pub fn new(outcome: impl Into<String>, covariates: Vec<String>) -> Self {
        let outcome = outcome.into();
        Self {
            lag_label: format!("lag_{outcome}"),
            exposure_label: "expo".into(),
            outcome,
            covariates,
        }
    }

    pub fn with_lag_label(mut self, label: impl Into<String>) -> Self {
        self.lag_label = label.into();
        self
    }
}

/// Per-wave latent positions used as adjustment covariates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPositions {
    pub wave: usize,
    pub positions: Vec<Vec<f64>>,
}

impl From<&LsmFit> for LatentPositions {
    fn from(fit: &LsmFit) -> Self {
        Self {
            wave: fit.wave,
            positions: fit.point.positions.clone(),
        }
    }
}

impl From<&LsmFitSummary> for LatentPositions {
    fn from(fit: &LsmFitSummary) -> Self {
        Self {
            wave: fit.wave,
            positions: fit.positions.clone(),
        }
    }
}

impl LatentPositions {
    /// Named columns: `latent_pos{wave}` in one dimension,
    /// `latent_pos{wave}_{axis}` otherwise.
    pub fn columns(&self) -> Vec<(String, Vec<f64>)> {
        let dim = self.positions.first().map_or(0, Vec::len);
        (0..dim)
            .map(|k| {
                let name = if dim == 1 {
                    format!("latent_pos{}", self.wave)
                } else {
                    format!("latent_pos{}_{}", self.wave, k + 1)
                };
                (name, self.positions.iter().map(|r| r[k]).collect())
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluencePanel {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
    /// 1-based node id per row.
    node: Vec<usize>,
    /// 1-based block index in stacking order (1 = latest transition).
    period: Vec<usize>,
}

impl InfluencePanel {
    pub fn rows(&self) -> usize {
        self.node.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.columns[k].as_slice())
    }

    fn require(&self, name: &str) -> Result<&[f64], InfluenceError> {
        self.column(name)
            .ok_or_else(|| InfluenceError::MissingColumn(name.to_string()))
    }

    pub fn node_ids(&self) -> &[usize] {
        &self.node
    }

    pub fn period_ids(&self) -> &[usize] {
        &self.period
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.names.join(",");
        out.push_str(",node,period\n");
        for r in 0..self.rows() {
            for col in &self.columns {
                let _ = write!(out, "{},", col[r]);
            }
            let _ = writeln!(out, "{},{}", self.node[r], self.period[r]);
        }
        out
    }
}

/// Stacks transitions W−1→W, W−2→W−1, …, 1→2. Latent columns (length n)
/// are repeated in every block.
pub fn stack_panel(
    study: &StudyData,
    spec: &InfluenceSpec,
    latent: &[(String, Vec<f64>)],
) -> Result<InfluencePanel, InfluenceError> {
    let waves = study.waves();
    if waves < 2 {
        return Err(InfluenceError::TooFewWaves(waves));
    }
    let n = study.n();
    let attr = |name: &str| {
        study
            .attribute(name)
            .ok_or_else(|| InfluenceError::MissingAttribute(name.to_string()))
    };
    let outcome = attr(&spec.outcome)?;
    let covariates = spec
        .covariates
        .iter()
        .map(|c| attr(c))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some((name, col)) = latent.iter().find(|(_, col)| col.len() != n) {
        return Err(InfluenceError::DimensionMismatch(format!(
            "latent column {name:?} has {} entries for {n} nodes",
            col.len()
        )));
    }

    let rows = n * (waves - 1);
    let mut names = vec![
        spec.outcome.clone(),
        spec.lag_label.clone(),
        spec.exposure_label.clone(),
    ];
    names.extend(spec.covariates.iter().cloned());
    names.extend(latent.iter().map(|(name, _)| name.clone()));
    let mut columns = vec![Vec::with_capacity(rows); names.len()];
    let mut node = Vec::with_capacity(rows);
    let mut period = Vec::with_capacity(rows);

    for (block, t) in (1..waves).rev().enumerate() {
        let lag = outcome.column(t - 1);
        let expo = exposure(study.network(t - 1), &lag);
        columns[0].extend(outcome.column(t));
        columns[1].extend(lag);
        columns[2].extend(expo);
        for (k, cov) in covariates.iter().enumerate() {
            columns[3 + k].extend(cov.column(t));
        }
        for (k, (_, values)) in latent.iter().enumerate() {
            columns[3 + covariates.len() + k].extend(values.iter().copied());
        }
        node.extend(1..=n);
        period.extend(std::iter::repeat_n(block + 1, n));
    }
    Ok(InfluencePanel {
        names,
        columns,
        node,
        period,
    })
}

/// Regression design; the first column is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Design {
    pub fn with_intercept(
        rows: usize,
        regressors: Vec<(String, Vec<f64>)>,
    ) -> Result<Self, InfluenceError> {
        if let Some((name, _)) = regressors.iter().find(|(_, c)| c.len() != rows) {
            return Err(InfluenceError::DimensionMismatch(format!(
                "regressor {name:?} differs in length"
            )));
        }
        let mut names = vec![INTERCEPT.to_string()];
        let mut columns = vec![vec![1.0; rows]];
        for (name, col) in regressors {
            names.push(name);
            columns.push(col);
        }
        Ok(Self { names, columns })
    }

    pub fn rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows(), self.cols(), |i, k| self.columns[k][i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    pub std_error: f64,
    pub t_value: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceFit {
    pub coefficients: Vec<Coefficient>,
    pub r2: f64,
    pub adj_r2: f64,
    pub sigma: f64,
    pub df_resid: usize,
    pub n_obs: usize,
    pub rss: f64,
    /// `None` for an intercept-only model or a perfect fit.
    pub f_statistic: Option<f64>,
    pub f_p_value: Option<f64>,
    /// Adjustment columns removed because they were constant.
    #[serde(default)]
    pub dropped: Vec<String>,
}

impl InfluenceFit {
    pub fn coef(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    pub fn names(&self) -> Vec<&str> {
        self.coefficients.iter().map(|c| c.name.as_str()).collect()
    }

    /// Coefficient table in the usual regression-summary layout.
    pub fn table(&self) -> String {
        let width = self
            .coefficients
            .iter()
            .map(|c| c.name.len())
            .max()
            .unwrap_or(0)
            .max(11);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:width$} {:>10} {:>10} {:>8} {:>10}",
            "", "Estimate", "Std. Error", "t value", "Pr(>|t|)"
        );
        for c in &self.coefficients {
            let _ = writeln!(
                out,
                "{:width$} {:>10.5} {:>10.5} {:>8.3} {:>10}",
                c.name,
                c.estimate,
                c.std_error,
                c.t_value,
                format_p(c.p_value)
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "Residual standard error: {:.4} on {} degrees of freedom",
            self.sigma, self.df_resid
        );
        let _ = writeln!(
            out,
            "Multiple R-squared: {:.4}, Adjusted R-squared: {:.4}",
            self.r2, self.adj_r2
        );
        if let (Some(f), Some(p)) = (self.f_statistic, self.f_p_value) {
            let _ = writeln!(
                out,
                "F-statistic: {f:.2} on {} and {} DF, p-value: {}",
                self.coefficients.len() - 1,
                self.df_resid,
                format_p(p)
            );
        }
        for name in &self.dropped {
            let _ = writeln!(out, "(dropped constant column {name})");
        }
        out
    }
}

fn format_p(p: f64) -> String {
    if p < 1e-4 {
        format!("{p:.2e}")
    } else {
        format!("{p:.4}")
    }
}

/// Least squares by Householder QR. Standard errors come from
/// `σ²·(XᵀX)⁻¹ = σ²·R⁻¹R⁻ᵀ` with `σ² = RSS / (rows − cols)`; p-values are
/// two-sided under the t distribution with that many degrees of freedom.
pub fn ols_fit(y: &[f64], design: &Design) -> Result<InfluenceFit, InfluenceError> {
    let (rows, cols) = (design.rows(), design.cols());
    if y.len() != rows {
        return Err(InfluenceError::DimensionMismatch(format!(
            "{} outcomes for {rows} design rows",
            y.len()
        )));
    }
    if rows <= cols {
        return Err(InfluenceError::TooFewRows { rows, cols });
    }
    let x = design.matrix();
    let qr = x.clone().qr();
    let r = qr.r();
    for k in 0..cols {
        let norm = x.column(k).norm();
        if norm == 0.0 || r[(k, k)].abs() <= 1e-10 * norm {
            return Err(InfluenceError::RankDeficient(design.names[k].clone()));
        }
    }
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| InfluenceError::RankDeficient(design.names[cols - 1].clone()))?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(cols, cols))
        .ok_or_else(|| InfluenceError::RankDeficient(design.names[cols - 1].clone()))?;
    let xtx_inv = &r_inv * r_inv.transpose();

    let resid = &yv - &x * &beta;
    let rss = resid.norm_squared();
    let mean = yv.mean();
    let tss: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    let df = rows - cols;
    let sigma2 = rss / df as f64;
    let t_dist = StudentsT::new(0.0, 1.0, df as f64).expect("df ≥ 1");

    let coefficients = (0..cols)
        .map(|k| {
            let se = (sigma2 * xtx_inv[(k, k)]).sqrt();
            let t = beta[k] / se;
            Coefficient {
                name: design.names[k].clone(),
                estimate: beta[k],
                std_error: se,
                t_value: t,
                p_value: 2.0 * t_dist.sf(t.abs()),
            }
        })
        .collect();

    let r2 = if tss > 0.0 {
        (1.0 - rss / tss).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let adj_r2 = 1.0 - (1.0 - r2) * (rows - 1) as f64 / df as f64;
    let (f_statistic, f_p_value) = if cols > 1 && rss > 0.0 {
        let f = ((tss - rss) / (cols - 1) as f64) / sigma2;
        let p = FisherSnedecor::new((cols - 1) as f64, df as f64)
            .map(|d| d.sf(f))
            .unwrap_or(f64::NAN);
        (Some(f), Some(p))
    } else {
        (None, None)
    };
    Ok(InfluenceFit {
        coefficients,
        r2,
        adj_r2,
        sigma: sigma2.sqrt(),
        df_resid: df,
        n_obs: rows,
        rss,
        f_statistic,
        f_p_value,
        dropped: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.values[i][j])
    }

    pub fn table(&self) -> String {
        let width = self.names.iter().map(String::len).max().unwrap_or(0).max(7);
        let mut out = format!("{:width$}", "");
        for name in &self.names {
            let _ = write!(out, " {name:>width$}");
        }
        out.push('\n');
        for (name, row) in self.names.iter().zip(&self.values) {
            let _ = write!(out, "{name:width$}");
            for v in row {
                let _ = write!(out, " {v:>width$.4}");
            }
            out.push('\n');
        }
        out
    }
}

pub(crate) fn variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Pearson correlations among the named panel columns.
pub fn correlation_matrix(
    panel: &InfluencePanel,
    columns: &[&str],
) -> Result<CorrelationMatrix, InfluenceError> {
    if panel.rows() < 2 {
        return Err(InfluenceError::TooFewRows {
            rows: panel.rows(),
            cols: 1,
        });
    }
    let data = columns
        .iter()
        .map(|&name| {
            let col = panel.require(name)?;
            if variance(col) <= 0.0 {
                return Err(InfluenceError::ZeroVariance(name.to_string()));
            }
            Ok(col)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let k = columns.len();
    let mut values = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let r = pearson(data[i], data[j]);
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: columns.iter().map(|s| s.to_string()).collect(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum InfluenceModel {
    Naive,
    /// One set of positions per non-final wave.
    Adjusted(Vec<LatentPositions>),
}

/// Panel for the given model: latent columns are appended for the adjusted
/// model (ordered by wave) after checking there is one fit per non-final
/// wave.
pub fn model_panel(
    study: &StudyData,
    spec: &InfluenceSpec,
    model: &InfluenceModel,
) -> Result<InfluencePanel, InfluenceError> {
    let latent = match model {
        InfluenceModel::Naive => Vec::new(),
        InfluenceModel::Adjusted(fits) => {
            let mut fits: Vec<&LatentPositions> = fits.iter().collect();
            fits.sort_by_key(|f| f.wave);
            let waves: Vec<usize> = fits.iter().map(|f| f.wave).collect();
            let expected: Vec<usize> = (1..study.waves()).collect();
            if waves != expected {
                return Err(InfluenceError::Latent(format!(
                    "expected fits for waves {expected:?}, got {waves:?}"
                )));
            }
            fits.iter().flat_map(|f| f.columns()).collect()
        }
    };
    stack_panel(study, spec, &latent)
}

/// Exposure, stacking, and OLS in one step. Constant latent columns are
/// dropped with a warning before fitting.
pub fn fit_influence(
    study: &StudyData,
    spec: &InfluenceSpec,
    model: &InfluenceModel,
) -> Result<InfluenceFit, InfluenceError> {
    let panel = model_panel(study, spec, model)?;
    let outcome = panel.require(&spec.outcome)?.to_vec();
    let mut regressors = Vec::new();
    let mut dropped = Vec::new();
    let fixed = 3 + spec.covariates.len();
    let mut names = vec![spec.lag_label.clone(), spec.exposure_label.clone()];
    names.extend(spec.covariates.iter().cloned());
    for name in &names {
        regressors.push((name.clone(), panel.require(name)?.to_vec()));
    }
    for name in &panel.names()[fixed..] {
        let col = panel.require(name)?;
        if variance(col) <= 0.0 {
            log::warn!("dropping constant adjustment column {name}");
            dropped.push(name.clone());
        } else {
            regressors.push((name.clone(), col.to_vec()));
        }
    }
    let mut fit = ols_fit(
        &outcome,
        &Design::with_intercept(outcome.len(), regressors)?,
    )?;
    fit.dropped = dropped;
    Ok(fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{parse_adjacency, AttributePanel};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn exposure_is_alter_average() {
        let net = parse_adjacency("0 1 1\n0 0 0\n1 0 0", 1).unwrap();
        let e = exposure(&net, &[9.0, 1.0, 3.0]);
        assert_abs_diff_eq!(e[0], 2.0);
        assert_eq!(e[1], 0.0);
        assert_abs_diff_eq!(e[2], 9.0);
    }

    fn tiny_study() -> StudyData {
        let nets = vec![
            parse_adjacency("0 1 0\n0 0 1\n1 0 0", 1).unwrap(),
            parse_adjacency("0 0 1\n1 0 0\n0 1 0", 2).unwrap(),
        ];
        let y =
            AttributePanel::new("y", vec![vec![1.0, 2.0], vec![3.0, 5.0], vec![4.0, 4.0]]).unwrap();
        let x =
            AttributePanel::new("x", vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        StudyData::new(nets, vec![y, x]).unwrap()
    }

    #[test]
    fn stacking_two_waves() {
        let study = tiny_study();
        let spec = InfluenceSpec::new("y", vec!["x".into()]);
        let panel = stack_panel(&study, &spec, &[]).unwrap();
        assert_eq!(panel.rows(), 3);
        assert_eq!(panel.column("y").unwrap(), &[2.0, 5.0, 4.0]);
        assert_eq!(panel.column("lag_y").unwrap(), &[1.0, 3.0, 4.0]);
        // wave-1 network: 1→2, 2→3, 3→1 with wave-1 outcome.
        assert_eq!(panel.column("expo").unwrap(), &[3.0, 4.0, 1.0]);
        assert_eq!(panel.column("x").unwrap(), &[1.0, 0.0, 1.0]);
        assert_eq!(panel.node_ids(), &[1, 2, 3]);
        assert_eq!(panel.period_ids(), &[1, 1, 1]);

        let latent = vec![("latent_pos1".to_string(), vec![0.1, 0.2, 0.3])];
        let with = stack_panel(&study, &spec, &latent).unwrap();
        for name in panel.names() {
            assert_eq!(with.column(name), panel.column(name));
        }
        assert_eq!(with.column("latent_pos1").unwrap(), &[0.1, 0.2, 0.3]);
        assert!(panel
            .to_csv()
            .starts_with("y,lag_y,expo,x,node,period\n2,1,3,1,1,1\n"));
    }

    #[test]
    fn stacking_errors() {
        let one = StudyData::new(
            vec![parse_adjacency("0 1\n0 0", 1).unwrap()],
            vec![AttributePanel::new("y", vec![vec![1.0], vec![2.0]]).unwrap()],
        )
        .unwrap();
        let spec = InfluenceSpec::new("y", vec![]);
        assert!(matches!(
            stack_panel(&one, &spec, &[]),
            Err(InfluenceError::TooFewWaves(1))
        ));
        let study = tiny_study();
        let missing = InfluenceSpec::new("z", vec![]);
        assert!(matches!(
            stack_panel(&study, &missing, &[]),
            Err(InfluenceError::MissingAttribute(_))
        ));
    }

    #[test]
    fn perfect_line() {
        let design = Design::with_intercept(3, vec![("x".into(), vec![0.0, 1.0, 2.0])]).unwrap();
        let fit = ols_fit(&[1.0, 2.0, 3.0], &design).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0].estimate, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.coefficients[1].estimate, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.r2, 1.0, epsilon = 1e-12);
        assert_eq!(fit.df_resid, 1);
    }

    #[test]
    fn textbook_regression() {
        // y = 1 + 2x + e with e = (1,-1,-1,1): residuals are exactly e.
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let y = vec![2.0, 2.0, 4.0, 8.0];
        let design = Design::with_intercept(x.len(), vec![("x".into(), x)]).unwrap();
        let fit = ols_fit(&y, &design).unwrap();
        // Hand solution: slope = Sxy/Sxx = 10/5 = 2, intercept = 4 - 2*1.5 = 1.
        assert_abs_diff_eq!(fit.coefficients[1].estimate, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.coefficients[0].estimate, 1.0, epsilon = 1e-12);
        // RSS = 4, σ² = 2, se(slope) = sqrt(2/5).
        assert_abs_diff_eq!(fit.rss, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            fit.coefficients[1].std_error,
            (0.4f64).sqrt(),
            epsilon = 1e-12
        );
        // t = 2/sqrt(0.4) on 2 df: p = 1 - t/sqrt(2 + t²).
        let t: f64 = 2.0 / 0.4f64.sqrt();
        assert_abs_diff_eq!(
            fit.coefficients[1].p_value,
            1.0 - t / (2.0 + t * t).sqrt(),
            epsilon = 1e-10
        );
        // TSS = 24, R² = 1 - 4/24.
        assert_abs_diff_eq!(fit.r2, 5.0 / 6.0, epsilon = 1e-12);
        assert!(fit.table().contains("Residual standard error"));
    }

    #[test]
    fn intercept_only_fit_is_the_mean() {
        let design = Design::with_intercept(4, vec![]).unwrap();
        let fit = ols_fit(&[1.0, 2.0, 3.0, 6.0], &design).unwrap();
        assert_abs_diff_eq!(fit.coefficients[0].estimate, 3.0, epsilon = 1e-12);
        // sd = sqrt(14/3), se = sd/2.
        assert_abs_diff_eq!(
            fit.coefficients[0].std_error,
            (14.0f64 / 3.0).sqrt() / 2.0,
            epsilon = 1e-12
        );
        assert_eq!(fit.r2, 0.0);
        assert!(fit.f_statistic.is_none());
        let back: InfluenceFit =
            serde_json::from_str(&serde_json::to_string(&fit).unwrap()).unwrap();
        assert_eq!(back, fit);
        assert!(matches!(
            Design::with_intercept(3, vec![("a".into(), vec![1.0])]),
            Err(InfluenceError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn ols_errors() {
        let dup = Design::with_intercept(
            4,
            vec![
                ("a".into(), vec![1.0, 2.0, 4.0, 3.0]),
                ("b".into(), vec![1.0, 2.0, 4.0, 3.0]),
            ],
        )
        .unwrap();
        assert!(matches!(
            ols_fit(&[1.0, 0.0, 2.0, 5.0], &dup),
            Err(InfluenceError::RankDeficient(name)) if name == "b"
        ));
        let small = Design::with_intercept(2, vec![("a".into(), vec![1.0, 2.0])]).unwrap();
        assert!(matches!(
            ols_fit(&[1.0, 2.0], &small),
            Err(InfluenceError::TooFewRows { .. })
        ));
    }

    #[test]
    fn correlations() {
        let study = tiny_study();
        let spec = InfluenceSpec::new("y", vec!["x".into()]);
        let latent = vec![("neg".to_string(), vec![-2.0, -5.0, -4.0])];
        let panel = stack_panel(&study, &spec, &latent).unwrap();
        let cor = correlation_matrix(&panel, &["y", "neg", "lag_y"]).unwrap();
        assert_eq!(cor.get("y", "y"), Some(1.0));
        assert_abs_diff_eq!(cor.get("y", "neg").unwrap(), -1.0, epsilon = 1e-12);
        assert_eq!(cor.get("y", "lag_y"), cor.get("lag_y", "y"));
        let flat = vec![("c".to_string(), vec![1.0; 3])];
        let panel = stack_panel(&study, &spec, &flat).unwrap();
        assert!(matches!(
            correlation_matrix(&panel, &["y", "c"]),
            Err(InfluenceError::ZeroVariance(_))
        ));
    }

    fn chain_study(n: usize, waves: usize, seed: u64) -> StudyData {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let nets = (0..waves)
            .map(|w| {
                let mut net = Network::empty(n, w + 1).unwrap();
                for i in 0..n {
                    for j in 0..n {
                        net.set_tie(i, j, rng.random::<f64>() < 0.3);
                    }
                }
                net
            })
            .collect();
        let y: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..waves).map(|_| rng.random_range(1..=5) as f64).collect())
            .collect();
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..waves).map(|_| rng.random::<f64>()).collect())
            .collect();
        StudyData::new(
            nets,
            vec![
                AttributePanel::new("y", y).unwrap(),
                AttributePanel::new("x", x).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn constant_latent_columns_are_dropped() {
        let study = chain_study(12, 3, 4);
        let spec = InfluenceSpec::new("y", vec!["x".into()]);
        let naive = fit_influence(&study, &spec, &InfluenceModel::Naive).unwrap();
        let zeros = (1..3)
            .map(|wave| LatentPositions {
                wave,
                positions: vec![vec![0.0]; 12],
            })
            .collect();
        let adjusted = fit_influence(&study, &spec, &InfluenceModel::Adjusted(zeros)).unwrap();
        assert_eq!(adjusted.dropped, vec!["latent_pos1", "latent_pos2"]);
        assert_eq!(naive.names(), adjusted.names());
        for (a, b) in naive.coefficients.iter().zip(&adjusted.coefficients) {
            assert_abs_diff_eq!(a.estimate, b.estimate, epsilon = 1e-12);
        }
    }

    #[test]
    fn adjusted_needs_every_non_final_wave() {
        let study = chain_study(8, 3, 1);
        let spec = InfluenceSpec::new("y", vec![]);
        let only_one = vec![LatentPositions {
            wave: 1,
            positions: vec![vec![0.5]; 8],
        }];
        assert!(matches!(
            fit_influence(&study, &spec, &InfluenceModel::Adjusted(only_one)),
            Err(InfluenceError::Latent(_))
        ));
    }

    proptest! {
        #[test]
        fn exposure_within_alter_range(
            bits in proptest::collection::vec(any::<bool>(), 36),
            behavior in proptest::collection::vec(-5.0..5.0f64, 6),
        ) {
            let mut net = Network::empty(6, 1).unwrap();
            for i in 0..6 {
                for j in 0..6 {
                    net.set_tie(i, j, bits[i * 6 + j]);
                }
            }
            let e = exposure(&net, &behavior);
            for (i, &ei) in e.iter().enumerate() {
                let alters: Vec<f64> = (0..6).filter(|&j| net.tie(i, j)).map(|j| behavior[j]).collect();
                if alters.is_empty() {
                    prop_assert_eq!(ei, 0.0);
                } else {
                    let lo = alters.iter().cloned().fold(f64::INFINITY, f64::min);
                    let hi = alters.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    prop_assert!(ei >= lo - 1e-12 && ei <= hi + 1e-12);
                }
            }
        }

        #[test]
        fn residuals_are_orthogonal_and_extra_columns_never_hurt(seed in 0u64..500) {
            let study = chain_study(10, 3, seed);
            let spec = InfluenceSpec::new("y", vec!["x".into()]);
            let panel = stack_panel(&study, &spec, &[]).unwrap();
            let naive = fit_influence(&study, &spec, &InfluenceModel::Naive);
            let extra: Vec<LatentPositions> = (1..3).map(|wave| LatentPositions {
                wave,
                positions: (0..10).map(|i| vec![((i * 7 + wave * 3) % 5) as f64]).collect(),
            }).collect();
            let adjusted = fit_influence(&study, &spec, &InfluenceModel::Adjusted(extra));
            if let (Ok(naive), Ok(adjusted)) = (naive, adjusted) {
                prop_assert!(adjusted.rss <= naive.rss * (1.0 + 1e-12) + 1e-12);
                let y = panel.column("y").unwrap();
                let cols: Vec<&[f64]> = ["lag_y", "expo", "x"].iter().map(|c| panel.column(c).unwrap()).collect();
                let fitted: Vec<f64> = (0..y.len()).map(|r| {
                    naive.coefficients[0].estimate
                        + cols.iter().enumerate().map(|(k, c)| naive.coefficients[k + 1].estimate * c[r]).sum::<f64>()
                }).collect();
                let resid: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
                let scale: f64 = y.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
                let dot0: f64 = resid.iter().sum();
                prop_assert!(dot0.abs() < 1e-8 * scale);
                for c in &cols {
                    let dot: f64 = resid.iter().zip(c.iter()).map(|(r, x)| r * x).sum();
                    prop_assert!(dot.abs() < 1e-8 * scale * 10.0);
                }
            }
        }
    }
}

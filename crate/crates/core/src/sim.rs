//! Longitudinal network/behavior generator with a time-invariant latent
//! trait that drives both tie formation (latent homophily) and behavior.
//!
//! Ties: `logit P(i→j) = sel_alpha + sel_homophily_obs·|X_i − X_j|
//!                       − sel_homophily_latent·|c_i − c_j|`, drawn
//! independently per dyad and per wave.
//!
//! Behavior: `Y_t = b0 + b1·Y_{t−1} + b2·expo(Z_{t−1}, Y_{t−1}) + bx·X + bc·c + e`,
//! with `e ~ Normal(0, noise_sd²)`. Wave-1 behavior is `bc·c + e`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::influence::exposure;
use crate::io::{AttributePanel, IoError, Network, StudyData};

pub const BEHAVIOR: &str = "behavior";
pub const COVARIATE: &str = "covariate";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] IoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub n: usize,
    pub waves: usize,
    pub trait_sd: f64,
    pub sel_alpha: f64,
    pub sel_homophily_obs: f64,
    pub sel_homophily_latent: f64,
    pub beh_b0: f64,
    pub beh_b1: f64,
    pub beh_b2: f64,
    pub beh_bx: f64,
    pub beh_bc: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 50,
            waves: 3,
            trait_sd: 1.0,
            sel_alpha: 0.0,
            sel_homophily_obs: -0.5,
            sel_homophily_latent: 1.0,
            beh_b0: 0.0,
            beh_b1: 0.4,
            beh_b2: 0.3,
            beh_bx: 0.3,
            beh_bc: 0.5,
            noise_sd: 0.5,
            seed: 1,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.n < 2 {
            return Err(SimError::InvalidConfig("n must be ≥ 2".into()));
        }
        if self.waves < 2 {
            return Err(SimError::InvalidConfig("waves must be ≥ 2".into()));
        }
        if !(self.trait_sd >= 0.0 && self.noise_sd >= 0.0) {
            return Err(SimError::InvalidConfig(
                "standard deviations must be ≥ 0".into(),
            ));
        }
        if self.sel_homophily_latent.is_nan() || self.sel_homophily_latent < 0.0 {
            return Err(SimError::InvalidConfig(
                "sel_homophily_latent must be ≥ 0".into(),
            ));
        }
        let coefs = [
            self.sel_alpha,
            self.sel_homophily_obs,
            self.beh_b0,
            self.beh_b1,
            self.beh_b2,
            self.beh_bx,
            self.beh_bc,
        ];
        if coefs.iter().any(|v| !v.is_finite()) {
            return Err(SimError::InvalidConfig(
                "coefficients must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn behavior_params(&self) -> BehaviorParams {
        BehaviorParams {
            b0: self.beh_b0,
            b1: self.beh_b1,
            b2: self.beh_b2,
            bx: self.beh_bx,
            bc: self.beh_bc,
            noise_sd: self.noise_sd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorParams {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub bx: f64,
    pub bc: f64,
    pub noise_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub study: StudyData,
    pub traits: Vec<f64>,
    pub true_params: BehaviorParams,
}

/// JSON sidecar written next to simulated data files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSidecar {
    pub config: SimConfig,
    pub traits: Vec<f64>,
    pub true_params: BehaviorParams,
}

impl SimOutput {
    pub fn network_file(wave: usize) -> String {
        format!("network{wave}.dat")
    }

    pub fn attribute_file(name: &str) -> String {
        format!("{name}.dat")
    }

    /// `(file name, contents)` pairs in the plain-text formats `io` reads,
    /// plus `sim.json`.
    pub fn files(&self, config: &SimConfig) -> Vec<(String, String)> {
        let mut files: Vec<(String, String)> = self
            .study
            .networks()
            .iter()
            .map(|net| (Self::network_file(net.wave()), net.to_text()))
            .collect();
        for panel in self.study.attributes() {
            files.push((Self::attribute_file(panel.name()), panel.to_text()));
        }
        let sidecar = SimSidecar {
            config: *config,
            traits: self.traits.clone(),
            true_params: self.true_params,
        };
        files.push((
            "sim.json".into(),
            serde_json::to_string_pretty(&sidecar).expect("sidecar serializes") + "\n",
        ));
        files
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn draw_traits(n: usize, trait_sd: f64, rng: &mut impl Rng) -> Vec<f64> {
    (0..n).map(|_| trait_sd * normal(rng)).collect()
}

pub fn tie_log_odds(cfg: &SimConfig, traits: &[f64], covariate: &[f64], i: usize, j: usize) -> f64 {
    cfg.sel_alpha + cfg.sel_homophily_obs * (covariate[i] - covariate[j]).abs()
        - cfg.sel_homophily_latent * (traits[i] - traits[j]).abs()
}

pub fn simulate_network(
    traits: &[f64],
    covariate: &[f64],
    cfg: &SimConfig,
    wave: usize,
    rng: &mut impl Rng,
) -> Result<Network, SimError> {
    let n = traits.len();
    if covariate.len() != n {
        return Err(SimError::InvalidConfig(format!(
            "{} covariate values for {n} traits",
            covariate.len()
        )));
    }
    let mut net = Network::empty(n, wave)?;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let p = 1.0 / (1.0 + (-tie_log_odds(cfg, traits, covariate, i, j)).exp());
            let u: f64 = rng.random();
            net.set_tie(i, j, u < p);
        }
    }
    Ok(net)
}

pub fn simulate_behavior(
    prev: &[f64],
    net: &Network,
    traits: &[f64],
    covariate: &[f64],
    params: &BehaviorParams,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let expo = exposure(net, prev);
    (0..prev.len())
        .map(|i| {
            params.b0
                + params.b1 * prev[i]
                + params.b2 * expo[i]
                + params.bx * covariate[i]
                + params.bc * traits[i]
                + params.noise_sd * normal(rng)
        })
        .collect()
}

/// Draws traits, a fixed covariate, wave-1 behavior, then per wave a fresh
/// network and (from wave 2) updated behavior on the previous wave's network.
pub fn simulate_panel(cfg: &SimConfig) -> Result<SimOutput, SimError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n;
    let params = cfg.behavior_params();
    let traits = draw_traits(n, cfg.trait_sd, &mut rng);
    let covariate: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
    let mut behavior: Vec<Vec<f64>> = vec![traits
        .iter()
        .map(|&c| params.bc * c + params.noise_sd * normal(&mut rng))
        .collect()];
    let mut networks: Vec<Network> = Vec::with_capacity(cfg.waves);
    for wave in 1..=cfg.waves {
        if wave >= 2 {
            let next = simulate_behavior(
                &behavior[wave - 2],
                &networks[wave - 2],
                &traits,
                &covariate,
                &params,
                &mut rng,
            );
            behavior.push(next);
        }
        networks.push(simulate_network(&traits, &covariate, cfg, wave, &mut rng)?);
    }
    let behavior = AttributePanel::from_columns(BEHAVIOR, &behavior)?;
    let covariate = AttributePanel::from_columns(COVARIATE, &vec![covariate; cfg.waves])?;
    let study = StudyData::new(networks, vec![behavior, covariate])?;
    Ok(SimOutput {
        study,
        traits,
        true_params: params,
    })
}

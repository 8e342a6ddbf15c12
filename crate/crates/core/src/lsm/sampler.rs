use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::io::Network;

use super::likelihood::{covariate_term, distance, dyad_log_lik, pair_log_lik};
use super::{
    align_draws, center_columns, initialize_positions, point_estimates, Acceptance,
    DyadicCovariate, LsmError, LsmFit, LsmParams, LsmSpec, McmcControl, PRIOR_SD_COEF,
    PRIOR_SD_POSITION,
};

fn log_normal_prior(x: f64, sd: f64) -> f64 {
    -0.5 * (x / sd) * (x / sd)
}

/// Increment `scale · L·z` for the coefficient vector (alpha, beta...),
/// `L` lower triangular.
struct CoefProposal {
    scale: f64,
    shape: DMatrix<f64>,
}

impl CoefProposal {
    fn new(p: usize, scale: f64) -> Self {
        Self {
            scale,
            shape: DMatrix::identity(p, p),
        }
    }

    /// Writes one increment into `out`, using `z` as scratch.
    fn draw(&self, rng: &mut ChaCha8Rng, z: &mut [f64], out: &mut [f64]) {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for (r, o) in out.iter_mut().enumerate() {
            *o = self.scale * (0..=r).map(|c| self.shape[(r, c)] * z[c]).sum::<f64>();
        }
    }

    /// Reshapes to the Cholesky factor of the sample covariance of
    /// `history` with the usual `2.38/sqrt(p)` scale. Leaves the proposal
    /// unchanged if the covariance is not positive definite.
    fn reshape(&mut self, history: &[Vec<f64>]) {
        let p = self.shape.nrows();
        let m = history.len() as f64;
        let mean: Vec<f64> = (0..p)
            .map(|k| history.iter().map(|h| h[k]).sum::<f64>() / m)
            .collect();
        let cov = DMatrix::from_fn(p, p, |a, b| {
            history
                .iter()
                .map(|h| (h[a] - mean[a]) * (h[b] - mean[b]))
                .sum::<f64>()
                / (m - 1.0)
        });
        if let Some(chol) = cov.cholesky() {
            self.shape = chol.l();
            self.scale = 2.38 / (p as f64).sqrt();
        }
    }
}

const ADAPT_BATCH: usize = 50;
const MIN_ADAPT_HISTORY: usize = 100;

struct Chain<'a> {
    net: &'a Network,
    spec: &'a LsmSpec,
    n: usize,
    /// All covariates symmetric, so `eta[i][j] == eta[j][i]`.
    symmetric: bool,
    dim: usize,
    alpha: f64,
    beta: Vec<f64>,
    /// Row-major n×dim.
    pos: Vec<f64>,
    /// `alpha + beta·x_ij`, row-major n×n.
    offset: Vec<f64>,
    /// Current latent distances, row-major n×n.
    dist: Vec<f64>,
    /// Current per-dyad log-likelihood, row-major n×n, zero on the diagonal.
    dyad_ll: Vec<f64>,
    /// Scratch for proposals.
    out_ll: Vec<f64>,
    in_ll: Vec<f64>,
    prop_dist: Vec<f64>,
    coef_ll: Vec<f64>,
    beta_prop: Vec<f64>,
    step: Vec<f64>,
    z: Vec<f64>,
}

impl<'a> Chain<'a> {
    fn new(net: &'a Network, spec: &'a LsmSpec, init: LsmParams) -> Self {
        let n = net.n();
        let dim = spec.dim;
        let pos = init.positions.iter().flatten().copied().collect();
        let p = init.beta.len();
        let mut chain = Self {
            net,
            spec,
            n,
            symmetric: spec.covariates.iter().all(DyadicCovariate::is_symmetric),
            dim,
            alpha: init.alpha,
            beta: init.beta,
            pos,
            offset: vec![0.0; n * n],
            dist: vec![0.0; n * n],
            dyad_ll: vec![0.0; n * n],
            out_ll: vec![0.0; n],
            in_ll: vec![0.0; n],
            prop_dist: vec![0.0; n],
            coef_ll: vec![0.0; n * n],
            beta_prop: vec![0.0; p],
            step: vec![0.0; p + 1],
            z: vec![0.0; p + 1],
        };
        chain.refresh_offset();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let d = distance(chain.position(i), chain.position(j));
                    chain.dist[i * n + j] = d;
                    chain.dyad_ll[i * n + j] =
                        dyad_log_lik(net.tie(i, j), chain.offset[i * n + j] - d);
                }
            }
        }
        chain
    }

    fn position(&self, i: usize) -> &[f64] {
        &self.pos[i * self.dim..(i + 1) * self.dim]
    }

    fn refresh_offset(&mut self) {
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    self.offset[i * self.n + j] =
                        self.alpha + covariate_term(self.spec, &self.beta, i, j);
                }
            }
        }
    }

    fn current_log_lik(&self) -> f64 {
        self.dyad_ll.iter().sum()
    }

    /// Log-likelihood of all dyads involving node i with i placed at `at`;
    /// per-dyad terms are left in the scratch buffers.
    fn node_log_lik(&mut self, i: usize, at: &[f64]) -> f64 {
        let n = self.n;
        let mut total = 0.0;
        for j in 0..n {
            if j == i {
                continue;
            }
            let d = distance(at, &self.pos[j * self.dim..(j + 1) * self.dim]);
            let (out, inn) = if self.symmetric {
                pair_log_lik(
                    self.net.tie(i, j),
                    self.net.tie(j, i),
                    self.offset[i * n + j] - d,
                )
            } else {
                (
                    dyad_log_lik(self.net.tie(i, j), self.offset[i * n + j] - d),
                    dyad_log_lik(self.net.tie(j, i), self.offset[j * n + i] - d),
                )
            };
            self.prop_dist[j] = d;
            self.out_ll[j] = out;
            self.in_ll[j] = inn;
            total += out + inn;
        }
        total
    }

    fn cached_node_log_lik(&self, i: usize) -> f64 {
        let n = self.n;
        (0..n)
            .filter(|&j| j != i)
            .map(|j| self.dyad_ll[i * n + j] + self.dyad_ll[j * n + i])
            .sum()
    }

    fn position_prior(at: &[f64]) -> f64 {
        at.iter()
            .map(|&v| log_normal_prior(v, PRIOR_SD_POSITION))
            .sum()
    }

    fn coef_prior(alpha: f64, beta: &[f64]) -> f64 {
        log_normal_prior(alpha, PRIOR_SD_COEF)
            + beta
                .iter()
                .map(|&b| log_normal_prior(b, PRIOR_SD_COEF))
                .sum::<f64>()
    }

    /// One Metropolis sweep over node positions; returns accepted moves.
    fn update_positions(&mut self, rng: &mut ChaCha8Rng, step: f64) -> usize {
        let n = self.n;
        let mut accepted = 0;
        let mut proposal = vec![0.0; self.dim];
        for i in 0..n {
            let current = self.position(i);
            for (p, c) in proposal.iter_mut().zip(current) {
                let z: f64 = rng.sample(StandardNormal);
                *p = c + step * z;
            }
            let current_prior = Self::position_prior(current);
            let log_ratio = self.node_log_lik(i, &proposal) + Self::position_prior(&proposal)
                - self.cached_node_log_lik(i)
                - current_prior;
            let u: f64 = rng.random();
            if u.ln() < log_ratio {
                self.pos[i * self.dim..(i + 1) * self.dim].copy_from_slice(&proposal);
                for j in (0..n).filter(|&j| j != i) {
                    self.dist[i * n + j] = self.prop_dist[j];
                    self.dist[j * n + i] = self.prop_dist[j];
                    self.dyad_ll[i * n + j] = self.out_ll[j];
                    self.dyad_ll[j * n + i] = self.in_ll[j];
                }
                accepted += 1;
            }
        }
        accepted
    }

    /// Joint Gaussian random-walk move on (alpha, beta) with increment
    /// `proposal.draw`. Returns whether it was accepted and the
    /// log-likelihood of the resulting state.
    fn update_coefficients(
        &mut self,
        rng: &mut ChaCha8Rng,
        proposal: &CoefProposal,
    ) -> (bool, f64) {
        let n = self.n;
        let mut step = std::mem::take(&mut self.step);
        let mut z = std::mem::take(&mut self.z);
        proposal.draw(rng, &mut z, &mut step);
        self.z = z;
        let alpha = self.alpha + step[0];
        let mut beta = std::mem::take(&mut self.beta_prop);
        for ((b, cur), s) in beta.iter_mut().zip(&self.beta).zip(&step[1..]) {
            *b = cur + s;
        }
        self.step = step;
        let current_ll = self.current_log_lik();
        let mut proposal_ll = 0.0;
        if self.symmetric {
            for i in 0..n {
                for j in 0..i {
                    let eta = alpha + covariate_term(self.spec, &beta, i, j) - self.dist[i * n + j];
                    let (ij, ji) = pair_log_lik(self.net.tie(i, j), self.net.tie(j, i), eta);
                    self.coef_ll[i * n + j] = ij;
                    self.coef_ll[j * n + i] = ji;
                    proposal_ll += ij + ji;
                }
            }
        } else {
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let eta =
                            alpha + covariate_term(self.spec, &beta, i, j) - self.dist[i * n + j];
                        let ll = dyad_log_lik(self.net.tie(i, j), eta);
                        self.coef_ll[i * n + j] = ll;
                        proposal_ll += ll;
                    }
                }
            }
        }
        let log_ratio = proposal_ll + Self::coef_prior(alpha, &beta)
            - current_ll
            - Self::coef_prior(self.alpha, &self.beta);
        let u: f64 = rng.random();
        if u.ln() < log_ratio {
            self.alpha = alpha;
            std::mem::swap(&mut self.beta, &mut beta);
            self.beta_prop = beta;
            self.refresh_offset();
            std::mem::swap(&mut self.dyad_ll, &mut self.coef_ll);
            (true, proposal_ll)
        } else {
            self.beta_prop = beta;
            (false, current_ll)
        }
    }

    fn snapshot(&self) -> LsmParams {
        LsmParams {
            alpha: self.alpha,
            beta: self.beta.clone(),
            positions: self.pos.chunks(self.dim).map(<[f64]>::to_vec).collect(),
        }
    }
}

/// Starting intercept: the log-odds of the observed density plus the mean
/// latent distance, so the chain starts near the right tie rate.
fn initial_alpha(net: &Network, positions: &[Vec<f64>]) -> f64 {
    let n = net.n();
    let dyads = (n * (n - 1)) as f64;
    let density = ((net.tie_count() as f64 + 0.5) / (dyads + 1.0)).clamp(1e-3, 1.0 - 1e-3);
    let mut mean_dist = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                mean_dist += distance(&positions[i], &positions[j]);
            }
        }
    }
    (density / (1.0 - density)).ln() + mean_dist / dyads
}

/// Random-walk Metropolis-Hastings for the latent-distance model.
///
/// Each iteration proposes every node's position in turn (Gaussian step with
/// scale `pos_step / sqrt(n)` per coordinate), then proposes the intercept
/// and covariate coefficients jointly (initial scale `coef_step`). Positions
/// start at the classical MDS configuration of the geodesic distances.
///
/// With `adapt`, the coefficient proposal is tuned during burn-in only: its
/// scale follows the batch acceptance rate toward 0.44 (intercept only) or
/// 0.234, and at mid burn-in its shape becomes the Cholesky factor of the
/// covariance of the preceding quarter's states. The kernel is fixed after
/// burn-in, so the retained chain is plain random-walk MH.
///
/// After `burnin` iterations every `interval`-th state is retained until
/// `sample_size` draws exist; the draws are aligned before the point estimate
/// is formed. Acceptance rates cover the post-burn-in iterations.
pub fn mcmc_sample(
    net: &Network,
    spec: &LsmSpec,
    control: &McmcControl,
) -> Result<LsmFit, LsmError> {
    control.validate()?;
    spec.validate(net.n())?;
    let n = net.n();
    let mut positions = initialize_positions(net, spec.dim);
    center_columns(&mut positions);
    let init = LsmParams {
        alpha: initial_alpha(net, &positions),
        beta: vec![0.0; spec.covariates.len()],
        positions,
    };
    let mut chain = Chain::new(net, spec, init);
    if !chain.current_log_lik().is_finite() {
        return Err(LsmError::NonFiniteLikelihood);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(control.seed);
    let pos_step = control.pos_step / (n as f64).sqrt();
    let mut draws = Vec::with_capacity(control.sample_size);
    let mut trace = Vec::with_capacity(control.sample_size);
    let (mut pos_accepted, mut coef_accepted) = (0usize, 0usize);
    let total = control.iterations();

    let p = 1 + spec.covariates.len();
    let mut proposal = CoefProposal::new(p, control.coef_step);
    let target = if p == 1 { 0.44 } else { 0.234 };
    let half = control.burnin / 2;
    let mut batch_accepted = 0usize;
    let mut history = Vec::new();

    for t in 1..=total {
        let sampling = t > control.burnin;
        if !control.freeze_positions {
            let accepted = chain.update_positions(&mut rng, pos_step);
            if sampling {
                pos_accepted += accepted;
            }
        }
        let (accepted, ll) = chain.update_coefficients(&mut rng, &proposal);
        if sampling {
            coef_accepted += usize::from(accepted);
            if (t - control.burnin).is_multiple_of(control.interval) {
                draws.push(chain.snapshot());
                trace.push(ll);
            }
        } else if control.adapt {
            batch_accepted += usize::from(accepted);
            if t > control.burnin / 4 && t <= half {
                let mut coefs = vec![chain.alpha];
                coefs.extend(&chain.beta);
                history.push(coefs);
            }
            if t % ADAPT_BATCH == 0 {
                let rate = batch_accepted as f64 / ADAPT_BATCH as f64;
                proposal.scale = (proposal.scale * (2.0 * (rate - target)).exp()).clamp(1e-8, 1e3);
                batch_accepted = 0;
            }
            if t == half && history.len() >= MIN_ADAPT_HISTORY {
                proposal.reshape(&history);
                history = Vec::new();
            }
        }
    }
    log::debug!(
        "coefficient proposal scale after burn-in: {}",
        proposal.scale
    );

    let kept = total - control.burnin;
    let acceptance = Acceptance {
        positions: (!control.freeze_positions).then(|| pos_accepted as f64 / (kept * n) as f64),
        coefficients: coef_accepted as f64 / kept as f64,
    };
    // Frozen positions are already centered and identical across draws.
    let draws = if control.freeze_positions {
        draws
    } else {
        align_draws(draws)
    };
    let point = point_estimates(&draws)?;
    Ok(LsmFit {
        wave: net.wave(),
        labels: spec.labels(),
        draws,
        acceptance,
        point,
        loglik_trace: trace,
        control: *control,
    })
}

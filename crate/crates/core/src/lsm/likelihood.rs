use crate::io::Network;

use super::{LsmError, LsmParams, LsmSpec};

/// `ln(1 + e^x)` without overflow; absolute error below 1e-15.
#[inline]
pub fn softplus(x: f64) -> f64 {
    // `ln` beats `ln_1p` here and its absolute error is all a sum of
    // log-likelihood terms needs.
    let tail = (1.0 + (-x.abs()).exp()).ln();
    x.max(0.0) + tail
}

/// Bernoulli log-likelihood of one dyad with log-odds `eta`.
#[inline]
pub fn dyad_log_lik(tie: bool, eta: f64) -> f64 {
    if tie {
        eta - softplus(eta)
    } else {
        -softplus(eta)
    }
}

/// `(dyad_log_lik(tie_ij, eta), dyad_log_lik(tie_ji, eta))` with one softplus.
#[inline]
pub fn pair_log_lik(tie_ij: bool, tie_ji: bool, eta: f64) -> (f64, f64) {
    let sp = softplus(eta);
    let ll = |tie: bool| if tie { eta - sp } else { -sp };
    (ll(tie_ij), ll(tie_ji))
}

#[inline]
pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    if a.len() == 1 {
        return (a[0] - b[0]).abs();
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Covariate part of the log-odds, `beta·x_ij`.
#[inline]
pub(crate) fn covariate_term(spec: &LsmSpec, beta: &[f64], i: usize, j: usize) -> f64 {
    spec.covariates
        .iter()
        .zip(beta)
        .map(|(c, b)| b * c.get(i, j))
        .sum()
}

/// Sum over ordered dyads i≠j of the tie log-likelihood.
pub fn log_likelihood(net: &Network, spec: &LsmSpec, params: &LsmParams) -> Result<f64, LsmError> {
    params.validate(net, spec)?;
    let n = net.n();
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let eta = params.alpha + covariate_term(spec, &params.beta, i, j)
                - distance(&params.positions[i], &params.positions[j]);
            total += dyad_log_lik(net.tie(i, j), eta);
        }
    }
    Ok(total)
}

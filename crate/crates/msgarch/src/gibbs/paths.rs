//! Gibbs block 5: hidden regime paths via forward filtering backward
//! sampling on the collapsed auxiliary model, used as an independence MH
//! proposal against the exact path-dependent likelihood.
//!
//! The auxiliary model replaces the path-dependent conditional variance with
//! its expectation given the filtered one-step-back posterior reweighted by
//! the transition into the target state (and collapses the conditional mean
//! the same way), which makes the filter exact for the auxiliary model and
//! the proposal density available in closed form.

use rand_chacha::ChaCha8Rng;

use crate::dist::normal_logpdf;
use crate::model::{
    complete_loglik_with_init, HiddenPath, RegimeParams, TransitionMatrix,
};
use crate::scalar::Scalar;

use super::SamplerError;

/// Filtered and predicted regime probabilities of the auxiliary model,
/// stored per time step (row-major T x K).
pub struct ForwardFilter<S> {
    pub filt: Vec<S>,
    pub pred: Vec<S>,
    n_regimes: usize,
}

impl<S: Scalar> ForwardFilter<S> {
    pub fn filtered(&self, t: usize) -> &[S] {
        &self.filt[t * self.n_regimes..(t + 1) * self.n_regimes]
    }

    pub fn predicted(&self, t: usize) -> &[S] {
        &self.pred[t * self.n_regimes..(t + 1) * self.n_regimes]
    }
}

/// Forward pass of the collapsed auxiliary model.
pub fn forward_filter<S: Scalar>(
    y: &[S],
    params: &RegimeParams<S>,
    trans: &TransitionMatrix<S>,
    init_probs: &[S],
    sigma0_sq: S,
) -> Result<ForwardFilter<S>, SamplerError> {
    let k = params.n_regimes();
    let t_len = y.len();
    let mut filt = vec![S::zero(); t_len * k];
    let mut pred = vec![S::zero(); t_len * k];
    // Regime-conditional variances of the previous step (h^2_{l, t-1}).
    let mut h_prev = vec![S::zero(); k];
    let mut h_cur = vec![S::zero(); k];
    for t in 0..t_len {
        // Prediction and collapsed emission variances.
        for kk in 0..k {
            if t == 0 {
                pred[kk] = init_probs[kk];
                h_cur[kk] = params.gamma[kk] + params.beta[kk] * sigma0_sq;
            } else {
                let prev_filt = &filt[(t - 1) * k..t * k];
                let mut p_sum = S::zero();
                let mut rho_norm = S::zero();
                let mut mu_coll = S::zero();
                let mut var_coll = S::zero();
                for l in 0..k {
                    let p_lk = trans.prob(l, kk);
                    p_sum += p_lk * prev_filt[l];
                    let rho = p_lk * prev_filt[l];
                    rho_norm += rho;
                    mu_coll += rho * params.mu[l];
                    var_coll += rho * h_prev[l];
                }
                pred[t * k + kk] = p_sum;
                if rho_norm > S::zero() {
                    mu_coll /= rho_norm;
                    var_coll /= rho_norm;
                } else {
                    // Unreachable state: collapse over the filter instead.
                    mu_coll = (0..k).map(|l| prev_filt[l] * params.mu[l]).sum();
                    var_coll = (0..k).map(|l| prev_filt[l] * h_prev[l]).sum();
                }
                let eps = y[t - 1] - mu_coll;
                h_cur[kk] =
                    params.gamma[kk] + params.alpha[kk] * eps * eps + params.beta[kk] * var_coll;
            }
        }
        // Filtering with log emissions, rescaled per step.
        let mut log_emit = vec![S::zero(); k];
        let mut max_log = S::neg_infinity();
        for kk in 0..k {
            let le = normal_logpdf(y[t], params.mu[kk], h_cur[kk].sqrt());
            log_emit[kk] = le;
            if le > max_log {
                max_log = le;
            }
        }
        let mut total = S::zero();
        for kk in 0..k {
            let v = pred[t * k + kk] * (log_emit[kk] - max_log).exp();
            filt[t * k + kk] = v;
            total += v;
        }
        if !(total > S::zero()) || !total.is_finite() {
            return Err(SamplerError::FilterUnderflow { t });
        }
        for kk in 0..k {
            filt[t * k + kk] /= total;
        }
        h_prev.copy_from_slice(&h_cur);
    }
    Ok(ForwardFilter { filt, pred, n_regimes: k })
}

/// Backward sampling pass; returns the sampled path and its log proposal
/// density under the filter.
pub fn backward_sample<S: Scalar>(
    ff: &ForwardFilter<S>,
    trans: &TransitionMatrix<S>,
    rng: &mut ChaCha8Rng,
) -> (HiddenPath, S) {
    let k = ff.n_regimes;
    let t_len = ff.filt.len() / k;
    let mut states = vec![0usize; t_len];
    let mut log_q = S::zero();
    let last = ff.filtered(t_len - 1);
    let s_last = crate::dgp::sample_categorical(last, rng);
    states[t_len - 1] = s_last;
    log_q += last[s_last].ln();
    for t in (0..t_len - 1).rev() {
        let filt_t = ff.filtered(t);
        let next = states[t + 1];
        let mut probs: Vec<S> = (0..k).map(|l| trans.prob(l, next) * filt_t[l]).collect();
        let total: S = probs.iter().copied().sum();
        for p in probs.iter_mut() {
            *p /= total;
        }
        let s = crate::dgp::sample_categorical(&probs, rng);
        states[t] = s;
        log_q += probs[s].ln();
    }
    (HiddenPath::new(states), log_q)
}

/// Log density the backward sampler assigns to an arbitrary path.
pub fn path_log_density<S: Scalar>(
    ff: &ForwardFilter<S>,
    trans: &TransitionMatrix<S>,
    path: &HiddenPath,
) -> S {
    let k = ff.n_regimes;
    let t_len = path.len();
    let mut log_q = ff.filtered(t_len - 1)[path.states[t_len - 1]].ln();
    for t in (0..t_len - 1).rev() {
        let filt_t = ff.filtered(t);
        let next = path.states[t + 1];
        let total: S = (0..k).map(|l| trans.prob(l, next) * filt_t[l]).sum();
        log_q += (trans.prob(path.states[t], next) * filt_t[path.states[t]] / total).ln();
    }
    log_q
}

/// One MH path update. Returns whether the proposed path was accepted.
#[allow(clippy::too_many_arguments)]
pub fn update_hidden_path<S: Scalar>(
    y: &[S],
    params: &RegimeParams<S>,
    trans: &TransitionMatrix<S>,
    path: &mut HiddenPath,
    sigma0_sq: S,
    init_probs: &[S],
    rng: &mut ChaCha8Rng,
) -> Result<bool, SamplerError> {
    let ff = forward_filter(y, params, trans, init_probs, sigma0_sq)?;
    let (proposal, log_q_new) = backward_sample(&ff, trans, rng);
    let log_q_old = path_log_density(&ff, trans, path);
    let ll_new = match complete_loglik_with_init(y, params, trans, &proposal, init_probs, sigma0_sq)
    {
        Ok(v) => v,
        Err(_) => return Ok(false),
    };
    let ll_old = complete_loglik_with_init(y, params, trans, path, init_probs, sigma0_sq)
        .map_err(SamplerError::Model)?;
    let log_ratio = ll_new + log_q_old - ll_old - log_q_new;
    if log_ratio.is_nan() {
        return Ok(false);
    }
    let u = S::sample_open01(rng);
    if u.ln() < log_ratio {
        *path = proposal;
        Ok(true)
    } else {
        Ok(false)
    }
}

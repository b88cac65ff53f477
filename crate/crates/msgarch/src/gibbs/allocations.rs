//! Gibbs block 6: mixture allocations. Each (unit, regime) pair draws its
//! component from the slice-restricted candidate set with weights given by
//! the first-stage density of the unit's parameters at each atom (divided by
//! the ordering normalization in exact mode).

use rand_chacha::ChaCha8Rng;

use crate::dist::{normal_logpdf, scaled_beta_logpdf};
use crate::model::{Hyperparameters, RegimeParams};
use crate::pyp::Atom;
use crate::scalar::Scalar;

use super::atoms::ordering_log_prob;
use super::state::{SliceState, StickState};
use super::SamplerError;

/// Log first-stage density of a unit's regime-k parameters at one atom.
pub fn allocation_log_weight<S: Scalar>(
    mu: S,
    gamma: S,
    alpha: S,
    beta: S,
    atom: &Atom<S>,
    hp: &Hyperparameters<S>,
) -> S {
    normal_logpdf(mu, atom.mu, hp.s)
        + scaled_beta_logpdf(gamma, atom.gamma, hp.r, hp.a)
        + scaled_beta_logpdf(alpha, atom.alpha, hp.r, S::one())
        + scaled_beta_logpdf(beta, atom.beta, hp.r, S::one())
}

pub fn update_allocations<S: Scalar>(
    slices: &mut SliceState<S>,
    sticks: &[StickState<S>],
    atoms: &[Vec<Atom<S>>],
    params: &[RegimeParams<S>],
    hp: &Hyperparameters<S>,
    exact: bool,
    unit_rngs: &mut [ChaCha8Rng],
) -> Result<(), SamplerError> {
    let k_total = hp.n_regimes;
    if exact && k_total > 2 {
        return Err(SamplerError::ExactModeUnsupported(k_total));
    }
    let n_units = slices.n_units();
    for i in 0..n_units {
        for k in 0..k_total {
            let u = slices.u(i, k);
            let mut candidates: Vec<usize> = Vec::new();
            let mut log_w: Vec<S> = Vec::new();
            for (h, &wh) in sticks[k].w.iter().enumerate() {
                if wh > u {
                    let atom = &atoms[k][h];
                    let mut lw = allocation_log_weight(
                        params[i].mu[k],
                        params[i].gamma[k],
                        params[i].alpha[k],
                        params[i].beta[k],
                        atom,
                        hp,
                    );
                    if exact && k_total == 2 {
                        let other = 1 - k;
                        let other_mu = atoms[other][slices.d(i, other)].mu;
                        let z = if k == 0 {
                            ordering_log_prob(atom.mu, other_mu, hp.s)
                        } else {
                            ordering_log_prob(other_mu, atom.mu, hp.s)
                        };
                        lw -= z;
                    }
                    candidates.push(h);
                    log_w.push(lw);
                }
            }
            if candidates.is_empty() {
                return Err(SamplerError::EmptySliceSet { unit: i, regime: k });
            }
            let max_lw = log_w
                .iter()
                .copied()
                .fold(S::neg_infinity(), |a, b| a.max(b));
            let weights: Vec<S> = log_w.iter().map(|&lw| (lw - max_lw).exp()).collect();
            let total: S = weights.iter().copied().sum();
            let rng = &mut unit_rngs[i];
            let draw = S::sample_open01(rng) * total;
            let mut acc = S::zero();
            let mut chosen = candidates[candidates.len() - 1];
            for (idx, &w) in weights.iter().enumerate() {
                acc += w;
                if draw < acc {
                    chosen = candidates[idx];
                    break;
                }
            }
            slices.set_d(i, k, chosen);
        }
    }
    Ok(())
}

//! Gibbs block 2: common transition-row means (collapsed Metropolis-Hastings)
//! followed by the unit transition rows (Dirichlet full conditionals).

use rand_chacha::ChaCha8Rng;

use crate::dist::sample_dirichlet;
use crate::linalg::stable_sum;
use crate::model::{CommonTransitionMean, HiddenPath, Hyperparameters, TransitionMatrix};
use crate::scalar::Scalar;

use super::SamplerError;

/// Dirichlet parameters of one transition row's full conditional:
/// phi * r_kh + n_kh.
pub fn transition_row_posterior<S: Scalar>(phi: S, r_row: &[S], counts_row: &[usize]) -> Vec<S> {
    r_row
        .iter()
        .zip(counts_row)
        .map(|(&r, &n)| phi * r + S::from_f64(n as f64))
        .collect()
}

/// Log of the collapsed likelihood factor of a common row mean:
/// sum_i sum_h [ln Gamma(phi r_h + n_ih) - ln Gamma(phi r_h + 1)] for
/// n_ih >= 1, equal to sum_i sum_h sum_{l=2..n_ih} ln(phi r_h + l - 1).
/// The factor prod_l (phi + l - 1), constant in r, is omitted.
pub fn common_mean_log_g<S: Scalar>(phi: S, r_row: &[S], counts: &[Vec<usize>]) -> S {
    let mut terms: Vec<S> = counts
        .iter()
        .map(|row| {
            let mut acc = S::zero();
            for (&r, &n) in r_row.iter().zip(row) {
                if n >= 2 {
                    let x = phi * r;
                    acc += (x + S::from_f64(n as f64)).ln_gamma() - (x + S::one()).ln_gamma();
                }
            }
            acc
        })
        .collect();
    stable_sum(&mut terms)
}

/// Per-unit transition counts for regime row k: counts[i][h] = n_{i,kh}.
fn row_counts(paths: &[HiddenPath], k_from: usize, n_regimes: usize) -> Vec<Vec<usize>> {
    paths
        .iter()
        .map(|p| {
            let all = p.transition_counts(n_regimes);
            all[k_from * n_regimes..(k_from + 1) * n_regimes].to_vec()
        })
        .collect()
}

/// Log of the collapsed conditional of one common row (up to a constant):
/// sum_h (d + m_h - 1) ln r_h + ln g(r).
fn common_row_log_target<S: Scalar>(
    row: &[S],
    m: &[usize],
    d: S,
    phi: S,
    counts: &[Vec<usize>],
) -> S {
    let mut acc = common_mean_log_g(phi, row, counts);
    for (&r, &mh) in row.iter().zip(m) {
        if !(r > S::zero()) {
            return S::neg_infinity();
        }
        acc += (d + S::from_f64(mh as f64) - S::one()) * r.ln();
    }
    acc
}

/// One univariate slice move on the share x = r_a / (r_a + r_b), holding the
/// other components fixed; sweeping over component pairs keeps the collapsed
/// row conditional invariant and mixes even where the Dirichlet independence
/// proposal never reaches.
#[allow(clippy::too_many_arguments)]
fn slice_move_common_pair<S: Scalar>(
    row: &mut Vec<S>,
    a: usize,
    b: usize,
    m: &[usize],
    d: S,
    phi: S,
    counts: &[Vec<usize>],
    rng: &mut ChaCha8Rng,
) {
    let total = row[a] + row[b];
    if !(total > S::zero()) {
        return;
    }
    let eval = |x: S, row: &mut Vec<S>| -> S {
        row[a] = total * x;
        row[b] = total * (S::one() - x);
        common_row_log_target(row, m, d, phi, counts)
    };
    let x0 = row[a] / total;
    let f0 = eval(x0, row);
    let log_level = f0 + S::sample_open01(rng).ln();
    let width = S::from_f64(0.25);
    let mut lo = (x0 - width * S::sample_open01(rng)).max(S::zero());
    let mut hi = (lo + width).min(S::one());
    for _ in 0..64 {
        if lo <= S::zero() || eval(lo, row) < log_level {
            break;
        }
        lo = (lo - width).max(S::zero());
    }
    for _ in 0..64 {
        if hi >= S::one() || eval(hi, row) < log_level {
            break;
        }
        hi = (hi + width).min(S::one());
    }
    let mut x = x0;
    for _ in 0..200 {
        let candidate = lo + (hi - lo) * S::sample_open01(rng);
        if eval(candidate, row) >= log_level {
            x = candidate;
            break;
        }
        if candidate < x0 {
            lo = candidate;
        } else {
            hi = candidate;
        }
    }
    row[a] = total * x;
    row[b] = total * (S::one() - x);
}

/// Update of the common row means: the Dirichlet independence MH step on the
/// collapsed conditional, composed with pairwise slice moves on the same
/// target (the independence proposal concentrates near the simplex center
/// and alone cannot reach persistent rows). Returns (accepted, attempted)
/// for the MH part.
pub fn update_common_transition_mean<S: Scalar>(
    common: &mut CommonTransitionMean<S>,
    paths: &[HiddenPath],
    hp: &Hyperparameters<S>,
    rng: &mut ChaCha8Rng,
) -> Result<(usize, usize), SamplerError> {
    let k = hp.n_regimes;
    if k == 1 {
        return Ok((0, 0));
    }
    let mut accepted = 0;
    for from in 0..k {
        let counts = row_counts(paths, from, k);
        let mut m = vec![0usize; k];
        for row in &counts {
            for (h, &n) in row.iter().enumerate() {
                if n > 0 {
                    m[h] += 1;
                }
            }
        }
        let alpha: Vec<S> = m.iter().map(|&mh| hp.d + S::from_f64(mh as f64)).collect();
        let proposal = sample_dirichlet(&alpha, rng);
        let log_g_new = common_mean_log_g(hp.phi, &proposal, &counts);
        let log_g_old = common_mean_log_g(hp.phi, common.row(from), &counts);
        let log_ratio = log_g_new - log_g_old;
        let u = S::sample_open01(rng);
        if u.ln() < log_ratio {
            common.rows.set_row(from, &proposal);
            accepted += 1;
        }
        let mut row = common.row(from).to_vec();
        for a in 0..k {
            for b in (a + 1)..k {
                slice_move_common_pair(&mut row, a, b, &m, hp.d, hp.phi, &counts, rng);
            }
        }
        // Guard against drift in the fixed components' sum.
        let total: S = row.iter().copied().sum();
        for v in row.iter_mut() {
            *v /= total;
        }
        common.rows.set_row(from, &row);
    }
    common.rows.validate().map_err(SamplerError::Model)?;
    Ok((accepted, k))
}

/// Redraw every row of every unit transition matrix from its Dirichlet full
/// conditional given the current paths and common means.
pub fn update_transition_rows<S: Scalar>(
    trans: &mut [TransitionMatrix<S>],
    paths: &[HiddenPath],
    common: &CommonTransitionMean<S>,
    hp: &Hyperparameters<S>,
    unit_rngs: &mut [ChaCha8Rng],
) -> Result<(), SamplerError> {
    let k = hp.n_regimes;
    for (i, t) in trans.iter_mut().enumerate() {
        let rng = &mut unit_rngs[i];
        if k == 1 {
            continue;
        }
        let counts = paths[i].transition_counts(k);
        for from in 0..k {
            let alpha =
                transition_row_posterior(hp.phi, common.row(from), &counts[from * k..(from + 1) * k]);
            let row = sample_dirichlet(&alpha, rng);
            t.set_row(from, &row);
        }
        t.validate().map_err(SamplerError::Model)?;
    }
    Ok(())
}

/// Single-site MH chain over one common row, holding counts fixed; test
/// helper for the invariant-distribution checks.
#[cfg(test)]
fn run_common_mean_chain(
    phi: f64,
    d: f64,
    counts: &[Vec<usize>],
    sweeps: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    use rand::Rng;
    let k = counts[0].len();
    let mut m = vec![0usize; k];
    for row in counts {
        for (h, &n) in row.iter().enumerate() {
            if n > 0 {
                m[h] += 1;
            }
        }
    }
    let alpha: Vec<f64> = m.iter().map(|&mh| d + mh as f64).collect();
    let mut current = vec![1.0 / k as f64; k];
    let mut out = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        let proposal = sample_dirichlet(&alpha, rng);
        let lr = common_mean_log_g(phi, &proposal, counts) - common_mean_log_g(phi, &current, counts);
        if rng.random::<f64>().ln() < lr {
            current = proposal;
        }
        out.push(current[0]);
    }
    out
}

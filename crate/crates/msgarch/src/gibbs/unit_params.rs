//! Gibbs block 4: per-unit MS-GARCH parameters.
//!
//! Both updates are Metropolis-Hastings with two-component normal mixture
//! proposals (a small independence weight on moments built from a tractable
//! approximation, the rest a random walk), evaluated against the exact
//! recursive likelihood. Regime means propose the K-vector jointly and reject
//! immediately when the identification ordering fails; the volatility block
//! proposes the 3K-vector from the linearized squared-error model.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dist::{log_add_exp, normal_logpdf, scaled_beta_logpdf};
use crate::linalg::{cholesky, log_det_from_cholesky, solve_lower_transpose, solve_spd};
use crate::model::{
    approx_variance_path, complete_loglik_with_init, HiddenPath, Hyperparameters, RegimeParams,
    TransitionMatrix,
};
use crate::pyp::Atom;
use crate::scalar::Scalar;

/// Diagonal proposal moments for the regime-mean vector: conjugate normal
/// moments under the frozen-innovation variance approximation. Regimes the
/// path never visits fall back to the first-stage prior.
pub struct MuProposalMoments<S> {
    pub mean: Vec<S>,
    pub var: Vec<S>,
}

pub fn mu_proposal_moments<S: Scalar>(
    y: &[S],
    params: &RegimeParams<S>,
    path: &HiddenPath,
    sigma0_sq: S,
    anchors: &[S],
    s: S,
) -> MuProposalMoments<S> {
    let k = params.n_regimes();
    let star = approx_variance_path(
        y,
        &params.mu,
        &params.gamma,
        &params.alpha,
        &params.beta,
        path,
        sigma0_sq,
    );
    let s_sq = s * s;
    let mut prec = vec![S::one() / s_sq; k];
    let mut weighted = vec![S::zero(); k];
    for kk in 0..k {
        weighted[kk] = anchors[kk] / s_sq;
    }
    for (t, &st) in path.states.iter().enumerate() {
        prec[st] += S::one() / star[t];
        weighted[st] += y[t] / star[t];
    }
    let var: Vec<S> = prec.iter().map(|&p| S::one() / p).collect();
    let mean: Vec<S> = weighted.iter().zip(&var).map(|(&w, &v)| w * v).collect();
    MuProposalMoments { mean, var }
}

fn diag_normal_logpdf<S: Scalar>(x: &[S], mean: &[S], var: &[S]) -> S {
    x.iter()
        .zip(mean)
        .zip(var)
        .map(|((&xi, &mi), &vi)| normal_logpdf(xi, mi, vi.sqrt()))
        .sum()
}

fn mixture_logpdf_diag<S: Scalar>(
    x: &[S],
    indep_mean: &[S],
    var: &[S],
    walk_center: &[S],
    w_indep: S,
) -> S {
    let a = w_indep.ln() + diag_normal_logpdf(x, indep_mean, var);
    let b = (S::one() - w_indep).ln() + diag_normal_logpdf(x, walk_center, var);
    log_add_exp(a, b)
}

/// One MH update of a unit's regime-mean vector. Returns whether the proposal
/// was accepted.
#[allow(clippy::too_many_arguments)]
pub fn update_unit_mu<S: Scalar>(
    y: &[S],
    params: &mut RegimeParams<S>,
    trans: &TransitionMatrix<S>,
    path: &HiddenPath,
    sigma0_sq: S,
    init_probs: &[S],
    anchors: &[S],
    hp: &Hyperparameters<S>,
    w_indep: S,
    rng: &mut ChaCha8Rng,
) -> bool {
    let k = params.n_regimes();
    let fwd = mu_proposal_moments(y, params, path, sigma0_sq, anchors, hp.s);
    let use_indep = S::sample_open01(rng) < w_indep;
    let mut proposal = vec![S::zero(); k];
    for kk in 0..k {
        let center = if use_indep { fwd.mean[kk] } else { params.mu[kk] };
        proposal[kk] = center + fwd.var[kk].sqrt() * S::sample_standard_normal(rng);
    }
    // Identification ordering: truncated prior => immediate rejection.
    if !proposal.windows(2).all(|w| w[0] > w[1]) {
        return false;
    }
    let current = params.mu.clone();
    let log_q_fwd = mixture_logpdf_diag(&proposal, &fwd.mean, &fwd.var, &current, w_indep);

    let mut cand = params.clone();
    cand.mu = proposal.clone();
    let ll_new = match complete_loglik_with_init(y, &cand, trans, path, init_probs, sigma0_sq) {
        Ok(v) => v,
        Err(_) => return false,
    };
    let ll_old = complete_loglik_with_init(y, params, trans, path, init_probs, sigma0_sq)
        .expect("current state must have finite likelihood");
    let rev = mu_proposal_moments(y, &cand, path, sigma0_sq, anchors, hp.s);
    let log_q_rev = mixture_logpdf_diag(&current, &rev.mean, &rev.var, &proposal, w_indep);

    let mut log_ratio = ll_new - ll_old + log_q_rev - log_q_fwd;
    for kk in 0..k {
        log_ratio += normal_logpdf(proposal[kk], anchors[kk], hp.s)
            - normal_logpdf(current[kk], anchors[kk], hp.s);
    }
    if log_ratio.is_nan() {
        return false;
    }
    let u = S::sample_open01(rng);
    if u.ln() < log_ratio {
        params.mu = proposal;
        true
    } else {
        false
    }
}

/// Linearization of the squared-error auxiliary model around the current
/// volatility parameters: the moving-average residual w*, its exact gradient
/// in theta = (gamma_1..K, alpha_1..K, beta_1..K), the affine residual r*,
/// and the per-step weights 2 sigma**^4.
pub struct GarchLinearization<S> {
    pub w: Vec<S>,
    /// T x 3K, row major.
    pub grad: Vec<S>,
    pub resid: Vec<S>,
    pub weight: Vec<S>,
}

pub fn garch_linearization<S: Scalar>(
    y: &[S],
    mu: &[S],
    theta: &[S],
    path: &HiddenPath,
    sigma0_sq: S,
) -> GarchLinearization<S> {
    let t_len = y.len();
    let k = mu.len();
    let dim = 3 * k;
    let gamma = &theta[0..k];
    let alpha = &theta[k..2 * k];
    let beta = &theta[2 * k..3 * k];
    let mut w = Vec::with_capacity(t_len);
    let mut grad = vec![S::zero(); t_len * dim];
    let mut resid = Vec::with_capacity(t_len);
    let mut weight = Vec::with_capacity(t_len);

    let mut prev_w = S::zero();
    let mut prev_eps_sq = S::zero();
    let mut prev_grad = vec![S::zero(); dim];
    let mut prev_star = sigma0_sq;
    for t in 0..t_len {
        let st = path.states[t];
        let eps = y[t] - mu[st];
        let eps_sq = eps * eps;
        let wt = eps_sq - gamma[st] - alpha[st] * prev_eps_sq - beta[st] * (prev_eps_sq - prev_w);
        // Gradient recursion: own-regime direct terms plus the carried memory.
        let row = &mut grad[t * dim..(t + 1) * dim];
        for j in 0..dim {
            row[j] = beta[st] * prev_grad[j];
        }
        row[st] -= S::one();
        row[k + st] -= prev_eps_sq;
        row[2 * k + st] -= prev_eps_sq - prev_w;
        //

        let star = gamma[st] + alpha[st] * prev_eps_sq + beta[st] * prev_star;
        weight.push(S::from_f64(2.0) * star * star);
        let dot: S = row.iter().zip(theta).map(|(&g, &th)| g * th).sum();
        resid.push(wt - dot);
        w.push(wt);

        prev_grad.copy_from_slice(row);
        prev_w = wt;
        prev_eps_sq = eps_sq;
        prev_star = star;
    }
    GarchLinearization { w, grad, resid, weight }
}

/// Precision matrix A = grad' W^{-1} grad and linear term b = -grad' W^{-1} r*.
fn proposal_normal_equations<S: Scalar>(lin: &GarchLinearization<S>, dim: usize) -> (Vec<S>, Vec<S>) {
    let t_len = lin.w.len();
    let mut a = vec![S::zero(); dim * dim];
    let mut b = vec![S::zero(); dim];
    for t in 0..t_len {
        let row = &lin.grad[t * dim..(t + 1) * dim];
        let inv_w = S::one() / lin.weight[t];
        for i in 0..dim {
            let gi = row[i] * inv_w;
            if gi == S::zero() {
                continue;
            }
            b[i] -= gi * lin.resid[t];
            for j in 0..=i {
                a[i * dim + j] += gi * row[j];
            }
        }
    }
    for i in 0..dim {
        for j in i + 1..dim {
            a[i * dim + j] = a[j * dim + i];
        }
    }
    (a, b)
}

/// Cholesky with escalating relative diagonal jitter.
fn cholesky_with_jitter<S: Scalar>(a: &mut Vec<S>, dim: usize) -> Option<Vec<S>> {
    if let Some(l) = cholesky(a, dim) {
        return Some(l);
    }
    let scale = (0..dim)
        .map(|i| a[i * dim + i].abs())
        .fold(S::zero(), |x, y| x.max(y))
        .max(S::from_f64(1e-300));
    for &jitter in &[1e-8, 1e-6, 1e-4, 1e-2] {
        let bump = scale * S::from_f64(jitter);
        for i in 0..dim {
            a[i * dim + i] += bump;
        }
        if let Some(l) = cholesky(a, dim) {
            return Some(l);
        }
    }
    None
}

struct GarchProposal<S> {
    mean: Vec<S>,
    chol: Vec<S>,
    log_det_precision: S,
}

fn garch_proposal<S: Scalar>(
    y: &[S],
    mu: &[S],
    theta: &[S],
    path: &HiddenPath,
    sigma0_sq: S,
) -> Option<GarchProposal<S>> {
    let dim = theta.len();
    let lin = garch_linearization(y, mu, theta, path, sigma0_sq);
    let (mut a, b) = proposal_normal_equations(&lin, dim);
    let l = cholesky_with_jitter(&mut a, dim)?;
    let mean = solve_spd(&l, dim, &b);
    let log_det_precision = log_det_from_cholesky(&l, dim);
    Some(GarchProposal { mean, chol: l, log_det_precision })
}

impl<S: Scalar> GarchProposal<S> {
    /// x = center + L^{-T} z gives covariance A^{-1}.
    fn draw<R: Rng + ?Sized>(&self, center: &[S], rng: &mut R) -> Vec<S> {
        let dim = center.len();
        let mut z: Vec<S> = (0..dim).map(|_| S::sample_standard_normal(rng)).collect();
        solve_lower_transpose(&self.chol, dim, &mut z);
        z.iter().zip(center).map(|(&d, &c)| d + c).collect()
    }

    fn logpdf_at(&self, x: &[S], center: &[S]) -> S {
        let dim = center.len();
        let mut diff: Vec<S> = x.iter().zip(center).map(|(&a, &b)| a - b).collect();
        // Quadratic form (x-c)' A (x-c) = || L' (x-c) ||^2.
        let mut quad = S::zero();
        for i in 0..dim {
            let mut acc = S::zero();
            for j in i..dim {
                acc += self.chol[j * dim + i] * diff[j];
            }
            diff[i] = acc;
            quad += acc * acc;
        }
        let half = S::from_f64(0.5);
        half * self.log_det_precision
            - S::from_f64(dim as f64) * half * (S::from_f64(2.0) * S::PI()).ln()
            - half * quad
    }

    fn mixture_logpdf(&self, x: &[S], walk_center: &[S], w_indep: S) -> S {
        let a = w_indep.ln() + self.logpdf_at(x, &self.mean);
        let b = (S::one() - w_indep).ln() + self.logpdf_at(x, walk_center);
        log_add_exp(a, b)
    }
}

fn theta_of<S: Scalar>(params: &RegimeParams<S>) -> Vec<S> {
    let mut th = params.gamma.clone();
    th.extend_from_slice(&params.alpha);
    th.extend_from_slice(&params.beta);
    th
}

fn theta_in_support<S: Scalar>(theta: &[S], k: usize, a: S) -> bool {
    let gamma = &theta[0..k];
    let alpha = &theta[k..2 * k];
    let beta = &theta[2 * k..3 * k];
    gamma.iter().all(|&g| g > S::zero() && g <= a)
        && alpha.iter().all(|&x| x > S::zero() && x < S::one())
        && beta.iter().all(|&x| x > S::zero() && x < S::one())
}

fn garch_log_prior<S: Scalar>(theta: &[S], k: usize, atoms: &[&Atom<S>], hp: &Hyperparameters<S>) -> S {
    let mut acc = S::zero();
    for kk in 0..k {
        acc += scaled_beta_logpdf(theta[kk], atoms[kk].gamma, hp.r, hp.a);
        acc += scaled_beta_logpdf(theta[k + kk], atoms[kk].alpha, hp.r, S::one());
        acc += scaled_beta_logpdf(theta[2 * k + kk], atoms[kk].beta, hp.r, S::one());
    }
    acc
}

/// One MH update of a unit's volatility parameter vector
/// (gamma, alpha, beta per regime). Proposals outside the support count as
/// rejections, keeping the kernel exact for the truncated target.
#[allow(clippy::too_many_arguments)]
pub fn update_unit_garch<S: Scalar>(
    y: &[S],
    params: &mut RegimeParams<S>,
    trans: &TransitionMatrix<S>,
    path: &HiddenPath,
    sigma0_sq: S,
    init_probs: &[S],
    atoms: &[&Atom<S>],
    hp: &Hyperparameters<S>,
    w_indep: S,
    rng: &mut ChaCha8Rng,
) -> bool {
    let k = params.n_regimes();
    let current = theta_of(params);
    let fwd = match garch_proposal(y, &params.mu, &current, path, sigma0_sq) {
        Some(p) => p,
        None => return false,
    };
    let use_indep = S::sample_open01(rng) < w_indep;
    let center = if use_indep { fwd.mean.clone() } else { current.clone() };
    let proposal = fwd.draw(&center, rng);
    if !theta_in_support(&proposal, k, hp.a) {
        return false;
    }
    let log_q_fwd = fwd.mixture_logpdf(&proposal, &current, w_indep);

    let mut cand = params.clone();
    cand.gamma = proposal[0..k].to_vec();
    cand.alpha = proposal[k..2 * k].to_vec();
    cand.beta = proposal[2 * k..3 * k].to_vec();
    let ll_new = match complete_loglik_with_init(y, &cand, trans, path, init_probs, sigma0_sq) {
        Ok(v) => v,
        Err(_) => return false,
    };
    let ll_old = complete_loglik_with_init(y, params, trans, path, init_probs, sigma0_sq)
        .expect("current state must have finite likelihood");
    let rev = match garch_proposal(y, &params.mu, &proposal, path, sigma0_sq) {
        Some(p) => p,
        None => return false,
    };
    let log_q_rev = rev.mixture_logpdf(&current, &proposal, w_indep);

    let log_prior_new = garch_log_prior(&proposal, k, atoms, hp);
    let log_prior_old = garch_log_prior(&current, k, atoms, hp);
    let log_ratio = ll_new - ll_old + log_prior_new - log_prior_old + log_q_rev - log_q_fwd;
    if log_ratio.is_nan() {
        return false;
    }
    let u = S::sample_open01(rng);
    if u.ln() < log_ratio {
        params.gamma = cand.gamma;
        params.alpha = cand.alpha;
        params.beta = cand.beta;
        true
    } else {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    fn hand_path(states: &[usize]) -> HiddenPath {
        HiddenPath::new(states.to_vec())
    }

    #[test]
    fn mu_moments_match_displayed_formulas() {
        // T = 5 hand-built case, K = 2.
        let y = [1.2_f64, -0.4, 0.8, 2.0, -1.0];
        let path = hand_path(&[0, 1, 0, 0, 1]);
        let params = RegimeParams::new(
            vec![0.9, -0.7],
            vec![0.3, 0.5],
            vec![0.1, 0.2],
            vec![0.5, 0.3],
        );
        let anchors = [1.0, -1.0];
        let s = 0.4;
        let sigma0 = 1.1;
        let got = mu_proposal_moments(&y, &params, &path, sigma0, &anchors, s);

        // Direct transcription of the formulas.
        let star = approx_variance_path(
            &y,
            &params.mu,
            &params.gamma,
            &params.alpha,
            &params.beta,
            &path,
            sigma0,
        );
        for kk in 0..2 {
            let idx: Vec<usize> = (0..5).filter(|&t| path.states[t] == kk).collect();
            let s2: f64 = 1.0 / (1.0 / (s * s) + idx.iter().map(|&t| 1.0 / star[t]).sum::<f64>());
            let m = s2 * (anchors[kk] / (s * s) + idx.iter().map(|&t| y[t] / star[t]).sum::<f64>());
            assert!((got.var[kk] - s2).abs() < 1e-14);
            assert!((got.mean[kk] - m).abs() < 1e-14);
        }
    }

    #[test]
    fn mu_moments_unvisited_regime_falls_back_to_prior() {
        let y = [0.5_f64, 0.7, 0.2];
        let path = hand_path(&[0, 0, 0]);
        let params = RegimeParams::new(
            vec![0.5, -0.5],
            vec![0.3, 0.3],
            vec![0.1, 0.1],
            vec![0.2, 0.2],
        );
        let anchors = [0.4, -0.9];
        let got = mu_proposal_moments(&y, &params, &path, 1.0, &anchors, 0.25);
        assert!((got.mean[1] - anchors[1]).abs() < 1e-14);
        assert!((got.var[1] - 0.0625).abs() < 1e-14);
    }

    #[test]
    fn gradient_collapses_without_persistence() {
        // beta = 0: d w*_t / d gamma_k = -1(s_t = k) exactly, no memory.
        let y = [1.0_f64, -0.5, 0.3, 0.9];
        let path = hand_path(&[0, 1, 1, 0]);
        let mu = [0.2, -0.2];
        let theta = [0.4, 0.6, 0.1, 0.2, 0.0, 0.0];
        let lin = garch_linearization(&y, &mu, &theta, &path, 1.0);
        let dim = 6;
        for t in 0..4 {
            let row = &lin.grad[t * dim..(t + 1) * dim];
            for kk in 0..2 {
                let expect = if path.states[t] == kk { -1.0 } else { 0.0 };
                assert!((row[kk] - expect).abs() < 1e-15, "t={t} k={kk}");
            }
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        // Random configurations, K in {1, 2}, T in {3, 10}.
        let mut rng = stream_rng(42, 0);
        let mut worst: f64 = 0.0;
        for rep in 0..100 {
            let k = 1 + (rep % 2);
            let t_len = if rep % 3 == 0 { 3 } else { 10 };
            let dim = 3 * k;
            let mu: Vec<f64> = (0..k)
                .map(|j| 1.0 - 2.0 * j as f64 + 0.1 * f64::sample_standard_normal(&mut rng))
                .collect();
            let mut theta = Vec::with_capacity(dim);
            for _ in 0..k {
                theta.push(0.1 + 0.8 * f64::sample_open01(&mut rng)); // gamma
            }
            for _ in 0..k {
                theta.push(0.05 + 0.4 * f64::sample_open01(&mut rng)); // alpha
            }
            for _ in 0..k {
                theta.push(0.1 + 0.7 * f64::sample_open01(&mut rng)); // beta
            }
            let path = HiddenPath::new(
                (0..t_len).map(|_| (f64::sample_open01(&mut rng) * k as f64) as usize).collect(),
            );
            let y: Vec<f64> = (0..t_len)
                .map(|_| 2.0 * f64::sample_standard_normal(&mut rng))
                .collect();
            let sigma0 = 0.7;
            let lin = garch_linearization(&y, &mu, &theta, &path, sigma0);
            let step = 1e-6;
            for j in 0..dim {
                let mut up = theta.clone();
                up[j] += step;
                let mut dn = theta.clone();
                dn[j] -= step;
                let wu = garch_linearization(&y, &mu, &up, &path, sigma0).w;
                let wd = garch_linearization(&y, &mu, &dn, &path, sigma0).w;
                for t in 0..t_len {
                    let fd = (wu[t] - wd[t]) / (2.0 * step);
                    let an = lin.grad[t * dim + j];
                    let rel = (an - fd).abs() / fd.abs().max(1.0);
                    worst = worst.max(rel);
                }
            }
        }
        assert!(worst < 1e-5, "worst relative error {worst}");
    }

    #[test]
    fn proposal_covariance_is_positive_definite() {
        let mut rng = stream_rng(43, 0);
        for _ in 0..50 {
            let y: Vec<f64> = (0..30).map(|_| f64::sample_standard_normal(&mut rng)).collect();
            let path = HiddenPath::new(
                (0..30).map(|_| (f64::sample_open01(&mut rng) * 2.0) as usize).collect(),
            );
            let mu = [0.5, -0.5];
            let theta = [0.3, 0.4, 0.1, 0.15, 0.5, 0.4];
            let prop = garch_proposal(&y, &mu, &theta, &path, 1.0);
            assert!(prop.is_some());
        }
    }

    #[test]
    fn conjugate_case_accepts_independent_draws() {
        // alpha = beta ~ 0: the approximating variance equals the exact one,
        // the independence proposal is the conjugate posterior, and with
        // mixture weight 1 every in-order proposal is accepted.
        let mut rng = stream_rng(44, 0);
        let t_len = 60;
        let y: Vec<f64> = (0..t_len)
            .map(|t| if t % 2 == 0 { 3.0 } else { -3.0 } + 0.3 * f64::sample_standard_normal(&mut rng))
            .collect();
        let path = HiddenPath::new((0..t_len).map(|t| if t % 2 == 0 { 0 } else { 1 }).collect());
        let tiny = 1e-14;
        let mut params = RegimeParams::new(
            vec![2.5, -2.5],
            vec![0.09, 0.09],
            vec![tiny, tiny],
            vec![tiny, tiny],
        );
        let trans = TransitionMatrix::new(vec![0.5, 0.5, 0.5, 0.5], 2).unwrap();
        let mut hp: Hyperparameters<f64> = Hyperparameters::new(2);
        hp.s = 0.5;
        let anchors = [3.0, -3.0];
        let init = [0.5, 0.5];
        let mut accepted = 0;
        let reps = 2000;
        for _ in 0..reps {
            if update_unit_mu(
                &y, &mut params, &trans, &path, 0.09, &init, &anchors, &hp, 1.0, &mut rng,
            ) {
                accepted += 1;
            }
        }
        // Ordering violations are ~impossible with means 6 sd apart.
        assert!(
            accepted as f64 / reps as f64 > 0.999,
            "acceptance {}",
            accepted as f64 / reps as f64
        );
    }

    #[test]
    fn garch_update_moves_and_respects_support() {
        let mut rng = stream_rng(45, 0);
        let t_len = 200;
        let truth = RegimeParams::new(vec![0.8, -0.8], vec![0.2, 0.4], vec![0.08, 0.12], vec![0.7, 0.5]);
        let path = HiddenPath::new((0..t_len).map(|t| (t / 25) % 2).collect());
        let y = crate::dgp::simulate_observations(&truth, &path, 1.0, &mut rng);
        let trans = TransitionMatrix::new(vec![0.9, 0.1, 0.1, 0.9], 2).unwrap();
        let mut hp: Hyperparameters<f64> = Hyperparameters::new(2);
        hp.r = 10.0;
        hp.a = 2.0;
        let atom0 = Atom { mu: 0.8, gamma: 0.25, alpha: 0.1, beta: 0.6 };
        let atom1 = Atom { mu: -0.8, gamma: 0.45, alpha: 0.1, beta: 0.5 };
        let atoms = [&atom0, &atom1];
        let mut params = truth.clone();
        let init = [0.5, 0.5];
        let mut accepted = 0;
        let reps = 500;
        for _ in 0..reps {
            if update_unit_garch(
                &y, &mut params, &trans, &path, 1.0, &init, &atoms, &hp, 0.05, &mut rng,
            ) {
                accepted += 1;
            }
            assert!(params.validate(hp.a).is_ok());
        }
        let rate = accepted as f64 / reps as f64;
        assert!(rate > 0.0 && rate < 1.0, "degenerate acceptance rate {rate}");
    }
}

use crate::dist::{log_sum_exp, normal_logpdf};
use crate::model::types::{
    HiddenPath, InitialStateDist, ModelError, RegimeParams, TransitionMatrix,
};
use crate::scalar::Scalar;

/// Conditional variance recursion along a fixed regime path:
/// sigma^2_t = gamma(s_t) + alpha(s_t) eps^2_{t-1} + beta(s_t) sigma^2_{t-1}
/// with eps_t = y_t - mu(s_t) and eps_0 = 0.
pub fn garch_variance_path<S: Scalar>(
    y: &[S],
    params: &RegimeParams<S>,
    path: &HiddenPath,
    sigma0_sq: S,
) -> Result<Vec<S>, ModelError> {
    if y.len() != path.len() {
        return Err(ModelError::LengthMismatch(format!(
            "series has {} observations but path has {}",
            y.len(),
            path.len()
        )));
    }
    if !(sigma0_sq > S::zero()) {
        return Err(ModelError::NonPositiveSigma0(sigma0_sq.to_f64_lossy()));
    }
    let mut out = Vec::with_capacity(y.len());
    let mut prev_var = sigma0_sq;
    let mut prev_eps_sq = S::zero();
    for (t, (&yt, &st)) in y.iter().zip(&path.states).enumerate() {
        let var = params.gamma[st] + params.alpha[st] * prev_eps_sq + params.beta[st] * prev_var;
        if !(var > S::zero()) || !var.is_finite() {
            return Err(ModelError::VarianceUnderflow { t: t + 1, value: var.to_f64_lossy() });
        }
        out.push(var);
        let eps = yt - params.mu[st];
        prev_eps_sq = eps * eps;
        prev_var = var;
    }
    Ok(out)
}

/// Variance recursion with the squared innovations frozen at the current
/// parameter values: sigma*^2_t = gamma(s_t) + alpha(s_t)(y_{t-1} -
/// mu(s_{t-1}))^2 + beta(s_t) sigma*^2_{t-1}. Used to build proposal moments.
pub fn approx_variance_path<S: Scalar>(
    y: &[S],
    mu: &[S],
    gamma: &[S],
    alpha: &[S],
    beta: &[S],
    path: &HiddenPath,
    sigma0_sq: S,
) -> Vec<S> {
    let mut out = Vec::with_capacity(y.len());
    let mut prev_var = sigma0_sq;
    for (t, &st) in path.states.iter().enumerate() {
        let eps_sq = if t == 0 {
            S::zero()
        } else {
            let e = y[t - 1] - mu[path.states[t - 1]];
            e * e
        };
        let var = gamma[st] + alpha[st] * eps_sq + beta[st] * prev_var;
        out.push(var);
        prev_var = var;
    }
    out
}

/// Complete-data log likelihood along a fixed path, with an explicit
/// distribution for the initial state.
pub fn complete_loglik_with_init<S: Scalar>(
    y: &[S],
    params: &RegimeParams<S>,
    trans: &TransitionMatrix<S>,
    path: &HiddenPath,
    init_probs: &[S],
    sigma0_sq: S,
) -> Result<S, ModelError> {
    let vars = garch_variance_path(y, params, path, sigma0_sq)?;
    let mut ll = init_probs[path.states[0]].ln();
    for w in path.states.windows(2) {
        ll += trans.prob(w[0], w[1]).ln();
    }
    for ((&yt, &st), &var) in y.iter().zip(&path.states).zip(&vars) {
        ll += normal_logpdf(yt, params.mu[st], var.sqrt());
    }
    Ok(ll)
}

/// Complete-data log likelihood with the initial state weighted by the
/// stationary distribution of the unit's transition matrix.
pub fn complete_loglik<S: Scalar>(
    y: &[S],
    params: &RegimeParams<S>,
    trans: &TransitionMatrix<S>,
    path: &HiddenPath,
    sigma0_sq: S,
) -> Result<S, ModelError> {
    let init = InitialStateDist::Stationary.probs(trans);
    complete_loglik_with_init(y, params, trans, path, &init, sigma0_sq)
}

/// Log of the observed-data likelihood obtained by summing the complete-data
/// likelihood over all K^T regime paths. Test oracle; guarded to small
/// problems.
pub fn enumerate_loglik<S: Scalar>(
    y: &[S],
    params: &RegimeParams<S>,
    trans: &TransitionMatrix<S>,
    init_probs: &[S],
    sigma0_sq: S,
) -> Result<S, ModelError> {
    let k = trans.n_states();
    let t = y.len();
    let total = (k as f64).powi(t as i32);
    if total > 1e6 {
        return Err(ModelError::EnumerationGuard(total));
    }
    let n_paths = total as usize;
    let mut logs = Vec::with_capacity(n_paths);
    let mut states = vec![0usize; t];
    for idx in 0..n_paths {
        let mut rem = idx;
        for s in states.iter_mut() {
            *s = rem % k;
            rem /= k;
        }
        let path = HiddenPath::new(states.clone());
        logs.push(complete_loglik_with_init(
            y, params, trans, &path, init_probs, sigma0_sq,
        )?);
    }
    Ok(log_sum_exp(&logs))
}

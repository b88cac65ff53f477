//! Pitman-Yor process machinery: stick-breaking, Polya-urn sampling, base
//! measure draws, and the analytic prior on the number of occupied clusters.

use rand::Rng;
use thiserror::Error;

use crate::dist::{log_add_exp, sample_beta, sample_normal, sample_uniform};
use crate::model::Hyperparameters;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum PypError {
    #[error("stick proportion {0} outside (0, 1)")]
    StickOutOfRange(f64),
    #[error("invalid Pitman-Yor parameters: nu={nu}, psi={psi}")]
    InvalidParameters { nu: f64, psi: f64 },
    #[error("N must be >= 1")]
    EmptySample,
}

/// One mixture-component parameter value drawn from the base measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom<S> {
    pub mu: S,
    pub gamma: S,
    pub alpha: S,
    pub beta: S,
}

/// Stick-breaking weights W_h = V_h prod_{l<h}(1 - V_l) plus the residual
/// mass 1 - sum W.
pub fn stick_weights<S: Scalar>(v: &[S]) -> Result<(Vec<S>, S), PypError> {
    let mut w = Vec::with_capacity(v.len());
    let mut remaining = S::one();
    for &vl in v {
        if !(vl > S::zero() && vl < S::one()) {
            return Err(PypError::StickOutOfRange(vl.to_f64_lossy()));
        }
        w.push(vl * remaining);
        remaining *= S::one() - vl;
    }
    Ok((w, remaining))
}

/// One atom from the base measure: mu* ~ N(m*, s*), gamma* ~ U(0, a),
/// alpha*, beta* ~ U(0, 1), independent.
pub fn sample_base_atom<S: Scalar, R: Rng + ?Sized>(
    hp: &Hyperparameters<S>,
    rng: &mut R,
) -> Atom<S> {
    Atom {
        mu: sample_normal(hp.m_star, hp.s_star, rng),
        gamma: sample_uniform(S::zero(), hp.a, rng),
        alpha: S::sample_open01(rng),
        beta: S::sample_open01(rng),
    }
}

/// Prior stick proportion V_l ~ Be(1 - nu, psi + nu*l), l 1-based.
pub fn sample_prior_stick<S: Scalar, R: Rng + ?Sized>(
    nu: S,
    psi: S,
    l: usize,
    rng: &mut R,
) -> S {
    sample_beta(S::one() - nu, psi + nu * S::from_f64(l as f64), rng)
}

fn check_py_params<S: Scalar>(nu: S, psi: S) -> Result<(), PypError> {
    if nu >= S::zero() && nu < S::one() && psi > -nu {
        Ok(())
    } else {
        Err(PypError::InvalidParameters {
            nu: nu.to_f64_lossy(),
            psi: psi.to_f64_lossy(),
        })
    }
}

/// Exchangeable random partition of n items from the Pitman-Yor urn: item
/// joins an existing cluster c with weight (n_c - nu), or opens a new one
/// with weight (psi + nu * M). Labels are in order of appearance.
pub fn polya_urn_partition<S: Scalar, R: Rng + ?Sized>(
    n: usize,
    nu: S,
    psi: S,
    rng: &mut R,
) -> Result<Vec<usize>, PypError> {
    check_py_params(nu, psi)?;
    if n == 0 {
        return Err(PypError::EmptySample);
    }
    let mut labels = Vec::with_capacity(n);
    let mut sizes: Vec<S> = Vec::new();
    labels.push(0);
    sizes.push(S::one());
    for i in 1..n {
        let m = S::from_f64(sizes.len() as f64);
        let total = S::from_f64(i as f64) + psi;
        let new_w = (psi + nu * m) / total;
        let u = S::sample_open01(rng);
        if u < new_w {
            labels.push(sizes.len());
            sizes.push(S::one());
        } else {
            let mut acc = new_w;
            let mut chosen = sizes.len() - 1;
            for (c, &sz) in sizes.iter().enumerate() {
                acc += (sz - nu) / total;
                if u < acc {
                    chosen = c;
                    break;
                }
            }
            labels.push(chosen);
            sizes[chosen] += S::one();
        }
    }
    Ok(labels)
}

/// Analytic prior distribution of the number of occupied clusters among n
/// exchangeable draws from a PYP(nu, psi) mixture.
#[derive(Debug, Clone)]
pub struct ClusterPrior<S> {
    pub n: usize,
    pub nu: S,
    pub psi: S,
    /// pmf[h-1] = P(M = h), h = 1..n.
    pub pmf: Vec<S>,
    /// Analytic mean number of clusters.
    pub mean: S,
}

impl<S: Scalar> ClusterPrior<S> {
    pub fn pmf_mean(&self) -> S {
        self.pmf
            .iter()
            .enumerate()
            .map(|(i, &p)| S::from_f64((i + 1) as f64) * p)
            .sum()
    }

    pub fn entropy_bits(&self) -> S {
        -self
            .pmf
            .iter()
            .filter(|&&p| p > S::zero())
            .map(|&p| p * p.ln())
            .sum::<S>()
            / S::from_f64(2.0).ln()
    }
}

/// Prior cluster-count pmf over h = 1..n, computed in log space through the
/// triangular recursion of the generalized Stirling numbers
/// S(m+1, h) = S(m, h-1) + (m - h*nu) S(m, h), S(1, 1) = 1.
/// At nu = 0 this is the unsigned Stirling recursion and the Dirichlet-process
/// normalization applies.
pub fn prior_cluster_pmf<S: Scalar>(n: usize, nu: S, psi: S) -> Result<ClusterPrior<S>, PypError> {
    check_py_params(nu, psi)?;
    if n == 0 {
        return Err(PypError::EmptySample);
    }
    // log S(m, h) for the current row m; index h-1.
    let mut row = vec![S::neg_infinity(); n];
    row[0] = S::zero();
    for m in 1..n {
        let mut next = vec![S::neg_infinity(); n];
        let mf = S::from_f64(m as f64);
        for h in 1..=m + 1 {
            let from_new = if h >= 2 { row[h - 2] } else { S::neg_infinity() };
            let coef = mf - S::from_f64(h as f64) * nu;
            let from_same = if h <= m && coef > S::zero() {
                coef.ln() + row[h - 1]
            } else {
                S::neg_infinity()
            };
            next[h - 1] = log_add_exp(from_new, from_same);
        }
        row = next;
    }
    let nf = S::from_f64(n as f64);
    let mut log_pmf = vec![S::neg_infinity(); n];
    if nu > S::zero() {
        let base = (psi + S::one()).ln_gamma() - (psi / nu + S::one()).ln_gamma()
            - (psi + nf).ln_gamma();
        for h in 1..=n {
            let hf = S::from_f64(h as f64);
            log_pmf[h - 1] = (hf - S::one()) * nu.ln() + (psi / nu + hf).ln_gamma() + base
                + row[h - 1];
        }
    } else {
        // Dirichlet-process limit: P(M = h) = psi^h Gamma(psi)/Gamma(psi+n) |s(n,h)|.
        let base = psi.ln_gamma() - (psi + nf).ln_gamma();
        for h in 1..=n {
            log_pmf[h - 1] = S::from_f64(h as f64) * psi.ln() + base + row[h - 1];
        }
    }
    let mut pmf: Vec<S> = log_pmf.iter().map(|&lp| lp.exp()).collect();
    let total: S = pmf.iter().copied().sum();
    debug_assert!(
        (total - S::one()).abs() < S::from_f64(1e-8),
        "pmf sums to {total}"
    );
    for p in pmf.iter_mut() {
        *p /= total;
    }
    let mean = prior_cluster_mean(n, nu, psi)?;
    let prior = ClusterPrior { n, nu, psi, pmf, mean };
    debug_assert!((prior.pmf_mean() - prior.mean).abs() < S::from_f64(1e-8));
    Ok(prior)
}

/// Analytic prior mean of the number of clusters.
pub fn prior_cluster_mean<S: Scalar>(n: usize, nu: S, psi: S) -> Result<S, PypError> {
    check_py_params(nu, psi)?;
    if n == 0 {
        return Err(PypError::EmptySample);
    }
    let nf = S::from_f64(n as f64);
    if nu > S::zero() {
        let log_ratio = (psi + nu + nf).ln_gamma() + (psi + S::one()).ln_gamma()
            - (psi + nu).ln_gamma()
            - (psi + nf).ln_gamma();
        Ok(log_ratio.exp() / nu - psi / nu)
    } else {
        let mut acc = S::zero();
        for h in 1..=n {
            acc += psi / (psi + S::from_f64((h - 1) as f64));
        }
        Ok(acc)
    }
}

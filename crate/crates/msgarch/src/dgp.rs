//! Synthetic-panel generation: the two-group benchmark design used for
//! recovery experiments, and the full hierarchical prior-predictive sampler.

use rand::Rng;
use thiserror::Error;

use crate::dist::{sample_beta, sample_dirichlet, sample_normal};
use crate::model::{
    CommonTransitionMean, HiddenPath, Hyperparameters, Panel, RegimeParams, Sigma0Policy,
    TransitionMatrix,
};
use crate::pyp::{sample_base_atom, sample_prior_stick, Atom};
use crate::rng::{stream_rng, unit_rngs, GLOBAL_STREAM};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum DgpError {
    #[error("invalid DGP specification: {0}")]
    InvalidSpec(String),
    #[error("the benchmark transition design is two-regime; got K = {0}")]
    TwoRegimeOnly(usize),
    #[error("could not draw ordered regime means after {0} attempts")]
    OrderingRejectionCap(usize),
    #[error("prior-predictive simulation needs a fixed sigma0_sq policy")]
    Sigma0NotGenerative,
    #[error("stick-breaking truncation exceeded {0} components")]
    StickCap(usize),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

/// One mixture component of the benchmark design: a location for the regime
/// mean and one for the GARCH intercept, selected together.
#[derive(Debug, Clone, Copy)]
pub struct MixtureComponent<S> {
    pub weight: S,
    pub mu_center: S,
    pub gamma_center: S,
}

/// Data-generating process for synthetic panels. Units are assigned to one
/// mixture component per regime; components pin the regime mean and GARCH
/// intercept up to a small perturbation, while (alpha, beta) come from a
/// common concentrated Dirichlet.
#[derive(Debug, Clone)]
pub struct DGPSpec<S> {
    pub n_units: usize,
    pub n_obs: usize,
    pub seed: u64,
    /// One component list per regime.
    pub regimes: Vec<Vec<MixtureComponent<S>>>,
    /// Scale of the component perturbations (normal for mu, squared normal
    /// for gamma).
    pub perturbation_scale: S,
    /// Concentration of the Dirichlet over (alpha, beta, slack).
    pub garch_concentration: [S; 3],
    /// Mean of the diagonal transition probabilities.
    pub persistence: S,
    /// Beta precision of the diagonal transition probabilities.
    pub persistence_precision: S,
}

impl<S: Scalar> DGPSpec<S> {
    /// The two-regime benchmark: regime 1 has two equally likely groups,
    /// regime 2 three groups with probabilities (0.3, 0.3, 0.4); highly
    /// persistent chains around p = 0.98.
    pub fn two_regime(n_units: usize, n_obs: usize, seed: u64) -> Self {
        let c = S::from_f64;
        Self {
            n_units,
            n_obs,
            seed,
            regimes: vec![
                vec![
                    MixtureComponent { weight: c(0.5), mu_center: c(1.0), gamma_center: c(0.1) },
                    MixtureComponent { weight: c(0.5), mu_center: c(1.5), gamma_center: c(0.2) },
                ],
                vec![
                    MixtureComponent { weight: c(0.3), mu_center: c(-1.1), gamma_center: c(0.5) },
                    MixtureComponent { weight: c(0.3), mu_center: c(-1.5), gamma_center: c(0.8) },
                    MixtureComponent { weight: c(0.4), mu_center: c(-1.0), gamma_center: c(0.1) },
                ],
            ],
            perturbation_scale: c(0.01),
            garch_concentration: [c(50.0), c(800.0), c(150.0)],
            persistence: c(0.98),
            persistence_precision: c(1000.0),
        }
    }

    pub fn n_regimes(&self) -> usize {
        self.regimes.len()
    }

    pub fn validate(&self) -> Result<(), DgpError> {
        if self.n_units == 0 || self.n_obs < 2 {
            return Err(DgpError::InvalidSpec("need N >= 1 and T >= 2".into()));
        }
        if self.regimes.is_empty() {
            return Err(DgpError::InvalidSpec("need at least one regime".into()));
        }
        for (k, comps) in self.regimes.iter().enumerate() {
            if comps.is_empty() {
                return Err(DgpError::InvalidSpec(format!("regime {k} has no components")));
            }
            let total: S = comps.iter().map(|c| c.weight).sum();
            if (total - S::one()).abs() > S::from_f64(1e-9) {
                return Err(DgpError::InvalidSpec(format!(
                    "regime {k} component weights sum to {}",
                    total.to_f64_lossy()
                )));
            }
            for c in comps {
                if !(c.gamma_center > S::zero()) {
                    return Err(DgpError::InvalidSpec("gamma centers must be positive".into()));
                }
            }
        }
        for &a in &self.garch_concentration {
            if !(a > S::zero()) {
                return Err(DgpError::InvalidSpec(
                    "Dirichlet concentration must be positive".into(),
                ));
            }
        }
        if !(self.persistence > S::zero() && self.persistence < S::one()) {
            return Err(DgpError::InvalidSpec("persistence must lie in (0, 1)".into()));
        }
        if !(self.persistence_precision > S::zero()) {
            return Err(DgpError::InvalidSpec("persistence precision must be positive".into()));
        }
        Ok(())
    }
}

/// Everything the generator knows about a simulated panel.
#[derive(Debug, Clone)]
pub struct GroundTruth<S> {
    pub params: Vec<RegimeParams<S>>,
    pub trans: Vec<TransitionMatrix<S>>,
    pub paths: Vec<HiddenPath>,
    /// labels[k][i]: which mixture component generated unit i in regime k.
    pub labels: Vec<Vec<usize>>,
    pub sigma0: Vec<S>,
}

/// Draw per-unit regime parameters and component labels from the DGP.
/// Each unit uses its own deterministic RNG sub-stream.
pub fn sample_dgp_parameters<S: Scalar>(
    spec: &DGPSpec<S>,
) -> Result<(Vec<RegimeParams<S>>, Vec<Vec<usize>>), DgpError> {
    spec.validate()?;
    let k = spec.n_regimes();
    let mut params = Vec::with_capacity(spec.n_units);
    let mut labels = vec![vec![0usize; spec.n_units]; k];
    for (i, mut rng) in unit_rngs(spec.seed, spec.n_units).into_iter().enumerate() {
        let mut mu = Vec::with_capacity(k);
        let mut gamma = Vec::with_capacity(k);
        let mut alpha = Vec::with_capacity(k);
        let mut beta = Vec::with_capacity(k);
        for (kk, comps) in spec.regimes.iter().enumerate() {
            let u = S::sample_open01(&mut rng);
            let mut acc = S::zero();
            let mut chosen = comps.len() - 1;
            for (c, comp) in comps.iter().enumerate() {
                acc += comp.weight;
                if u < acc {
                    chosen = c;
                    break;
                }
            }
            labels[kk][i] = chosen;
            let comp = comps[chosen];
            let eta = S::sample_standard_normal(&mut rng);
            mu.push(comp.mu_center + spec.perturbation_scale * eta);
            let zeta = S::sample_standard_normal(&mut rng);
            gamma.push(comp.gamma_center + spec.perturbation_scale * zeta * zeta);
            let w = sample_dirichlet(&spec.garch_concentration, &mut rng);
            // The slack coordinate keeps alpha + beta < 1 almost surely.
            assert!(w[2] > S::zero(), "Dirichlet slack coordinate must be positive");
            alpha.push(w[0]);
            beta.push(w[1]);
        }
        params.push(RegimeParams::new(mu, gamma, alpha, beta));
    }
    Ok((params, labels))
}

/// Two-regime persistent transition matrices: each diagonal entry is
/// Beta(precision * p, precision * (1 - p)); an infinite precision collapses
/// to p exactly.
pub fn sample_transition_matrices<S: Scalar, R: Rng + ?Sized>(
    p: S,
    precision: S,
    n_units: usize,
    rng: &mut R,
) -> Result<Vec<TransitionMatrix<S>>, DgpError> {
    if !(p > S::zero() && p < S::one()) {
        return Err(DgpError::InvalidSpec("persistence must lie in (0, 1)".into()));
    }
    if !(precision > S::zero()) {
        return Err(DgpError::InvalidSpec("precision must be positive".into()));
    }
    let mut out = Vec::with_capacity(n_units);
    for _ in 0..n_units {
        let mut diag = [S::zero(); 2];
        for d in diag.iter_mut() {
            *d = if precision.is_infinite() {
                p
            } else {
                sample_beta(precision * p, precision * (S::one() - p), rng)
            };
        }
        let rows = vec![
            vec![diag[0], S::one() - diag[0]],
            vec![S::one() - diag[1], diag[1]],
        ];
        out.push(TransitionMatrix::from_rows(&rows)?);
    }
    Ok(out)
}

/// Simulate one regime path of length `t`.
pub fn simulate_path<S: Scalar, R: Rng + ?Sized>(
    trans: &TransitionMatrix<S>,
    init_probs: &[S],
    t: usize,
    rng: &mut R,
) -> HiddenPath {
    let mut states = Vec::with_capacity(t);
    let mut current = sample_categorical(init_probs, rng);
    states.push(current);
    for _ in 1..t {
        current = sample_categorical(trans.row(current), rng);
        states.push(current);
    }
    HiddenPath::new(states)
}

pub(crate) fn sample_categorical<S: Scalar, R: Rng + ?Sized>(probs: &[S], rng: &mut R) -> usize {
    let u = S::sample_open01(rng);
    let mut acc = S::zero();
    for (idx, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return idx;
        }
    }
    probs.len() - 1
}

/// Simulate observations along a fixed path through the switching GARCH
/// recursion with standard normal innovations.
pub fn simulate_observations<S: Scalar, R: Rng + ?Sized>(
    params: &RegimeParams<S>,
    path: &HiddenPath,
    sigma0_sq: S,
    rng: &mut R,
) -> Vec<S> {
    let mut y = Vec::with_capacity(path.len());
    let mut prev_var = sigma0_sq;
    let mut prev_eps_sq = S::zero();
    for &s in &path.states {
        let var = params.gamma[s] + params.alpha[s] * prev_eps_sq + params.beta[s] * prev_var;
        let eps = S::sample_standard_normal(rng);
        let obs = params.mu[s] + var.sqrt() * eps;
        y.push(obs);
        let resid = obs - params.mu[s];
        prev_eps_sq = resid * resid;
        prev_var = var;
    }
    y
}

/// Variance of the GARCH recursion in regime `s` when the chain never leaves
/// it; used to start the simulated recursion at a sensible scale.
fn regime_stationary_variance<S: Scalar>(params: &RegimeParams<S>, s: usize) -> S {
    let persistence = params.alpha[s] + params.beta[s];
    if persistence < S::one() {
        params.gamma[s] / (S::one() - persistence)
    } else {
        params.gamma[s]
    }
}

/// Simulate the full panel: per-unit chains from their stationary start and
/// the GARCH recursion on top. Bit-reproducible for a fixed seed; unit i
/// consumes only its own RNG sub-stream.
pub fn simulate_panel<S: Scalar>(
    params: &[RegimeParams<S>],
    trans: &[TransitionMatrix<S>],
    labels: &[Vec<usize>],
    n_obs: usize,
    seed: u64,
) -> Result<(Panel<S>, GroundTruth<S>), DgpError> {
    let n = params.len();
    let mut rows = Vec::with_capacity(n);
    let mut paths = Vec::with_capacity(n);
    let mut sigma0 = Vec::with_capacity(n);
    for (i, mut rng) in unit_rngs(seed, n).into_iter().enumerate() {
        let init = trans[i].stationary();
        let path = simulate_path(&trans[i], &init, n_obs, &mut rng);
        let s0 = regime_stationary_variance(&params[i], path.states[0]);
        let y = simulate_observations(&params[i], &path, s0, &mut rng);
        rows.push(y);
        paths.push(path);
        sigma0.push(s0);
    }
    let panel = Panel::from_rows(rows)?;
    let truth = GroundTruth {
        params: params.to_vec(),
        trans: trans.to_vec(),
        paths,
        labels: labels.to_vec(),
        sigma0,
    };
    Ok((panel, truth))
}

/// Generate the benchmark panel end to end.
pub fn generate_benchmark<S: Scalar>(
    spec: &DGPSpec<S>,
) -> Result<(Panel<S>, GroundTruth<S>), DgpError> {
    if spec.n_regimes() != 2 {
        return Err(DgpError::TwoRegimeOnly(spec.n_regimes()));
    }
    let (params, labels) = sample_dgp_parameters(spec)?;
    let mut trans_rng = stream_rng(spec.seed, GLOBAL_STREAM);
    let trans = sample_transition_matrices(
        spec.persistence,
        spec.persistence_precision,
        spec.n_units,
        &mut trans_rng,
    )?;
    simulate_panel(&params, &trans, &labels, spec.n_obs, spec.seed)
}

/// One draw of every latent variable of the hierarchical model, plus the
/// panel it generates. This is the forward simulator of the joint prior.
#[derive(Debug, Clone)]
pub struct PriorDraw<S> {
    pub common: CommonTransitionMean<S>,
    pub trans: Vec<TransitionMatrix<S>>,
    /// Stick proportions per regime.
    pub sticks: Vec<Vec<S>>,
    /// Instantiated atoms per regime (covers every allocated component and
    /// the slice truncation).
    pub atoms: Vec<Vec<Atom<S>>>,
    /// alloc[i][k]: 0-based mixture component of unit i in regime k.
    pub alloc: Vec<Vec<usize>>,
    /// slices[i][k]: uniform slice variable under the allocated weight.
    pub slices: Vec<Vec<S>>,
    pub params: Vec<RegimeParams<S>>,
    pub paths: Vec<HiddenPath>,
    pub sigma0: Vec<S>,
    pub panel: Panel<S>,
}

impl<S: Scalar> PriorDraw<S> {
    /// Number of occupied mixture components in regime k.
    pub fn occupied(&self, k: usize) -> usize {
        let mut seen = std::collections::BTreeSet::new();
        for d in &self.alloc {
            seen.insert(d[k]);
        }
        seen.len()
    }
}

const STICK_CAP: usize = 10_000;
const ORDERING_CAP: usize = 1_000_000;

/// Simulate the complete hierarchy: common transition means, unit transition
/// matrices, stick-breaking mixtures with their atoms, first-stage parameters
/// under the ordering truncation, hidden paths, and observations.
pub fn prior_draw<S: Scalar, R: Rng + ?Sized>(
    hp: &Hyperparameters<S>,
    n_units: usize,
    n_obs: usize,
    rng: &mut R,
) -> Result<PriorDraw<S>, DgpError> {
    hp.validate().map_err(DgpError::Model)?;
    let k = hp.n_regimes;
    let sigma0_sq = match hp.sigma0 {
        Sigma0Policy::Fixed(v) => v,
        Sigma0Policy::SampleVariance => return Err(DgpError::Sigma0NotGenerative),
    };

    let common_rows: Vec<Vec<S>> = (0..k)
        .map(|_| sample_dirichlet(&vec![hp.d; k], rng))
        .collect();
    let common = CommonTransitionMean { rows: TransitionMatrix::from_rows(&common_rows)? };

    let mut trans = Vec::with_capacity(n_units);
    for _ in 0..n_units {
        let rows: Vec<Vec<S>> = (0..k)
            .map(|kk| {
                let alpha: Vec<S> = common.row(kk).iter().map(|&r| hp.phi * r).collect();
                sample_dirichlet(&alpha, rng)
            })
            .collect();
        trans.push(TransitionMatrix::from_rows(&rows)?);
    }

    // Stick-breaking mixture per regime: allocate units by inverting the
    // weight CDF, extending sticks on demand.
    let mut sticks: Vec<Vec<S>> = vec![Vec::new(); k];
    let mut alloc = vec![vec![0usize; k]; n_units];
    let mut slices = vec![vec![S::zero(); k]; n_units];
    for kk in 0..k {
        let v = &mut sticks[kk];
        let mut w: Vec<S> = Vec::new();
        let mut cum = S::zero();
        for i in 0..n_units {
            let u = S::sample_open01(rng);
            let mut h = 0usize;
            let mut acc = S::zero();
            loop {
                if h >= w.len() {
                    extend_sticks(hp, v, &mut w, &mut cum, rng)?;
                }
                acc += w[h];
                if u < acc {
                    break;
                }
                h += 1;
            }
            alloc[i][kk] = h;
            slices[i][kk] = w[h] * S::sample_open01(rng);
        }
        // Extend until the usual slice truncation rule holds.
        let u_min = (0..n_units)
            .map(|i| slices[i][kk])
            .fold(S::infinity(), |a, b| a.min(b));
        while cum <= S::one() - u_min {
            extend_sticks(hp, v, &mut w, &mut cum, rng)?;
        }
    }
    let atoms: Vec<Vec<Atom<S>>> = sticks
        .iter()
        .map(|v| (0..v.len()).map(|_| sample_base_atom(hp, rng)).collect())
        .collect();

    // First stage given the atoms; regime means are redrawn jointly until
    // the identification ordering holds.
    let mut params = Vec::with_capacity(n_units);
    for i in 0..n_units {
        let unit_atoms: Vec<&Atom<S>> = (0..k).map(|kk| &atoms[kk][alloc[i][kk]]).collect();
        let mut gamma = Vec::with_capacity(k);
        let mut alpha_v = Vec::with_capacity(k);
        let mut beta_v = Vec::with_capacity(k);
        for atom in &unit_atoms {
            let gm = atom.gamma / hp.a;
            gamma.push(hp.a * sample_beta(hp.r * gm, hp.r * (S::one() - gm), rng));
            alpha_v.push(sample_beta(hp.r * atom.alpha, hp.r * (S::one() - atom.alpha), rng));
            beta_v.push(sample_beta(hp.r * atom.beta, hp.r * (S::one() - atom.beta), rng));
        }
        let atom_mu: Vec<S> = unit_atoms.iter().map(|a| a.mu).collect();
        let mu = sample_ordered_means(&atom_mu, hp.s, rng)?;
        params.push(RegimeParams::new(mu, gamma, alpha_v, beta_v));
    }

    let mut paths = Vec::with_capacity(n_units);
    let mut rows = Vec::with_capacity(n_units);
    for i in 0..n_units {
        let init = hp.initial_state.probs(&trans[i]);
        let path = simulate_path(&trans[i], &init, n_obs, rng);
        let y = simulate_observations(&params[i], &path, sigma0_sq, rng);
        paths.push(path);
        rows.push(y);
    }
    let panel = Panel::from_rows(rows)?;
    Ok(PriorDraw {
        common,
        trans,
        sticks,
        atoms,
        alloc,
        slices,
        params,
        paths,
        sigma0: vec![sigma0_sq; n_units],
        panel,
    })
}

/// Draw (mu_1, ..., mu_K) with mu_k ~ N(center_k, s) jointly conditioned on
/// mu_1 > ... > mu_K. For K <= 2 the draw is exact (for K = 2 the difference
/// and the sum of the pair are independent normals and only the difference is
/// truncated); larger K falls back to rejection with a retry cap.
pub fn sample_ordered_means<S: Scalar, R: Rng + ?Sized>(
    centers: &[S],
    s: S,
    rng: &mut R,
) -> Result<Vec<S>, DgpError> {
    let k = centers.len();
    match k {
        1 => Ok(vec![sample_normal(centers[0], s, rng)]),
        2 => {
            let sqrt2 = S::from_f64(2.0).sqrt();
            let diff_mean = centers[0] - centers[1];
            let diff_sd = sqrt2 * s;
            let z = crate::dist::sample_trunc_std_normal_above(-diff_mean / diff_sd, rng);
            let diff = diff_mean + diff_sd * z;
            let sum = sample_normal(centers[0] + centers[1], diff_sd, rng);
            let half = S::from_f64(0.5);
            Ok(vec![half * (sum + diff), half * (sum - diff)])
        }
        _ => {
            let mut attempts = 0usize;
            loop {
                let mu: Vec<S> = centers.iter().map(|&c| sample_normal(c, s, rng)).collect();
                if mu.windows(2).all(|w| w[0] > w[1]) {
                    return Ok(mu);
                }
                attempts += 1;
                if attempts >= ORDERING_CAP {
                    return Err(DgpError::OrderingRejectionCap(ORDERING_CAP));
                }
            }
        }
    }
}

fn extend_sticks<S: Scalar, R: Rng + ?Sized>(
    hp: &Hyperparameters<S>,
    v: &mut Vec<S>,
    w: &mut Vec<S>,
    cum: &mut S,
    rng: &mut R,
) -> Result<(), DgpError> {
    if v.len() >= STICK_CAP {
        return Err(DgpError::StickCap(STICK_CAP));
    }
    let remaining = S::one() - *cum;
    let vl = sample_prior_stick(hp.nu, hp.psi, v.len() + 1, rng);
    let wl = vl * remaining;
    v.push(vl);
    w.push(wl);
    *cum += wl;
    Ok(())
}

/// A panel drawn from the joint prior.
pub fn prior_predictive_panel<S: Scalar, R: Rng + ?Sized>(
    hp: &Hyperparameters<S>,
    n_units: usize,
    n_obs: usize,
    rng: &mut R,
) -> Result<Panel<S>, DgpError> {
    Ok(prior_draw(hp, n_units, n_obs, rng)?.panel)
}

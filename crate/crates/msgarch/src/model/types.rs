use thiserror::Error;

use crate::linalg::stationary_distribution;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("sigma0_sq must be strictly positive, got {0}")]
    NonPositiveSigma0(f64),
    #[error("conditional variance became non-positive at t={t} (value {value}); parameters are outside the admissible set")]
    VarianceUnderflow { t: usize, value: f64 },
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("path enumeration guard exceeded: K^T = {0} > 10^6")]
    EnumerationGuard(f64),
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),
    #[error("panel must be rectangular with N >= 1 and T >= 2, got N={n}, T={t}")]
    InvalidPanelShape { n: usize, t: usize },
}

/// Per-unit switching GARCH coefficients, one entry per regime.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeParams<S> {
    pub mu: Vec<S>,
    pub gamma: Vec<S>,
    pub alpha: Vec<S>,
    pub beta: Vec<S>,
}

impl<S: Scalar> RegimeParams<S> {
    pub fn new(mu: Vec<S>, gamma: Vec<S>, alpha: Vec<S>, beta: Vec<S>) -> Self {
        Self { mu, gamma, alpha, beta }
    }

    pub fn n_regimes(&self) -> usize {
        self.mu.len()
    }

    /// Check supports and the identification ordering mu_1 > ... > mu_K.
    pub fn validate(&self, gamma_upper: S) -> Result<(), ModelError> {
        let k = self.n_regimes();
        if self.gamma.len() != k || self.alpha.len() != k || self.beta.len() != k {
            return Err(ModelError::LengthMismatch(
                "regime coefficient vectors differ in length".into(),
            ));
        }
        for j in 0..k {
            if !(self.gamma[j] > S::zero() && self.gamma[j] <= gamma_upper) {
                return Err(ModelError::ParameterOutOfRange(format!(
                    "gamma[{j}] = {} outside (0, {}]",
                    self.gamma[j].to_f64_lossy(),
                    gamma_upper.to_f64_lossy()
                )));
            }
            for (name, v) in [("alpha", self.alpha[j]), ("beta", self.beta[j])] {
                if !(v > S::zero() && v < S::one()) {
                    return Err(ModelError::ParameterOutOfRange(format!(
                        "{name}[{j}] = {} outside (0, 1)",
                        v.to_f64_lossy()
                    )));
                }
            }
        }
        if !ordered_desc(&self.mu) {
            return Err(ModelError::ParameterOutOfRange(
                "regime means must be strictly decreasing".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn ordered_desc<S: Scalar>(mu: &[S]) -> bool {
    mu.windows(2).all(|w| w[0] > w[1])
}

/// Row-stochastic K x K matrix; rows index the current state, columns the
/// next state.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix<S> {
    p: Vec<S>,
    k: usize,
}

impl<S: Scalar> TransitionMatrix<S> {
    pub fn new(p: Vec<S>, k: usize) -> Result<Self, ModelError> {
        if p.len() != k * k {
            return Err(ModelError::LengthMismatch(format!(
                "transition matrix needs {} entries, got {}",
                k * k,
                p.len()
            )));
        }
        let m = Self { p, k };
        m.validate()?;
        Ok(m)
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self, ModelError> {
        let k = rows.len();
        let mut p = Vec::with_capacity(k * k);
        for r in rows {
            if r.len() != k {
                return Err(ModelError::LengthMismatch("ragged transition rows".into()));
            }
            p.extend_from_slice(r);
        }
        Self::new(p, k)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let tol = S::from_f64(1e-12);
        for r in 0..self.k {
            let row = self.row(r);
            let mut sum = S::zero();
            for &v in row {
                if v < S::zero() || v > S::one() {
                    return Err(ModelError::ParameterOutOfRange(format!(
                        "transition probability {} outside [0, 1]",
                        v.to_f64_lossy()
                    )));
                }
                sum += v;
            }
            if (sum - S::one()).abs() > tol {
                return Err(ModelError::ParameterOutOfRange(format!(
                    "transition row {r} sums to {}",
                    sum.to_f64_lossy()
                )));
            }
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.k
    }

    pub fn row(&self, from: usize) -> &[S] {
        &self.p[from * self.k..(from + 1) * self.k]
    }

    pub fn prob(&self, from: usize, to: usize) -> S {
        self.p[from * self.k + to]
    }

    pub fn set_row(&mut self, from: usize, row: &[S]) {
        self.p[from * self.k..(from + 1) * self.k].copy_from_slice(row);
    }

    pub fn stationary(&self) -> Vec<S> {
        stationary_distribution(&self.p, self.k)
    }
}

/// Common row means of the unit transition matrices (second prior stage).
#[derive(Debug, Clone, PartialEq)]
pub struct CommonTransitionMean<S> {
    pub rows: TransitionMatrix<S>,
}

impl<S: Scalar> CommonTransitionMean<S> {
    pub fn uniform(k: usize) -> Self {
        let w = S::one() / S::from_f64(k as f64);
        Self {
            rows: TransitionMatrix::new(vec![w; k * k], k).expect("uniform rows are stochastic"),
        }
    }

    pub fn row(&self, k: usize) -> &[S] {
        self.rows.row(k)
    }
}

/// Regime path of one unit; entries are 0-based regime indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HiddenPath {
    pub states: Vec<usize>,
}

impl HiddenPath {
    pub fn new(states: Vec<usize>) -> Self {
        Self { states }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Transition counts n[from][to] over t = 2..T.
    pub fn transition_counts(&self, k: usize) -> Vec<usize> {
        let mut n = vec![0usize; k * k];
        for w in self.states.windows(2) {
            n[w[0] * k + w[1]] += 1;
        }
        n
    }

    /// Fraction of time spent in each regime.
    pub fn occupancy<S: Scalar>(&self, k: usize) -> Vec<S> {
        let mut f = vec![S::zero(); k];
        let inv = S::one() / S::from_f64(self.states.len() as f64);
        for &s in &self.states {
            f[s] += inv;
        }
        f
    }
}

/// Rectangular panel of observations: N units by T time points.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel<S> {
    values: Vec<S>,
    n_units: usize,
    n_obs: usize,
    pub unit_labels: Vec<String>,
    pub time_labels: Vec<String>,
}

impl<S: Scalar> Panel<S> {
    pub fn new(
        values: Vec<S>,
        n_units: usize,
        n_obs: usize,
        unit_labels: Vec<String>,
        time_labels: Vec<String>,
    ) -> Result<Self, ModelError> {
        if n_units < 1 || n_obs < 2 || values.len() != n_units * n_obs {
            return Err(ModelError::InvalidPanelShape { n: n_units, t: n_obs });
        }
        if unit_labels.len() != n_units || time_labels.len() != n_obs {
            return Err(ModelError::LengthMismatch("panel labels".into()));
        }
        Ok(Self { values, n_units, n_obs, unit_labels, time_labels })
    }

    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self, ModelError> {
        let n = rows.len();
        let t = rows.first().map_or(0, |r| r.len());
        let mut values = Vec::with_capacity(n * t);
        for r in &rows {
            if r.len() != t {
                return Err(ModelError::LengthMismatch("ragged panel rows".into()));
            }
            values.extend_from_slice(r);
        }
        let unit_labels = (1..=n).map(|i| format!("unit{i}")).collect();
        let time_labels = (1..=t).map(|j| format!("{j}")).collect();
        Self::new(values, n, t, unit_labels, time_labels)
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn series(&self, unit: usize) -> &[S] {
        &self.values[unit * self.n_obs..(unit + 1) * self.n_obs]
    }

    /// Sample variance (denominator T - 1) of one unit's series.
    pub fn sample_variance(&self, unit: usize) -> S {
        let y = self.series(unit);
        let n = S::from_f64(y.len() as f64);
        let mean: S = y.iter().copied().sum::<S>() / n;
        let ss: S = y.iter().map(|&v| (v - mean) * (v - mean)).sum();
        ss / (n - S::one())
    }

    /// Reorder units; labels follow.
    pub fn permute_units(&self, order: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        let mut labels = Vec::with_capacity(self.n_units);
        for &i in order {
            values.extend_from_slice(self.series(i));
            labels.push(self.unit_labels[i].clone());
        }
        Self {
            values,
            n_units: self.n_units,
            n_obs: self.n_obs,
            unit_labels: labels,
            time_labels: self.time_labels.clone(),
        }
    }
}

/// How sigma^2_0 is chosen when filtering a series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sigma0Policy<S> {
    /// Sample variance of the observed series (scale adaptive).
    SampleVariance,
    Fixed(S),
}

/// Distribution of the initial regime in the likelihood and the simulators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialStateDist {
    /// Stationary distribution of the unit's transition matrix.
    Stationary,
    /// Uniform over regimes; keeps every full conditional in closed form.
    Uniform,
}

impl InitialStateDist {
    pub fn probs<S: Scalar>(&self, p: &TransitionMatrix<S>) -> Vec<S> {
        match self {
            InitialStateDist::Stationary => p.stationary(),
            InitialStateDist::Uniform => {
                let k = p.n_states();
                vec![S::one() / S::from_f64(k as f64); k]
            }
        }
    }
}

/// Fixed constants of the hierarchical prior.
#[derive(Debug, Clone, PartialEq)]
pub struct Hyperparameters<S> {
    /// Number of regimes.
    pub n_regimes: usize,
    /// First-stage standard deviation of the regime means.
    pub s: S,
    /// First-stage beta precision.
    pub r: S,
    /// Upper bound of the GARCH intercept support.
    pub a: S,
    /// Base-measure normal mean for the regime-mean atoms.
    pub m_star: S,
    /// Base-measure normal standard deviation for the regime-mean atoms.
    pub s_star: S,
    /// Pitman-Yor discount in [0, 1).
    pub nu: S,
    /// Pitman-Yor concentration, > -nu.
    pub psi: S,
    /// Dirichlet precision of the transition rows.
    pub phi: S,
    /// Hyperparameter of the Dirichlet prior on the common row means.
    pub d: S,
    pub sigma0: Sigma0Policy<S>,
    pub initial_state: InitialStateDist,
}

impl<S: Scalar> Hyperparameters<S> {
    /// Defaults with d = 1/K, adaptive sigma^2_0, stationary initial state.
    pub fn new(n_regimes: usize) -> Self {
        let k = S::from_f64(n_regimes as f64);
        Self {
            n_regimes,
            s: S::from_f64(0.1),
            r: S::from_f64(100.0),
            a: S::from_f64(2.0),
            m_star: S::zero(),
            s_star: S::from_f64(2.0),
            nu: S::zero(),
            psi: S::from_f64(10.0),
            phi: S::from_f64(10.0),
            d: S::one() / k,
            sigma0: Sigma0Policy::SampleVariance,
            initial_state: InitialStateDist::Stationary,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let mut problems = Vec::new();
        if self.n_regimes < 1 {
            problems.push("K must be >= 1".to_string());
        }
        if !(self.s > S::zero()) {
            problems.push("s must be > 0".to_string());
        }
        if !(self.r > S::zero()) {
            problems.push("r must be > 0".to_string());
        }
        if !(self.a > S::zero()) {
            problems.push("a must be > 0".to_string());
        }
        if !(self.s_star > S::zero()) {
            problems.push("s_star must be > 0".to_string());
        }
        if !(self.nu >= S::zero() && self.nu < S::one()) {
            problems.push("nu must lie in [0, 1)".to_string());
        }
        if !(self.psi > -self.nu) {
            problems.push("psi must exceed -nu".to_string());
        }
        if !(self.phi > S::zero()) {
            problems.push("phi must be > 0".to_string());
        }
        if !(self.d > S::zero()) {
            problems.push("d must be > 0".to_string());
        }
        if let Sigma0Policy::Fixed(v) = self.sigma0 {
            if !(v > S::zero()) {
                problems.push("fixed sigma0_sq must be > 0".to_string());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ModelError::InvalidHyperparameters(problems.join("; ")))
        }
    }

    pub fn sigma0_for<'a>(&self, panel: &Panel<S>, unit: usize) -> S {
        match self.sigma0 {
            Sigma0Policy::SampleVariance => panel.sample_variance(unit),
            Sigma0Policy::Fixed(v) => v,
        }
    }
}

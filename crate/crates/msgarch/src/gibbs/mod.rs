//! Six-block Gibbs sampler for the panel model: (1) sticks and slices,
//! (2) transition rows and their common means, (3) mixture atoms, (4) unit
//! MS-GARCH parameters, (5) hidden paths, (6) mixture allocations.
//!
//! Per-unit blocks consume dedicated RNG sub-streams, so results are
//! bit-identical whether units run serially or in parallel, and permuting
//! units together with their streams permutes the draws.

mod allocations;
mod atoms;
mod init;
mod paths;
mod state;
mod sticks;
mod transitions;
mod unit_params;

pub use allocations::{allocation_log_weight, update_allocations};
pub use atoms::{atom_mean_moments, ordering_log_prob, truncated_exp_rate, update_atoms};
pub use paths::{
    backward_sample, forward_filter, path_log_density, update_hidden_path, ForwardFilter,
};
pub use state::{ChainState, SliceState, StickState};
pub use sticks::{stick_conditional, update_sticks_and_slices};
pub use transitions::{
    common_mean_log_g, transition_row_posterior, update_common_transition_mean,
    update_transition_rows,
};
pub use unit_params::{
    garch_linearization, mu_proposal_moments, update_unit_garch, update_unit_mu,
    GarchLinearization, MuProposalMoments,
};

/// How many times the volatility-block MH kernel is composed per sweep. The
/// pinned proposal (full-covariance walk plus a thin independence component
/// in 3K dimensions) accepts rarely per attempt, so the block is iterated;
/// composing an invariant kernel keeps the sweep exact.
pub const GARCH_BLOCK_REPEATS: usize = 25;

/// Extra (sticks, atoms, allocations) passes appended to each sweep. The
/// clustering structure mixes through these blocks, which cost little next
/// to the per-unit updates; composing them accelerates component merges and
/// births without changing the invariant distribution.
pub const CLUSTER_BLOCK_REPEATS: usize = 3;

use rayon::prelude::*;
use thiserror::Error;

use rand_chacha::ChaCha8Rng;

use crate::model::{
    HiddenPath, Hyperparameters, ModelError, Panel, RegimeParams, TransitionMatrix,
};
use crate::pyp::PypError;
use crate::rng::{stream_rng, GLOBAL_STREAM};
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Pyp(#[from] PypError),
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("stick truncation exceeded {0} components")]
    TruncationCap(usize),
    #[error("forward filter underflowed at t = {t}")]
    FilterUnderflow { t: usize },
    #[error("empty slice candidate set for unit {unit}, regime {regime}: state invariant violated")]
    EmptySliceSet { unit: usize, regime: usize },
    #[error("atom full-conditional rate is not finite (member parameter at a support boundary)")]
    AtomRateNotFinite,
    #[error("exact-MH corrections are implemented for K <= 2, got K = {0}")]
    ExactModeUnsupported(usize),
    #[error("chain state invariant violated: {0}")]
    StateInvariant(String),
}

/// Run-time knobs of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    /// Weight of the independence component in the two-component mixture
    /// proposals (the rest is a random walk).
    pub independence_weight: f64,
    /// Replace the approximate atom draws by exact Metropolis-Hastings
    /// corrections (and account for the ordered-mean normalization in the
    /// atom and allocation updates).
    pub exact_mh: bool,
    /// 1 = serial; anything larger lets the per-unit blocks run on the
    /// global thread pool. Results are identical either way.
    pub parallelism: usize,
    /// Keep full hidden paths in each stored draw.
    pub store_paths: bool,
    /// Explicit RNG sub-stream per unit; defaults to 1..=N.
    pub unit_streams: Option<Vec<u64>>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            burn_in: 500,
            thinning: 1,
            seed: 0,
            independence_weight: 0.05,
            exact_mh: false,
            parallelism: 1,
            store_paths: false,
            unit_streams: None,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self, n_units: usize) -> Result<(), SamplerError> {
        if self.burn_in >= self.iterations {
            return Err(SamplerError::InvalidConfig(format!(
                "burn-in {} must be smaller than iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thinning == 0 {
            return Err(SamplerError::InvalidConfig("thinning must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.independence_weight) {
            return Err(SamplerError::InvalidConfig(
                "independence weight must lie in [0, 1]".into(),
            ));
        }
        if let Some(streams) = &self.unit_streams {
            if streams.len() != n_units {
                return Err(SamplerError::InvalidConfig(format!(
                    "{} unit streams for {} units",
                    streams.len(),
                    n_units
                )));
            }
        }
        Ok(())
    }
}

/// Acceptance fractions of one sweep, per Metropolis-Hastings block.
#[derive(Debug, Clone, Copy, Default)]
pub struct SweepStats {
    pub mu: f64,
    pub garch: f64,
    pub path: f64,
    pub common_mean: f64,
    pub atoms: f64,
}

/// Per-sweep acceptance fractions over the whole run.
#[derive(Debug, Clone, Default)]
pub struct AcceptanceTrace {
    pub mu: Vec<f64>,
    pub garch: Vec<f64>,
    pub path: Vec<f64>,
    pub common_mean: Vec<f64>,
    pub atoms: Vec<f64>,
}

impl AcceptanceTrace {
    fn push(&mut self, s: SweepStats) {
        self.mu.push(s.mu);
        self.garch.push(s.garch);
        self.path.push(s.path);
        self.common_mean.push(s.common_mean);
        self.atoms.push(s.atoms);
    }

    pub fn mean_of(values: &[f64]) -> f64 {
        if values.is_empty() {
            return f64::NAN;
        }
        values.iter().sum::<f64>() / values.len() as f64
    }
}

/// One stored draw.
#[derive(Debug, Clone)]
pub struct DrawSnapshot<S> {
    pub sweep: usize,
    pub params: Vec<RegimeParams<S>>,
    pub trans: Vec<TransitionMatrix<S>>,
    /// Allocations, row-major (unit, regime).
    pub alloc: Vec<usize>,
    /// Occupied component count per regime.
    pub occupied: Vec<usize>,
    /// Regime occupancy fractions, row-major (unit, regime).
    pub occupancy: Vec<S>,
    pub paths: Option<Vec<HiddenPath>>,
}

/// Thinned post-burn-in draws plus per-sweep diagnostics.
#[derive(Debug, Clone)]
pub struct PosteriorDraws<S> {
    pub snapshots: Vec<DrawSnapshot<S>>,
    pub acceptance: AcceptanceTrace,
    /// Occupied-cluster counts for every sweep (not only stored ones).
    pub occupied_trace: Vec<Vec<usize>>,
    pub n_units: usize,
    pub n_regimes: usize,
    pub unit_labels: Vec<String>,
}

impl<S: Scalar> PosteriorDraws<S> {
    pub fn n_draws(&self) -> usize {
        self.snapshots.len()
    }
}

pub struct GibbsSampler<S: Scalar> {
    hp: Hyperparameters<S>,
    panel: Panel<S>,
    cfg: SamplerConfig,
    state: ChainState<S>,
    global_rng: ChaCha8Rng,
    unit_rngs: Vec<ChaCha8Rng>,
}

impl<S: Scalar> GibbsSampler<S> {
    pub fn new(
        panel: Panel<S>,
        hp: Hyperparameters<S>,
        cfg: SamplerConfig,
    ) -> Result<Self, SamplerError> {
        hp.validate().map_err(SamplerError::Model)?;
        cfg.validate(panel.n_units())?;
        if cfg.exact_mh && hp.n_regimes > 2 {
            return Err(SamplerError::ExactModeUnsupported(hp.n_regimes));
        }
        let mut global_rng = stream_rng(cfg.seed, GLOBAL_STREAM);
        let mut unit_rngs = Self::make_unit_rngs(&cfg, panel.n_units());
        let state = init::init_state(&panel, &hp, &mut global_rng, &mut unit_rngs)?;
        Ok(Self { hp, panel, cfg, state, global_rng, unit_rngs })
    }

    /// Start from an externally constructed state (e.g. a draw from the
    /// joint prior).
    pub fn with_state(
        panel: Panel<S>,
        hp: Hyperparameters<S>,
        cfg: SamplerConfig,
        state: ChainState<S>,
    ) -> Result<Self, SamplerError> {
        hp.validate().map_err(SamplerError::Model)?;
        cfg.validate(panel.n_units())?;
        if cfg.exact_mh && hp.n_regimes > 2 {
            return Err(SamplerError::ExactModeUnsupported(hp.n_regimes));
        }
        state.validate(&hp, &panel)?;
        let global_rng = stream_rng(cfg.seed, GLOBAL_STREAM);
        let unit_rngs = Self::make_unit_rngs(&cfg, panel.n_units());
        Ok(Self { hp, panel, cfg, state, global_rng, unit_rngs })
    }

    fn make_unit_rngs(cfg: &SamplerConfig, n_units: usize) -> Vec<ChaCha8Rng> {
        match &cfg.unit_streams {
            Some(streams) => streams.iter().map(|&s| stream_rng(cfg.seed, s)).collect(),
            None => crate::rng::unit_rngs(cfg.seed, n_units),
        }
    }

    pub fn state(&self) -> &ChainState<S> {
        &self.state
    }

    pub fn hp(&self) -> &Hyperparameters<S> {
        &self.hp
    }

    pub fn panel(&self) -> &Panel<S> {
        &self.panel
    }

    /// Swap in a new panel of identical shape (successive-conditional
    /// simulation); sigma^2_0 is re-resolved under the configured policy.
    pub fn replace_panel(&mut self, panel: Panel<S>) -> Result<(), SamplerError> {
        if panel.n_units() != self.panel.n_units() || panel.n_obs() != self.panel.n_obs() {
            return Err(SamplerError::InvalidConfig("replacement panel shape differs".into()));
        }
        for i in 0..panel.n_units() {
            self.state.sigma0[i] = self.hp.sigma0_for(&panel, i);
        }
        self.panel = panel;
        Ok(())
    }

    /// One full sweep over the six blocks, in the fixed order.
    pub fn sweep(&mut self) -> Result<SweepStats, SamplerError> {
        let n = self.panel.n_units();
        let exact = self.cfg.exact_mh;
        let w_indep = S::from_f64(self.cfg.independence_weight);
        let mut stats = SweepStats::default();

        // 1. Sticks and slices.
        update_sticks_and_slices(
            &mut self.state.sticks,
            &mut self.state.slices,
            &self.hp,
            &mut self.global_rng,
            &mut self.unit_rngs,
        )?;

        // 2. Common transition means, then unit transition rows.
        let (acc, att) = update_common_transition_mean(
            &mut self.state.common,
            &self.state.paths,
            &self.hp,
            &mut self.global_rng,
        )?;
        stats.common_mean = if att > 0 { acc as f64 / att as f64 } else { 1.0 };
        update_transition_rows(
            &mut self.state.trans,
            &self.state.paths,
            &self.state.common,
            &self.hp,
            &mut self.unit_rngs,
        )?;

        // 3. Atoms.
        let (acc, att) = update_atoms(
            &mut self.state.atoms,
            &self.state.sticks,
            &self.state.slices,
            &self.state.params,
            &self.hp,
            exact,
            &mut self.global_rng,
        )?;
        stats.atoms = if att > 0 { acc as f64 / att as f64 } else { 1.0 };

        // 4 + 5. Per-unit parameter and path updates (parallel over units).
        let hp = &self.hp;
        let panel = &self.panel;
        let atoms = &self.state.atoms;
        let slices = &self.state.slices;
        let sigma0 = &self.state.sigma0;
        let k = hp.n_regimes;
        struct UnitOutcome {
            mu_accepted: bool,
            garch_rate: f64,
            path_accepted: bool,
            error: Option<SamplerError>,
        }
        type UnitJob<'a, S> = (
            usize,
            &'a mut RegimeParams<S>,
            &'a TransitionMatrix<S>,
            &'a mut HiddenPath,
            &'a mut ChaCha8Rng,
        );
        let mut jobs: Vec<UnitJob<'_, S>> = self
            .state
            .params
            .iter_mut()
            .zip(self.state.trans.iter())
            .zip(self.state.paths.iter_mut())
            .zip(self.unit_rngs.iter_mut())
            .enumerate()
            .map(|(i, (((p, t), path), rng))| (i, p, t, path, rng))
            .collect();
        let run_unit = |job: &mut UnitJob<'_, S>| -> UnitOutcome {
            let i = job.0;
            let y = panel.series(i);
            let trans: &TransitionMatrix<S> = job.2;
            let init_probs = hp.initial_state.probs(trans);
            let anchors: Vec<S> = (0..k).map(|kk| atoms[kk][slices.d(i, kk)].mu).collect();
            let mu_accepted = update_unit_mu(
                y, job.1, trans, job.3, sigma0[i], &init_probs, &anchors, hp, w_indep, job.4,
            );
            let atom_refs: Vec<&crate::pyp::Atom<S>> =
                (0..k).map(|kk| &atoms[kk][slices.d(i, kk)]).collect();
            let mut garch_accepts = 0usize;
            for _ in 0..GARCH_BLOCK_REPEATS {
                if update_unit_garch(
                    y, job.1, trans, job.3, sigma0[i], &init_probs, &atom_refs, hp, w_indep,
                    job.4,
                ) {
                    garch_accepts += 1;
                }
            }
            let garch_rate = garch_accepts as f64 / GARCH_BLOCK_REPEATS as f64;
            match update_hidden_path(y, job.1, trans, job.3, sigma0[i], &init_probs, job.4) {
                Ok(path_accepted) => {
                    UnitOutcome { mu_accepted, garch_rate, path_accepted, error: None }
                }
                Err(e) => UnitOutcome {
                    mu_accepted,
                    garch_rate,
                    path_accepted: false,
                    error: Some(e),
                },
            }
        };
        let outcomes: Vec<UnitOutcome> = if self.cfg.parallelism > 1 {
            jobs.par_iter_mut().map(run_unit).collect()
        } else {
            jobs.iter_mut().map(run_unit).collect()
        };
        drop(jobs);
        let mut mu_acc = 0usize;
        let mut garch_acc = 0.0f64;
        let mut path_acc = 0usize;
        for o in outcomes {
            if let Some(e) = o.error {
                return Err(e);
            }
            mu_acc += o.mu_accepted as usize;
            garch_acc += o.garch_rate;
            path_acc += o.path_accepted as usize;
        }
        stats.mu = mu_acc as f64 / n as f64;
        stats.garch = garch_acc / n as f64;
        stats.path = path_acc as f64 / n as f64;

        // 6. Allocations.
        update_allocations(
            &mut self.state.slices,
            &self.state.sticks,
            &self.state.atoms,
            &self.state.params,
            &self.hp,
            exact,
            &mut self.unit_rngs,
        )?;

        // Extra passes over the clustering blocks (sticks, atoms,
        // allocations) to speed up component births and merges.
        for _ in 1..CLUSTER_BLOCK_REPEATS {
            update_sticks_and_slices(
                &mut self.state.sticks,
                &mut self.state.slices,
                &self.hp,
                &mut self.global_rng,
                &mut self.unit_rngs,
            )?;
            let (acc, att) = update_atoms(
                &mut self.state.atoms,
                &self.state.sticks,
                &self.state.slices,
                &self.state.params,
                &self.hp,
                exact,
                &mut self.global_rng,
            )?;
            if att > 0 {
                stats.atoms = (stats.atoms + acc as f64 / att as f64) / 2.0;
            }
            update_allocations(
                &mut self.state.slices,
                &self.state.sticks,
                &self.state.atoms,
                &self.state.params,
                &self.hp,
                exact,
                &mut self.unit_rngs,
            )?;
        }

        self.state.sweep += 1;
        #[cfg(debug_assertions)]
        self.state.validate(&self.hp, &self.panel)?;
        Ok(stats)
    }

    fn snapshot(&self) -> DrawSnapshot<S> {
        let n = self.panel.n_units();
        let k = self.hp.n_regimes;
        let mut occupancy = Vec::with_capacity(n * k);
        for path in &self.state.paths {
            occupancy.extend(path.occupancy::<S>(k));
        }
        DrawSnapshot {
            sweep: self.state.sweep,
            params: self.state.params.clone(),
            trans: self.state.trans.clone(),
            alloc: self.state.slices.alloc_flat().to_vec(),
            occupied: (0..k).map(|kk| self.state.occupied_count(kk)).collect(),
            occupancy,
            paths: if self.cfg.store_paths { Some(self.state.paths.clone()) } else { None },
        }
    }

    /// Run the configured number of sweeps, recording thinned post-burn-in
    /// snapshots and per-sweep diagnostics.
    pub fn run(mut self) -> Result<PosteriorDraws<S>, SamplerError> {
        let mut draws = PosteriorDraws {
            snapshots: Vec::new(),
            acceptance: AcceptanceTrace::default(),
            occupied_trace: Vec::with_capacity(self.cfg.iterations),
            n_units: self.panel.n_units(),
            n_regimes: self.hp.n_regimes,
            unit_labels: self.panel.unit_labels.clone(),
        };
        for sweep in 1..=self.cfg.iterations {
            let stats = self.sweep()?;
            draws.acceptance.push(stats);
            draws
                .occupied_trace
                .push((0..self.hp.n_regimes).map(|kk| self.state.occupied_count(kk)).collect());
            if sweep > self.cfg.burn_in && (sweep - self.cfg.burn_in) % self.cfg.thinning == 0 {
                draws.snapshots.push(self.snapshot());
            }
        }
        Ok(draws)
    }
}

/// Build, run, and collect one chain.
pub fn run_chain<S: Scalar>(
    panel: Panel<S>,
    hp: Hyperparameters<S>,
    cfg: SamplerConfig,
) -> Result<PosteriorDraws<S>, SamplerError> {
    GibbsSampler::new(panel, hp, cfg)?.run()
}

use std::collections::BTreeMap;

use crate::dgp::PriorDraw;
use crate::model::{
    CommonTransitionMean, HiddenPath, Hyperparameters, Panel, RegimeParams, TransitionMatrix,
};
use crate::pyp::{stick_weights, Atom};
use crate::scalar::Scalar;

use super::SamplerError;

/// Stick proportions and their derived weights for one regime.
#[derive(Debug, Clone)]
pub struct StickState<S> {
    pub v: Vec<S>,
    pub w: Vec<S>,
}

impl<S: Scalar> StickState<S> {
    pub fn from_v(v: Vec<S>) -> Result<Self, SamplerError> {
        let (w, _) = stick_weights(&v).map_err(SamplerError::Pyp)?;
        Ok(Self { v, w })
    }

    pub fn recompute(&mut self) {
        let mut remaining = S::one();
        self.w.clear();
        for &vl in &self.v {
            self.w.push(vl * remaining);
            remaining *= S::one() - vl;
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn total_weight(&self) -> S {
        self.w.iter().copied().sum()
    }
}

/// Slice variables and mixture allocations, one pair per (unit, regime).
#[derive(Debug, Clone)]
pub struct SliceState<S> {
    u: Vec<S>,
    d: Vec<usize>,
    n_units: usize,
    n_regimes: usize,
}

impl<S: Scalar> SliceState<S> {
    pub fn new(n_units: usize, n_regimes: usize) -> Self {
        Self {
            u: vec![S::zero(); n_units * n_regimes],
            d: vec![0; n_units * n_regimes],
            n_units,
            n_regimes,
        }
    }

    pub fn n_units(&self) -> usize {
        self.n_units
    }

    pub fn n_regimes(&self) -> usize {
        self.n_regimes
    }

    pub fn u(&self, unit: usize, regime: usize) -> S {
        self.u[unit * self.n_regimes + regime]
    }

    pub fn d(&self, unit: usize, regime: usize) -> usize {
        self.d[unit * self.n_regimes + regime]
    }

    pub fn set_u(&mut self, unit: usize, regime: usize, value: S) {
        self.u[unit * self.n_regimes + regime] = value;
    }

    pub fn set_d(&mut self, unit: usize, regime: usize, value: usize) {
        self.d[unit * self.n_regimes + regime] = value;
    }

    /// Highest allocated component index in a regime.
    pub fn d_star(&self, regime: usize) -> usize {
        (0..self.n_units).map(|i| self.d(i, regime)).max().unwrap_or(0)
    }

    /// Smallest slice variable in a regime.
    pub fn u_min(&self, regime: usize) -> S {
        (0..self.n_units)
            .map(|i| self.u(i, regime))
            .fold(S::infinity(), |a, b| a.min(b))
    }

    /// Map from occupied component index to its member units (sorted).
    pub fn occupied(&self, regime: usize) -> BTreeMap<usize, Vec<usize>> {
        let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for i in 0..self.n_units {
            map.entry(self.d(i, regime)).or_default().push(i);
        }
        map
    }

    pub fn occupied_count(&self, regime: usize) -> usize {
        self.occupied(regime).len()
    }

    pub fn alloc_flat(&self) -> &[usize] {
        &self.d
    }
}

/// Complete latent state of one Gibbs sweep.
#[derive(Debug, Clone)]
pub struct ChainState<S> {
    pub params: Vec<RegimeParams<S>>,
    pub trans: Vec<TransitionMatrix<S>>,
    pub common: CommonTransitionMean<S>,
    pub paths: Vec<HiddenPath>,
    pub sticks: Vec<StickState<S>>,
    pub atoms: Vec<Vec<Atom<S>>>,
    pub slices: SliceState<S>,
    pub sigma0: Vec<S>,
    pub sweep: usize,
}

impl<S: Scalar> ChainState<S> {
    pub fn n_units(&self) -> usize {
        self.params.len()
    }

    pub fn n_regimes(&self) -> usize {
        self.sticks.len()
    }

    pub fn occupied_count(&self, regime: usize) -> usize {
        self.slices.occupied_count(regime)
    }

    /// Build a chain state from a forward simulation of the joint prior.
    pub fn from_prior_draw(draw: PriorDraw<S>) -> Result<Self, SamplerError> {
        let n = draw.params.len();
        let k = draw.sticks.len();
        let mut slices = SliceState::new(n, k);
        for i in 0..n {
            for kk in 0..k {
                slices.set_u(i, kk, draw.slices[i][kk]);
                slices.set_d(i, kk, draw.alloc[i][kk]);
            }
        }
        let sticks = draw
            .sticks
            .into_iter()
            .map(StickState::from_v)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            params: draw.params,
            trans: draw.trans,
            common: draw.common,
            paths: draw.paths,
            sticks,
            atoms: draw.atoms,
            slices,
            sigma0: draw.sigma0,
            sweep: 0,
        })
    }

    /// Check every structural invariant; used in debug builds after each
    /// sweep and by tests.
    pub fn validate(&self, hp: &Hyperparameters<S>, panel: &Panel<S>) -> Result<(), SamplerError> {
        let n = self.n_units();
        let k = hp.n_regimes;
        let fail = |msg: String| Err(SamplerError::StateInvariant(msg));
        if self.trans.len() != n
            || self.paths.len() != n
            || self.sigma0.len() != n
            || self.sticks.len() != k
            || self.atoms.len() != k
        {
            return fail("state component sizes disagree".into());
        }
        if panel.n_units() != n {
            return fail("panel does not match state".into());
        }
        for (i, p) in self.params.iter().enumerate() {
            p.validate(hp.a)
                .map_err(|e| SamplerError::StateInvariant(format!("unit {i}: {e}")))?;
        }
        for (i, t) in self.trans.iter().enumerate() {
            t.validate()
                .map_err(|e| SamplerError::StateInvariant(format!("unit {i}: {e}")))?;
        }
        self.common
            .rows
            .validate()
            .map_err(|e| SamplerError::StateInvariant(format!("common mean: {e}")))?;
        for (i, path) in self.paths.iter().enumerate() {
            if path.len() != panel.n_obs() {
                return fail(format!("unit {i}: path length {}", path.len()));
            }
            if path.states.iter().any(|&s| s >= k) {
                return fail(format!("unit {i}: path state out of range"));
            }
        }
        for kk in 0..k {
            if self.sticks[kk].w.len() != self.sticks[kk].v.len() {
                return fail(format!("regime {kk}: stick weights out of sync"));
            }
            if self.atoms[kk].len() != self.sticks[kk].len() {
                return fail(format!(
                    "regime {kk}: {} atoms for {} sticks",
                    self.atoms[kk].len(),
                    self.sticks[kk].len()
                ));
            }
            let m = self.occupied_count(kk);
            if m == 0 || m > n {
                return fail(format!("regime {kk}: occupied count {m}"));
            }
            for i in 0..n {
                let d = self.slices.d(i, kk);
                if d >= self.atoms[kk].len() {
                    return fail(format!("unit {i} regime {kk}: allocation {d} has no atom"));
                }
                let u = self.slices.u(i, kk);
                let w = self.sticks[kk].w[d];
                if !(u > S::zero() && u < w) {
                    return fail(format!(
                        "unit {i} regime {kk}: slice {} not under weight {}",
                        u.to_f64_lossy(),
                        w.to_f64_lossy()
                    ));
                }
            }
            for atom in &self.atoms[kk] {
                if !(atom.gamma > S::zero() && atom.gamma < hp.a)
                    || !(atom.alpha > S::zero() && atom.alpha < S::one())
                    || !(atom.beta > S::zero() && atom.beta < S::one())
                    || !atom.mu.is_finite()
                {
                    return fail(format!("regime {kk}: atom outside base-measure support"));
                }
            }
        }
        Ok(())
    }
}

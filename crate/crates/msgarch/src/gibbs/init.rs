//! Deterministic chain initialization: regime paths from a K-means split of
//! the rolling standard deviation, unit parameters from regime-conditional
//! moments of the data (the linearized volatility proposal is only locally
//! valid, so the chain must start where the regimes already fit), persistent
//! transition rows, and single-component sticks anchored at the cross-unit
//! parameter means.

use rand_chacha::ChaCha8Rng;

use crate::model::{
    CommonTransitionMean, HiddenPath, Hyperparameters, Panel, RegimeParams, TransitionMatrix,
};
use crate::pyp::Atom;
use crate::scalar::Scalar;

use super::state::{ChainState, SliceState, StickState};
use super::SamplerError;

/// Trailing rolling standard deviation; the first window-1 positions repeat
/// the first full-window value.
fn rolling_std<S: Scalar>(y: &[S], window: usize) -> Vec<S> {
    let t = y.len();
    let w = window.min(t).max(2);
    let mut out = vec![S::zero(); t];
    for end in (w - 1)..t {
        let seg = &y[end + 1 - w..=end];
        let n = S::from_f64(w as f64);
        let mean: S = seg.iter().copied().sum::<S>() / n;
        let ss: S = seg.iter().map(|&v| (v - mean) * (v - mean)).sum();
        out[end] = (ss / n).sqrt();
    }
    for t0 in 0..(w - 1).min(t) {
        out[t0] = out[(w - 1).min(t - 1)];
    }
    out
}

/// Lloyd iterations on scalars with quantile-seeded centroids.
fn kmeans_1d<S: Scalar>(values: &[S], k: usize) -> Vec<usize> {
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut centroids: Vec<S> = (0..k)
        .map(|j| sorted[(((j as f64 + 0.5) / k as f64 * n as f64) as usize).min(n - 1)])
        .collect();
    let mut assign = vec![0usize; n];
    for _ in 0..50 {
        let mut changed = false;
        for (i, &v) in values.iter().enumerate() {
            let mut best = 0usize;
            let mut best_d = S::infinity();
            for (c, &ctr) in centroids.iter().enumerate() {
                let d = (v - ctr).abs();
                if d < best_d {
                    best_d = d;
                    best = c;
                }
            }
            if assign[i] != best {
                assign[i] = best;
                changed = true;
            }
        }
        // Permutation-invariant centroid update (sorted accumulation).
        let mut members: Vec<Vec<S>> = vec![Vec::new(); k];
        for (i, &v) in values.iter().enumerate() {
            members[assign[i]].push(v);
        }
        for c in 0..k {
            if !members[c].is_empty() {
                let count = S::from_f64(members[c].len() as f64);
                centroids[c] = crate::linalg::stable_sum(&mut members[c]) / count;
            }
        }
        if !changed {
            break;
        }
    }
    assign
}

/// Cluster time points by rolling volatility, then order the clusters by
/// their mean observation (descending) to match the regime-mean ordering.
pub fn initial_path<S: Scalar>(y: &[S], k: usize) -> HiddenPath {
    if k == 1 {
        return HiddenPath::new(vec![0; y.len()]);
    }
    let window = (y.len() / 10).clamp(5, 20);
    let vol = rolling_std(y, window);
    let clusters = kmeans_1d(&vol, k);
    // Mean observation per cluster; empty clusters sort last.
    let mut sums = vec![S::zero(); k];
    let mut counts = vec![0usize; k];
    for (t, &c) in clusters.iter().enumerate() {
        sums[c] += y[t];
        counts[c] += 1;
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        let ma = if counts[a] > 0 { sums[a].to_f64_lossy() / counts[a] as f64 } else { f64::NEG_INFINITY };
        let mb = if counts[b] > 0 { sums[b].to_f64_lossy() / counts[b] as f64 } else { f64::NEG_INFINITY };
        mb.partial_cmp(&ma).unwrap().then(a.cmp(&b))
    });
    let mut regime_of = vec![0usize; k];
    for (regime, &cluster) in order.iter().enumerate() {
        regime_of[cluster] = regime;
    }
    HiddenPath::new(clusters.into_iter().map(|c| regime_of[c]).collect())
}

/// Regime-conditional starting values: means and residual variances from the
/// initial path, textbook GARCH coefficients, and the intercept matching the
/// regime's unconditional variance.
fn initial_params<S: Scalar>(
    y: &[S],
    path: &HiddenPath,
    k: usize,
    hp: &Hyperparameters<S>,
) -> RegimeParams<S> {
    let overall_mean: S = y.iter().copied().sum::<S>() / S::from_f64(y.len() as f64);
    let mut mu = vec![S::zero(); k];
    let mut var = vec![S::one(); k];
    for kk in 0..k {
        let seg: Vec<S> = y
            .iter()
            .zip(&path.states)
            .filter(|(_, &s)| s == kk)
            .map(|(&v, _)| v)
            .collect();
        if seg.len() >= 2 {
            let n = S::from_f64(seg.len() as f64);
            let m: S = seg.iter().copied().sum::<S>() / n;
            let v: S = seg.iter().map(|&x| (x - m) * (x - m)).sum::<S>() / n;
            mu[kk] = m;
            var[kk] = v.max(S::from_f64(1e-4));
        } else {
            // Unpopulated regime: spread around the overall mean.
            mu[kk] = overall_mean - S::from_f64(kk as f64);
        }
    }
    // Strictly decreasing means.
    for kk in 1..k {
        let bound = mu[kk - 1] - S::from_f64(1e-3) * (S::one() + mu[kk - 1].abs());
        if mu[kk] >= bound {
            mu[kk] = bound;
        }
    }
    let alpha = S::from_f64(0.05);
    let beta = S::from_f64(0.80);
    let slack = S::one() - alpha - beta;
    let gamma: Vec<S> = var
        .iter()
        .map(|&v| (v * slack).max(S::from_f64(1e-4)).min(hp.a * S::from_f64(1.0 - 1e-9)))
        .collect();
    RegimeParams::new(mu, gamma, vec![alpha; k], vec![beta; k])
}

/// Two-means split accepted only when the centroid gap clearly exceeds the
/// pooled within-cell spread and both sides are populated; otherwise one
/// cell.
fn gap_split<S: Scalar>(values: &[S]) -> Vec<usize> {
    let n = values.len();
    if n < 6 {
        return vec![0; n];
    }
    let assign = kmeans_1d(values, 2);
    let mut cells: [Vec<S>; 2] = [Vec::new(), Vec::new()];
    for (i, &c) in assign.iter().enumerate() {
        cells[c].push(values[i]);
    }
    let min_size = (n / 6).max(2);
    if cells[0].len() < min_size || cells[1].len() < min_size {
        return vec![0; n];
    }
    let stats = |xs: &mut Vec<S>| -> (S, S) {
        let count = S::from_f64(xs.len() as f64);
        let mean = crate::linalg::stable_sum(&mut xs.clone()) / count;
        let mut sq: Vec<S> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
        (mean, (crate::linalg::stable_sum(&mut sq) / count).sqrt())
    };
    let (m0, s0) = stats(&mut cells[0]);
    let (m1, s1) = stats(&mut cells[1]);
    let within = ((s0 * s0 + s1 * s1) / S::from_f64(2.0)).sqrt();
    if (m0 - m1).abs() > S::from_f64(2.0) * within.max(S::from_f64(1e-12)) {
        assign
    } else {
        vec![0; n]
    }
}

/// Reassign members of cells holding fewer than max(2, N/10) units to the
/// nearest surviving cell (standardized distance over the two features);
/// returns the compacted cell count.
fn dissolve_small_cells<S: Scalar>(
    assign: &mut [usize],
    mu_vals: &[S],
    gamma_vals: &[S],
    n_cells: usize,
) -> usize {
    let n = assign.len();
    let min_size = (n / 10).max(2).min(n);
    let spread = |xs: &[S]| -> S {
        let count = S::from_f64(xs.len() as f64);
        let mean = crate::linalg::stable_sum(&mut xs.to_vec()) / count;
        let mut sq: Vec<S> = xs.iter().map(|&x| (x - mean) * (x - mean)).collect();
        (crate::linalg::stable_sum(&mut sq) / count)
            .sqrt()
            .max(S::from_f64(1e-9))
    };
    let s_mu = spread(mu_vals);
    let s_gamma = spread(gamma_vals);
    loop {
        let mut sizes = vec![0usize; n_cells];
        for &c in assign.iter() {
            sizes[c] += 1;
        }
        let occupied: Vec<usize> = (0..n_cells).filter(|&c| sizes[c] > 0).collect();
        if occupied.len() <= 1 {
            break;
        }
        // Smallest undersized cell dissolves first (ties to lowest id).
        let victim = occupied
            .iter()
            .copied()
            .filter(|&c| sizes[c] < min_size)
            .min_by_key(|&c| (sizes[c], c));
        let Some(victim) = victim else { break };
        let centroid = |c: usize| -> (S, S) {
            let count = S::from_f64(sizes[c] as f64);
            let mut mu: Vec<S> = (0..n).filter(|&i| assign[i] == c).map(|i| mu_vals[i]).collect();
            let mut ga: Vec<S> =
                (0..n).filter(|&i| assign[i] == c).map(|i| gamma_vals[i]).collect();
            (
                crate::linalg::stable_sum(&mut mu) / count,
                crate::linalg::stable_sum(&mut ga) / count,
            )
        };
        let survivors: Vec<usize> = occupied.iter().copied().filter(|&c| c != victim).collect();
        let targets: Vec<(usize, (S, S))> = survivors.iter().map(|&c| (c, centroid(c))).collect();
        for i in 0..n {
            if assign[i] == victim {
                let mut best = targets[0].0;
                let mut best_d = S::infinity();
                for &(c, (cm, cg)) in &targets {
                    let dm = (mu_vals[i] - cm) / s_mu;
                    let dg = (gamma_vals[i] - cg) / s_gamma;
                    let d = dm * dm + dg * dg;
                    if d < best_d {
                        best_d = d;
                        best = c;
                    }
                }
                assign[i] = best;
            }
        }
    }
    // Compact ids preserving order.
    let mut sizes = vec![0usize; n_cells];
    for &c in assign.iter() {
        sizes[c] += 1;
    }
    let mut new_id = vec![usize::MAX; n_cells];
    let mut next = 0usize;
    for c in 0..n_cells {
        if sizes[c] > 0 {
            new_id[c] = next;
            next += 1;
        }
    }
    for c in assign.iter_mut() {
        *c = new_id[*c];
    }
    next
}

pub fn init_state<S: Scalar>(
    panel: &Panel<S>,
    hp: &Hyperparameters<S>,
    _global_rng: &mut ChaCha8Rng,
    unit_rngs: &mut [ChaCha8Rng],
) -> Result<ChainState<S>, SamplerError> {
    let n = panel.n_units();
    let k = hp.n_regimes;

    let sigma0: Vec<S> = (0..n).map(|i| hp.sigma0_for(panel, i)).collect();
    for (i, &v) in sigma0.iter().enumerate() {
        if !(v > S::zero()) {
            return Err(SamplerError::StateInvariant(format!(
                "unit {i}: initial variance {} not positive",
                v.to_f64_lossy()
            )));
        }
    }

    let paths: Vec<HiddenPath> = (0..n).map(|i| initial_path(panel.series(i), k)).collect();
    let mut params: Vec<RegimeParams<S>> = (0..n)
        .map(|i| initial_params(panel.series(i), &paths[i], k, hp))
        .collect();
    for (i, p) in params.iter().enumerate() {
        p.validate(hp.a)
            .map_err(|e| SamplerError::StateInvariant(format!("unit {i} init: {e}")))?;
    }

    // Seed the mixture structure from the starting values: units are split
    // per regime on the starting means and intercepts, but a dimension only
    // splits when the two-means separation clearly dominates the within-cell
    // spread, and undersized cells dissolve into their nearest neighbor.
    // Components must start both correct and internally coherent: under a
    // tight first stage the sampler can neither merge spurious components
    // nor migrate misassigned members.
    let clamp01 = |x: S| x.max(S::from_f64(1e-6)).min(S::one() - S::from_f64(1e-6));
    let clamp_gamma =
        |x: S| x.max(S::from_f64(1e-6)).min(hp.a * (S::one() - S::from_f64(1e-9)));
    let mut slices = SliceState::new(n, k);
    let mut atoms: Vec<Vec<Atom<S>>> = Vec::with_capacity(k);
    let mut sticks: Vec<StickState<S>> = Vec::with_capacity(k);
    for kk in 0..k {
        let mu_vals: Vec<S> = params.iter().map(|p| p.mu[kk]).collect();
        let gamma_vals: Vec<S> = params.iter().map(|p| p.gamma[kk]).collect();
        let mu_cells = gap_split(&mu_vals);
        let gamma_cells = gap_split(&gamma_vals);
        // Canonical cell ids (sorted by key) so relabeling units relabels
        // nothing else.
        let keys: std::collections::BTreeSet<(usize, usize)> =
            (0..n).map(|i| (mu_cells[i], gamma_cells[i])).collect();
        let cell_of: std::collections::BTreeMap<(usize, usize), usize> =
            keys.into_iter().enumerate().map(|(idx, key)| (key, idx)).collect();
        let mut assign: Vec<usize> =
            (0..n).map(|i| cell_of[&(mu_cells[i], gamma_cells[i])]).collect();
        let n_cells = dissolve_small_cells(&mut assign, &mu_vals, &gamma_vals, cell_of.len());
        let mut regime_atoms = Vec::with_capacity(n_cells);
        for c in 0..n_cells {
            let members: Vec<usize> = (0..n).filter(|&i| assign[i] == c).collect();
            let count = S::from_f64(members.len() as f64);
            let mean_of = |f: &dyn Fn(usize) -> S| -> S {
                let mut vals: Vec<S> = members.iter().map(|&i| f(i)).collect();
                crate::linalg::stable_sum(&mut vals) / count
            };
            regime_atoms.push(Atom {
                mu: mean_of(&|i| params[i].mu[kk]),
                gamma: clamp_gamma(mean_of(&|i| params[i].gamma[kk])),
                alpha: clamp01(mean_of(&|i| params[i].alpha[kk])),
                beta: clamp01(mean_of(&|i| params[i].beta[kk])),
            });
        }
        let stick = StickState::from_v(vec![S::from_f64(0.5); n_cells])?;
        for i in 0..n {
            slices.set_d(i, kk, assign[i]);
            let u = stick.w[assign[i]] * S::sample_open01(&mut unit_rngs[i]);
            slices.set_u(i, kk, u);
        }
        atoms.push(regime_atoms);
        sticks.push(stick);
    }
    // Start every unit's volatility coefficients on its component's atom:
    // coherent members neither split their components nor fight the
    // first-stage shrinkage while the chain finds its footing. The means
    // keep their per-unit estimates (the likelihood pins them quickly).
    for i in 0..n {
        for kk in 0..k {
            let atom = &atoms[kk][slices.d(i, kk)];
            params[i].gamma[kk] = atom.gamma;
            params[i].alpha[kk] = atom.alpha;
            params[i].beta[kk] = atom.beta;
        }
    }

    let diag = S::from_f64(0.95);
    let off = if k > 1 {
        (S::one() - diag) / S::from_f64((k - 1) as f64)
    } else {
        S::zero()
    };
    let mut trans = Vec::with_capacity(n);
    for _ in 0..n {
        let mut p = vec![off; k * k];
        for j in 0..k {
            p[j * k + j] = if k > 1 { diag } else { S::one() };
        }
        trans.push(TransitionMatrix::new(p, k).map_err(SamplerError::Model)?);
    }

    Ok(ChainState {
        params,
        trans,
        common: CommonTransitionMean::uniform(k),
        paths,
        sticks,
        atoms,
        slices,
        sigma0,
        sweep: 0,
    })
}

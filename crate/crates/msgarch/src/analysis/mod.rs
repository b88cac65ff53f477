//! Posterior clustering analytics: cluster-count posteriors, co-clustering
//! matrices conditioned on the occupied count, point partitions by average
//! linkage, spectral reordering, variation of information, and parameter
//! summaries.

mod linkage;
mod spectral;

pub use linkage::average_linkage_cut;
pub use spectral::spectral_reorder;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::gibbs::PosteriorDraws;
use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no stored draws")]
    NoDraws,
    #[error("no draws with {m} occupied components in regime {regime}; available counts: {available:?}")]
    NoConditioningDraws { regime: usize, m: usize, available: Vec<usize> },
    #[error("partition sizes differ: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("requested {m} clusters for {n} units")]
    TooManyClusters { m: usize, n: usize },
    #[error("normalized variation of information needs N >= 2")]
    DegenerateNormalization,
}

/// Assignment of N units to clusters. Canonical form: labels 0..M-1, clusters
/// ordered by size descending, ties broken by smallest member index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    labels: Vec<usize>,
    n_clusters: usize,
}

impl Partition {
    /// Canonicalize arbitrary labels.
    pub fn new(raw: &[usize]) -> Self {
        let mut first_seen: BTreeMap<usize, usize> = BTreeMap::new();
        let mut sizes: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, &l) in raw.iter().enumerate() {
            first_seen.entry(l).or_insert(i);
            *sizes.entry(l).or_insert(0) += 1;
        }
        let mut order: Vec<usize> = sizes.keys().copied().collect();
        order.sort_by(|a, b| {
            sizes[b]
                .cmp(&sizes[a])
                .then(first_seen[a].cmp(&first_seen[b]))
        });
        let relabel: BTreeMap<usize, usize> =
            order.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        Partition {
            labels: raw.iter().map(|l| relabel[l]).collect(),
            n_clusters: order.len(),
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_units(&self) -> usize {
        self.labels.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    /// Cluster sizes, indexed by canonical label.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0usize; self.n_clusters];
        for &l in &self.labels {
            s[l] += 1;
        }
        s
    }
}

/// Empirical pmf of the occupied-component counts in one regime, plus the
/// MAP count (ties resolved toward the smaller count).
pub fn cluster_count_posterior<S: Scalar>(
    draws: &PosteriorDraws<S>,
    regime: usize,
) -> Result<(Vec<(usize, f64)>, usize), AnalysisError> {
    if draws.snapshots.is_empty() {
        return Err(AnalysisError::NoDraws);
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for snap in &draws.snapshots {
        *counts.entry(snap.occupied[regime]).or_insert(0) += 1;
    }
    let total = draws.snapshots.len() as f64;
    let pmf: Vec<(usize, f64)> = counts.iter().map(|(&m, &c)| (m, c as f64 / total)).collect();
    let mut map_m = pmf[0].0;
    let mut best = pmf[0].1;
    for &(m, p) in &pmf[1..] {
        if p > best {
            best = p;
            map_m = m;
        }
    }
    Ok((pmf, map_m))
}

/// Entropy in bits of an empirical pmf.
pub fn pmf_entropy_bits(pmf: &[(usize, f64)]) -> f64 {
    -pmf.iter()
        .filter(|&&(_, p)| p > 0.0)
        .map(|&(_, p)| p * p.log2())
        .sum::<f64>()
}

/// Symmetric matrix of posterior co-clustering probabilities, conditioned on
/// the occupied count.
#[derive(Debug, Clone)]
pub struct CoClusterMatrix<S> {
    pub probs: Vec<S>,
    pub n_units: usize,
    pub regime: usize,
    /// Conditioning occupied-component count.
    pub m: usize,
    /// Number of draws that satisfied the conditioning.
    pub n_draws: usize,
}

impl<S: Scalar> CoClusterMatrix<S> {
    pub fn at(&self, i: usize, j: usize) -> S {
        self.probs[i * self.n_units + j]
    }
}

/// Fraction of conditioning draws in which units i and j share a mixture
/// component in the given regime.
pub fn coclustering_matrix<S: Scalar>(
    draws: &PosteriorDraws<S>,
    regime: usize,
    m: usize,
) -> Result<CoClusterMatrix<S>, AnalysisError> {
    let n = draws.n_units;
    let k = draws.n_regimes;
    let selected: Vec<&crate::gibbs::DrawSnapshot<S>> = draws
        .snapshots
        .iter()
        .filter(|s| s.occupied[regime] == m)
        .collect();
    if selected.is_empty() {
        let mut available: Vec<usize> = draws
            .snapshots
            .iter()
            .map(|s| s.occupied[regime])
            .collect();
        available.sort_unstable();
        available.dedup();
        return Err(AnalysisError::NoConditioningDraws { regime, m, available });
    }
    let mut counts = vec![0usize; n * n];
    for snap in &selected {
        for i in 0..n {
            let di = snap.alloc[i * k + regime];
            for j in (i + 1)..n {
                if di == snap.alloc[j * k + regime] {
                    counts[i * n + j] += 1;
                }
            }
        }
    }
    let total = S::from_f64(selected.len() as f64);
    let mut probs = vec![S::zero(); n * n];
    for i in 0..n {
        probs[i * n + i] = S::one();
        for j in (i + 1)..n {
            let p = S::from_f64(counts[i * n + j] as f64) / total;
            probs[i * n + j] = p;
            probs[j * n + i] = p;
        }
    }
    Ok(CoClusterMatrix { probs, n_units: n, regime, m, n_draws: selected.len() })
}

/// Deterministic point partition: average-linkage agglomeration on the
/// dissimilarity 1 - co-clustering probability, cut at `m` clusters.
pub fn point_partition<S: Scalar>(
    coclust: &CoClusterMatrix<S>,
    m: usize,
) -> Result<Partition, AnalysisError> {
    let n = coclust.n_units;
    if m > n {
        return Err(AnalysisError::TooManyClusters { m, n });
    }
    let mut dissim = vec![0.0_f64; n * n];
    for i in 0..n {
        for j in 0..n {
            dissim[i * n + j] = 1.0 - coclust.at(i, j).to_f64_lossy();
        }
    }
    let raw = average_linkage_cut(&dissim, n, m);
    Ok(Partition::new(&raw))
}

/// Variation of information between two partitions, in bits, plus its
/// normalization by log2(N).
pub fn variation_of_information(
    p1: &Partition,
    p2: &Partition,
) -> Result<(f64, f64), AnalysisError> {
    let n = p1.n_units();
    if n != p2.n_units() {
        return Err(AnalysisError::SizeMismatch(n, p2.n_units()));
    }
    if n < 2 {
        return Err(AnalysisError::DegenerateNormalization);
    }
    let vi = vi_bits(p1, p2);
    Ok((vi, vi / (n as f64).log2()))
}

fn vi_bits(p1: &Partition, p2: &Partition) -> f64 {
    // H(p1) + H(p2) - 2 I(p1, p2), evaluated as the sum of the two
    // conditional entropies so that identical partitions give exactly zero:
    // VI = -sum_ab p_ab [log2(c_ab/c_a) + log2(c_ab/c_b)].
    let n = p1.n_units() as f64;
    let table = cross_tab(p1, p2);
    let sizes1 = p1.sizes();
    let sizes2 = p2.sizes();
    let mut vi = 0.0;
    for (a, &sa) in sizes1.iter().enumerate() {
        for (b, &sb) in sizes2.iter().enumerate() {
            let c_ab = table[a * sizes2.len() + b];
            if c_ab > 0 {
                let p_ab = c_ab as f64 / n;
                vi -= p_ab
                    * ((c_ab as f64 / sa as f64).log2() + (c_ab as f64 / sb as f64).log2());
            }
        }
    }
    vi.max(0.0)
}

/// Contingency table between two canonicalized partitions: entry (a, b) is
/// the number of units in cluster a of p1 and cluster b of p2. Rows and
/// columns follow the canonical (size-descending) cluster order.
pub fn cross_tab(p1: &Partition, p2: &Partition) -> Vec<usize> {
    let m2 = p2.n_clusters();
    let mut table = vec![0usize; p1.n_clusters() * m2];
    for (l1, l2) in p1.labels().iter().zip(p2.labels()) {
        table[l1 * m2 + l2] += 1;
    }
    table
}

/// Posterior mean and central 90% interval of one scalar chain.
fn summarize_one<S: Scalar>(values: &mut Vec<S>) -> (S, S, S) {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    let mean: S = values.iter().copied().sum::<S>() / S::from_f64(n as f64);
    let quantile = |q: f64| -> S {
        if n == 1 {
            return values[0];
        }
        let pos = q * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        let w = S::from_f64(pos - lo as f64);
        values[lo] * (S::one() - w) + values[hi] * w
    };
    (mean, quantile(0.05), quantile(0.95))
}

/// One row of the parameter summary table.
#[derive(Debug, Clone)]
pub struct ParamSummary<S> {
    pub unit: usize,
    pub regime: usize,
    pub name: &'static str,
    pub mean: S,
    pub q05: S,
    pub q95: S,
}

/// Per-unit, per-regime posterior means and 90% intervals for all four
/// regime coefficients and the diagonal transition probability.
pub fn summarize_parameters<S: Scalar>(
    draws: &PosteriorDraws<S>,
) -> Result<Vec<ParamSummary<S>>, AnalysisError> {
    if draws.snapshots.is_empty() {
        return Err(AnalysisError::NoDraws);
    }
    let n = draws.n_units;
    let k = draws.n_regimes;
    let mut out = Vec::with_capacity(n * k * 5);
    let fields: [(&'static str, fn(&crate::model::RegimeParams<S>, usize) -> S); 4] = [
        ("mu", |p, kk| p.mu[kk]),
        ("gamma", |p, kk| p.gamma[kk]),
        ("alpha", |p, kk| p.alpha[kk]),
        ("beta", |p, kk| p.beta[kk]),
    ];
    for unit in 0..n {
        for kk in 0..k {
            for (name, get) in fields {
                let mut values: Vec<S> =
                    draws.snapshots.iter().map(|s| get(&s.params[unit], kk)).collect();
                let (mean, q05, q95) = summarize_one(&mut values);
                out.push(ParamSummary { unit, regime: kk, name, mean, q05, q95 });
            }
            let mut values: Vec<S> = draws
                .snapshots
                .iter()
                .map(|s| s.trans[unit].prob(kk, kk))
                .collect();
            let (mean, q05, q95) = summarize_one(&mut values);
            out.push(ParamSummary { unit, regime: kk, name: "p_stay", mean, q05, q95 });
        }
    }
    Ok(out)
}

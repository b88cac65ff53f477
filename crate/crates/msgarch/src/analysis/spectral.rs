//! Spectral reordering of a similarity matrix: units are sorted along the
//! Fiedler eigenvector (second-smallest eigenvalue) of the unnormalized graph
//! Laplacian, which places similar units next to each other.

use crate::linalg::jacobi_eigh;
use crate::scalar::Scalar;

/// Permutation of 0..N putting units in Fiedler-vector order; ties and
/// degenerate (constant off-diagonal) similarities fall back to index order.
pub fn spectral_reorder<S: Scalar>(similarity: &[S], n: usize) -> Vec<usize> {
    if n <= 2 {
        return (0..n).collect();
    }
    // Constant off-diagonal similarity carries no ordering information.
    let mut lo = S::infinity();
    let mut hi = S::neg_infinity();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = similarity[i * n + j];
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    if hi - lo <= S::from_f64(1e-12) {
        return (0..n).collect();
    }
    // Unnormalized Laplacian L = D - W on the symmetrized similarity.
    let mut lap = vec![S::zero(); n * n];
    for i in 0..n {
        let mut degree = S::zero();
        for j in 0..n {
            if i != j {
                let w = (similarity[i * n + j] + similarity[j * n + i]) / S::from_f64(2.0);
                lap[i * n + j] = -w;
                degree += w;
            }
        }
        lap[i * n + i] = degree;
    }
    let (_evals, evecs) = jacobi_eigh(&lap, n);
    // Fiedler vector: second column, projected against the constant vector
    // (for disconnected graphs the zero eigenspace mixes in the constant).
    let mut fiedler: Vec<S> = (0..n).map(|i| evecs[i * n + 1]).collect();
    let mean: S = fiedler.iter().copied().sum::<S>() / S::from_f64(n as f64);
    for v in fiedler.iter_mut() {
        *v -= mean;
    }
    let spread = fiedler
        .iter()
        .fold(S::zero(), |acc, &v| acc.max(v.abs()));
    if spread <= S::from_f64(1e-12) {
        // Degenerate direction: try the third column before giving up.
        let mut alt: Vec<S> = (0..n).map(|i| evecs[i * n + 2.min(n - 1)]).collect();
        let mean: S = alt.iter().copied().sum::<S>() / S::from_f64(n as f64);
        for v in alt.iter_mut() {
            *v -= mean;
        }
        fiedler = alt;
    }
    // Deterministic sign: largest-magnitude component positive.
    let lead = (0..n)
        .max_by(|&a, &b| fiedler[a].abs().partial_cmp(&fiedler[b].abs()).unwrap())
        .unwrap();
    if fiedler[lead] < S::zero() {
        for v in fiedler.iter_mut() {
            *v = -*v;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| fiedler[a].partial_cmp(&fiedler[b]).unwrap().then(a.cmp(&b)));
    order
}

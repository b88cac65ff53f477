//! Agglomerative average-linkage clustering on a dense dissimilarity matrix,
//! cut at a fixed number of clusters. Deterministic: merge ties resolve to
//! the lexicographically smallest pair of active cluster indices.

/// Cluster labels (by first-member index) after merging down to `m` clusters.
pub fn average_linkage_cut(dissim: &[f64], n: usize, m: usize) -> Vec<usize> {
    assert!(m >= 1 && m <= n);
    // active[c] = true while cluster c exists; d holds inter-cluster
    // average dissimilarities, sizes the member counts.
    let mut d = dissim.to_vec();
    let mut active = vec![true; n];
    let mut sizes = vec![1usize; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut n_clusters = n;
    while n_clusters > m {
        let mut best = (usize::MAX, usize::MAX);
        let mut best_d = f64::INFINITY;
        for a in 0..n {
            if !active[a] {
                continue;
            }
            for b in (a + 1)..n {
                if !active[b] {
                    continue;
                }
                let dist = d[a * n + b];
                if dist < best_d {
                    best_d = dist;
                    best = (a, b);
                }
            }
        }
        let (a, b) = best;
        // Lance-Williams update for the average linkage.
        let (sa, sb) = (sizes[a] as f64, sizes[b] as f64);
        for c in 0..n {
            if !active[c] || c == a || c == b {
                continue;
            }
            let new_d = (sa * d[a * n + c] + sb * d[b * n + c]) / (sa + sb);
            d[a * n + c] = new_d;
            d[c * n + a] = new_d;
        }
        sizes[a] += sizes[b];
        active[b] = false;
        let moved = std::mem::take(&mut members[b]);
        members[a].extend(moved);
        n_clusters -= 1;
    }
    let mut labels = vec![0usize; n];
    for (c, mset) in members.iter().enumerate() {
        if active[c] {
            for &i in mset {
                labels[i] = c;
            }
        }
    }
    labels
}

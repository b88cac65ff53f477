//! Small dense linear algebra: just enough for the 3K-dimensional proposal
//! covariances, stationary distributions, and the spectral reordering.

use crate::scalar::Scalar;

/// Sum that is invariant under permutations of the inputs: values are sorted
/// by total order before accumulation, so aggregates over exchangeable units
/// do not depend on unit order even at the last bit.
pub fn stable_sum<S: Scalar>(values: &mut Vec<S>) -> S {
    values.sort_by(|a, b| a.partial_cmp(b).expect("NaN in stable_sum"));
    values.iter().copied().sum()
}

/// Lower Cholesky factor of a symmetric positive definite matrix stored
/// row-major. Returns None if a pivot is not strictly positive.
pub fn cholesky<S: Scalar>(a: &[S], n: usize) -> Option<Vec<S>> {
    let mut l = vec![S::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= S::zero() || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solve L y = b in place (forward substitution), L lower triangular.
pub fn solve_lower<S: Scalar>(l: &[S], n: usize, b: &mut [S]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s = s - l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solve L' x = b in place (backward substitution), L lower triangular.
pub fn solve_lower_transpose<S: Scalar>(l: &[S], n: usize, b: &mut [S]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s = s - l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solve A x = b with A = L L'.
pub fn solve_spd<S: Scalar>(l: &[S], n: usize, b: &[S]) -> Vec<S> {
    let mut x = b.to_vec();
    solve_lower(l, n, &mut x);
    solve_lower_transpose(l, n, &mut x);
    x
}

pub fn log_det_from_cholesky<S: Scalar>(l: &[S], n: usize) -> S {
    let two = S::from_f64(2.0);
    (0..n).map(|i| l[i * n + i].ln() * two).sum()
}

/// Stationary distribution of a row-stochastic matrix (rows = from-state).
/// Solves pi' P = pi' with the normalization constraint; falls back to the
/// uniform distribution when the system is singular (e.g. P = I).
pub fn stationary_distribution<S: Scalar>(p: &[S], k: usize) -> Vec<S> {
    if k == 1 {
        return vec![S::one()];
    }
    // Build M = P' - I with the last equation replaced by sum(pi) = 1.
    let mut m = vec![S::zero(); k * k];
    let mut b = vec![S::zero(); k];
    for row in 0..k {
        for col in 0..k {
            m[row * k + col] = p[col * k + row] - if row == col { S::one() } else { S::zero() };
        }
    }
    for col in 0..k {
        m[(k - 1) * k + col] = S::one();
    }
    b[k - 1] = S::one();
    match gaussian_solve(&mut m, &mut b, k) {
        Some(mut pi) => {
            let mut ok = true;
            let mut total = S::zero();
            for v in pi.iter() {
                if !v.is_finite() || *v < S::from_f64(-1e-9) {
                    ok = false;
                }
                total += v.max(S::zero());
            }
            if !ok || total <= S::zero() {
                return vec![S::one() / S::from_f64(k as f64); k];
            }
            for v in pi.iter_mut() {
                *v = v.max(S::zero()) / total;
            }
            pi
        }
        None => vec![S::one() / S::from_f64(k as f64); k],
    }
}

fn gaussian_solve<S: Scalar>(m: &mut [S], b: &mut [S], n: usize) -> Option<Vec<S>> {
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if m[row * n + col].abs() > m[piv * n + col].abs() {
                piv = row;
            }
        }
        if m[piv * n + col].abs() < S::from_f64(1e-14) {
            return None;
        }
        if piv != col {
            for j in 0..n {
                m.swap(col * n + j, piv * n + j);
            }
            b.swap(col, piv);
        }
        let d = m[col * n + col];
        for row in col + 1..n {
            let f = m[row * n + col] / d;
            if f == S::zero() {
                continue;
            }
            for j in col..n {
                let v = m[col * n + j] * f;
                m[row * n + j] = m[row * n + j] - v;
            }
            b[row] = b[row] - b[col] * f;
        }
    }
    let mut x = vec![S::zero(); n];
    for row in (0..n).rev() {
        let mut s = b[row];
        for j in row + 1..n {
            s = s - m[row * n + j] * x[j];
        }
        x[row] = s / m[row * n + row];
    }
    Some(x)
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues ascending, eigenvectors as columns, row-major).
pub fn jacobi_eigh<S: Scalar>(a: &[S], n: usize) -> (Vec<S>, Vec<S>) {
    let mut m = a.to_vec();
    let mut v = vec![S::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = S::one();
    }
    let eps = S::from_f64(1e-14);
    let scale: S = (0..n * n).map(|i| a[i].abs()).fold(S::zero(), |x, y| x.max(y));
    let tol = eps * scale.max(S::one());
    for _sweep in 0..100 {
        let mut off = S::zero();
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(m[p * n + q].abs());
            }
        }
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() <= tol * S::from_f64(1e-2) {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (S::from_f64(2.0) * apq);
                let t = {
                    let sign = if theta >= S::zero() { S::one() } else { -S::one() };
                    sign / (theta.abs() + (theta * theta + S::one()).sqrt())
                };
                let c = S::one() / (t * t + S::one()).sqrt();
                let s = t * c;
                for i in 0..n {
                    let mip = m[i * n + p];
                    let miq = m[i * n + q];
                    m[i * n + p] = c * mip - s * miq;
                    m[i * n + q] = s * mip + c * miq;
                }
                for j in 0..n {
                    let mpj = m[p * n + j];
                    let mqj = m[q * n + j];
                    m[p * n + j] = c * mpj - s * mqj;
                    m[q * n + j] = s * mpj + c * mqj;
                }
                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = c * vip - s * viq;
                    v[i * n + q] = s * vip + c * viq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[i * n + i].partial_cmp(&m[j * n + j]).unwrap());
    let evals: Vec<S> = order.iter().map(|&i| m[i * n + i]).collect();
    let mut evecs = vec![S::zero(); n * n];
    for (new_col, &old_col) in order.iter().enumerate() {
        for row in 0..n {
            evecs[row * n + new_col] = v[row * n + old_col];
        }
    }
    (evals, evecs)
}

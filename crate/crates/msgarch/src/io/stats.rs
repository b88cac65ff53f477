//! Rolling descriptive statistics and cross-sectional kernel densities.

use crate::scalar::Scalar;

use super::IoError;

/// Rolling-window log standard deviation and log kurtosis (biased 1/n
/// moments; kurtosis = m4 / var^2). Output length is T - window + 1; windows
/// with zero variance yield None.
pub fn rolling_moments<S: Scalar>(
    y: &[S],
    window: usize,
) -> Result<(Vec<Option<S>>, Vec<Option<S>>), IoError> {
    if window < 4 {
        return Err(IoError::InvalidArgument(format!(
            "window must be >= 4 for the fourth moment, got {window}"
        )));
    }
    if y.len() < window {
        return Err(IoError::InvalidArgument(format!(
            "series length {} shorter than window {window}",
            y.len()
        )));
    }
    let n = S::from_f64(window as f64);
    let n_out = y.len() - window + 1;
    let mut log_vol = Vec::with_capacity(n_out);
    let mut log_kurt = Vec::with_capacity(n_out);
    for start in 0..n_out {
        let seg = &y[start..start + window];
        let mean: S = seg.iter().copied().sum::<S>() / n;
        let mut m2 = S::zero();
        let mut m4 = S::zero();
        for &v in seg {
            let d = v - mean;
            let d2 = d * d;
            m2 += d2;
            m4 += d2 * d2;
        }
        m2 /= n;
        m4 /= n;
        if m2 > S::zero() {
            log_vol.push(Some(m2.sqrt().ln()));
            log_kurt.push(Some((m4 / (m2 * m2)).ln()));
        } else {
            log_vol.push(None);
            log_kurt.push(None);
        }
    }
    Ok((log_vol, log_kurt))
}

/// Gaussian kernel density estimate of `values` evaluated on `grid`.
pub fn cross_section_density<S: Scalar>(
    values: &[S],
    grid: &[S],
    bandwidth: S,
) -> Result<Vec<S>, IoError> {
    if values.is_empty() {
        return Err(IoError::Empty("cross-sectional density needs values".into()));
    }
    if !(bandwidth > S::zero()) {
        return Err(IoError::InvalidArgument("bandwidth must be positive".into()));
    }
    let norm = S::one()
        / (S::from_f64(values.len() as f64)
            * bandwidth
            * (S::from_f64(2.0) * S::PI()).sqrt());
    let half = S::from_f64(0.5);
    Ok(grid
        .iter()
        .map(|&x| {
            let mut acc = S::zero();
            for &v in values {
                let z = (x - v) / bandwidth;
                acc += (-half * z * z).exp();
            }
            acc * norm
        })
        .collect())
}

/// Rule-of-thumb bandwidth for the Gaussian kernel.
pub fn silverman_bandwidth<S: Scalar>(values: &[S]) -> S {
    let n = S::from_f64(values.len() as f64);
    let mean: S = values.iter().copied().sum::<S>() / n;
    let var: S = values.iter().map(|&v| (v - mean) * (v - mean)).sum::<S>() / n;
    let sd = var.sqrt();
    let bw = S::from_f64(1.06) * sd * n.powf(S::from_f64(-0.2));
    if bw > S::zero() {
        bw
    } else {
        S::from_f64(1e-3)
    }
}

//! Density evaluations and random variates shared by the prior, the
//! simulator, and the Gibbs blocks.

use rand::Rng;

use crate::scalar::Scalar;

pub fn normal_logpdf<S: Scalar>(x: S, mean: S, sd: S) -> S {
    let half = S::from_f64(0.5);
    let z = (x - mean) / sd;
    -half * z * z - sd.ln() - half * (S::from_f64(2.0) * S::PI()).ln()
}

/// Log density of Beta(a, b) at x in (0, 1).
pub fn beta_logpdf<S: Scalar>(x: S, a: S, b: S) -> S {
    let one = S::one();
    (a - one) * x.ln() + (b - one) * (one - x).ln() + (a + b).ln_gamma()
        - a.ln_gamma()
        - b.ln_gamma()
}

/// Log density of the first-stage prior on a scaled coordinate:
/// x/scale ~ Beta(r*center/scale, r*(1 - center/scale)), including the
/// Jacobian of the scaling.
pub fn scaled_beta_logpdf<S: Scalar>(x: S, center: S, precision: S, scale: S) -> S {
    let m = center / scale;
    beta_logpdf(x / scale, precision * m, precision * (S::one() - m)) - scale.ln()
}

pub fn sample_normal<S: Scalar, R: Rng + ?Sized>(mean: S, sd: S, rng: &mut R) -> S {
    mean + sd * S::sample_standard_normal(rng)
}

pub fn sample_uniform<S: Scalar, R: Rng + ?Sized>(lo: S, hi: S, rng: &mut R) -> S {
    lo + (hi - lo) * S::sample_open01(rng)
}

/// Beta(a, b) variate via two gamma draws.
pub fn sample_beta<S: Scalar, R: Rng + ?Sized>(a: S, b: S, rng: &mut R) -> S {
    let x = S::sample_gamma(a, rng);
    let y = S::sample_gamma(b, rng);
    let v = x / (x + y);
    // Clamp away from the closed endpoints so downstream logs stay finite.
    let eps = S::from_f64(1e-300);
    v.max(eps).min(S::one() - S::from_f64(1e-16))
}

/// Dirichlet variate with the given concentration vector, normalized to sum
/// exactly to one.
pub fn sample_dirichlet<S: Scalar, R: Rng + ?Sized>(alpha: &[S], rng: &mut R) -> Vec<S> {
    let mut out: Vec<S> = alpha.iter().map(|&a| S::sample_gamma(a, rng)).collect();
    let mut total: S = out.iter().copied().sum();
    if total <= S::zero() {
        // All gammas underflowed; fall back to the mode of the concentration.
        let n = S::from_f64(out.len() as f64);
        for v in out.iter_mut() {
            *v = S::one() / n;
        }
        return out;
    }
    for v in out.iter_mut() {
        *v /= total;
    }
    // Renormalize the largest entry so the row sums to one at machine precision.
    total = out.iter().copied().sum();
    let imax = (0..out.len())
        .max_by(|&i, &j| out[i].partial_cmp(&out[j]).unwrap())
        .unwrap();
    out[imax] += S::one() - total;
    out
}

/// Inverse-CDF draw from the density proportional to exp(-rate * x) on
/// (0, upper). Valid for negative and near-zero rates; the rate -> 0 limit is
/// the uniform law on (0, upper).
pub fn sample_truncated_exp<S: Scalar, R: Rng + ?Sized>(rate: S, upper: S, rng: &mut R) -> S {
    let u = S::sample_open01(rng);
    truncated_exp_inverse_cdf(rate, upper, u)
}

/// Quantile function of the truncated exponential on (0, upper) with rate
/// `rate` (possibly negative), evaluated with expm1/log1p so small and large
/// rates stay accurate.
pub fn truncated_exp_inverse_cdf<S: Scalar>(rate: S, upper: S, u: S) -> S {
    if rate < S::zero() {
        // Rising density: reflect onto the mirrored decaying density.
        return upper - truncated_exp_inverse_cdf(-rate, upper, S::one() - u);
    }
    let ru = rate * upper;
    if ru < S::from_f64(1e-12) {
        return u * upper;
    }
    // g = 1 - exp(-rate*upper); x = -log(1 - u g) / rate
    let g = -(-ru).exp_m1();
    let x = -(-u * g).ln_1p() / rate;
    let tiny = S::from_f64(1e-300);
    x.max(tiny).min(upper * (S::one() - S::from_f64(1e-16)))
}

/// Standard normal variate conditioned on exceeding `lower`. Exact inverse
/// survival-function construction: with q = SF(lower) and u uniform, the draw
/// is -Quantile(u q), which stays accurate arbitrarily deep in the tail.
pub fn sample_trunc_std_normal_above<S: Scalar, R: Rng + ?Sized>(lower: S, rng: &mut R) -> S {
    let q = lower.std_normal_sf();
    let u = S::sample_open01(rng);
    let x = -(u * q).std_normal_quantile();
    x.max(lower)
}

/// log(sum_i exp(x_i)) guarded against empty input and -inf entries.
pub fn log_sum_exp<S: Scalar>(xs: &[S]) -> S {
    let m = xs
        .iter()
        .copied()
        .fold(S::neg_infinity(), |a, b| if b > a { b } else { a });
    if !m.is_finite() {
        return m;
    }
    let s: S = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

pub fn log_add_exp<S: Scalar>(a: S, b: S) -> S {
    if a == S::neg_infinity() {
        return b;
    }
    if b == S::neg_infinity() {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

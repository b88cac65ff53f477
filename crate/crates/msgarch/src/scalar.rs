use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FloatConst};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Open01, StandardNormal};

/// Floating-point scalar the numeric core is generic over.
///
/// Extends the `num-traits` float interface with the special functions and
/// random variates the samplers need. Implemented for `f32` and `f64`; the
/// crate-root aliases pin the concrete type used by the CLI and the chain
/// output formats.
pub trait Scalar:
    Float
    + FloatConst
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum<Self>
    + Display
    + LowerExp
    + Debug
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;

    fn to_f64_lossy(self) -> f64;

    /// Natural log of the gamma function.
    fn ln_gamma(self) -> Self;

    /// Standard normal cumulative distribution function.
    fn std_normal_cdf(self) -> Self;

    /// Standard normal survival function 1 - Phi(x), accurate in the right
    /// tail.
    fn std_normal_sf(self) -> Self;

    /// Standard normal quantile function.
    fn std_normal_quantile(self) -> Self;

    /// One standard normal variate.
    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One uniform variate on the open interval (0, 1).
    fn sample_open01<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One Gamma(shape, 1) variate.
    fn sample_gamma<R: Rng + ?Sized>(shape: Self, rng: &mut R) -> Self;
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }

    fn to_f64_lossy(self) -> f64 {
        self
    }

    fn ln_gamma(self) -> Self {
        statrs::function::gamma::ln_gamma(self)
    }

    fn std_normal_cdf(self) -> Self {
        0.5 * (1.0 + statrs::function::erf::erf(self / std::f64::consts::SQRT_2))
    }

    fn std_normal_sf(self) -> Self {
        0.5 * statrs::function::erf::erfc(self / std::f64::consts::SQRT_2)
    }

    fn std_normal_quantile(self) -> Self {
        use statrs::distribution::ContinuousCDF;
        statrs::distribution::Normal::standard().inverse_cdf(self)
    }

    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn sample_open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Open01.sample(rng)
    }

    fn sample_gamma<R: Rng + ?Sized>(shape: Self, rng: &mut R) -> Self {
        Gamma::new(shape, 1.0)
            .expect("gamma shape must be positive and finite")
            .sample(rng)
    }
}

impl Scalar for f32 {
    fn from_f64(v: f64) -> Self {
        v as f32
    }

    fn to_f64_lossy(self) -> f64 {
        self as f64
    }

    fn ln_gamma(self) -> Self {
        statrs::function::gamma::ln_gamma(self as f64) as f32
    }

    fn std_normal_cdf(self) -> Self {
        (0.5 * (1.0 + statrs::function::erf::erf(self as f64 / std::f64::consts::SQRT_2))) as f32
    }

    fn std_normal_sf(self) -> Self {
        (0.5 * statrs::function::erf::erfc(self as f64 / std::f64::consts::SQRT_2)) as f32
    }

    fn std_normal_quantile(self) -> Self {
        use statrs::distribution::ContinuousCDF;
        statrs::distribution::Normal::standard().inverse_cdf(self as f64) as f32
    }

    fn sample_standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }

    fn sample_open01<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Open01.sample(rng)
    }

    fn sample_gamma<R: Rng + ?Sized>(shape: Self, rng: &mut R) -> Self {
        Gamma::new(shape, 1.0f32)
            .expect("gamma shape must be positive and finite")
            .sample(rng)
    }
}

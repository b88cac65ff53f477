//! Gibbs block 1: stick-breaking proportions and slice variables.
//!
//! Allocated components get their Beta full conditionals (with the slice
//! variables collapsed out), components beyond the highest allocation come
//! from the prior, and the stick vector is extended until the retained mass
//! covers 1 - min slice.

use rand_chacha::ChaCha8Rng;

use crate::dist::sample_beta;
use crate::model::Hyperparameters;
use crate::pyp::sample_prior_stick;
use crate::scalar::Scalar;

use super::state::{SliceState, StickState};
use super::SamplerError;

pub(super) const STICK_CAP: usize = 10_000;

/// Full-conditional Beta parameters of an allocated stick (0-based index l):
/// Be(1 - nu + #{D = l}, psi + nu(l+1) + #{D > l}).
pub fn stick_conditional<S: Scalar>(
    nu: S,
    psi: S,
    l: usize,
    n_equal: usize,
    n_greater: usize,
) -> (S, S) {
    (
        S::one() - nu + S::from_f64(n_equal as f64),
        psi + nu * S::from_f64((l + 1) as f64) + S::from_f64(n_greater as f64),
    )
}

pub fn update_sticks_and_slices<S: Scalar>(
    sticks: &mut [StickState<S>],
    slices: &mut SliceState<S>,
    hp: &Hyperparameters<S>,
    global_rng: &mut ChaCha8Rng,
    unit_rngs: &mut [ChaCha8Rng],
) -> Result<(), SamplerError> {
    let n_units = slices.n_units();
    for k in 0..hp.n_regimes {
        let d_star = slices.d_star(k);
        // Counts per component: equal and strictly greater allocations.
        let mut n_equal = vec![0usize; d_star + 1];
        for i in 0..n_units {
            n_equal[slices.d(i, k)] += 1;
        }
        let mut n_greater = vec![0usize; d_star + 1];
        let mut acc = 0usize;
        for l in (0..=d_star).rev() {
            n_greater[l] = acc;
            acc += n_equal[l];
        }
        let stick = &mut sticks[k];
        stick.v.truncate(d_star + 1);
        for l in 0..=d_star {
            let (a, b) = stick_conditional(hp.nu, hp.psi, l, n_equal[l], n_greater[l]);
            stick.v[l] = sample_beta(a, b, global_rng);
        }
        stick.recompute();
        // Fresh slice variables under the new weights.
        for i in 0..n_units {
            let w = stick.w[slices.d(i, k)];
            let u = w * S::sample_open01(&mut unit_rngs[i]);
            slices.set_u(i, k, u);
        }
        // Extend from the prior until the retained mass covers every slice.
        let u_min = slices.u_min(k);
        let mut total = stick.total_weight();
        while total <= S::one() - u_min {
            if stick.len() >= STICK_CAP {
                return Err(SamplerError::TruncationCap(STICK_CAP));
            }
            let l = stick.len();
            let vl = sample_prior_stick(hp.nu, hp.psi, l + 1, global_rng);
            let remaining = S::one() - total;
            stick.v.push(vl);
            stick.w.push(vl * remaining);
            total += vl * remaining;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, unit_rngs};

    fn harness(n_units: usize, alloc: &[usize], nu: f64, psi: f64) -> (Vec<StickState<f64>>, SliceState<f64>, Hyperparameters<f64>) {
        let mut hp: Hyperparameters<f64> = Hyperparameters::new(1);
        hp.nu = nu;
        hp.psi = psi;
        let max_d = alloc.iter().copied().max().unwrap();
        let v = vec![0.5; max_d + 1];
        let mut sticks = vec![StickState::from_v(v).unwrap()];
        sticks[0].recompute();
        let mut slices = SliceState::new(n_units, 1);
        for (i, &d) in alloc.iter().enumerate() {
            slices.set_d(i, 0, d);
            slices.set_u(i, 0, sticks[0].w[d] * 0.5);
        }
        (sticks, slices, hp)
    }

    #[test]
    fn all_units_on_first_component_gives_posterior_beta() {
        // nu = 0, all N allocated to component 1: V_1 ~ Be(1 + N, psi).
        let n = 12;
        let alloc = vec![0usize; n];
        let (a, b) = stick_conditional(0.0_f64, 3.0, 0, n, 0);
        assert_eq!(a, 1.0 + n as f64);
        assert_eq!(b, 3.0);
        // Monte Carlo check of the sampled conditional's mean.
        let (mut sticks, mut slices, hp) = harness(n, &alloc, 0.0, 3.0);
        let mut grng = stream_rng(1, 0);
        let mut urngs = unit_rngs(1, n);
        let reps = 40_000;
        let mut acc = 0.0;
        for _ in 0..reps {
            update_sticks_and_slices(&mut sticks, &mut slices, &hp, &mut grng, &mut urngs)
                .unwrap();
            acc += sticks[0].v[0];
        }
        let mean = acc / reps as f64;
        let expect = (1.0 + n as f64) / (1.0 + n as f64 + 3.0);
        let var = expect * (1.0 - expect) / (1.0 + n as f64 + 3.0 + 1.0);
        let se = (var / reps as f64).sqrt();
        assert!((mean - expect).abs() < 4.0 * se, "mean {mean} expect {expect}");
    }

    #[test]
    fn beta_moment_oracle_with_greater_counts() {
        // Mixed allocations: component 0 has n_0 members, m_0 units beyond.
        let alloc = vec![0, 0, 0, 1, 1, 2];
        let (mut sticks, mut slices, hp) = harness(6, &alloc, 0.25, 1.5);
        let (a, b) = stick_conditional(hp.nu, hp.psi, 0, 3, 3);
        assert!((a - (1.0 - 0.25 + 3.0)).abs() < 1e-15);
        assert!((b - (1.5 + 0.25 + 3.0)).abs() < 1e-15);
        let mut grng = stream_rng(2, 0);
        let mut urngs = unit_rngs(2, 6);
        let reps = 40_000;
        let mut acc = 0.0;
        for _ in 0..reps {
            update_sticks_and_slices(&mut sticks, &mut slices, &hp, &mut grng, &mut urngs)
                .unwrap();
            acc += sticks[0].v[0];
        }
        let mean = acc / reps as f64;
        let expect = a / (a + b);
        let var = expect * (1.0 - expect) / (a + b + 1.0);
        let se = (var / reps as f64).sqrt();
        assert!((mean - expect).abs() < 4.0 * se, "mean {mean} expect {expect}");
    }

    #[test]
    fn slice_validity_and_truncation_rule() {
        let alloc = vec![0, 2, 1, 0];
        let (mut sticks, mut slices, hp) = harness(4, &alloc, 0.3, 0.8);
        let mut grng = stream_rng(3, 0);
        let mut urngs = unit_rngs(3, 4);
        for _ in 0..200 {
            update_sticks_and_slices(&mut sticks, &mut slices, &hp, &mut grng, &mut urngs)
                .unwrap();
            for i in 0..4 {
                let d = slices.d(i, 0);
                assert!(slices.u(i, 0) > 0.0);
                assert!(slices.u(i, 0) < sticks[0].w[d]);
            }
            let total = sticks[0].total_weight();
            assert!(total > 1.0 - slices.u_min(0));
            // The rule asks for the smallest such truncation.
            let before: f64 = sticks[0].w[..sticks[0].len() - 1].iter().sum();
            let d_star = slices.d_star(0);
            if sticks[0].len() > d_star + 1 {
                assert!(before <= 1.0 - slices.u_min(0));
            }
        }
    }
}

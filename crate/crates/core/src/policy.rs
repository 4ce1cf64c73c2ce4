//! Closed-form optimal access policies under a primary throughput-degradation
//! constraint, and their exact performance.
//!
//! The optimal policy randomizes among three modes: Idle (never transmit
//! within an ARQ window), IC (transmit only once the primary packet is known
//! at the secondary receiver) and Always-TX. For a degradation budget
//! `nabla_th` below the IC policy's own degradation `nabla_ga` the optimum
//! randomizes the access probability in the `Known` state; between `nabla_ga`
//! and `nabla_max` it randomizes in `Buffered(0)`; beyond `nabla_max` the
//! constraint is inactive and Always-TX is optimal.
//!
//! Note on `nabla_ga`: it is defined as the stationary `Known`-state mass of
//! the IC policy times `nabla_max` (the IC policy's true degradation). The
//! per-state access-efficiency formulas and the regime-2 throughput are the
//! closed forms that agree with exact chain evaluation to solver precision;
//! see the regression tests.

use crate::channel::DecodingProfile;
use crate::mdp::{AccessPolicy, CdState};
use crate::{Error, Result};

/// Derived constants of a decoding profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileConstants {
    /// Degradation of the always-transmit policy, `(rho1 - rho0)/(1 - rho0)`.
    pub nabla_max: f64,
    /// Degradation of the IC policy: its stationary `Known`-state occupancy
    /// times `nabla_max`.
    pub nabla_ga: f64,
    /// Buffering-value constant entering the Always-TX throughput.
    pub zeta: f64,
    /// Genie-aided throughput slope `rate_s * d_s`.
    pub ga_slope: f64,
}

impl ProfileConstants {
    /// Stationary probability of `Known` under the IC policy.
    pub fn ic_known_mass(&self) -> f64 {
        self.nabla_ga / self.nabla_max
    }
}

/// Window-level randomization among the Idle, IC and Always-TX modes that
/// reproduces the optimal policy's long-run performance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeMix {
    pub xi_idle: f64,
    pub xi_ic: f64,
    pub xi_always: f64,
}

impl ModeMix {
    fn new(xi_idle: f64, xi_ic: f64, xi_always: f64) -> Self {
        ModeMix {
            xi_idle,
            xi_ic,
            xi_always,
        }
    }
}

/// Compute [`ProfileConstants`] for a profile and secondary rate.
pub fn constants(profile: &DecodingProfile, rate_s: f64) -> Result<ProfileConstants> {
    if profile.rho1 >= 1.0 {
        return Err(Error::Domain(
            "rho1 = 1 makes every window infinite; constants are degenerate".into(),
        ));
    }
    let r0 = profile.rho0;
    let r1 = profile.rho1;
    let dp = profile.d_p;
    let nabla_max = (r1 - r0) / (1.0 - r0);
    let delta = 1.0 - r1 + r0 * dp;
    let nabla_ga = nabla_max * r0 * dp / delta;
    let w = 1.0 - r1 * (1.0 - dp);
    let m = 1.0 - r1 * (1.0 - dp + profile.ups_sp);
    let zeta = profile.ups_sp / m + profile.ups_s / w;
    Ok(ProfileConstants {
        nabla_max,
        nabla_ga,
        zeta,
        ga_slope: rate_s * profile.d_s,
    })
}

/// Genie-aided throughput `epsilon * rate_s * d_s`: the upper bound attained
/// with non-causal primary-packet knowledge and access probability `epsilon`.
pub fn genie_aided(epsilon: f64, rate_s: f64, d_s: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::Domain(format!("epsilon {epsilon} outside [0,1]")));
    }
    Ok(epsilon * rate_s * d_s)
}

/// Mean slots per ARQ window and mean transmitting slots per window under the
/// pure IC mode.
fn ic_window_stats(profile: &DecodingProfile) -> (f64, f64) {
    let delta = 1.0 - profile.rho1 + profile.rho0 * profile.d_p;
    let pi_k = profile.rho0 * profile.d_p / delta;
    let end_rate = (1.0 - pi_k) * (1.0 - profile.rho0) + pi_k * (1.0 - profile.rho1);
    let len = 1.0 / end_rate;
    (len, pi_k * len)
}

/// The optimal stationary policy for degradation budget `nabla_th`, plus the
/// equivalent window-level mode randomization.
pub fn optimal_policy(
    nabla_th: f64,
    profile: &DecodingProfile,
    rate_s: f64,
) -> Result<(AccessPolicy, ModeMix)> {
    if !(nabla_th > 0.0) {
        return Err(Error::Domain(format!(
            "nabla_th must be positive (got {nabla_th}); the idle policy is the trivial answer"
        )));
    }
    let c = constants(profile, rate_s)?;
    let r0 = profile.rho0;
    let r1 = profile.rho1;
    let dp = profile.d_p;
    let target = (nabla_th / c.nabla_max).min(1.0);
    let (l_ic, tx_ic) = ic_window_stats(profile);
    if nabla_th <= c.nabla_ga {
        // Randomize the access probability in Known.
        let beta = 1.0 - r0 * (1.0 - dp);
        let q = beta * nabla_th
            / (beta * c.nabla_ga + (r1 - r0) * (nabla_th - c.nabla_ga));
        let policy = AccessPolicy::new(vec![0.0, 1.0], 1.0, 1.0, q)?;
        let l_idle = 1.0 / (1.0 - r0);
        let xi_ic = target * l_idle / (tx_ic - target * (l_ic - l_idle));
        Ok((policy, ModeMix::new(1.0 - xi_ic, xi_ic, 0.0)))
    } else if nabla_th < c.nabla_max {
        // Randomize the access probability in Buffered(0).
        let delta = 1.0 - r1 + r0 * dp;
        let p = (nabla_th - c.nabla_ga)
            / ((c.nabla_max - c.nabla_ga)
                + (c.nabla_max - nabla_th) * ((r1 - r0) * dp + r1 * profile.ups_s) / delta);
        let policy = AccessPolicy::new(vec![p, 1.0], 1.0, 1.0, 1.0)?;
        let l_at = 1.0 / (1.0 - r1);
        let xi_at = (target * l_ic - tx_ic) / (l_at * (1.0 - target) + target * l_ic - tx_ic);
        Ok((policy, ModeMix::new(0.0, 1.0 - xi_at, xi_at)))
    } else {
        Ok((AccessPolicy::always_transmit(), ModeMix::new(0.0, 0.0, 1.0)))
    }
}

/// Exact closed-form performance `(su_throughput, pu_degradation)` of the
/// optimal policy at budget `nabla_th`.
pub fn closed_form_performance(
    nabla_th: f64,
    profile: &DecodingProfile,
    rate_s: f64,
) -> Result<(f64, f64)> {
    if !(nabla_th > 0.0) {
        return Err(Error::Domain(format!("nabla_th must be positive, got {nabla_th}")));
    }
    let c = constants(profile, rate_s)?;
    if nabla_th <= c.nabla_ga {
        Ok((
            genie_aided(nabla_th / c.nabla_max, rate_s, profile.d_s)?,
            nabla_th,
        ))
    } else if nabla_th < c.nabla_max {
        let t_ic = c.ic_known_mass() * rate_s * profile.d_s;
        let eta0 = access_efficiency(CdState::Buffered(0), profile, rate_s)?;
        Ok((t_ic + (nabla_th - c.nabla_ga) * eta0, nabla_th))
    } else {
        Ok((always_tx_throughput(profile, rate_s)?, c.nabla_max))
    }
}

/// Throughput of the always-transmit policy.
fn always_tx_throughput(profile: &DecodingProfile, rate_s: f64) -> Result<f64> {
    let c = constants(profile, rate_s)?;
    let w = 1.0 - profile.rho1 * (1.0 - profile.d_p);
    let one_minus = 1.0 - profile.rho1;
    Ok(rate_s * (profile.d_s - one_minus * one_minus * c.zeta / w))
}

/// Access efficiency of a state: the secondary-throughput decrease per unit
/// degradation decrease from idling in that state (relative to Always-TX).
/// This is the segment-slope selector of the Pareto construction; it is
/// minimized by `Buffered(0)`.
pub fn access_efficiency(
    state: CdState,
    profile: &DecodingProfile,
    rate_s: f64,
) -> Result<f64> {
    let c = constants(profile, rate_s)?;
    let r0 = profile.rho0;
    let r1 = profile.rho1;
    let dp = profile.d_p;
    let w = 1.0 - r1 * (1.0 - dp);
    let delta = 1.0 - r1 + r0 * dp;
    let base = rate_s / c.nabla_max
        * (profile.d_s - c.zeta * (1.0 - r1) * delta / w);
    Ok(match state {
        CdState::Buffered(m) => {
            base + rate_s / c.nabla_max * m as f64 * (r1 - r0) * dp * (1.0 - dp) / w
        }
        CdState::MutualKnown => {
            let beta = 1.0 - r0 * (1.0 - dp);
            base + rate_s / c.nabla_max
                * ((r1 - r0) * (1.0 - dp) * dp / w
                    + beta * (1.0 - r1) * profile.ups_s / (w * w))
        }
        CdState::Known => {
            let beta = 1.0 - r0 * (1.0 - dp);
            base + rate_s / c.nabla_max * (1.0 - r1) * beta * c.zeta / w
        }
    })
}

/// Endpoints of the first Pareto segment:
/// `((nabla_max, T(always-TX)), (nabla_ga, T(IC)))`.
pub fn pareto_first_segment(
    profile: &DecodingProfile,
    rate_s: f64,
) -> Result<((f64, f64), (f64, f64))> {
    let c = constants(profile, rate_s)?;
    let t_at = always_tx_throughput(profile, rate_s)?;
    let t_ic = c.ic_known_mass() * rate_s * profile.d_s;
    Ok(((c.nabla_max, t_at), (c.nabla_ga, t_ic)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{compute_profile, LinkStats};
    use crate::mdp::evaluate_policy;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_profile() -> (DecodingProfile, f64) {
        let stats = LinkStats::new(20.0, 20.0, 4.0, 4.0, 3.1811472943492, 3.1811472943492).unwrap();
        (compute_profile(&stats, 1e-10).unwrap(), 3.1811472943492)
    }

    fn random_profile(rng: &mut ChaCha8Rng) -> DecodingProfile {
        loop {
            let mut r: [f64; 7] = std::array::from_fn(|_| rng.random::<f64>() + 0.01);
            let sum: f64 = r.iter().sum();
            for v in r.iter_mut() {
                *v /= sum;
            }
            let rho0 = 0.05 + 0.4 * rng.random::<f64>();
            let rho1 = rho0 + 0.05 + (0.9 - rho0 - 0.05) * rng.random::<f64>();
            if let Ok(p) = DecodingProfile::from_parts(r, rho0, rho1) {
                return p;
            }
        }
    }

    #[test]
    fn constants_known_values() {
        let p = DecodingProfile::from_parts(
            [0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.3],
            0.1,
            0.4,
        )
        .unwrap();
        let c = constants(&p, 2.0).unwrap();
        assert!((c.nabla_max - 1.0 / 3.0).abs() < 1e-15);
        // IC stationary Known mass is rho0 D_p / (1 - rho1 + rho0 D_p) = 0.05/0.65;
        // nabla_ga is that mass scaled by nabla_max.
        let mass = 0.05 / 0.65;
        assert!((c.ic_known_mass() - mass).abs() < 1e-12);
        assert!((c.nabla_ga - mass / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zeta_vanishes_without_buffering_events() {
        let p = DecodingProfile::from_parts(
            [0.2, 0.2, 0.2, 0.0, 0.1, 0.0, 0.3],
            0.1,
            0.4,
        )
        .unwrap();
        let c = constants(&p, 2.0).unwrap();
        assert_eq!(c.zeta, 0.0);
    }

    #[test]
    fn genie_aided_values() {
        assert_eq!(genie_aided(0.0, 2.0, 0.8).unwrap(), 0.0);
        assert!((genie_aided(1.0, 2.0, 0.8).unwrap() - 1.6).abs() < 1e-15);
        assert!(genie_aided(1.2, 2.0, 0.8).is_err());
    }

    #[test]
    fn nabla_ga_is_ic_degradation() {
        let (p, rate) = test_profile();
        let c = constants(&p, rate).unwrap();
        let ic = evaluate_policy(&crate::mdp::AccessPolicy::ic(), &p, rate, 1e-12).unwrap();
        assert!(
            (ic.pu_degradation - c.nabla_ga).abs() < 1e-10,
            "{} vs {}",
            ic.pu_degradation,
            c.nabla_ga
        );
    }

    #[test]
    fn constraint_is_tight_through_exact_chain() {
        let (p, rate) = test_profile();
        let c = constants(&p, rate).unwrap();
        for frac in [0.05, 0.3, 0.6, 0.9, 0.99] {
            let nth = frac * c.nabla_max;
            let (policy, _) = optimal_policy(nth, &p, rate).unwrap();
            let perf = evaluate_policy(&policy, &p, rate, 1e-12).unwrap();
            assert!(
                (perf.pu_degradation - nth).abs() < 1e-8,
                "nth={nth}: chain got {}",
                perf.pu_degradation
            );
        }
    }

    #[test]
    fn closed_form_matches_exact_chain() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..5 {
            let p = random_profile(&mut rng);
            let rate = 1.5 + 2.0 * rng.random::<f64>();
            let c = constants(&p, rate).unwrap();
            for frac in [0.1, 0.5, 0.8, 1.2] {
                let nth = frac * c.nabla_max;
                let (policy, _) = optimal_policy(nth, &p, rate).unwrap();
                let perf = evaluate_policy(&policy, &p, rate, 1e-12).unwrap();
                let (t_cf, d_cf) = closed_form_performance(nth, &p, rate).unwrap();
                assert!(
                    (perf.su_throughput - t_cf).abs() < 1e-8,
                    "throughput: chain {} vs closed form {t_cf}",
                    perf.su_throughput
                );
                assert!((perf.pu_degradation - d_cf).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn mode_mix_limits() {
        let (p, rate) = test_profile();
        let c = constants(&p, rate).unwrap();
        let (_, mix) = optimal_policy(1e-9, &p, rate).unwrap();
        assert!(mix.xi_idle > 0.999 && mix.xi_always == 0.0);
        let (_, mix) = optimal_policy(c.nabla_ga, &p, rate).unwrap();
        assert!((mix.xi_ic - 1.0).abs() < 1e-9, "{mix:?}");
        let (pol, mix) = optimal_policy(c.nabla_max + 0.1, &p, rate).unwrap();
        assert_eq!(mix.xi_always, 1.0);
        assert_eq!(pol, crate::mdp::AccessPolicy::always_transmit());
        // Mixes are distributions with at most two nonzero entries.
        for (_, m) in [(0, mix)] {
            assert!((m.xi_idle + m.xi_ic + m.xi_always - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn performance_continuous_at_regime_boundaries() {
        let (p, rate) = test_profile();
        let c = constants(&p, rate).unwrap();
        for boundary in [c.nabla_ga, c.nabla_max] {
            let (lo, _) = closed_form_performance(boundary * (1.0 - 1e-11), &p, rate).unwrap();
            let (hi, _) = closed_form_performance(boundary * (1.0 + 1e-11), &p, rate).unwrap();
            assert!((lo - hi).abs() < 1e-9, "jump at {boundary}: {lo} vs {hi}");
        }
    }

    #[test]
    fn throughput_monotone_in_budget() {
        let (p, rate) = test_profile();
        let c = constants(&p, rate).unwrap();
        let mut last = 0.0;
        for i in 1..=30 {
            let nth = c.nabla_max * 1.1 * i as f64 / 30.0;
            let (t, _) = closed_form_performance(nth, &p, rate).unwrap();
            assert!(t >= last - 1e-12);
            last = t;
        }
    }

    #[test]
    fn efficiency_matches_finite_difference() {
        let (p, rate) = test_profile();
        let at = evaluate_policy(&crate::mdp::AccessPolicy::always_transmit(), &p, rate, 1e-12)
            .unwrap();
        let states = [
            CdState::Buffered(0),
            CdState::Buffered(1),
            CdState::Buffered(3),
            CdState::MutualKnown,
            CdState::Known,
        ];
        for s in states {
            let flipped = crate::mdp::AccessPolicy::always_transmit()
                .with_state(s, 0.0)
                .unwrap();
            let perf = evaluate_policy(&flipped, &p, rate, 1e-12).unwrap();
            let fd = (perf.su_throughput - at.su_throughput)
                / (perf.pu_degradation - at.pu_degradation);
            let cf = access_efficiency(s, &p, rate).unwrap();
            assert!((fd - cf).abs() < 1e-7, "{s}: fd {fd} vs closed form {cf}");
        }
    }

    #[test]
    fn efficiency_is_minimized_at_buffered_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..5 {
            let p = random_profile(&mut rng);
            let eta0 = access_efficiency(CdState::Buffered(0), &p, 2.0).unwrap();
            for s in [
                CdState::Buffered(1),
                CdState::Buffered(4),
                CdState::MutualKnown,
                CdState::Known,
            ] {
                assert!(access_efficiency(s, &p, 2.0).unwrap() > eta0);
            }
        }
    }

    #[test]
    fn efficiency_affine_in_buffer_level() {
        let (p, rate) = test_profile();
        let c = constants(&p, rate).unwrap();
        let slope = rate / c.nabla_max * (p.rho1 - p.rho0) * p.d_p * (1.0 - p.d_p)
            / (1.0 - p.rho1 * (1.0 - p.d_p));
        let e0 = access_efficiency(CdState::Buffered(0), &p, rate).unwrap();
        for m in 1..6u32 {
            let em = access_efficiency(CdState::Buffered(m), &p, rate).unwrap();
            assert!((em - (e0 + slope * m as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn first_segment_slope_is_eta0_and_midpoint_is_collinear() {
        let (p, rate) = test_profile();
        let ((d_at, t_at), (d_ic, t_ic)) = pareto_first_segment(&p, rate).unwrap();
        let slope = (t_at - t_ic) / (d_at - d_ic);
        let eta0 = access_efficiency(CdState::Buffered(0), &p, rate).unwrap();
        assert!((slope - eta0).abs() < 1e-9, "{slope} vs {eta0}");
        let mid = 0.5 * (d_at + d_ic);
        let (t_mid, _) = closed_form_performance(mid, &p, rate).unwrap();
        assert!((t_mid - (t_ic + slope * (mid - d_ic))).abs() < 1e-10);
    }

    #[test]
    fn rejects_nonpositive_budget() {
        let (p, rate) = test_profile();
        assert!(optimal_policy(0.0, &p, rate).is_err());
        assert!(closed_form_performance(-0.1, &p, rate).is_err());
    }
}

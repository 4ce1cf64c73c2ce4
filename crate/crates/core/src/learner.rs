//! Online stochastic-gradient adaptation of the access level and the
//! secondary rate.
//!
//! The optimal policy family is parametrized by a single access level
//! `nu in [0, 2]`: `mu(Buffered(0)) = max(nu - 1, 0)`,
//! `mu(Known) = min(nu, 1)`, all other states transmit. `nu` is driven by the
//! overheard primary ACK/NACK stream toward the point where the primary
//! throughput meets its minimum requirement, and the rate is driven by
//! per-slot channel measurements toward the fixed point of
//! `ln(2) r 2^r = mean_snr`.

use crate::mdp::AccessPolicy;
use crate::{Error, Result};

/// Step-size schedule for the stochastic-gradient recursions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `beta0 / (t + 1)`: for static scenarios.
    Decay { beta0: f64 },
    /// Fixed step: for tracking time-varying scenarios.
    Constant { beta: f64 },
}

/// Default decaying-schedule gain. Large enough that the access level crosses
/// the low-drift region near `nu = 1` within a 1e5-slot run while keeping the
/// rate recursion stable.
pub const DEFAULT_DECAY_BETA0: f64 = 1.0;
/// Default fixed step for tracking runs.
pub const DEFAULT_TRACKING_BETA: f64 = 0.01;

impl StepSchedule {
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            StepSchedule::Decay { beta0 } => beta0 / (t as f64 + 1.0),
            StepSchedule::Constant { beta } => beta,
        }
    }
}

/// State of the online learner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerState {
    /// Access level in [0, 2].
    pub nu: f64,
    /// Current secondary rate, bits/s/Hz.
    pub rate_s: f64,
    pub schedule: StepSchedule,
    /// Slot index; determines the next step size.
    pub t: u64,
}

impl LearnerState {
    pub fn new(nu0: f64, rate0: f64, schedule: StepSchedule) -> Result<Self> {
        if !(0.0..=2.0).contains(&nu0) {
            return Err(Error::Domain(format!("nu0 {nu0} outside [0,2]")));
        }
        if !(rate0 >= 0.0) {
            return Err(Error::Domain(format!("rate0 {rate0} must be nonnegative")));
        }
        Ok(LearnerState {
            nu: nu0,
            rate_s: rate0,
            schedule,
            t: 0,
        })
    }
}

/// The policy family indexed by the access level.
pub fn policy_from_nu(nu: f64) -> Result<AccessPolicy> {
    if !(0.0..=2.0).contains(&nu) {
        return Err(Error::Domain(format!("nu {nu} outside [0,2]")));
    }
    AccessPolicy::new(vec![(nu - 1.0).max(0.0), 1.0], 1.0, 1.0, nu.min(1.0))
}

/// One stochastic-gradient step from this slot's feedback.
///
/// `ack` is the overheard primary feedback; `gamma_s_observed` is the
/// measured secondary-link SNR, available exactly when the secondary
/// transmitted. The access level moves up on ACK and down on NACK; the rate
/// follows the sign of `gamma_s - ln(2) * r * 2^r` on transmitting slots and
/// is left unchanged otherwise.
pub fn sgd_update(
    state: &LearnerState,
    ack: bool,
    transmitted: bool,
    gamma_s_observed: Option<f64>,
    rate_p: f64,
    pu_min_throughput: f64,
) -> Result<LearnerState> {
    if transmitted && gamma_s_observed.is_none() {
        return Err(Error::Contract(
            "transmitted slot requires a gamma_s observation".into(),
        ));
    }
    let beta = state.schedule.at(state.t);
    let ack_term = if ack { rate_p } else { 0.0 };
    let nu = (state.nu + beta * (ack_term - pu_min_throughput)).clamp(0.0, 2.0);
    let rate_s = if transmitted {
        let gamma = gamma_s_observed.expect("checked above");
        let r = state.rate_s;
        (r + beta * (gamma - std::f64::consts::LN_2 * r * r.exp2())).max(0.0)
    } else {
        state.rate_s
    };
    Ok(LearnerState {
        nu,
        rate_s,
        schedule: state.schedule,
        t: state.t + 1,
    })
}

/// The unique root of `ln(2) * r * 2^r = mean_snr`: the rate maximizing
/// `r * exp(-(2^r - 1)/mean_snr)` and the target of the rate recursion.
pub fn rate_fixed_point(mean_snr: f64) -> Result<f64> {
    if !(mean_snr > 0.0) || !mean_snr.is_finite() {
        return Err(Error::Domain(format!(
            "mean SNR must be positive, got {mean_snr}"
        )));
    }
    let f = |r: f64| std::f64::consts::LN_2 * r * r.exp2() - mean_snr;
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Domain("rate fixed point out of range".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-10 * (1.0 + hi) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::CdState;

    #[test]
    fn policy_from_nu_endpoints() {
        let p = policy_from_nu(0.0).unwrap();
        assert_eq!(p.probability(CdState::Buffered(0)), 0.0);
        assert_eq!(p.probability(CdState::Known), 0.0);
        assert_eq!(p.probability(CdState::Buffered(3)), 1.0);
        assert_eq!(p.probability(CdState::MutualKnown), 1.0);

        let p = policy_from_nu(1.0).unwrap();
        assert_eq!(p, AccessPolicy::ic());

        let p = policy_from_nu(2.0).unwrap();
        for s in [
            CdState::Buffered(0),
            CdState::Buffered(5),
            CdState::MutualKnown,
            CdState::Known,
        ] {
            assert_eq!(p.probability(s), 1.0);
        }
        assert!(policy_from_nu(2.5).is_err());
    }

    #[test]
    fn sgd_update_spec_examples() {
        let s = LearnerState {
            nu: 1.0,
            rate_s: 0.0,
            schedule: StepSchedule::Constant { beta: 0.01 },
            t: 0,
        };
        let up = sgd_update(&s, true, false, None, 3.0, 2.0).unwrap();
        assert!((up.nu - 1.01).abs() < 1e-14);
        let down = sgd_update(&s, false, false, None, 3.0, 2.0).unwrap();
        assert!((down.nu - 0.98).abs() < 1e-14);
        // rate at 0: gradient term vanishes, pure gamma push
        let tx = sgd_update(&s, true, true, Some(4.0), 3.0, 2.0).unwrap();
        assert!((tx.rate_s - 0.04).abs() < 1e-14);
    }

    #[test]
    fn iterates_stay_in_bounds() {
        let mut s = LearnerState::new(0.0, 0.0, StepSchedule::Constant { beta: 0.5 }).unwrap();
        for i in 0..2000 {
            let ack = i % 3 == 0;
            let tx = i % 2 == 0;
            s = sgd_update(&s, ack, tx, tx.then_some(25.0), 3.0, 2.0).unwrap();
            assert!((0.0..=2.0).contains(&s.nu));
            assert!(s.rate_s >= 0.0);
        }
    }

    #[test]
    fn idle_slots_leave_rate_unchanged() {
        let s = LearnerState::new(1.0, 2.5, StepSchedule::Constant { beta: 0.1 }).unwrap();
        let up = sgd_update(&s, true, false, None, 3.0, 2.0).unwrap();
        assert_eq!(up.rate_s, 2.5);
    }

    #[test]
    fn transmitted_without_observation_is_contract_violation() {
        let s = LearnerState::new(1.0, 2.5, StepSchedule::Constant { beta: 0.1 }).unwrap();
        assert!(matches!(
            sgd_update(&s, true, true, None, 3.0, 2.0),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn rate_fixed_point_matches_bisection_oracle() {
        // Independent oracle: bisect r * 2^r = 1 for mean = ln 2.
        let f = |r: f64| r * r.exp2() - 1.0;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..80 {
            let m = 0.5 * (lo + hi);
            if f(m) < 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        let oracle = 0.5 * (lo + hi);
        let got = rate_fixed_point(std::f64::consts::LN_2).unwrap();
        assert!((got - oracle).abs() < 1e-9, "{got} vs {oracle}");
        assert!((got - 0.6411).abs() < 5e-4);
    }

    #[test]
    fn rate_fixed_point_limits() {
        assert!(rate_fixed_point(1e-9).unwrap() < 2e-9 / std::f64::consts::LN_2);
        let big = rate_fixed_point(1e4).unwrap();
        assert!(big > 9.0 && big < 14.0);
        assert!(rate_fixed_point(0.0).is_err());
    }

    #[test]
    fn decay_schedule_values() {
        let s = StepSchedule::Decay { beta0: 1.0 };
        assert_eq!(s.at(0), 1.0);
        assert_eq!(s.at(9), 0.1);
    }
}

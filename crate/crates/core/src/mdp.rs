//! The countable-state Markov decision process underlying the chain-decoding
//! protocol.
//!
//! States are [`CdState`]: `Buffered(b)` (current primary packet not
//! virtually decodable, `b` buffered secondary packets hang off it),
//! `MutualKnown` (primary packet and the chain-decoding root are mutually
//! decodable) and `Known` (primary packet virtually decodable, one-way).
//! The transition kernel and the virtual per-slot rewards are exact closed
//! forms in the [`DecodingProfile`]; stationary evaluation of an arbitrary
//! stationary access policy is a direct linear solve on a truncated chain
//! whose geometric tail makes the truncation error controllable.

use crate::channel::DecodingProfile;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use std::collections::BTreeMap;

/// State of the chain-decoding protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CdState {
    /// Primary packet virtually undecodable; `b` secondary packets buffered
    /// against it.
    Buffered(u32),
    /// Primary packet and the CD root unlock each other.
    MutualKnown,
    /// Primary packet virtually decodable (or already decoded), one-way.
    Known,
}

impl std::fmt::Display for CdState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CdState::Buffered(b) => write!(f, "U{b}"),
            CdState::MutualKnown => write!(f, "Kmut"),
            CdState::Known => write!(f, "Kdir"),
        }
    }
}

/// A stationary access policy: transmit probability per state, with a
/// constant continuation for buffer levels beyond the explicitly listed ones.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessPolicy {
    buffered: Vec<f64>,
    tail: f64,
    mutual: f64,
    known: f64,
}

impl AccessPolicy {
    pub fn new(buffered: Vec<f64>, tail: f64, mutual: f64, known: f64) -> Result<Self> {
        if buffered.is_empty() {
            return Err(Error::Domain("need at least the b = 0 entry".into()));
        }
        for &p in buffered.iter().chain([&tail, &mutual, &known]) {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!("access probability {p} outside [0,1]")));
            }
        }
        Ok(AccessPolicy {
            buffered,
            tail,
            mutual,
            known,
        })
    }

    /// State-independent coin with transmit probability `p`.
    pub fn constant(p: f64) -> Result<Self> {
        AccessPolicy::new(vec![p], p, p, p)
    }

    pub fn always_transmit() -> Self {
        AccessPolicy::constant(1.0).unwrap()
    }

    pub fn idle() -> Self {
        AccessPolicy::constant(0.0).unwrap()
    }

    /// Interference-cancellation policy: idle in `Buffered(0)`, transmit
    /// everywhere else.
    pub fn ic() -> Self {
        AccessPolicy::new(vec![0.0, 1.0], 1.0, 1.0, 1.0).unwrap()
    }

    pub fn probability(&self, s: CdState) -> f64 {
        match s {
            CdState::Buffered(b) => *self
                .buffered
                .get(b as usize)
                .unwrap_or(&self.tail),
            CdState::MutualKnown => self.mutual,
            CdState::Known => self.known,
        }
    }

    pub fn explicit_len(&self) -> usize {
        self.buffered.len()
    }

    pub fn is_deterministic(&self) -> bool {
        self.buffered
            .iter()
            .chain([&self.tail, &self.mutual, &self.known])
            .all(|&p| p == 0.0 || p == 1.0)
    }

    /// Copy with the probability in one state replaced.
    pub fn with_state(&self, s: CdState, p: f64) -> Result<Self> {
        let mut out = self.clone();
        match s {
            CdState::Buffered(b) => {
                let b = b as usize;
                while out.buffered.len() <= b {
                    let t = out.tail;
                    out.buffered.push(t);
                }
                out.buffered[b] = p;
            }
            CdState::MutualKnown => out.mutual = p,
            CdState::Known => out.known = p,
        }
        AccessPolicy::new(out.buffered, out.tail, out.mutual, out.known)
    }
}

/// One row of the transition kernel: sparse, at most five entries.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRow {
    entries: Vec<(CdState, f64)>,
}

impl TransitionRow {
    pub fn entries(&self) -> &[(CdState, f64)] {
        &self.entries
    }

    pub fn probability(&self, s: CdState) -> f64 {
        self.entries
            .iter()
            .find(|(x, _)| *x == s)
            .map_or(0.0, |(_, p)| *p)
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }
}

/// Transition kernel row from `state` under action `transmit`.
///
/// From `Buffered(b)` the chain returns to 0 on primary success, grows to
/// `b + 1` when the slot leaves a buffered secondary packet behind a failed
/// primary, and jumps to the knowledge states when the primary packet becomes
/// virtually decodable.
pub fn transition(state: CdState, transmit: bool, profile: &DecodingProfile) -> TransitionRow {
    let a = if transmit { 1.0 } else { 0.0 };
    let ra = if transmit { profile.rho1 } else { profile.rho0 };
    let dp = profile.d_p;
    let us = profile.ups_s;
    let usp = profile.ups_sp;
    let mut entries: Vec<(CdState, f64)> = Vec::with_capacity(5);
    let mut push = |s: CdState, p: f64| {
        if p > 0.0 {
            entries.push((s, p));
        }
    };
    match state {
        CdState::Buffered(b) => {
            if b == 0 {
                push(CdState::Buffered(0), 1.0 - ra * (dp + a * us));
            } else {
                push(CdState::Buffered(0), 1.0 - ra);
                push(CdState::Buffered(b), ra * (1.0 - dp - a * us));
            }
            push(CdState::Buffered(b + 1), profile.rho1 * a * us);
            push(CdState::MutualKnown, profile.rho1 * a * usp);
            push(CdState::Known, ra * (dp - a * usp));
        }
        CdState::MutualKnown => {
            push(CdState::Buffered(0), 1.0 - ra);
            push(CdState::MutualKnown, ra * (1.0 - dp + a * usp));
            push(CdState::Known, ra * (dp - a * usp));
        }
        CdState::Known => {
            push(CdState::Buffered(0), 1.0 - ra);
            push(CdState::Known, ra);
        }
    }
    let mut row = TransitionRow { entries };
    row.entries.sort_by(|(a, _), (b, _)| a.cmp(b));
    row
}

/// Expected virtual instantaneous throughput in `state` under action
/// `transmit`, in bits/s/Hz.
pub fn virtual_reward(
    state: CdState,
    transmit: bool,
    profile: &DecodingProfile,
    rate_s: f64,
) -> f64 {
    let a = if transmit { 1.0 } else { 0.0 };
    match state {
        CdState::Buffered(b) => {
            rate_s * (a * (profile.delta_sp + profile.delta_s) + profile.d_p * b as f64)
        }
        CdState::MutualKnown => rate_s * (a * (profile.d_s - profile.ups_sp) + profile.d_p),
        CdState::Known => a * rate_s * profile.d_s,
    }
}

/// Exact evaluation of a stationary policy.
#[derive(Debug, Clone)]
pub struct PolicyPerformance {
    /// Long-run virtual secondary throughput, bits/s/Hz.
    pub su_throughput: f64,
    /// Long-run primary throughput degradation in [0, nabla_max].
    pub pu_degradation: f64,
    /// Stationary distribution on the truncated chain; sums to
    /// `1 - truncation_tail`.
    pub stationary: BTreeMap<CdState, f64>,
    /// Estimated stationary mass beyond the truncation level.
    pub truncation_tail: f64,
}

/// Internal dense solve on states `{Buffered(0..=cap), MutualKnown, Known}`.
/// Probability mass that would leave the top buffered state upward is
/// reflected into staying, which keeps rows stochastic; the resulting error
/// vanishes geometrically in `cap`.
struct Solved {
    cap: usize,
    pi: Vec<f64>,
    tail: f64,
}

fn state_at(i: usize, cap: usize) -> CdState {
    if i <= cap {
        CdState::Buffered(i as u32)
    } else if i == cap + 1 {
        CdState::MutualKnown
    } else {
        CdState::Known
    }
}

fn solve_truncated(policy: &AccessPolicy, profile: &DecodingProfile, cap: usize) -> Result<Vec<f64>> {
    let n = cap + 3;
    let mut p = DMatrix::<f64>::zeros(n, n);
    let idx = |s: CdState| -> usize {
        match s {
            CdState::Buffered(b) => (b as usize).min(cap),
            CdState::MutualKnown => cap + 1,
            CdState::Known => cap + 2,
        }
    };
    for i in 0..n {
        let s = state_at(i, cap);
        let prob = policy.probability(s);
        for (transmit, weight) in [(true, prob), (false, 1.0 - prob)] {
            if weight == 0.0 {
                continue;
            }
            for (next, q) in transition(s, transmit, profile).entries() {
                p[(i, idx(*next))] += weight * q;
            }
        }
    }
    // pi P = pi with normalization replacing the last balance equation.
    let mut a = p.transpose() - DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[n - 1] = 1.0;
    let lu = a.lu();
    let pi = lu
        .solve(&rhs)
        .ok_or_else(|| Error::NonErgodic("singular truncated balance system".into()))?;
    let mut pi: Vec<f64> = pi.iter().copied().collect();
    for v in pi.iter_mut() {
        if *v < 0.0 {
            if *v < -1e-9 {
                return Err(Error::NonErgodic(format!(
                    "negative stationary mass {v} in solve"
                )));
            }
            *v = 0.0;
        }
    }
    let sum: f64 = pi.iter().sum();
    if !(sum.is_finite()) || (sum - 1.0).abs() > 1e-6 {
        return Err(Error::NonErgodic(format!("stationary mass sums to {sum}")));
    }
    for v in pi.iter_mut() {
        *v /= sum;
    }
    Ok(pi)
}

fn solve_adaptive(
    policy: &AccessPolicy,
    profile: &DecodingProfile,
    eps_trunc: f64,
) -> Result<Solved> {
    if !(eps_trunc > 0.0) {
        return Err(Error::Domain(format!(
            "eps_trunc must be positive, got {eps_trunc}"
        )));
    }
    // Per-step buffer growth probability is at most rho1 * ups_s, so the tail
    // is geometric with at most that ratio.
    let q = (profile.rho1 * profile.ups_s).min(1.0 - 1e-12);
    let mut cap = (policy.explicit_len() + 8).max(12);
    loop {
        let pi = solve_truncated(policy, profile, cap)?;
        let top = pi[cap];
        if top < eps_trunc * (1.0 - q) {
            let tail = top * q / (1.0 - q);
            return Ok(Solved { cap, pi, tail });
        }
        cap *= 2;
        if cap > 4096 {
            return Err(Error::NonErgodic(format!(
                "truncation never satisfied eps_trunc = {eps_trunc}; top mass {top}"
            )));
        }
    }
}

/// Stationary distribution of the chain induced by `policy`. The returned map
/// sums to one up to the (estimated, sub-`eps_trunc`) truncated tail mass.
pub fn stationary_distribution(
    policy: &AccessPolicy,
    profile: &DecodingProfile,
    eps_trunc: f64,
) -> Result<BTreeMap<CdState, f64>> {
    let solved = solve_adaptive(policy, profile, eps_trunc)?;
    let scale = 1.0 - solved.tail;
    Ok(solved
        .pi
        .iter()
        .enumerate()
        .map(|(i, &v)| (state_at(i, solved.cap), v * scale))
        .collect())
}

/// Evaluate a stationary policy exactly: long-run virtual secondary
/// throughput and primary degradation.
pub fn evaluate_policy(
    policy: &AccessPolicy,
    profile: &DecodingProfile,
    rate_s: f64,
    eps_trunc: f64,
) -> Result<PolicyPerformance> {
    let solved = solve_adaptive(policy, profile, eps_trunc)?;
    let nabla_max = (profile.rho1 - profile.rho0) / (1.0 - profile.rho0);
    let mut throughput = 0.0;
    let mut access = 0.0;
    for (i, &mass) in solved.pi.iter().enumerate() {
        let s = state_at(i, solved.cap);
        let p = policy.probability(s);
        throughput += mass
            * (p * virtual_reward(s, true, profile, rate_s)
                + (1.0 - p) * virtual_reward(s, false, profile, rate_s));
        access += mass * p;
    }
    let scale = 1.0 - solved.tail;
    let stationary = solved
        .pi
        .iter()
        .enumerate()
        .map(|(i, &v)| (state_at(i, solved.cap), v * scale))
        .collect();
    Ok(PolicyPerformance {
        su_throughput: throughput,
        pu_degradation: nabla_max * access,
        stationary,
        truncation_tail: solved.tail,
    })
}

/// One vertex of the Pareto envelope returned by [`pareto_oracle`].
#[derive(Debug, Clone)]
pub struct ParetoVertex {
    pub degradation: f64,
    pub throughput: f64,
    pub policy: AccessPolicy,
}

/// Brute-force Pareto envelope over all deterministic policies on the
/// truncated state space `{Buffered(0..=max_b), MutualKnown, Known}`, with
/// the action at `max_b` continuing for larger buffer levels.
///
/// Returns the upper-left convex hull sorted by decreasing degradation. Ties
/// on equal degradation keep the higher throughput; exact performance ties
/// keep the lexicographically smallest action vector.
pub fn pareto_oracle(
    profile: &DecodingProfile,
    rate_s: f64,
    max_b: u32,
) -> Result<Vec<ParetoVertex>> {
    if max_b > 12 {
        return Err(Error::TooLarge(format!(
            "max_b = {max_b} enumerates 2^{} policies",
            max_b + 3
        )));
    }
    let n_states = max_b as usize + 3;
    let count = 1usize << n_states;
    let mut evaluated: Vec<(Vec<u8>, f64, f64, AccessPolicy)> = (0..count)
        .into_par_iter()
        .map(|mask| {
            let bits: Vec<u8> = (0..n_states).map(|i| ((mask >> i) & 1) as u8).collect();
            let buffered: Vec<f64> = bits[..=max_b as usize].iter().map(|&b| b as f64).collect();
            let tail = buffered[max_b as usize];
            let policy = AccessPolicy::new(
                buffered,
                tail,
                bits[max_b as usize + 1] as f64,
                bits[max_b as usize + 2] as f64,
            )
            .expect("binary actions are valid probabilities");
            let perf = evaluate_policy(&policy, profile, rate_s, 1e-12)?;
            Ok((bits, perf.pu_degradation, perf.su_throughput, policy))
        })
        .collect::<Result<Vec<_>>>()?;
    // Deterministic processing order regardless of parallel scheduling.
    evaluated.sort_by(|a, b| a.0.cmp(&b.0));

    let better = |a: &(Vec<u8>, f64, f64, AccessPolicy), b: &(Vec<u8>, f64, f64, AccessPolicy)| {
        // Higher degradation first; then higher throughput; then lexicographically
        // smaller action vector.
        (a.1, a.2, std::cmp::Reverse(a.0.clone())) > (b.1, b.2, std::cmp::Reverse(b.0.clone()))
    };
    let mut current = evaluated[0].clone();
    for cand in evaluated.iter().skip(1) {
        if better(cand, &current) {
            current = cand.clone();
        }
    }
    let mut envelope = vec![ParetoVertex {
        degradation: current.1,
        throughput: current.2,
        policy: current.3.clone(),
    }];
    loop {
        let mut best: Option<(f64, &(Vec<u8>, f64, f64, AccessPolicy))> = None;
        for cand in evaluated.iter() {
            if cand.1 >= current.1 {
                continue;
            }
            let slope = (cand.2 - current.2) / (cand.1 - current.1);
            let replace = match &best {
                None => true,
                Some((s, b)) => {
                    slope < *s
                        || (slope == *s
                            && (cand.1 < b.1 || (cand.1 == b.1 && cand.0 < b.0)))
                }
            };
            if replace {
                best = Some((slope, cand));
            }
        }
        match best {
            Some((_, next)) => {
                envelope.push(ParetoVertex {
                    degradation: next.1,
                    throughput: next.2,
                    policy: next.3.clone(),
                });
                current = next.clone();
            }
            None => break,
        }
    }
    Ok(envelope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{compute_profile, LinkStats};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_profile() -> DecodingProfile {
        let stats = LinkStats::new(20.0, 20.0, 4.0, 4.0, 3.18, 3.18).unwrap();
        compute_profile(&stats, 1e-10).unwrap()
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
    fn transition_spec_examples() {
        let p = DecodingProfile::from_parts(
            [0.05, 0.15, 0.05, 0.25, 0.1, 0.1, 0.3],
            0.1,
            0.4,
        )
        .unwrap();
        // (Known, a=1, rho1=0.4) -> {Buffered(0): 0.6, Known: 0.4}
        let row = transition(CdState::Known, true, &p);
        assert!((row.probability(CdState::Buffered(0)) - 0.6).abs() < 1e-15);
        assert!((row.probability(CdState::Known) - 0.4).abs() < 1e-15);

        // (Buffered(0), a=0, rho0=0.1, D_p=0.5) -> {Buffered(0): 0.95, Known: 0.05}
        let p2 = DecodingProfile::from_parts(
            [0.2, 0.1, 0.1, 0.1, 0.1, 0.1, 0.3],
            0.1,
            0.4,
        )
        .unwrap();
        assert!((p2.d_p - 0.5).abs() < 1e-12);
        let row = transition(CdState::Buffered(0), false, &p2);
        assert!((row.probability(CdState::Buffered(0)) - 0.95).abs() < 1e-12);
        assert!((row.probability(CdState::Known) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn kernel_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let p = random_profile(&mut rng);
            for b in 0..=20u32 {
                for transmit in [false, true] {
                    let row = transition(CdState::Buffered(b), transmit, &p);
                    assert!((row.total() - 1.0).abs() < 1e-12);
                    assert!(row.entries().len() <= 5);
                }
            }
            for s in [CdState::MutualKnown, CdState::Known] {
                for transmit in [false, true] {
                    let row = transition(s, transmit, &p);
                    assert!((row.total() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn buffered_row_support() {
        let p = test_profile();
        let row = transition(CdState::Buffered(2), true, &p);
        for (s, _) in row.entries() {
            assert!(matches!(
                s,
                CdState::Buffered(0) | CdState::Buffered(2) | CdState::Buffered(3)
                    | CdState::MutualKnown
                    | CdState::Known
            ));
        }
        assert!((row.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn virtual_reward_spec_examples() {
        let p = DecodingProfile::from_parts(
            [0.2, 0.1, 0.05, 0.2, 0.1, 0.05, 0.3],
            0.1,
            0.4,
        )
        .unwrap();
        assert_eq!(virtual_reward(CdState::Buffered(0), false, &p, 2.0), 0.0);
        // Known, a=1, R_s = 2, D_s = 0.55 here
        let want = 2.0 * p.d_s;
        assert!((virtual_reward(CdState::Known, true, &p, 2.0) - want).abs() < 1e-15);
        // Buffered(3), a=1: R_s [ (delta_sp+delta_s) + D_p * 3 ]
        let want = 2.0 * ((p.delta_sp + p.delta_s) + p.d_p * 3.0);
        assert!((virtual_reward(CdState::Buffered(3), true, &p, 2.0) - want).abs() < 1e-15);
    }

    #[test]
    fn idle_policy_two_state_balance() {
        let p = test_profile();
        let pi = stationary_distribution(&AccessPolicy::idle(), &p, 1e-12).unwrap();
        // Hand-solved two-state chain: pi(Known) = rho0 D_p / (1 - rho0 + rho0 D_p).
        let want = p.rho0 * p.d_p / (1.0 - p.rho0 + p.rho0 * p.d_p);
        assert!((pi[&CdState::Known] - want).abs() < 1e-10);
        for (s, &v) in pi.iter() {
            if !matches!(s, CdState::Buffered(0) | CdState::Known) {
                assert!(v < 1e-14, "{s}: {v}");
            }
        }
    }

    #[test]
    fn ic_policy_known_state_mass() {
        let p = test_profile();
        let pi = stationary_distribution(&AccessPolicy::ic(), &p, 1e-12).unwrap();
        let want = p.rho0 * p.d_p / (1.0 - p.rho1 + p.rho0 * p.d_p);
        assert!((pi[&CdState::Known] - want).abs() < 1e-10);
    }

    #[test]
    fn stationary_normalizes_and_balances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let p = random_profile(&mut rng);
            let policy = AccessPolicy::new(vec![0.3, 0.8], 0.6, 0.9, 0.5).unwrap();
            let pi = stationary_distribution(&policy, &p, 1e-12).unwrap();
            let total: f64 = pi.values().sum();
            assert!((total - 1.0).abs() < 1e-10, "{total}");
            // Balance: inflow equals mass for every state in the map.
            let mut inflow: BTreeMap<CdState, f64> = BTreeMap::new();
            for (&s, &mass) in pi.iter() {
                let prob = policy.probability(s);
                for (transmit, w) in [(true, prob), (false, 1.0 - prob)] {
                    if w == 0.0 {
                        continue;
                    }
                    for (next, q) in transition(s, transmit, &p).entries() {
                        *inflow.entry(*next).or_insert(0.0) += mass * w * q;
                    }
                }
            }
            for (&s, &mass) in pi.iter() {
                let int = inflow.get(&s).copied().unwrap_or(0.0);
                if mass > 1e-13 {
                    assert!((int - mass).abs() < 1e-10, "{s}: {int} vs {mass}");
                }
            }
        }
    }

    #[test]
    fn idle_policy_evaluates_to_zero() {
        let p = test_profile();
        let perf = evaluate_policy(&AccessPolicy::idle(), &p, 3.18, 1e-12).unwrap();
        assert_eq!(perf.su_throughput, 0.0);
        assert_eq!(perf.pu_degradation, 0.0);
    }

    #[test]
    fn degradation_bounds_and_tightness() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let p = random_profile(&mut rng);
            let nabla_max = (p.rho1 - p.rho0) / (1.0 - p.rho0);
            let policy = AccessPolicy::new(vec![0.4, 1.0], 1.0, 0.7, 0.2).unwrap();
            let perf = evaluate_policy(&policy, &p, 2.0, 1e-12).unwrap();
            assert!(perf.pu_degradation >= 0.0 && perf.pu_degradation <= nabla_max + 1e-12);
            let at = evaluate_policy(&AccessPolicy::always_transmit(), &p, 2.0, 1e-12).unwrap();
            assert!((at.pu_degradation - nabla_max).abs() < 1e-10);
        }
    }

    #[test]
    fn truncation_cauchy_convergence() {
        // Tightening the truncation tolerance changes the result by no more
        // than the looser tolerance itself, and successive changes shrink.
        let p = test_profile();
        let policy = AccessPolicy::always_transmit();
        let t = |eps: f64| {
            evaluate_policy(&policy, &p, 3.18, eps)
                .unwrap()
                .su_throughput
        };
        let (t1, t2, t3) = (t(1e-3), t(1e-6), t(1e-12));
        assert!((t1 - t3).abs() < 1e-3);
        assert!((t2 - t3).abs() < 1e-6);
        assert!((t2 - t3).abs() <= (t1 - t2).abs().max(1e-12));
    }

    #[test]
    fn oracle_envelope_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let p = random_profile(&mut rng);
        let env = pareto_oracle(&p, 2.0, 4).unwrap();
        for w in env.windows(2) {
            assert!(w[0].degradation > w[1].degradation);
            assert!(w[0].throughput > w[1].throughput);
        }
        // First vertex is always-transmit, second is the IC policy.
        assert!(env[0].policy.is_deterministic());
        let at = evaluate_policy(&AccessPolicy::always_transmit(), &p, 2.0, 1e-12).unwrap();
        assert!((env[0].degradation - at.pu_degradation).abs() < 1e-12);
        let ic = evaluate_policy(&AccessPolicy::ic(), &p, 2.0, 1e-12).unwrap();
        assert!((env[1].degradation - ic.pu_degradation).abs() < 1e-10);
        assert!((env[1].throughput - ic.su_throughput).abs() < 1e-10);
    }

    #[test]
    fn oracle_refuses_large_max_b() {
        let p = test_profile();
        assert!(matches!(
            pareto_oracle(&p, 2.0, 13),
            Err(Error::TooLarge(_))
        ));
    }

    #[test]
    fn single_state_randomization_traces_the_chord() {
        // Always-TX and IC differ only in Buffered(0). Randomizing there traces
        // the straight segment between their performance points.
        let p = test_profile();
        let rate = 3.18;
        let at = evaluate_policy(&AccessPolicy::always_transmit(), &p, rate, 1e-12).unwrap();
        let ic = evaluate_policy(&AccessPolicy::ic(), &p, rate, 1e-12).unwrap();
        let slope = (at.su_throughput - ic.su_throughput)
            / (at.pu_degradation - ic.pu_degradation);
        for lambda in [0.1, 0.35, 0.62, 0.9] {
            let pol = AccessPolicy::new(vec![lambda, 1.0], 1.0, 1.0, 1.0).unwrap();
            let perf = evaluate_policy(&pol, &p, rate, 1e-12).unwrap();
            let chord = ic.su_throughput + slope * (perf.pu_degradation - ic.pu_degradation);
            assert!(
                (perf.su_throughput - chord).abs() < 1e-8,
                "lambda={lambda}: {} vs {chord}",
                perf.su_throughput
            );
        }
    }
}

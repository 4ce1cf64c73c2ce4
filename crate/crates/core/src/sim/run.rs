//! Monte Carlo and scripted drivers around the protocol engine.

use super::engine::{Engine, SlotObservation, WindowClose};
use super::graph::PacketRef;
use super::{Scenario, Scheme};
use crate::channel::{cap, classify_outcome, compute_profile, unit_uniform, Outcome};
use crate::learner::{policy_from_nu, sgd_update, LearnerState};
use crate::mdp::{AccessPolicy, CdState};
use crate::policy::{constants, optimal_policy};
use crate::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const PROFILE_TOL: f64 = 1e-9;

/// One slot of a recorded trace.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub t: u64,
    pub a_s: u8,
    /// Secondary packet transmitted this slot, if any.
    pub su_label: Option<u32>,
    pub observation: SlotObservation,
    /// Primary feedback: true = ACK.
    pub y_p_ack: bool,
    /// Secondary receiver feedback index in 1..=7.
    pub y_s: u8,
    pub decoded_now: Vec<PacketRef>,
    pub cd_state_after: CdState,
    pub buffer_occupancy: u32,
}

/// Aggregate results of one run.
#[derive(Debug, Clone)]
pub struct SimMetrics {
    /// Decoded secondary bits per slot (bits/s/Hz).
    pub su_throughput_actual: f64,
    /// Measured primary throughput (bits/s/Hz).
    pub pu_throughput: f64,
    /// `1 - pu_throughput / (R_p (1 - rho0))`.
    pub pu_degradation: f64,
    /// Per-packet delay from first transmission slot to decoding slot.
    pub delay_samples: Vec<u32>,
    pub discarded_packets: u64,
    pub slots: u64,
    pub su_packets_transmitted: u64,
    pub su_packets_decoded: u64,
    pub discarded_window: u64,
    pub discarded_buffer: u64,
    pub discarded_undecodable: u64,
    pub pending_at_horizon: u64,
}

impl SimMetrics {
    /// Transmitted packets must reconcile against their final fates.
    pub fn conserves_packets(&self) -> bool {
        self.su_packets_decoded
            + self.discarded_window
            + self.discarded_buffer
            + self.discarded_undecodable
            + self.pending_at_horizon
            == self.su_packets_transmitted
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub metrics: SimMetrics,
    pub trace: Option<Vec<SlotRecord>>,
    pub final_learner: Option<LearnerState>,
}

/// Retry-until-decoded bookkeeping for the memoryless schemes (AO, GENIE).
struct RetryState {
    current: Option<(u32, u64, f64)>, // id, first_tx, rate
    next_id: u32,
    transmitted: u64,
    decoded: u64,
    bits: f64,
    delays: Vec<u32>,
}

impl RetryState {
    fn new() -> Self {
        RetryState {
            current: None,
            next_id: 1,
            transmitted: 0,
            decoded: 0,
            bits: 0.0,
            delays: Vec::new(),
        }
    }

    fn packet(&mut self, now: u64, rate: f64) -> u32 {
        match self.current {
            Some((id, _, _)) => id,
            None => {
                let id = self.next_id;
                self.next_id += 1;
                self.current = Some((id, now, rate));
                self.transmitted += 1;
                id
            }
        }
    }

    fn succeed(&mut self, now: u64) {
        if let Some((_, first, rate)) = self.current.take() {
            self.decoded += 1;
            self.bits += rate;
            self.delays.push((now - first) as u32);
        }
    }
}

/// Run one scenario. All randomness comes from a ChaCha stream seeded with
/// `scenario.seed`; identical scenarios produce identical traces.
pub fn run_simulation(scenario: &Scenario, record_trace: bool) -> Result<SimOutput> {
    scenario.validate()?;
    let stats = scenario.stats;
    let profile = compute_profile(&stats, PROFILE_TOL)?;
    let consts = constants(&profile, stats.rate_s)?;
    let epsilon = (scenario.nabla_th / consts.nabla_max).min(1.0);
    let fixed_policy: AccessPolicy = match scenario.scheme {
        Scheme::Opcd | Scheme::Bic => optimal_policy(scenario.nabla_th, &profile, stats.rate_s)?.0,
        Scheme::Nacd | Scheme::Ao | Scheme::Genie => AccessPolicy::constant(epsilon)?,
    };
    let mut learner = match scenario.learner {
        Some(cfg) => Some(LearnerState::new(cfg.nu0, cfg.rate0, cfg.schedule)?),
        None => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut engine = Engine::new(scenario.scheme == Scheme::Bic, scenario.b_max);
    let mut retry = RetryState::new();
    let mut trace = record_trace.then(Vec::new);

    let mut window_used: u32 = 0;
    let mut pu_acks: u64 = 0;

    let uses_graph = matches!(scenario.scheme, Scheme::Opcd | Scheme::Bic | Scheme::Nacd);

    for t in 0..scenario.horizon {
        let rate_now = learner.as_ref().map_or(stats.rate_s, |l| l.rate_s);
        let state = if uses_graph {
            engine.cd_state()
        } else {
            CdState::Buffered(0)
        };
        let access_prob = match (&learner, scenario.scheme) {
            (Some(l), _) => policy_from_nu(l.nu)?.probability(state),
            (None, _) => fixed_policy.probability(state),
        };
        let transmit = unit_uniform(&mut rng) < access_prob;

        let mut gamma_s_obs = None;
        let (su_label, observation, decoded_now) = if uses_graph {
            let pu_known = engine.pu_known();
            if transmit {
                let (su, tx_rate) = engine.select_packet(t, rate_now);
                let gamma_s = crate::channel::sample_snr(stats.mean_snr_s, &mut rng);
                gamma_s_obs = Some(gamma_s);
                let obs = if pu_known {
                    SlotObservation::Clean {
                        success: tx_rate < cap(gamma_s),
                    }
                } else {
                    let gamma_ps = crate::channel::sample_snr(stats.mean_snr_ps, &mut rng);
                    let mut mac_stats = stats;
                    mac_stats.rate_s = tx_rate;
                    SlotObservation::Mac(classify_outcome(gamma_s, gamma_ps, &mac_stats)?)
                };
                let decoded = engine.apply_slot(Some(su), obs, t);
                (Some(su), obs, decoded)
            } else {
                let obs = if pu_known {
                    SlotObservation::IdleQuiet
                } else {
                    let gamma_ps = crate::channel::sample_snr(stats.mean_snr_ps, &mut rng);
                    SlotObservation::IdleObserved {
                        pu_decoded: stats.rate_p < cap(gamma_ps),
                    }
                };
                let decoded = engine.apply_slot(None, obs, t);
                (None, obs, decoded)
            }
        } else if transmit {
            let su = retry.packet(t, rate_now);
            let gamma_s = crate::channel::sample_snr(stats.mean_snr_s, &mut rng);
            gamma_s_obs = Some(gamma_s);
            match scenario.scheme {
                Scheme::Genie => {
                    let success = rate_now < cap(gamma_s);
                    if success {
                        retry.succeed(t);
                    }
                    (
                        Some(su),
                        SlotObservation::Clean { success },
                        if success { vec![PacketRef::Su(su)] } else { vec![] },
                    )
                }
                _ => {
                    // ARQ-oblivious: per-slot joint decoding on the MAC.
                    let gamma_ps = crate::channel::sample_snr(stats.mean_snr_ps, &mut rng);
                    let mut mac_stats = stats;
                    mac_stats.rate_s = rate_now;
                    let region = classify_outcome(gamma_s, gamma_ps, &mac_stats)?;
                    let success = matches!(region, Outcome::BothDecoded | Outcome::OnlyS);
                    if success {
                        retry.succeed(t);
                    }
                    (
                        Some(su),
                        SlotObservation::Mac(region),
                        if success { vec![PacketRef::Su(su)] } else { vec![] },
                    )
                }
            }
        } else {
            (None, SlotObservation::IdleQuiet, vec![])
        };

        // Primary ARQ outcome for this slot.
        let rho = if transmit { profile.rho1 } else { profile.rho0 };
        let fail = unit_uniform(&mut rng) < rho;
        window_used += 1;
        let ack = !fail;
        if ack {
            pu_acks += 1;
            if uses_graph {
                engine.close_window(WindowClose::Ack);
            }
            window_used = 0;
        } else if scenario.t_arq.is_some_and(|cap| window_used >= cap) {
            if uses_graph {
                engine.close_window(WindowClose::Deadline);
            }
            window_used = 0;
        }

        if let Some(l) = learner.as_mut() {
            let cfg = scenario.learner.as_ref().expect("learner config present");
            *l = sgd_update(l, ack, transmit, gamma_s_obs, stats.rate_p, cfg.pu_min_throughput)?;
        }

        if let Some(tr) = trace.as_mut() {
            tr.push(SlotRecord {
                t,
                a_s: transmit as u8,
                su_label,
                observation,
                y_p_ack: ack,
                y_s: observation.feedback_index(),
                decoded_now,
                cd_state_after: if uses_graph {
                    engine.cd_state()
                } else {
                    CdState::Buffered(0)
                },
                buffer_occupancy: engine.buffer_occupancy(),
            });
        }
    }

    let slots = scenario.horizon;
    let (transmitted, decoded, bits, delays, disc_w, disc_b, disc_u, pending) = if uses_graph {
        let c = &engine.counters;
        (
            c.transmitted_packets,
            c.decoded_packets,
            c.delivered_bits,
            c.delays.clone(),
            c.discarded_window,
            c.discarded_buffer,
            c.discarded_undecodable,
            engine.outstanding_count(),
        )
    } else {
        (
            retry.transmitted,
            retry.decoded,
            retry.bits,
            retry.delays.clone(),
            0,
            0,
            0,
            retry.current.is_some() as u64,
        )
    };
    let pu_throughput = stats.rate_p * pu_acks as f64 / slots as f64;
    let pu_max = stats.rate_p * (1.0 - profile.rho0);
    let metrics = SimMetrics {
        su_throughput_actual: bits / slots as f64,
        pu_throughput,
        pu_degradation: 1.0 - pu_throughput / pu_max,
        delay_samples: delays,
        discarded_packets: disc_w + disc_b + disc_u,
        slots,
        su_packets_transmitted: transmitted,
        su_packets_decoded: decoded,
        discarded_window: disc_w,
        discarded_buffer: disc_b,
        discarded_undecodable: disc_u,
        pending_at_horizon: pending,
    };
    Ok(SimOutput {
        metrics,
        trace,
        final_learner: learner,
    })
}

/// Empirical CDF of per-packet delay, normalized to the average transmission
/// period `normalization` (slots). Discarded packets are not delay samples.
pub fn delay_cdf(metrics: &SimMetrics, normalization: f64) -> Result<Vec<(f64, f64)>> {
    if metrics.delay_samples.is_empty() {
        return Err(Error::Domain("no delay samples recorded".into()));
    }
    if !(normalization > 0.0) {
        return Err(Error::Domain("normalization must be positive".into()));
    }
    let mut sorted = metrics.delay_samples.clone();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, d) in sorted.iter().enumerate() {
        let x = *d as f64 / normalization;
        let cum = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = cum,
            _ => out.push((x, cum)),
        }
    }
    Ok(out)
}

/// One forced slot of a scripted run: the secondary transmits, the receiver
/// observes `region`, and the primary link outcome is `pu_ack`.
#[derive(Debug, Clone, Copy)]
pub struct ScriptedSlot {
    pub region: Outcome,
    pub pu_ack: bool,
}

/// Drive a buffering scheme through a forced outcome sequence and report how
/// many secondary packets it decodes. The ARQ-oblivious baseline is scored on
/// the same script by counting its per-slot joint-decoding successes.
pub fn run_scripted(scheme: Scheme, script: &[ScriptedSlot]) -> Result<u64> {
    match scheme {
        Scheme::Ao => Ok(script
            .iter()
            .filter(|s| matches!(s.region, Outcome::BothDecoded | Outcome::OnlyS))
            .count() as u64),
        Scheme::Opcd | Scheme::Nacd | Scheme::Bic => {
            let mut engine = Engine::new(scheme == Scheme::Bic, None);
            for (t, slot) in script.iter().enumerate() {
                let (su, _) = engine.select_packet(t as u64, 1.0);
                let obs = if engine.pu_known() {
                    // A known primary packet turns the forced region into an
                    // interference-free attempt: success iff the region says
                    // the secondary link supported its rate.
                    SlotObservation::Clean {
                        success: matches!(
                            slot.region,
                            Outcome::BothDecoded | Outcome::OnlyS | Outcome::PUnlocksS
                                | Outcome::Mutual
                        ),
                    }
                } else {
                    SlotObservation::Mac(slot.region)
                };
                engine.apply_slot(Some(su), obs, t as u64);
                if slot.pu_ack {
                    engine.close_window(WindowClose::Ack);
                }
            }
            Ok(engine.counters.decoded_packets)
        }
        Scheme::Genie => Err(Error::Config(
            "scripted runs target the decoding schemes; the genie has nothing to script".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::LinkStats;
    use crate::sim::Scenario;

    fn scenario(scheme: Scheme, seed: u64) -> Scenario {
        Scenario {
            stats: LinkStats::new(20.0, 20.0, 4.0, 4.0, 3.1811472943492, 3.1811472943492)
                .unwrap(),
            nabla_th: 0.3,
            scheme,
            b_max: None,
            t_arq: None,
            horizon: 4000,
            seed,
            learner: None,
        }
    }

    #[test]
    fn traces_are_seed_deterministic() {
        for scheme in Scheme::all() {
            let a = run_simulation(&scenario(scheme, 77), true).unwrap();
            let b = run_simulation(&scenario(scheme, 77), true).unwrap();
            assert_eq!(a.trace, b.trace, "{scheme}");
            let c = run_simulation(&scenario(scheme, 78), true).unwrap();
            assert_ne!(a.trace, c.trace, "{scheme}");
        }
    }

    #[test]
    fn packets_are_conserved() {
        for scheme in Scheme::all() {
            for seed in [1, 2, 3] {
                let mut sc = scenario(scheme, seed);
                sc.b_max = Some(3);
                sc.t_arq = Some(6);
                let out = run_simulation(&sc, false).unwrap();
                assert!(out.metrics.conserves_packets(), "{scheme} seed {seed}");
            }
        }
    }

    #[test]
    fn feedback_matches_observation() {
        let out = run_simulation(&scenario(Scheme::Opcd, 5), true).unwrap();
        for rec in out.trace.unwrap() {
            assert_eq!(rec.y_s, rec.observation.feedback_index());
            match rec.observation {
                SlotObservation::Mac(o) => assert_eq!(rec.y_s, o.index()),
                SlotObservation::Clean { success } => {
                    assert_eq!(rec.y_s, if success { 2 } else { 7 })
                }
                SlotObservation::IdleObserved { pu_decoded } => {
                    assert_eq!(rec.y_s, if pu_decoded { 3 } else { 7 })
                }
                SlotObservation::IdleQuiet => assert_eq!(rec.y_s, 7),
            }
        }
    }

    #[test]
    fn idle_budget_means_idle_system() {
        let mut sc = scenario(Scheme::Nacd, 9);
        sc.nabla_th = 1e-12;
        let out = run_simulation(&sc, false).unwrap();
        assert_eq!(out.metrics.su_throughput_actual, 0.0);
        assert!(out.metrics.pu_degradation.abs() < 0.05);
    }

    #[test]
    fn delay_cdf_is_monotone_and_ends_at_one() {
        let out = run_simulation(&scenario(Scheme::Opcd, 12), false).unwrap();
        let cdf = delay_cdf(&out.metrics, 5.0).unwrap();
        assert!(cdf.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
        assert!((cdf.last().unwrap().1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn genie_requires_nothing_to_script() {
        assert!(run_scripted(Scheme::Genie, &[]).is_err());
    }
}

//! Slot-level protocol engine shared by the chain-decoding schemes (OPCD,
//! NACD) and the within-window interference-cancellation baseline (BIC).
//!
//! The engine owns the CD graph, the set of outstanding secondary packets and
//! the discard accounting. It is driven one slot at a time with the access
//! decision and the slot's decoding observation; the caller supplies both, so
//! the same engine runs under random sampling and under scripted outcome
//! sequences.

use super::graph::{cd_protocol_select, CdGraph, PacketRef, Selection, SignalKind};
use crate::channel::Outcome;
use crate::mdp::CdState;
use std::collections::BTreeMap;

/// What the secondary receiver observed in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlotObservation {
    /// Transmission into the multiple access channel (primary packet not yet
    /// known): one of the seven regions.
    Mac(Outcome),
    /// Transmission on the interference-free channel (primary packet known
    /// and cancelled).
    Clean { success: bool },
    /// Idle slot; the receiver attempted to decode the primary packet alone.
    IdleObserved { pu_decoded: bool },
    /// Idle slot with the primary packet already known: no decoding activity.
    IdleQuiet,
}

impl SlotObservation {
    /// Receiver feedback index in 1..=7 announcing this observation.
    pub fn feedback_index(&self) -> u8 {
        match self {
            SlotObservation::Mac(o) => o.index(),
            SlotObservation::Clean { success } => {
                if *success {
                    2
                } else {
                    7
                }
            }
            SlotObservation::IdleObserved { pu_decoded } => {
                if *pu_decoded {
                    3
                } else {
                    7
                }
            }
            SlotObservation::IdleQuiet => 7,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct OutstandingPacket {
    first_tx: u64,
    rate: f64,
}

/// Why the window closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowClose {
    Ack,
    Deadline,
}

/// Per-run discard and delivery accounting.
#[derive(Debug, Clone, Default)]
pub struct EngineCounters {
    pub transmitted_packets: u64,
    pub decoded_packets: u64,
    pub delivered_bits: f64,
    pub delays: Vec<u32>,
    pub discarded_window: u64,
    pub discarded_buffer: u64,
    pub discarded_undecodable: u64,
}

/// Protocol engine for the buffering schemes.
#[derive(Debug, Clone)]
pub struct Engine {
    graph: CdGraph,
    outstanding: BTreeMap<u32, OutstandingPacket>,
    next_su: u32,
    /// BIC mode: never retransmit, drop the whole graph at window end.
    bic: bool,
    b_max: Option<u32>,
    pub counters: EngineCounters,
}

impl Engine {
    pub fn new(bic: bool, b_max: Option<u32>) -> Self {
        Engine {
            graph: CdGraph::new(),
            outstanding: BTreeMap::new(),
            next_su: 1,
            bic,
            b_max,
            counters: EngineCounters::default(),
        }
    }

    pub fn graph(&self) -> &CdGraph {
        &self.graph
    }

    pub fn cd_state(&self) -> CdState {
        if self.bic {
            // Backward IC has no retransmissions, hence no root and no
            // cross-window knowledge: the state is direct knowledge of the
            // current primary packet plus the within-window buffer count.
            if self.graph.pu_decoded() {
                return CdState::Known;
            }
            let b = self
                .graph
                .nodes()
                .iter()
                .filter(|p| matches!(p, PacketRef::Su(_)))
                .count();
            return CdState::Buffered(b as u32);
        }
        self.graph.cd_state()
    }

    pub fn pu_known(&self) -> bool {
        self.graph.pu_decoded()
    }

    /// Pick the packet to send this slot. Fresh packets are allocated here.
    pub fn select_packet(&mut self, now: u64, rate: f64) -> (u32, f64) {
        let selection = if self.bic {
            Selection::FreshPacket
        } else {
            cd_protocol_select(&self.graph, self.graph.cd_state())
        };
        match selection {
            Selection::RetransmitRoot(root) => {
                let rate = self
                    .outstanding
                    .get(&root)
                    .map_or(rate, |p| p.rate);
                (root, rate)
            }
            Selection::FreshPacket => {
                let id = self.next_su;
                self.next_su += 1;
                self.outstanding
                    .insert(id, OutstandingPacket { first_tx: now, rate });
                self.counters.transmitted_packets += 1;
                (id, rate)
            }
        }
    }

    fn deliver(&mut self, su: u32, now: u64) {
        if let Some(p) = self.outstanding.remove(&su) {
            self.counters.decoded_packets += 1;
            self.counters.delivered_bits += p.rate;
            self.counters.delays.push((now - p.first_tx) as u32);
        }
    }

    /// Drop outstanding packets that no longer appear in the graph (their
    /// recovery paths were consumed or discarded).
    fn sweep_orphans(&mut self, bucket: &mut u64) {
        let gone: Vec<u32> = self
            .outstanding
            .keys()
            .copied()
            .filter(|&su| !self.graph.contains_su(su))
            .collect();
        for su in gone {
            self.outstanding.remove(&su);
            *bucket += 1;
        }
    }

    fn fire(&mut self, trigger: PacketRef, now: u64) -> Vec<PacketRef> {
        let recovered = self.graph.chain_decode(trigger);
        for p in &recovered {
            if let PacketRef::Su(su) = p {
                self.deliver(*su, now);
            }
        }
        let mut lost = 0;
        self.sweep_orphans(&mut lost);
        self.counters.discarded_undecodable += lost;
        recovered
    }

    /// Apply one slot. `tx` is the transmitted packet when the secondary was
    /// active. Returns every packet recovered this slot.
    pub fn apply_slot(
        &mut self,
        tx: Option<u32>,
        observation: SlotObservation,
        now: u64,
    ) -> Vec<PacketRef> {
        let mut decoded = Vec::new();
        match (tx, observation) {
            (Some(su), SlotObservation::Mac(region)) => {
                let pu = self.graph.current_pu();
                match region {
                    Outcome::BothDecoded => {
                        self.deliver(su, now);
                        decoded.push(PacketRef::Su(su));
                        decoded.extend(self.fire(PacketRef::Su(su), now));
                        decoded.push(PacketRef::Pu(pu));
                        decoded.extend(self.fire(PacketRef::Pu(pu), now));
                    }
                    Outcome::OnlyS => {
                        self.deliver(su, now);
                        decoded.push(PacketRef::Su(su));
                        decoded.extend(self.fire(PacketRef::Su(su), now));
                    }
                    Outcome::OnlyP => {
                        decoded.push(PacketRef::Pu(pu));
                        decoded.extend(self.fire(PacketRef::Pu(pu), now));
                        self.lose_if_unrecoverable(su, Bucket::Undecodable);
                    }
                    Outcome::PUnlocksS | Outcome::SUnlocksP | Outcome::Mutual => {
                        let kind = SignalKind::from_outcome(region).expect("buffering region");
                        if self
                            .b_max
                            .is_none_or(|cap| self.graph.buffer_occupancy() < cap)
                        {
                            self.graph.insert_signal(su, pu, kind);
                        } else {
                            // Buffer full: the received signal is discarded
                            // after the decoding attempt.
                            self.lose_if_unrecoverable(su, Bucket::BufferFull);
                        }
                    }
                    Outcome::Failure => {
                        self.lose_if_unrecoverable(su, Bucket::Undecodable);
                    }
                }
            }
            (Some(su), SlotObservation::Clean { success }) => {
                if success {
                    self.deliver(su, now);
                    decoded.push(PacketRef::Su(su));
                    decoded.extend(self.fire(PacketRef::Su(su), now));
                } else {
                    self.lose_if_unrecoverable(su, Bucket::Undecodable);
                }
            }
            (None, SlotObservation::IdleObserved { pu_decoded }) => {
                if pu_decoded {
                    let pu = self.graph.current_pu();
                    decoded.push(PacketRef::Pu(pu));
                    decoded.extend(self.fire(PacketRef::Pu(pu), now));
                }
            }
            (None, SlotObservation::IdleQuiet) => {}
            (tx, obs) => unreachable!("inconsistent slot input: tx={tx:?} obs={obs:?}"),
        }
        decoded.sort();
        decoded.dedup();
        decoded
    }

    /// Close the ARQ window (ACK received or retransmission deadline hit).
    pub fn close_window(&mut self, _why: WindowClose) {
        let orphans = self.graph.end_window(self.bic);
        for su in orphans {
            if self.outstanding.remove(&su).is_some() {
                self.counters.discarded_window += 1;
            }
        }
        // Root-less leftovers (possible only in BIC mode where everything
        // drops) are counted above; in CD mode surviving packets stay
        // outstanding across windows.
    }

    fn lose_if_unrecoverable(&mut self, su: u32, bucket: Bucket) {
        if !self.graph.contains_su(su) {
            if self.outstanding.remove(&su).is_some() {
                match bucket {
                    Bucket::BufferFull => self.counters.discarded_buffer += 1,
                    Bucket::Undecodable => self.counters.discarded_undecodable += 1,
                }
            }
        }
    }

    pub fn outstanding_count(&self) -> u64 {
        self.outstanding.len() as u64
    }

    pub fn buffer_occupancy(&self) -> u32 {
        self.graph.buffer_occupancy()
    }
}

enum Bucket {
    BufferFull,
    Undecodable,
}

//! The chain-decoding dependency graph kept at the secondary receiver.
//!
//! Every stored signal came from one multiple-access slot and references the
//! secondary packet and the primary packet transmitted in that slot. The
//! signal's region determines which packet can be recovered from it once the
//! other is known. The graph *is* the set of stored signals: packets appear
//! as long as some live signal references them, and the buffer occupancy is
//! the signal count.

use crate::channel::Outcome;
use crate::mdp::CdState;

/// A packet reference: secondary packets carry SU labels, primary packets PU
/// labels. Labels increase monotonically, so smaller means older.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PacketRef {
    Su(u32),
    Pu(u32),
}

impl std::fmt::Display for PacketRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PacketRef::Su(i) => write!(f, "S{i}"),
            PacketRef::Pu(i) => write!(f, "P{i}"),
        }
    }
}

/// Decode dependency carried by one buffered signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    /// Region {4}: removing the primary packet recovers the secondary one.
    PUnlocksS,
    /// Region {5}: removing the secondary packet recovers the primary one.
    SUnlocksP,
    /// Region {6}: either recovers the other.
    Mutual,
}

impl SignalKind {
    pub fn from_outcome(o: Outcome) -> Option<SignalKind> {
        match o {
            Outcome::PUnlocksS => Some(SignalKind::PUnlocksS),
            Outcome::SUnlocksP => Some(SignalKind::SUnlocksP),
            Outcome::Mutual => Some(SignalKind::Mutual),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Signal {
    su: u32,
    pu: u32,
    kind: SignalKind,
}

/// Packet-selection decision of the chain-decoding protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    RetransmitRoot(u32),
    FreshPacket,
}

/// The runtime chain-decoding graph plus the current primary packet's
/// knowledge state.
#[derive(Debug, Clone)]
pub struct CdGraph {
    signals: Vec<Signal>,
    current_pu: u32,
    next_pu: u32,
    pu_decoded: bool,
    root: Option<u32>,
}

impl Default for CdGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl CdGraph {
    pub fn new() -> Self {
        CdGraph {
            signals: Vec::new(),
            current_pu: 0,
            next_pu: 1,
            pu_decoded: false,
            root: None,
        }
    }

    pub fn current_pu(&self) -> u32 {
        self.current_pu
    }

    pub fn pu_decoded(&self) -> bool {
        self.pu_decoded
    }

    /// Number of stored signals (buffer units in use).
    pub fn buffer_occupancy(&self) -> u32 {
        self.signals.len() as u32
    }

    /// The CD root: the secondary packet whose decoding recovers the most
    /// other secondary packets, ties broken toward the oldest packet.
    pub fn root(&self) -> Option<u32> {
        self.root
    }

    pub fn contains_su(&self, su: u32) -> bool {
        self.signals.iter().any(|s| s.su == su)
    }

    /// All packets referenced by live signals.
    pub fn nodes(&self) -> Vec<PacketRef> {
        let mut out: Vec<PacketRef> = self
            .signals
            .iter()
            .flat_map(|s| [PacketRef::Su(s.su), PacketRef::Pu(s.pu)])
            .collect();
        out.sort();
        out.dedup();
        out
    }

    /// Directed decodability edges `(unlocker, unlocked)`.
    pub fn edges(&self) -> Vec<(PacketRef, PacketRef)> {
        let mut out = Vec::new();
        for s in &self.signals {
            let su = PacketRef::Su(s.su);
            let pu = PacketRef::Pu(s.pu);
            match s.kind {
                SignalKind::PUnlocksS => out.push((pu, su)),
                SignalKind::SUnlocksP => out.push((su, pu)),
                SignalKind::Mutual => {
                    out.push((pu, su));
                    out.push((su, pu));
                }
            }
        }
        out.sort();
        out
    }

    /// Store one signal. The caller enforces the buffer limit.
    pub fn insert_signal(&mut self, su: u32, pu: u32, kind: SignalKind) {
        self.signals.push(Signal { su, pu, kind });
        self.reelect();
    }

    /// Directed closure: everything recoverable once the seeds are known.
    fn closure(&self, seeds: &[PacketRef]) -> Vec<PacketRef> {
        let mut set: Vec<PacketRef> = seeds.to_vec();
        loop {
            let mut changed = false;
            for s in &self.signals {
                let su = PacketRef::Su(s.su);
                let pu = PacketRef::Pu(s.pu);
                let fwd = matches!(s.kind, SignalKind::PUnlocksS | SignalKind::Mutual);
                let bwd = matches!(s.kind, SignalKind::SUnlocksP | SignalKind::Mutual);
                if fwd && set.contains(&pu) && !set.contains(&su) {
                    set.push(su);
                    changed = true;
                }
                if bwd && set.contains(&su) && !set.contains(&pu) {
                    set.push(pu);
                    changed = true;
                }
            }
            if !changed {
                return set;
            }
        }
    }

    fn reelect(&mut self) {
        let mut candidates: Vec<u32> = self.signals.iter().map(|s| s.su).collect();
        candidates.sort_unstable();
        candidates.dedup();
        let mut best: Option<(usize, u32)> = None;
        for c in candidates {
            let unlocked = self
                .closure(&[PacketRef::Su(c)])
                .iter()
                .filter(|p| matches!(p, PacketRef::Su(s) if *s != c))
                .count();
            if best.is_none_or(|(n, _)| unlocked > n) {
                best = Some((unlocked, c));
            }
        }
        self.root = best.map(|(_, c)| c);
    }

    /// Is the root's component attached to the current primary packet (in
    /// either direction)?
    pub fn root_connected_to_current(&self) -> bool {
        let Some(root) = self.root else {
            return false;
        };
        let target = PacketRef::Pu(self.current_pu);
        let mut comp = vec![PacketRef::Su(root)];
        loop {
            let mut changed = false;
            for s in &self.signals {
                let su = PacketRef::Su(s.su);
                let pu = PacketRef::Pu(s.pu);
                if comp.contains(&su) && !comp.contains(&pu) {
                    comp.push(pu);
                    changed = true;
                }
                if comp.contains(&pu) && !comp.contains(&su) {
                    comp.push(su);
                    changed = true;
                }
            }
            if !changed {
                return comp.contains(&target);
            }
        }
    }

    /// Protocol state as seen by the access policy: `Known` once the current
    /// primary packet is decoded or recoverable by starting chain decoding at
    /// the root, `MutualKnown` when the root is recoverable back from it, and
    /// otherwise `Buffered(b)` with `b` the packets waiting on the current
    /// primary packet.
    pub fn cd_state(&self) -> CdState {
        if self.pu_decoded {
            return CdState::Known;
        }
        let current = PacketRef::Pu(self.current_pu);
        if let Some(root) = self.root {
            if self.closure(&[PacketRef::Su(root)]).contains(&current) {
                let back = self.closure(&[current]);
                return if back.contains(&PacketRef::Su(root)) {
                    CdState::MutualKnown
                } else {
                    CdState::Known
                };
            }
        }
        let b = self
            .signals
            .iter()
            .filter(|s| s.pu == self.current_pu && s.kind == SignalKind::PUnlocksS)
            .count();
        CdState::Buffered(b as u32)
    }

    /// Mark a packet decoded and propagate chain decoding to fixpoint.
    /// Returns every newly recovered packet beyond the trigger itself; all
    /// signals referencing a decoded packet are consumed.
    pub fn chain_decode(&mut self, trigger: PacketRef) -> Vec<PacketRef> {
        let mut decoded = Vec::new();
        let mut known = vec![trigger];
        let mut work = vec![trigger];
        if trigger == PacketRef::Pu(self.current_pu) {
            self.pu_decoded = true;
        }
        while let Some(x) = work.pop() {
            let mut remaining = Vec::with_capacity(self.signals.len());
            for s in self.signals.drain(..) {
                let su = PacketRef::Su(s.su);
                let pu = PacketRef::Pu(s.pu);
                if su != x && pu != x {
                    remaining.push(s);
                    continue;
                }
                let (other, unlocks) = if x == pu {
                    (su, matches!(s.kind, SignalKind::PUnlocksS | SignalKind::Mutual))
                } else {
                    (pu, matches!(s.kind, SignalKind::SUnlocksP | SignalKind::Mutual))
                };
                if unlocks && !known.contains(&other) {
                    known.push(other);
                    decoded.push(other);
                    if other == PacketRef::Pu(self.current_pu) {
                        self.pu_decoded = true;
                    }
                    work.push(other);
                }
            }
            self.signals = remaining;
        }
        self.reelect();
        decoded.sort();
        decoded
    }

    /// Close the current ARQ window and start the next one.
    ///
    /// If the expiring primary packet was never decoded and nothing in the
    /// graph can recover it (no region-{5}/{6} signal references it), the
    /// packets buffered against it are unreachable: their signals are dropped
    /// and any secondary packet left without signals is returned as orphaned.
    pub fn end_window(&mut self, drop_all: bool) -> Vec<u32> {
        let expiring = self.current_pu;
        let mut dropped_su: Vec<u32> = Vec::new();
        if drop_all {
            dropped_su.extend(self.signals.iter().map(|s| s.su));
            self.signals.clear();
        } else if !self.pu_decoded {
            let recoverable = self
                .signals
                .iter()
                .any(|s| s.pu == expiring && matches!(s.kind, SignalKind::SUnlocksP | SignalKind::Mutual));
            if !recoverable {
                let mut keep = Vec::with_capacity(self.signals.len());
                for s in self.signals.drain(..) {
                    if s.pu == expiring {
                        dropped_su.push(s.su);
                    } else {
                        keep.push(s);
                    }
                }
                self.signals = keep;
            }
        }
        self.current_pu = self.next_pu;
        self.next_pu += 1;
        self.pu_decoded = false;
        self.reelect();
        let mut orphans: Vec<u32> = dropped_su
            .into_iter()
            .filter(|&su| !self.contains_su(su))
            .collect();
        orphans.sort_unstable();
        orphans.dedup();
        orphans
    }
}

/// The chain-decoding packet-selection rule.
///
/// Retransmit the root when the primary packet is known (interference-free
/// slot) or when the root is not yet attached to the current primary packet;
/// otherwise (root already attached, or no root) send a fresh packet.
pub fn cd_protocol_select(graph: &CdGraph, _state: CdState) -> Selection {
    match graph.root() {
        None => Selection::FreshPacket,
        Some(root) => {
            if graph.pu_decoded() {
                Selection::RetransmitRoot(root)
            } else if graph.root_connected_to_current() {
                Selection::FreshPacket
            } else {
                Selection::RetransmitRoot(root)
            }
        }
    }
}

//! Slot-level simulation of the actual protocol: primary ARQ, secondary
//! access and packet selection, buffering with chain decoding, finite buffer
//! and ARQ deadline, and the five comparison schemes.

mod engine;
mod graph;
mod run;

pub use engine::{Engine, SlotObservation, WindowClose};
pub use graph::{cd_protocol_select, CdGraph, PacketRef, Selection, SignalKind};
pub use run::{
    delay_cdf, run_scripted, run_simulation, ScriptedSlot, SimMetrics, SimOutput, SlotRecord,
};

use crate::channel::LinkStats;
use crate::learner::StepSchedule;
use crate::{Error, Result};

/// The five comparison schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Optimal chain-decoding access policy.
    Opcd,
    /// Backward interference cancellation: no secondary retransmissions,
    /// recovery only within the current ARQ window.
    Bic,
    /// Chain decoding with a state-independent coin access policy.
    Nacd,
    /// ARQ-oblivious per-slot joint decoding, nothing buffered.
    Ao,
    /// Non-causal primary-packet knowledge: every transmitted slot is
    /// interference-free.
    Genie,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Opcd => "OPCD",
            Scheme::Bic => "BIC",
            Scheme::Nacd => "NACD",
            Scheme::Ao => "AO",
            Scheme::Genie => "GENIE",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "OPCD" => Ok(Scheme::Opcd),
            "BIC" => Ok(Scheme::Bic),
            "NACD" => Ok(Scheme::Nacd),
            "AO" => Ok(Scheme::Ao),
            "GENIE" => Ok(Scheme::Genie),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }

    pub fn all() -> [Scheme; 5] {
        [Scheme::Opcd, Scheme::Bic, Scheme::Nacd, Scheme::Ao, Scheme::Genie]
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Online-learning configuration for a simulation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerConfig {
    pub schedule: StepSchedule,
    pub nu0: f64,
    pub rate0: f64,
    /// Minimum primary throughput the learner defends, bits/s/Hz.
    pub pu_min_throughput: f64,
}

/// Everything that determines one simulation run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub stats: LinkStats,
    pub nabla_th: f64,
    pub scheme: Scheme,
    /// Receiver buffer size in stored signals; `None` = unbounded.
    pub b_max: Option<u32>,
    /// Primary ARQ deadline in transmissions per packet; `None` = unbounded.
    pub t_arq: Option<u32>,
    pub horizon: u64,
    pub seed: u64,
    pub learner: Option<LearnerConfig>,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.stats.validate()?;
        if !(self.nabla_th > 0.0) {
            return Err(Error::Config(format!(
                "nabla_th must be positive, got {}",
                self.nabla_th
            )));
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.t_arq == Some(0) {
            return Err(Error::Config("t_arq must be at least 1".into()));
        }
        if self.learner.is_some() && self.scheme != Scheme::Opcd {
            return Err(Error::Config(
                "online learning drives the chain-decoding access policy; use scheme OPCD".into(),
            ));
        }
        Ok(())
    }
}

//! Chain-decoding spectrum sharing toolkit.
//!
//! A secondary transmitter/receiver pair shares spectrum with a primary pair
//! that runs Type-I HARQ. The secondary receiver buffers corrupted signals and
//! recovers them later by successive interference cancellation once the
//! blocking packet becomes known ("chain decoding"). This crate provides:
//!
//! - [`channel`]: block-fading SNR model, the seven-way decoding-outcome
//!   classification at the secondary receiver, and the outcome probabilities
//!   (adaptive quadrature over the fading distributions).
//! - [`mdp`]: the countable-state Markov decision process driven by those
//!   probabilities — transition kernel, virtual rewards, exact stationary
//!   evaluation of arbitrary stationary access policies, and a brute-force
//!   Pareto oracle over deterministic policies.
//! - [`policy`]: closed-form optimal access policies under a primary-user
//!   throughput-degradation constraint, their performance, and the per-state
//!   access-efficiency formulas.
//! - [`learner`]: stochastic-gradient online adaptation of the access level
//!   and the secondary rate from ARQ feedback and channel measurements.
//! - [`sim`]: a slot-level protocol simulator (primary ARQ, secondary access,
//!   buffering, chain decoding, finite buffer and ARQ deadline) for five
//!   comparison schemes.
//! - [`geometry`] and [`experiments`]: scenario construction from node
//!   geometry and reproducible experiment sweeps with CSV output.

pub mod channel;
pub mod experiments;
pub mod geometry;
pub mod learner;
pub mod mdp;
pub mod policy;
pub mod sim;

pub(crate) mod quad;

pub use channel::{
    capacity, classify_outcome, compute_profile, interference_free_success, sample_snr,
    DecodingProfile, LinkStats, Outcome, Rayleigh, SnrDistribution,
};
pub use geometry::{geometry_to_stats, optimal_rate, Geometry};
pub use learner::{policy_from_nu, rate_fixed_point, sgd_update, LearnerState, StepSchedule};
pub use mdp::{
    evaluate_policy, pareto_oracle, stationary_distribution, transition, virtual_reward,
    AccessPolicy, CdState, ParetoVertex, PolicyPerformance, TransitionRow,
};
pub use policy::{
    access_efficiency, closed_form_performance, constants, genie_aided, optimal_policy,
    pareto_first_segment, ModeMix, ProfileConstants,
};
pub use sim::{run_simulation, Scenario, Scheme, SimMetrics, SimOutput, SlotRecord};

/// Errors surfaced by the analytical core and the simulator.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument is outside the operation's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Numerical integration could not reach the requested accuracy.
    #[error("quadrature failed: requested tolerance {requested:e}, achieved {achieved:e}")]
    Quadrature { requested: f64, achieved: f64 },

    /// The truncated chain could not be solved (or never satisfied the
    /// truncation criterion while growing).
    #[error("stationary solve failed: {0}")]
    NonErgodic(String),

    /// A request would enumerate or allocate an unreasonably large space.
    #[error("refusing oversized request: {0}")]
    TooLarge(String),

    /// Invalid run configuration.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A caller violated an operation's input contract.
    #[error("contract violation: {0}")]
    Contract(String),
}

pub type Result<T> = std::result::Result<T, Error>;

//! Decentralized power and sub-band allocation in a parallel Gaussian
//! interference channel, learned by trial and error from one-bit feedback.
//!
//! - [`channel`]: instances, power grid and SINR.
//! - [`game`]: utilities and exhaustive equilibrium oracles.
//! - [`te`]: the per-player trial-and-error learner.
//! - [`dtmc`]: the reduced Markov chain, its bounds and occupancy.
//! - [`sim`]: Monte-Carlo trials, sweeps and curve protocols.

pub mod channel;
pub mod dtmc;
pub mod error;
pub mod game;
pub mod sim;
pub mod te;

pub use channel::{power_grid, Action, ActionProfile, ChannelKind, InstanceConfig, InstanceParams, NetworkInstance};
pub use dtmc::{bounds_t, occupancy, q_s, transition_probs, DtmcModel, DtmcParams, Target};
pub use error::{Error, Result};
pub use game::{
    check_interdependence, find_efficient_se, find_nash, find_satisfaction_equilibria, satisfaction_set,
    solve_global, utility, EquilibriumReport, GameOutcome, GlobalOptimum, Oracle,
};
pub use sim::{estimate_occupancy, curves_protocol, run_trial, sweep, ExperimentConfig, TrialOptions, TrialRecord};
pub use te::{f_fn, g_fn, Mood, TeParams, TeState};

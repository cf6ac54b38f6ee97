//! Simulator for cell-free integrated sensing and communication with
//! network-assisted full duplex: half-duplex RRUs split into downlink
//! transmitters and uplink receivers, while the downlink RRUs also
//! illuminate a target for the uplink RRUs.
//!
//! The crate computes ergodic DL/UL rates under imperfect channel knowledge
//! alongside Cramér-Rao bounds of the target's range and angles. NSGA-II or
//! a deep Q-learning allocator searches the trade-off between the two.
//!
//! ```
//! use nafd_isac::config::RunConfig;
//! use nafd_isac::experiments::Scenario;
//!
//! let cfg = RunConfig::from_toml_str("trials = 10\n[scenario]\nn_antennas = 4\n", &[])?;
//! let sc = Scenario::new(cfg.layout()?, cfg.scenario_params())?;
//! let epa = sc.evaluate(&sc.epa_allocation())?;
//! assert!(epa.f1 > 0.0 && epa.f2 > 0.0);
//! # Ok::<(), nafd_isac::Error>(())
//! ```
//!
//! Module map:
//!
//! - [`geometry`]: deployments, arrays, bistatic paths
//! - [`channel`], [`beamforming`]: realizations, estimation errors, beams
//! - [`comm`]: SINRs and Monte Carlo rates
//! - [`sensing`]: echo model, closed-form bounds, numeric FIM check
//! - [`moo`], [`dqn`]: the two allocators
//! - [`experiments`]: experiment drivers
//! - [`config`], [`output`]: run configuration and artifacts

pub mod beamforming;
pub mod channel;
pub mod comm;
pub mod config;
pub mod dqn;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod moo;
pub mod output;
pub mod sensing;
pub mod units;

pub use error::{Error, Result};

// The guide's chapters and the README compile and run as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/channels.md")]
    mod channels {}
    #[doc = include_str!("../../../book/src/rates.md")]
    mod rates {}
    #[doc = include_str!("../../../book/src/sensing.md")]
    mod sensing {}
    #[doc = include_str!("../../../book/src/allocation.md")]
    mod allocation {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}

//! Stochastic interference management and resource allocation for underlay
//! OFDMA cognitive radio networks with noisy cross-link estimates.
//!
//! The crate covers the full chain from channel statistics to ergodic rate:
//!
//! - [`channel_model`]: channel draws and posterior cross-link statistics
//! - [`interference_stats`]: moment-matched chi-square tail of the aggregate
//!   interference and the deterministic interference budget
//! - [`sinr_model`]: closed-form cdf of the normalized SINR and Monte-Carlo
//!   ergodic rate
//! - [`resource_allocator`]: dual-decomposition power and subcarrier
//!   allocation
//! - [`simulator`]: scenario runs, parameter sweeps and the collision oracle
// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel_model;
pub mod config;
pub mod error;
pub mod interference_stats;
pub mod resource_allocator;
pub mod rng;
pub mod simulator;
pub mod sinr_model;
pub mod special;
pub mod stats;
pub mod validation;

pub use channel_model::{CrossLinkEnsemble, EstimationModel, SecondaryChannels};
pub use config::{SolverConfig, SystemConfig};
pub use error::{Error, Result};
pub use interference_stats::{ChiSquareApprox, NspGaussian, NspMode, WeightLaw};
pub use resource_allocator::{Allocation, DualState, ProblemInstance, Solution};
pub use simulator::{ScenarioResult, SweepResult, SweepSpec, SweepVariable};
pub use sinr_model::{NormalizedSinr, SinrParams};

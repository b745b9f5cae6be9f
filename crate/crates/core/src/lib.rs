//! Desk-scale laboratory for grounded action transformation in multi-agent
//! traffic signal control.
//!
//! The crate is `no_std` (with `alloc`) and contains every algorithmic piece:
//!
//! - [`nn`]: dense feed-forward networks with exact backpropagation and Adam.
//! - [`sim`]: a deterministic grid traffic simulator with pluggable vehicle
//!   dynamics. One engine is instantiated twice to play the simulated and the
//!   "real" environment.
//! - [`agents`]: per-intersection observation/reward wiring and independent
//!   DQN learners.
//! - [`gat`]: local joint layouts, forward/inverse models, grounding
//!   schedulers and the grounded action pipeline.
//! - [`harness`]: the training loop across pretraining and grounding epochs,
//!   dataset routing, gap computation and best-epoch selection.
//!
//! File formats, archives and the command line live in the `groundlab` crate.
#![cfg_attr(not(feature = "std"), no_std)]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

pub mod agents;
pub mod error;
pub mod gat;
pub mod harness;
pub mod nn;
pub mod rng;
pub mod sim;

pub use error::{Error, Result};

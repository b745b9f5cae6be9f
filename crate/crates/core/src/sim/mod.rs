//! Deterministic discrete-time grid traffic simulator.
//!
//! Each intersection has four approaches (N, E, S, W); every link carries
//! three lanes dedicated to the left, through and right movement at its
//! downstream intersection. Vehicles follow a gap-safe car-following rule
//! parameterized by [`VehicleDynamics`], so the same engine can play the
//! simulated and the "real" environment with different dynamics.

mod dynamics;
mod engine;
mod flow;
mod grid;
mod metrics;
mod phase;

pub use dynamics::VehicleDynamics;
pub use engine::{SimParams, Simulation, TraceRow, Vehicle, VehicleView};
pub use flow::{FlowEntry, FlowSpec, RouteSpec};
pub use grid::{GridSpec, Intersection, Link, Network, Side, Turn, LANES_PER_LINK};
pub use metrics::{MetricsReport, OBS_LEN, WAITING_SPEED};
pub use phase::{SignalPhase, PHASE_COUNT};

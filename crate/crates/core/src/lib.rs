//! Simulation and verification workbench for the graphical representations
//! of the critical 2D Ising model in a ghost field.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`] builds ghost-augmented lattice graphs, boundary conditions
//!   and the rectangle frames used by the crossing events.
//! * [`config`] holds bit-packed bond configurations and spin configurations.
//! * [`oracle`] computes every measure exactly by enumeration on small graphs.
//! * [`samplers`] draws spins, random-cluster configurations, uniform even
//!   subgraphs and sourceless current traces on large graphs.
//! * [`events`] detects crossings, dual circuits and the frame events.
//! * [`experiments`] runs the desk-scale numerical studies.

pub mod config;
pub mod dsu;
pub mod error;
pub mod events;
pub mod experiments;
pub mod lattice;
pub mod oracle;
pub mod samplers;
pub mod stats;

pub use config::{BondConfig, SpinConfig};
pub use error::{Error, Result};
pub use lattice::{BoundaryCondition, GhostGraph, Rect, RectFrame, BETA_C};

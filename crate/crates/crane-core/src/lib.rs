//! Overhead crane simulation and discrete-time control toolkit.

pub mod error;
pub mod ident;
pub mod model;
pub mod params;
pub mod plant;
pub mod swing;
pub mod mpc;
pub mod qp;
pub mod scenario;
pub mod sfb;
pub mod traj;

pub use error::{CraneError, Result};
pub use params::{AxisKind, AxisParams, CraneParameters};
pub use plant::{CraneMode, CraneState, LoadPosition, PlantConfig, PlantInput};

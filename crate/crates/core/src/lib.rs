//! Minimum energy demand of ethane steam cracking and scenario-based
//! scheduling of an ethylene-plant microgrid.

pub mod energy_opt;
pub mod error;
pub mod kinetics;
pub mod ode;
pub mod reactor;
pub mod scenario;
pub mod sched_model;
pub mod solver_io;

pub use error::{Error, Result};

//! Risk-aware task offloading for a UAV-assisted edge network.
//!
//! A discrete-event simulator of IoT devices, battery-powered UAVs and MEC
//! servers, five offloading policies (round robin, QHEF, and three deep
//! Q-learning variants), and the experiment pipeline that trains and
//! compares them.

pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod neural;
pub mod policies;
pub mod risk;
pub mod rng;
pub mod simcore;

pub use error::{Error, Result};

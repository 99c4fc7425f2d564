//! Pulse-level simulation of shortcut-to-adiabaticity holonomic gates on a
//! superconducting qutrit.

pub mod bench;
pub mod config;
pub mod error;
pub mod hamiltonian;
pub mod holonomy;
pub mod linalg;
pub mod propagator;
pub mod schedule;
pub mod tomography;

pub use error::{Error, Result};

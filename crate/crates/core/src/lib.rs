//! Lattice-walk laboratory for gyration-radius asymptotics of long-range
//! random walk, self-avoiding walk and oriented percolation.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod lace;
pub mod lattice;
pub mod numerics;
pub mod sampling;
pub mod site;
pub mod stepdist;
pub mod theory;
pub mod walkers;

pub use error::{Error, Result};

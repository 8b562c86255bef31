//! Simulation and analysis of j-tuple-connected components in random
//! k-uniform hypergraphs `H^k(n,p)`.

pub mod branching;
pub mod combinat;
pub mod error;
pub mod experiments;
pub mod exploration;
pub mod hypergraph;
pub mod model;
pub mod rng;

pub use error::{Error, Result};

//! Position-space renormalization of scalar Feynman graphs.

pub mod birkhoff;
pub mod graph;
pub mod hadamard;
pub mod hopf;
pub mod pfalg;

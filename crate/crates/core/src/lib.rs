//! Simulation of entangled-ballot anonymous voting protocols.
//!
//! Votes are stored as phases in a multi-site bosonic state. The crate
//! provides a dense Fock-space engine ([`fock`]), constructors for the
//! ballot states and tally bases ([`states`]), the voting protocols
//! ([`protocols`]), adversary strategies and their detection ([`attacks`]),
//! the classical dining-cryptographers baseline ([`dcnet`]) and a JSON
//! scenario runner ([`scenario`]).

pub mod attacks;
pub mod dcnet;
pub mod error;
pub mod fock;
pub mod protocols;
pub mod scenario;
pub mod states;
pub mod stats;

pub use error::{Error, Result};

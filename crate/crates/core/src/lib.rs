//! Algebraic security analysis of random linear network coding.
//!
//! A multicast network mixes K source symbols through relays that forward
//! uniform random linear combinations over GF(2^m). Every relay is honest
//! but curious: it follows the protocol and still tries to decode whatever
//! passes through it. This crate models the network and the random code
//! exactly, computes each relay's security level Delta_S (the normalized
//! number of symbols it would still have to guess), and ships a seeded
//! Monte Carlo harness that measures the statistical claims behind the
//! criterion, including the secure max-flow n-1 of complete DAGs.
//!
//! Modules:
//! - [`galois`]: exact GF(2^m) arithmetic, the substrate for everything else
//! - [`netgraph`]: acyclic multigraph model, line graph, min-cut, generators
//! - [`rlnc`]: code sampling and transfer-matrix computation
//! - [`seclin`]: rank/RREF over GF(2^m), Delta_S, network reports
//! - [`experiments`]: reproducible estimation of the probabilistic claims
//! - [`fixtures`]: pinned example networks and codes

pub mod experiments;
pub mod fixtures;
pub mod galois;
pub mod netgraph;
pub mod ratio;
pub mod rlnc;
pub mod seclin;

pub use galois::{FieldContext, FieldElement};
pub use netgraph::{GraphFile, Network};
pub use ratio::Ratio;
pub use rlnc::{CodeInstance, Matrix};
pub use seclin::{NodeSecurity, SecurityReport};

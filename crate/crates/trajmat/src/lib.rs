//! Trajectory-segment matrix descriptors and matrix-state value learning.
//!
//! A rollout segment is lifted step by step into a fixed vector (midpoint,
//! displacement, action-conditioned blocks, reward, constant) and summarized
//! by the positive semidefinite sum of outer products of those lifted steps.
//! This crate implements that descriptor and the machinery built on it:
//!
//! - [`lift`]: the step lift, channel layout, adapters, gauge transforms
//! - [`descriptor`]: descriptor algebra (compose, glue, blocks, congruence,
//!   linear functionals, distances)
//! - [`env`]: small deterministic environments plus exhaustive trajectory
//!   enumeration and ground-MDP value iteration
//! - [`library`]: reusable segment storage serving action-conditioned
//!   candidate futures
//! - [`obstruction`]: exact reachability-based obstruction scoring and the
//!   learned logistic proxy used inside planning
//! - [`agent`]: matrix-state TD learning with obstruction-filtered lookahead,
//!   source pretraining of the matrix-value branch, and transfer
//! - [`diagnostics`]: descriptor identity checks and experiment harnesses

pub mod agent;
pub mod descriptor;
pub mod diagnostics;
pub mod env;
pub mod error;
pub mod kv;
pub mod library;
pub mod lift;
pub mod linalg;
pub mod obstruction;
pub mod segment;
pub mod value;

pub use error::{Error, Result};

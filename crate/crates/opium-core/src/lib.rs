//! Streaming least-squares readouts for random-feature networks.
//!
//! The crate provides a family of online solvers that maintain the weights
//! of a linear readout as samples arrive one at a time: an exact
//! column-recursive pseudoinverse, a regularised O(M^2) variant, a
//! diagonal O(M) approximation, and a forgetting variant for drifting
//! targets. Around them sit a random hidden layer, a batch pseudoinverse
//! oracle for verification, state snapshots, and an experiment harness
//! with deterministic trace output.

pub mod elm;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod pinv;
pub mod snapshot;
pub mod solvers;
pub mod verify;

pub use error::{Error, Result};
pub use matrix::Matrix;

//! Encoder–approximator–decoder neural operators for the coefficient-to-solution
//! map of `-div(a grad u) = f` on polygons.
//!
//! The approximator is an explicitly assembled ReLU network that unrolls a
//! Richardson iteration in a reduced basis built by a weak greedy algorithm.
//! Every layer of the construction is inspectable: network depth and size are
//! counted exactly, and each stage carries a tolerance certificate that the
//! verification routines check against independent reference solves.

pub mod cli;
pub mod coeff;
pub mod encoder;
pub mod error;
pub mod fem;
pub mod locate;
pub mod mesh;
pub mod pipeline;
pub mod reduced_basis;
pub mod relu_net;
pub mod table;
pub mod richardson;

pub use error::{Error, Result};

/// A point in the plane.
pub type Point = [f64; 2];

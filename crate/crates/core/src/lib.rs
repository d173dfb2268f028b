//! Simulation of mechanical systems on Riemannian homogeneous spaces, written in
//! left-trivialized Lie-algebra coordinates, with nonholonomic and virtual
//! nonholonomic constraints.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod connections;
pub mod dynamics;
pub mod error;
pub mod homogeneous;
pub mod lie;
pub mod scenarios;
pub mod virtual_constraints;

pub use error::{Error, Result};

//! Adaptive log-Euclidean metrics on the manifold of symmetric positive
//! definite matrices.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod differentials;
pub mod error;
pub mod geometry;
pub mod gradcheck;
pub mod spd;
pub mod spdnet;

pub use error::{Error, Result};

//! Misspecification-aware amortized Bayesian inference.
//!
//! A permutation-invariant summary network and a conditional affine-coupling
//! flow are trained jointly on simulations, with an MMD penalty that pulls the
//! summary distribution toward a unit Gaussian. At inference time the same
//! MMD, measured between observed and validation summaries, flags
//! simulation gaps through a Monte Carlo hypothesis test.
//!
//! The crate is `no_std` (it needs `alloc`); file formats, model cards and the
//! command-line tool live in the `mspec` crate.

#![no_std]
// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![deny(unsafe_op_in_unsafe_fn)]

extern crate alloc;

pub mod analytics;
pub mod benchmarks;
pub mod data;
pub mod detector;
pub mod error;
pub mod math;
pub mod mmd;
pub mod ndcompute;
pub mod networks;
pub mod rng;
pub mod training;

pub use error::{Error, Result};

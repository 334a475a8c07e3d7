// SPDX-License-Identifier: Apache-2.0

//! Finite-temperature real-time renormalization group for the ohmic
//! spin-boson model close to `α = 1/2`.

// `!(x > 0.0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod cli;
pub mod config;
pub mod error;
pub mod flow;
pub mod model;
pub mod ode;
pub mod phase;
pub mod spectral;
pub mod specfun;
pub mod time_domain;

pub use error::{Error, Result};
pub use model::ModelParams;

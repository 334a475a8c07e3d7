// SPDX-License-Identifier: Apache-2.0

use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value is unusable (bad key, out-of-range knob, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// A special function was evaluated at one of its poles.
    #[error("{function} evaluated at its pole z = {z}")]
    SpecialFunctionPole { function: &'static str, z: Complex64 },

    /// The flow integrator could not make progress; `at` is where it stalled.
    #[error("flow singularity near E = {at} ({reason})")]
    FlowSingularity { at: Complex64, reason: String },

    /// Denominator of a propagator below the underflow guard.
    #[error("propagator pole: |E + iΓ/n| = {modulus:.3e} at E = {at}")]
    PropagatorPole { at: Complex64, modulus: f64 },

    #[error("fixed-point iteration did not converge after {iterations} iterations (last change {last_change:.3e})")]
    FixedPoint { iterations: usize, last_change: f64 },

    /// Newton search went somewhere it should not.
    #[error("root search left the domain at z = {0}")]
    RootDomain(Complex64),

    #[error("residual map failed at {failed} of {total} grid points")]
    Map { failed: usize, total: usize },

    #[error("Laplace window too small: tail estimate {tail:.3e}")]
    Window { tail: f64 },

    #[error("trace too coarse: {0}")]
    Resolution(String),

    #[error("classification error: {0}")]
    Classification(String),

    /// Analytic transition temperature would be negative: no partially
    /// coherent phase at this coupling.
    #[error("alpha = {alpha} lies below the critical coupling (T_c1 = {value:.4e} < 0)")]
    BelowCriticalCoupling { alpha: f64, value: f64 },

    #[error("no transition in bracket [{lo}, {hi}]")]
    NoTransition { lo: f64, hi: f64 },

    /// A feature finder failed while evaluating at temperature `temperature`.
    #[error("at T = {temperature}: {source}")]
    AtTemperature {
        temperature: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at_temperature(self, temperature: f64) -> Self {
        Error::AtTemperature {
            temperature,
            source: Box::new(self),
        }
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Complex digamma, trigamma and E₁, plus the Matsubara sum that the
//! trigamma term of the flow replaces.
//!
//! cargo run --example special_functions

use num_complex::Complex64;
use rtrg_dynamics::specfun::{digamma, exp_integral_e1, matsubara_sum_sq, trigamma};
use std::f64::consts::PI;

fn main() -> rtrg_dynamics::Result<()> {
    for z in [Complex64::new(0.5, 0.0), Complex64::new(1.0, 2.0), Complex64::new(-2.5, 0.3)] {
        println!("z = {z:>12}  psi = {:.12}  psi' = {:.12}", digamma(z)?, trigamma(z)?);
    }
    println!("E1(1) = {:.12}", exp_integral_e1(Complex64::new(1.0, 0.0))?);

    // Π = i/(E + iΓ) summed over Matsubara shifts against the closed form.
    let (e, rate, t) = (Complex64::new(0.3, 0.2), Complex64::new(0.8, 0.1), 0.1);
    let closed = trigamma(0.5 + (-Complex64::i() * e + rate) / (2.0 * PI * t))? / (2.0 * PI * t);
    for m in [10, 100, 1000, 10_000] {
        let s = matsubara_sum_sq(e, rate, 1, t, m)?;
        println!("M = {m:>6}  sum = {s:.8}  |sum - closed| = {:.2e}", (s - closed).norm());
    }
    Ok(())
}

// SPDX-License-Identifier: Apache-2.0

//! Complex digamma, trigamma and exponential-integral functions.
//!
//! The gamma-family functions use the upward recurrence `ψ(z) = ψ(z+1) - 1/z` until `|z| ≥ 20`
//! (and `z` is away from the negative real axis), followed by the
//! Bernoulli asymptotic series. Eight terms leave a truncation error well
//! below `1e-13` at `|z| = 20`. Far out along the negative real axis the
//! reflection formula replaces the recurrence.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SHIFT_RADIUS: f64 = 20.0;

/// `B_{2k}` for `k = 1..=8`.
const BERNOULLI: [f64; 8] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
];

fn check_pole(z: Complex64, function: &'static str) -> Result<()> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain(format!("{function} of non-finite argument {z}")));
    }
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        return Err(Error::SpecialFunctionPole { function, z });
    }
    Ok(())
}

fn needs_shift(z: Complex64) -> bool {
    z.norm() < SHIFT_RADIUS || (z.re < 0.0 && z.im.abs() < -z.re)
}

fn reflect(z: Complex64) -> bool {
    z.re < -SHIFT_RADIUS && z.im.abs() < -z.re
}

/// `(π cot πz, π² / sin² πz)`, with the exponentially small parts dropped
/// once `|Im z|` is large.
fn reflection_terms(z: Complex64) -> (Complex64, Complex64) {
    if z.im.abs() > 20.0 {
        let cot = Complex64::new(0.0, -z.im.signum());
        return (PI * cot, Complex64::new(0.0, 0.0));
    }
    // the period is 1, so reduce the real part first
    let w = Complex64::new(z.re - z.re.round(), z.im) * PI;
    let s = w.sin();
    (PI * w.cos() / s, Complex64::new(PI * PI, 0.0) / (s * s))
}

/// Digamma function `ψ(z) = Γ'(z)/Γ(z)`.
pub fn digamma(z: Complex64) -> Result<Complex64> {
    check_pole(z, "digamma")?;
    if reflect(z) {
        return Ok(digamma(1.0 - z)? - reflection_terms(z).0);
    }
    let mut w = z;
    let mut acc = Complex64::new(0.0, 0.0);
    while needs_shift(w) {
        acc -= w.inv();
        w += 1.0;
    }
    let inv = w.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut pow = inv2;
    for (k, b) in BERNOULLI.iter().enumerate() {
        series += pow * (b / (2.0 * (k + 1) as f64));
        pow *= inv2;
    }
    Ok(acc + w.ln() - 0.5 * inv - series)
}

/// Trigamma function `ψ'(z)`.
pub fn trigamma(z: Complex64) -> Result<Complex64> {
    check_pole(z, "trigamma")?;
    if reflect(z) {
        return Ok(reflection_terms(z).1 - trigamma(1.0 - z)?);
    }
    let mut w = z;
    let mut acc = Complex64::new(0.0, 0.0);
    while needs_shift(w) {
        let inv = w.inv();
        acc += inv * inv;
        w += 1.0;
    }
    let inv = w.inv();
    let inv2 = inv * inv;
    let mut series = Complex64::new(0.0, 0.0);
    let mut pow = inv2 * inv;
    for b in BERNOULLI.iter() {
        series += pow * *b;
        pow *= inv2;
    }
    Ok(acc + inv + 0.5 * inv2 + series)
}

/// Exponential integral `E₁(z) = ∫_z^∞ e^{-s}/s ds` off the negative real
/// axis: power series for `|z| < 4`, continued fraction beyond.
pub fn exp_integral_e1(z: Complex64) -> Result<Complex64> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Domain(format!("E1 of non-finite argument {z}")));
    }
    if z.im == 0.0 && z.re <= 0.0 {
        return Err(Error::Domain(format!("E1 is cut along the negative real axis, got {z}")));
    }
    if z.norm() < 4.0 {
        let mut sum = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for k in 1..200 {
            term *= -z / k as f64;
            let add = term / k as f64;
            sum += add;
            if add.norm() < 1e-17 * sum.norm().max(1e-300) {
                break;
            }
        }
        return Ok(-EULER_GAMMA - z.ln() - sum);
    }
    // modified Lentz on 1/(z+1- 1/(z+3- 4/(z+5- ...)))
    let tiny = 1e-300;
    let mut b = z + 1.0;
    let mut c = Complex64::new(1.0 / tiny, 0.0);
    let mut d = b.inv();
    let mut h = d;
    for k in 1..10_000 {
        let a = -((k * k) as f64);
        b += 2.0;
        d = (a * d + b).inv();
        c = b + a / c;
        if c.norm() < tiny {
            c = Complex64::new(tiny, 0.0);
        }
        let delta = c * d;
        h *= delta;
        if (delta - 1.0).norm() < 1e-16 {
            return Ok(h * (-z).exp());
        }
    }
    Err(Error::Domain(format!("E1 continued fraction did not converge at {z}")))
}

/// Truncated Matsubara sum `2πT Σ_{m<M} [Π(E + iω_m)]²` with the propagator
/// `Π(E) = i / (E + i·rate/n)` built from a frozen rate.
///
/// Cross-validation oracle for the trigamma form of the flow equations;
/// converges to `ψ'(1/2 + (-iE + rate/n)/(2πT)) / (2πT)` as `M → ∞`.
pub fn matsubara_sum_sq(
    energy: Complex64,
    rate: Complex64,
    n: u8,
    temperature: f64,
    terms: usize,
) -> Result<Complex64> {
    if !(temperature > 0.0) {
        return Err(Error::Domain(format!(
            "Matsubara sum needs T > 0, got {temperature}"
        )));
    }
    if terms == 0 {
        return Err(Error::Domain("Matsubara sum needs at least one term".into()));
    }
    if n != 1 && n != 2 {
        return Err(Error::Domain(format!("propagator index must be 1 or 2, got {n}")));
    }
    let i = Complex64::i();
    let shifted = energy + i * rate / f64::from(n);
    let mut sum = Complex64::new(0.0, 0.0);
    for m in 0..terms {
        let omega = PI * temperature * (2 * m + 1) as f64;
        let denom = shifted + i * omega;
        if denom.norm() == 0.0 {
            return Err(Error::PropagatorPole {
                at: energy + i * omega,
                modulus: 0.0,
            });
        }
        let prop = i / denom;
        sum += prop * prop;
    }
    Ok(2.0 * PI * temperature * sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn classical_values() {
        assert!(rel(digamma(c(1.0, 0.0)).unwrap(), c(-EULER_GAMMA, 0.0)) < 1e-13);
        let half = -EULER_GAMMA - 2.0 * 2f64.ln();
        assert!(rel(digamma(c(0.5, 0.0)).unwrap(), c(half, 0.0)) < 1e-13);
        assert!((half + 1.963_510_026_0).abs() < 1e-9);
        assert!(rel(trigamma(c(1.0, 0.0)).unwrap(), c(PI * PI / 6.0, 0.0)) < 1e-13);
        assert!(rel(trigamma(c(0.5, 0.0)).unwrap(), c(PI * PI / 2.0, 0.0)) < 1e-13);
        assert!(rel(trigamma(c(1.5, 0.0)).unwrap(), c(PI * PI / 2.0 - 4.0, 0.0)) < 1e-13);
    }

    #[test]
    fn recurrence_identity() {
        let z = c(0.3, 0.7);
        let lhs = digamma(z + 1.0).unwrap() - digamma(z).unwrap();
        assert!(rel(lhs, z.inv()) < 1e-12);
        let lhs = trigamma(z).unwrap() - trigamma(z + 1.0).unwrap();
        assert!(rel(lhs, z.inv() * z.inv()) < 1e-12);
    }

    #[test]
    fn poles_are_rejected() {
        for re in [0.0, -1.0, -7.0] {
            assert!(matches!(
                digamma(c(re, 0.0)),
                Err(Error::SpecialFunctionPole { .. })
            ));
            assert!(trigamma(c(re, 0.0)).is_err());
        }
        assert!(digamma(c(-0.5, 0.0)).is_ok());
    }

    #[test]
    fn trigamma_matches_partial_sum_oracle() {
        let z = c(1.2, -0.4);
        let m = 100_000usize;
        let mut sum = Complex64::new(0.0, 0.0);
        for k in 0..m {
            let w = z + k as f64;
            sum += (w * w).inv();
        }
        let tail = z + m as f64;
        sum += tail.inv() + 0.5 * (tail * tail).inv();
        assert!(rel(trigamma(z).unwrap(), sum) < 1e-12);
    }

    #[test]
    fn trigamma_is_derivative_of_digamma() {
        let h = 1e-5;
        for z in [c(0.7, 0.2), c(3.0, -4.0), c(-2.5, 0.8), c(25.0, 1.0)] {
            let fd = (digamma(z + h).unwrap() - digamma(z - h).unwrap()) / (2.0 * h);
            assert!(rel(fd, trigamma(z).unwrap()) < 1e-6, "z = {z}");
        }
    }

    #[test]
    fn large_arguments() {
        // ψ(z) ~ ln z - 1/(2z) at |z| = 1e6
        let z = c(1e6, 3e5);
        let approx = z.ln() - 0.5 / z - 1.0 / (12.0 * z * z);
        assert!(rel(digamma(z).unwrap(), approx) < 1e-14);
        let z = c(-3e5, 8e5);
        let lhs = digamma(z + 1.0).unwrap() - digamma(z).unwrap();
        assert!((lhs - z.inv()).norm() < 1e-12 * z.inv().norm().max(1e-6) + 1e-15);
    }

    #[test]
    fn single_term_matsubara_sum() {
        let t = 0.2;
        let e = c(0.3, -0.1);
        let rate = c(1.1, 0.2);
        let got = matsubara_sum_sq(e, rate, 1, t, 1).unwrap();
        let i = Complex64::i();
        let term = i / (e + i * PI * t + i * rate);
        assert!(rel(got, 2.0 * PI * t * term * term) < 1e-14);
    }

    #[test]
    fn matsubara_sum_special_value() {
        // E = 0, rate = 2πT, n = 1: argument 3/2
        let t = 0.37;
        let closed = (PI * PI / 2.0 - 4.0) / (2.0 * PI * t);
        let z = c(1.5, 0.0);
        assert!((trigamma(z).unwrap().re / (2.0 * PI * t) - closed).abs() < 1e-13);
        let s = matsubara_sum_sq(c(0.0, 0.0), c(2.0 * PI * t, 0.0), 1, t, 200_000).unwrap();
        assert!((s.re - closed).abs() < 1e-5);
    }

    #[test]
    fn reflection_branch_matches_recurrence() {
        for z in [c(-25.3, 0.4), c(-40.7, -3.0), c(-21.5, 19.0), c(-100.2, 30.0)] {
            // direct recurrence from z up to the asymptotic region
            let mut w = z;
            let mut d = Complex64::new(0.0, 0.0);
            let mut t = Complex64::new(0.0, 0.0);
            while w.re < 30.0 {
                d -= w.inv();
                t += (w * w).inv();
                w += 1.0;
            }
            let d = d + digamma(w).unwrap();
            let t = t + trigamma(w).unwrap();
            assert!(rel(digamma(z).unwrap(), d) < 1e-10, "z = {z}");
            assert!(rel(trigamma(z).unwrap(), t) < 1e-9, "z = {z}");
        }
    }

    #[test]
    fn huge_negative_argument_terminates() {
        let z = c(-3.7e40, 2.0);
        assert!(digamma(z).unwrap().is_finite());
        assert!(trigamma(z).unwrap().is_finite());
    }

    #[test]
    fn exponential_integral_reference_values() {
        let e = exp_integral_e1(c(1.0, 0.0)).unwrap();
        assert!(rel(e, c(0.219_383_934_395_520_3, 0.0)) < 1e-13);
        let e = exp_integral_e1(c(0.0, 1.0)).unwrap();
        assert!(rel(e, c(-0.337_403_922_900_968_1, -0.624_713_256_427_713_6)) < 1e-12);
        let e = exp_integral_e1(c(5.0, 0.0)).unwrap();
        assert!(rel(e, c(1.148_295_591_275_325_8e-3, 0.0)) < 1e-12);
        assert!(exp_integral_e1(c(-1.0, 0.0)).is_err());
    }

    #[test]
    fn exponential_integral_branches_agree() {
        // derivative of E1 is -e^{-z}/z, check across the series/fraction switch
        for z in [c(0.0, 3.99), c(0.0, 4.01), c(2.0, 3.5), c(0.0, 50.0), c(0.0, -7.0)] {
            let h = 1e-5;
            let fd = (exp_integral_e1(z + h).unwrap() - exp_integral_e1(z - h).unwrap()) / (2.0 * h);
            let exact = -(-z).exp() / z;
            assert!(rel(fd, exact) < 1e-6, "z = {z}");
        }
        // Si(y) - π/2 = Im E1(iy) asymptotically -cos(y)/y
        let y = 1e4;
        let e = exp_integral_e1(c(0.0, y)).unwrap();
        assert!((e.im + y.cos() / y).abs() < 1e-7);
    }

    proptest::proptest! {
        #[test]
        fn schwarz_reflection(re in -30.0f64..30.0, im in 0.01f64..30.0) {
            let z = c(re, im);
            let a = digamma(z.conj()).unwrap();
            let b = digamma(z).unwrap().conj();
            proptest::prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0));
            let a = trigamma(z.conj()).unwrap();
            let b = trigamma(z).unwrap().conj();
            proptest::prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1.0));
        }

        #[test]
        fn recurrence_everywhere(re in -20.0f64..40.0, im in 0.05f64..40.0) {
            let z = c(re, im);
            let lhs = digamma(z + 1.0).unwrap() - digamma(z).unwrap();
            proptest::prop_assert!((lhs - z.inv()).norm() <= 1e-11 * z.inv().norm().max(1.0));
        }
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Closed-form and semi-analytic approximations to leading order in `g`.
//!
//! * the digamma form of `Γ₁(E)` obtained by integrating the flow with a
//!   frozen `Γ₂`,
//! * the zero-temperature pole and branch-point rates,
//! * the self-consistent `Γ₂*` at finite temperature,
//! * the transition temperatures `T_c1`, `T_c2` and the NIBA constant.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::specfun::{digamma, trigamma, EULER_GAMMA};

/// `Γ₁(E) = T̃_K exp(-g ψ(1/2 + (-iE + Γ₂/2)/(2πT)))` with
/// `T̃_K = T_K (2πT/T_K)^{-g}`.
pub fn gamma1_closed_form(
    energy: Complex64,
    gamma2: Complex64,
    params: &ModelParams,
) -> Result<Complex64> {
    let t = params.temperature();
    if !(t > 0.0) {
        return Err(Error::Domain("closed-form rate needs T > 0".into()));
    }
    let g = params.g();
    let tk = params.kondo_scale();
    let twopi_t = 2.0 * PI * t;
    let z = 0.5 + (-Complex64::i() * energy + 0.5 * gamma2) / twopi_t;
    let psi = digamma(z)?;
    let scale = tk * (twopi_t / tk).powf(-g);
    Ok(scale * (-g * psi).exp())
}

/// Zero-temperature rates in units of `T_K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroTRates {
    /// Decay rate of the pole pair.
    pub gamma1_star: f64,
    /// Oscillation frequency of the pole pair.
    pub omega: f64,
    /// `Γ₂*`; the branch point sits at `-iΓ₂*/2`.
    pub gamma2_star: f64,
}

impl ZeroTRates {
    /// Position `Ω - iΓ₁*` of the right pole.
    pub fn pole(&self) -> Complex64 {
        Complex64::new(self.omega, -self.gamma1_star)
    }
}

/// Pole and branch-point rates at `T = 0`.
///
/// With `Γ₂ ≈ Γ₁` and the zero-temperature power law, `iz = Γ₁(z)` gives
/// `Γ₁(z)/T_K = exp((ln 2 ± iπ) g/(1+g))`; the real part is the decay rate and
/// the imaginary part the frequency.
pub fn zero_t_rates(g: f64) -> Result<ZeroTRates> {
    if !(0.0..1.0).contains(&g) {
        return Err(Error::Domain(format!(
            "zero-temperature rates need 0 <= g < 1, got {g}"
        )));
    }
    let w = (Complex64::new(2f64.ln(), PI) * (g / (1.0 + g))).exp();
    let gamma2_star = if g == 0.0 {
        1.0
    } else {
        2.0 * (PI * g / (2.0 * (PI * g).sin())).powf(1.0 / (1.0 + g))
    };
    Ok(ZeroTRates {
        gamma1_star: w.re,
        omega: w.im.abs(),
        gamma2_star,
    })
}

/// Controls for [`gamma2_star_finite_t`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSpec {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FixedPointSpec {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tolerance: 1e-10,
            max_iterations: 500,
        }
    }
}

/// Self-consistent `Γ₂* = Γ₂(z₀)`, `z₀ = -iπT - iΓ₂*/2`, from
///
/// ```text
/// Γ₂* = 2πT g ∫₀^∞ u(x) ψ'(x + u(x) - Γ₂*/(4πT)) dx,
/// u(x) = (T_K/2πT)^{1+g} exp(-g ψ(x)).
/// ```
///
/// The exponent `1+g` follows from `T̃_K/(2πT)`; it is what makes the
/// integral reduce to the zero-temperature `Γ₂*` as `T → 0`.
pub fn gamma2_star_finite_t(params: &ModelParams, fp: &FixedPointSpec) -> Result<f64> {
    let t = params.temperature();
    let g = params.g();
    if !(t > 0.0) {
        return Err(Error::Domain("finite-T Γ₂* needs T > 0".into()));
    }
    if !(g > 0.0 && g < 1.0) {
        return Err(Error::Domain(format!("finite-T Γ₂* needs 0 < g < 1, got {g}")));
    }
    let mut damping = fp.damping;
    let mut current = zero_t_rates(g)?.gamma2_star;
    let mut last_change = f64::INFINITY;
    let mut previous_step = 0.0;
    for _ in 0..fp.max_iterations {
        let next = gamma2_star_map(current, t, g)?;
        let step = next - current;
        // halve the damping when the iteration starts to oscillate
        if step * previous_step < 0.0 && step.abs() > 0.5 * previous_step.abs() {
            damping *= 0.5;
        }
        previous_step = step;
        last_change = step.abs();
        current += damping * step;
        if last_change < fp.tolerance {
            return Ok(current);
        }
    }
    Err(Error::FixedPoint {
        iterations: fp.max_iterations,
        last_change,
    })
}

/// Right-hand side of the `Γ₂*` fixed-point equation.
fn gamma2_star_map(gamma2: f64, t: f64, g: f64) -> Result<f64> {
    let twopi_t = 2.0 * PI * t;
    let amp = (1.0 / twopi_t).powf(1.0 + g);
    let shift = gamma2 / (2.0 * twopi_t);
    let u = |x: f64| -> Result<f64> { Ok(amp * (-g * digamma(Complex64::new(x, 0.0))?.re).exp()) };
    let trig = |z: f64| -> Result<f64> {
        if z <= 0.0 && z == z.round() {
            return Err(Error::SpecialFunctionPole {
                function: "trigamma",
                z: Complex64::new(z, 0.0),
            });
        }
        Ok(trigamma(Complex64::new(z, 0.0))?.re)
    };
    // integrand u(x) ψ'(x + u - c); tends to 1 as x → 0 where u blows up
    let integrand = |x: f64| -> Result<f64> {
        let ux = u(x)?;
        if !ux.is_finite() || ux > 1e12 {
            return Ok(1.0);
        }
        Ok(ux * trig(x + ux - shift)?)
    };

    // split point: beyond it the remainder u·[ψ'(x+u-c) - ψ'(x)] decays
    // like x^{-2-g} and ∫ u ψ'(x) is known in closed form
    let split = 50.0_f64.max(4.0 * (amp + shift));
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let guard = |r: Result<f64>| -> f64 {
        r.unwrap_or_else(|e| {
            failure.borrow_mut().get_or_insert(e);
            0.0
        })
    };
    let head = quadrature::integrate(|x| guard(integrand(x)), 0.0, split, 1e-13).integral;
    // substitute x = 1/s on [split, ∞)
    let remainder = quadrature::integrate(
        |s| {
            if s <= 0.0 {
                return 0.0;
            }
            let x = 1.0 / s;
            guard(u(x).and_then(|ux| Ok(ux * (trig(x + ux - shift)? - trig(x)?) / (s * s))))
        },
        0.0,
        1.0 / split,
        1e-14,
    )
    .integral;
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    // ∫_X^∞ A e^{-gψ} ψ' dx = (A/g) e^{-gψ(X)}
    let closed_tail = amp / g * (-g * digamma(Complex64::new(split, 0.0))?.re).exp();
    Ok(twopi_t * g * (head + remainder + closed_tail))
}

/// `T_c1 = (Γ₁*⁽⁰⁾ - Γ₂*⁽⁰⁾/2)/π`.
pub fn tc1_analytic(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let r = zero_t_rates(1.0 - 2.0 * alpha)?;
    let value = (r.gamma1_star - 0.5 * r.gamma2_star) / PI;
    if value < 0.0 {
        return Err(Error::BelowCriticalCoupling { alpha, value });
    }
    Ok(value)
}

/// `T_c2` from the collapse condition with `ψ(x) ≈ -γ - 1/x`.
pub fn tc2_analytic(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let g = 1.0 - 2.0 * alpha;
    let root = (2.0 * g + g * g).sqrt();
    let expo = (g * (1.0 + EULER_GAMMA) + root) / (1.0 + g);
    Ok(expo.exp() * (1.0 + g + root).powf(1.0 / (1.0 + g)) / (2.0 * PI))
}

/// Small-`g` expansion `T_c2 ≈ (1 + 4√(1/2 - α))/(2π)`.
pub fn tc2_small_g(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok((1.0 + 4.0 * (0.5 - alpha).sqrt()) / (2.0 * PI))
}

/// NIBA limit of `T_c2` as `α → 1/2`, `T_K/π`. Only used for comparison.
pub fn niba_tc2_reference() -> f64 {
    1.0 / PI
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(Error::Domain(format!(
            "no transition for alpha = {alpha}: the dynamics is incoherent for all T above 1/2"
        )));
    }
    Ok(())
}

/// One line of the closed-form comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticRow {
    pub alpha: f64,
    pub tc1_closed: Option<f64>,
    pub tc2_closed: Option<f64>,
    pub tc2_linear: Option<f64>,
    pub niba_ref: f64,
}

pub fn analytic_row(alpha: f64) -> AnalyticRow {
    AnalyticRow {
        alpha,
        tc1_closed: tc1_analytic(alpha).ok(),
        tc2_closed: tc2_analytic(alpha).ok(),
        tc2_linear: tc2_small_g(alpha).ok(),
        niba_ref: niba_tc2_reference(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{evaluate_rates, AccuracySpec};

    #[test]
    fn zero_t_rates_at_g_one_tenth() {
        let r = zero_t_rates(0.1).unwrap();
        assert!((r.gamma1_star - 1.0219).abs() < 5e-5);
        assert!((r.omega - 0.3001).abs() < 5e-5);
        assert!((r.gamma2_star - 1.0811).abs() < 5e-5);
    }

    #[test]
    fn zero_t_limits() {
        let r = zero_t_rates(1e-4).unwrap();
        assert!((r.gamma1_star - 1.0).abs() < 1e-3);
        assert!((r.gamma2_star - 1.0).abs() < 1e-3);
        assert!(r.omega < 1e-3);
        let r0 = zero_t_rates(0.0).unwrap();
        assert_eq!(r0.gamma2_star, 1.0);
        assert_eq!(r0.omega, 0.0);
        // Ω ≈ πg for small g
        let r = zero_t_rates(0.02).unwrap();
        assert!((r.omega / (PI * 0.02) - 1.0).abs() < 0.05);
        assert!(zero_t_rates(1.0).is_err());
        assert!(zero_t_rates(-0.1).is_err());
    }

    #[test]
    fn transition_temperatures() {
        let tp = 1.0 / (2.0 * PI);
        assert!((tc1_analytic(0.5).unwrap() - tp).abs() < 1e-15);
        assert!((tc2_analytic(0.5).unwrap() - tp).abs() < 1e-15);
        assert!((tc2_small_g(0.5).unwrap() - tp).abs() < 1e-15);
        assert!((tc1_analytic(0.45).unwrap() - 0.1532).abs() < 5e-4);
        assert!((tc2_analytic(0.45).unwrap() - 0.417).abs() < 1e-3);
        assert!((tc2_small_g(0.45).unwrap() - 0.3015).abs() < 1e-4);
        assert!(tc2_analytic(0.55).is_err());
        assert!((niba_tc2_reference() / tp - 2.0).abs() < 1e-15);
    }

    #[test]
    fn critical_coupling_is_bracketed() {
        assert!(tc1_analytic(0.32).is_ok());
        assert!(matches!(
            tc1_analytic(0.28),
            Err(Error::BelowCriticalCoupling { .. })
        ));
    }

    #[test]
    fn band_has_positive_width() {
        for k in 0..50 {
            let alpha = 0.3 + 0.2 * k as f64 / 49.0;
            if let Ok(t1) = tc1_analytic(alpha) {
                assert!(tc2_analytic(alpha).unwrap() >= t1, "alpha = {alpha}");
            }
        }
    }

    #[test]
    fn small_g_form_is_first_order() {
        let dev = |alpha: f64| {
            let a = tc2_analytic(alpha).unwrap();
            (tc2_small_g(alpha).unwrap() - a).abs() / a
        };
        assert!(dev(0.495) < dev(0.45) / 3.0);
    }

    #[test]
    fn closed_form_reduces_to_power_law_at_low_t() {
        let p = ModelParams::with_default_bandwidth(0.45, 1e-4).unwrap();
        let t = p.temperature();
        let g2 = Complex64::new(1.08, 0.0);
        for e in [Complex64::new(0.0, 0.5), Complex64::new(0.3, 0.2), Complex64::new(0.0, 2.0)] {
            let closed = gamma1_closed_form(e, g2, &p).unwrap();
            let power = ((-Complex64::i() * e + PI * t + 0.5 * g2).powf(-p.g())).re;
            assert!((closed.re / power - 1.0).abs() < 0.01, "E = {e}");
        }
        let p0 = ModelParams::with_default_bandwidth(0.5, 0.2).unwrap();
        let v = gamma1_closed_form(Complex64::new(0.3, -0.2), g2, &p0).unwrap();
        assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn closed_form_tracks_flow_to_order_g() {
        let p = ModelParams::with_default_bandwidth(0.45, 0.3).unwrap();
        let e = Complex64::new(0.0, -0.2);
        let flow = evaluate_rates(e, &p, &AccuracySpec::default()).unwrap();
        let closed = gamma1_closed_form(e, flow.gamma2, &p).unwrap();
        let dev = (closed - flow.gamma1).norm() / flow.gamma1.norm();
        assert!(dev < 0.1, "deviation {dev}");
    }

    #[test]
    fn gamma2_star_low_t_limit() {
        let p = ModelParams::with_default_bandwidth(0.45, 1e-3).unwrap();
        let v = gamma2_star_finite_t(&p, &FixedPointSpec::default()).unwrap();
        let zero = zero_t_rates(0.1).unwrap().gamma2_star;
        assert!((v / zero - 1.0).abs() < 0.05, "{v} vs {zero}");
    }

    #[test]
    fn top_singularity_moves_down_with_temperature() {
        // Γ₂* itself grows slowly with T; the level πT + Γ₂*/2 of the
        // topmost singularity sinks monotonically
        let mut last = 0.0;
        for k in 0..10 {
            let t = 0.05 + 0.05 * k as f64;
            let p = ModelParams::with_default_bandwidth(0.45, t).unwrap();
            let v = gamma2_star_finite_t(&p, &FixedPointSpec::default()).unwrap();
            assert!(v > 0.5 && v < 2.0, "O(T_K) scale expected, got {v}");
            let level = PI * t + 0.5 * v;
            assert!(level > last, "T = {t}");
            last = level;
        }
    }

    #[test]
    fn gamma2_star_matches_flow() {
        let p = ModelParams::with_default_bandwidth(0.45, 0.2).unwrap();
        let star = gamma2_star_finite_t(&p, &FixedPointSpec::default()).unwrap();
        // Γ₂ just above z₀ from the numerical flow
        let z0 = Complex64::new(0.0, -(PI * 0.2 + 0.5 * star) + 0.03);
        let flow = evaluate_rates(z0, &p, &AccuracySpec::default()).unwrap();
        assert!((flow.gamma2.re / star - 1.0).abs() < 0.02);
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Flow equations for the relaxation rates `Γ₁(E)`, `Γ₂(E)`.
//!
//! With the Matsubara sum done in closed form the flow reads
//!
//! ```text
//! dΓ₁/dE = i g Γ₁ / (2πT) · ψ'(1/2 + (-iE + Γ₂/2) / (2πT))
//! dΓ₂/dE = i g Γ₁ / (2πT) · ψ'(1/2 + (-iE + Γ₁)   / (2πT))
//! ```
//!
//! starting from `Γ₁ = Γ₂ = Δ²/ω_c` at `E = iω_c`. At `T = 0` the trigamma
//! reduces to `1/z` and the right-hand side becomes `i g Γ₁ Π_{2/1}(E)`.
//!
//! Trajectories leave `iω_c`, run horizontally at height `ω_c` to the real
//! part of the target and then straight down. The running rates are kept
//! inside the trigamma argument.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::ode::{Rhs, State, StepControl, Walker};
use crate::specfun::trigamma;

/// Tolerances and domain limits for flow integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracySpec {
    pub rel: f64,
    pub abs: f64,
    /// Lowest admissible `Im E` is `-depth`.
    pub depth: f64,
    /// Largest admissible `|Re E|`.
    pub max_re: f64,
    /// Radius of the exclusion disk around known nonanalyticities.
    pub guard_radius: f64,
}

impl Default for AccuracySpec {
    fn default() -> Self {
        Self {
            rel: 1e-9,
            abs: 1e-12,
            depth: 2.0,
            max_re: 1e3,
            guard_radius: 1e-3,
        }
    }
}

impl AccuracySpec {
    pub fn with_rel(mut self, rel: f64) -> Self {
        self.rel = rel;
        self
    }

    pub fn with_depth(mut self, depth: f64) -> Self {
        self.depth = depth;
        self
    }

    fn control(&self) -> StepControl {
        StepControl {
            rel: self.rel,
            abs: self.abs,
            ..StepControl::default()
        }
    }
}

/// Position on a trajectory together with the rates reached there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowState {
    pub energy: Complex64,
    pub gamma1: Complex64,
    pub gamma2: Complex64,
}

impl FlowState {
    pub fn rates(&self) -> Rates {
        Rates {
            gamma1: self.gamma1,
            gamma2: self.gamma2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub gamma1: Complex64,
    pub gamma2: Complex64,
}

/// Integration path from the seed point `iΛ₀` to a target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowPath {
    pub start: Complex64,
    /// `Re E_target + iΛ₀`; the path runs horizontally to here, then down.
    pub corner: Complex64,
    pub end: Complex64,
}

impl FlowPath {
    pub fn to(params: &ModelParams, end: Complex64) -> Self {
        let top = params.bandwidth();
        Self {
            start: Complex64::new(0.0, top),
            corner: Complex64::new(end.re, top),
            end,
        }
    }
}

/// Derivatives `(dΓ₁/dE, dΓ₂/dE)` at `state`.
pub fn flow_rhs(state: &FlowState, params: &ModelParams) -> Result<(Complex64, Complex64)> {
    let (d, _) = rhs_with_distance(
        params.g(),
        params.temperature(),
        state.energy,
        &[state.gamma1, state.gamma2],
    )?;
    Ok((d[0], d[1]))
}

/// Argument of the trigamma function in the `Γ₁` equation.
pub fn trigamma_argument(energy: Complex64, rate: Complex64, n: u8, temperature: f64) -> Complex64 {
    let twopi_t = 2.0 * PI * temperature;
    0.5 + (-Complex64::i() * energy + rate / f64::from(n)) / twopi_t
}

/// Distance from `z` to the nearest nonpositive integer.
fn pole_distance(z: Complex64) -> f64 {
    let m = (-z.re).round().max(0.0);
    (z + m).norm()
}

/// Rates beyond this modulus (in units of `T_K`) are treated as a blow-up
/// of the flow, which happens just below an essential singularity.
const RATE_CEILING: f64 = 1e8;

fn rhs_with_distance(
    g: f64,
    temperature: f64,
    energy: Complex64,
    y: &State,
) -> Result<(State, f64)> {
    let zero = Complex64::new(0.0, 0.0);
    if g == 0.0 {
        return Ok(([zero, zero], f64::INFINITY));
    }
    let i = Complex64::i();
    let (g1, g2) = (y[0], y[1]);
    if !(g1.norm() < RATE_CEILING && g2.norm() < RATE_CEILING) {
        return Err(Error::FlowSingularity {
            at: energy,
            reason: "rates diverged".into(),
        });
    }
    if temperature > 0.0 {
        let twopi_t = 2.0 * PI * temperature;
        let z1 = trigamma_argument(energy, g2, 2, temperature);
        let z2 = trigamma_argument(energy, g1, 1, temperature);
        let fail = |e: Error| match e {
            Error::SpecialFunctionPole { .. } => Error::FlowSingularity {
                at: energy,
                reason: "trigamma pole on the flow path".into(),
            },
            other => other,
        };
        let t1 = trigamma(z1).map_err(fail)?;
        let t2 = trigamma(z2).map_err(fail)?;
        let pref = i * g * g1 / twopi_t;
        let dist = twopi_t * pole_distance(z1).min(pole_distance(z2));
        Ok(([pref * t1, pref * t2], dist))
    } else {
        let b1 = -i * energy + 0.5 * g2;
        let b2 = -i * energy + g1;
        if b1.norm() == 0.0 || b2.norm() == 0.0 {
            return Err(Error::FlowSingularity {
                at: energy,
                reason: "branch point of the zero-temperature flow".into(),
            });
        }
        let pref = i * g * g1;
        Ok(([pref / b1, pref / b2], b1.norm().min(b2.norm())))
    }
}

struct FlowRhs {
    g: f64,
    temperature: f64,
}

impl Rhs for FlowRhs {
    fn eval(&self, energy: Complex64, y: &State) -> Result<(State, f64)> {
        rhs_with_distance(self.g, self.temperature, energy, y)
    }
}

/// Integrates the flow for one parameter set.
#[derive(Debug, Clone)]
pub struct FlowSolver {
    params: ModelParams,
    tol: AccuracySpec,
    guards: Vec<Complex64>,
}

impl FlowSolver {
    pub fn new(params: ModelParams, tol: AccuracySpec) -> Self {
        Self {
            params,
            tol,
            guards: Vec::new(),
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn tol(&self) -> &AccuracySpec {
        &self.tol
    }

    /// Register known nonanalyticities; targets inside their guard disks are
    /// refused.
    pub fn with_guards(mut self, guards: impl IntoIterator<Item = Complex64>) -> Self {
        self.guards.extend(guards);
        self
    }

    fn rhs(&self) -> FlowRhs {
        FlowRhs {
            g: self.params.g(),
            temperature: self.params.temperature(),
        }
    }

    fn check_target(&self, target: Complex64) -> Result<()> {
        if !target.re.is_finite() || !target.im.is_finite() {
            return Err(Error::Domain(format!("non-finite flow target {target}")));
        }
        if target.im < -self.tol.depth || target.re.abs() > self.tol.max_re {
            return Err(Error::Domain(format!(
                "E = {target} outside the flow domain (Im E >= {}, |Re E| <= {})",
                -self.tol.depth, self.tol.max_re
            )));
        }
        if target.im > self.params.bandwidth() {
            return Err(Error::Domain(format!(
                "E = {target} lies above the flow seed i·omega_c"
            )));
        }
        if let Some(g) = self
            .guards
            .iter()
            .find(|g| (**g - target).norm() < self.tol.guard_radius)
        {
            return Err(Error::FlowSingularity {
                at: target,
                reason: format!("inside the guard disk of the nonanalyticity at {g}"),
            });
        }
        Ok(())
    }

    /// A walker positioned at `x + iω_c` with the flow already carried over
    /// from the seed point.
    fn walker_at_top(&self, x: f64) -> Result<Walker> {
        let seed = self.params.initial_rate();
        let seed = Complex64::new(seed, 0.0);
        let top = self.params.bandwidth();
        let mut w = Walker::new(Complex64::new(0.0, top), [seed, seed], self.tol.control());
        w.advance_to(&self.rhs(), Complex64::new(x, top))?;
        Ok(w)
    }

    /// `(Γ₁(E), Γ₂(E))` at a single point.
    pub fn evaluate_rates(&self, target: Complex64) -> Result<Rates> {
        self.check_target(target)?;
        let mut w = self.walker_at_top(target.re)?;
        w.advance_to(&self.rhs(), target)?;
        Ok(Rates {
            gamma1: w.y[0],
            gamma2: w.y[1],
        })
    }

    /// Rates along the vertical line `Re E = x` at the heights `ys`, which
    /// must be sorted in descending order.
    ///
    /// The trajectory stops at the first failure; the returned vector holds
    /// one entry per requested height.
    pub fn sample_column(&self, x: f64, ys: &[f64]) -> Vec<Result<Rates>> {
        let mut out = Vec::with_capacity(ys.len());
        let mut walker = match self.walker_at_top(x) {
            Ok(w) => Some(w),
            Err(e) => {
                out.push(Err(e));
                None
            }
        };
        let rhs = self.rhs();
        for &y in ys.iter().skip(out.len()) {
            let Some(w) = walker.as_mut() else {
                out.push(Err(Error::FlowSingularity {
                    at: Complex64::new(x, y),
                    reason: "trajectory stopped above this point".into(),
                }));
                continue;
            };
            let target = Complex64::new(x, y);
            let res = self
                .check_target(target)
                .and_then(|_| w.advance_to(&rhs, target))
                .map(|_| Rates {
                    gamma1: w.y[0],
                    gamma2: w.y[1],
                });
            if res.is_err() {
                walker = None;
            }
            out.push(res);
        }
        out
    }

    /// Rates along an arbitrary polyline: the flow is carried down the
    /// imaginary axis to `points[0]`'s height, across to `points[0]`, then
    /// through the points in order.
    ///
    /// Valid where the function is analytic between the path and the seed.
    pub fn sample_polyline(&self, points: &[Complex64]) -> Result<Vec<Rates>> {
        let Some(first) = points.first() else {
            return Ok(Vec::new());
        };
        for p in points {
            self.check_target(*p)?;
        }
        let mut w = self.walker_at_top(0.0)?;
        let rhs = self.rhs();
        w.advance_to(&rhs, Complex64::new(0.0, first.im))?;
        let mut out = Vec::with_capacity(points.len());
        for p in points {
            w.advance_to(&rhs, *p)?;
            out.push(Rates {
                gamma1: w.y[0],
                gamma2: w.y[1],
            });
        }
        Ok(out)
    }

    /// Rates reached along an explicit path of waypoints starting at the
    /// seed point `iω_c`.
    pub fn evaluate_along(&self, waypoints: &[Complex64]) -> Result<Rates> {
        let seed = Complex64::new(self.params.initial_rate(), 0.0);
        let top = self.params.bandwidth();
        let mut w = Walker::new(Complex64::new(0.0, top), [seed, seed], self.tol.control());
        let rhs = self.rhs();
        for p in waypoints {
            self.check_target(*p)?;
            w.advance_to(&rhs, *p)?;
        }
        Ok(Rates {
            gamma1: w.y[0],
            gamma2: w.y[1],
        })
    }
}

/// Convenience wrapper around [`FlowSolver::evaluate_rates`].
pub fn evaluate_rates(target: Complex64, params: &ModelParams, tol: &AccuracySpec) -> Result<Rates> {
    FlowSolver::new(*params, *tol).evaluate_rates(target)
}

/// Denominators below this modulus count as sitting on a pole.
pub const PROPAGATOR_GUARD: f64 = 1e-300;

/// `Π_n(E) = i / (E + iΓ_n(E)/n)`.
pub fn propagator(energy: Complex64, n: u8, rates: &Rates) -> Result<Complex64> {
    let rate = match n {
        1 => rates.gamma1,
        2 => rates.gamma2,
        _ => return Err(Error::Domain(format!("propagator index must be 1 or 2, got {n}"))),
    };
    let denom = energy + Complex64::i() * rate / f64::from(n);
    let modulus = denom.norm();
    if !(modulus > PROPAGATOR_GUARD) {
        return Err(Error::PropagatorPole { at: energy, modulus });
    }
    Ok(Complex64::i() / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::matsubara_sum_sq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_coupling_has_vanishing_rhs() {
        let p = ModelParams::with_default_bandwidth(0.5, 0.2).unwrap();
        let s = FlowState {
            energy: c(0.3, -0.2),
            gamma1: c(1.3, 0.1),
            gamma2: c(0.7, -0.4),
        };
        let (a, b) = flow_rhs(&s, &p).unwrap();
        assert_eq!(a, c(0.0, 0.0));
        assert_eq!(b, c(0.0, 0.0));
    }

    #[test]
    fn rhs_matches_matsubara_sum() {
        let p = ModelParams::with_default_bandwidth(0.45, 0.3).unwrap();
        let s = FlowState {
            energy: c(0.4, 0.25),
            gamma1: c(0.9, 0.05),
            gamma2: c(1.1, -0.02),
        };
        let (d1, d2) = flow_rhs(&s, &p).unwrap();
        let i = Complex64::i();
        let m = 400_000;
        let sum1 = matsubara_sum_sq(s.energy, s.gamma2, 2, 0.3, m).unwrap();
        let sum2 = matsubara_sum_sq(s.energy, s.gamma1, 1, 0.3, m).unwrap();
        let o1 = i * p.g() * s.gamma1 * sum1;
        let o2 = i * p.g() * s.gamma1 * sum2;
        assert!((d1 - o1).norm() / o1.norm() < 1e-5);
        assert!((d2 - o2).norm() / o2.norm() < 1e-5);
    }

    #[test]
    fn zero_temperature_limit_of_rhs() {
        // E = 0.5i, Γ₂ = 1: -iE + Γ₂/2 = 1, so dΓ₁/dE = i g Γ₁
        let g1 = c(1.0, 0.0);
        let s = FlowState {
            energy: c(0.0, 0.5),
            gamma1: g1,
            gamma2: c(1.0, 0.0),
        };
        let cold = ModelParams::with_default_bandwidth(0.45, 0.0).unwrap();
        let (d0, _) = flow_rhs(&s, &cold).unwrap();
        assert!((d0 - Complex64::i() * 0.1 * g1).norm() < 1e-14);
        let warm = cold.with_temperature(1e-6).unwrap();
        let (d1, _) = flow_rhs(&s, &warm).unwrap();
        assert!((d1 - d0).norm() < 1e-5);
        // also equals i g Γ₁ Π₂
        let pi2 = propagator(s.energy, 2, &s.rates()).unwrap();
        assert!((d0 - Complex64::i() * 0.1 * g1 * pi2).norm() < 1e-14);
    }

    #[test]
    fn zero_temperature_branch_point_is_an_error() {
        let p = ModelParams::with_default_bandwidth(0.45, 0.0).unwrap();
        let s = FlowState {
            energy: c(0.0, -0.5),
            gamma1: c(1.0, 0.0),
            gamma2: c(1.0, 0.0),
        };
        assert!(matches!(flow_rhs(&s, &p), Err(Error::FlowSingularity { .. })));
    }

    #[test]
    fn exactly_solvable_point_is_constant() {
        let p = ModelParams::with_default_bandwidth(0.5, 0.1).unwrap();
        let r = evaluate_rates(c(0.7, -1.3), &p, &AccuracySpec::default()).unwrap();
        assert!((r.gamma1 - 1.0).norm() < 1e-12);
        assert!((r.gamma2 - 1.0).norm() < 1e-12);
    }

    #[test]
    fn seed_point_returns_initial_condition() {
        let p = ModelParams::with_default_bandwidth(0.45, 0.1).unwrap();
        let r = evaluate_rates(c(0.0, p.bandwidth()), &p, &AccuracySpec::default()).unwrap();
        assert_eq!(r.gamma1, c(p.initial_rate(), 0.0));
        assert_eq!(r.gamma2, c(p.initial_rate(), 0.0));
    }

    #[test]
    fn propagator_values() {
        let unit = Rates {
            gamma1: c(1.0, 0.0),
            gamma2: c(2.0, 0.0),
        };
        assert!((propagator(c(0.0, 0.0), 1, &unit).unwrap() - 1.0).norm() < 1e-15);
        assert!((propagator(c(0.0, 0.0), 2, &unit).unwrap() - 1.0).norm() < 1e-15);
        let far = c(3e5, -2e5);
        let p = propagator(far, 1, &unit).unwrap();
        assert!((far * p - Complex64::i()).norm() < 1e-5);
        let on_pole = propagator(c(0.0, -1.0), 1, &unit);
        assert!(matches!(on_pole, Err(Error::PropagatorPole { .. })));
    }

    #[test]
    fn domain_and_guards() {
        let p = ModelParams::with_default_bandwidth(0.45, 0.1).unwrap();
        let solver = FlowSolver::new(p, AccuracySpec::default()).with_guards([c(0.0, -0.8)]);
        assert!(matches!(
            solver.evaluate_rates(c(0.0, -5.0)),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            solver.evaluate_rates(c(0.0002, -0.8)),
            Err(Error::FlowSingularity { .. })
        ));
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Dormand–Prince 5(4) integration of a two-component complex system along
//! straight segments of the complex plane.
//!
//! A [`Walker`] keeps the current position, state and trial step, so that a
//! trajectory can be continued segment by segment (down a column, along a
//! line of sample points) without restarting the step-size control.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type State = [Complex64; 2];

/// Right-hand side of `dY/dE = f(E, Y)`.
///
/// Besides the derivative it returns an estimate of the distance from `E`
/// to the nearest singularity of `f`, used to bound the step size.
pub trait Rhs {
    fn eval(&self, energy: Complex64, y: &State) -> Result<(State, f64)>;
}

impl<F> Rhs for F
where
    F: Fn(Complex64, &State) -> Result<(State, f64)>,
{
    fn eval(&self, energy: Complex64, y: &State) -> Result<(State, f64)> {
        self(energy, y)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rel: f64,
    pub abs: f64,
    /// Step is kept below this fraction of the singularity distance.
    pub distance_fraction: f64,
    pub max_steps: usize,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rel: 1e-9,
            abs: 1e-12,
            distance_fraction: 0.1,
            max_steps: 200_000,
        }
    }
}

// Dormand–Prince tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// b - b*, the embedded error weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[inline]
fn axpy(y: &State, h: Complex64, terms: &[(f64, &State)]) -> State {
    let mut out = *y;
    for (coef, k) in terms {
        out[0] += h * *coef * k[0];
        out[1] += h * *coef * k[1];
    }
    out
}

/// Integrator state carried along a trajectory.
#[derive(Debug, Clone)]
pub struct Walker {
    pub energy: Complex64,
    pub y: State,
    step: f64,
    control: StepControl,
    steps_taken: usize,
}

impl Walker {
    pub fn new(energy: Complex64, y: State, control: StepControl) -> Self {
        Self {
            energy,
            y,
            step: 0.0,
            control,
            steps_taken: 0,
        }
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// Integrate along the straight segment from the current position to
    /// `target`.
    pub fn advance_to<R: Rhs>(&mut self, rhs: &R, target: Complex64) -> Result<()> {
        let delta = target - self.energy;
        let length = delta.norm();
        if length == 0.0 {
            return Ok(());
        }
        let dir = delta / length;
        let origin = self.energy;
        let mut s = 0.0;
        let (mut k1, mut dist) = rhs.eval(origin, &self.y)?;
        let floor_at = |e: Complex64| 1e-13 * (1.0 + e.norm());
        if self.step <= floor_at(origin) {
            self.step = initial_step(&self.y, &k1, dist, length, &self.control);
        }
        let mut budget = self.control.max_steps;
        while s < length {
            if budget == 0 {
                return Err(Error::FlowSingularity {
                    at: origin + dir * s,
                    reason: format!("step budget of {} exhausted", self.control.max_steps),
                });
            }
            budget -= 1;
            let cap = self.control.distance_fraction * dist;
            let mut h = self.step.min(cap).min(length - s);
            let last = h >= length - s;
            if last {
                h = length - s;
            }
            let floor = floor_at(origin + dir * s);
            if h < floor && !last {
                return Err(Error::FlowSingularity {
                    at: origin + dir * s,
                    reason: format!("step size underflow (h = {h:.3e})"),
                });
            }
            let hc = dir * h;
            let e0 = origin + dir * s;
            let y = self.y;
            let (k2, _) = rhs.eval(e0 + hc * C2, &axpy(&y, hc, &[(A21, &k1)]))?;
            let (k3, _) = rhs.eval(e0 + hc * C3, &axpy(&y, hc, &[(A31, &k1), (A32, &k2)]))?;
            let (k4, _) = rhs.eval(
                e0 + hc * C4,
                &axpy(&y, hc, &[(A41, &k1), (A42, &k2), (A43, &k3)]),
            )?;
            let (k5, _) = rhs.eval(
                e0 + hc * C5,
                &axpy(&y, hc, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
            )?;
            let (k6, _) = rhs.eval(
                e0 + hc,
                &axpy(&y, hc, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
            )?;
            let y_new = axpy(&y, hc, &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
            let (k7, dist_new) = match rhs.eval(if last { target } else { e0 + hc }, &y_new) {
                Ok(v) => v,
                Err(_) if h > floor => {
                    // the trial point sits on a singularity of the right-hand side
                    self.step = 0.25 * h;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let mut err: f64 = 0.0;
            for c in 0..2 {
                let e = hc
                    * (E1 * k1[c] + E3 * k3[c] + E4 * k4[c] + E5 * k5[c] + E6 * k6[c] + E7 * k7[c]);
                let scale =
                    self.control.abs + self.control.rel * y[c].norm().max(y_new[c].norm());
                err = err.max(e.norm() / scale);
            }
            if !err.is_finite() {
                self.step = 0.25 * h;
                if self.step < floor {
                    return Err(Error::FlowSingularity {
                        at: e0,
                        reason: "non-finite state".into(),
                    });
                }
                continue;
            }
            if err <= 1.0 {
                s = if last { length } else { s + h };
                self.y = y_new;
                self.steps_taken += 1;
                k1 = k7;
                dist = dist_new;
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                // a final short step says nothing about the natural step size
                if !last || h >= self.step {
                    self.step = h * factor;
                }
            } else {
                self.step = h * (0.9 * err.powf(-0.2)).clamp(0.1, 0.9);
            }
        }
        self.energy = target;
        Ok(())
    }
}

fn initial_step(y: &State, k: &State, dist: f64, length: f64, control: &StepControl) -> f64 {
    let ynorm = y[0].norm().max(y[1].norm());
    let knorm = k[0].norm().max(k[1].norm());
    let scale = control.abs + control.rel * ynorm;
    let mut h = if knorm > 0.0 {
        0.01 * (scale / control.rel.max(1e-16)) / knorm
    } else {
        length
    };
    h = h.min(control.distance_fraction * dist).min(length);
    h.max(1e-10 * length)
}

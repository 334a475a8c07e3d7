// SPDX-License-Identifier: Apache-2.0

//! Inverse Laplace transform of `Π₁(E)` and a time-domain regime check.
//!
//! With `Π₁(E) = ∫₀^∞ dt e^{iEt} P(t)` the inverse runs along a horizontal
//! line in the region of analyticity,
//!
//! ```text
//! P(t) = e^{-σt}/(2π) ∫ dx e^{-ixt} [Π₁(x - iσ) - Π_ref(x - iσ)] + e^{-Γ_ref t}
//! ```
//!
//! with the reference pole `Π_ref(E) = i/(E + iΓ_ref)` removed and re-added
//! analytically so that the integrand decays like `1/x²`. The line sits at
//! `Im E = -σ`, a fixed fraction of the way down to the slowest feature of
//! `Π₁`. Quadrature errors then come with the factor `e^{-σt}`, which keeps
//! the trace usable far into the exponential tail.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::flow::{propagator, AccuracySpec, FlowSolver};
use crate::model::ModelParams;
use crate::specfun::exp_integral_e1;
use crate::spectral::{analyze, Regime, SearchSpec};

/// Quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    /// Half-width of the integration window in `Re E`.
    pub e_max: f64,
    /// Largest time the step is sized for.
    pub t_max: f64,
    /// Contour depth as a fraction of the slowest decay rate of `Π₁`.
    pub shift_fraction: f64,
    /// Fixed contour depth; overrides `shift_fraction` when set.
    pub contour_shift: Option<f64>,
    /// Largest acceptable `|A|/E_max` for the `A/x²` tail model.
    pub max_tail: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self {
            e_max: 200.0,
            t_max: 50.0,
            shift_fraction: 0.5,
            contour_shift: None,
            max_tail: 0.05,
        }
    }
}

impl QuadSpec {
    /// Trapezoid step `π/(4 t_max)`, adjusted so that `e_max` is an even
    /// multiple of it.
    pub fn step(&self) -> (f64, usize) {
        let h = PI / (4.0 * self.t_max);
        let mut n = (self.e_max / h).ceil() as usize;
        n += n % 2;
        (self.e_max / n as f64, n)
    }
}

/// Uniform time grid `t_min, t_min + dt, ...` up to `t_max`.
pub fn uniform_times(t_min: f64, t_max: f64, dt: f64) -> Vec<f64> {
    let n = ((t_max - t_min) / dt + 1e-9).floor() as usize;
    (0..=n).map(|k| (t_min + k as f64 * dt).min(t_max)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationTrace {
    pub params: ModelParams,
    /// Ascending, in `1/T_K`.
    pub times: Vec<f64>,
    /// `Re P(t)`.
    pub values: Vec<f64>,
    /// `Im P(t)`, zero up to quadrature error.
    pub imag: Vec<f64>,
    /// Error estimate per sample: step halving, imaginary part and flow
    /// tolerance combined.
    pub noise: Vec<f64>,
    pub contour_shift: f64,
    pub e_max: f64,
    pub step: f64,
    pub reference_rate: f64,
    /// `|A|/E_max` of the tail model, the size of the neglected window.
    pub tail: f64,
}

impl RelaxationTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Last time at which `|P|` still stands clearly above the noise.
    pub fn horizon(&self) -> f64 {
        self.times
            .iter()
            .zip(&self.values)
            .zip(&self.noise)
            .rev()
            .find(|((_, p), n)| p.abs() > 10.0 * **n)
            .map_or(0.0, |((t, _), _)| *t)
    }
}

/// `E₂(z) = e^{-z} - z E₁(z)`.
fn exp_integral_e2(z: Complex64) -> Result<Complex64> {
    Ok((-z).exp() - z * exp_integral_e1(z)?)
}

/// `P(t)` on `times` by quadrature along `Im E = -σ`.
pub fn invert_laplace(
    params: &ModelParams,
    times: &[f64],
    quad: &QuadSpec,
    tol: &AccuracySpec,
) -> Result<RelaxationTrace> {
    let t_floor = 10.0 / params.bandwidth();
    if times.is_empty() {
        return Err(Error::Domain("empty time grid".into()));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("time grid must be strictly ascending".into()));
    }
    if times[0] < t_floor || *times.last().unwrap() > quad.t_max {
        return Err(Error::Domain(format!(
            "time grid must lie in [{t_floor}, {}]",
            quad.t_max
        )));
    }
    if !(quad.e_max > 0.0) || !(quad.t_max > 0.0) || !(quad.shift_fraction > 0.0 && quad.shift_fraction < 1.0) {
        return Err(Error::Config(format!("invalid quadrature settings {quad:?}")));
    }
    let sigma = match quad.contour_shift {
        Some(s) if s > 0.0 => s,
        Some(s) => return Err(Error::Config(format!("contour shift must be positive, got {s}"))),
        None => {
            let features = analyze(params, tol, &SearchSpec::default(), None)?;
            let slowest = features
                .slowest_rate()
                .ok_or_else(|| Error::Classification("no feature bounds the contour".into()))?;
            quad.shift_fraction * slowest
        }
    };
    let solver = FlowSolver::new(*params, *tol);
    let gamma_ref = {
        let g0 = solver.evaluate_rates(Complex64::new(0.0, 0.0))?.gamma1.re;
        if g0 > 1.5 * sigma {
            g0
        } else {
            2.0 * sigma
        }
    };
    let (h, n) = quad.step();
    let i = Complex64::i();

    // D(x) = Π₁ - Π_ref at x_k = k h, k = -n..=n
    let half = |sign: f64| -> Result<Vec<Complex64>> {
        let points: Vec<Complex64> = (0..=n)
            .map(|k| Complex64::new(sign * k as f64 * h, -sigma))
            .collect();
        let rates = solver.sample_polyline(&points)?;
        points
            .iter()
            .zip(&rates)
            .map(|(e, r)| Ok(propagator(*e, 1, r)? - i / (e + i * gamma_ref)))
            .collect()
    };
    let right = half(1.0)?;
    let left = half(-1.0)?;
    let mut d: Vec<Complex64> = Vec::with_capacity(2 * n + 1);
    d.extend(left.iter().skip(1).rev());
    d.extend(right.iter());

    let edge = |v: Complex64, x: f64| v * Complex64::new(x, -sigma).powi(2);
    let tail = edge(right[n], quad.e_max).norm().max(edge(left[n], -quad.e_max).norm()) / quad.e_max;
    if !(tail <= quad.max_tail) {
        return Err(Error::Window { tail });
    }
    let mass: f64 = h * d.iter().map(|v| v.norm()).sum::<f64>();
    let x0 = -quad.e_max;
    let m = n / 2;

    // Trapezoid sum over [-x, x] completed by the A/x² tails and the
    // endpoint correction for an integrand ~ D(±x) e^{-ixt}.
    let complete = |sum: Complex64, step: f64, x: f64, k: usize, t: f64| -> Result<Complex64> {
        let (dr, dl) = (right[k], left[k]);
        let z = Complex64::new(0.0, x * t);
        let tails = (edge(dr, x) * exp_integral_e2(z)? + edge(dl, -x) * exp_integral_e2(z.conj())?) / x;
        let delta = Complex64::new(0.0, -(0.5 * step / (0.5 * step * t).tan() - 1.0 / t));
        let edges = dr * (-z).exp() * delta + dl * z.exp() * delta.conj();
        Ok(step * sum + tails + edges)
    };

    let rows: Vec<Result<(f64, f64, f64)>> = times
        .par_iter()
        .map(|&t| {
            let rot = Complex64::from_polar(1.0, -h * t);
            let mut fine = Complex64::new(0.0, 0.0);
            let mut coarse = Complex64::new(0.0, 0.0);
            let mut inner = Complex64::new(0.0, 0.0);
            let mut phase = Complex64::new(0.0, 0.0);
            for (k, v) in d.iter().enumerate() {
                if k % 256 == 0 {
                    phase = Complex64::from_polar(1.0, -(x0 + k as f64 * h) * t);
                }
                let term = v * phase;
                let w = if k == 0 || k == 2 * n { 0.5 } else { 1.0 };
                fine += w * term;
                if k % 2 == 0 {
                    coarse += w * term;
                }
                if k >= n - m && k <= n + m {
                    inner += if k == n - m || k == n + m { 0.5 * term } else { term };
                }
                phase *= rot;
            }
            let fine = complete(fine, h, quad.e_max, n, t)?;
            let coarse = complete(coarse, 2.0 * h, quad.e_max, n, t)?;
            let narrow = complete(inner, h, m as f64 * h, m, t)?;
            let scale = (-sigma * t).exp() / (2.0 * PI);
            let p = scale * fine + (-gamma_ref * t).exp();
            let err = (fine - coarse).norm() + (fine - narrow).norm() + tol.rel * mass;
            Ok((p.re, p.im, scale * err + p.im.abs()))
        })
        .collect();
    let mut values = Vec::with_capacity(times.len());
    let mut imag = Vec::with_capacity(times.len());
    let mut raw = Vec::with_capacity(times.len());
    for r in rows {
        let (p, q, e) = r?;
        values.push(p);
        imag.push(q);
        raw.push(e);
    }
    // the error estimate oscillates with the window frequencies; take its
    // envelope over one period of the narrow window on either side
    let period = 4.0 * PI / quad.e_max;
    let mut noise = Vec::with_capacity(times.len());
    let mut lo = 0;
    let mut hi = 0;
    for (k, &t) in times.iter().enumerate() {
        while times[lo] < t - period {
            lo += 1;
        }
        while hi + 1 < times.len() && times[hi + 1] <= t + period {
            hi += 1;
        }
        hi = hi.max(k);
        noise.push(raw[lo..=hi].iter().copied().fold(0.0, f64::max));
    }
    Ok(RelaxationTrace {
        params: *params,
        times: times.to_vec(),
        values,
        imag,
        noise,
        contour_shift: sigma,
        e_max: quad.e_max,
        step: h,
        reference_rate: gamma_ref,
        tail,
    })
}

/// Samples with `|P|` below this multiple of the noise carry no sign.
const SIGN_MARGIN: f64 = 3.0;

/// Zeros of `P(t)` for `t ≥ t_start` inside the resolvable horizon.
///
/// Only samples whose sign is resolved (`|P|` above the noise margin) take
/// part; a zero sits between consecutive resolved samples of opposite sign,
/// at the linear interpolant of the last pair of raw samples that brackets
/// it. Fails when two zeros are closer than four samples, i.e. fewer than
/// eight samples per oscillation period.
pub fn zeros(trace: &RelaxationTrace, t_start: f64) -> Result<Vec<f64>> {
    let floor = 10.0 / trace.params.bandwidth();
    if t_start < floor {
        return Err(Error::Domain(format!(
            "t_start = {t_start} lies in the nonuniversal window below {floor}"
        )));
    }
    let horizon = trace.horizon();
    let (t, p) = (&trace.times, &trace.values);
    let mut out = Vec::new();
    let mut last_zero: Option<usize> = None;
    let mut resolved: Option<usize> = None;
    for k in 0..trace.len() {
        if t[k] < t_start || t[k] > horizon || p[k].abs() <= SIGN_MARGIN * trace.noise[k] {
            continue;
        }
        if let Some(r) = resolved {
            if p[r].signum() != p[k].signum() {
                // last raw bracket inside (r, k]
                let j = (r + 1..=k).rev().find(|&j| p[j - 1].signum() != p[j].signum()).unwrap_or(k);
                let (t0, t1, p0, p1) = (t[j - 1], t[j], p[j - 1], p[j]);
                if let Some(l) = last_zero {
                    if j - l < 4 {
                        return Err(Error::Resolution(format!(
                            "zeros near t = {t0:.4} are only {} samples apart",
                            j - l
                        )));
                    }
                }
                out.push(if p1 == p0 { t0 } else { t0 + (t1 - t0) * p0 / (p0 - p1) });
                last_zero = Some(j);
            }
        }
        resolved = Some(k);
    }
    Ok(out)
}

/// Number of strict sign changes of `P(t)` for `t ≥ t_start`.
pub fn count_sign_changes(trace: &RelaxationTrace, t_start: f64) -> Result<usize> {
    Ok(zeros(trace, t_start)?.len())
}

/// Result of the time-domain classifier. `regime` is `None` when the trace
/// does not reach far enough to decide.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceVerdict {
    pub regime: Option<Regime>,
    pub zeros: Vec<f64>,
    pub horizon: f64,
}

/// Regime read off the zeros of `P(t)`.
///
/// With zero spacing `s` (the first zero itself when there is only one), the
/// oscillation counts as persistent when the last zero lies within `1.5 s`
/// of the horizon, and as dead when more than `3 s` of resolvable trace
/// follow it without a further zero. Anything in between is inconclusive.
pub fn classify_from_trace(trace: &RelaxationTrace, t_start: f64) -> Result<TraceVerdict> {
    let zs = zeros(trace, t_start)?;
    let horizon = trace.horizon();
    let regime = match zs.as_slice() {
        [] if horizon > t_start => Some(Regime::Incoherent),
        [] => None,
        [only] => decide(horizon - only, only - t_start),
        [first, .., last] => decide(horizon - last, (last - first) / (zs.len() - 1) as f64),
    };
    Ok(TraceVerdict {
        regime,
        zeros: zs,
        horizon,
    })
}

fn decide(after_last: f64, spacing: f64) -> Option<Regime> {
    if after_last < 1.5 * spacing {
        Some(Regime::AsymptoticallyCoherent)
    } else if after_last > 3.0 * spacing {
        Some(Regime::PartiallyCoherent)
    } else {
        None
    }
}

/// Decay rate from a least-squares fit of `ln|P|` over the last `fraction`
/// of the resolvable horizon.
pub fn fitted_decay_rate(trace: &RelaxationTrace, fraction: f64) -> Result<f64> {
    let horizon = trace.horizon();
    let start = horizon * (1.0 - fraction);
    let pts: Vec<(f64, f64)> = trace
        .times
        .iter()
        .zip(&trace.values)
        .filter(|(t, p)| **t >= start && **t <= horizon && p.abs() > 0.0)
        .map(|(t, p)| (*t, p.abs().ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Resolution(format!(
            "only {} samples in the fit window [{start:.3}, {horizon:.3}]",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - ml)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Ok(-sxy / sxx)
}

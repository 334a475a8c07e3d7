// SPDX-License-Identifier: Apache-2.0

//! Transition temperatures from the spectral features.
//!
//! `T_c2` is where the finite-frequency pole pair disappears into the
//! imaginary axis, `T_c1` where the topmost essential singularity crosses
//! the level of the pole pair. Both searches scan downwards from the top of
//! their bracket and then bisect the first change they meet. Scanning from
//! above matters close to `α = 1/2`, where a window without any
//! finite-frequency pole opens below `T_c1`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{niba_tc2_reference, tc1_analytic, tc2_analytic, tc2_small_g};
use crate::error::{Error, Result};
use crate::flow::AccuracySpec;
use crate::model::{ModelParams, DEFAULT_BANDWIDTH};
use crate::spectral::{analyze, Regime, SearchSpec, SpectralFeatures};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    pub tc1_bracket: (f64, f64),
    pub tc2_bracket: (f64, f64),
    /// Temperature step of the downward scan.
    pub scan_step: f64,
    /// Bisection stops at this bracket width.
    pub resolution: f64,
    pub omega_c: f64,
    pub tol: AccuracySpec,
    pub search: SearchSpec,
}

impl Default for PhaseConfig {
    fn default() -> Self {
        Self {
            tc1_bracket: (1e-3, 0.4),
            tc2_bracket: (0.05, 1.0),
            scan_step: 0.02,
            resolution: 1e-3,
            omega_c: DEFAULT_BANDWIDTH,
            tol: AccuracySpec::default(),
            search: SearchSpec::default(),
        }
    }
}

impl PhaseConfig {
    fn features(&self, alpha: f64, t: f64, hint: Option<Complex64>) -> Result<SpectralFeatures> {
        let params = ModelParams::new(alpha, t, self.omega_c)?;
        analyze(&params, &self.tol, &self.search, hint).map_err(|e| e.at_temperature(t))
    }

    fn check(&self, alpha: f64, bracket: (f64, f64)) -> Result<()> {
        let g = 1.0 - 2.0 * alpha;
        if !(g > 0.0 && g <= 0.4) {
            return Err(Error::Domain(format!(
                "transition search needs 0 < 1 - 2 alpha <= 0.4, got alpha = {alpha}"
            )));
        }
        let (lo, hi) = bracket;
        if !(lo > 0.0 && lo < hi) || !(self.scan_step > 0.0) || !(self.resolution > 0.0) {
            return Err(Error::Config(format!(
                "invalid bracket [{lo}, {hi}] or scan settings"
            )));
        }
        Ok(())
    }
}

/// A located transition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub temperature: f64,
    /// Final bisection bracket.
    pub bracket: (f64, f64),
    pub evaluations: usize,
    /// A bisection midpoint was a boundary case or fell outside both phases.
    pub boundary: bool,
}

/// Temperatures from `hi` down to `lo` in steps of `step`, both ends included.
fn descending(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).ceil() as usize;
    (0..=n).map(|k| (hi - k as f64 * step).max(lo)).collect()
}

/// Upper edge of the range of temperatures with a finite-frequency pole.
pub fn find_tc2_numeric(alpha: f64, bracket: (f64, f64), cfg: &PhaseConfig) -> Result<Transition> {
    cfg.check(alpha, bracket)?;
    let (lo, hi) = bracket;
    let mut evaluations = 0;
    let mut above: Option<f64> = None;
    let mut below: Option<(f64, Complex64)> = None;
    for t in descending(lo, hi, cfg.scan_step) {
        let f = cfg.features(alpha, t, None)?;
        evaluations += 1;
        match f.leading_pole() {
            Some(p) => {
                below = Some((t, p.z));
                break;
            }
            None => above = Some(t),
        }
    }
    let (Some(mut t_hi), Some((mut t_lo, mut hint))) = (above, below) else {
        return Err(Error::NoTransition { lo, hi });
    };
    while t_hi - t_lo > cfg.resolution {
        let mid = 0.5 * (t_lo + t_hi);
        let f = cfg.features(alpha, mid, Some(hint))?;
        evaluations += 1;
        match f.leading_pole() {
            Some(p) => {
                t_lo = mid;
                hint = p.z;
            }
            None => t_hi = mid,
        }
    }
    Ok(Transition {
        temperature: 0.5 * (t_lo + t_hi),
        bracket: (t_lo, t_hi),
        evaluations,
        boundary: false,
    })
}

/// Temperature where the topmost singularity crosses the pole level,
/// `h(T) = γ₀ - Γ₁*` changing sign from positive (asymptotically coherent,
/// above) to negative (partially coherent, below).
pub fn find_tc1_numeric(alpha: f64, bracket: (f64, f64), cfg: &PhaseConfig) -> Result<Transition> {
    cfg.check(alpha, bracket)?;
    let (lo, hi) = bracket;
    let mut evaluations = 0;
    let mut hint: Option<Complex64> = None;
    let mut coherent: Option<f64> = None;
    let mut partial: Option<f64> = None;
    for t in descending(lo, hi, cfg.scan_step) {
        let f = cfg.features(alpha, t, hint)?;
        evaluations += 1;
        hint = f.leading_pole().map(|p| p.z).or(hint);
        match f.regime {
            Regime::AsymptoticallyCoherent => coherent = Some(t),
            Regime::PartiallyCoherent if coherent.is_some() => {
                partial = Some(t);
                break;
            }
            // a pole-free window below the coherent band ends the search
            Regime::Incoherent if coherent.is_some() => break,
            _ => {}
        }
    }
    let (Some(mut t_hi), Some(mut t_lo)) = (coherent, partial) else {
        return Err(Error::NoTransition { lo, hi });
    };
    let mut boundary = false;
    while t_hi - t_lo > cfg.resolution {
        let mid = 0.5 * (t_lo + t_hi);
        let f = cfg.features(alpha, mid, hint)?;
        evaluations += 1;
        hint = f.leading_pole().map(|p| p.z).or(hint);
        boundary |= f.boundary;
        match f.regime {
            Regime::AsymptoticallyCoherent => t_hi = mid,
            Regime::PartiallyCoherent => t_lo = mid,
            Regime::Incoherent => {
                // the pole slipped into an exclusion disk: the crossing is here
                boundary = true;
                t_lo = mid;
            }
        }
    }
    Ok(Transition {
        temperature: 0.5 * (t_lo + t_hi),
        bracket: (t_lo, t_hi),
        evaluations,
        boundary,
    })
}

/// One row of the phase diagram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub alpha: f64,
    pub tc1_numeric: Option<f64>,
    pub tc2_numeric: Option<f64>,
    pub tc1_analytic: Option<f64>,
    pub tc2_analytic: Option<f64>,
    pub tc2_small_g: Option<f64>,
    pub niba_ref: f64,
    pub flags: Vec<String>,
}

impl PhaseRow {
    /// A row is flagged when a search failed or ended on a boundary case.
    pub fn is_flagged(&self) -> bool {
        !self.flags.is_empty()
    }
}

/// Temperatures probed to confirm incoherence for `α > 1/2`.
pub const INCOHERENCE_PROBES: [f64; 3] = [0.01, 0.1, 1.0];

fn phase_row(alpha: f64, cfg: &PhaseConfig) -> PhaseRow {
    let mut row = PhaseRow {
        alpha,
        tc1_numeric: None,
        tc2_numeric: None,
        tc1_analytic: tc1_analytic(alpha).ok(),
        tc2_analytic: tc2_analytic(alpha).ok(),
        tc2_small_g: tc2_small_g(alpha).ok(),
        niba_ref: niba_tc2_reference(),
        flags: Vec::new(),
    };
    if alpha >= 0.5 {
        // no transition exists; confirm there is no finite-frequency pole
        for t in INCOHERENCE_PROBES {
            match cfg.features(alpha, t, None) {
                Ok(f) if f.leading_pole().is_some() => {
                    row.flags.push(format!("finite-frequency pole at T = {t}"))
                }
                Ok(_) => {}
                Err(e) => row.flags.push(format!("probe failed: {e}")),
            }
        }
        return row;
    }
    match find_tc2_numeric(alpha, cfg.tc2_bracket, cfg) {
        Ok(tr) => {
            row.tc2_numeric = Some(tr.temperature);
            let hi = cfg.tc1_bracket.1.min(tr.bracket.0);
            match find_tc1_numeric(alpha, (cfg.tc1_bracket.0, hi), cfg) {
                Ok(t1) => {
                    row.tc1_numeric = Some(t1.temperature);
                    if t1.boundary {
                        row.flags.push("tc1: boundary case during bisection".into());
                    }
                }
                Err(e) => row.flags.push(format!("tc1: {e}")),
            }
        }
        Err(e) => row.flags.push(format!("tc2: {e}")),
    }
    row
}

/// Transition temperatures for every `α` of the grid. Rows are independent
/// and run in parallel; failures end up in the row flags.
pub fn scan_phase_diagram(alphas: &[f64], cfg: &PhaseConfig) -> Result<Vec<PhaseRow>> {
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.3 && **a <= 0.55)) {
        return Err(Error::Domain(format!("alpha grid must lie in (0.3, 0.55], got {a}")));
    }
    Ok(alphas.par_iter().map(|&a| phase_row(a, cfg)).collect())
}

// SPDX-License-Identifier: Apache-2.0

//! Nonanalytic structure of `Π₁(E)` in the lower half plane.
//!
//! Three kinds of features matter for the long-time dynamics:
//!
//! * the pole pair `±Ω - iΓ₁*`, solutions of `iz = Γ₁(z)`,
//! * the essential singularities on the imaginary axis at `-iγ_m`, where the
//!   trigamma argument of the `Γ₁` equation hits a pole (at `T = 0` a single
//!   branch point at `-iΓ₂*/2` takes their place),
//! * poles sitting on the imaginary axis itself, which appear once the pair
//!   has collapsed.
//!
//! Near each essential singularity `Γ₁` takes every value infinitely often,
//! so `iz = Γ₁(z)` has an accumulating sequence of spurious roots there.
//! Roots inside an exclusion disk of radius `∝ |g| T` around a singularity
//! are therefore attributed to the singularity and never reported as poles.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::analytic::zero_t_rates;
use crate::error::{Error, Result};
use crate::flow::{propagator, AccuracySpec, FlowSolver};
use crate::model::ModelParams;

/// Poles with `Ω` below this count as sitting on the imaginary axis.
pub const OMEGA_TOL: f64 = 1e-3;

/// Rate differences below this mark a classification as a boundary case.
pub const TIE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Incoherent,
    AsymptoticallyCoherent,
    PartiallyCoherent,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Incoherent => "incoherent",
            Regime::AsymptoticallyCoherent => "asymptotically_coherent",
            Regime::PartiallyCoherent => "partially_coherent",
        })
    }
}

/// A root of `iz = Γ₁(z)`, stored for the right member `Ω ≥ 0` of the
/// mirror pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pole {
    pub z: Complex64,
    pub omega: f64,
    pub decay: f64,
    /// `|iz - Γ₁(z)|` at the accepted iterate.
    pub residual: f64,
}

impl Pole {
    fn new(z: Complex64, residual: f64) -> Self {
        let z = Complex64::new(z.re.abs(), z.im);
        Self {
            z,
            omega: z.re,
            decay: -z.im,
            residual,
        }
    }

    /// The partner `-conj(z)`.
    pub fn mirror(&self) -> Complex64 {
        -self.z.conj()
    }

    pub fn is_finite_frequency(&self) -> bool {
        self.omega > OMEGA_TOL
    }
}

/// Newton iteration controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonSpec {
    /// Convergence threshold on `|iz - Γ₁(z)|`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Longest single update.
    pub max_step: f64,
}

impl Default for NewtonSpec {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 100,
            max_step: 0.25,
        }
    }
}

/// At `T = 0` the pole is also the branch point of `Γ₂`, and the flow cannot
/// be carried arbitrarily close to it.
const ZERO_T_TOLERANCE: f64 = 1e-8;

/// Iterates are kept on the right half of the plane; the mirror image
/// covers the left.
const MIN_RE: f64 = 0.0;

enum Newton {
    Converged(Pole),
    Stalled,
    Captured,
}

fn newton(
    solver: &FlowSolver,
    seed: Complex64,
    spec: &NewtonSpec,
    exclusions: &[(Complex64, f64)],
) -> Result<Newton> {
    let i = Complex64::i();
    let depth = solver.tol().depth;
    let zero_t = solver.params().temperature() == 0.0;
    let tolerance = if zero_t {
        spec.tolerance.max(ZERO_T_TOLERANCE)
    } else {
        spec.tolerance
    };
    let f = |z: Complex64| -> Result<Complex64> { Ok(i * z - solver.evaluate_rates(z)?.gamma1) };
    let inside = |z: Complex64| exclusions.iter().any(|(c, r)| (z - c).norm() < *r);

    let mut z = Complex64::new(seed.re.abs().max(MIN_RE), seed.im);
    if z.im >= 0.0 || z.im < -depth {
        return Err(Error::RootDomain(z));
    }
    let mut fz = f(z)?;
    if fz.norm() < tolerance {
        return Ok(Newton::Converged(Pole::new(z, fz.norm())));
    }
    let h = 1e-5 * (1.0 + z.norm());
    let mut zp = z + Complex64::new(h, h);
    let mut fp = f(zp)?;
    for _ in 0..spec.max_iterations {
        let slope = (fz - fp) / (z - zp);
        if !(slope.norm() > 0.0) || !slope.re.is_finite() {
            return Ok(Newton::Stalled);
        }
        let mut step = -fz / slope;
        if step.norm() > spec.max_step {
            step *= spec.max_step / step.norm();
        }
        let mut next = z + step;
        if next.re < MIN_RE {
            next.re = MIN_RE;
        }
        if next.im >= 0.0 || next.im < -depth {
            return Err(Error::RootDomain(next));
        }
        if inside(next) {
            return Ok(Newton::Captured);
        }
        let fnext = match f(next) {
            Ok(v) => v,
            Err(e) if zero_t && fz.norm() < 1e3 * tolerance => {
                // stalled right next to the branch point: accept the last iterate
                let _ = e;
                return Ok(Newton::Converged(Pole::new(z, fz.norm())));
            }
            Err(e) => return Err(e),
        };
        zp = z;
        fp = fz;
        z = next;
        fz = fnext;
        if fz.norm() < tolerance {
            return Ok(Newton::Converged(Pole::new(z, fz.norm())));
        }
    }
    Ok(Newton::Stalled)
}

/// Newton search for `iz = Γ₁(z)` from a single seed.
///
/// Returns the pole (mirror pair folded to `Ω ≥ 0`), or an empty list when
/// the iteration does not converge.
pub fn find_poles(params: &ModelParams, seed: Complex64, tol: &AccuracySpec) -> Result<Vec<Pole>> {
    if seed.im >= 0.0 {
        return Err(Error::Domain(format!(
            "pole seed must lie in the lower half plane, got {seed}"
        )));
    }
    let solver = FlowSolver::new(*params, *tol);
    match newton(&solver, seed, &NewtonSpec::default(), &[])? {
        Newton::Converged(p) => Ok(vec![p]),
        _ => Ok(Vec::new()),
    }
}

/// Decay rates of imaginary-axis singularities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityScan {
    /// `γ_m`, ascending.
    pub rates: Vec<f64>,
    /// Fewer singularities than requested were found in the flow domain.
    pub short: bool,
}

/// Locate the `count` topmost essential singularities `-iγ_m`.
///
/// A column just right of the axis is walked down; `γ_m` is where
/// `Re(-iE + Γ₂(E)/2) = -ω_m`, i.e. where the trigamma argument of the `Γ₁`
/// equation passes its pole `-m`. At `T = 0` the single crossing with
/// `ω = 0` is the branch point.
pub fn find_imag_axis_singularities(solver: &FlowSolver, count: usize) -> Result<SingularityScan> {
    if count == 0 {
        return Err(Error::Domain("singularity count must be at least 1".into()));
    }
    let params = solver.params();
    let t = params.temperature();
    let g = params.g();
    if g == 0.0 {
        // constant rates, nothing but the pole at -iT_K
        return Ok(SingularityScan {
            rates: Vec::new(),
            short: true,
        });
    }
    let depth = solver.tol().depth;
    let (delta, dy) = if t > 0.0 {
        let twopi_t = 2.0 * PI * t;
        ((g.abs() * twopi_t / 5.0).min(0.05 * twopi_t), (twopi_t / 200.0).min(0.005))
    } else {
        (1e-4, 0.002)
    };
    let n = (depth / dy).floor() as usize;
    let ys: Vec<f64> = (0..=n).map(|k| -(k as f64) * dy).collect();
    let samples = solver.sample_column(delta, &ys);
    let matsubara = |m: usize| PI * t * (2 * m + 1) as f64;
    let wanted = if t > 0.0 { count } else { 1 };

    let mut rates = Vec::new();
    let mut previous: Option<(f64, f64)> = None;
    for (y, r) in ys.iter().zip(&samples) {
        let Ok(r) = r else { break };
        if rates.len() == wanted {
            break;
        }
        let s = y + 0.5 * r.gamma2.re + matsubara(rates.len());
        if let Some((py, ps)) = previous {
            if ps > 0.0 && s <= 0.0 {
                let crossing = py + (y - py) * ps / (ps - s);
                rates.push(-crossing);
                let next = y + 0.5 * r.gamma2.re + matsubara(rates.len());
                previous = Some((*y, next));
                continue;
            }
        }
        previous = Some((*y, s));
    }
    Ok(SingularityScan {
        short: rates.len() < count,
        rates,
    })
}

/// Poles on the imaginary axis strictly above `floor` (a decay rate), from
/// sign changes of `y - Γ₁(-iy)` along the axis.
pub fn find_axis_poles(solver: &FlowSolver, floor: f64) -> Result<Vec<f64>> {
    let stop = floor.min(solver.tol().depth);
    let margin = 1e-3;
    if stop <= margin {
        return Ok(Vec::new());
    }
    let dy = 0.01;
    let n = ((stop - margin) / dy).ceil() as usize;
    let ys: Vec<f64> = (0..=n)
        .map(|k| -((k as f64) * dy).min(stop - margin))
        .collect();
    let samples = solver.sample_column(0.0, &ys);
    let h = |y: f64| -> Result<f64> {
        let r = solver.evaluate_rates(Complex64::new(0.0, -y))?;
        Ok(y - r.gamma1.re)
    };
    let mut out = Vec::new();
    let mut previous: Option<(f64, f64)> = None;
    for (y, r) in ys.iter().zip(&samples) {
        let Ok(r) = r else { break };
        let rate = -y;
        let v = rate - r.gamma1.re;
        if let Some((pr, pv)) = previous {
            if pv * v < 0.0 || v == 0.0 {
                // bisection refinement
                let (mut lo, mut hi, mut vlo) = (pr, rate, pv);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    let vm = h(mid)?;
                    if vm == 0.0 {
                        lo = mid;
                        hi = mid;
                        break;
                    }
                    if (vm < 0.0) == (vlo < 0.0) {
                        lo = mid;
                        vlo = vm;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-12 {
                        break;
                    }
                }
                out.push(0.5 * (lo + hi));
            }
        }
        previous = Some((rate, v));
    }
    Ok(out)
}

/// Knobs for the full feature analysis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpec {
    pub newton: NewtonSpec,
    /// Number of imaginary-axis singularities to locate.
    pub singularities: usize,
    /// Exclusion radius around each singularity in units of `|g| T`.
    pub exclusion: f64,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            newton: NewtonSpec::default(),
            singularities: 6,
            exclusion: 2.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralFeatures {
    pub alpha: f64,
    pub temperature: f64,
    /// Finite-frequency poles (right members), ascending decay rate.
    pub poles: Vec<Pole>,
    /// Essential singularities (branch point at `T = 0`), ascending `γ_m`.
    pub imag_singularities: Vec<f64>,
    /// Poles on the imaginary axis above the topmost singularity.
    pub axis_poles: Vec<f64>,
    /// Fewer singularities than requested were found.
    pub short_list: bool,
    pub regime: Regime,
    pub boundary: bool,
}

impl SpectralFeatures {
    /// The finite-frequency pole closest to the real axis.
    pub fn leading_pole(&self) -> Option<&Pole> {
        self.poles.first()
    }

    /// `γ₀`, the topmost essential singularity.
    pub fn top_singularity(&self) -> Option<f64> {
        self.imag_singularities.first().copied()
    }

    /// All decay rates of features on the imaginary axis, ascending.
    pub fn imag_rates(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .imag_singularities
            .iter()
            .chain(&self.axis_poles)
            .copied()
            .collect();
        v.sort_by(|a, b| a.total_cmp(b));
        v
    }

    /// Smallest decay rate of any located feature.
    pub fn slowest_rate(&self) -> Option<f64> {
        let pole = self.leading_pole().map(|p| p.decay);
        let axis = self.imag_rates().first().copied();
        match (pole, axis) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub regime: Regime,
    /// The deciding rates agree within [`TIE_TOL`].
    pub boundary: bool,
}

/// Regime from the located features: incoherent without a finite-frequency
/// pole, otherwise decided by whether the pole lies above (asymptotically
/// coherent) or below (partially coherent) the topmost singularity.
pub fn classify_regime(features: &SpectralFeatures) -> Result<Classification> {
    let Some(pole) = features.leading_pole() else {
        if features.imag_rates().is_empty() {
            return Err(Error::Classification("no features located".into()));
        }
        return Ok(Classification {
            regime: Regime::Incoherent,
            boundary: false,
        });
    };
    let Some(gamma0) = features.top_singularity() else {
        return Err(Error::Classification(format!(
            "pole at {} located but no imaginary-axis singularity",
            pole.z
        )));
    };
    let diff = pole.decay - gamma0;
    Ok(Classification {
        regime: if diff < 0.0 {
            Regime::AsymptoticallyCoherent
        } else {
            Regime::PartiallyCoherent
        },
        boundary: diff.abs() < TIE_TOL,
    })
}

/// Seeds for the pole search: the hint, the zero-temperature prediction and
/// points around the topmost singularities, where pole pairs are born and
/// absorbed as `T` changes.
fn pole_seeds(params: &ModelParams, gamma_ref: f64, singularities: &[f64], hint: Option<Complex64>) -> Vec<Complex64> {
    let mut seeds = Vec::new();
    if let Some(h) = hint {
        seeds.push(Complex64::new(h.re.abs(), h.im));
    }
    let g = params.g();
    if let Ok(r) = zero_t_rates(g.clamp(0.0, 0.99)) {
        seeds.push(r.pole());
        seeds.push(Complex64::new(r.omega.max(0.05), -gamma_ref));
    }
    let width = (g.abs() * 2.0 * PI * params.temperature() * gamma_ref).sqrt();
    for gm in singularities.iter().take(3) {
        let level = 0.5 * (gm + gamma_ref);
        for f in [1.0, 0.5, 2.0] {
            seeds.push(Complex64::new((f * width).max(0.02), -level));
        }
    }
    seeds
}

/// All distinct poles reachable from the seeds, outside the exclusion disks.
fn search_poles(
    solver: &FlowSolver,
    seeds: &[Complex64],
    singularities: &[f64],
    spec: &SearchSpec,
) -> Vec<Pole> {
    let params = solver.params();
    let radius = (spec.exclusion * params.g().abs() * params.temperature()).max(solver.tol().guard_radius);
    let exclusions: Vec<(Complex64, f64)> = singularities
        .iter()
        .map(|g| (Complex64::new(0.0, -g), radius))
        .collect();
    let mut found: Vec<Pole> = Vec::new();
    for seed in seeds {
        let Ok(Newton::Converged(p)) = newton(solver, *seed, &spec.newton, &exclusions) else {
            continue;
        };
        if exclusions.iter().any(|(c, r)| (p.z - c).norm() < *r) {
            continue;
        }
        if !found.iter().any(|q| (q.z - p.z).norm() < 1e-6) {
            found.push(p);
        }
    }
    found.sort_by(|a, b| a.decay.total_cmp(&b.decay));
    found
}

/// Locate all features at one `(α, T)` and classify the regime.
///
/// `hint` is a pole position from a neighbouring temperature; it is tried
/// first but every other seed is tried as well, so the result does not
/// depend on it except through which roots are reachable.
pub fn analyze(
    params: &ModelParams,
    tol: &AccuracySpec,
    spec: &SearchSpec,
    hint: Option<Complex64>,
) -> Result<SpectralFeatures> {
    // γ₀ grows roughly like Γ₂*/2 + πT; keep it inside the domain
    let tol = tol.with_depth(tol.depth.max(2.5 + 8.0 * params.temperature()));
    let solver = FlowSolver::new(*params, tol);
    let scan = find_imag_axis_singularities(&solver, spec.singularities)?;
    let floor = scan.rates.first().copied().unwrap_or(tol.depth);
    let axis_poles = find_axis_poles(&solver, floor)?;
    let gamma_ref = solver.evaluate_rates(Complex64::new(0.0, 0.0))?.gamma1.re;
    let seeds = pole_seeds(params, gamma_ref, &scan.rates, hint);
    let poles: Vec<Pole> = search_poles(&solver, &seeds, &scan.rates, spec)
        .into_iter()
        .filter(|p| p.is_finite_frequency())
        .collect();
    let mut features = SpectralFeatures {
        alpha: params.alpha(),
        temperature: params.temperature(),
        poles,
        imag_singularities: scan.rates,
        axis_poles,
        short_list: scan.short,
        regime: Regime::Incoherent,
        boundary: false,
    };
    let c = classify_regime(&features)?;
    features.regime = c.regime;
    features.boundary = c.boundary;
    Ok(features)
}

/// Rectangle `[x0, x1] × [y0, y1]` of the complex energy plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0 < x1 && y0 < y1) || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::Config(format!(
                "rectangle needs x0 < x1 and y0 < y1, got [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        Ok(Self { x0, x1, y0, y1 })
    }
}

/// Value of one residual-map cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    Value(f64),
    /// Inside the guard disk of a known nonanalyticity.
    NearSingularity,
    /// The flow could not be carried to this point or a neighbour.
    Failed,
}

impl Cell {
    /// Number written to files: the residual, `-1` near a singularity,
    /// NaN where the flow failed.
    pub fn as_f64(&self) -> f64 {
        match self {
            Cell::Value(v) => *v,
            Cell::NearSingularity => -1.0,
            Cell::Failed => f64::NAN,
        }
    }
}

/// `|∂_{Im E} Re Π₁ + ∂_{Re E} Im Π₁|` on a rectangular grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualMap {
    pub params: ModelParams,
    pub rect: Rect,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// Row-major, `cells[j * nx + i]` at `(xs[i], ys[j])`.
    pub cells: Vec<Cell>,
}

impl ResidualMap {
    pub fn nx(&self) -> usize {
        self.xs.len()
    }

    pub fn ny(&self) -> usize {
        self.ys.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Cell {
        self.cells[j * self.nx() + i]
    }

    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| matches!(c, Cell::Failed)).count()
    }

    /// Largest finite residual and its position.
    pub fn max(&self) -> Option<(f64, Complex64)> {
        let mut best: Option<(f64, Complex64)> = None;
        for j in 0..self.ny() {
            for i in 0..self.nx() {
                if let Cell::Value(v) = self.get(i, j) {
                    if best.is_none_or(|(b, _)| v > b) {
                        best = Some((v, Complex64::new(self.xs[i], self.ys[j])));
                    }
                }
            }
        }
        best
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| a + (b - a) * k as f64 / (n - 1) as f64)
        .collect()
}

/// Derivative at index `k` of samples with spacing `h`: central inside,
/// second-order one-sided at the ends.
fn derivative(v: &[Option<f64>], k: usize, h: f64) -> Option<f64> {
    let n = v.len();
    if k == 0 {
        Some((-3.0 * v[0]? + 4.0 * v[1]? - v[2]?) / (2.0 * h))
    } else if k == n - 1 {
        Some((3.0 * v[n - 1]? - 4.0 * v[n - 2]? + v[n - 3]?) / (2.0 * h))
    } else {
        Some((v[k + 1]? - v[k - 1]?) / (2.0 * h))
    }
}

/// Cauchy–Riemann residual of `Π₁` on an `nx × ny` grid.
///
/// Columns are independent flow trajectories and run in parallel on the
/// current rayon pool. Grid points within `tol.guard_radius` of a `guard`
/// position are reported as [`Cell::NearSingularity`].
pub fn cr_residual_map(
    params: &ModelParams,
    tol: &AccuracySpec,
    rect: Rect,
    grid: (usize, usize),
    guards: &[Complex64],
) -> Result<ResidualMap> {
    let (nx, ny) = grid;
    if nx < 16 || ny < 16 {
        return Err(Error::Config(format!("grid must be at least 16 x 16, got {nx} x {ny}")));
    }
    if rect.y0 < -tol.depth || rect.x0.abs().max(rect.x1.abs()) > tol.max_re {
        return Err(Error::Config(format!(
            "rectangle leaves the flow domain (Im E >= {}, |Re E| <= {})",
            -tol.depth, tol.max_re
        )));
    }
    let solver = FlowSolver::new(*params, *tol);
    let xs = linspace(rect.x0, rect.x1, nx);
    let ys = linspace(rect.y0, rect.y1, ny);
    let descending: Vec<f64> = ys.iter().rev().copied().collect();
    let hx = xs[1] - xs[0];
    let hy = ys[1] - ys[0];

    // Π₁ column by column, indexed [i][j] with ys ascending
    let columns: Vec<Vec<Option<Complex64>>> = xs
        .par_iter()
        .map(|&x| {
            let mut col: Vec<Option<Complex64>> = solver
                .sample_column(x, &descending)
                .into_iter()
                .zip(&descending)
                .map(|(r, &y)| {
                    r.ok()
                        .and_then(|r| propagator(Complex64::new(x, y), 1, &r).ok())
                })
                .collect();
            col.reverse();
            col
        })
        .collect();

    let mut cells = vec![Cell::Failed; nx * ny];
    for j in 0..ny {
        let row_im: Vec<Option<f64>> = (0..nx).map(|i| columns[i][j].map(|p| p.im)).collect();
        for i in 0..nx {
            let here = Complex64::new(xs[i], ys[j]);
            if guards.iter().any(|g| (g - here).norm() < tol.guard_radius) {
                cells[j * nx + i] = Cell::NearSingularity;
                continue;
            }
            let col_re: Vec<Option<f64>> = columns[i].iter().map(|p| p.map(|p| p.re)).collect();
            let dy = derivative(&col_re, j, hy);
            let dx = derivative(&row_im, i, hx);
            if let (Some(a), Some(b)) = (dy, dx) {
                let v = (a + b).abs();
                cells[j * nx + i] = if v.is_finite() { Cell::Value(v) } else { Cell::Failed };
            }
        }
    }
    let map = ResidualMap {
        params: *params,
        rect,
        xs,
        ys,
        cells,
    };
    let failed = map.failed();
    if failed * 10 > nx * ny {
        return Err(Error::Map {
            failed,
            total: nx * ny,
        });
    }
    Ok(map)
}

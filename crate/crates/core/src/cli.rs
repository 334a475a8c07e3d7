// SPDX-License-Identifier: Apache-2.0

//! Execution of a resolved [`RunConfig`]: computes, writes artifacts and a
//! manifest, and maps the outcome to a process exit status.
//!
//! Every run writes `config.conf` (the resolved configuration) and
//! `manifest.json` (configuration plus sha256 of every artifact). Failed
//! runs add `diagnostic.json`. Output is a pure function of the
//! configuration, so rerunning with `--config manifest.json` reproduces
//! every CSV byte for byte.

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::analytic::{analytic_row, zero_t_rates};
use crate::config::{Command, Format, RunConfig};
use crate::error::{Error, Result};
use crate::flow::{propagator, FlowSolver};
use crate::phase::scan_phase_diagram;
use crate::spectral::{analyze, cr_residual_map, Rect, SpectralFeatures};
use crate::time_domain::{classify_from_trace, fitted_decay_rate, invert_laplace, uniform_times, QuadSpec};

/// Process exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitStatus {
    Success,
    ConfigError,
    NumericalFailure,
    PartialScan,
}

impl ExitStatus {
    pub fn code(&self) -> i32 {
        match self {
            ExitStatus::Success => 0,
            ExitStatus::ConfigError => 2,
            ExitStatus::NumericalFailure => 3,
            ExitStatus::PartialScan => 4,
        }
    }

    fn of_error(e: &Error) -> Self {
        match e {
            Error::Config(_) => ExitStatus::ConfigError,
            _ => ExitStatus::NumericalFailure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: ExitStatus,
    pub message: String,
    pub out: PathBuf,
    pub artifacts: Vec<Artifact>,
}

struct Writer {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
}

impl Writer {
    fn write(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        std::fs::write(self.dir.join(name), contents)?;
        self.artifacts.push(Artifact {
            path: name.to_string(),
            sha256: hex_digest(contents),
            bytes: contents.len() as u64,
        });
        Ok(())
    }
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// sha256 of a file, as recorded in manifests.
pub fn file_sha256(path: &Path) -> Result<String> {
    Ok(hex_digest(&std::fs::read(path)?))
}

/// A CSV cell.
#[derive(Debug, Clone)]
enum Cell {
    F(f64),
    I(usize),
    S(String),
}

impl Cell {
    fn opt(v: Option<f64>) -> Self {
        Cell::F(v.unwrap_or(f64::NAN))
    }

    fn csv(&self) -> String {
        match self {
            Cell::F(v) if v.is_nan() => "NaN".into(),
            Cell::F(v) => format!("{v:e}"),
            Cell::I(v) => v.to_string(),
            Cell::S(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::S(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(v) if v.is_finite() => json!(v),
            Cell::F(_) => Value::Null,
            Cell::I(v) => json!(v),
            Cell::S(s) => json!(s),
        }
    }
}

/// Column names with units, and rows. Serialized to CSV (header row
/// `name [unit]`) and to a JSON mirror with the same columns.
struct Table {
    columns: Vec<(&'static str, &'static str)>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(columns: &[(&'static str, &'static str)]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn csv(&self) -> String {
        let mut s = self
            .columns
            .iter()
            .map(|(n, u)| if u.is_empty() { n.to_string() } else { format!("{n} [{u}]") })
            .collect::<Vec<_>>()
            .join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }

    fn json(&self) -> Value {
        let columns: Vec<Value> = self
            .columns
            .iter()
            .map(|(n, u)| json!({"name": n, "unit": u}))
            .collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::json).collect()))
            .collect();
        json!({"columns": columns, "rows": rows})
    }

    /// `<stem>.csv` and `<stem>.json` as requested by the config.
    fn emit(&self, w: &mut Writer, cfg: &RunConfig, stem: &str) -> Result<()> {
        if cfg.wants(Format::Csv) {
            w.write(&format!("{stem}.csv"), self.csv().as_bytes())?;
        }
        if cfg.wants(Format::Json) {
            w.write(&format!("{stem}.json"), pretty(&self.json())?.as_bytes())?;
        }
        Ok(())
    }
}

fn pretty<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn gnuplot(w: &mut Writer, cfg: &RunConfig, name: &str, body: &str) -> Result<()> {
    if cfg.wants(Format::Gnuplot) {
        let script = format!(
            "# generated by rtrg {}; run with: gnuplot -p {name}\nset datafile separator ','\n{body}",
            cfg.command
        );
        w.write(name, script.as_bytes())?;
    }
    Ok(())
}

/// Execute `cfg`, writing into `cfg.out`. Never panics on numerical
/// trouble: failures become exit statuses plus a diagnostic file.
pub fn run(cfg: &RunConfig) -> RunOutcome {
    let mut outcome = RunOutcome {
        status: ExitStatus::Success,
        message: String::new(),
        out: cfg.out.clone(),
        artifacts: Vec::new(),
    };
    if let Err(e) = cfg.validate() {
        outcome.status = ExitStatus::ConfigError;
        outcome.message = e.to_string();
        return outcome;
    }
    if let Err(e) = std::fs::create_dir_all(&cfg.out) {
        outcome.status = ExitStatus::ConfigError;
        outcome.message = format!("cannot create output directory {}: {e}", cfg.out.display());
        return outcome;
    }
    let mut w = Writer {
        dir: cfg.out.clone(),
        artifacts: Vec::new(),
    };
    let result = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} worker threads: {e}", cfg.jobs)))
        .and_then(|pool| pool.install(|| dispatch(cfg, &mut w)));
    match result {
        Ok((status, message)) => {
            outcome.status = status;
            outcome.message = message;
        }
        Err(e) => {
            outcome.status = ExitStatus::of_error(&e);
            outcome.message = e.to_string();
            let diag = json!({
                "status": outcome.status.code(),
                "error": e.to_string(),
                "detail": format!("{e:?}"),
                "config": cfg.to_pairs(),
            });
            if let Err(e2) = pretty(&diag).and_then(|s| w.write("diagnostic.json", s.as_bytes())) {
                outcome.message.push_str(&format!(" (diagnostic not written: {e2})"));
            }
        }
    }
    let finish = w
        .write("config.conf", cfg.to_config_text().as_bytes())
        .and_then(|_| {
            let manifest = Manifest {
                tool: "rtrg",
                version: env!("CARGO_PKG_VERSION"),
                command: cfg.command,
                status: outcome.status.code(),
                message: outcome.message.clone(),
                config: cfg.to_pairs(),
                artifacts: w.artifacts.clone(),
            };
            let text = pretty(&manifest)?;
            std::fs::write(cfg.out.join("manifest.json"), text)?;
            Ok(())
        });
    if let Err(e) = finish {
        outcome.status = ExitStatus::NumericalFailure;
        outcome.message = format!("cannot write manifest: {e}");
    }
    outcome.artifacts = w.artifacts;
    outcome
}

#[derive(Serialize)]
struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: Command,
    status: i32,
    message: String,
    config: BTreeMap<String, String>,
    artifacts: Vec<Artifact>,
}

fn dispatch(cfg: &RunConfig, w: &mut Writer) -> Result<(ExitStatus, String)> {
    match cfg.command {
        Command::Flow => run_flow(cfg, w),
        Command::Map => run_map(cfg, w),
        Command::Pt => run_pt(cfg, w),
        Command::Poles => run_poles(cfg, w),
        Command::Phase => run_phase(cfg, w),
        Command::Analytic => run_analytic(cfg, w),
    }
}

fn run_flow(cfg: &RunConfig, w: &mut Writer) -> Result<(ExitStatus, String)> {
    let params = cfg.params()?;
    let mut acc = cfg.accuracy();
    acc.depth = acc.depth.max(-cfg.flow_im_min);
    let solver = FlowSolver::new(params, acc);
    let n = cfg.flow_points;
    let ys: Vec<f64> = (0..n)
        .map(|k| cfg.flow_im_max - (cfg.flow_im_max - cfg.flow_im_min) * k as f64 / (n - 1) as f64)
        .collect();
    let samples = solver.sample_column(cfg.flow_re, &ys);
    let mut t = Table::new(&[
        ("re_E", "T_K"),
        ("im_E", "T_K"),
        ("re_gamma1", "T_K"),
        ("im_gamma1", "T_K"),
        ("re_gamma2", "T_K"),
        ("im_gamma2", "T_K"),
        ("re_pi1", "1/T_K"),
        ("im_pi1", "1/T_K"),
        ("status", ""),
    ]);
    let mut failed = 0;
    for (y, s) in ys.iter().zip(&samples) {
        let e = Complex64::new(cfg.flow_re, *y);
        let row = s.as_ref().ok().map(|r| (r, propagator(e, 1, r)));
        match row {
            Some((r, Ok(p))) => t.push(vec![
                Cell::F(e.re),
                Cell::F(e.im),
                Cell::F(r.gamma1.re),
                Cell::F(r.gamma1.im),
                Cell::F(r.gamma2.re),
                Cell::F(r.gamma2.im),
                Cell::F(p.re),
                Cell::F(p.im),
                Cell::S("ok".into()),
            ]),
            _ => {
                failed += 1;
                let mut row = vec![Cell::F(e.re), Cell::F(e.im)];
                row.extend((0..6).map(|_| Cell::F(f64::NAN)));
                row.push(Cell::S("failed".into()));
                t.push(row);
            }
        }
    }
    t.emit(w, cfg, "flow")?;
    gnuplot(
        w,
        cfg,
        "flow.gp",
        "set xlabel 'Im E [T_K]'\nset ylabel 'rate [T_K]'\n\
         plot 'flow.csv' every ::1 using 2:3 with lines title 'Re Gamma_1', \\\n     \
         '' every ::1 using 2:4 with lines title 'Im Gamma_1', \\\n     \
         '' every ::1 using 2:5 with lines title 'Re Gamma_2'\n",
    )?;
    if failed == n {
        return Err(Error::FlowSingularity {
            at: Complex64::new(cfg.flow_re, cfg.flow_im_max),
            reason: "no point of the column could be reached".into(),
        });
    }
    if failed > 0 {
        return Ok((
            ExitStatus::PartialScan,
            format!("{failed} of {n} points beyond a flow singularity"),
        ));
    }
    Ok((ExitStatus::Success, format!("{n} points")))
}

/// Known nonanalyticities of a feature set, for guard disks.
fn feature_points(f: &SpectralFeatures) -> Vec<Complex64> {
    let mut v: Vec<Complex64> = f.poles.iter().flat_map(|p| [p.z, p.mirror()]).collect();
    v.extend(f.imag_rates().iter().map(|g| Complex64::new(0.0, -g)));
    v
}

fn run_map(cfg: &RunConfig, w: &mut Writer) -> Result<(ExitStatus, String)> {
    let params = cfg.params()?;
    let acc = cfg.accuracy();
    let rect = Rect::new(cfg.rect[0], cfg.rect[1], cfg.rect[2], cfg.rect[3])?;
    let (guards, note) = match analyze(&params, &acc, &cfg.search(), None) {
        Ok(f) => (feature_points(&f), String::new()),
        Err(e) => (Vec::new(), format!("; no guard disks ({e})")),
    };
    let mut acc_map = acc;
    acc_map.depth = acc.depth.max(-rect.y0);
    let map = cr_residual_map(&params, &acc_map, rect, (cfg.grid[0], cfg.grid[1]), &guards)?;
    let mut t = Table::new(&[("re_E", "T_K"), ("im_E", "T_K"), ("residual", "1/T_K^2")]);
    for j in 0..map.ny() {
        for i in 0..map.nx() {
            t.push(vec![Cell::F(map.xs[i]), Cell::F(map.ys[j]), Cell::F(map.get(i, j).as_f64())]);
        }
    }
    t.emit(w, cfg, "residual")?;
    if cfg.wants(Format::Gnuplot) {
        // gnuplot "nonuniform matrix": first row nx then x values, then y and values per row
        let mut m = format!("{}", map.nx());
        for x in &map.xs {
            m.push_str(&format!(" {x:e}"));
        }
        m.push('\n');
        for j in 0..map.ny() {
            m.push_str(&format!("{:e}", map.ys[j]));
            for i in 0..map.nx() {
                m.push_str(&format!(" {}", Cell::F(map.get(i, j).as_f64()).csv()));
            }
            m.push('\n');
        }
        w.write("residual_matrix.dat", m.as_bytes())?;
        gnuplot(
            w,
            cfg,
            "map.gp",
            "set datafile separator whitespace\nset xlabel 'Re E [T_K]'\nset ylabel 'Im E [T_K]'\n\
             set logscale cb\nset cbrange [1e-6:*]\n\
             plot 'residual_matrix.dat' nonuniform matrix with image notitle\n",
        )?;
    }
    Ok((
        ExitStatus::Success,
        format!("{} x {} grid, {} failed points{note}", map.nx(), map.ny(), map.failed()),
    ))
}

fn run_pt(cfg: &RunConfig, w: &mut Writer) -> Result<(ExitStatus, String)> {
    let params = cfg.params()?;
    let acc = cfg.accuracy();
    let features = analyze(&params, &acc, &cfg.search(), None)?;
    let slowest = features
        .slowest_rate()
        .ok_or_else(|| Error::Classification("no feature bounds the Laplace contour".into()))?;
    let quad = QuadSpec {
        contour_shift: Some(cfg.shift_fraction * slowest),
        ..cfg.quad()
    };
    let times = uniform_times(cfg.t_start, cfg.tmax, cfg.dt);
    let trace = invert_laplace(&params, &times, &quad, &acc)?;
    let verdict = classify_from_trace(&trace, cfg.t_start)?;
    let fit = fitted_decay_rate(&trace, 0.2).ok();

    let mut t = Table::new(&[("t", "1/T_K"), ("P", ""), ("abs_P", "")]);
    for (tt, p) in trace.times.iter().zip(&trace.values) {
        t.push(vec![Cell::F(*tt), Cell::F(*p), Cell::F(p.abs())]);
    }
    t.emit(w, cfg, "trace")?;
    let classification = verdict
        .regime
        .map(|r| r.to_string())
        .unwrap_or_else(|| "inconclusive".into());
    let mut s = Table::new(&[
        ("alpha", ""),
        ("temperature", "T_K"),
        ("classification", ""),
        ("spectral_classification", ""),
        ("boundary", ""),
        ("zeros", ""),
        ("first_zero", "1/T_K"),
        ("horizon", "1/T_K"),
        ("fitted_rate", "T_K"),
        ("slowest_rate", "T_K"),
        ("contour_shift", "T_K"),
        ("reference_rate", "T_K"),
    ]);
    s.push(vec![
        Cell::F(params.alpha()),
        Cell::F(params.temperature()),
        Cell::S(classification.clone()),
        Cell::S(features.regime.to_string()),
        Cell::S(features.boundary.to_string()),
        Cell::I(verdict.zeros.len()),
        Cell::opt(verdict.zeros.first().copied()),
        Cell::F(verdict.horizon),
        Cell::opt(fit),
        Cell::F(slowest),
        Cell::F(trace.contour_shift),
        Cell::F(trace.reference_rate),
    ]);
    s.emit(w, cfg, "trace_summary")?;
    gnuplot(
        w,
        cfg,
        "pt.gp",
        "set xlabel 't [1/T_K]'\nset ylabel '|P(t)|'\nset logscale y\n\
         plot 'trace.csv' every ::1 using 1:3 with lines title '|P(t)|'\n",
    )?;
    Ok((
        ExitStatus::Success,
        format!("classification {classification}, spectral {}", features.regime),
    ))
}

fn run_poles(cfg: &RunConfig, w: &mut Writer) -> Result<(ExitStatus, String)> {
    let params = cfg.params()?;
    let features = analyze(&params, &cfg.accuracy(), &cfg.search(), None)?;
    if cfg.wants(Format::Json) {
        w.write("features.json", pretty(&features)?.as_bytes())?;
    }
    let mut t = Table::new(&[("kind", ""), ("re_z", "T_K"), ("im_z", "T_K")]);
    for p in &features.poles {
        for z in [p.z, p.mirror()] {
            t.push(vec![Cell::S("pole".into()), Cell::F(z.re), Cell::F(z.im)]);
        }
    }
    let kind = if params.temperature() > 0.0 {
        "essential_singularity"
    } else {
        "branch_point"
    };
    for g in &features.imag_singularities {
        t.push(vec![Cell::S(kind.into()), Cell::F(0.0), Cell::F(-g)]);
    }
    for g in &features.axis_poles {
        t.push(vec![Cell::S("axis_pole".into()), Cell::F(0.0), Cell::F(-g)]);
    }
    if cfg.wants(Format::Csv) {
        w.write("poles.csv", t.csv().as_bytes())?;
    }
    let mut s = Table::new(&[
        ("alpha", ""),
        ("temperature", "T_K"),
        ("regime", ""),
        ("boundary", ""),
        ("short_list", ""),
    ]);
    s.push(vec![
        Cell::F(features.alpha),
        Cell::F(features.temperature),
        Cell::S(features.regime.to_string()),
        Cell::S(features.boundary.to_string()),
        Cell::S(features.short_list.to_string()),
    ]);
    if cfg.wants(Format::Csv) {
        w.write("poles_summary.csv", s.csv().as_bytes())?;
    }
    gnuplot(
        w,
        cfg,
        "poles.gp",
        "set xlabel 'Re E [T_K]'\nset ylabel 'Im E [T_K]'\n\
         plot 'poles.csv' every ::1 using 2:3:(stringcolumn(1) eq 'pole' ? 7 : 5) with points pt variable notitle\n",
    )?;
    Ok((ExitStatus::Success, format!("regime {}", features.regime)))
}

/// Dense analytic lines for plots.
fn analytic_lines() -> Table {
    let mut t = Table::new(&[("alpha", ""), ("tc1_closed", "T_K"), ("tc2_closed", "T_K"), ("tc2_linear", "T_K")]);
    for k in 0..=80 {
        let a = 0.3 + 0.2 * k as f64 / 80.0;
        let r = analytic_row(a);
        t.push(vec![Cell::F(a), Cell::opt(r.tc1_closed), Cell::opt(r.tc2_closed), Cell::opt(r.tc2_linear)]);
    }
    t
}

fn run_phase(cfg: &RunConfig, w: &mut Writer) -> Result<(ExitStatus, String)> {
    let rows = scan_phase_diagram(&cfg.alphas, &cfg.phase())?;
    let mut t = Table::new(&[
        ("alpha", ""),
        ("tc1_closed", "T_K"),
        ("tc2_closed", "T_K"),
        ("tc2_linear", "T_K"),
        ("tc1_numeric", "T_K"),
        ("tc2_numeric", "T_K"),
        ("niba_ref", "T_K"),
        ("flags", ""),
    ]);
    for r in &rows {
        t.push(vec![
            Cell::F(r.alpha),
            Cell::opt(r.tc1_analytic),
            Cell::opt(r.tc2_analytic),
            Cell::opt(r.tc2_small_g),
            Cell::opt(r.tc1_numeric),
            Cell::opt(r.tc2_numeric),
            Cell::F(r.niba_ref),
            Cell::S(r.flags.join("; ")),
        ]);
    }
    t.emit(w, cfg, "phase")?;
    if cfg.wants(Format::Gnuplot) {
        let lines = analytic_lines();
        w.write("analytic_lines.csv", lines.csv().as_bytes())?;
        gnuplot(
            w,
            cfg,
            "phase.gp",
            "set xlabel 'alpha'\nset ylabel 'T [T_K]'\nset key top right\n\
             plot 'analytic_lines.csv' every ::1 using 1:2 with lines title 'T_c1 analytic', \\\n     \
             '' every ::1 using 1:3 with lines title 'T_c2 analytic', \\\n     \
             'phase.csv' every ::1 using 1:5 with points pt 6 title 'T_c1 numeric', \\\n     \
             '' every ::1 using 1:6 with points pt 6 title 'T_c2 numeric'\n",
        )?;
    }
    let flagged = rows.iter().filter(|r| r.is_flagged()).count();
    if flagged > 0 {
        return Ok((
            ExitStatus::PartialScan,
            format!("{flagged} of {} rows flagged", rows.len()),
        ));
    }
    Ok((ExitStatus::Success, format!("{} rows", rows.len())))
}

fn run_analytic(cfg: &RunConfig, w: &mut Writer) -> Result<(ExitStatus, String)> {
    let r = analytic_row(cfg.alpha);
    let g = 1.0 - 2.0 * cfg.alpha;
    let z = zero_t_rates(g).ok();
    let mut t = Table::new(&[
        ("alpha", ""),
        ("tc1_closed", "T_K"),
        ("tc2_closed", "T_K"),
        ("tc2_linear", "T_K"),
        ("niba_ref", "T_K"),
        ("gamma1_star_t0", "T_K"),
        ("omega_t0", "T_K"),
        ("gamma2_star_t0", "T_K"),
    ]);
    t.push(vec![
        Cell::F(cfg.alpha),
        Cell::opt(r.tc1_closed),
        Cell::opt(r.tc2_closed),
        Cell::opt(r.tc2_linear),
        Cell::F(r.niba_ref),
        Cell::opt(z.map(|z| z.gamma1_star)),
        Cell::opt(z.map(|z| z.omega)),
        Cell::opt(z.map(|z| z.gamma2_star)),
    ]);
    t.emit(w, cfg, "analytic")?;
    if cfg.wants(Format::Gnuplot) {
        w.write("analytic_lines.csv", analytic_lines().csv().as_bytes())?;
        gnuplot(
            w,
            cfg,
            "analytic.gp",
            "set xlabel 'alpha'\nset ylabel 'T [T_K]'\n\
             plot 'analytic_lines.csv' every ::1 using 1:2 with lines title 'T_c1 closed form', \\\n     \
             '' every ::1 using 1:3 with lines title 'T_c2 closed form', \\\n     \
             '' every ::1 using 1:4 with lines title 'T_c2 linear in g', \\\n     \
             'analytic.csv' every ::1 using 1:2 with points pt 7 notitle, \\\n     \
             '' every ::1 using 1:3 with points pt 7 notitle\n",
        )?;
    }
    Ok((ExitStatus::Success, format!("alpha = {}", cfg.alpha)))
}

// SPDX-License-Identifier: Apache-2.0

//! Run configuration: one flat `key = value` schema shared by config files,
//! command-line flags and manifests.
//!
//! Resolution order is defaults, then the config file, then explicit
//! overrides. A manifest written by a previous run is accepted as a config
//! file, which is how runs are replayed.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::flow::AccuracySpec;
use crate::model::{ModelParams, DEFAULT_BANDWIDTH, MIN_BANDWIDTH};
use crate::phase::PhaseConfig;
use crate::spectral::{NewtonSpec, Rect, SearchSpec};
use crate::time_domain::QuadSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Flow,
    Map,
    Pt,
    Poles,
    Phase,
    Analytic,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Flow,
        Command::Map,
        Command::Pt,
        Command::Poles,
        Command::Phase,
        Command::Analytic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Flow => "flow",
            Command::Map => "map",
            Command::Pt => "pt",
            Command::Poles => "poles",
            Command::Phase => "phase",
            Command::Analytic => "analytic",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
    Gnuplot,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "gnuplot" => Ok(Format::Gnuplot),
            _ => Err(Error::Config(format!("unknown format '{s}' (csv, json, gnuplot)"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Gnuplot => "gnuplot",
        })
    }
}

/// Fully resolved settings of one run. Energies in `T_K`, times in `1/T_K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub alpha: f64,
    /// α grid of the `phase` command.
    pub alphas: Vec<f64>,
    pub temperature: f64,
    pub omega_c: f64,
    /// `x0 x1 y0 y1` of the residual map.
    pub rect: [f64; 4],
    pub grid: [usize; 2],
    pub tmax: f64,
    pub dt: f64,
    pub t_start: f64,
    pub e_max: f64,
    pub shift_fraction: f64,
    /// Column `Re E` and `Im E` range sampled by the `flow` command.
    pub flow_re: f64,
    pub flow_im_max: f64,
    pub flow_im_min: f64,
    pub flow_points: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub depth: f64,
    pub guard_radius: f64,
    pub singularities: usize,
    pub exclusion: f64,
    pub scan_step: f64,
    pub resolution: f64,
    pub tc1_bracket: [f64; 2],
    pub tc2_bracket: [f64; 2],
    pub out: PathBuf,
    pub format: Vec<Format>,
    /// Worker threads; 0 lets the pool decide. Never affects results.
    pub jobs: usize,
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        let acc = AccuracySpec::default();
        let search = SearchSpec::default();
        let quad = QuadSpec::default();
        let phase = PhaseConfig::default();
        Self {
            command,
            alpha: 0.45,
            alphas: vec![0.40, 0.43, 0.45, 0.48, 0.49, 0.55],
            temperature: 0.01,
            omega_c: DEFAULT_BANDWIDTH,
            rect: [-1.5, 1.5, -1.5, 0.0],
            grid: [64, 64],
            tmax: quad.t_max,
            dt: 0.01,
            t_start: 0.01,
            e_max: quad.e_max,
            shift_fraction: quad.shift_fraction,
            flow_re: 0.0,
            flow_im_max: 10.0,
            flow_im_min: 0.0,
            flow_points: 201,
            rel_tol: acc.rel,
            abs_tol: acc.abs,
            depth: acc.depth,
            guard_radius: acc.guard_radius,
            singularities: search.singularities,
            exclusion: search.exclusion,
            scan_step: phase.scan_step,
            resolution: phase.resolution,
            tc1_bracket: [phase.tc1_bracket.0, phase.tc1_bracket.1],
            tc2_bracket: [phase.tc2_bracket.0, phase.tc2_bracket.1],
            out: PathBuf::from("rtrg-out"),
            format: vec![Format::Csv, Format::Json, Format::Gnuplot],
            jobs: 0,
        }
    }

    /// Defaults, then `file` (flat config or manifest), then `overrides`.
    pub fn resolve(command: Command, file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut cfg = Self::defaults(command);
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            for (k, v) in parse_config_text(&text)? {
                cfg.set(&k, &v)?;
            }
            if cfg.command != command {
                return Err(Error::Config(format!(
                    "{} is a '{}' configuration, not '{command}'",
                    path.display(),
                    cfg.command
                )));
            }
        }
        for (k, v) in overrides {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Set one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "command" => self.command = v.parse()?,
            "alpha" => self.alpha = num(&key, v)?,
            "alphas" => self.alphas = list(&key, v)?,
            "temperature" => self.temperature = num(&key, v)?,
            "omega_c" => self.omega_c = num(&key, v)?,
            "rect" => self.rect = array(&key, v)?,
            "grid" => self.grid = array(&key, v)?,
            "tmax" => self.tmax = num(&key, v)?,
            "dt" => self.dt = num(&key, v)?,
            "t_start" => self.t_start = num(&key, v)?,
            "e_max" => self.e_max = num(&key, v)?,
            "shift_fraction" => self.shift_fraction = num(&key, v)?,
            "flow_re" => self.flow_re = num(&key, v)?,
            "flow_im_max" => self.flow_im_max = num(&key, v)?,
            "flow_im_min" => self.flow_im_min = num(&key, v)?,
            "flow_points" => self.flow_points = num(&key, v)?,
            "rel_tol" => self.rel_tol = num(&key, v)?,
            "abs_tol" => self.abs_tol = num(&key, v)?,
            "depth" => self.depth = num(&key, v)?,
            "guard_radius" => self.guard_radius = num(&key, v)?,
            "singularities" => self.singularities = num(&key, v)?,
            "exclusion" => self.exclusion = num(&key, v)?,
            "scan_step" => self.scan_step = num(&key, v)?,
            "resolution" => self.resolution = num(&key, v)?,
            "tc1_bracket" => self.tc1_bracket = array(&key, v)?,
            "tc2_bracket" => self.tc2_bracket = array(&key, v)?,
            "out" => self.out = PathBuf::from(v),
            "format" => self.format = list(&key, v)?,
            "jobs" => self.jobs = num(&key, v)?,
            _ => return Err(Error::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// The resolved configuration as ordered `key = value` pairs; feeding
    /// them back through [`RunConfig::set`] reproduces `self` exactly.
    pub fn to_pairs(&self) -> BTreeMap<String, String> {
        fn join<T: fmt::Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
        }
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("command", self.command.to_string());
        put("alpha", self.alpha.to_string());
        put("alphas", join(&self.alphas));
        put("temperature", self.temperature.to_string());
        put("omega_c", self.omega_c.to_string());
        put("rect", join(&self.rect));
        put("grid", join(&self.grid));
        put("tmax", self.tmax.to_string());
        put("dt", self.dt.to_string());
        put("t_start", self.t_start.to_string());
        put("e_max", self.e_max.to_string());
        put("shift_fraction", self.shift_fraction.to_string());
        put("flow_re", self.flow_re.to_string());
        put("flow_im_max", self.flow_im_max.to_string());
        put("flow_im_min", self.flow_im_min.to_string());
        put("flow_points", self.flow_points.to_string());
        put("rel_tol", self.rel_tol.to_string());
        put("abs_tol", self.abs_tol.to_string());
        put("depth", self.depth.to_string());
        put("guard_radius", self.guard_radius.to_string());
        put("singularities", self.singularities.to_string());
        put("exclusion", self.exclusion.to_string());
        put("scan_step", self.scan_step.to_string());
        put("resolution", self.resolution.to_string());
        put("tc1_bracket", join(&self.tc1_bracket));
        put("tc2_bracket", join(&self.tc2_bracket));
        put("out", self.out.display().to_string());
        put("format", join(&self.format));
        put("jobs", self.jobs.to_string());
        m
    }

    /// Flat text form, loadable with `--config`.
    pub fn to_config_text(&self) -> String {
        let mut s = String::from("# rtrg resolved configuration\n");
        for (k, v) in self.to_pairs() {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        let pos = |name: &str, v: f64| -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature must be >= 0, got {}", self.temperature));
        }
        if !(self.omega_c >= MIN_BANDWIDTH && self.omega_c.is_finite()) {
            return bad(format!("omega_c must be at least {MIN_BANDWIDTH}, got {}", self.omega_c));
        }
        if self.command == Command::Phase {
            if self.alphas.is_empty() {
                return bad("alphas must not be empty".into());
            }
            if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.3 && **a <= 0.55)) {
                return bad(format!("alphas must lie in (0.3, 0.55], got {a}"));
            }
        }
        Rect::new(self.rect[0], self.rect[1], self.rect[2], self.rect[3])?;
        if self.grid[0] < 16 || self.grid[1] < 16 {
            return bad(format!("grid must be at least 16 x 16, got {:?}", self.grid));
        }
        for (name, v) in [
            ("tmax", self.tmax),
            ("dt", self.dt),
            ("t_start", self.t_start),
            ("e_max", self.e_max),
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("depth", self.depth),
            ("guard_radius", self.guard_radius),
            ("exclusion", self.exclusion),
            ("scan_step", self.scan_step),
            ("resolution", self.resolution),
        ] {
            pos(name, v)?;
        }
        if self.t_start < 10.0 / self.omega_c || self.t_start >= self.tmax {
            return bad(format!(
                "t_start must lie in [10/omega_c, tmax), got {}",
                self.t_start
            ));
        }
        if !(self.shift_fraction > 0.0 && self.shift_fraction < 1.0) {
            return bad(format!("shift_fraction must lie in (0, 1), got {}", self.shift_fraction));
        }
        if self.flow_points < 2 || !(self.flow_im_max > self.flow_im_min) {
            return bad("flow column needs flow_points >= 2 and flow_im_max > flow_im_min".into());
        }
        if self.singularities == 0 {
            return bad("singularities must be at least 1".into());
        }
        for (name, b) in [("tc1_bracket", self.tc1_bracket), ("tc2_bracket", self.tc2_bracket)] {
            if !(b[0] > 0.0 && b[0] < b[1]) {
                return bad(format!("{name} needs 0 < lo < hi, got {b:?}"));
            }
        }
        if self.format.is_empty() {
            return bad("at least one output format is required".into());
        }
        Ok(())
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.alpha, self.temperature, self.omega_c)
    }

    pub fn accuracy(&self) -> AccuracySpec {
        AccuracySpec {
            rel: self.rel_tol,
            abs: self.abs_tol,
            depth: self.depth,
            guard_radius: self.guard_radius,
            ..AccuracySpec::default()
        }
    }

    pub fn search(&self) -> SearchSpec {
        SearchSpec {
            newton: NewtonSpec::default(),
            singularities: self.singularities,
            exclusion: self.exclusion,
        }
    }

    pub fn quad(&self) -> QuadSpec {
        QuadSpec {
            e_max: self.e_max,
            t_max: self.tmax,
            shift_fraction: self.shift_fraction,
            ..QuadSpec::default()
        }
    }

    pub fn phase(&self) -> PhaseConfig {
        PhaseConfig {
            tc1_bracket: (self.tc1_bracket[0], self.tc1_bracket[1]),
            tc2_bracket: (self.tc2_bracket[0], self.tc2_bracket[1]),
            scan_step: self.scan_step,
            resolution: self.resolution,
            omega_c: self.omega_c,
            tol: self.accuracy(),
            search: self.search(),
        }
    }

    pub fn wants(&self, f: Format) -> bool {
        self.format.contains(&f)
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("cannot parse {key} = '{v}'")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|_| Error::Config(format!("cannot parse element '{s}' of {key}")))
        })
        .collect()
}

fn array<T: FromStr + Copy, const N: usize>(key: &str, v: &str) -> Result<[T; N]> {
    let items: Vec<T> = list(key, v)?;
    items
        .try_into()
        .map_err(|items: Vec<T>| Error::Config(format!("{key} needs {N} values, got {}", items.len())))
}

/// Parse flat `key = value` text (`#` starts a comment), or the JSON
/// manifest of an earlier run, into key/value pairs.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    if text.trim_start().starts_with('{') {
        let v: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("manifest is not valid JSON: {e}")))?;
        let cfg = v
            .get("config")
            .and_then(|c| c.as_object())
            .ok_or_else(|| Error::Config("manifest has no 'config' object".into()))?;
        return cfg
            .iter()
            .map(|(k, v)| match v.as_str() {
                Some(s) => Ok((k.clone(), s.to_string())),
                None => Err(Error::Config(format!("manifest value of '{k}' is not a string"))),
            })
            .collect();
    }
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!("line {}: expected 'key = value', got '{raw}'", n + 1)));
        };
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_round_trip() {
        let mut cfg = RunConfig::defaults(Command::Map);
        cfg.alpha = 0.4321;
        cfg.rect = [-1.0, 1.0, -2.0, 0.1];
        cfg.rel_tol = 1.234e-10;
        let mut back = RunConfig::defaults(Command::Flow);
        for (k, v) in parse_config_text(&cfg.to_config_text()).unwrap() {
            back.set(&k, &v).unwrap();
        }
        assert_eq!(cfg, back);
    }

    #[test]
    fn parse_errors_are_config_errors() {
        assert!(matches!(parse_config_text("alpha 0.4"), Err(Error::Config(_))));
        let mut c = RunConfig::defaults(Command::Pt);
        assert!(c.set("nonsense", "1").is_err());
        assert!(c.set("grid", "16").is_err());
        assert!(c.set("alpha", "x").is_err());
        assert!(c.set("omega-c", "2e4").is_ok());
        assert_eq!(c.omega_c, 2e4);
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::defaults(Command::Pt);
        assert!(c.validate().is_ok());
        c.omega_c = 10.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::defaults(Command::Phase);
        c.alphas = vec![0.2];
        assert!(c.validate().is_err());
    }

    #[test]
    fn comments_and_blank_lines() {
        let pairs = parse_config_text("# header\n\nalpha = 0.4 # inline\nrect = -1 1 -1 0\n").unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[1].1, "-1 1 -1 0");
    }
}

// SPDX-License-Identifier: Apache-2.0

//! `rtrg`: command-line front end. All the work happens in the library;
//! this only turns flags into configuration overrides.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use rtrg_dynamics::cli::{run, ExitStatus};
use rtrg_dynamics::config::{Command, RunConfig};

#[derive(Parser)]
#[command(name = "rtrg", version, about = "Finite-temperature RTRG for the ohmic spin-boson model")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Flow of the rates along a vertical line in the complex plane
    Flow(Common),
    /// Cauchy-Riemann residual map over a rectangle
    Map(Common),
    /// Relaxation trace P(t) and its classification
    Pt(Common),
    /// Poles, singularities and regime at one temperature
    Poles(Common),
    /// Transition temperatures over a grid of couplings
    Phase(Common),
    /// Closed-form transition temperatures
    Analytic(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    alpha: Option<f64>,
    /// Coupling grid for `phase`, comma or space separated
    #[arg(long)]
    alphas: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long = "omega-c")]
    omega_c: Option<f64>,
    #[arg(long, num_args = 4, value_names = ["X0", "X1", "Y0", "Y1"], allow_negative_numbers = true)]
    rect: Option<Vec<f64>>,
    #[arg(long, num_args = 2, value_names = ["NX", "NY"])]
    grid: Option<Vec<usize>>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output formats: csv, json, gnuplot (comma separated)
    #[arg(long)]
    format: Option<String>,
    /// Worker threads, 0 for all cores
    #[arg(long)]
    jobs: Option<usize>,
    /// Flat `key = value` file or a previous run's manifest.json
    #[arg(long)]
    config: Option<PathBuf>,
    /// Any other configuration key, as KEY=VALUE
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn overrides(&self) -> Result<Vec<(String, String)>, String> {
        let mut o: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| o.push((k.to_string(), v));
        let join = |v: &[String]| v.join(" ");
        if let Some(v) = self.alpha {
            put("alpha", v.to_string());
        }
        if let Some(v) = &self.alphas {
            put("alphas", v.clone());
        }
        if let Some(v) = self.temperature {
            put("temperature", v.to_string());
        }
        if let Some(v) = self.omega_c {
            put("omega_c", v.to_string());
        }
        if let Some(v) = &self.rect {
            put("rect", join(&v.iter().map(f64::to_string).collect::<Vec<_>>()));
        }
        if let Some(v) = &self.grid {
            put("grid", join(&v.iter().map(usize::to_string).collect::<Vec<_>>()));
        }
        if let Some(v) = self.tmax {
            put("tmax", v.to_string());
        }
        if let Some(v) = &self.out {
            put("out", v.display().to_string());
        }
        if let Some(v) = &self.format {
            put("format", v.clone());
        }
        if let Some(v) = self.jobs {
            put("jobs", v.to_string());
        }
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| format!("--set expects KEY=VALUE, got '{s}'"))?;
            put(k.trim(), v.trim().to_string());
        }
        Ok(o)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match &cli.command {
        Sub::Flow(a) => (Command::Flow, a),
        Sub::Map(a) => (Command::Map, a),
        Sub::Pt(a) => (Command::Pt, a),
        Sub::Poles(a) => (Command::Poles, a),
        Sub::Phase(a) => (Command::Phase, a),
        Sub::Analytic(a) => (Command::Analytic, a),
    };
    let config_error = |msg: String| {
        eprintln!("rtrg: configuration error: {msg}");
        ExitCode::from(ExitStatus::ConfigError.code() as u8)
    };
    let overrides = match args.overrides() {
        Ok(o) => o,
        Err(e) => return config_error(e),
    };
    let cfg = match RunConfig::resolve(command, args.config.as_deref(), &overrides) {
        Ok(c) => c,
        Err(e) => return config_error(e.to_string()),
    };
    let outcome = run(&cfg);
    match outcome.status {
        ExitStatus::Success => eprintln!("rtrg {command}: {} -> {}", outcome.message, outcome.out.display()),
        s => eprintln!("rtrg {command}: {:?}: {}", s, outcome.message),
    }
    ExitCode::from(outcome.status.code() as u8)
}

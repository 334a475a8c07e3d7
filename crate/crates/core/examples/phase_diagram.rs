// SPDX-License-Identifier: Apache-2.0

//! Numerical transition temperatures against the closed-form estimates.
//!
//! cargo run --release --example phase_diagram -- [alpha ...]

use rtrg_dynamics::phase::{scan_phase_diagram, PhaseConfig};

fn main() -> rtrg_dynamics::Result<()> {
    let mut alphas: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("alpha")).collect();
    if alphas.is_empty() {
        alphas = vec![0.40, 0.45, 0.49, 0.55];
    }
    let rows = scan_phase_diagram(&alphas, &PhaseConfig::default())?;
    let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    println!("{:>6} {:>9} {:>9} {:>9} {:>9}  flags", "alpha", "Tc1 num", "Tc1 cf", "Tc2 num", "Tc2 cf");
    for r in rows {
        println!(
            "{:>6} {:>9} {:>9} {:>9} {:>9}  {}",
            r.alpha,
            show(r.tc1_numeric),
            show(r.tc1_analytic),
            show(r.tc2_numeric),
            show(r.tc2_analytic),
            r.flags.join("; ")
        );
    }
    Ok(())
}

// SPDX-License-Identifier: Apache-2.0

//! Integrates the RG flow down the imaginary axis and compares Γ₁ with the
//! low-temperature closed form.
//!
//! cargo run --release --example rg_flow -- [alpha] [temperature]

use num_complex::Complex64;
use rtrg_dynamics::analytic::gamma1_closed_form;
use rtrg_dynamics::flow::{propagator, AccuracySpec, FlowSolver};
use rtrg_dynamics::ModelParams;

fn main() -> rtrg_dynamics::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>().expect("numeric argument"));
    let alpha = args.next().unwrap_or(0.45);
    let t = args.next().unwrap_or(0.05);
    let params = ModelParams::with_default_bandwidth(alpha, t)?;
    println!(
        "alpha = {alpha}, T = {t}, omega_c = {}, initial rate = {:.4e}",
        params.bandwidth(),
        params.initial_rate()
    );
    let solver = FlowSolver::new(params, AccuracySpec::default());
    let ys: Vec<f64> = (0..=10).map(|k| 10.0 - k as f64).collect();
    println!("{:>6} {:>26} {:>14} {:>12}", "Im E", "Gamma1", "closed form", "|Pi1|");
    for (y, r) in ys.iter().zip(solver.sample_column(0.0, &ys)) {
        let e = Complex64::new(0.0, *y);
        match r {
            Ok(r) => {
                let closed = gamma1_closed_form(e, r.gamma2, &params)?;
                let pi = propagator(e, 1, &r)?;
                println!("{y:>6.1} {:>26.10} {:>14.10} {:>12.6}", r.gamma1, closed.re, pi.norm());
            }
            Err(err) => println!("{y:>6.1} failed: {err}"),
        }
    }
    Ok(())
}

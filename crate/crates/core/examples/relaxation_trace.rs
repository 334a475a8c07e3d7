// SPDX-License-Identifier: Apache-2.0

//! P(t) by inverse Laplace transform, with its zeros and the regime they
//! imply next to the spectral classification.
//!
//! cargo run --release --example relaxation_trace -- [alpha] [temperature]

use rtrg_dynamics::flow::AccuracySpec;
use rtrg_dynamics::spectral::{analyze, SearchSpec};
use rtrg_dynamics::time_domain::{classify_from_trace, fitted_decay_rate, invert_laplace, uniform_times, QuadSpec};
use rtrg_dynamics::ModelParams;

fn main() -> rtrg_dynamics::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>().expect("numeric argument"));
    let alpha = args.next().unwrap_or(0.45);
    let t = args.next().unwrap_or(0.3);
    let params = ModelParams::with_default_bandwidth(alpha, t)?;
    let tol = AccuracySpec::default();
    let features = analyze(&params, &tol, &SearchSpec::default(), None)?;

    let quad = QuadSpec::default();
    let trace = invert_laplace(&params, &uniform_times(0.01, quad.t_max, 0.01), &quad, &tol)?;
    for k in (0..trace.len()).step_by(250) {
        println!("t = {:>6.2}  P = {:>+.6e}  noise = {:.1e}", trace.times[k], trace.values[k], trace.noise[k]);
    }
    let verdict = classify_from_trace(&trace, 0.01)?;
    println!("zeros: {:?}", verdict.zeros.iter().map(|z| format!("{z:.2}")).collect::<Vec<_>>());
    println!("horizon {:.1}, fitted rate {:?}", verdict.horizon, fitted_decay_rate(&trace, 0.2).ok());
    println!(
        "time domain: {}, spectral: {}",
        verdict.regime.map_or("inconclusive".into(), |r| r.to_string()),
        features.regime
    );
    Ok(())
}

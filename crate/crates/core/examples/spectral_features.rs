// SPDX-License-Identifier: Apache-2.0

//! Poles, essential singularities and dynamical regime across temperature.
//!
//! cargo run --release --example spectral_features -- [alpha]

use rtrg_dynamics::flow::AccuracySpec;
use rtrg_dynamics::spectral::{analyze, SearchSpec};
use rtrg_dynamics::ModelParams;

fn main() -> rtrg_dynamics::Result<()> {
    let alpha: f64 = std::env::args().nth(1).map_or(0.45, |a| a.parse().expect("alpha"));
    let (tol, spec) = (AccuracySpec::default(), SearchSpec::default());
    let mut hint = None;
    for t in [0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6] {
        let f = analyze(&ModelParams::with_default_bandwidth(alpha, t)?, &tol, &spec, hint)?;
        hint = f.leading_pole().map(|p| p.z);
        let pole = f
            .leading_pole()
            .map_or("none".into(), |p| format!("{:.4} - {:.4}i", p.omega, p.decay));
        let sing: Vec<String> = f.imag_singularities.iter().take(3).map(|g| format!("{g:.3}")).collect();
        println!(
            "T = {t:<5} pole {pole:<18} singularities [{}]  {}{}",
            sing.join(", "),
            f.regime,
            if f.boundary { " (boundary)" } else { "" }
        );
    }
    Ok(())
}

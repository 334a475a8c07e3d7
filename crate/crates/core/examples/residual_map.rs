// SPDX-License-Identifier: Apache-2.0

//! Cauchy-Riemann residual of Π₁ on a grid. The residual vanishes where Π₁
//! is analytic, so its row maxima peak at the level of each pole and
//! singularity.
//!
//! cargo run --release --example residual_map -- [alpha] [temperature]

use rtrg_dynamics::flow::AccuracySpec;
use rtrg_dynamics::spectral::{analyze, cr_residual_map, Cell, Rect, SearchSpec};
use rtrg_dynamics::ModelParams;

fn main() -> rtrg_dynamics::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<f64>().expect("numeric argument"));
    let alpha = args.next().unwrap_or(0.45);
    let t = args.next().unwrap_or(0.0);
    let params = ModelParams::with_default_bandwidth(alpha, t)?;
    let tol = AccuracySpec::default();
    let f = analyze(&params, &tol, &SearchSpec::default(), None)?;
    println!(
        "pole {:?}, singularities {:?}",
        f.leading_pole().map(|p| p.z),
        f.imag_singularities
    );

    let map = cr_residual_map(&params, &tol, Rect::new(-1.5, 1.5, -1.5, 0.0)?, (61, 61), &[])?;
    println!("{} of {} points failed", map.failed(), map.cells.len());
    for j in (0..map.ny()).rev().step_by(2) {
        let row_max = (0..map.nx())
            .filter_map(|i| match map.get(i, j) {
                Cell::Value(v) => Some(v),
                _ => None,
            })
            .fold(0.0, f64::max);
        let bar = "#".repeat((row_max.log10() + 4.0).clamp(0.0, 60.0) as usize * 3);
        println!("Im E = {:>6.3}  {row_max:9.2e} {bar}", map.ys[j]);
    }
    Ok(())
}

// SPDX-License-Identifier: Apache-2.0

//! Closed-form transition temperatures and zero-temperature rates.
//!
//! cargo run --example analytic_estimates

use rtrg_dynamics::analytic::{analytic_row, zero_t_rates};

fn main() {
    let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    println!("{:>6} {:>8} {:>8} {:>8} {:>8}   zero-T pole", "alpha", "Tc1", "Tc2", "Tc2 lin", "NIBA");
    for alpha in [0.40, 0.43, 0.45, 0.48, 0.49, 0.499, 0.5, 0.55] {
        let r = analytic_row(alpha);
        let pole = zero_t_rates(1.0 - 2.0 * alpha)
            .map(|z| format!("{:.4}", z.pole()))
            .unwrap_or_else(|_| "-".into());
        println!(
            "{alpha:>6} {:>8} {:>8} {:>8} {:>8.4}   {pole}",
            show(r.tc1_closed),
            show(r.tc2_closed),
            show(r.tc2_linear),
            r.niba_ref
        );
    }
}

// SPDX-License-Identifier: Apache-2.0

//! Drives a run from configuration text, then replays it from its manifest
//! and checks that the CSV checksums agree.
//!
//! cargo run --release --example run_manifest

use rtrg_dynamics::cli::run;
use rtrg_dynamics::config::{parse_config_text, Command, RunConfig};

fn main() -> rtrg_dynamics::Result<()> {
    let dir = std::env::temp_dir().join(format!("rtrg-example-{}", std::process::id()));
    let text = format!(
        "# relaxation at alpha = 0.45\nalpha = 0.45\ntemperature = 0.3\ntmax = 30\nout = {}\n",
        dir.join("first").display()
    );
    let pairs = parse_config_text(&text)?;
    let first = run(&RunConfig::resolve(Command::Pt, None, &pairs)?);
    println!("first run: {:?}, {}", first.status, first.message);

    let replay_cfg = RunConfig::resolve(
        Command::Pt,
        Some(&dir.join("first/manifest.json")),
        &[("out".into(), dir.join("replay").display().to_string())],
    )?;
    let replay = run(&replay_cfg);
    for (a, b) in first.artifacts.iter().zip(&replay.artifacts) {
        if a.path.ends_with(".csv") {
            let same = if a.sha256 == b.sha256 { "identical" } else { "DIFFERENT" };
            println!("{:<20} {}  {same}", a.path, &a.sha256[..16]);
        }
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

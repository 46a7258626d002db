//! Success grid of the scripted policy over rail yaw (±8° in 2° steps),
//! mount position and lateral offset, exported as CSV and a PGM heatmap.
//!
//! `cargo run --release --example evaluate_grid -- [out_dir]`

use std::path::PathBuf;

use snapfit::commands::{cmd_evaluate, RunContext};
use snapfit::scenario::Scenario;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "out/grid".into()).into();
    let ctx = RunContext::new(Scenario::default_scenario(), 0, &out);
    let (manifest, grid) = cmd_evaluate(&ctx, None)?;
    println!("yaw \\ mount {:?}", grid.spec.mount_mm);
    for (yaw, row) in grid.spec.yaw_deg.iter().zip(grid.success_matrix()) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.2}")).collect();
        println!("{yaw:>5.1}°  {}", cells.join("  "));
    }
    println!("core-area success {:.3}", grid.core_rate());
    for f in manifest.outputs {
        println!("wrote {}", f.path.display());
    }
    Ok(())
}

//! Compares the analytic model with the slide, one-hinge and two-hinge
//! lumped models on the same scripted assembly.
//!
//! `cargo run --release --example model_compare`

use snapfit::commands::summarize;
use snapfit::skills::nominal_trace;
use snapfit::world::{JoiningModel, WorldConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:<10} {:>10} {:>6} {:>10} {:>8}", "model", "peak F_Q", "tick", "peak F_J", "snap-in");
    for model in JoiningModel::ALL {
        let start = std::time::Instant::now();
        let (rows, info) = nominal_trace(&WorldConfig::default().with_model(model))?;
        let s = summarize(model, &rows, info.success);
        println!(
            "{:<10} {:>10.3} {:>6} {:>10.3} {:>8?}  ({:.1} ms)",
            s.variant,
            s.peak_lateral_n,
            s.peak_lateral_step,
            s.peak_joining_n,
            s.snap_in_step,
            start.elapsed().as_secs_f64() * 1e3
        );
    }
    Ok(())
}

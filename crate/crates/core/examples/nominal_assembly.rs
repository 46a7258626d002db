//! Runs the terminal macro skill with hand-tuned parameters on the nominal
//! rail and prints each sub-skill's stop reason plus the snap-in forces.
//!
//! `cargo run --release --example nominal_assembly [analytic|slide|one_hinge|two_hinge]`

use snapfit::skills::nominal_trace;
use snapfit::world::{JoiningModel, WorldConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let model: JoiningModel = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(JoiningModel::Analytic);
    let cfg = WorldConfig::default().with_model(model);
    let (rows, info) = nominal_trace(&cfg)?;
    for (skill, stop) in &info.sub_skills {
        println!("{:<9} -> {}", skill.name(), stop.name());
    }
    println!("success: {}, control ticks: {}", info.success, rows.len());
    let (i, peak) = rows.iter().enumerate().fold((0, 0.0), |acc, (i, r)| if r.lateral > acc.1 { (i, r.lateral) } else { acc });
    let latch = rows.iter().position(|r| r.latched);
    println!("peak lateral force {peak:.3} N at tick {i}, latched at tick {latch:?}");
    let fj = rows.iter().map(|r| r.joining).fold(0.0, f64::max);
    println!("peak joining force {fj:.3} N");
    Ok(())
}

//! Required beam deflection along the head for the three contour classes:
//! rise then immediate drop (I), plateau then drop (II), plateau then ramp
//! (III).
//!
//! `cargo run --release --example contour_shapes`

use snapfit::geometry::{head_contour, max_deflection, ContourClass};
use snapfit::world::WorldConfig;

fn main() {
    let base = WorldConfig::default().hook;
    for contour in [ContourClass::I, ContourClass::II, ContourClass::III] {
        let hook = snapfit::geometry::SnapHookProfile { contour, ..base };
        let (f_max, leaves_deflected) = max_deflection(&hook);
        println!(
            "class {contour:?}: head length {:.2} mm, f_max {:.2} mm, residual deflection {leaves_deflected}",
            hook.head_length() * 1e3,
            f_max * 1e3
        );
        let n = 24;
        let line: Vec<String> = (0..=n)
            .map(|i| {
                let x = hook.head_length() * 1.05 * i as f64 / n as f64;
                format!("{:.2}", head_contour(&hook, x) * 1e3)
            })
            .collect();
        println!("  contour [mm]: {}", line.join(" "));
    }
}

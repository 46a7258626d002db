//! Analytic cantilever snap-hook forces: area moment, lateral force with and
//! without the one-half correction, beam inclination and joining force over
//! a deflection sweep.
//!
//! `cargo run --release --example beam_forces`

use snapfit::beam::{area_moment, inclination_angle, joining_force, lateral_force, BeamParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (l, b, h) = (8e-3, 5e-3, 1.3e-3);
    let alpha = 30f64.to_radians();
    let i = area_moment(b, h)?;
    let params = BeamParams::new(1.2e9, i, 0.2);
    println!("I = {:.4e} m^4, EI = {:.4e} N m^2", i, params.rigidity());
    println!("{:>8} {:>10} {:>10} {:>9} {:>10}", "f [mm]", "F_Q [N]", "F_Q/2 [N]", "γ [deg]", "F_J [N]");
    for k in 0..=10 {
        let f = k as f64 * 0.1e-3;
        let raw = lateral_force(f, l, &params, false)?;
        let corrected = lateral_force(f, l, &params, true)?;
        let gamma = inclination_angle(f, l)?;
        let fj = joining_force(raw, alpha, gamma, params.friction)?;
        println!(
            "{:>8.2} {:>10.4} {:>10.4} {:>9.3} {:>10.4}",
            f * 1e3,
            raw,
            corrected,
            gamma.to_degrees(),
            fj
        );
    }
    // Steep contact plus friction can self-lock: the relation has no finite force.
    match joining_force(1.0, 80f64.to_radians(), 0.05, 0.3) {
        Ok(v) => println!("80° ramp: F_J = {v:.3} N"),
        Err(e) => println!("80° ramp: {e}"),
    }
    Ok(())
}

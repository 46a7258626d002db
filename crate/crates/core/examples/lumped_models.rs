//! Lumped mass-spring-damper beam models: stiffness of each sub-model,
//! critically damped step response and static agreement with the analytic
//! tip stiffness.
//!
//! `cargo run --release --example lumped_models`

use snapfit::lumped::{build, LumpedConfig, LumpedVariant};
use snapfit::world::WorldConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = WorldConfig::default();
    let beam = cfg.effective_beam();
    let k_tip = 3.0 * beam.rigidity() / cfg.hook.beam_length.powi(3);
    println!("analytic tip stiffness {k_tip:.2} N/m");
    for variant in [LumpedVariant::Slide, LumpedVariant::OneHinge, LumpedVariant::TwoHinge] {
        let mut m = build(variant, &cfg.hook, &beam, &LumpedConfig::default())?;
        for (i, s) in m.submodels.iter().enumerate() {
            println!(
                "{variant:?} dof {i}: inertia {:.3e}, stiffness {:.4e}, damping {:.3e}",
                s.inertia, s.stiffness, s.damping
            );
        }
        let load = 0.5;
        let mut peak: f64 = 0.0;
        for _ in 0..20_000 {
            m.step_under_load(load, 1e-4)?;
            peak = peak.max(m.tip().displacement);
        }
        let settled = m.tip().displacement;
        println!(
            "  load {load} N: tip {:.4} mm (linear {:.4} mm), overshoot {:.3}%",
            settled * 1e3,
            load / k_tip * 1e3,
            (peak / settled - 1.0) * 100.0
        );
    }
    Ok(())
}

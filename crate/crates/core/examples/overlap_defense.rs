//! Coarse control periods let the head tunnel through the rail lip in one
//! tick; the overlap monitor flags the jump and the reward is penalized.
//!
//! `cargo run --release --example overlap_defense`

use snapfit::skills::{encode_action, nominal_terminal, SkillChoice, SkillEnv, SkillRanges};
use snapfit::world::{RandomizationConfig, WorldConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for period in [2e-3, 10e-3, 50e-3] {
        let mut cfg = WorldConfig::default();
        cfg.randomization = RandomizationConfig::disabled();
        cfg.control.period = period;
        let ranges = SkillRanges::default();
        let mut env = SkillEnv::new(cfg.clone(), ranges.clone(), 0)?;
        env.reset(Some(0))?;
        let mut t = nominal_terminal(&cfg);
        t.pivot.rate = 0.5;
        let out = env.step(&encode_action(&SkillChoice::Terminal(t), &ranges)?)?;
        let jump = env
            .world
            .state
            .overlap_history
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .fold(0.0, f64::max);
        println!(
            "period {:>4.0} ms: largest overlap jump {:.3} mm, flagged {}, reward {:.3}",
            period * 1e3,
            jump * 1e3,
            out.info.overlap_flagged,
            out.reward
        );
    }
    Ok(())
}

//! Gym-style loop over the skill environment: reset on a randomized rail,
//! step with the scripted policy, read rewards and step info.
//!
//! `cargo run --release --example skill_env`

use snapfit::skills::{scripted_action, SkillEnv, SkillRanges};
use snapfit::world::WorldConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = WorldConfig::default();
    let ranges = SkillRanges::default();
    let mut env = SkillEnv::new(cfg.clone(), ranges.clone(), 42)?;
    let (mut successes, mut skills) = (0, 0);
    let episodes = 20;
    for ep in 0..episodes {
        let mut obs = env.reset(None)?;
        let rail = env.world.state.rail;
        loop {
            let out = env.step(&scripted_action(&obs, &cfg, &ranges))?;
            obs = out.observation;
            if out.done || out.truncated {
                println!(
                    "episode {ep:2}: dx {:+.2} mm, yaw {:+.2}° -> success {} in {} skill(s), last reward {:.3}",
                    rail.dx * 1e3,
                    rail.yaw.to_degrees(),
                    out.info.success,
                    out.info.skills_used,
                    out.reward
                );
                successes += out.info.success as usize;
                skills += out.info.skills_used;
                break;
            }
        }
    }
    println!("success rate {:.2}, mean skills {:.2}", successes as f64 / episodes as f64, skills as f64 / episodes as f64);
    Ok(())
}

//! Trains a SAC or TD3 agent on the randomized skill environment and
//! evaluates it on the yaw/mount grid.
//!
//! `cargo run --release --example train -- [sac|td3] [steps] [seed]`

use snapfit::rl::{evaluate_grid, train, AgentPolicy, Algorithm, GridSpec, TrainConfig};
use snapfit::skills::SkillRanges;
use snapfit::world::WorldConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SNAPFIT_LOG", "info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let algorithm: Algorithm = args.first().map(|s| s.parse()).transpose()?.unwrap_or(Algorithm::Sac);
    let steps: usize = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(30_000);
    let seed: u64 = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(0);

    let cfg = TrainConfig {
        algorithm,
        total_steps: steps,
        eval_period: 1_000.min(steps.max(1)),
        seed,
        ..TrainConfig::default()
    };
    let world = WorldConfig::default();
    let ranges = SkillRanges::default();
    let start = std::time::Instant::now();
    let out = train(&cfg, &world, &ranges, None)?;
    println!("trained {steps} skills in {:.1} s ({} episodes)", start.elapsed().as_secs_f64(), out.episodes);
    for row in &out.curve {
        println!("{:>6} return {:>7.3} success {:.2} skills {:.2}", row.step, row.avg_return, row.success_rate, row.mean_skills);
    }

    let policy = AgentPolicy {
        agent: &out.agent,
        scale: cfg.obs_scale,
    };
    let grid = evaluate_grid(&policy, &world, &ranges, &GridSpec::default())?;
    println!("yaw \\ mount  {:?}", grid.spec.mount_mm);
    for (yaw, row) in grid.spec.yaw_deg.iter().zip(grid.success_matrix()) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.2}")).collect();
        println!("{yaw:>5.1}°  {}", cells.join("  "));
    }
    println!("core-area success {:.3}", grid.core_rate());
    Ok(())
}

//! Training loop: one environment step per skill execution, periodic frozen
//! evaluations and checkpoints.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::buffer::{ReplayBuffer, Transition};
use super::checkpoint::{save_checkpoint, CheckpointMeta, CHECKPOINT_VERSION};
use super::env::{ObsScale, RlEnv};
use super::eval::{evaluate_policy, AgentPolicy, EvalSummary};
use super::{Agent, Algorithm, RlError};
use crate::skills::{SkillEnv, SkillRanges, ACTION_DIM};
use crate::world::{Observation, WorldConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    /// Total skill executions.
    pub total_steps: usize,
    pub eval_period: usize,
    pub eval_rollouts: usize,
    /// Independent training runs for multi-seed protocols.
    pub seeds: usize,
    pub seed: u64,
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub buffer_size: usize,
    pub batch_size: usize,
    /// Uniformly random actions before learning begins.
    pub learning_starts: usize,
    pub updates_per_step: usize,
    pub hidden: Vec<usize>,
    /// Initial SAC temperature.
    pub init_alpha: f64,
    pub obs_scale: ObsScale,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algorithm: Algorithm::Sac,
            total_steps: 100_000,
            eval_period: 1_000,
            eval_rollouts: 100,
            seeds: 5,
            seed: 0,
            gamma: 0.99,
            tau: 0.005,
            lr: 3e-4,
            buffer_size: 100_000,
            batch_size: 256,
            learning_starts: 1_000,
            updates_per_step: 1,
            hidden: vec![64, 64],
            init_alpha: 1.0,
            obs_scale: ObsScale::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        let positive = [
            ("eval_period", self.eval_period),
            ("eval_rollouts", self.eval_rollouts),
            ("seeds", self.seeds),
            ("buffer_size", self.buffer_size),
            ("batch_size", self.batch_size),
            ("updates_per_step", self.updates_per_step),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(RlError::Config(format!("{name} must be positive")));
            }
        }
        if self.total_steps > 0 && self.eval_period > self.total_steps {
            return Err(RlError::Config(format!(
                "eval_period {} exceeds total_steps {}",
                self.eval_period, self.total_steps
            )));
        }
        let rates = [("gamma", self.gamma), ("tau", self.tau), ("lr", self.lr), ("init_alpha", self.init_alpha)];
        for (name, v) in rates {
            if !(v.is_finite() && v > 0.0) {
                return Err(RlError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.gamma >= 1.0 || self.tau > 1.0 {
            return Err(RlError::Config("gamma must be < 1 and tau <= 1".into()));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(RlError::Config("hidden layer sizes must be positive".into()));
        }
        let s = &self.obs_scale;
        if ![s.position, s.force, s.moment[0], s.moment[1], s.moment[2]].iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(RlError::Config("observation scales must be positive".into()));
        }
        Ok(())
    }
}

/// One point of the learning curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub step: usize,
    pub avg_return: f64,
    pub success_rate: f64,
    pub mean_skills: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: Agent,
    pub curve: Vec<CurveRow>,
    pub last_eval: Option<EvalSummary>,
    pub episodes: usize,
    pub checkpoint: Option<PathBuf>,
}

/// Seed of the `k`-th independent random stream of a run.
fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Fixed seed of the evaluation episode set, shared by all evaluations.
pub fn eval_seed(seed: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x5EED)
}

pub fn checkpoint_meta(agent: &Agent, cfg: &TrainConfig, step: usize) -> CheckpointMeta {
    CheckpointMeta {
        format_version: CHECKPOINT_VERSION,
        algorithm: agent.algorithm(),
        seed: cfg.seed,
        step,
        obs_dim: Observation::DIM,
        act_dim: ACTION_DIM,
        hidden: cfg.hidden.clone(),
        log_alpha: agent.log_alpha(),
        obs_scale: cfg.obs_scale,
    }
}

fn write_curve(path: &Path, curve: &[CurveRow]) -> Result<(), RlError> {
    let mut w = csv::Writer::from_path(path)?;
    for row in curve {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Trains one agent. With `out` set, writes `curve.csv`, the final
/// checkpoint `policy.sfs` and, on divergence, `diverged.sfs` holding the
/// last healthy weights.
pub fn train(cfg: &TrainConfig, world: &WorldConfig, ranges: &SkillRanges, out: Option<&Path>) -> Result<TrainOutcome, RlError> {
    cfg.validate()?;
    world.validate().map_err(|e| RlError::Config(e.to_string()))?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    let mut init_rng = stream(cfg.seed, 0);
    let mut act_rng = stream(cfg.seed, 1);
    let mut upd_rng = stream(cfg.seed, 2);
    let mut agent = Agent::new(cfg.algorithm, Observation::DIM, ACTION_DIM, cfg, &mut init_rng);
    let mut env = RlEnv::new(SkillEnv::new(world.clone(), ranges.clone(), cfg.seed)?, cfg.obs_scale);
    let mut buffer = ReplayBuffer::new(cfg.buffer_size, Observation::DIM, ACTION_DIM);
    let mut curve = Vec::new();
    let mut last_eval = None;
    let mut episodes = 0;

    let mut obs = if cfg.total_steps > 0 { env.reset(None)? } else { Vec::new() };
    for step in 1..=cfg.total_steps {
        let action: Vec<f64> = if step <= cfg.learning_starts {
            (0..ACTION_DIM).map(|_| act_rng.gen_range(-1.0..=1.0)).collect()
        } else {
            agent.act(&obs, false, &mut act_rng)
        };
        let (next, outcome) = env.step(&action)?;
        buffer.push(&Transition {
            obs: obs.clone(),
            action,
            reward: outcome.reward,
            next_obs: next.clone(),
            done: outcome.done,
            truncated: outcome.truncated,
        });
        obs = if outcome.done || outcome.truncated {
            episodes += 1;
            env.reset(None)?
        } else {
            next
        };

        if step > cfg.learning_starts && buffer.len() >= cfg.batch_size {
            for _ in 0..cfg.updates_per_step {
                let batch = buffer.sample(cfg.batch_size, &mut upd_rng);
                if let Err(e) = agent.update(&batch, &mut upd_rng) {
                    log::error!("step {step}: {e}");
                    if let Some(dir) = out {
                        // Updates are applied only after the finiteness check,
                        // so the agent still holds the last healthy weights.
                        save_checkpoint(&dir.join("diverged.sfs"), &agent, &checkpoint_meta(&agent, cfg, step))?;
                        std::fs::write(dir.join("divergence.txt"), format!("step {step}\n{e}\n"))?;
                        write_curve(&dir.join("curve.csv"), &curve)?;
                    }
                    return Err(RlError::Divergence(format!("step {step}: {e}")));
                }
            }
        }

        if step % cfg.eval_period == 0 {
            let policy = AgentPolicy {
                agent: &agent,
                scale: cfg.obs_scale,
            };
            let s = evaluate_policy(&policy, world, ranges, eval_seed(cfg.seed), cfg.eval_rollouts)?;
            log::info!(
                "{} step {step}: return {:.3}, success {:.2}, skills {:.2}",
                cfg.algorithm,
                s.avg_return,
                s.success_rate,
                s.mean_skills
            );
            curve.push(CurveRow {
                step,
                avg_return: s.avg_return,
                success_rate: s.success_rate,
                mean_skills: s.mean_skills,
            });
            last_eval = Some(s);
            if let Some(dir) = out {
                write_curve(&dir.join("curve.csv"), &curve)?;
            }
        }
    }

    let checkpoint = match out {
        Some(dir) => {
            write_curve(&dir.join("curve.csv"), &curve)?;
            let path = dir.join("policy.sfs");
            save_checkpoint(&path, &agent, &checkpoint_meta(&agent, cfg, cfg.total_steps))?;
            Some(path)
        }
        None => None,
    };
    Ok(TrainOutcome {
        agent,
        curve,
        last_eval,
        episodes,
        checkpoint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::RandomizationConfig;

    fn small(alg: Algorithm) -> TrainConfig {
        TrainConfig {
            algorithm: alg,
            total_steps: 60,
            eval_period: 30,
            eval_rollouts: 4,
            batch_size: 16,
            learning_starts: 20,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_steps_gives_empty_curve_and_initial_checkpoint() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = TrainConfig {
            total_steps: 0,
            ..TrainConfig::default()
        };
        let out = train(&cfg, &WorldConfig::default(), &SkillRanges::default(), Some(dir.path())).unwrap();
        assert!(out.curve.is_empty());
        let path = out.checkpoint.unwrap();
        assert!(path.exists());
        let (agent, meta) = super::super::load_checkpoint(&path).unwrap();
        assert_eq!(meta.step, 0);
        assert_eq!(agent.networks()[0].1, out.agent.networks()[0].1);
    }

    #[test]
    fn identical_seeds_give_identical_curves() {
        let world = WorldConfig::default();
        for alg in [Algorithm::Sac, Algorithm::Td3] {
            let a = train(&small(alg), &world, &SkillRanges::default(), None).unwrap();
            let b = train(&small(alg), &world, &SkillRanges::default(), None).unwrap();
            assert_eq!(a.curve.len(), 2);
            assert_eq!(a.curve, b.curve);
            assert_eq!(a.agent.networks()[0].1, b.agent.networks()[0].1);
        }
    }

    #[test]
    fn curve_fields_stay_in_range() {
        let mut world = WorldConfig::default();
        world.randomization = RandomizationConfig::disabled();
        let out = train(&small(Algorithm::Sac), &world, &SkillRanges::default(), None).unwrap();
        for row in out.curve {
            assert!(row.avg_return <= 0.0);
            assert!((1.0..=6.0).contains(&row.mean_skills));
            assert!((0.0..=1.0).contains(&row.success_rate));
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            TrainConfig {
                eval_period: 0,
                ..TrainConfig::default()
            },
            TrainConfig {
                total_steps: 10,
                eval_period: 100,
                ..TrainConfig::default()
            },
            TrainConfig {
                gamma: 1.5,
                ..TrainConfig::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}

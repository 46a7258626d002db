//! Episode sequencing: one environment step executes one (macro) skill.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    decode_action, encode_action, exec_skill, Action, LogRow, ApproachParams, LinParams, PivotParams, SkillChoice, SkillError,
    SkillKind, SkillLog, SkillParams, SkillRanges, SlideParams, StopReason, TerminalParams,
};
use crate::geometry::overlap_discontinuity;
use crate::world::{randomize, Observation, RailPlacement, World, WorldConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub skill: SkillKind,
    /// Stop reason of the last executed sub-skill.
    pub stop_reason: StopReason,
    pub skills_used: usize,
    pub success: bool,
    pub overlap_flagged: bool,
    pub force_limit: bool,
    pub sub_skills: Vec<(SkillKind, StopReason)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    /// Episode ended by success or force limit.
    pub done: bool,
    /// Episode ended because the skill budget ran out.
    pub truncated: bool,
    pub info: StepInfo,
}

/// Skill environment over one world instance with its own random source.
#[derive(Debug, Clone)]
pub struct SkillEnv {
    pub world: World,
    pub ranges: SkillRanges,
    rng: ChaCha8Rng,
    finished: bool,
    skills_used: usize,
    /// Keep per-tick logs of executed skills.
    pub record: bool,
    pub logs: Vec<SkillLog>,
}

impl SkillEnv {
    pub fn new(config: WorldConfig, ranges: SkillRanges, seed: u64) -> Result<Self, SkillError> {
        ranges.validate()?;
        Ok(SkillEnv {
            world: World::new(config)?,
            ranges,
            rng: ChaCha8Rng::seed_from_u64(seed),
            finished: true,
            skills_used: 0,
            record: false,
            logs: Vec::new(),
        })
    }

    /// Starts an episode on a randomized rail; `seed` restarts the random source.
    pub fn reset(&mut self, seed: Option<u64>) -> Result<Observation, SkillError> {
        if let Some(s) = seed {
            self.rng = ChaCha8Rng::seed_from_u64(s);
        }
        let rail = randomize(&self.world.config.randomization, &mut self.rng);
        self.reset_with(rail)
    }

    /// Starts an episode on a given rail placement.
    pub fn reset_with(&mut self, rail: RailPlacement) -> Result<Observation, SkillError> {
        self.world.reset(rail)?;
        self.finished = false;
        self.skills_used = 0;
        self.logs.clear();
        Ok(self.world.sense(&mut self.rng))
    }

    pub fn observe(&mut self) -> Observation {
        self.world.sense(&mut self.rng)
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn skills_used(&self) -> usize {
        self.skills_used
    }

    pub fn step(&mut self, action: &Action) -> Result<StepOutcome, SkillError> {
        if self.finished {
            return Err(SkillError::EpisodeFinished);
        }
        let choice = decode_action(action, &self.ranges)?;
        let sub: Vec<SkillParams> = match choice {
            SkillChoice::Terminal(t) => t.expand().to_vec(),
            SkillChoice::Pivot(p) => vec![SkillParams::Pivot(p)],
        };
        let start = self.world.state.overlap_history.len();
        let mut executed = Vec::with_capacity(sub.len());
        let mut stop = StopReason::GoalMonitor;
        for params in &sub {
            let log = exec_skill(&mut self.world, params, self.record)?;
            stop = log.stop;
            executed.push((log.skill, log.stop));
            if self.record {
                self.logs.push(log);
            }
            if matches!(stop, StopReason::Timeout | StopReason::ForceLimit) {
                break;
            }
        }
        self.world.state.skill_budget_remaining = self.world.state.skill_budget_remaining.saturating_sub(1);
        self.skills_used += 1;

        let control = &self.world.config.control;
        let history = &self.world.state.overlap_history[start.saturating_sub(1)..];
        let overlap_flagged = history.len() >= 2 && overlap_discontinuity(history, control.overlap_threshold).unwrap_or(false);
        let force_limit = stop == StopReason::ForceLimit;
        let success = !force_limit && self.world.is_success();
        let remaining = self.world.state.skill_budget_remaining;

        let mut reward = self.world.reward();
        if overlap_flagged {
            reward -= control.overlap_penalty;
        }
        if force_limit {
            // Forfeits the remaining budget at the reward of the start pose.
            reward -= remaining as f64;
        }
        let done = success || force_limit;
        let truncated = !done && remaining == 0;
        self.finished = done || truncated;
        if overlap_flagged {
            log::debug!("overlap discontinuity flagged in skill {}", self.skills_used);
        }
        Ok(StepOutcome {
            observation: self.world.sense(&mut self.rng),
            reward,
            done,
            truncated,
            info: StepInfo {
                skill: choice.kind(),
                stop_reason: stop,
                skills_used: self.skills_used,
                success,
                overlap_flagged,
                force_limit,
                sub_skills: executed,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub success: bool,
    pub skills_used: usize,
    pub rewards: Vec<f64>,
    pub steps: Vec<StepInfo>,
    pub force_limit: bool,
}

impl EpisodeResult {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }
}

/// Runs one episode from the current reset state with at most `n` skills.
pub fn run_sequence<P>(env: &mut SkillEnv, mut policy: P, n: usize) -> Result<EpisodeResult, SkillError>
where
    P: FnMut(&Observation) -> Action,
{
    let mut obs = env.observe();
    let mut result = EpisodeResult {
        success: false,
        skills_used: 0,
        rewards: Vec::new(),
        steps: Vec::new(),
        force_limit: false,
    };
    for _ in 0..n.max(1) {
        let out = env.step(&policy(&obs))?;
        result.rewards.push(out.reward);
        result.success = out.info.success;
        result.force_limit = out.info.force_limit;
        result.skills_used = out.info.skills_used;
        result.steps.push(out.info);
        obs = out.observation;
        if out.done || out.truncated {
            break;
        }
    }
    Ok(result)
}

/// Nominal hand-tuned parameters of the terminal macro skill.
pub fn nominal_terminal(config: &WorldConfig) -> TerminalParams {
    TerminalParams {
        lin: LinParams { dp_x: 0.0, pitch: 0.0 },
        approach: ApproachParams { speed: 10e-3, force: 8.0 },
        slide: SlideParams {
            speed: 5e-3,
            force: 10.0,
            target: 5.0,
            gain: 5e-4,
        },
        pivot: PivotParams {
            pitch: -(config.control.pre_pitch + 0.5f64.to_radians()),
            rate: 0.2,
            yaw: 0.0,
            fx: 10.0,
            fz: 25.0,
        },
    }
}

/// Scripted policy that reads the rail offset from the observation and the
/// yaw error from the fixed-hook moment cue.
pub fn scripted_action(obs: &Observation, config: &WorldConfig, ranges: &SkillRanges) -> Action {
    let c = &config.control;
    let mut t = nominal_terminal(config);
    let at_start = obs.p_rel[2] > 0.5 * c.pre_height;
    let choice = if at_start {
        t.lin.dp_x = (c.land_offset - obs.p_rel[0]).clamp(ranges.lin_dp_x.lo, ranges.lin_dp_x.hi);
        SkillChoice::Terminal(t)
    } else {
        let yaw = if c.yaw_stiffness > 0.0 {
            obs.wrench.moment[2] / c.yaw_stiffness
        } else {
            0.0
        };
        SkillChoice::Pivot(PivotParams {
            pitch: 0.0,
            yaw: yaw.clamp(ranges.pivot_yaw.lo, ranges.pivot_yaw.hi),
            ..t.pivot
        })
    };
    encode_action(&choice, ranges).expect("scripted parameters are clamped into range")
}

/// Per-tick log of the nominal macro on the nominal rail with noiseless
/// sensing, for force-curve inspection.
pub fn nominal_trace(config: &WorldConfig) -> Result<(Vec<LogRow>, StepInfo), SkillError> {
    let mut cfg = config.clone();
    cfg.randomization.force_noise = 0.0;
    let ranges = SkillRanges::default();
    let action = encode_action(&SkillChoice::Terminal(nominal_terminal(&cfg)), &ranges)?;
    let mut env = SkillEnv::new(cfg, ranges, 0)?;
    env.record = true;
    env.reset_with(RailPlacement::default())?;
    let out = env.step(&action)?;
    let rows = env.logs.iter().flat_map(|l| l.rows.iter().copied()).collect();
    Ok((rows, out.info))
}

//! Policy evaluation: seeded rollouts (parallel over rollouts, deterministic
//! per rollout) and success-rate grids over rail yaw, mount position and
//! lateral offset.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::env::ObsScale;
use super::{Agent, RlError};
use crate::skills::{run_sequence, scripted_action, Action, SkillEnv, SkillRanges};
use crate::world::{Observation, RailPlacement, WorldConfig};

/// Deterministic map from observations to normalized actions.
pub trait Policy: Sync {
    fn act(&self, obs: &Observation) -> Action;
}

/// Greedy (mean) action of a learned agent.
pub struct AgentPolicy<'a> {
    pub agent: &'a Agent,
    pub scale: ObsScale,
}

impl Policy for AgentPolicy<'_> {
    fn act(&self, obs: &Observation) -> Action {
        // The greedy action draws no random numbers.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let a = self.agent.act(&self.scale.apply(obs), true, &mut rng);
        Action::from_slice(&a).expect("agent action dimension")
    }
}

/// Hand-written policy reading the rail offset and the yaw cue.
pub struct ScriptedPolicy {
    pub config: WorldConfig,
    pub ranges: SkillRanges,
}

impl Policy for ScriptedPolicy {
    fn act(&self, obs: &Observation) -> Action {
        scripted_action(obs, &self.config, &self.ranges)
    }
}

/// Policy given by a plain function.
pub struct FnPolicy<F>(pub F);

impl<F: Fn(&Observation) -> Action + Sync> Policy for FnPolicy<F> {
    fn act(&self, obs: &Observation) -> Action {
        (self.0)(obs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Episode {
    pub success: bool,
    pub skills_used: usize,
    pub total_reward: f64,
    pub force_limit: bool,
}

/// Runs one episode; `rail` overrides the randomized placement.
pub fn rollout<P: Policy + ?Sized>(
    policy: &P,
    config: &WorldConfig,
    ranges: &SkillRanges,
    seed: u64,
    rail: Option<RailPlacement>,
) -> Result<Episode, RlError> {
    let mut env = SkillEnv::new(config.clone(), ranges.clone(), seed)?;
    match rail {
        Some(r) => env.reset_with(r)?,
        None => env.reset(Some(seed))?,
    };
    let res = run_sequence(&mut env, |o| policy.act(o), config.budget)?;
    Ok(Episode {
        success: res.success,
        skills_used: res.skills_used,
        total_reward: res.total_reward(),
        force_limit: res.force_limit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub avg_return: f64,
    pub success_rate: f64,
    /// Mean skills per episode over all episodes.
    pub mean_skills: f64,
    /// Mean skills over successful episodes; NaN without successes.
    pub mean_skills_success: f64,
}

impl EvalSummary {
    pub fn from_episodes(eps: &[Episode]) -> Self {
        let n = eps.len().max(1) as f64;
        let succ: Vec<&Episode> = eps.iter().filter(|e| e.success).collect();
        EvalSummary {
            episodes: eps.len(),
            avg_return: eps.iter().map(|e| e.total_reward).sum::<f64>() / n,
            success_rate: succ.len() as f64 / n,
            mean_skills: eps.iter().map(|e| e.skills_used as f64).sum::<f64>() / n,
            mean_skills_success: if succ.is_empty() {
                f64::NAN
            } else {
                succ.iter().map(|e| e.skills_used as f64).sum::<f64>() / succ.len() as f64
            },
        }
    }
}

/// Evaluates `rollouts` randomized episodes seeded `seed, seed + 1, ...`.
/// Results do not depend on the number of worker threads.
pub fn evaluate_policy<P: Policy + ?Sized>(
    policy: &P,
    config: &WorldConfig,
    ranges: &SkillRanges,
    seed: u64,
    rollouts: usize,
) -> Result<EvalSummary, RlError> {
    let eps = (0..rollouts as u64)
        .into_par_iter()
        .map(|i| rollout(policy, config, ranges, seed.wrapping_add(i), None))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(EvalSummary::from_episodes(&eps))
}

/// Evaluation grid in boundary units (degrees, mm).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub yaw_deg: Vec<f64>,
    pub mount_mm: Vec<f64>,
    pub dx_mm: Vec<f64>,
    /// Rollouts per (yaw, mount, dx) cell.
    pub rollouts: usize,
    pub seed: u64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            yaw_deg: (-4..=4).map(|k| 2.0 * k as f64).collect(),
            mount_mm: vec![-60.0, -30.0, 0.0, 30.0, 60.0],
            dx_mm: vec![-5.0, -2.5, 0.0, 2.5, 5.0],
            rollouts: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridCell {
    pub yaw_deg: f64,
    pub mount_mm: f64,
    pub dx_mm: f64,
    pub rollouts: usize,
    pub successes: usize,
    pub mean_skills: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub spec: GridSpec,
    /// Cells ordered by yaw, then mount, then dx.
    pub cells: Vec<GridCell>,
}

impl GridResult {
    /// Success fraction per (yaw, mount), pooled over dx.
    pub fn success_matrix(&self) -> Vec<Vec<f64>> {
        let (nm, nd) = (self.spec.mount_mm.len(), self.spec.dx_mm.len());
        (0..self.spec.yaw_deg.len())
            .map(|i| {
                (0..nm)
                    .map(|j| {
                        let cells = &self.cells[(i * nm + j) * nd..(i * nm + j + 1) * nd];
                        let s: usize = cells.iter().map(|c| c.successes).sum();
                        let n: usize = cells.iter().map(|c| c.rollouts).sum();
                        s as f64 / n.max(1) as f64
                    })
                    .collect()
            })
            .collect()
    }

    /// Pooled success fraction over cells selected by rail yaw.
    pub fn rate_where(&self, pred: impl Fn(f64) -> bool) -> f64 {
        let (s, n) = self
            .cells
            .iter()
            .filter(|c| pred(c.yaw_deg))
            .fold((0, 0), |(s, n), c| (s + c.successes, n + c.rollouts));
        s as f64 / n.max(1) as f64
    }

    /// Success rate in the core area `|yaw| <= 2°`.
    pub fn core_rate(&self) -> f64 {
        self.rate_where(|y| y.abs() <= 2.0 + 1e-9)
    }
}

/// Runs every grid cell with fixed rail placements; sensor noise stays on.
pub fn evaluate_grid<P: Policy + ?Sized>(
    policy: &P,
    config: &WorldConfig,
    ranges: &SkillRanges,
    spec: &GridSpec,
) -> Result<GridResult, RlError> {
    let mut keys = Vec::new();
    for &y in &spec.yaw_deg {
        for &m in &spec.mount_mm {
            for &d in &spec.dx_mm {
                keys.push((y, m, d));
            }
        }
    }
    let r = spec.rollouts.max(1);
    let cells = keys
        .par_iter()
        .enumerate()
        .map(|(k, &(yaw_deg, mount_mm, dx_mm))| {
            let rail = RailPlacement {
                dx: dx_mm * 1e-3,
                yaw: yaw_deg.to_radians(),
                mount: mount_mm * 1e-3,
            };
            let mut successes = 0;
            let mut skills = 0;
            for i in 0..r {
                let seed = spec.seed.wrapping_mul(1_000_003).wrapping_add((k * r + i) as u64);
                let ep = rollout(policy, config, ranges, seed, Some(rail))?;
                successes += ep.success as usize;
                skills += ep.skills_used;
            }
            Ok(GridCell {
                yaw_deg,
                mount_mm,
                dx_mm,
                rollouts: r,
                successes,
                mean_skills: skills as f64 / r as f64,
            })
        })
        .collect::<Result<Vec<_>, RlError>>()?;
    Ok(GridResult {
        spec: spec.clone(),
        cells,
    })
}

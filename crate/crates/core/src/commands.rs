//! Command implementations behind the `snapfit` binary. Each command writes
//! its outputs plus a `run_manifest.json` into the output directory.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::export::{read_table, write_csv, write_pgm, write_table, ExportError, RunManifest};
use crate::rl::checkpoint::load_checkpoint;
use crate::rl::{evaluate_grid, train, AgentPolicy, Algorithm, GridResult, RlError, ScriptedPolicy};
use crate::scenario::{Scenario, ScenarioError};
use crate::skills::{nominal_trace, run_sequence, scripted_action, Action, EpisodeResult, LogRow, SkillEnv, SkillError};
use crate::world::{JoiningModel, RailPlacement};

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Rl(#[from] RlError),
    #[error(transparent)]
    Skill(#[from] SkillError),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("usage: {0}")]
    Usage(String),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

impl CommandError {
    /// Process exit code: 2 for bad input, 3 for unsupported checkpoints,
    /// 4 for training divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Scenario(_) | CommandError::Usage(_) => 2,
            CommandError::Rl(RlError::VersionMismatch { .. }) => 3,
            CommandError::Rl(RlError::Config(_)) => 2,
            CommandError::Rl(RlError::Divergence(_)) => 4,
            _ => 1,
        }
    }
}

/// Options shared by all commands.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub scenario: Scenario,
    pub seed: u64,
    pub out: PathBuf,
    /// Rollout worker threads; `None` uses all cores.
    pub workers: Option<usize>,
    /// Single-threaded execution for bit-reproducible runs.
    pub deterministic: bool,
}

impl RunContext {
    pub fn new(scenario: Scenario, seed: u64, out: impl Into<PathBuf>) -> Self {
        RunContext {
            scenario,
            seed,
            out: out.into(),
            workers: None,
            deterministic: false,
        }
    }

    pub fn threads(&self) -> usize {
        if self.deterministic {
            1
        } else {
            self.workers.unwrap_or_else(rayon::current_num_threads).max(1)
        }
    }

    fn manifest(&self, command: &str, seeds: Vec<u64>) -> RunManifest {
        RunManifest::new(
            command,
            self.scenario.source.clone(),
            &self.scenario.hash,
            seeds,
            self.deterministic,
            self.threads(),
        )
    }

    /// Runs `f` inside a worker pool sized by the context.
    fn install<T: Send>(&self, f: impl FnOnce() -> Result<T, CommandError> + Send) -> Result<T, CommandError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads())
            .build()
            .map_err(|e| CommandError::Pool(e.to_string()))?;
        pool.install(f)
    }
}

/// One control step of a force curve, in boundary units.
#[derive(Debug, Clone, Serialize)]
pub struct ForceRow {
    pub step: usize,
    pub t_s: f64,
    pub skill: &'static str,
    pub progress_mm: f64,
    pub deflection_mm: f64,
    pub lateral_n: f64,
    pub joining_n: f64,
    pub latched: bool,
}

pub fn force_rows(rows: &[LogRow]) -> Vec<ForceRow> {
    rows.iter()
        .enumerate()
        .map(|(i, r)| ForceRow {
            step: i,
            t_s: r.t,
            skill: r.skill,
            progress_mm: r.progress * 1e3,
            deflection_mm: r.deflection * 1e3,
            lateral_n: r.lateral,
            joining_n: r.joining,
            latched: r.latched,
        })
        .collect()
}

/// Sweeps the nominal assembly with one joining model; writes `forces.csv`.
pub fn cmd_forces(ctx: &RunContext, model: JoiningModel) -> Result<RunManifest, CommandError> {
    let mut manifest = ctx.manifest("forces", vec![ctx.seed]);
    let world = ctx.scenario.world.clone().with_model(model);
    let (rows, _) = nominal_trace(&world)?;
    let path = ctx.out.join("forces.csv");
    write_csv(&path, &force_rows(&rows))?;
    manifest.add_output(&path)?;
    manifest.finish(&ctx.out)?;
    Ok(manifest)
}

/// Peak forces and snap-in step of one model on the nominal assembly.
#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub variant: &'static str,
    pub peak_lateral_n: f64,
    pub peak_lateral_step: usize,
    pub peak_joining_n: f64,
    /// First control step with the snap-hook latched.
    pub snap_in_step: Option<usize>,
    pub success: bool,
}

pub fn summarize(model: JoiningModel, rows: &[LogRow], success: bool) -> ModelSummary {
    let (peak_step, peak) = rows
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, r)| if r.lateral > bv { (i, r.lateral) } else { (bi, bv) });
    ModelSummary {
        variant: model.name(),
        peak_lateral_n: peak.max(0.0),
        peak_lateral_step: peak_step,
        peak_joining_n: rows.iter().map(|r| r.joining).fold(0.0, f64::max),
        snap_in_step: rows.iter().position(|r| r.latched),
        success,
    }
}

/// Runs the nominal assembly with each model; writes step-aligned force
/// columns to `model_compare.csv` and peaks to `model_compare_summary.csv`.
pub fn cmd_model_compare(ctx: &RunContext, variants: &[JoiningModel]) -> Result<(RunManifest, Vec<ModelSummary>), CommandError> {
    if variants.len() < 2 {
        return Err(CommandError::Usage("model-compare needs at least two variants".into()));
    }
    let mut manifest = ctx.manifest("model-compare", vec![ctx.seed]);
    let mut traces = Vec::new();
    let mut summaries = Vec::new();
    for &m in variants {
        let (rows, info) = nominal_trace(&ctx.scenario.world.clone().with_model(m))?;
        summaries.push(summarize(m, &rows, info.success));
        traces.push(rows);
    }
    let mut header = vec!["step".to_string()];
    for m in variants {
        for col in ["deflection_mm", "lateral_n", "joining_n", "latched"] {
            header.push(format!("{}_{col}", m.name()));
        }
    }
    let len = traces.iter().map(Vec::len).max().unwrap_or(0);
    let table: Vec<Vec<String>> = (0..len)
        .map(|i| {
            let mut rec = vec![i.to_string()];
            for t in &traces {
                match t.get(i) {
                    Some(r) => rec.extend([
                        (r.deflection * 1e3).to_string(),
                        r.lateral.to_string(),
                        r.joining.to_string(),
                        r.latched.to_string(),
                    ]),
                    None => rec.extend(std::iter::repeat(String::new()).take(4)),
                }
            }
            rec
        })
        .collect();
    let path = ctx.out.join("model_compare.csv");
    write_table(&path, &header, &table)?;
    manifest.add_output(&path)?;
    let path = ctx.out.join("model_compare_summary.csv");
    write_csv(&path, &summaries)?;
    manifest.add_output(&path)?;
    manifest.finish(&ctx.out)?;
    Ok((manifest, summaries))
}

/// Per-skill outcome row of a simulated episode.
#[derive(Debug, Clone, Serialize)]
pub struct StepRow {
    pub step: usize,
    pub skill: &'static str,
    pub stop_reason: &'static str,
    pub sub_skills: usize,
    pub reward: f64,
    pub success: bool,
    pub overlap_flagged: bool,
    pub force_limit: bool,
}

/// Reads normalized actions, one row of 14 values per skill execution.
pub fn read_actions(path: &Path) -> Result<Vec<Action>, CommandError> {
    let (_, rows) = read_table(path)?;
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            let vals = r
                .iter()
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CommandError::Usage(format!("{}: row {}: {e}", path.display(), i + 1)))?;
            Ok(Action::from_slice(&vals)?)
        })
        .collect()
}

/// Replays an action script (or the scripted policy) on a fixed rail;
/// writes `sim_log.csv` (per control tick) and `sim_steps.csv`.
pub fn cmd_simulate(
    ctx: &RunContext,
    actions: Option<&[Action]>,
    rail: RailPlacement,
) -> Result<(RunManifest, EpisodeResult), CommandError> {
    let mut manifest = ctx.manifest("simulate", vec![ctx.seed]);
    let world = ctx.scenario.world.clone();
    let ranges = ctx.scenario.ranges.clone();
    let mut env = SkillEnv::new(world.clone(), ranges.clone(), ctx.seed)?;
    env.record = true;
    env.reset_with(rail)?;
    let mut logs = Vec::new();
    let mut k = 0;
    let budget = world.budget;
    let res = match actions {
        Some(list) => {
            if list.is_empty() {
                return Err(CommandError::Usage("action script is empty".into()));
            }
            run_sequence(
                &mut env,
                |_| {
                    let a = list[k.min(list.len() - 1)];
                    k += 1;
                    a
                },
                list.len().min(budget),
            )?
        }
        None => run_sequence(&mut env, |o| scripted_action(o, &world, &ranges), budget)?,
    };
    logs.extend(env.logs.iter().flat_map(|l| l.rows.iter().copied()));

    let path = ctx.out.join("sim_log.csv");
    write_csv(&path, &logs)?;
    manifest.add_output(&path)?;
    let steps: Vec<StepRow> = res
        .steps
        .iter()
        .zip(&res.rewards)
        .enumerate()
        .map(|(i, (s, r))| StepRow {
            step: i + 1,
            skill: s.skill.name(),
            stop_reason: s.stop_reason.name(),
            sub_skills: s.sub_skills.len(),
            reward: *r,
            success: s.success,
            overlap_flagged: s.overlap_flagged,
            force_limit: s.force_limit,
        })
        .collect();
    let path = ctx.out.join("sim_steps.csv");
    write_csv(&path, &steps)?;
    manifest.add_output(&path)?;
    manifest.finish(&ctx.out)?;
    Ok((manifest, res))
}

/// Command-line overrides of the scenario's training section.
#[derive(Debug, Clone, Default)]
pub struct TrainOverrides {
    pub steps: Option<usize>,
    pub algorithm: Option<Algorithm>,
    pub seeds: Option<usize>,
    pub eval_rollouts: Option<usize>,
}

/// Trains one agent per seed (`seed, seed + 1, ...`) into `seed_<n>/`.
pub fn cmd_train(ctx: &RunContext, overrides: &TrainOverrides) -> Result<RunManifest, CommandError> {
    let mut cfg = ctx.scenario.file.train_config(ctx.seed)?;
    if let Some(s) = overrides.steps {
        cfg.total_steps = s;
        cfg.eval_period = cfg.eval_period.min(s.max(1));
    }
    if let Some(a) = overrides.algorithm {
        cfg.algorithm = a;
    }
    if let Some(n) = overrides.seeds {
        cfg.seeds = n;
    }
    if let Some(n) = overrides.eval_rollouts {
        cfg.eval_rollouts = n;
    }
    cfg.validate()?;
    let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|i| ctx.seed.wrapping_add(i)).collect();
    let mut manifest = ctx.manifest("train", seeds.clone());
    for seed in seeds {
        let run_cfg = crate::rl::TrainConfig { seed, ..cfg.clone() };
        let dir = ctx.out.join(format!("seed_{seed}"));
        let out = ctx.install(|| Ok(train(&run_cfg, &ctx.scenario.world, &ctx.scenario.ranges, Some(&dir))?))?;
        manifest.add_output(&dir.join("curve.csv"))?;
        if let Some(p) = out.checkpoint {
            manifest.add_output(&p)?;
            manifest.add_output(&crate::rl::checkpoint::sidecar_path(&p))?;
        }
    }
    manifest.finish(&ctx.out)?;
    Ok(manifest)
}

/// Grid cell row of `grid.csv`.
#[derive(Debug, Clone, Serialize)]
struct GridRow {
    yaw_deg: f64,
    mount_mm: f64,
    dx_mm: f64,
    rollouts: usize,
    successes: usize,
    success_rate: f64,
    mean_skills: f64,
}

/// Writes `grid.csv`, the yaw x mount matrix `grid_matrix.csv` and the
/// heatmap `grid.pgm`.
pub fn export_grid(dir: &Path, grid: &GridResult, manifest: &mut RunManifest) -> Result<(), CommandError> {
    let rows: Vec<GridRow> = grid
        .cells
        .iter()
        .map(|c| GridRow {
            yaw_deg: c.yaw_deg,
            mount_mm: c.mount_mm,
            dx_mm: c.dx_mm,
            rollouts: c.rollouts,
            successes: c.successes,
            success_rate: c.successes as f64 / c.rollouts.max(1) as f64,
            mean_skills: c.mean_skills,
        })
        .collect();
    let path = dir.join("grid.csv");
    write_csv(&path, &rows)?;
    manifest.add_output(&path)?;

    let matrix = grid.success_matrix();
    let mut header = vec!["yaw_deg".to_string()];
    header.extend(grid.spec.mount_mm.iter().map(|m| format!("mount_{m}mm")));
    let table: Vec<Vec<String>> = grid
        .spec
        .yaw_deg
        .iter()
        .zip(&matrix)
        .map(|(y, row)| std::iter::once(y.to_string()).chain(row.iter().map(f64::to_string)).collect())
        .collect();
    let path = dir.join("grid_matrix.csv");
    write_table(&path, &header, &table)?;
    manifest.add_output(&path)?;

    let path = dir.join("grid.pgm");
    write_pgm(&path, &matrix, 16)?;
    manifest.add_output(&path)?;
    Ok(())
}

/// Evaluates a checkpoint (or the scripted policy) on the scenario's grid.
pub fn cmd_evaluate(ctx: &RunContext, checkpoint: Option<&Path>) -> Result<(RunManifest, GridResult), CommandError> {
    let spec = ctx.scenario.file.grid_spec(ctx.seed)?;
    let mut manifest = ctx.manifest("evaluate", vec![ctx.seed]);
    let world = &ctx.scenario.world;
    let ranges = &ctx.scenario.ranges;
    let grid = match checkpoint {
        Some(path) => {
            let (agent, meta) = load_checkpoint(path)?;
            let policy = AgentPolicy {
                agent: &agent,
                scale: meta.obs_scale,
            };
            ctx.install(|| Ok(evaluate_grid(&policy, world, ranges, &spec)?))?
        }
        None => {
            let policy = ScriptedPolicy {
                config: world.clone(),
                ranges: ranges.clone(),
            };
            ctx.install(|| Ok(evaluate_grid(&policy, world, ranges, &spec)?))?
        }
    };
    export_grid(&ctx.out, &grid, &mut manifest)?;
    manifest.finish(&ctx.out)?;
    Ok((manifest, grid))
}

//! Command-line front end of the snap-fit simulator.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use snapfit::commands::{
    cmd_evaluate, cmd_forces, cmd_model_compare, cmd_simulate, cmd_train, read_actions, CommandError, RunContext,
    TrainOverrides,
};
use snapfit::rl::Algorithm;
use snapfit::scenario::Scenario;
use snapfit::world::{JoiningModel, RailPlacement};

#[derive(Parser, Debug)]
#[command(name = "snapfit", version, about = "Snap-fit DIN-rail terminal assembly simulator")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Scenario file (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Rollout worker threads (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Single-threaded, bit-reproducible execution.
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Force curves of the nominal assembly for one joining model.
    Forces {
        #[arg(long, default_value = "analytic")]
        model: JoiningModel,
    },
    /// Step-aligned force curves and peaks of several joining models.
    ModelCompare {
        #[arg(long, value_delimiter = ',', default_value = "slide,one_hinge,two_hinge")]
        variants: Vec<JoiningModel>,
    },
    /// Replays an action script (CSV of normalized actions) or the scripted policy.
    Simulate {
        #[arg(long)]
        actions: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        rail_dx_mm: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        rail_yaw_deg: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        mount_mm: f64,
    },
    /// Trains SAC or TD3 agents.
    Train {
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        algorithm: Option<Algorithm>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        eval_rollouts: Option<usize>,
    },
    /// Success grid over rail yaw, mount position and offset.
    Evaluate {
        /// Checkpoint to evaluate; the scripted policy when omitted.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CommandError> {
    let scenario = match &cli.global.scenario {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default_scenario(),
    };
    let ctx = RunContext {
        scenario,
        seed: cli.global.seed,
        out: cli.global.out.clone(),
        workers: cli.global.workers,
        deterministic: cli.global.deterministic,
    };
    match cli.command {
        Command::Forces { model } => {
            cmd_forces(&ctx, model)?;
            println!("wrote {}", ctx.out.join("forces.csv").display());
        }
        Command::ModelCompare { variants } => {
            let (_, summary) = cmd_model_compare(&ctx, &variants)?;
            for s in summary {
                println!(
                    "{:<10} peak F_Q {:7.3} N at step {:5}  peak F_J {:7.3} N  snap-in step {:?}",
                    s.variant, s.peak_lateral_n, s.peak_lateral_step, s.peak_joining_n, s.snap_in_step
                );
            }
        }
        Command::Simulate {
            actions,
            rail_dx_mm,
            rail_yaw_deg,
            mount_mm,
        } => {
            let script = actions.as_deref().map(read_actions).transpose()?;
            let rail = RailPlacement {
                dx: rail_dx_mm * 1e-3,
                yaw: rail_yaw_deg.to_radians(),
                mount: mount_mm * 1e-3,
            };
            let (_, res) = cmd_simulate(&ctx, script.as_deref(), rail)?;
            println!(
                "success {} after {} skill(s), return {:.4}",
                res.success,
                res.skills_used,
                res.total_reward()
            );
        }
        Command::Train {
            steps,
            algorithm,
            seeds,
            eval_rollouts,
        } => {
            let m = cmd_train(
                &ctx,
                &TrainOverrides {
                    steps,
                    algorithm,
                    seeds,
                    eval_rollouts,
                },
            )?;
            println!("trained seeds {:?} into {}", m.seeds, ctx.out.display());
        }
        Command::Evaluate { checkpoint } => {
            let (_, grid) = cmd_evaluate(&ctx, checkpoint.as_deref())?;
            println!("core-area success {:.3}", grid.core_rate());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SNAPFIT_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

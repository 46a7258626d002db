//! Off-policy learning over the skill environment: networks, replay, SAC,
//! TD3, training loop, evaluation sweeps and checkpoints.

pub mod buffer;
pub mod checkpoint;
pub mod env;
pub mod eval;
pub mod nn;
pub mod sac;
pub mod td3;
pub mod train;

use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::skills::SkillError;
use buffer::Batch;
use nn::Mlp;
use sac::{Sac, SacConfig};
use td3::{Td3, Td3Config};

pub use buffer::{ReplayBuffer, Transition};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta, CHECKPOINT_VERSION};
pub use env::{ObsScale, RlEnv};
pub use eval::{evaluate_grid, evaluate_policy, AgentPolicy, EvalSummary, GridResult, GridSpec, Policy, ScriptedPolicy};
pub use train::{train, CurveRow, TrainConfig, TrainOutcome};

#[derive(Debug, thiserror::Error)]
pub enum RlError {
    #[error("divergence: {0}")]
    Divergence(String),
    #[error("unsupported checkpoint version {found} (supported: {supported})")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Skill(#[from] SkillError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Losses of one gradient update; `None` where the algorithm skipped a part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Losses {
    pub critic: f64,
    pub actor: Option<f64>,
    pub alpha: Option<f64>,
    pub entropy: Option<f64>,
}

impl Losses {
    pub fn is_finite(&self) -> bool {
        self.critic.is_finite()
            && [self.actor, self.alpha, self.entropy].iter().all(|v| v.map_or(true, f64::is_finite))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sac,
    Td3,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Sac => "sac",
            Algorithm::Td3 => "td3",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = RlError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sac" => Ok(Algorithm::Sac),
            "td3" => Ok(Algorithm::Td3),
            other => Err(RlError::Config(format!("unknown algorithm `{other}` (expected sac or td3)"))),
        }
    }
}

/// A learning agent of either algorithm.
#[derive(Debug, Clone)]
pub enum Agent {
    Sac(Sac),
    Td3(Td3),
}

impl Agent {
    pub fn new<R: Rng>(algorithm: Algorithm, obs_dim: usize, act_dim: usize, cfg: &TrainConfig, rng: &mut R) -> Self {
        match algorithm {
            Algorithm::Sac => Agent::Sac(Sac::new(
                obs_dim,
                act_dim,
                SacConfig {
                    gamma: cfg.gamma,
                    tau: cfg.tau,
                    lr_actor: cfg.lr,
                    lr_critic: cfg.lr,
                    lr_alpha: cfg.lr,
                    target_entropy: None,
                    init_alpha: cfg.init_alpha,
                    hidden: cfg.hidden.clone(),
                },
                rng,
            )),
            Algorithm::Td3 => Agent::Td3(Td3::new(
                obs_dim,
                act_dim,
                Td3Config {
                    gamma: cfg.gamma,
                    tau: cfg.tau,
                    lr_actor: cfg.lr,
                    lr_critic: cfg.lr,
                    hidden: cfg.hidden.clone(),
                    ..Td3Config::default()
                },
                rng,
            )),
        }
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Agent::Sac(_) => Algorithm::Sac,
            Agent::Td3(_) => Algorithm::Td3,
        }
    }

    pub fn act<R: Rng>(&self, obs: &[f64], deterministic: bool, rng: &mut R) -> Vec<f64> {
        match self {
            Agent::Sac(a) => a.act(obs, deterministic, rng),
            Agent::Td3(a) => a.act(obs, deterministic, rng),
        }
    }

    pub fn update<R: Rng>(&mut self, batch: &Batch, rng: &mut R) -> Result<Losses, RlError> {
        match self {
            Agent::Sac(a) => a.update(batch, rng),
            Agent::Td3(a) => a.update(batch, rng),
        }
    }

    /// Named networks in a fixed order, as stored in checkpoints.
    pub fn networks(&self) -> Vec<(&'static str, &Mlp)> {
        match self {
            Agent::Sac(a) => vec![
                ("actor", &a.actor),
                ("q1", &a.q1),
                ("q2", &a.q2),
                ("q1_target", &a.q1_target),
                ("q2_target", &a.q2_target),
            ],
            Agent::Td3(a) => vec![
                ("actor", &a.actor),
                ("actor_target", &a.actor_target),
                ("q1", &a.q1),
                ("q2", &a.q2),
                ("q1_target", &a.q1_target),
                ("q2_target", &a.q2_target),
            ],
        }
    }

    pub fn networks_mut(&mut self) -> Vec<(&'static str, &mut Mlp)> {
        match self {
            Agent::Sac(a) => vec![
                ("actor", &mut a.actor),
                ("q1", &mut a.q1),
                ("q2", &mut a.q2),
                ("q1_target", &mut a.q1_target),
                ("q2_target", &mut a.q2_target),
            ],
            Agent::Td3(a) => vec![
                ("actor", &mut a.actor),
                ("actor_target", &mut a.actor_target),
                ("q1", &mut a.q1),
                ("q2", &mut a.q2),
                ("q1_target", &mut a.q1_target),
                ("q2_target", &mut a.q2_target),
            ],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.networks().iter().all(|(_, n)| n.is_finite())
    }

    pub fn log_alpha(&self) -> Option<f64> {
        match self {
            Agent::Sac(a) => Some(a.log_alpha),
            Agent::Td3(_) => None,
        }
    }
}

pub(crate) fn concat_cols(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    concatenate![Axis(1), a.view(), b.view()]
}

/// Element-wise minimum of the two target critics.
pub(crate) fn critic_target_min(q1: &Mlp, q2: &Mlp, input: &Array2<f64>) -> Array1<f64> {
    let a = q1.forward(input.view());
    let b = q2.forward(input.view());
    Array1::from_shape_fn(a.nrows(), |r| a[[r, 0]].min(b[[r, 0]]))
}

/// Mean squared error of an `n x 1` prediction and its output gradient.
pub(crate) fn mse_grad(pred: &Array2<f64>, y: &Array1<f64>) -> (f64, Array2<f64>) {
    let n = pred.nrows() as f64;
    let diff = Array2::from_shape_fn(pred.raw_dim(), |(r, _)| pred[[r, 0]] - y[r]);
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    (loss, diff.mapv(|d| 2.0 * d / n))
}

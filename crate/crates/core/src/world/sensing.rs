//! Observation, reward and success logic.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{RailPlacement, RandomizationConfig, TerminalPose, WorldConfig, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    pub force: [f64; 3],
    pub moment: [f64; 3],
}

impl Wrench {
    pub fn is_finite(&self) -> bool {
        self.force.iter().chain(self.moment.iter()).all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub p_rel: [f64; 3],
    /// Unit quaternion `(w, x, y, z)`.
    pub orientation: [f64; 4],
    pub wrench: Wrench,
}

impl Observation {
    pub const DIM: usize = 13;

    pub fn to_array(&self) -> [f64; Self::DIM] {
        let mut out = [0.0; Self::DIM];
        out[..3].copy_from_slice(&self.p_rel);
        out[3..7].copy_from_slice(&self.orientation);
        out[7..10].copy_from_slice(&self.wrench.force);
        out[10..].copy_from_slice(&self.wrench.moment);
        out
    }
}

/// Orientation of a terminal yawed by `yaw` about Z and pitched by `pitch` about Y.
pub fn quaternion_from_angles(pitch: f64, yaw: f64) -> [f64; 4] {
    let (s1, c1) = (yaw / 2.0).sin_cos();
    let (s2, c2) = (pitch / 2.0).sin_cos();
    [c1 * c2, -s1 * s2, c1 * s2, c2 * s1]
}

pub(super) fn sense<R: Rng>(cfg: &WorldConfig, state: &WorldState, rng: &mut R) -> Observation {
    let goal = state.goal_pose();
    let mut wrench = state.report.wrench();
    let sigma = cfg.randomization.force_noise;
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).expect("finite, non-negative std");
        for f in wrench.force.iter_mut() {
            *f += normal.sample(rng);
        }
    }
    Observation {
        p_rel: [state.pose.x - goal.x, 0.0, state.pose.z - goal.z],
        orientation: quaternion_from_angles(state.pose.pitch, state.pose.yaw),
        wrench,
    }
}

/// Draws a rail placement for one episode.
pub fn randomize<R: Rng>(cfg: &RandomizationConfig, rng: &mut R) -> RailPlacement {
    let dx = rng.gen_range(-cfg.dx_range..=cfg.dx_range);
    let yaw = rng.gen_range(-cfg.yaw_range..=cfg.yaw_range);
    let mount = cfg.mount_positions[rng.gen_range(0..cfg.mount_positions.len())];
    RailPlacement { dx, yaw, mount }
}

fn weighted_distance(cfg: &WorldConfig, pose: &TerminalPose, goal: &TerminalPose) -> f64 {
    let w = &cfg.success;
    let terms = [
        (pose.x - goal.x) / w.weight_x,
        (pose.z - goal.z) / w.weight_z,
        (pose.pitch - goal.pitch) / w.weight_pitch,
        (pose.yaw - goal.yaw) / w.weight_yaw,
    ];
    terms.iter().map(|t| t * t).sum::<f64>().sqrt()
}

/// Pre-position of the nominal assembly relative to a rail at the origin.
pub fn nominal_pre_pose(cfg: &WorldConfig) -> TerminalPose {
    TerminalPose {
        x: cfg.control.land_offset,
        z: cfg.control.pre_height,
        pitch: cfg.control.pre_pitch,
        yaw: 0.0,
    }
}

/// Weighted distance from the latched goal pose.
pub fn distance(cfg: &WorldConfig, state: &WorldState) -> f64 {
    weighted_distance(cfg, &state.pose, &state.goal_pose())
}

pub fn reward(cfg: &WorldConfig, state: &WorldState) -> f64 {
    let d_norm = weighted_distance(cfg, &nominal_pre_pose(cfg), &TerminalPose::default());
    -distance(cfg, state).abs() / d_norm
}

pub fn is_success(cfg: &WorldConfig, state: &WorldState) -> bool {
    let goal = state.goal_pose();
    let residual = (state.pose.x - goal.x).hypot(state.pose.z - goal.z);
    state.flags.snap_latched
        && state.yaw_error().abs() < cfg.success.yaw_tolerance
        && residual < cfg.success.position_tolerance
}

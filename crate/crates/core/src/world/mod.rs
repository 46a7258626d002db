//! Planar quasi-static assembly world.
//!
//! The terminal moves kinematically in the sagittal X-Z plane (position of
//! the fixed-hook notch `O` plus pitch about `O`); yaw is a decoupled
//! coordinate that only matters for latching and success. Contacts with the
//! rail are stiff unilateral penalty springs, the snap-hook forces come from
//! the selected joining model.

mod contact;
mod sensing;

pub use contact::{ContactReport, PlanarLoad};
pub use sensing::{distance, is_success, nominal_pre_pose, quaternion_from_angles, randomize, reward, Observation, Wrench};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beam::{contact_angle, forces_from_deflection, lateral_force, BeamError, BeamParams, JoiningForces};
use crate::geometry::{measure, DeflectionSample, HookPlacement, RailProfile, RecessSide, RelativePose, SnapHookProfile};
use crate::lumped::{build, LumpedConfig, LumpedError, LumpedModel, LumpedVariant};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WorldError {
    #[error("force limit exceeded: {force:.1} N > {limit:.1} N")]
    ForceLimit { force: f64, limit: f64 },
    #[error("control period {0} s outside (0, 50 ms]")]
    InvalidTimestep(f64),
    #[error("invalid world configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Beam(#[from] BeamError),
    #[error(transparent)]
    Lumped(#[from] LumpedError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JoiningModel {
    Analytic,
    Slide,
    OneHinge,
    TwoHinge,
}

impl JoiningModel {
    pub const ALL: [JoiningModel; 4] = [
        JoiningModel::Analytic,
        JoiningModel::Slide,
        JoiningModel::OneHinge,
        JoiningModel::TwoHinge,
    ];

    pub fn lumped_variant(self) -> Option<LumpedVariant> {
        match self {
            JoiningModel::Analytic => None,
            JoiningModel::Slide => Some(LumpedVariant::Slide),
            JoiningModel::OneHinge => Some(LumpedVariant::OneHinge),
            JoiningModel::TwoHinge => Some(LumpedVariant::TwoHinge),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            JoiningModel::Analytic => "analytic",
            JoiningModel::Slide => "slide",
            JoiningModel::OneHinge => "one_hinge",
            JoiningModel::TwoHinge => "two_hinge",
        }
    }
}

impl std::str::FromStr for JoiningModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        JoiningModel::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown joining model `{s}` (expected analytic, slide, one_hinge or two_hinge)"))
    }
}

/// Fixed-hook tooth of the terminal, hanging below `O`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToothGeometry {
    pub depth: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlConfig {
    pub period: f64,
    /// Admittance gain of force-controlled axes, m/(N s).
    pub admittance_gain: f64,
    pub max_speed: f64,
    /// Force band over which force-limited rotations slow down to a stall.
    pub rotation_band: f64,
    pub contact_stiffness: f64,
    pub force_limit: f64,
    pub overlap_threshold: f64,
    pub overlap_penalty: f64,
    /// Yaw restoring stiffness felt once the fixed hook is engaged, N m/rad.
    pub yaw_stiffness: f64,
    pub skill_timeout: f64,
    pub contact_threshold: f64,
    pub settle_tolerance: f64,
    pub settle_time: f64,
    pub stall_time: f64,
    pub goal_tolerance: f64,
    pub goal_angle_tolerance: f64,
    pub lin_speed: f64,
    pub lin_rate: f64,
    pub home_height: f64,
    pub pre_height: f64,
    pub pre_pitch: f64,
    /// Nominal horizontal distance of `O` from the rail corner at the pre-position.
    pub land_offset: f64,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            period: 2e-3,
            admittance_gain: 2e-3,
            max_speed: 0.05,
            rotation_band: 2.0,
            contact_stiffness: 1e5,
            force_limit: 50.0,
            overlap_threshold: 0.5e-3,
            overlap_penalty: 2.0,
            yaw_stiffness: 1.0,
            skill_timeout: 10.0,
            contact_threshold: 2.0,
            settle_tolerance: 0.5,
            settle_time: 0.05,
            stall_time: 0.1,
            goal_tolerance: 0.1e-3,
            goal_angle_tolerance: 0.1f64.to_radians(),
            lin_speed: 0.025,
            lin_rate: 0.5,
            home_height: 30e-3,
            pre_height: 8e-3,
            pre_pitch: 20f64.to_radians(),
            land_offset: 4e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuccessConfig {
    pub yaw_tolerance: f64,
    pub position_tolerance: f64,
    pub weight_x: f64,
    pub weight_z: f64,
    pub weight_pitch: f64,
    pub weight_yaw: f64,
}

impl Default for SuccessConfig {
    fn default() -> Self {
        SuccessConfig {
            yaw_tolerance: 1f64.to_radians(),
            position_tolerance: 0.5e-3,
            weight_x: 5e-3,
            weight_z: 5e-3,
            weight_pitch: 10f64.to_radians(),
            weight_yaw: 1f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomizationConfig {
    /// Half-width of the uniform rail offset interval.
    pub dx_range: f64,
    /// Half-width of the uniform rail yaw interval.
    pub yaw_range: f64,
    pub force_noise: f64,
    /// Mount positions along the rail drawn uniformly per episode.
    pub mount_positions: Vec<f64>,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        RandomizationConfig {
            dx_range: 5e-3,
            yaw_range: 3f64.to_radians(),
            force_noise: 0.2,
            mount_positions: vec![0.0],
        }
    }
}

impl RandomizationConfig {
    pub fn disabled() -> Self {
        RandomizationConfig {
            dx_range: 0.0,
            yaw_range: 0.0,
            force_noise: 0.0,
            mount_positions: vec![0.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub hook: SnapHookProfile,
    pub rail: RailProfile,
    /// Parameters of a single bending beam.
    pub beam: BeamParams,
    /// Number of parallel bending beams of a wide terminal.
    pub beams: u32,
    pub corrected: bool,
    pub joining_model: JoiningModel,
    pub lumped: LumpedConfig,
    pub lumped_dt: f64,
    pub tooth: ToothGeometry,
    /// Yaw misalignment beyond which the head wedges at its apex.
    pub jam_yaw: f64,
    /// Flank relief of the one-sided recess; also widens the jam threshold.
    pub recess_angle: f64,
    pub control: ControlConfig,
    pub success: SuccessConfig,
    pub randomization: RandomizationConfig,
    pub budget: usize,
}

impl Default for WorldConfig {
    fn default() -> Self {
        let hook = SnapHookProfile {
            beam_length: 8e-3,
            beam_width: 5e-3,
            beam_thickness: 1.3e-3,
            head_height: 2.0e-3,
            joining_angle: 30f64.to_radians(),
            overlap: 0.5e-3,
            contour: crate::geometry::ContourClass::II,
            plateau_length: 1.0e-3,
            ramp_length: 1.5e-3,
            retain_angle: 80f64.to_radians(),
            recess_side: RecessSide::None,
        };
        let beam = BeamParams::for_profile(&hook, 1.2e9, 0.2).expect("default cross-section is valid");
        WorldConfig {
            hook,
            rail: RailProfile::top_hat_35(),
            beam,
            beams: 1,
            corrected: true,
            joining_model: JoiningModel::Analytic,
            lumped: LumpedConfig::default(),
            lumped_dt: 1e-4,
            tooth: ToothGeometry { depth: 2.0e-3, width: 1.5e-3 },
            jam_yaw: 5f64.to_radians(),
            recess_angle: 10f64.to_radians(),
            control: ControlConfig::default(),
            success: SuccessConfig::default(),
            randomization: RandomizationConfig::default(),
            budget: 6,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        self.hook.validate().map_err(|e| WorldError::Config(e.to_string()))?;
        self.rail.validate().map_err(|e| WorldError::Config(e.to_string()))?;
        self.beam.validate()?;
        let c = &self.control;
        let checks = [
            ("control.period", c.period > 0.0 && c.period <= 0.05),
            ("control.admittance_gain", c.admittance_gain > 0.0),
            ("control.contact_stiffness", c.contact_stiffness > 0.0),
            ("control.force_limit", c.force_limit > 0.0),
            ("control.overlap_threshold", c.overlap_threshold > 0.0),
            ("control.skill_timeout", c.skill_timeout > 0.0),
            ("lumped.dt", self.lumped_dt > 0.0 && self.lumped_dt <= 1e-3),
            ("budget", self.budget >= 1),
            ("beams", self.beams >= 1),
            ("randomization.force_noise", self.randomization.force_noise >= 0.0),
            ("randomization.dx_range", self.randomization.dx_range >= 0.0),
            ("randomization.yaw_range", self.randomization.yaw_range >= 0.0),
        ];
        for (key, ok) in checks {
            if !ok {
                return Err(WorldError::Config(format!("{key} out of range")));
            }
        }
        if self.randomization.mount_positions.is_empty() {
            return Err(WorldError::Config("randomization.mount_positions must not be empty".into()));
        }
        Ok(())
    }

    /// Beam parameters of the whole snap-hook, including parallel beams.
    pub fn effective_beam(&self) -> BeamParams {
        let mut b = self.beam;
        b.area_moment *= self.beams as f64;
        b
    }

    pub fn placement(&self) -> HookPlacement {
        HookPlacement::new(&self.hook, &self.rail)
    }

    /// Distance from `O` to the snap-hook along the base.
    pub fn lever(&self) -> f64 {
        -self.placement().beam_face_u
    }

    pub fn with_model(mut self, model: JoiningModel) -> Self {
        self.joining_model = model;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TerminalPose {
    pub x: f64,
    pub z: f64,
    pub pitch: f64,
    pub yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RailPlacement {
    pub dx: f64,
    pub yaw: f64,
    pub mount: f64,
}

impl RailPlacement {
    /// Lateral offset of the rail corner seen at the mount position.
    pub fn effective_offset(&self) -> f64 {
        self.dx + self.mount * self.yaw.tan()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ContactFlags {
    pub base_contact: bool,
    pub fixed_hook_engaged: bool,
    pub snap_engaged: bool,
    pub snap_latched: bool,
}

/// Per-axis command for one control period.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AxisCommand {
    #[default]
    Hold,
    Velocity(f64),
    /// Press toward the negative axis direction until the contact reaction
    /// equals `target`.
    Press { target: f64, gain: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum RotationCommand {
    #[default]
    Hold,
    Rate(f64),
    /// Rotate at `rate` about `O`, slowing to a stall when the resisting
    /// force at the snap-hook lever approaches `force_limit`.
    Limited { rate: f64, force_limit: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlCommand {
    pub x: AxisCommand,
    pub z: AxisCommand,
    pub pitch: RotationCommand,
    pub yaw_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub pose: TerminalPose,
    pub rail: RailPlacement,
    pub flags: ContactFlags,
    pub joining_model: JoiningModel,
    pub lumped: Option<LumpedModel>,
    pub skill_budget_remaining: usize,
    pub time: f64,
    pub overlap_history: Vec<f64>,
    /// Snap-hook touched the lip at some point of the episode.
    pub snap_seen: bool,
    /// Last commanded pitch rate after force limiting, rad/s.
    pub pitch_rate: f64,
    pub report: ContactReport,
}

impl WorldState {
    /// Pose of `O` relative to the (effective) rail corner.
    pub fn relative_pose(&self) -> RelativePose {
        RelativePose::new(self.pose.x - self.rail.effective_offset(), self.pose.z, self.pose.pitch)
    }

    pub fn yaw_error(&self) -> f64 {
        self.pose.yaw - self.rail.yaw
    }

    pub fn goal_pose(&self) -> TerminalPose {
        TerminalPose {
            x: self.rail.effective_offset(),
            z: 0.0,
            pitch: 0.0,
            yaw: self.rail.yaw,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.pose.x.is_finite() && self.pose.z.is_finite() && self.pose.pitch.is_finite() && self.pose.yaw.is_finite()
    }
}

/// Lumped integration steps allowed for the beam to rebound after latching.
const LUMPED_SETTLE_STEPS: usize = 400;

/// A configured world: immutable configuration plus the mutable episode state.
#[derive(Debug, Clone)]
pub struct World {
    pub config: WorldConfig,
    pub state: WorldState,
}

impl World {
    pub fn new(config: WorldConfig) -> Result<Self, WorldError> {
        config.validate()?;
        let lumped = match config.joining_model.lumped_variant() {
            Some(v) => Some(build(v, &config.hook, &config.effective_beam(), &config.lumped)?),
            None => None,
        };
        let state = WorldState {
            pose: TerminalPose::default(),
            rail: RailPlacement::default(),
            flags: ContactFlags::default(),
            joining_model: config.joining_model,
            lumped,
            skill_budget_remaining: config.budget,
            time: 0.0,
            overlap_history: Vec::new(),
            snap_seen: false,
            pitch_rate: 0.0,
            report: ContactReport::default(),
        };
        let mut world = World { config, state };
        world.reset(RailPlacement::default())?;
        Ok(world)
    }

    /// Home pose above the nominal pre-position.
    pub fn home_pose(&self) -> TerminalPose {
        TerminalPose {
            x: self.config.control.land_offset,
            z: self.config.control.home_height,
            pitch: 0.0,
            yaw: 0.0,
        }
    }

    /// Starts a new episode with the terminal at the home pose.
    pub fn reset(&mut self, rail: RailPlacement) -> Result<(), WorldError> {
        let home = self.home_pose();
        let s = &mut self.state;
        s.pose = home;
        s.rail = rail;
        s.flags = ContactFlags::default();
        s.skill_budget_remaining = self.config.budget;
        s.time = 0.0;
        s.overlap_history.clear();
        s.snap_seen = false;
        s.pitch_rate = 0.0;
        if let Some(m) = s.lumped.as_mut() {
            m.reset();
        }
        self.refresh()
    }

    /// Places the terminal at `pose` and recomputes contacts without motion.
    pub fn set_pose(&mut self, pose: TerminalPose) -> Result<(), WorldError> {
        self.state.pose = pose;
        self.refresh()
    }

    fn refresh(&mut self) -> Result<(), WorldError> {
        let sample = measure(&self.config.hook, &self.config.rail, &self.state.relative_pose());
        let forces = self.joining_forces(&sample, None)?;
        self.state.report = contact::evaluate(&self.config, &self.state, sample, forces);
        self.update_flags();
        Ok(())
    }

    fn contact_angle(&self, sample: &DeflectionSample) -> f64 {
        let base = contact_angle(&self.config.hook, sample.region);
        if base > 0.0 && self.recess_applies() {
            (base - self.config.recess_angle).max(0.0)
        } else {
            base
        }
    }

    fn recess_applies(&self) -> bool {
        contact::recess_applies(&self.config, self.state.yaw_error())
    }

    /// Yaw misalignment that wedges the head at its apex.
    pub fn jam_threshold(&self) -> f64 {
        contact::jam_threshold(&self.config, self.state.yaw_error())
    }

    /// Joining forces for `sample`; advances the lumped chain by `dt` when given.
    fn joining_forces(&mut self, sample: &DeflectionSample, dt: Option<f64>) -> Result<JoiningForces, WorldError> {
        let angle = self.contact_angle(sample);
        let beam = self.config.effective_beam();
        let f = sample.deflection;
        // A self-locking flank cannot slide: the head blocks like a rigid stop.
        let wedge = |lateral: f64| JoiningForces {
            lateral,
            joining: self.config.control.contact_stiffness * f,
        };
        match self.state.lumped.as_mut() {
            None => {
                let l_eff = beam.lever(&self.config.hook, sample.progress);
                match forces_from_deflection(f, l_eff, angle, &beam, self.config.corrected) {
                    Ok((forces, _)) => Ok(forces),
                    Err(BeamError::SelfLocking { .. }) => {
                        Ok(wedge(lateral_force(f, l_eff, &beam, self.config.corrected)?))
                    }
                    Err(e) => Err(e.into()),
                }
            }
            Some(model) => {
                let mu0 = beam.friction;
                if let Some(dt) = dt {
                    let n = (dt / self.config.lumped_dt).ceil().max(1.0) as usize;
                    let h = dt / n as f64;
                    for _ in 0..n {
                        model.advance_penetration(f, h)?;
                    }
                }
                match model.forces(f, angle, mu0) {
                    Ok(forces) => Ok(forces),
                    Err(LumpedError::Beam(BeamError::SelfLocking { .. })) => Ok(wedge(model.contact_force(f))),
                    Err(e) => Err(e.into()),
                }
            }
        }
    }

    /// Recomputes the contact wrench of the current state without side effects.
    pub fn contact_wrench(&self) -> Result<Wrench, WorldError> {
        let mut probe = self.clone();
        probe.refresh()?;
        Ok(probe.state.report.wrench())
    }

    fn update_flags(&mut self) {
        let r = &self.state.report;
        let latched = self.state.flags.snap_latched;
        self.state.flags.base_contact = r.base_active;
        self.state.flags.fixed_hook_engaged = r.hook_near || latched;
        self.state.flags.snap_engaged = r.sample.deflection > 0.0 || latched;
        if r.sample.deflection > 0.0 {
            self.state.snap_seen = true;
        }
    }

    /// Advances one control period.
    pub fn step_control(&mut self, command: &ControlCommand, dt: f64) -> Result<(), WorldError> {
        if !(dt > 0.0 && dt <= 0.05) {
            return Err(WorldError::InvalidTimestep(dt));
        }
        let c = &self.config.control;
        let gain_eff = |gain: f64| gain / (1.0 + gain * c.contact_stiffness * dt);
        let total = self.state.report.total();
        let axis = |cmd: AxisCommand, reaction: f64| -> f64 {
            let v = match cmd {
                AxisCommand::Hold => 0.0,
                AxisCommand::Velocity(v) => v,
                AxisCommand::Press { target, gain } => -gain_eff(gain) * (target - reaction),
            };
            v.clamp(-c.max_speed, c.max_speed)
        };
        let vx = axis(command.x, total.fx);
        let vz = axis(command.z, total.fz);
        let lever = self.config.lever();
        let omega = match command.pitch {
            RotationCommand::Hold => 0.0,
            RotationCommand::Rate(w) => w,
            RotationCommand::Limited { rate, force_limit } => {
                let resisting = -total.moment * rate.signum() / lever;
                let scale = ((force_limit - resisting) / c.rotation_band).clamp(0.0, 1.0);
                rate * scale
            }
        };
        self.state.pitch_rate = omega;
        self.state.pose.x += vx * dt;
        self.state.pose.z += vz * dt;
        self.state.pose.pitch += omega * dt;
        self.state.pose.yaw += command.yaw_rate * dt;
        self.state.time += dt;

        let sample = measure(&self.config.hook, &self.config.rail, &self.state.relative_pose());
        let forces = self.joining_forces(&sample, Some(dt))?;
        self.state.report = contact::evaluate(&self.config, &self.state, sample, forces);
        self.update_flags();
        self.try_latch()?;
        self.state.overlap_history.push(self.state.report.sample.deflection);

        let force = self.state.report.total().magnitude();
        if force > self.config.control.force_limit {
            return Err(WorldError::ForceLimit {
                force,
                limit: self.config.control.force_limit,
            });
        }
        Ok(())
    }

    fn try_latch(&mut self) -> Result<(), WorldError> {
        let s = &self.state;
        if s.flags.snap_latched || !s.snap_seen || !s.flags.fixed_hook_engaged {
            return Ok(());
        }
        let placement = self.config.placement();
        if !s.report.sample.past_head(&placement) || s.yaw_error().abs() > self.jam_threshold() {
            return Ok(());
        }
        // The beam rebounds behind the lip and pulls the terminal onto its seat.
        self.state.flags.snap_latched = true;
        let goal = self.state.goal_pose();
        self.state.pose.x = goal.x;
        self.state.pose.z = goal.z;
        self.state.pose.pitch = goal.pitch;
        self.settle_lumped()?;
        self.refresh()
    }

    /// Lets the lumped chain come to rest against the current deflection
    /// demand, so a pose jump does not show up as a contact-spring spike.
    fn settle_lumped(&mut self) -> Result<(), WorldError> {
        let f = measure(&self.config.hook, &self.config.rail, &self.state.relative_pose()).deflection;
        let dt = self.config.lumped_dt;
        if let Some(m) = self.state.lumped.as_mut() {
            for _ in 0..LUMPED_SETTLE_STEPS {
                m.advance_penetration(f, dt)?;
            }
        }
        Ok(())
    }

    /// After a skill ends the robot releases its commanded forces; a latched
    /// terminal then rests on its seat.
    pub fn relax(&mut self) -> Result<(), WorldError> {
        if self.state.flags.snap_latched {
            let goal = self.state.goal_pose();
            self.state.pose.x = goal.x;
            self.state.pose.z = goal.z;
            self.state.pose.pitch = goal.pitch;
            self.settle_lumped()?;
            self.refresh()?;
        }
        Ok(())
    }

    pub fn distance(&self) -> f64 {
        distance(&self.config, &self.state)
    }

    pub fn reward(&self) -> f64 {
        reward(&self.config, &self.state)
    }

    pub fn is_success(&self) -> bool {
        is_success(&self.config, &self.state)
    }

    pub fn sense<R: rand::Rng>(&self, rng: &mut R) -> Observation {
        sensing::sense(&self.config, &self.state, rng)
    }
}

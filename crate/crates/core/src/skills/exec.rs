//! Control-loop execution of a single skill.

use serde::Serialize;

use super::{ApproachParams, LinParams, PivotParams, SkillKind, SkillParams, SlideParams};
use crate::world::{AxisCommand, ControlCommand, RotationCommand, World, WorldError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GoalMonitor,
    ContactDetected,
    Timeout,
    ForceLimit,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::GoalMonitor => "goal_monitor",
            StopReason::ContactDetected => "contact_detected",
            StopReason::Timeout => "timeout",
            StopReason::ForceLimit => "force_limit",
        }
    }
}

/// One control tick of an episode log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LogRow {
    pub t: f64,
    pub skill: &'static str,
    pub x: f64,
    pub z: f64,
    pub pitch: f64,
    pub yaw: f64,
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
    pub mx: f64,
    pub my: f64,
    pub mz: f64,
    /// Lip progress along the head in the joining direction.
    pub progress: f64,
    pub deflection: f64,
    pub lateral: f64,
    pub joining: f64,
    pub latched: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkillLog {
    pub skill: SkillKind,
    pub rows: Vec<LogRow>,
    /// Overlap measured at every tick of this skill.
    pub overlap: Vec<f64>,
    pub stop: StopReason,
    pub duration: f64,
}

struct Runner<'a> {
    world: &'a mut World,
    kind: SkillKind,
    rows: Vec<LogRow>,
    overlap: Vec<f64>,
    elapsed: f64,
    dt: f64,
    timeout: f64,
    record: bool,
}

enum Tick {
    Continue,
    Stop(StopReason),
}

impl<'a> Runner<'a> {
    fn new(world: &'a mut World, kind: SkillKind, record: bool) -> Self {
        let dt = world.config.control.period;
        let timeout = world.config.control.skill_timeout;
        Runner {
            world,
            kind,
            rows: Vec::new(),
            overlap: Vec::new(),
            elapsed: 0.0,
            dt,
            timeout,
            record,
        }
    }

    fn tick(&mut self, cmd: &ControlCommand) -> Result<Tick, WorldError> {
        if self.elapsed >= self.timeout - 1e-12 {
            return Ok(Tick::Stop(StopReason::Timeout));
        }
        let res = self.world.step_control(cmd, self.dt);
        self.elapsed += self.dt;
        self.overlap.push(self.world.state.report.sample.deflection);
        if self.record {
            self.push_row();
        }
        match res {
            Ok(()) => Ok(Tick::Continue),
            Err(WorldError::ForceLimit { .. }) => Ok(Tick::Stop(StopReason::ForceLimit)),
            Err(e) => Err(e),
        }
    }

    fn push_row(&mut self) {
        let s = &self.world.state;
        let w = s.report.wrench();
        self.rows.push(LogRow {
            t: s.time,
            skill: self.kind.name(),
            x: s.pose.x,
            z: s.pose.z,
            pitch: s.pose.pitch,
            yaw: s.pose.yaw,
            fx: w.force[0],
            fy: w.force[1],
            fz: w.force[2],
            mx: w.moment[0],
            my: w.moment[1],
            mz: w.moment[2],
            progress: s.report.sample.progress,
            deflection: s.report.sample.deflection,
            lateral: s.report.joining_forces.lateral,
            joining: s.report.joining_forces.joining,
            latched: s.flags.snap_latched,
        });
    }

    fn finish(self, stop: StopReason) -> Result<SkillLog, WorldError> {
        if stop != StopReason::ForceLimit {
            self.world.relax()?;
        }
        Ok(SkillLog {
            skill: self.kind,
            rows: self.rows,
            overlap: self.overlap,
            stop,
            duration: self.elapsed,
        })
    }
}

macro_rules! run {
    ($runner:expr, $cmd:expr) => {
        if let Tick::Stop(reason) = $runner.tick($cmd)? {
            return Ok(reason);
        }
    };
}

/// Runs one skill at the control period until a monitor fires.
///
/// Force-limit violations are reported as a stop reason; other world errors
/// propagate.
pub fn exec_skill(world: &mut World, params: &SkillParams, record: bool) -> Result<SkillLog, WorldError> {
    let mut runner = Runner::new(world, params.kind(), record);
    let stop = match params {
        SkillParams::Lin(p) => lin(&mut runner, p)?,
        SkillParams::Approach(p) => approach(&mut runner, p)?,
        SkillParams::Slide(p) => slide(&mut runner, p)?,
        SkillParams::Pivot(p) => pivot(&mut runner, p)?,
    };
    runner.finish(stop)
}

/// Velocity that covers `remaining` in synchrony with the other axes, without
/// overshooting in the last period.
fn sync_velocity(remaining: f64, time_left: f64, dt: f64) -> f64 {
    if time_left <= dt {
        remaining / dt
    } else {
        remaining / time_left
    }
}

fn lin(r: &mut Runner, p: &LinParams) -> Result<StopReason, WorldError> {
    let c = r.world.config.control.clone();
    let target_x = c.land_offset + p.dp_x;
    let target_z = c.pre_height;
    let target_pitch = c.pre_pitch + p.pitch;

    // Lift clear before any lateral motion.
    while r.world.state.pose.z < target_z - c.goal_tolerance {
        let dz = target_z - r.world.state.pose.z;
        let v = c.lin_speed.min(dz / r.dt);
        run!(r, &ControlCommand { z: AxisCommand::Velocity(v), ..Default::default() });
    }
    loop {
        let pose = r.world.state.pose;
        let (dx, dz, dp) = (target_x - pose.x, target_z - pose.z, target_pitch - pose.pitch);
        if dx.abs() <= c.goal_tolerance && dz.abs() <= c.goal_tolerance && dp.abs() <= c.goal_angle_tolerance {
            return Ok(StopReason::GoalMonitor);
        }
        let t = (dx.hypot(dz) / c.lin_speed).max(dp.abs() / c.lin_rate);
        let cmd = ControlCommand {
            x: AxisCommand::Velocity(sync_velocity(dx, t, r.dt)),
            z: AxisCommand::Velocity(sync_velocity(dz, t, r.dt)),
            pitch: RotationCommand::Rate(sync_velocity(dp, t, r.dt)),
            yaw_rate: 0.0,
        };
        run!(r, &cmd);
    }
}

fn approach(r: &mut Runner, p: &ApproachParams) -> Result<StopReason, WorldError> {
    let c = r.world.config.control.clone();
    let baseline = r.world.state.report.total();
    let descend = ControlCommand { z: AxisCommand::Velocity(-p.speed), ..Default::default() };
    loop {
        let t = r.world.state.report.total();
        if (t.fx - baseline.fx).hypot(t.fz - baseline.fz) > c.contact_threshold {
            break;
        }
        run!(r, &descend);
    }
    let press = ControlCommand {
        z: AxisCommand::Press { target: p.force, gain: c.admittance_gain },
        ..Default::default()
    };
    let mut settled = 0.0;
    loop {
        run!(r, &press);
        let fz = r.world.state.report.total().fz;
        if (fz - p.force).abs() < c.settle_tolerance {
            settled += r.dt;
            if settled >= c.settle_time - 1e-12 {
                return Ok(StopReason::ContactDetected);
            }
        } else {
            settled = 0.0;
        }
    }
}

fn slide(r: &mut Runner, p: &SlideParams) -> Result<StopReason, WorldError> {
    let baseline = r.world.state.report.total().fx;
    let cmd = ControlCommand {
        x: AxisCommand::Velocity(-p.speed),
        z: AxisCommand::Press { target: p.force, gain: p.gain },
        ..Default::default()
    };
    loop {
        run!(r, &cmd);
        if (r.world.state.report.total().fx - baseline).abs() > p.target {
            return Ok(StopReason::ContactDetected);
        }
    }
}

fn pivot(r: &mut Runner, p: &PivotParams) -> Result<StopReason, WorldError> {
    let c = r.world.config.control.clone();
    let flags = r.world.state.flags;
    let in_contact = flags.base_contact || flags.fixed_hook_engaged;
    let (x, z) = if in_contact {
        (
            AxisCommand::Press { target: p.fx, gain: c.admittance_gain },
            AxisCommand::Press { target: p.fz, gain: c.admittance_gain },
        )
    } else {
        (AxisCommand::Hold, AxisCommand::Hold)
    };

    let mut stop = StopReason::GoalMonitor;
    let target_pitch = r.world.state.pose.pitch + p.pitch;
    let mut stalled = 0.0;
    loop {
        let dp = target_pitch - r.world.state.pose.pitch;
        if dp.abs() <= c.goal_angle_tolerance {
            break;
        }
        let rate = sync_velocity(dp, dp.abs() / p.rate, r.dt);
        let cmd = ControlCommand {
            x,
            z,
            pitch: RotationCommand::Limited { rate, force_limit: p.fz },
            yaw_rate: 0.0,
        };
        run!(r, &cmd);
        if r.world.state.pitch_rate.abs() < 0.05 * rate.abs() {
            stalled += r.dt;
            if stalled >= c.stall_time - 1e-12 {
                // Rotation blocked by contact.
                stop = StopReason::ContactDetected;
                break;
            }
        } else {
            stalled = 0.0;
        }
    }

    let target_yaw = r.world.state.pose.yaw + p.yaw;
    loop {
        let dy = target_yaw - r.world.state.pose.yaw;
        if dy.abs() <= 1e-12 {
            return Ok(stop);
        }
        let cmd = ControlCommand {
            x,
            z,
            pitch: RotationCommand::Hold,
            yaw_rate: sync_velocity(dy, dy.abs() / p.rate, r.dt),
        };
        run!(r, &cmd);
    }
}

//! Parameterizable assembly skills and the bounded skill sequencer.
//!
//! A skill is described by a 7-tuple ([`SkillSpec`]): name, frame bindings,
//! controlled-axis tasks, scripts, stop monitors, transitions and sub-skills.
//! The terminal macro skill expands to linear move, approach, slide, pivot
//! and a final yaw-correcting pivot; the standalone pivot can be selected on
//! its own.

mod exec;
mod sequencer;

pub use exec::{exec_skill, LogRow, SkillLog, StopReason};
pub use sequencer::{nominal_terminal, nominal_trace, run_sequence, scripted_action, EpisodeResult, SkillEnv, StepInfo, StepOutcome};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::WorldError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SkillError {
    #[error("unnormalized action: component {index} = {value}")]
    UnnormalizedAction { index: usize, value: f64 },
    #[error("action must have {expected} components, got {got}")]
    ActionLength { expected: usize, got: usize },
    #[error("episode finished")]
    EpisodeFinished,
    #[error("parameter `{name}` = {value} outside [{lo}, {hi}]")]
    ParamOutOfRange { name: &'static str, value: f64, lo: f64, hi: f64 },
    #[error("invalid skill range `{0}`")]
    InvalidRange(&'static str),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillKind {
    Terminal,
    Lin,
    Approach,
    Slide,
    Pivot,
}

impl SkillKind {
    pub fn name(self) -> &'static str {
        match self {
            SkillKind::Terminal => "terminal",
            SkillKind::Lin => "lin",
            SkillKind::Approach => "approach",
            SkillKind::Slide => "slide",
            SkillKind::Pivot => "pivot",
        }
    }
}

/// Closed parameter interval in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    /// Affine map from `[-1, 1]` onto the interval.
    pub fn decode(&self, u: f64) -> f64 {
        self.lo + (u + 1.0) * 0.5 * (self.hi - self.lo)
    }

    pub fn encode(&self, p: f64) -> f64 {
        2.0 * (p - self.lo) / (self.hi - self.lo) - 1.0
    }

    pub fn contains(&self, p: f64) -> bool {
        p >= self.lo && p <= self.hi
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

const MM: f64 = 1e-3;

fn deg(v: f64) -> f64 {
    v.to_radians()
}

/// Learnable parameter ranges, in the order they appear in the action vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SkillRanges {
    pub lin_dp_x: Range,
    pub lin_pitch: Range,
    pub approach_speed: Range,
    pub approach_force: Range,
    pub slide_speed: Range,
    pub slide_force: Range,
    pub slide_target: Range,
    pub slide_gain: Range,
    pub pivot_pitch: Range,
    pub pivot_rate: Range,
    pub pivot_yaw: Range,
    pub pivot_fx: Range,
    pub pivot_fz: Range,
}

impl Default for SkillRanges {
    fn default() -> Self {
        SkillRanges {
            lin_dp_x: Range::new(-25.0 * MM, 25.0 * MM),
            lin_pitch: Range::new(deg(-5.0), deg(5.0)),
            approach_speed: Range::new(2.0 * MM, 20.0 * MM),
            approach_force: Range::new(3.0, 15.0),
            slide_speed: Range::new(1.0 * MM, 10.0 * MM),
            slide_force: Range::new(1.0, 30.0),
            slide_target: Range::new(1.0, 15.0),
            slide_gain: Range::new(1e-4, 1e-3),
            pivot_pitch: Range::new(deg(-30.0), deg(30.0)),
            pivot_rate: Range::new(0.02, 0.5),
            pivot_yaw: Range::new(deg(-20.0), deg(20.0)),
            pivot_fx: Range::new(3.0, 30.0),
            pivot_fz: Range::new(3.0, 30.0),
        }
    }
}

pub const PARAM_NAMES: [&str; 13] = [
    "lin.dp_x",
    "lin.pitch",
    "approach.speed",
    "approach.force",
    "slide.speed",
    "slide.force",
    "slide.target",
    "slide.gain",
    "pivot.pitch",
    "pivot.rate",
    "pivot.yaw",
    "pivot.fx",
    "pivot.fz",
];

impl SkillRanges {
    pub fn as_array(&self) -> [Range; 13] {
        [
            self.lin_dp_x,
            self.lin_pitch,
            self.approach_speed,
            self.approach_force,
            self.slide_speed,
            self.slide_force,
            self.slide_target,
            self.slide_gain,
            self.pivot_pitch,
            self.pivot_rate,
            self.pivot_yaw,
            self.pivot_fx,
            self.pivot_fz,
        ]
    }

    pub fn validate(&self) -> Result<(), SkillError> {
        for (name, r) in PARAM_NAMES.iter().zip(self.as_array()) {
            if !(r.lo.is_finite() && r.hi.is_finite() && r.lo < r.hi) {
                return Err(SkillError::InvalidRange(name));
            }
        }
        let positive = [
            self.approach_speed,
            self.approach_force,
            self.slide_speed,
            self.slide_force,
            self.slide_target,
            self.slide_gain,
            self.pivot_rate,
            self.pivot_fx,
            self.pivot_fz,
        ];
        if positive.iter().any(|r| r.lo <= 0.0) {
            return Err(SkillError::InvalidRange("speeds, forces and gains must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinParams {
    /// Shift of the pre-position along X.
    pub dp_x: f64,
    /// Extra pitch of the pre-position.
    pub pitch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproachParams {
    pub speed: f64,
    pub force: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlideParams {
    pub speed: f64,
    /// Normal-force setpoint while sliding.
    pub force: f64,
    /// Rise of the sliding-direction force that signals the fixed-hook contact.
    pub target: f64,
    /// Admittance gain of the normal-force controller.
    pub gain: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotParams {
    pub pitch: f64,
    pub rate: f64,
    pub yaw: f64,
    pub fx: f64,
    pub fz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SkillParams {
    Lin(LinParams),
    Approach(ApproachParams),
    Slide(SlideParams),
    Pivot(PivotParams),
}

impl SkillParams {
    pub fn kind(&self) -> SkillKind {
        match self {
            SkillParams::Lin(_) => SkillKind::Lin,
            SkillParams::Approach(_) => SkillKind::Approach,
            SkillParams::Slide(_) => SkillKind::Slide,
            SkillParams::Pivot(_) => SkillKind::Pivot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TerminalParams {
    pub lin: LinParams,
    pub approach: ApproachParams,
    pub slide: SlideParams,
    pub pivot: PivotParams,
}

impl TerminalParams {
    /// The five sub-skills in execution order.
    pub fn expand(&self) -> [SkillParams; 5] {
        let pitch_only = PivotParams { yaw: 0.0, ..self.pivot };
        let yaw_only = PivotParams { pitch: 0.0, ..self.pivot };
        [
            SkillParams::Lin(self.lin),
            SkillParams::Approach(self.approach),
            SkillParams::Slide(self.slide),
            SkillParams::Pivot(pitch_only),
            SkillParams::Pivot(yaw_only),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SkillChoice {
    Terminal(TerminalParams),
    Pivot(PivotParams),
}

impl SkillChoice {
    pub fn kind(&self) -> SkillKind {
        match self {
            SkillChoice::Terminal(_) => SkillKind::Terminal,
            SkillChoice::Pivot(_) => SkillKind::Pivot,
        }
    }
}

pub const ACTION_DIM: usize = 14;

/// Selector followed by the 13 raw parameters, all in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Action(pub [f64; ACTION_DIM]);

impl Action {
    pub fn from_slice(v: &[f64]) -> Result<Self, SkillError> {
        let arr: [f64; ACTION_DIM] = v.try_into().map_err(|_| SkillError::ActionLength {
            expected: ACTION_DIM,
            got: v.len(),
        })?;
        Ok(Action(arr))
    }
}

pub fn decode_action(action: &Action, ranges: &SkillRanges) -> Result<SkillChoice, SkillError> {
    for (index, &value) in action.0.iter().enumerate() {
        if !(-1.0..=1.0).contains(&value) {
            return Err(SkillError::UnnormalizedAction { index, value });
        }
    }
    let r = ranges.as_array();
    let p: Vec<f64> = r.iter().zip(&action.0[1..]).map(|(r, &u)| r.decode(u)).collect();
    let pivot = PivotParams {
        pitch: p[8],
        rate: p[9],
        yaw: p[10],
        fx: p[11],
        fz: p[12],
    };
    if action.0[0] >= 0.0 {
        return Ok(SkillChoice::Pivot(pivot));
    }
    Ok(SkillChoice::Terminal(TerminalParams {
        lin: LinParams { dp_x: p[0], pitch: p[1] },
        approach: ApproachParams { speed: p[2], force: p[3] },
        slide: SlideParams {
            speed: p[4],
            force: p[5],
            target: p[6],
            gain: p[7],
        },
        pivot,
    }))
}

/// Inverse of [`decode_action`]; parameters must lie in their ranges.
pub fn encode_action(choice: &SkillChoice, ranges: &SkillRanges) -> Result<Action, SkillError> {
    let r = ranges.as_array();
    let mut a = [0.0; ACTION_DIM];
    let (sigma, values, count) = match choice {
        SkillChoice::Terminal(t) => (
            -1.0,
            [
                t.lin.dp_x,
                t.lin.pitch,
                t.approach.speed,
                t.approach.force,
                t.slide.speed,
                t.slide.force,
                t.slide.target,
                t.slide.gain,
                t.pivot.pitch,
                t.pivot.rate,
                t.pivot.yaw,
                t.pivot.fx,
                t.pivot.fz,
            ],
            13,
        ),
        SkillChoice::Pivot(p) => (
            1.0,
            [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, p.pitch, p.rate, p.yaw, p.fx, p.fz],
            5,
        ),
    };
    a[0] = sigma;
    for i in (13 - count)..13 {
        if !r[i].contains(values[i]) {
            return Err(SkillError::ParamOutOfRange {
                name: PARAM_NAMES[i],
                value: values[i],
                lo: r[i].lo,
                hi: r[i].hi,
            });
        }
        a[i + 1] = r[i].encode(values[i]);
    }
    Ok(Action(a))
}

/// Controlled-axis task of a skill.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Velocity(&'static str),
    Force(&'static str),
    Rotation(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monitor {
    Goal,
    Contact,
    Stall,
    Timeout,
    ForceLimit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillSpec {
    pub name: SkillKind,
    pub frames: Vec<&'static str>,
    pub tasks: Vec<Task>,
    pub scripts: Vec<&'static str>,
    pub monitors: Vec<Monitor>,
    /// `(monitor, next)`; `None` ends the skill.
    pub transitions: Vec<(Monitor, Option<SkillKind>)>,
    pub sub_skills: Vec<SkillKind>,
}

pub fn skill_spec(kind: SkillKind) -> SkillSpec {
    use Monitor::*;
    let safety = [Timeout, ForceLimit];
    let frames = vec!["world", "tcp"];
    let (tasks, scripts, mut monitors, sub_skills) = match kind {
        SkillKind::Terminal => (
            vec![],
            vec!["expand sub-skills"],
            vec![],
            vec![SkillKind::Lin, SkillKind::Approach, SkillKind::Slide, SkillKind::Pivot, SkillKind::Pivot],
        ),
        SkillKind::Lin => (
            vec![Task::Velocity("x"), Task::Velocity("z"), Task::Rotation("pitch")],
            vec!["lift clear", "interpolate"],
            vec![Goal],
            vec![],
        ),
        SkillKind::Approach => (
            vec![Task::Velocity("z"), Task::Force("z")],
            vec!["descend", "press"],
            vec![Contact],
            vec![],
        ),
        SkillKind::Slide => (
            vec![Task::Velocity("x"), Task::Force("z")],
            vec!["slide"],
            vec![Contact],
            vec![],
        ),
        SkillKind::Pivot => (
            vec![Task::Force("x"), Task::Force("z"), Task::Rotation("pitch"), Task::Rotation("yaw")],
            vec!["pitch about contact", "yaw correction"],
            vec![Goal, Stall],
            vec![],
        ),
    };
    monitors.extend(safety);
    let mut transitions: Vec<(Monitor, Option<SkillKind>)> = monitors.iter().map(|&m| (m, None)).collect();
    if kind == SkillKind::Terminal {
        transitions = vec![(Goal, Some(SkillKind::Lin)), (Timeout, None), (ForceLimit, None)];
    }
    SkillSpec {
        name: kind,
        frames,
        tasks,
        scripts,
        monitors,
        transitions,
        sub_skills,
    }
}

/// True when no skill reaches itself through its sub-skills.
pub fn sub_skills_acyclic() -> bool {
    fn visit(kind: SkillKind, stack: &mut Vec<SkillKind>) -> bool {
        if stack.contains(&kind) {
            return false;
        }
        stack.push(kind);
        let ok = skill_spec(kind).sub_skills.into_iter().all(|k| visit(k, stack));
        stack.pop();
        ok
    }
    [SkillKind::Terminal, SkillKind::Lin, SkillKind::Approach, SkillKind::Slide, SkillKind::Pivot]
        .into_iter()
        .all(|k| visit(k, &mut Vec::new()))
}

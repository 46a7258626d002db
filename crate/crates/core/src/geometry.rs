//! Snap-hook and rail cross-sections, head contour evaluation and the
//! ray-based deflection measurement.
//!
//! Frames used throughout the crate:
//!
//! * **rail frame**: origin at the top corner of the rail flange on the
//!   fixed-hook side (right), X to the right, Z up. The rail top spans
//!   `x ∈ [-width, 0]` at `z = 0`; the snap-hook lip corner sits at
//!   `(-width, 0)`.
//! * **terminal frame** `(u, v)`: origin `O` at the notch of the fixed hook
//!   (also the TCP and the pivot point), `u` along the terminal base, `v`
//!   normal to it. A terminal seated on the rail has `O` on the rail corner
//!   and zero pitch.
//!
//! Positive pitch raises the snap-hook side (the `-u` end) of the terminal.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid profile: {field} {reason}")]
    InvalidProfile { field: &'static str, reason: String },
    #[error("insufficient history: need at least 2 overlap samples, got {0}")]
    InsufficientHistory(usize),
}

/// Shape of the snap-hook head behind its apex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContourClass {
    /// Rise to the apex, then an immediate retaining flank.
    I,
    /// Rise, constant plateau at the head height, then a sharp drop.
    II,
    /// Rise, plateau, then a linear decline over the ramp length.
    III,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RecessSide {
    #[default]
    None,
    Left,
    Right,
}

/// Section of the head contour that the measurement ray hits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContactRegion {
    Rising,
    Plateau,
    Falling,
    /// The lip sits above the head and presses on the beam face itself.
    BeamFace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapHookProfile {
    pub beam_length: f64,
    pub beam_width: f64,
    pub beam_thickness: f64,
    pub head_height: f64,
    pub joining_angle: f64,
    /// Overlap `s` between the undeflected beam face and the rail lip.
    /// Negative values leave the beam deflected after latching.
    pub overlap: f64,
    pub contour: ContourClass,
    pub plateau_length: f64,
    pub ramp_length: f64,
    /// Angle of the retaining flank for classes I and II. Kept below 90° so
    /// the contour stays a continuous function.
    pub retain_angle: f64,
    pub recess_side: RecessSide,
}

impl SnapHookProfile {
    pub fn validate(&self) -> Result<(), GeometryError> {
        let positive = [
            ("beam_length", self.beam_length),
            ("beam_width", self.beam_width),
            ("beam_thickness", self.beam_thickness),
            ("head_height", self.head_height),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(field, format!("must be > 0, got {v}")));
            }
        }
        if !(self.joining_angle > 0.0 && self.joining_angle < std::f64::consts::FRAC_PI_2) {
            return Err(invalid(
                "joining_angle",
                format!("must lie in (0, 90°), got {:.3}°", self.joining_angle.to_degrees()),
            ));
        }
        if !self.overlap.is_finite() || self.overlap > self.head_height {
            return Err(invalid(
                "overlap",
                format!("must not exceed the head height, got {}", self.overlap),
            ));
        }
        if matches!(self.contour, ContourClass::II | ContourClass::III) && !(self.plateau_length > 0.0) {
            return Err(invalid("plateau_length", "must be > 0 for contours II and III".into()));
        }
        if self.contour == ContourClass::III && !(self.ramp_length > 0.0) {
            return Err(invalid("ramp_length", "must be > 0 for contour III".into()));
        }
        if !(self.retain_angle > 0.0 && self.retain_angle <= 89f64.to_radians() + 1e-12) {
            return Err(invalid("retain_angle", "must lie in (0, 89°]".into()));
        }
        Ok(())
    }

    /// Length of the rising flank along the joining direction.
    pub fn rise_length(&self) -> f64 {
        self.head_height / self.joining_angle.tan()
    }

    fn plateau_end(&self) -> f64 {
        match self.contour {
            ContourClass::I => self.rise_length(),
            ContourClass::II | ContourClass::III => self.rise_length() + self.plateau_length,
        }
    }

    fn decline_length(&self) -> f64 {
        match self.contour {
            ContourClass::I | ContourClass::II => self.head_height / self.retain_angle.tan(),
            ContourClass::III => self.ramp_length,
        }
    }

    /// Footprint of the head along the joining direction.
    pub fn head_length(&self) -> f64 {
        self.plateau_end() + self.decline_length()
    }

    /// Largest contour slope, used to bound per-sample contour jumps.
    pub fn max_slope(&self) -> f64 {
        let decline = self.head_height / self.decline_length();
        self.joining_angle.tan().max(decline)
    }

    /// Contour region at arc length `x`, or `None` outside the head.
    pub fn region(&self, x: f64) -> Option<ContactRegion> {
        if !(0.0..=self.head_length()).contains(&x) {
            None
        } else if x <= self.rise_length() * (1.0 + 1e-9) {
            // The apex itself still belongs to the ramp.
            Some(ContactRegion::Rising)
        } else if x < self.plateau_end() {
            Some(ContactRegion::Plateau)
        } else {
            Some(ContactRegion::Falling)
        }
    }
}

fn invalid(field: &'static str, reason: String) -> GeometryError {
    GeometryError::InvalidProfile { field, reason }
}

/// Head height at arc length `x` along the joining direction.
pub fn head_contour(profile: &SnapHookProfile, x: f64) -> f64 {
    let rise = profile.rise_length();
    let plateau_end = profile.plateau_end();
    let end = profile.head_length();
    if x < 0.0 || x > end {
        0.0
    } else if x <= rise {
        x * profile.joining_angle.tan()
    } else if x <= plateau_end {
        profile.head_height
    } else {
        profile.head_height * (end - x) / (end - plateau_end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RailProfile {
    pub width: f64,
    /// Thickness of the rail flange.
    pub edge_height: f64,
    pub lip_depth: f64,
    pub fixed_hook_clearance: f64,
}

impl RailProfile {
    /// Standard 35 mm top-hat rail.
    pub fn top_hat_35() -> Self {
        RailProfile {
            width: 35e-3,
            edge_height: 1.0e-3,
            lip_depth: 5.0e-3,
            fixed_hook_clearance: 0.2e-3,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        for (field, v) in [
            ("width", self.width),
            ("edge_height", self.edge_height),
            ("lip_depth", self.lip_depth),
            ("fixed_hook_clearance", self.fixed_hook_clearance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(field, format!("must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Lip corner on the snap-hook side, in rail coordinates.
    pub fn lip_corner(&self) -> [f64; 2] {
        [-self.width, 0.0]
    }
}

/// Planar pose of the terminal origin `O` relative to the rail frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RelativePose {
    pub x: f64,
    pub z: f64,
    pub pitch: f64,
}

impl RelativePose {
    pub fn new(x: f64, z: f64, pitch: f64) -> Self {
        RelativePose { x, z, pitch }
    }

    /// Terminal-frame coordinates of a rail-frame point.
    pub fn to_terminal(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.pitch.sin_cos();
        let dx = p[0] - self.x;
        let dz = p[1] - self.z;
        [dx * c - dz * s, dx * s + dz * c]
    }

    /// Rail-frame coordinates of a terminal-frame point.
    pub fn to_rail(&self, q: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.pitch.sin_cos();
        [self.x + q[0] * c + q[1] * s, self.z - q[0] * s + q[1] * c]
    }

    /// Rotates a terminal-frame direction into the rail frame.
    pub fn dir_to_rail(&self, d: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.pitch.sin_cos();
        [d[0] * c + d[1] * s, -d[0] * s + d[1] * c]
    }
}

/// Terminal-frame placement of the snap-hook, derived from the profiles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HookPlacement {
    /// `u` coordinate of the undeflected beam face.
    pub beam_face_u: f64,
    /// `v` coordinate of the head tip (lowest point of the head).
    pub tip_v: f64,
    pub head_length: f64,
}

impl HookPlacement {
    pub fn new(profile: &SnapHookProfile, rail: &RailProfile) -> Self {
        let head_length = profile.head_length();
        HookPlacement {
            beam_face_u: -(rail.width + profile.overlap),
            // The head top sits flush under the flange of a seated terminal.
            tip_v: -(rail.edge_height + head_length),
            head_length,
        }
    }
}

/// Result of one ray measurement.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DeflectionSample {
    pub deflection: f64,
    /// Height of the lip corner above the head tip, along the joining direction.
    pub progress: f64,
    /// Lateral distance from the undeflected beam face to the lip corner.
    pub gap: f64,
    pub region: Option<ContactRegion>,
}

impl DeflectionSample {
    /// True once the lip corner has passed the whole head.
    pub fn past_head(&self, placement: &HookPlacement) -> bool {
        self.progress > placement.head_length
    }
}

/// Casts the measurement ray from the rail lip corner against the head.
pub fn measure(profile: &SnapHookProfile, rail: &RailProfile, pose: &RelativePose) -> DeflectionSample {
    let placement = HookPlacement::new(profile, rail);
    let e = pose.to_terminal(rail.lip_corner());
    let progress = e[1] - placement.tip_v;
    let gap = e[0] - placement.beam_face_u;
    let (deflection, region) = if progress < 0.0 {
        (0.0, None)
    } else if progress <= placement.head_length {
        let f = head_contour(profile, progress) - gap;
        if f > 0.0 {
            (f, profile.region(progress))
        } else {
            (0.0, None)
        }
    } else if gap < 0.0 {
        (-gap, Some(ContactRegion::BeamFace))
    } else {
        (0.0, None)
    };
    DeflectionSample { deflection, progress, gap, region }
}

/// Beam tip deflection needed to resolve the head/lip overlap at `pose`.
pub fn deflection_from_pose(profile: &SnapHookProfile, rail: &RailProfile, pose: &RelativePose) -> f64 {
    measure(profile, rail, pose).deflection
}

/// Maximum deflection `h_k - s` and whether the beam stays deflected after latching.
pub fn max_deflection(profile: &SnapHookProfile) -> (f64, bool) {
    (profile.head_height - profile.overlap, profile.overlap < 0.0)
}

/// True if consecutive overlap samples jump by more than `threshold`.
pub fn overlap_discontinuity(series: &[f64], threshold: f64) -> Result<bool, GeometryError> {
    if series.len() < 2 {
        return Err(GeometryError::InsufficientHistory(series.len()));
    }
    Ok(series.windows(2).any(|w| (w[1] - w[0]).abs() > threshold))
}

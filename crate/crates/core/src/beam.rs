//! Analytical joining model: cantilever-beam theory maps the measured
//! deflection to the lateral force on the hook and the joining force felt
//! along the assembly direction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{measure, ContactRegion, RailProfile, RelativePose, SnapHookProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeamError {
    #[error("invalid cross-section: b = {b}, h = {h}")]
    InvalidCrossSection { b: f64, h: f64 },
    #[error("invalid effective length {0}")]
    InvalidEffectiveLength(f64),
    #[error("negative deflection {0}")]
    NegativeDeflection(f64),
    #[error("self-locking regime: mu0 = {mu0}, contact angle = {angle_deg:.2} deg")]
    SelfLocking { mu0: f64, angle_deg: f64 },
    #[error("invalid beam parameter: {0}")]
    InvalidParams(String),
}

/// How the effective lever length follows the point of load application.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EffectiveLength {
    /// Load point fixed at the full beam length.
    #[default]
    Constant,
    /// Lever grows while the lip is still low on the rising flank and equals
    /// the beam length from the apex on.
    LinearProgress,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamParams {
    pub secant_modulus: f64,
    pub area_moment: f64,
    pub friction: f64,
    pub effective_length: EffectiveLength,
}

impl BeamParams {
    pub fn new(secant_modulus: f64, area_moment: f64, friction: f64) -> Self {
        BeamParams {
            secant_modulus,
            area_moment,
            friction,
            effective_length: EffectiveLength::Constant,
        }
    }

    /// Builds parameters for the profile's cross-section.
    pub fn for_profile(profile: &SnapHookProfile, secant_modulus: f64, friction: f64) -> Result<Self, BeamError> {
        let i = area_moment(profile.beam_width, profile.beam_thickness)?;
        Ok(Self::new(secant_modulus, i, friction))
    }

    pub fn validate(&self) -> Result<(), BeamError> {
        if !(self.secant_modulus > 0.0) {
            return Err(BeamError::InvalidParams(format!("E_S must be > 0, got {}", self.secant_modulus)));
        }
        if !(self.area_moment > 0.0) {
            return Err(BeamError::InvalidParams(format!("I_y must be > 0, got {}", self.area_moment)));
        }
        if !(self.friction >= 0.0 && self.friction < 1.0) {
            return Err(BeamError::InvalidParams(format!("mu0 must lie in [0, 1), got {}", self.friction)));
        }
        Ok(())
    }

    /// Flexural rigidity `E_S * I_y`.
    pub fn rigidity(&self) -> f64 {
        self.secant_modulus * self.area_moment
    }

    pub fn lever(&self, profile: &SnapHookProfile, progress: f64) -> f64 {
        match self.effective_length {
            EffectiveLength::Constant => profile.beam_length,
            EffectiveLength::LinearProgress => {
                let apex = profile.rise_length();
                profile.beam_length + (apex - progress.clamp(0.0, apex))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JoiningForces {
    pub lateral: f64,
    pub joining: f64,
}

impl JoiningForces {
    pub const ZERO: JoiningForces = JoiningForces { lateral: 0.0, joining: 0.0 };
}

pub fn area_moment(b: f64, h: f64) -> Result<f64, BeamError> {
    if !(b > 0.0 && h > 0.0) {
        return Err(BeamError::InvalidCrossSection { b, h });
    }
    Ok(b * h.powi(3) / 12.0)
}

/// Tip force that produces deflection `f`; halved when `corrected`.
pub fn lateral_force(f: f64, l_eff: f64, params: &BeamParams, corrected: bool) -> Result<f64, BeamError> {
    if !(l_eff > 0.0) {
        return Err(BeamError::InvalidEffectiveLength(l_eff));
    }
    if f < 0.0 {
        return Err(BeamError::NegativeDeflection(f));
    }
    let force = 3.0 * params.rigidity() * f / l_eff.powi(3);
    Ok(if corrected { 0.5 * force } else { force })
}

/// Tip inclination of the deflected beam.
pub fn inclination_angle(f: f64, l_eff: f64) -> Result<f64, BeamError> {
    if !(l_eff > 0.0) {
        return Err(BeamError::InvalidEffectiveLength(l_eff));
    }
    if f < 0.0 {
        return Err(BeamError::NegativeDeflection(f));
    }
    Ok(3.0 * f / (2.0 * l_eff))
}

/// Joining force from the lateral force through the friction cone at the
/// effective contact angle `alpha + gamma`.
pub fn joining_force(lateral: f64, alpha: f64, gamma: f64, mu0: f64) -> Result<f64, BeamError> {
    let t = (alpha + gamma).tan();
    let denom = 1.0 - mu0 * t;
    if !(denom > 0.0) || !(alpha + gamma < std::f64::consts::FRAC_PI_2) {
        return Err(BeamError::SelfLocking {
            mu0,
            angle_deg: (alpha + gamma).to_degrees(),
        });
    }
    Ok(lateral * (mu0 + t) / denom)
}

/// Flank angle of the head where the lip touches it. Off the rising flank the
/// lip slides on a surface parallel to the joining direction, leaving only
/// friction to resist.
pub fn contact_angle(profile: &SnapHookProfile, region: Option<ContactRegion>) -> f64 {
    match region {
        Some(ContactRegion::Rising) => profile.joining_angle,
        _ => 0.0,
    }
}

/// Intermediate values of one analytic evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticEval {
    pub forces: JoiningForces,
    pub deflection: f64,
    pub inclination: f64,
    pub region: Option<ContactRegion>,
}

/// Forces for a given deflection state. The joining force is built on the
/// uncorrected lateral force; `corrected` only scales the reported lateral
/// force.
pub fn forces_from_deflection(
    f: f64,
    l_eff: f64,
    angle: f64,
    params: &BeamParams,
    corrected: bool,
) -> Result<(JoiningForces, f64), BeamError> {
    if f <= 0.0 {
        return Ok((JoiningForces::ZERO, 0.0));
    }
    let raw = lateral_force(f, l_eff, params, false)?;
    let gamma = inclination_angle(f, l_eff)?;
    let joining = joining_force(raw, angle, gamma, params.friction)?;
    let lateral = if corrected { 0.5 * raw } else { raw };
    Ok((JoiningForces { lateral, joining }, gamma))
}

pub fn analytic_eval(
    pose: &RelativePose,
    profile: &SnapHookProfile,
    rail: &RailProfile,
    params: &BeamParams,
    corrected: bool,
) -> Result<AnalyticEval, BeamError> {
    let sample = measure(profile, rail, pose);
    let l_eff = params.lever(profile, sample.progress);
    let angle = contact_angle(profile, sample.region);
    let (forces, inclination) = forces_from_deflection(sample.deflection, l_eff, angle, params, corrected)?;
    Ok(AnalyticEval {
        forces,
        deflection: sample.deflection,
        inclination,
        region: sample.region,
    })
}

pub fn analytic_wrench(
    pose: &RelativePose,
    profile: &SnapHookProfile,
    rail: &RailProfile,
    params: &BeamParams,
    corrected: bool,
) -> Result<JoiningForces, BeamError> {
    analytic_eval(pose, profile, rail, params, corrected).map(|e| e.forces)
}

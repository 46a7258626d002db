//! Rigid-body joining models: the snap-hook beam as one or two serially
//! linked mass-spring-damper sub-models driven through a stiff unilateral
//! contact at the tip.
//!
//! The chain is integrated with a linearly implicit Euler step: spring,
//! damper and active contact terms are taken at the end of the step, the
//! kinematics (Jacobian) at the start. This keeps the 0.1 ms step stable for
//! the real beam mass, whose natural period is well below a millisecond.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::beam::{joining_force, BeamError, BeamParams, JoiningForces};
use crate::geometry::SnapHookProfile;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LumpedError {
    #[error("invalid length {0}")]
    InvalidLength(f64),
    #[error("invalid regularization force {0}")]
    InvalidEpsilon(f64),
    #[error("stiffness must be > 0, got {0}")]
    InvalidStiffness(f64),
    #[error("sub-model count must be >= 1")]
    ZeroCount,
    #[error("time step {0} s outside (0, 1 ms]")]
    InvalidTimestep(f64),
    #[error("unstable integration: |v| = {speed:.3e} at dt = {dt:.1e} s, k = {stiffness:.3e}")]
    Unstable { speed: f64, dt: f64, stiffness: f64 },
    #[error(transparent)]
    Beam(#[from] BeamError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LumpedVariant {
    Slide,
    OneHinge,
    TwoHinge,
}

impl LumpedVariant {
    pub fn dofs(self) -> usize {
        match self {
            LumpedVariant::Slide | LumpedVariant::OneHinge => 1,
            LumpedVariant::TwoHinge => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsdSubmodel {
    /// Mass (kg) for the slide, rotational inertia (kg m^2) for hinges.
    pub inertia: f64,
    pub stiffness: f64,
    pub damping: f64,
    pub rest: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LumpedConfig {
    pub density: f64,
    pub epsilon: f64,
    /// Contact spring stiffness as a multiple of the beam tip stiffness.
    pub contact_factor: f64,
    /// Divergence bound on generalized velocities.
    pub max_velocity: f64,
}

impl Default for LumpedConfig {
    fn default() -> Self {
        LumpedConfig {
            density: 1010.0,
            epsilon: 1e-7,
            contact_factor: 100.0,
            max_velocity: 1e4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LumpedModel {
    pub variant: LumpedVariant,
    pub submodels: Vec<MsdSubmodel>,
    /// Generalized positions (m for the slide, rad for hinges).
    pub q: [f64; 2],
    pub v: [f64; 2],
    pub segment_lengths: Vec<f64>,
    pub epsilon: f64,
    pub contact_stiffness: f64,
    pub max_velocity: f64,
}

pub fn slide_stiffness(params: &BeamParams, l: f64) -> Result<f64, LumpedError> {
    if !(l > 0.0) {
        return Err(LumpedError::InvalidLength(l));
    }
    Ok(3.0 * params.rigidity() / l.powi(3))
}

/// Rotational stiffness of a hinge at lever `lever` from the tip that
/// reproduces the tip stiffness `k_tip`, regularized by a small probe force.
pub fn lever_hinge_stiffness(k_tip: f64, lever: f64, epsilon: f64) -> Result<f64, LumpedError> {
    if !(lever > 0.0) {
        return Err(LumpedError::InvalidLength(lever));
    }
    if !(epsilon > 0.0) {
        return Err(LumpedError::InvalidEpsilon(epsilon));
    }
    if !(k_tip > 0.0) {
        return Err(LumpedError::InvalidStiffness(k_tip));
    }
    Ok(epsilon * lever / (epsilon / k_tip).atan2(lever))
}

pub fn hinge_stiffness(params: &BeamParams, l: f64, epsilon: f64) -> Result<f64, LumpedError> {
    let k = slide_stiffness(params, l)?;
    lever_hinge_stiffness(k, l, epsilon)
}

pub fn critical_damping(m: f64, k: f64) -> Result<f64, LumpedError> {
    if !(k > 0.0) {
        return Err(LumpedError::InvalidStiffness(k));
    }
    Ok((4.0 * m.max(0.0) * k).sqrt())
}

/// Stiffness of each of `n` equal springs in series that together give `k_equiv`.
pub fn series_stiffness(n: usize, k_equiv: f64) -> Result<f64, LumpedError> {
    if n == 0 {
        return Err(LumpedError::ZeroCount);
    }
    if !(k_equiv > 0.0) {
        return Err(LumpedError::InvalidStiffness(k_equiv));
    }
    Ok(n as f64 * k_equiv)
}

fn submodel(inertia: f64, stiffness: f64) -> Result<MsdSubmodel, LumpedError> {
    Ok(MsdSubmodel {
        inertia,
        stiffness,
        damping: critical_damping(inertia, stiffness)?,
        rest: 0.0,
    })
}

/// Builds the chain for `variant` with masses from the beam volume.
pub fn build(
    variant: LumpedVariant,
    profile: &SnapHookProfile,
    params: &BeamParams,
    cfg: &LumpedConfig,
) -> Result<LumpedModel, LumpedError> {
    let l = profile.beam_length;
    let mass = cfg.density * profile.beam_width * profile.beam_thickness * l;
    let k = slide_stiffness(params, l)?;
    let (submodels, segment_lengths) = match variant {
        LumpedVariant::Slide => (vec![submodel(mass, k)?], vec![l]),
        LumpedVariant::OneHinge => {
            let kt = hinge_stiffness(params, l, cfg.epsilon)?;
            (vec![submodel(mass * l * l / 3.0, kt)?], vec![l])
        }
        LumpedVariant::TwoHinge => {
            let half = 0.5 * l;
            // Each hinge carries twice the rotational stiffness equivalent to
            // the beam at its own lever arm, so the two springs in series
            // reproduce the beam tip stiffness.
            let k_root = series_stiffness(2, lever_hinge_stiffness(k, l, cfg.epsilon)?)?;
            let k_mid = series_stiffness(2, lever_hinge_stiffness(k, half, cfg.epsilon)?)?;
            let root = submodel(mass * l * l / 3.0, k_root)?;
            let mid = submodel(0.5 * mass * half * half / 3.0, k_mid)?;
            (vec![root, mid], vec![half, half])
        }
    };
    Ok(LumpedModel {
        variant,
        submodels,
        q: [0.0; 2],
        v: [0.0; 2],
        segment_lengths,
        epsilon: cfg.epsilon,
        contact_stiffness: cfg.contact_factor * k,
        max_velocity: cfg.max_velocity,
    })
}

/// Tip state of the chain: lateral displacement, inclination and the
/// Jacobian of the displacement with respect to the generalized positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TipState {
    pub displacement: f64,
    pub angle: f64,
    pub jacobian: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Excitation {
    Penetration(f64),
    Load(f64),
}

impl LumpedModel {
    pub fn dofs(&self) -> usize {
        self.submodels.len()
    }

    pub fn tip(&self) -> TipState {
        match self.variant {
            LumpedVariant::Slide => TipState {
                displacement: self.q[0],
                angle: 0.0,
                jacobian: [1.0, 0.0],
            },
            LumpedVariant::OneHinge => {
                let l = self.segment_lengths[0];
                TipState {
                    displacement: l * self.q[0].sin(),
                    angle: self.q[0],
                    jacobian: [l * self.q[0].cos(), 0.0],
                }
            }
            LumpedVariant::TwoHinge => {
                let (l1, l2) = (self.segment_lengths[0], self.segment_lengths[1]);
                let a = self.q[0];
                let b = self.q[0] + self.q[1];
                TipState {
                    displacement: l1 * a.sin() + l2 * b.sin(),
                    angle: b,
                    jacobian: [l1 * a.cos() + l2 * b.cos(), l2 * b.cos()],
                }
            }
        }
    }

    /// Mechanical energy stored in the chain (kinetic plus elastic).
    pub fn energy(&self) -> f64 {
        self.submodels
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let dq = self.q[i] - s.rest;
                0.5 * s.inertia * self.v[i] * self.v[i] + 0.5 * s.stiffness * dq * dq
            })
            .sum()
    }

    /// Contact force that a penetration demand `f` currently produces.
    pub fn contact_force(&self, f: f64) -> f64 {
        self.contact_stiffness * (f - self.tip().displacement).max(0.0)
    }

    /// Forces the chain exerts for demand `f` without advancing the state.
    pub fn forces(&self, f: f64, contact_angle: f64, mu0: f64) -> Result<JoiningForces, LumpedError> {
        let lateral = self.contact_force(f);
        if lateral <= 0.0 {
            return Ok(JoiningForces::ZERO);
        }
        let gamma = self.tip().angle.max(0.0);
        let joining = joining_force(lateral, contact_angle, gamma, mu0)?;
        Ok(JoiningForces { lateral, joining })
    }

    fn advance(&mut self, excitation: Excitation, dt: f64) -> Result<(), LumpedError> {
        if !(dt > 0.0 && dt <= 1e-3) {
            return Err(LumpedError::InvalidTimestep(dt));
        }
        let n = self.dofs();
        let tip = self.tip();
        let j = tip.jacobian;
        let (force, kc) = match excitation {
            Excitation::Penetration(f) => {
                let pen = f - tip.displacement;
                if pen > 0.0 {
                    (self.contact_stiffness * pen, self.contact_stiffness)
                } else {
                    (0.0, 0.0)
                }
            }
            Excitation::Load(f) => (f, 0.0),
        };
        let mut a = [[0.0; 2]; 2];
        let mut rhs = [0.0; 2];
        for i in 0..n {
            let s = &self.submodels[i];
            a[i][i] = s.inertia + dt * s.damping + dt * dt * s.stiffness;
            rhs[i] = s.inertia * self.v[i] + dt * (j[i] * force - s.stiffness * (self.q[i] - s.rest));
            for k in 0..n {
                a[i][k] += dt * dt * kc * j[i] * j[k];
            }
        }
        let v_new = if n == 1 {
            [rhs[0] / a[0][0], 0.0]
        } else {
            let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
            [
                (rhs[0] * a[1][1] - a[0][1] * rhs[1]) / det,
                (a[0][0] * rhs[1] - a[1][0] * rhs[0]) / det,
            ]
        };
        for (i, &vi) in v_new.iter().enumerate().take(n) {
            if !vi.is_finite() || vi.abs() > self.max_velocity {
                return Err(LumpedError::Unstable {
                    speed: vi.abs(),
                    dt,
                    stiffness: self.submodels[i].stiffness,
                });
            }
        }
        for (i, &vi) in v_new.iter().enumerate().take(n) {
            self.v[i] = vi;
            self.q[i] += dt * vi;
        }
        Ok(())
    }

    /// Advances the chain with the tip pushed out to at least `f` by the
    /// contact spring and returns the resulting contact forces.
    pub fn step(&mut self, f: f64, contact_angle: f64, mu0: f64, dt: f64) -> Result<JoiningForces, LumpedError> {
        self.advance(Excitation::Penetration(f), dt)?;
        self.forces(f, contact_angle, mu0)
    }

    /// Advances the chain against the penetration `f` without evaluating forces.
    pub fn advance_penetration(&mut self, f: f64, dt: f64) -> Result<(), LumpedError> {
        self.advance(Excitation::Penetration(f), dt)
    }

    /// Advances the chain under a prescribed lateral tip load.
    pub fn step_under_load(&mut self, load: f64, dt: f64) -> Result<(), LumpedError> {
        self.advance(Excitation::Load(load), dt)
    }

    /// Runs `step_under_load` until the tip velocity settles.
    pub fn settle_under_load(&mut self, load: f64, dt: f64, max_steps: usize) -> Result<f64, LumpedError> {
        let mut prev = self.tip().displacement;
        for i in 0..max_steps {
            self.step_under_load(load, dt)?;
            let x = self.tip().displacement;
            if i > 10 && (x - prev).abs() <= 1e-15 * x.abs().max(1e-12) {
                break;
            }
            prev = x;
        }
        Ok(self.tip().displacement)
    }

    pub fn reset(&mut self) {
        self.q = [0.0; 2];
        self.v = [0.0; 2];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ContourClass, RecessSide};
    use approx::assert_relative_eq;

    const MM: f64 = 1e-3;

    fn params() -> BeamParams {
        BeamParams::new(1e9, 1.0 / 6.0 * 1e-12, 0.2)
    }

    fn hook() -> SnapHookProfile {
        SnapHookProfile {
            beam_length: 10.0 * MM,
            beam_width: 2.0 * MM,
            beam_thickness: 1.0 * MM,
            head_height: 2.0 * MM,
            joining_angle: 30f64.to_radians(),
            overlap: 0.5 * MM,
            contour: ContourClass::I,
            plateau_length: 1.0 * MM,
            ramp_length: 1.0 * MM,
            retain_angle: 80f64.to_radians(),
            recess_side: RecessSide::None,
        }
    }

    #[test]
    fn stiffness_examples() {
        assert_relative_eq!(slide_stiffness(&params(), 10.0 * MM).unwrap(), 500.0, max_relative = 1e-12);
        assert_relative_eq!(
            slide_stiffness(&params(), 20.0 * MM).unwrap(),
            500.0 / 8.0,
            max_relative = 1e-12
        );
        let tiny = BeamParams::new(1e9, 1e-30, 0.2);
        assert!(slide_stiffness(&tiny, 10.0 * MM).unwrap() < 1e-12);
        assert!(slide_stiffness(&params(), 0.0).is_err());
        let kt = hinge_stiffness(&params(), 10.0 * MM, 1e-7).unwrap();
        assert_relative_eq!(kt, 0.05, max_relative = 1e-9);
        let kt_half = hinge_stiffness(&params(), 10.0 * MM, 0.5e-7).unwrap();
        assert!(((kt - kt_half) / kt).abs() < 1e-6);
        assert!(hinge_stiffness(&params(), 0.0, 1e-7).is_err());
    }

    #[test]
    fn damping_and_series_examples() {
        assert_relative_eq!(critical_damping(1.0, 4.0).unwrap(), 4.0);
        assert_eq!(critical_damping(0.0, 4.0).unwrap(), 0.0);
        assert_relative_eq!(critical_damping(0.25, 100.0).unwrap(), 10.0);
        assert!(critical_damping(1.0, 0.0).is_err());
        assert_eq!(series_stiffness(1, 7.0).unwrap(), 7.0);
        assert_relative_eq!(series_stiffness(2, 0.05).unwrap(), 0.10);
        assert_eq!(series_stiffness(4, 3.0).unwrap(), 12.0);
        assert_eq!(series_stiffness(0, 3.0), Err(LumpedError::ZeroCount));
    }

    #[test]
    fn build_variants() {
        let cfg = LumpedConfig::default();
        let p = hook();
        let slide = build(LumpedVariant::Slide, &p, &params(), &cfg).unwrap();
        assert_eq!(slide.dofs(), 1);
        assert_relative_eq!(slide.submodels[0].stiffness, 500.0, max_relative = 1e-12);
        let one = build(LumpedVariant::OneHinge, &p, &params(), &cfg).unwrap();
        assert_relative_eq!(one.submodels[0].stiffness, 0.05, max_relative = 1e-9);
        let two = build(LumpedVariant::TwoHinge, &p, &params(), &cfg).unwrap();
        assert_eq!(two.dofs(), 2);
        assert_relative_eq!(two.submodels[0].stiffness, 0.10, max_relative = 1e-9);
        assert_relative_eq!(two.submodels[1].stiffness, 0.025, max_relative = 1e-9);
        assert_relative_eq!(two.segment_lengths.iter().sum::<f64>(), p.beam_length);
    }

    #[test]
    fn rest_without_contact_stays_at_rest() {
        let mut m = build(LumpedVariant::TwoHinge, &hook(), &params(), &LumpedConfig::default()).unwrap();
        let forces = m.step(0.0, 0.5, 0.2, 1e-4).unwrap();
        assert_eq!(forces, JoiningForces::ZERO);
        assert_eq!(m.q, [0.0; 2]);
        assert_eq!(m.v, [0.0; 2]);
    }

    #[test]
    fn slide_static_load_follows_hooke() {
        let mut m = build(LumpedVariant::Slide, &hook(), &params(), &LumpedConfig::default()).unwrap();
        let x = m.settle_under_load(0.2, 1e-4, 200_000).unwrap();
        assert_relative_eq!(x, 0.2 / 500.0, max_relative = 1e-2);
    }

    #[test]
    fn step_response_does_not_overshoot() {
        for variant in [LumpedVariant::Slide, LumpedVariant::OneHinge, LumpedVariant::TwoHinge] {
            let mut m = build(variant, &hook(), &params(), &LumpedConfig::default()).unwrap();
            let target = 0.2 / 500.0;
            let mut peak: f64 = 0.0;
            for _ in 0..20_000 {
                m.step_under_load(0.2, 1e-4).unwrap();
                peak = peak.max(m.tip().displacement);
            }
            assert!(peak <= m.tip().displacement * 1.01, "{variant:?}: peak {peak} vs {target}");
        }
    }

    #[test]
    fn invalid_timestep_rejected() {
        let mut m = build(LumpedVariant::Slide, &hook(), &params(), &LumpedConfig::default()).unwrap();
        assert_eq!(m.step(0.0, 0.0, 0.2, 2e-3), Err(LumpedError::InvalidTimestep(2e-3)));
    }

    #[test]
    fn penetration_pushes_tip_out() {
        let mut m = build(LumpedVariant::OneHinge, &hook(), &params(), &LumpedConfig::default()).unwrap();
        let f = 0.5 * MM;
        let mut forces = JoiningForces::ZERO;
        for _ in 0..5000 {
            forces = m.step(f, 30f64.to_radians(), 0.2, 1e-4).unwrap();
        }
        // Contact spring 100x stiffer than the beam leaves ~1% residual penetration.
        assert_relative_eq!(m.tip().displacement, f * 100.0 / 101.0, max_relative = 2e-3);
        assert_relative_eq!(forces.lateral, 500.0 * f * 100.0 / 101.0, max_relative = 5e-3);
        let gamma = m.tip().angle;
        let want = joining_force(forces.lateral, 30f64.to_radians(), gamma, 0.2).unwrap();
        assert_relative_eq!(forces.joining, want, max_relative = 1e-12);
    }

    #[test]
    fn free_response_dissipates_and_crosses_at_most_once() {
        for variant in [LumpedVariant::Slide, LumpedVariant::OneHinge, LumpedVariant::TwoHinge] {
            let mut m = build(variant, &hook(), &params(), &LumpedConfig::default()).unwrap();
            for i in 0..m.dofs() {
                m.q[i] = if m.variant == LumpedVariant::Slide { 0.3 * MM } else { 0.02 };
            }
            let mut energy = m.energy();
            let mut crossings = 0;
            let mut sign = m.tip().displacement.signum();
            for _ in 0..20_000 {
                m.step_under_load(0.0, 1e-4).unwrap();
                let e = m.energy();
                assert!(e <= energy * (1.0 + 1e-12), "{variant:?}: energy grew");
                energy = e;
                let x = m.tip().displacement;
                if x != 0.0 && x.signum() != sign {
                    crossings += 1;
                    sign = x.signum();
                }
            }
            assert!(crossings <= 1, "{variant:?}: {crossings} crossings");
        }
    }
}

//! Learning-facing view of the skill environment: scaled flat observations.

use serde::{Deserialize, Serialize};

use crate::skills::{Action, SkillEnv, SkillError, StepOutcome};
use crate::world::{Observation, RailPlacement};

/// Divisors that bring observation components to order one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObsScale {
    /// Position offset in m.
    pub position: f64,
    /// Force in N.
    pub force: f64,
    /// Moments about x, y, z in N·m.
    pub moment: [f64; 3],
}

impl Default for ObsScale {
    fn default() -> Self {
        ObsScale {
            position: 0.01,
            force: 10.0,
            moment: [0.5, 0.5, 0.05],
        }
    }
}

impl ObsScale {
    pub fn apply(&self, obs: &Observation) -> Vec<f64> {
        let mut v = Vec::with_capacity(Observation::DIM);
        v.extend(obs.p_rel.iter().map(|p| p / self.position));
        v.extend_from_slice(&obs.orientation);
        v.extend(obs.wrench.force.iter().map(|f| f / self.force));
        v.extend(obs.wrench.moment.iter().zip(&self.moment).map(|(m, s)| m / s));
        v
    }
}

/// Skill environment with flat, scaled observations and slice actions.
#[derive(Debug, Clone)]
pub struct RlEnv {
    pub inner: SkillEnv,
    pub scale: ObsScale,
}

impl RlEnv {
    pub fn new(inner: SkillEnv, scale: ObsScale) -> Self {
        RlEnv { inner, scale }
    }

    pub fn obs_dim(&self) -> usize {
        Observation::DIM
    }

    pub fn reset(&mut self, seed: Option<u64>) -> Result<Vec<f64>, SkillError> {
        let obs = self.inner.reset(seed)?;
        Ok(self.scale.apply(&obs))
    }

    pub fn reset_with(&mut self, rail: RailPlacement) -> Result<Vec<f64>, SkillError> {
        let obs = self.inner.reset_with(rail)?;
        Ok(self.scale.apply(&obs))
    }

    pub fn step(&mut self, action: &[f64]) -> Result<(Vec<f64>, StepOutcome), SkillError> {
        let out = self.inner.step(&Action::from_slice(action)?)?;
        Ok((self.scale.apply(&out.observation), out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::Wrench;

    #[test]
    fn scaling_layout() {
        let obs = Observation {
            p_rel: [0.01, 0.0, -0.02],
            orientation: [1.0, 0.0, 0.0, 0.0],
            wrench: Wrench {
                force: [10.0, 0.0, -5.0],
                moment: [0.5, -1.0, 0.05],
            },
        };
        let v = ObsScale::default().apply(&obs);
        assert_eq!(v.len(), 13);
        assert_eq!(v, vec![1.0, 0.0, -2.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -0.5, 1.0, -2.0, 1.0]);
    }
}

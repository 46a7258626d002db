//! Scenario files: TOML in boundary units (mm, degrees, N, s) converted to
//! the SI configurations used internally. Unknown keys are rejected and
//! errors carry the key path of the offending entry.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::beam::{BeamParams, EffectiveLength};
use crate::geometry::{ContourClass, RailProfile, RecessSide, SnapHookProfile};
use crate::lumped::LumpedConfig;
use crate::rl::{Algorithm, GridSpec, ObsScale, TrainConfig};
use crate::skills::{Range, SkillRanges};
use crate::world::{
    ControlConfig, JoiningModel, RandomizationConfig, SuccessConfig, ToothGeometry, WorldConfig,
};

pub const SCHEMA_VERSION: u32 = 1;

const MM: f64 = 1e-3;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("scenario key `{key}`: {message}")]
    Parse { key: String, message: String },
    #[error("scenario key `{key}`: {message}")]
    Invalid { key: String, message: String },
    #[error("unsupported scenario schema version {0} (supported: {SCHEMA_VERSION})")]
    Schema(u32),
}

impl ScenarioError {
    /// Key path of the offending entry, when known.
    pub fn key(&self) -> Option<&str> {
        match self {
            ScenarioError::Parse { key, .. } | ScenarioError::Invalid { key, .. } => Some(key),
            _ => None,
        }
    }
}

fn invalid(key: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HookSection {
    pub beam_length_mm: f64,
    pub beam_width_mm: f64,
    pub beam_thickness_mm: f64,
    pub head_height_mm: f64,
    pub joining_angle_deg: f64,
    pub overlap_mm: f64,
    pub contour: ContourClass,
    pub plateau_length_mm: f64,
    pub ramp_length_mm: f64,
    pub retain_angle_deg: f64,
    pub recess_side: RecessSide,
    pub recess_angle_deg: f64,
    pub jam_yaw_deg: f64,
    /// Parallel bending beams.
    pub beams: u32,
    pub tooth_depth_mm: f64,
    pub tooth_width_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RailSection {
    pub width_mm: f64,
    pub edge_height_mm: f64,
    pub lip_depth_mm: f64,
    pub fixed_hook_clearance_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectiveLengthKind {
    Constant,
    LinearProgress,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamSection {
    pub secant_modulus_mpa: f64,
    pub friction: f64,
    /// Apply the one-half lateral-force correction.
    pub corrected: bool,
    pub effective_length: EffectiveLengthKind,
    /// analytic, slide, one_hinge or two_hinge.
    pub model: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LumpedSection {
    pub density_kg_m3: f64,
    pub epsilon_n: f64,
    pub contact_factor: f64,
    pub max_velocity: f64,
    pub dt_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomizationSection {
    pub dx_range_mm: f64,
    pub yaw_range_deg: f64,
    pub force_noise_n: f64,
    pub mount_positions_mm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuccessSection {
    pub yaw_tolerance_deg: f64,
    pub position_tolerance_mm: f64,
    pub weight_x_mm: f64,
    pub weight_z_mm: f64,
    pub weight_pitch_deg: f64,
    pub weight_yaw_deg: f64,
    /// Skills per episode.
    pub budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlSection {
    pub period_ms: f64,
    pub admittance_gain_mm_per_ns: f64,
    pub max_speed_mm_s: f64,
    pub rotation_band_n: f64,
    pub contact_stiffness_n_per_mm: f64,
    pub force_limit_n: f64,
    pub overlap_threshold_mm: f64,
    pub overlap_penalty: f64,
    pub yaw_stiffness_nm_per_rad: f64,
    pub lin_speed_mm_s: f64,
    pub lin_rate_deg_s: f64,
    pub home_height_mm: f64,
    pub pre_height_mm: f64,
    pub pre_pitch_deg: f64,
    pub land_offset_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonitorSection {
    pub timeout_s: f64,
    pub contact_threshold_n: f64,
    pub settle_tolerance_n: f64,
    pub settle_time_s: f64,
    pub stall_time_s: f64,
    pub goal_tolerance_mm: f64,
    pub goal_angle_tolerance_deg: f64,
}

/// Parameter ranges `[lo, hi]` of the agent's action decoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RangeSection {
    pub lin_dp_x_mm: [f64; 2],
    pub lin_pitch_deg: [f64; 2],
    pub approach_speed_mm_s: [f64; 2],
    pub approach_force_n: [f64; 2],
    pub slide_speed_mm_s: [f64; 2],
    pub slide_force_n: [f64; 2],
    pub slide_target_n: [f64; 2],
    pub slide_gain_mm_per_ns: [f64; 2],
    pub pivot_pitch_deg: [f64; 2],
    pub pivot_rate_deg_s: [f64; 2],
    pub pivot_yaw_deg: [f64; 2],
    pub pivot_fx_n: [f64; 2],
    pub pivot_fz_n: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct SkillsSection {
    pub ranges: RangeSection,
    pub monitors: MonitorSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub algorithm: Algorithm,
    pub total_steps: usize,
    pub eval_period: usize,
    pub eval_rollouts: usize,
    pub seeds: usize,
    pub gamma: f64,
    pub tau: f64,
    pub lr: f64,
    pub buffer_size: usize,
    pub batch_size: usize,
    pub learning_starts: usize,
    pub updates_per_step: usize,
    pub hidden: Vec<usize>,
    pub init_alpha: f64,
    pub position_scale_mm: f64,
    pub force_scale_n: f64,
    pub moment_scale_nm: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub hook: HookSection,
    pub rail: RailSection,
    pub beam: BeamSection,
    pub lumped: LumpedSection,
    pub randomization: RandomizationSection,
    pub success: SuccessSection,
    pub control: ControlSection,
    pub skills: SkillsSection,
    pub train: TrainSection,
    pub grid: GridSpec,
}

fn pair(r: Range, unit: f64) -> [f64; 2] {
    [r.lo / unit, r.hi / unit]
}

fn deg(rad: f64) -> f64 {
    rad.to_degrees()
}

const DEG: f64 = std::f64::consts::PI / 180.0;

impl Default for HookSection {
    fn default() -> Self {
        ScenarioFile::from_configs(&WorldConfig::default(), &SkillRanges::default(), &TrainConfig::default()).hook
    }
}
impl Default for RailSection {
    fn default() -> Self {
        ScenarioFile::from_configs(&WorldConfig::default(), &SkillRanges::default(), &TrainConfig::default()).rail
    }
}
impl Default for BeamSection {
    fn default() -> Self {
        ScenarioFile::from_configs(&WorldConfig::default(), &SkillRanges::default(), &TrainConfig::default()).beam
    }
}
impl Default for LumpedSection {
    fn default() -> Self {
        ScenarioFile::from_configs(&WorldConfig::default(), &SkillRanges::default(), &TrainConfig::default()).lumped
    }
}
impl Default for RandomizationSection {
    fn default() -> Self {
        ScenarioFile::from_configs(&WorldConfig::default(), &SkillRanges::default(), &TrainConfig::default()).randomization
    }
}
impl Default for SuccessSection {
    fn default() -> Self {
        ScenarioFile::from_configs(&WorldConfig::default(), &SkillRanges::default(), &TrainConfig::default()).success
    }
}
impl Default for ControlSection {
    fn default() -> Self {
        ScenarioFile::from_configs(&WorldConfig::default(), &SkillRanges::default(), &TrainConfig::default()).control
    }
}
impl Default for MonitorSection {
    fn default() -> Self {
        ScenarioFile::from_configs(&WorldConfig::default(), &SkillRanges::default(), &TrainConfig::default())
            .skills
            .monitors
    }
}
impl Default for RangeSection {
    fn default() -> Self {
        ScenarioFile::from_configs(&WorldConfig::default(), &SkillRanges::default(), &TrainConfig::default())
            .skills
            .ranges
    }
}
impl Default for TrainSection {
    fn default() -> Self {
        ScenarioFile::from_configs(&WorldConfig::default(), &SkillRanges::default(), &TrainConfig::default()).train
    }
}

impl ScenarioFile {
    /// Boundary-unit view of internal configurations.
    pub fn from_configs(w: &WorldConfig, r: &SkillRanges, t: &TrainConfig) -> Self {
        let h = &w.hook;
        let c = &w.control;
        let s = &w.success;
        ScenarioFile {
            schema_version: SCHEMA_VERSION,
            hook: HookSection {
                beam_length_mm: h.beam_length / MM,
                beam_width_mm: h.beam_width / MM,
                beam_thickness_mm: h.beam_thickness / MM,
                head_height_mm: h.head_height / MM,
                joining_angle_deg: deg(h.joining_angle),
                overlap_mm: h.overlap / MM,
                contour: h.contour,
                plateau_length_mm: h.plateau_length / MM,
                ramp_length_mm: h.ramp_length / MM,
                retain_angle_deg: deg(h.retain_angle),
                recess_side: h.recess_side,
                recess_angle_deg: deg(w.recess_angle),
                jam_yaw_deg: deg(w.jam_yaw),
                beams: w.beams,
                tooth_depth_mm: w.tooth.depth / MM,
                tooth_width_mm: w.tooth.width / MM,
            },
            rail: RailSection {
                width_mm: w.rail.width / MM,
                edge_height_mm: w.rail.edge_height / MM,
                lip_depth_mm: w.rail.lip_depth / MM,
                fixed_hook_clearance_mm: w.rail.fixed_hook_clearance / MM,
            },
            beam: BeamSection {
                secant_modulus_mpa: w.beam.secant_modulus / 1e6,
                friction: w.beam.friction,
                corrected: w.corrected,
                effective_length: match w.beam.effective_length {
                    EffectiveLength::Constant => EffectiveLengthKind::Constant,
                    EffectiveLength::LinearProgress => EffectiveLengthKind::LinearProgress,
                },
                model: w.joining_model.name().to_string(),
            },
            lumped: LumpedSection {
                density_kg_m3: w.lumped.density,
                epsilon_n: w.lumped.epsilon,
                contact_factor: w.lumped.contact_factor,
                max_velocity: w.lumped.max_velocity,
                dt_ms: w.lumped_dt * 1e3,
            },
            randomization: RandomizationSection {
                dx_range_mm: w.randomization.dx_range / MM,
                yaw_range_deg: deg(w.randomization.yaw_range),
                force_noise_n: w.randomization.force_noise,
                mount_positions_mm: w.randomization.mount_positions.iter().map(|m| m / MM).collect(),
            },
            success: SuccessSection {
                yaw_tolerance_deg: deg(s.yaw_tolerance),
                position_tolerance_mm: s.position_tolerance / MM,
                weight_x_mm: s.weight_x / MM,
                weight_z_mm: s.weight_z / MM,
                weight_pitch_deg: deg(s.weight_pitch),
                weight_yaw_deg: deg(s.weight_yaw),
                budget: w.budget,
            },
            control: ControlSection {
                period_ms: c.period * 1e3,
                admittance_gain_mm_per_ns: c.admittance_gain / MM,
                max_speed_mm_s: c.max_speed / MM,
                rotation_band_n: c.rotation_band,
                contact_stiffness_n_per_mm: c.contact_stiffness * MM,
                force_limit_n: c.force_limit,
                overlap_threshold_mm: c.overlap_threshold / MM,
                overlap_penalty: c.overlap_penalty,
                yaw_stiffness_nm_per_rad: c.yaw_stiffness,
                lin_speed_mm_s: c.lin_speed / MM,
                lin_rate_deg_s: deg(c.lin_rate),
                home_height_mm: c.home_height / MM,
                pre_height_mm: c.pre_height / MM,
                pre_pitch_deg: deg(c.pre_pitch),
                land_offset_mm: c.land_offset / MM,
            },
            skills: SkillsSection {
                ranges: RangeSection {
                    lin_dp_x_mm: pair(r.lin_dp_x, MM),
                    lin_pitch_deg: pair(r.lin_pitch, DEG),
                    approach_speed_mm_s: pair(r.approach_speed, MM),
                    approach_force_n: pair(r.approach_force, 1.0),
                    slide_speed_mm_s: pair(r.slide_speed, MM),
                    slide_force_n: pair(r.slide_force, 1.0),
                    slide_target_n: pair(r.slide_target, 1.0),
                    slide_gain_mm_per_ns: pair(r.slide_gain, MM),
                    pivot_pitch_deg: pair(r.pivot_pitch, DEG),
                    pivot_rate_deg_s: pair(r.pivot_rate, DEG),
                    pivot_yaw_deg: pair(r.pivot_yaw, DEG),
                    pivot_fx_n: pair(r.pivot_fx, 1.0),
                    pivot_fz_n: pair(r.pivot_fz, 1.0),
                },
                monitors: MonitorSection {
                    timeout_s: c.skill_timeout,
                    contact_threshold_n: c.contact_threshold,
                    settle_tolerance_n: c.settle_tolerance,
                    settle_time_s: c.settle_time,
                    stall_time_s: c.stall_time,
                    goal_tolerance_mm: c.goal_tolerance / MM,
                    goal_angle_tolerance_deg: deg(c.goal_angle_tolerance),
                },
            },
            train: TrainSection {
                algorithm: t.algorithm,
                total_steps: t.total_steps,
                eval_period: t.eval_period,
                eval_rollouts: t.eval_rollouts,
                seeds: t.seeds,
                gamma: t.gamma,
                tau: t.tau,
                lr: t.lr,
                buffer_size: t.buffer_size,
                batch_size: t.batch_size,
                learning_starts: t.learning_starts,
                updates_per_step: t.updates_per_step,
                hidden: t.hidden.clone(),
                init_alpha: t.init_alpha,
                position_scale_mm: t.obs_scale.position / MM,
                force_scale_n: t.obs_scale.force,
                moment_scale_nm: t.obs_scale.moment,
            },
            grid: GridSpec::default(),
        }
    }

    pub fn world_config(&self) -> Result<WorldConfig, ScenarioError> {
        let h = &self.hook;
        let c = &self.control;
        let m = &self.skills.monitors;
        let hook = SnapHookProfile {
            beam_length: h.beam_length_mm * MM,
            beam_width: h.beam_width_mm * MM,
            beam_thickness: h.beam_thickness_mm * MM,
            head_height: h.head_height_mm * MM,
            joining_angle: h.joining_angle_deg * DEG,
            overlap: h.overlap_mm * MM,
            contour: h.contour,
            plateau_length: h.plateau_length_mm * MM,
            ramp_length: h.ramp_length_mm * MM,
            retain_angle: h.retain_angle_deg * DEG,
            recess_side: h.recess_side,
        };
        hook.validate().map_err(|e| invalid("hook", e.to_string()))?;
        let rail = RailProfile {
            width: self.rail.width_mm * MM,
            edge_height: self.rail.edge_height_mm * MM,
            lip_depth: self.rail.lip_depth_mm * MM,
            fixed_hook_clearance: self.rail.fixed_hook_clearance_mm * MM,
        };
        rail.validate().map_err(|e| invalid("rail", e.to_string()))?;
        let mut beam = BeamParams::for_profile(&hook, self.beam.secant_modulus_mpa * 1e6, self.beam.friction)
            .map_err(|e| invalid("beam", e.to_string()))?;
        beam.effective_length = match self.beam.effective_length {
            EffectiveLengthKind::Constant => EffectiveLength::Constant,
            EffectiveLengthKind::LinearProgress => EffectiveLength::LinearProgress,
        };
        let joining_model: JoiningModel = self
            .beam
            .model
            .parse()
            .map_err(|e: String| invalid("beam.model", e))?;
        let r = &self.randomization;
        let s = &self.success;
        let cfg = WorldConfig {
            hook,
            rail,
            beam,
            beams: h.beams,
            corrected: self.beam.corrected,
            joining_model,
            lumped: LumpedConfig {
                density: self.lumped.density_kg_m3,
                epsilon: self.lumped.epsilon_n,
                contact_factor: self.lumped.contact_factor,
                max_velocity: self.lumped.max_velocity,
            },
            lumped_dt: self.lumped.dt_ms * 1e-3,
            tooth: ToothGeometry {
                depth: h.tooth_depth_mm * MM,
                width: h.tooth_width_mm * MM,
            },
            jam_yaw: h.jam_yaw_deg * DEG,
            recess_angle: h.recess_angle_deg * DEG,
            control: ControlConfig {
                period: c.period_ms * 1e-3,
                admittance_gain: c.admittance_gain_mm_per_ns * MM,
                max_speed: c.max_speed_mm_s * MM,
                rotation_band: c.rotation_band_n,
                contact_stiffness: c.contact_stiffness_n_per_mm / MM,
                force_limit: c.force_limit_n,
                overlap_threshold: c.overlap_threshold_mm * MM,
                overlap_penalty: c.overlap_penalty,
                yaw_stiffness: c.yaw_stiffness_nm_per_rad,
                skill_timeout: m.timeout_s,
                contact_threshold: m.contact_threshold_n,
                settle_tolerance: m.settle_tolerance_n,
                settle_time: m.settle_time_s,
                stall_time: m.stall_time_s,
                goal_tolerance: m.goal_tolerance_mm * MM,
                goal_angle_tolerance: m.goal_angle_tolerance_deg * DEG,
                lin_speed: c.lin_speed_mm_s * MM,
                lin_rate: c.lin_rate_deg_s * DEG,
                home_height: c.home_height_mm * MM,
                pre_height: c.pre_height_mm * MM,
                pre_pitch: c.pre_pitch_deg * DEG,
                land_offset: c.land_offset_mm * MM,
            },
            success: SuccessConfig {
                yaw_tolerance: s.yaw_tolerance_deg * DEG,
                position_tolerance: s.position_tolerance_mm * MM,
                weight_x: s.weight_x_mm * MM,
                weight_z: s.weight_z_mm * MM,
                weight_pitch: s.weight_pitch_deg * DEG,
                weight_yaw: s.weight_yaw_deg * DEG,
            },
            randomization: RandomizationConfig {
                dx_range: r.dx_range_mm * MM,
                yaw_range: r.yaw_range_deg * DEG,
                force_noise: r.force_noise_n,
                mount_positions: r.mount_positions_mm.iter().map(|v| v * MM).collect(),
            },
            budget: s.budget,
        };
        cfg.validate().map_err(|e| {
            let msg = e.to_string();
            invalid(section_of(&msg), msg)
        })?;
        Ok(cfg)
    }

    pub fn skill_ranges(&self) -> Result<SkillRanges, ScenarioError> {
        let r = &self.skills.ranges;
        let mk = |key: &str, v: [f64; 2], unit: f64| -> Result<Range, ScenarioError> {
            if !(v[0].is_finite() && v[1].is_finite() && v[0] < v[1]) {
                return Err(invalid(&format!("skills.ranges.{key}"), format!("need lo < hi, got {v:?}")));
            }
            Ok(Range::new(v[0] * unit, v[1] * unit))
        };
        let ranges = SkillRanges {
            lin_dp_x: mk("lin_dp_x_mm", r.lin_dp_x_mm, MM)?,
            lin_pitch: mk("lin_pitch_deg", r.lin_pitch_deg, DEG)?,
            approach_speed: mk("approach_speed_mm_s", r.approach_speed_mm_s, MM)?,
            approach_force: mk("approach_force_n", r.approach_force_n, 1.0)?,
            slide_speed: mk("slide_speed_mm_s", r.slide_speed_mm_s, MM)?,
            slide_force: mk("slide_force_n", r.slide_force_n, 1.0)?,
            slide_target: mk("slide_target_n", r.slide_target_n, 1.0)?,
            slide_gain: mk("slide_gain_mm_per_ns", r.slide_gain_mm_per_ns, MM)?,
            pivot_pitch: mk("pivot_pitch_deg", r.pivot_pitch_deg, DEG)?,
            pivot_rate: mk("pivot_rate_deg_s", r.pivot_rate_deg_s, DEG)?,
            pivot_yaw: mk("pivot_yaw_deg", r.pivot_yaw_deg, DEG)?,
            pivot_fx: mk("pivot_fx_n", r.pivot_fx_n, 1.0)?,
            pivot_fz: mk("pivot_fz_n", r.pivot_fz_n, 1.0)?,
        };
        ranges.validate().map_err(|e| invalid("skills.ranges", e.to_string()))?;
        Ok(ranges)
    }

    /// Training configuration; the seed comes from the command line.
    pub fn train_config(&self, seed: u64) -> Result<TrainConfig, ScenarioError> {
        let t = &self.train;
        let cfg = TrainConfig {
            algorithm: t.algorithm,
            total_steps: t.total_steps,
            eval_period: t.eval_period,
            eval_rollouts: t.eval_rollouts,
            seeds: t.seeds,
            seed,
            gamma: t.gamma,
            tau: t.tau,
            lr: t.lr,
            buffer_size: t.buffer_size,
            batch_size: t.batch_size,
            learning_starts: t.learning_starts,
            updates_per_step: t.updates_per_step,
            hidden: t.hidden.clone(),
            init_alpha: t.init_alpha,
            obs_scale: ObsScale {
                position: t.position_scale_mm * MM,
                force: t.force_scale_n,
                moment: t.moment_scale_nm,
            },
        };
        cfg.validate().map_err(|e| invalid("train", e.to_string()))?;
        Ok(cfg)
    }

    pub fn grid_spec(&self, seed: u64) -> Result<GridSpec, ScenarioError> {
        let g = &self.grid;
        for (key, v) in [("grid.yaw_deg", &g.yaw_deg), ("grid.mount_mm", &g.mount_mm), ("grid.dx_mm", &g.dx_mm)] {
            if v.is_empty() || !v.iter().all(|x| x.is_finite()) {
                return Err(invalid(key, "must be a non-empty list of finite values"));
            }
        }
        if g.rollouts == 0 {
            return Err(invalid("grid.rollouts", "must be positive"));
        }
        Ok(GridSpec { seed, ..g.clone() })
    }
}

/// Maps a world validation message to the scenario section it refers to.
fn section_of(msg: &str) -> &'static str {
    if msg.contains("control.") {
        "control"
    } else if msg.contains("lumped") {
        "lumped.dt_ms"
    } else if msg.contains("randomization") {
        "randomization"
    } else if msg.contains("budget") {
        "success.budget"
    } else if msg.contains("beams") {
        "hook.beams"
    } else {
        "beam"
    }
}

/// A loaded scenario with its converted configurations.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub world: WorldConfig,
    pub ranges: SkillRanges,
    /// SHA-256 of the source text, hex encoded.
    pub hash: String,
    pub source: Option<PathBuf>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Scenario {
    pub fn from_file_struct(file: ScenarioFile, hash: String, source: Option<PathBuf>) -> Result<Self, ScenarioError> {
        if file.schema_version != SCHEMA_VERSION {
            return Err(ScenarioError::Schema(file.schema_version));
        }
        Ok(Scenario {
            world: file.world_config()?,
            ranges: file.skill_ranges()?,
            file,
            hash,
            source,
        })
    }

    /// Built-in default scenario.
    pub fn default_scenario() -> Self {
        let file = ScenarioFile::default();
        let text = toml::to_string(&file).expect("default scenario serializes");
        Scenario::from_file_struct(file, sha256_hex(text.as_bytes()), None).expect("default scenario is valid")
    }

    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let de = toml::Deserializer::new(text);
        let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            let message = e.inner().message().to_string();
            ScenarioError::Parse { key, message }
        })?;
        Scenario::from_file_struct(file, sha256_hex(text.as_bytes()), None)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut s = Scenario::parse(&text)?;
        s.source = Some(path.to_path_buf());
        Ok(s)
    }

    /// File text with unit-conversion round-off trimmed to 12 significant
    /// digits.
    pub fn to_toml(&self) -> String {
        let mut value = toml::Value::try_from(&self.file).expect("scenario serializes");
        tidy_floats(&mut value);
        toml::to_string(&value).expect("scenario serializes")
    }
}

fn tidy_floats(v: &mut toml::Value) {
    match v {
        toml::Value::Float(f) if f.is_finite() && *f != 0.0 => {
            if let Ok(r) = format!("{:.11e}", *f).parse::<f64>() {
                *f = r;
            }
        }
        toml::Value::Array(a) => a.iter_mut().for_each(tidy_floats),
        toml::Value::Table(t) => t.iter_mut().for_each(|(_, x)| tidy_floats(x)),
        _ => {}
    }
}

impl Default for ScenarioFile {
    fn default() -> Self {
        ScenarioFile::from_configs(&WorldConfig::default(), &SkillRanges::default(), &TrainConfig::default())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let s = Scenario::default_scenario();
        let back = Scenario::parse(&s.to_toml()).unwrap();
        assert_eq!(back.to_toml(), s.to_toml());
        let w = WorldConfig::default();
        assert!((back.world.hook.beam_length - w.hook.beam_length).abs() < 1e-15);
        assert!((back.world.control.pre_pitch - w.control.pre_pitch).abs() < 1e-12);
        assert!((back.world.beam.area_moment - w.beam.area_moment).abs() < 1e-24);
        let r = SkillRanges::default();
        assert!((back.ranges.pivot_rate.hi - r.pivot_rate.hi).abs() < 1e-12);
        assert!((back.ranges.slide_gain.lo - r.slide_gain.lo).abs() < 1e-15);
    }

    #[test]
    fn empty_file_uses_defaults() {
        let s = Scenario::parse("schema_version = 1\n").unwrap();
        assert_eq!(s.file, ScenarioFile::default());
    }

    #[test]
    fn unknown_key_reports_path() {
        let err = Scenario::parse("schema_version = 1\n[hook]\nbeam_lenght_mm = 8.0\n").unwrap_err();
        assert_eq!(err.key(), Some("hook.beam_lenght_mm"));
        assert!(err.to_string().contains("beam_lenght_mm"), "{err}");
    }

    #[test]
    fn wrong_type_reports_path() {
        let err = Scenario::parse("[control]\nperiod_ms = \"fast\"\n").unwrap_err();
        assert_eq!(err.key(), Some("control.period_ms"));
    }

    #[test]
    fn invalid_values_rejected() {
        let err = Scenario::parse("[skills.ranges]\npivot_fz_n = [30.0, 3.0]\n").unwrap_err();
        assert_eq!(err.key(), Some("skills.ranges.pivot_fz_n"));
        assert!(Scenario::parse("[hook]\nbeam_length_mm = -1.0\n").is_err());
        assert!(Scenario::parse("[beam]\nmodel = \"three_hinge\"\n").is_err());
        assert!(matches!(Scenario::parse("schema_version = 7\n"), Err(ScenarioError::Schema(7))));
    }

    #[test]
    fn hash_tracks_text() {
        let a = Scenario::parse("schema_version = 1\n").unwrap();
        let b = Scenario::parse("schema_version = 1\n\n").unwrap();
        assert_ne!(a.hash, b.hash);
        assert_eq!(a.hash, sha256_hex(b"schema_version = 1\n"));
        assert_eq!(a.hash.len(), 64);
    }
}

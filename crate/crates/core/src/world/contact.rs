//! Penalty contacts between terminal and rail flange.

use super::{WorldConfig, WorldState, Wrench};
use crate::beam::JoiningForces;
use crate::geometry::{DeflectionSample, RecessSide, RelativePose};

/// Height above the base underside within which a rail corner still counts
/// as touching the base or the notch.
const CAPTURE: f64 = 3e-3;

/// Planar load on the terminal: force in the rail X-Z plane and the moment
/// about `O`, positive in the direction that raises the snap-hook side.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlanarLoad {
    pub fx: f64,
    pub fz: f64,
    pub moment: f64,
}

impl PlanarLoad {
    fn add_point_force(&mut self, r: [f64; 2], f: [f64; 2]) {
        self.fx += f[0];
        self.fz += f[1];
        self.moment += r[1] * f[0] - r[0] * f[1];
    }

    fn add(&mut self, o: &PlanarLoad) {
        self.fx += o.fx;
        self.fz += o.fz;
        self.moment += o.moment;
    }

    pub fn magnitude(&self) -> f64 {
        self.fx.hypot(self.fz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ContactReport {
    /// Rail pushing on the terminal base.
    pub base: PlanarLoad,
    /// Rail pushing on the fixed-hook tooth.
    pub hook: PlanarLoad,
    /// Snap-hook reaction (joining and lateral force) plus any apex wedge.
    pub joining: PlanarLoad,
    /// Seat restraint of a latched terminal.
    pub latch: PlanarLoad,
    pub yaw_moment: f64,
    pub joining_forces: JoiningForces,
    pub sample: DeflectionSample,
    pub base_active: bool,
    pub hook_active: bool,
    /// Fixed-hook face within the clearance of the rail edge.
    pub hook_near: bool,
    pub jam_active: bool,
}

impl ContactReport {
    pub fn total(&self) -> PlanarLoad {
        let mut t = PlanarLoad::default();
        t.add(&self.base);
        t.add(&self.hook);
        t.add(&self.joining);
        t.add(&self.latch);
        t
    }

    /// Contact wrench in the tool frame (X along world X, Z pointing down).
    pub fn wrench(&self) -> Wrench {
        let t = self.total();
        Wrench {
            force: [t.fx, 0.0, -t.fz],
            moment: [0.0, t.moment, self.yaw_moment],
        }
    }
}

pub(super) fn evaluate(
    cfg: &WorldConfig,
    state: &WorldState,
    sample: DeflectionSample,
    forces: JoiningForces,
) -> ContactReport {
    let pose = state.relative_pose();
    let kc = cfg.control.contact_stiffness;
    let w = cfg.rail.width;
    let tf = cfg.rail.edge_height;
    let tooth = cfg.tooth;
    let placement = cfg.placement();
    let base_left = placement.beam_face_u;
    let origin = [pose.x, pose.z];
    let rel = |p: [f64; 2]| [p[0] - origin[0], p[1] - origin[1]];

    let mut r = ContactReport {
        sample,
        joining_forces: forces,
        ..ContactReport::default()
    };

    // Rail corners against the base underside, the tooth and the notch.
    for corner in [[0.0, 0.0], [0.0, -tf], [-w, 0.0]] {
        let [u, v] = pose.to_terminal(corner);
        if v <= 0.0 && v >= -tooth.depth && u > -cfg.rail.fixed_hook_clearance && u <= tooth.width {
            r.hook_near = true;
        }
        let hit = if v > 0.0 && v < CAPTURE {
            if u >= base_left && u <= 0.0 {
                Some((v, [0.0, 1.0], false))
            } else if u > 0.0 && u <= tooth.width {
                let d = u.hypot(v);
                Some((d, [u / d, v / d], true))
            } else {
                None
            }
        } else if v <= 0.0 && v >= -tooth.depth && u > 0.0 && u <= tooth.width {
            Some((u, [1.0, 0.0], true))
        } else {
            None
        };
        if let Some((pen, n, is_hook)) = hit {
            let d = pose.dir_to_rail(n);
            let f = [kc * pen * d[0], kc * pen * d[1]];
            if is_hook {
                r.hook.add_point_force(rel(corner), f);
                r.hook_active = true;
            } else {
                r.base.add_point_force(rel(corner), f);
                r.base_active = true;
            }
        }
    }

    // Terminal vertices inside the flange cross-section.
    let vertices = [
        ([0.0, -tooth.depth], true),
        ([tooth.width, -tooth.depth], true),
        ([base_left, 0.0], false),
    ];
    for (q, is_hook) in vertices {
        let p = pose.to_rail(q);
        if p[0] > -w && p[0] < 0.0 && p[1] > -tf && p[1] < 0.0 {
            let exits = [
                (-p[1], [0.0, 1.0]),
                (-p[0], [1.0, 0.0]),
                (p[0] + w, [-1.0, 0.0]),
                (p[1] + tf, [0.0, -1.0]),
            ];
            let (pen, n) = exits
                .into_iter()
                .min_by(|a, b| a.0.total_cmp(&b.0))
                .expect("non-empty");
            let f = [kc * pen * n[0], kc * pen * n[1]];
            if is_hook {
                r.hook.add_point_force(rel(p), f);
                r.hook_active = true;
            } else {
                r.base.add_point_force(rel(p), f);
                r.base_active = true;
            }
        }
    }

    // Snap-hook reaction at the lip corner: lateral force pushes the terminal
    // away from the rail along -u, the joining force resists insertion along +v.
    let lip = cfg.rail.lip_corner();
    if forces.lateral != 0.0 || forces.joining != 0.0 {
        let d = pose.dir_to_rail([-forces.lateral, forces.joining]);
        r.joining.add_point_force(rel(lip), d);
    }

    let latched = state.flags.snap_latched;
    let yaw_err = state.yaw_error();
    let rise = cfg.hook.rise_length();
    if !latched && sample.deflection > 0.0 && sample.progress > rise {
        let threshold = jam_threshold(cfg, yaw_err);
        if yaw_err.abs() > threshold {
            // A skewed head wedges at its apex instead of sliding over it.
            let d = pose.dir_to_rail([0.0, kc * (sample.progress - rise)]);
            r.joining.add_point_force(rel(lip), d);
            r.jam_active = true;
        }
    }

    if latched {
        let lever = -base_left;
        r.latch = seat_restraint(&pose, kc, lever);
    }

    if r.hook_near || latched {
        r.yaw_moment = -cfg.control.yaw_stiffness * yaw_err;
    }
    r
}

pub(super) fn recess_applies(cfg: &WorldConfig, yaw_err: f64) -> bool {
    match cfg.hook.recess_side {
        RecessSide::None => false,
        RecessSide::Left => yaw_err > 0.0,
        RecessSide::Right => yaw_err < 0.0,
    }
}

pub(super) fn jam_threshold(cfg: &WorldConfig, yaw_err: f64) -> f64 {
    if recess_applies(cfg, yaw_err) {
        cfg.jam_yaw + cfg.recess_angle
    } else {
        cfg.jam_yaw
    }
}

fn seat_restraint(pose: &RelativePose, kc: f64, lever: f64) -> PlanarLoad {
    PlanarLoad {
        fx: -kc * pose.x,
        fz: -kc * pose.z,
        moment: -kc * lever * lever * pose.pitch,
    }
}

//! Acceptance suite: one check per criterion, each printing a single
//! PASS/FAIL line. Runs as a plain binary so the lines are always visible.
//!
//! The two 30k-skill training runs execute on background threads while the
//! fast checks run.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use snapfit::beam::{area_moment, inclination_angle, joining_force, lateral_force, BeamParams};
use snapfit::geometry::{ContourClass, RecessSide, SnapHookProfile};
use snapfit::lumped::{
    build, critical_damping, hinge_stiffness, series_stiffness, slide_stiffness, LumpedConfig, LumpedVariant, MsdSubmodel,
};
use snapfit::rl::nn::{gradient_check, Activation, Mlp};
use snapfit::rl::{evaluate_grid, train, AgentPolicy, Algorithm, GridSpec, TrainConfig, TrainOutcome};
use snapfit::scenario::Scenario;
use snapfit::skills::{encode_action, nominal_terminal, nominal_trace, scripted_action, LogRow, SkillChoice, SkillEnv, SkillRanges};
use snapfit::world::{nominal_pre_pose, JoiningModel, Observation, RailPlacement, RandomizationConfig, TerminalPose, World, WorldConfig};

type Check = Result<String, String>;

const MM: f64 = 1e-3;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn test_params() -> BeamParams {
    BeamParams::new(1e9, 2.0 * MM * (1.0 * MM).powi(3) / 12.0, 0.2)
}

fn test_hook() -> SnapHookProfile {
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

fn c1_formula_oracles() -> Check {
    let p = test_params();
    let i = 2e-3 * 1e-9 / 12.0;
    let l = 10.0 * MM;
    let cases: Vec<(&str, f64, f64)> = vec![
        ("area_moment 2x1 mm", area_moment(2.0 * MM, 1.0 * MM).unwrap(), i),
        ("area_moment 12x1 m", area_moment(12.0, 1.0).unwrap(), 1.0),
        ("lateral_force raw", lateral_force(2.0 * MM, l, &p, false).unwrap(), 3.0 * 1e9 * i * 2e-3 / 1e-6),
        ("lateral_force corrected", lateral_force(2.0 * MM, l, &p, true).unwrap(), 1.5 * 1e9 * i * 2e-3 / 1e-6),
        ("inclination 2/10 mm", inclination_angle(2.0 * MM, l).unwrap(), 0.3),
        ("inclination 1/15 mm", inclination_angle(1.0 * MM, 15.0 * MM).unwrap(), 0.1),
        ("joining 45 deg", joining_force(1.0, PI / 8.0, PI / 8.0, 0.0).unwrap(), 1.0),
        (
            "joining mu 0.2",
            joining_force(1.0, 20f64.to_radians(), 0.0, 0.2).unwrap(),
            (0.2 + (PI / 9.0).tan()) / (1.0 - 0.2 * (PI / 9.0).tan()),
        ),
        ("slide_stiffness", slide_stiffness(&p, l).unwrap(), 3.0 * 1e9 * i / 1e-6),
        ("hinge_stiffness", hinge_stiffness(&p, l, 1e-7).unwrap(), 3.0 * 1e9 * i / 1e-6 * 1e-4),
        ("critical_damping 1/4", critical_damping(1.0, 4.0).unwrap(), 4.0),
        ("critical_damping 0.25/100", critical_damping(0.25, 100.0).unwrap(), 10.0),
        ("series 2", series_stiffness(2, 0.05).unwrap(), 0.10),
        ("series 4", series_stiffness(4, 3.0).unwrap(), 12.0),
    ];
    let start = Instant::now();
    let mut worst = 0.0f64;
    for (name, got, want) in &cases {
        let e = rel(*got, *want);
        worst = worst.max(e);
        ensure(e < 1e-9, format!("{name}: {got} vs {want} (rel {e:.2e})"))?;
    }
    // Hand values as printed in the specification tables.
    ensure(rel(lateral_force(2.0 * MM, l, &p, false).unwrap(), 1.0) < 1e-3, "1.000 N example")?;
    ensure(rel(cases[9].1, 0.05) < 1e-3, "0.0500 N m/rad example")?;
    ensure(rel(cases[7].1, 0.6083) < 1e-4, "0.6083 N example")?;
    let dt = start.elapsed().as_secs_f64();
    ensure(dt < 1.0, format!("took {dt:.2} s"))?;
    Ok(format!("{} oracles, worst relative error {worst:.1e}", cases.len()))
}

fn c2_inclination_consistency() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let l = rng.gen_range(1.0 * MM..50.0 * MM);
        let f = rng.gen_range(1e-7..0.3 * l);
        let p = BeamParams::new(rng.gen_range(1e8..1e10), rng.gen_range(1e-16..1e-10), 0.2);
        let fq = lateral_force(f, l, &p, false).unwrap();
        let via_force = fq * l * l / (2.0 * p.rigidity());
        worst = worst.max(rel(via_force, inclination_angle(f, l).unwrap()));
    }
    ensure(worst < 1e-12, format!("worst relative error {worst:.2e}"))?;
    Ok(format!("10^4 inputs, worst relative error {worst:.1e}"))
}

fn c3_correction_factor() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10_000 {
        let l = rng.gen_range(1.0 * MM..50.0 * MM);
        let f = rng.gen_range(0.0..0.5 * l);
        let p = BeamParams::new(rng.gen_range(1e8..1e10), rng.gen_range(1e-16..1e-10), 0.2);
        let raw = lateral_force(f, l, &p, false).unwrap();
        let cor = lateral_force(f, l, &p, true).unwrap();
        ensure(cor == 0.5 * raw, format!("f {f}: {cor} != 0.5 * {raw}"))?;
    }
    Ok("corrected == 0.5 * uncorrected bit-exactly on 10^4 inputs".into())
}

fn c4_hinge_small_angle() -> Check {
    let p = test_params();
    let mut worst = 0.0f64;
    for l in [5.0 * MM, 10.0 * MM, 20.0 * MM] {
        let k = slide_stiffness(&p, l).unwrap();
        let kt = hinge_stiffness(&p, l, 1e-7).unwrap();
        worst = worst.max(rel(kt, k * l * l));
    }
    ensure(worst < 1e-6, format!("relative error {worst:.2e}"))?;
    Ok(format!("k_t vs k l^2 relative error {worst:.1e}"))
}

/// Large-deflection cantilever under a tip load of fixed direction,
/// perpendicular to the undeformed axis: EI θ'' = -P cos θ, θ(0) = 0,
/// θ'(L) = 0, solved by shooting on θ'(0). Returns the lateral tip deflection.
fn elastica_tip(load: f64, l: f64, ei: f64) -> f64 {
    let n = 4000;
    let h = l / n as f64;
    let shoot = |k0: f64| -> (f64, f64) {
        // State: θ, κ, w.
        let rhs = |s: [f64; 3]| [s[1], -load / ei * s[0].cos(), s[0].sin()];
        let mut s = [0.0, k0, 0.0];
        for _ in 0..n {
            let a = rhs(s);
            let b = rhs([s[0] + 0.5 * h * a[0], s[1] + 0.5 * h * a[1], 0.0]);
            let c = rhs([s[0] + 0.5 * h * b[0], s[1] + 0.5 * h * b[1], 0.0]);
            let d = rhs([s[0] + h * c[0], s[1] + h * c[1], 0.0]);
            for j in 0..3 {
                s[j] += h / 6.0 * (a[j] + 2.0 * b[j] + 2.0 * c[j] + d[j]);
            }
        }
        (s[1], s[2])
    };
    let (mut lo, mut hi) = (0.0, 2.0 * load * l / ei);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if shoot(mid).0 > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    shoot(0.5 * (lo + hi)).1
}

fn c5_static_equivalence() -> Check {
    let start = Instant::now();
    let p = test_params();
    let hook = test_hook();
    let l = hook.beam_length;
    let k = 3.0 * p.rigidity() / l.powi(3);
    let cfg = LumpedConfig::default();
    let settle = |variant, load: f64| -> f64 {
        let mut m = build(variant, &hook, &p, &cfg).unwrap();
        m.settle_under_load(load, 1e-4, 200_000).unwrap()
    };
    let ratios = [0.01, 0.03, 0.05, 0.1];
    let (mut one_lin, mut two_lin, mut one_ex, mut two_ex) = (vec![], vec![], vec![], vec![]);
    for r in ratios {
        let load = k * r * l;
        let linear = load / k;
        let exact = elastica_tip(load, l, p.rigidity());
        let one = settle(LumpedVariant::OneHinge, load);
        let two = settle(LumpedVariant::TwoHinge, load);
        one_lin.push(rel(one, linear));
        two_lin.push(rel(two, linear));
        one_ex.push(rel(one, exact));
        two_ex.push(rel(two, exact));
    }
    let max = |v: &[f64]| v.iter().cloned().fold(0.0, f64::max);
    ensure(max(&one_lin) < 0.10, format!("one-hinge vs linear {:.3e}", max(&one_lin)))?;
    let small = 1e-6;
    let two_k = small / settle(LumpedVariant::TwoHinge, small);
    ensure(rel(two_k, k) < 0.05, format!("two-hinge series stiffness off by {:.2e}", rel(two_k, k)))?;
    let closer_exact = two_ex.iter().zip(&one_ex).all(|(t, o)| t <= o);
    ensure(
        closer_exact,
        format!("two-hinge not closer to the exact beam: {two_ex:?} vs {one_ex:?}"),
    )?;
    let literal = two_lin.iter().zip(&one_lin).all(|(t, o)| t <= o);
    let dt = start.elapsed().as_secs_f64();
    ensure(dt < 10.0, format!("took {dt:.1} s"))?;
    Ok(format!(
        "one-hinge vs linear tip formula <= {:.1e}; two-hinge stiffness error {:.1e}; vs exact beam two-hinge {:.1e} <= one-hinge {:.1e}; vs linear formula two-hinge <= one-hinge: {} (see README)",
        max(&one_lin),
        rel(two_k, k),
        max(&two_ex),
        max(&one_ex),
        if literal { "yes" } else { "no" }
    ))
}

/// Independent RK4 integration of one damped oscillator.
fn rk4_response(s: &MsdSubmodel, x0: f64, force: f64, t_end: f64) -> Vec<f64> {
    let period = 2.0 * PI * (s.inertia / s.stiffness).sqrt();
    let h = period / 2000.0;
    let f = |x: f64, v: f64| (force - s.stiffness * x - s.damping * v) / s.inertia;
    let (mut x, mut v) = (x0, 0.0);
    let mut out = Vec::new();
    let mut t = 0.0;
    while t < t_end.max(20.0 * period) {
        let (k1x, k1v) = (v, f(x, v));
        let (k2x, k2v) = (v + 0.5 * h * k1v, f(x + 0.5 * h * k1x, v + 0.5 * h * k1v));
        let (k3x, k3v) = (v + 0.5 * h * k2v, f(x + 0.5 * h * k2x, v + 0.5 * h * k2v));
        let (k4x, k4v) = (v + h * k3v, f(x + h * k3x, v + h * k3v));
        x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        out.push(x);
        t += h;
    }
    out
}

fn crossings(xs: &[f64], eq: f64, scale: f64) -> usize {
    let tol = 1e-9 * scale;
    let signs: Vec<f64> = xs.iter().map(|x| x - eq).filter(|d| d.abs() > tol).map(f64::signum).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

fn c6_critical_damping() -> Check {
    let world = WorldConfig::default();
    let hooks = [(test_hook(), test_params()), (world.hook.clone(), world.effective_beam())];
    let mut count = 0;
    let mut worst_over = 0.0f64;
    for (hook, params) in &hooks {
        for variant in [LumpedVariant::Slide, LumpedVariant::OneHinge, LumpedVariant::TwoHinge] {
            let mut m = build(variant, hook, params, &LumpedConfig::default()).unwrap();
            for s in &m.submodels {
                count += 1;
                let zeta = s.damping / (2.0 * (s.inertia * s.stiffness).sqrt());
                ensure((zeta - 1.0).abs() < 1e-12, format!("{variant:?}: damping ratio {zeta}"))?;
                let step = rk4_response(s, 0.0, 1.0, 0.0);
                let x_ss = 1.0 / s.stiffness;
                let over = step.iter().cloned().fold(0.0, f64::max) / x_ss - 1.0;
                worst_over = worst_over.max(over);
                ensure(over < 0.01, format!("{variant:?} step overshoot {over:.3e}"))?;
                let free = rk4_response(s, 1.0, 0.0, 0.0);
                ensure(crossings(&free, 0.0, 1.0) <= 1, format!("{variant:?} free response crosses twice"))?;
            }
            // Same checks on the chain as integrated by the simulator.
            let load = 0.1;
            let mut xs = Vec::new();
            for _ in 0..50_000 {
                m.step_under_load(load, 1e-4).unwrap();
                xs.push(m.tip().displacement);
            }
            let x_ss = *xs.last().unwrap();
            let over = xs.iter().cloned().fold(0.0, f64::max) / x_ss - 1.0;
            worst_over = worst_over.max(over);
            ensure(over < 0.01, format!("{variant:?} chain overshoot {over:.3e}"))?;
            let mut free = Vec::new();
            for _ in 0..50_000 {
                m.step_under_load(0.0, 1e-4).unwrap();
                free.push(m.tip().displacement);
            }
            ensure(crossings(&free, 0.0, x_ss) <= 1, format!("{variant:?} chain free response crosses twice"))?;
        }
    }
    Ok(format!("{count} sub-models, damping ratio 1, worst overshoot {worst_over:.1e}"))
}

struct Signature {
    peak: f64,
    peak_tick: usize,
    plateau: usize,
    decay: usize,
}

fn signature(rows: &[LogRow]) -> Result<Signature, String> {
    let fq: Vec<f64> = rows.iter().map(|r| r.lateral).collect();
    let (p, peak) = fq.iter().enumerate().fold((0, 0.0), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
    ensure(peak > 0.0, "no lateral force")?;
    // Peaks separated by a dip of more than 10 % of the maximum.
    let band = 0.1 * peak;
    let (mut peaks, mut rising, mut lo, mut hi) = (0, true, 0.0f64, 0.0f64);
    for &v in &fq {
        if rising {
            hi = hi.max(v);
            if v < hi - band && hi - lo > band {
                peaks += 1;
                rising = false;
                lo = v;
            }
        } else {
            lo = lo.min(v);
            if v > lo + band {
                rising = true;
                hi = v;
            }
        }
    }
    if rising && hi - lo > band {
        peaks += 1;
    }
    ensure(peaks == 1, format!("{peaks} force peaks"))?;
    let f_peak = rows.iter().enumerate().fold((0, 0.0), |a, (i, r)| if r.deflection > a.1 { (i, r.deflection) } else { a }).0;
    ensure(p.abs_diff(f_peak) <= 1, format!("force peak at {p}, deflection peak at {f_peak}"))?;
    Ok(Signature {
        peak,
        peak_tick: p,
        plateau: (0..=p).rev().take_while(|&i| fq[i] >= 0.97 * peak).count(),
        decay: (p..fq.len()).take_while(|&i| fq[i] >= 0.05 * peak).count(),
    })
}

fn c7_snap_in_signature() -> Check {
    let mut notes = Vec::new();
    for overlap in [0.5 * MM, -0.05 * MM] {
        for model in JoiningModel::ALL {
            let mut cfg = WorldConfig::default().with_model(model);
            cfg.hook.overlap = overlap;
            let (rows, info) = nominal_trace(&cfg).map_err(|e| e.to_string())?;
            ensure(info.success, format!("{model:?} s={overlap}: nominal assembly failed"))?;
            let sig = signature(&rows).map_err(|e| format!("{model:?} s={overlap}: {e}"))?;
            let limit = (-overlap).max(0.0) + 1e-6;
            let post = rows.iter().filter(|r| r.latched).map(|r| r.deflection).fold(0.0, f64::max);
            ensure(post <= limit, format!("{model:?}: post-latch deflection {post:e} > {limit:e}"))?;
            if overlap > 0.0 {
                notes.push(format!("{}@{}", model.name(), sig.peak_tick));
            }
        }
    }
    let mut shapes = Vec::new();
    for contour in [ContourClass::I, ContourClass::II, ContourClass::III] {
        let mut cfg = WorldConfig::default();
        cfg.hook.contour = contour;
        let (rows, _) = nominal_trace(&cfg).map_err(|e| e.to_string())?;
        let sig = signature(&rows).map_err(|e| format!("{contour:?}: {e}"))?;
        // Class III declines linearly: check straightness of the decay.
        let fq: Vec<f64> = rows.iter().map(|r| r.lateral).collect();
        let seg: Vec<f64> = fq[sig.peak_tick..sig.peak_tick + sig.decay].to_vec();
        shapes.push((contour, sig.plateau, sig.decay, straightness(&seg), sig.peak));
    }
    let (i, ii, iii) = (shapes[0], shapes[1], shapes[2]);
    ensure(i.1 <= 10, format!("class I plateau {} ticks", i.1))?;
    ensure(ii.1 >= 30 && iii.1 >= 30, format!("class II/III plateaus {} / {} ticks", ii.1, iii.1))?;
    ensure(ii.2 <= 20 && i.2 <= 20, format!("class I/II decays {} / {} ticks", i.2, ii.2))?;
    ensure(iii.2 >= 3 * ii.2, format!("class III decay {} not much longer than class II {}", iii.2, ii.2))?;
    ensure(iii.3 > 0.99, format!("class III decay not linear (R^2 {:.4})", iii.3))?;
    Ok(format!(
        "single peak at deflection maximum ({}); post-latch deflection within bound for s = 0.5 and -0.05 mm; plateau/decay ticks I {}/{}, II {}/{}, III {}/{} (R^2 {:.4})",
        notes.join(", "),
        i.1,
        i.2,
        ii.1,
        ii.2,
        iii.1,
        iii.2,
        iii.3
    ))
}

/// Coefficient of determination of a least-squares line through `y`.
fn straightness(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (v - ym);
        sxx += dx * dx;
        syy += (v - ym) * (v - ym);
    }
    sxy * sxy / (sxx * syy)
}

fn c8_cross_model_joining() -> Check {
    let (a, _) = nominal_trace(&WorldConfig::default()).map_err(|e| e.to_string())?;
    let (b, _) = nominal_trace(&WorldConfig::default().with_model(JoiningModel::TwoHinge)).map_err(|e| e.to_string())?;
    let apex = a.iter().enumerate().fold((0, 0.0), |acc, (i, r)| if r.deflection > acc.1 { (i, r.deflection) } else { acc }).0;
    let peak = a[..=apex].iter().map(|r| r.joining).fold(0.0, f64::max);
    let mut worst = 0.0f64;
    let mut n = 0;
    for i in 0..=apex.min(b.len() - 1) {
        if a[i].joining > 0.05 * peak {
            n += 1;
            worst = worst.max(rel(b[i].joining, a[i].joining));
        }
    }
    ensure(n > 50, format!("only {n} pre-apex samples"))?;
    ensure(worst < 0.2, format!("worst relative difference {worst:.3}"))?;
    Ok(format!("{n} pre-apex ticks, worst relative difference {:.1} %", worst * 100.0))
}

fn c9_reward_contract() -> Check {
    let cfg = WorldConfig::default();
    let mut world = World::new(cfg.clone()).map_err(|e| e.to_string())?;
    let rail = RailPlacement {
        dx: 1.0 * MM,
        yaw: 0.5f64.to_radians(),
        mount: 0.0,
    };
    world.reset(rail).unwrap();
    let goal = world.state.goal_pose();
    world.set_pose(goal).unwrap();
    let r_goal = world.reward();
    ensure(r_goal.abs() < 1e-12, format!("reward at goal {r_goal}"))?;
    world.reset(RailPlacement::default()).unwrap();
    world.set_pose(nominal_pre_pose(&cfg)).unwrap();
    let r_norm = world.reward();
    ensure((r_norm + 1.0).abs() < 1e-12, format!("reward at normalization pose {r_norm}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10_000 {
        let pose = TerminalPose {
            x: rng.gen_range(-30.0..30.0) * MM,
            z: rng.gen_range(0.0..40.0) * MM,
            pitch: rng.gen_range(-0.5..0.5),
            yaw: rng.gen_range(-0.2..0.2),
        };
        world.set_pose(pose).unwrap();
        let r = world.reward();
        ensure(r <= 0.0 && r.is_finite(), format!("reward {r} at {pose:?}"))?;
        let obs = world.sense(&mut rng);
        ensure(obs.to_array().len() == 13 && Observation::DIM == 13, "observation size")?;
        let qn: f64 = obs.orientation.iter().map(|q| q * q).sum::<f64>().sqrt();
        ensure((qn - 1.0).abs() < 1e-12, format!("quaternion norm {qn}"))?;
    }

    world.reset(RailPlacement::default()).unwrap();
    let n = 10_000;
    let mut sum = [0.0; 3];
    let mut sq = [0.0; 3];
    for _ in 0..n {
        let f = world.sense(&mut rng).wrench.force;
        for k in 0..3 {
            sum[k] += f[k];
            sq[k] += f[k] * f[k];
        }
    }
    let mut stds = [0.0; 3];
    for k in 0..3 {
        let mean = sum[k] / n as f64;
        stds[k] = (sq[k] / n as f64 - mean * mean).sqrt();
        ensure((stds[k] - 0.2).abs() <= 0.01, format!("axis {k} noise std {:.4}", stds[k]))?;
    }
    Ok(format!(
        "r(goal) = {r_goal:.1e}, r(d_norm) = {r_norm}, r <= 0 on 10^4 poses, |q| = 1, noise std {:.4}/{:.4}/{:.4} N",
        stds[0], stds[1], stds[2]
    ))
}

fn c12_overlap_defense() -> Check {
    let ranges = SkillRanges::default();
    let mut cfg = WorldConfig::default();
    cfg.randomization = RandomizationConfig::disabled();
    cfg.control.period = 50e-3;
    let mut env = SkillEnv::new(cfg.clone(), ranges.clone(), 0).map_err(|e| e.to_string())?;
    env.reset(Some(0)).unwrap();
    let mut t = nominal_terminal(&cfg);
    t.pivot.rate = ranges.pivot_rate.hi;
    let out = env.step(&encode_action(&SkillChoice::Terminal(t), &ranges).unwrap()).map_err(|e| e.to_string())?;
    ensure(out.info.overlap_flagged, "tunneling trajectory not flagged")?;
    let base = env.world.reward();
    ensure(
        out.reward <= base - cfg.control.overlap_penalty + 1e-12,
        format!("reward {} lacks the penalty (base {base})", out.reward),
    )?;

    let world = WorldConfig::default();
    let mut env = SkillEnv::new(world.clone(), ranges.clone(), 12).map_err(|e| e.to_string())?;
    let mut episodes = 0;
    for _ in 0..30 {
        let mut obs = env.reset(None).unwrap();
        loop {
            let o = env.step(&scripted_action(&obs, &world, &ranges)).map_err(|e| e.to_string())?;
            ensure(!o.info.overlap_flagged, "smooth scripted trajectory flagged")?;
            obs = o.observation;
            if o.done || o.truncated {
                break;
            }
        }
        episodes += 1;
    }
    Ok(format!(
        "50 ms tunneling flagged with reward {:.3} (unpenalized {base:.3}); {episodes} smooth episodes never flagged",
        out.reward
    ))
}

fn run_cli(args: &[&str], out: &Path) -> Result<(), String> {
    let o = Command::new(env!("CARGO_BIN_EXE_snapfit"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("SNAPFIT_LOG", "off")
        .output()
        .map_err(|e| e.to_string())?;
    ensure(
        o.status.success(),
        format!("{args:?} failed: {}", String::from_utf8_lossy(&o.stderr)),
    )
}

fn c13_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scen = dir.path().join("short.toml");
    let mut s = Scenario::default_scenario();
    s.file.train.learning_starts = 50;
    s.file.train.batch_size = 32;
    s.file.train.eval_period = 100;
    s.file.train.eval_rollouts = 8;
    s.file.grid.rollouts = 1;
    s.file.grid.dx_mm = vec![-2.5, 2.5];
    fs::write(&scen, s.to_toml()).map_err(|e| e.to_string())?;
    let sc = scen.to_str().unwrap();
    let mut files = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        run_cli(&["forces", "--deterministic", "--scenario", sc, "--model", "two_hinge"], &out)?;
        run_cli(&["simulate", "--deterministic", "--scenario", sc, "--seed", "7", "--rail-dx-mm", "2", "--rail-yaw-deg", "1.5"], &out)?;
        run_cli(&["train", "--deterministic", "--scenario", sc, "--seed", "7", "--steps", "200", "--seeds", "1"], &out)?;
        run_cli(&["evaluate", "--deterministic", "--scenario", sc, "--seed", "7"], &out)?;
        files.push(out);
    }
    // Parallel evaluation must reproduce the single-threaded grid.
    let par = dir.path().join("par");
    run_cli(&["evaluate", "--workers", "4", "--scenario", sc, "--seed", "7"], &par)?;
    let names = ["forces.csv", "sim_log.csv", "sim_steps.csv", "seed_7/curve.csv", "seed_7/policy.sfs", "grid.csv", "grid_matrix.csv"];
    for name in names {
        let a = fs::read(files[0].join(name)).map_err(|e| format!("{name}: {e}"))?;
        let b = fs::read(files[1].join(name)).map_err(|e| format!("{name}: {e}"))?;
        ensure(a == b, format!("{name} differs between runs"))?;
    }
    let a = fs::read(files[0].join("grid.csv")).unwrap();
    ensure(a == fs::read(par.join("grid.csv")).unwrap(), "grid.csv differs with 4 workers")?;
    Ok(format!("{} outputs bit-identical across two runs; 4-worker grid identical", names.len()))
}

fn c14_gradient_check() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let nets = [
        ("policy", Mlp::new(&[13, 64, 64, 28], Activation::Relu, Activation::Identity, &mut rng)),
        ("critic", Mlp::new(&[27, 64, 64, 1], Activation::Relu, Activation::Identity, &mut rng)),
        ("td3 actor", Mlp::new(&[13, 64, 64, 14], Activation::Relu, Activation::Tanh, &mut rng)),
        ("tanh", Mlp::new(&[13, 64, 64, 14], Activation::Tanh, Activation::Tanh, &mut rng)),
    ];
    let mut parts = Vec::new();
    for (name, net) in &nets {
        let x = Array2::from_shape_fn((4, net.input_dim()), |_| rng.gen_range(-1.0..1.0));
        let err = gradient_check(net, x.view(), 1e-5);
        ensure(err < 1e-4, format!("{name}: max relative error {err:.2e}"))?;
        parts.push(format!("{name} {err:.1e}"));
    }
    Ok(format!("max relative error: {}", parts.join(", ")))
}

fn rl_config(algorithm: Algorithm) -> TrainConfig {
    TrainConfig {
        algorithm,
        total_steps: 30_000,
        seed: 0,
        ..TrainConfig::default()
    }
}

fn c10_c11_rl(sac: Result<(TrainOutcome, f64), String>, td3: Result<(TrainOutcome, f64), String>) -> (Check, Check) {
    let world = WorldConfig::default();
    let ranges = SkillRanges::default();
    let (sac, sac_secs) = match sac {
        Ok(v) => v,
        Err(e) => return (Err(format!("SAC: {e}")), Err("no trained SAC policy".into())),
    };
    let policy = AgentPolicy {
        agent: &sac.agent,
        scale: rl_config(Algorithm::Sac).obs_scale,
    };
    let grid = match evaluate_grid(&policy, &world, &ranges, &GridSpec::default()) {
        Ok(g) => g,
        Err(e) => return (Err(e.to_string()), Err(e.to_string())),
    };
    let core = grid.core_rate();
    let skills = sac.last_eval.as_ref().map_or(f64::NAN, |s| s.mean_skills_success);
    let final_rate = sac.last_eval.as_ref().map_or(f64::NAN, |s| s.success_rate);
    let c10 = (|| {
        ensure(core >= 0.9, format!("SAC core-area success {core:.3}"))?;
        ensure(skills <= 3.0, format!("SAC mean skills per success {skills:.2}"))?;
        let (td3, td3_secs) = td3.map_err(|e| format!("TD3: {e}"))?;
        ensure(td3.agent.is_finite(), "TD3 weights not finite")?;
        ensure(sac_secs < 1800.0, format!("SAC took {sac_secs:.0} s"))?;
        Ok(format!(
            "SAC 30k: core-area success {core:.3}, final eval success {final_rate:.2}, {skills:.2} skills per success, {sac_secs:.0} s; TD3 30k finished without divergence in {td3_secs:.0} s (final eval success {:.2})",
            td3.last_eval.as_ref().map_or(f64::NAN, |s| s.success_rate)
        ))
    })();
    let at8 = grid.rate_where(|y| (y.abs() - 8.0).abs() < 1e-9);
    let c11 = ensure(at8 < core, format!("|yaw| = 8 deg rate {at8:.3} not below core {core:.3}"))
        .map(|_| format!("success at |yaw| = 8 deg {at8:.3} < core-area {core:.3}"));
    (c10, c11)
}

fn main() {
    let run = |alg| {
        move || {
            let t = Instant::now();
            train(&rl_config(alg), &WorldConfig::default(), &SkillRanges::default(), None)
                .map(|o| (o, t.elapsed().as_secs_f64()))
                .map_err(|e| e.to_string())
        }
    };
    let sac = std::thread::spawn(run(Algorithm::Sac));
    let td3 = std::thread::spawn(run(Algorithm::Td3));

    let mut results: Vec<(usize, Check)> = Vec::new();
    let fast: [(usize, fn() -> Check); 11] = [
        (1, c1_formula_oracles),
        (2, c2_inclination_consistency),
        (3, c3_correction_factor),
        (4, c4_hinge_small_angle),
        (5, c5_static_equivalence),
        (6, c6_critical_damping),
        (7, c7_snap_in_signature),
        (8, c8_cross_model_joining),
        (9, c9_reward_contract),
        (12, c12_overlap_defense),
        (13, c13_determinism),
    ];
    let report = |n: usize, c: &Check| match c {
        Ok(m) => println!("criterion {n:>2}: PASS  {m}"),
        Err(m) => println!("criterion {n:>2}: FAIL  {m}"),
    };
    for (n, f) in fast {
        let c = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        report(n, &c);
        results.push((n, c));
    }
    let c14 = c14_gradient_check();
    report(14, &c14);
    results.push((14, c14));

    let sac = sac.join().unwrap_or_else(|_| Err("panicked".into()));
    let td3 = td3.join().unwrap_or_else(|_| Err("panicked".into()));
    let (c10, c11) = c10_c11_rl(sac, td3);
    report(10, &c10);
    report(11, &c11);
    results.push((10, c10));
    results.push((11, c11));

    let failed: Vec<usize> = results.iter().filter(|(_, c)| c.is_err()).map(|(n, _)| *n).collect();
    println!("acceptance: {} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        println!("failed: {failed:?}");
        std::process::exit(1);
    }
}

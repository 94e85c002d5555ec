//! Shared generators and independent oracles for the integration tests.
#![allow(dead_code)]

use nalgebra::{Matrix4, Point3, Rotation3, Translation3, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use emostage::analysis::{analyze, AnalysisConfig, FeatureVector, Profile};
use emostage::arch::{build_pipeline, run, PipelineConfig, RoutingCase, RunInputs, RunLog, RunOptions, BUILTIN_RULES};
use emostage::bvh::{Channel, Joint, MotionClip, Skeleton};
use emostage::geometry::Vec3;
use emostage::interpretation::{Rule, RuleSet};
use emostage::kinematics::{skeleton_meta, world_positions_at, JointNames};
use emostage::synth::{self, ArmPose, DancerPose};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_channels<R: Rng>(rng: &mut R, root: bool) -> Vec<Channel> {
    let mut rot = vec![Channel::Xrotation, Channel::Yrotation, Channel::Zrotation];
    rot.shuffle(rng);
    rot.truncate(rng.gen_range(1..=3));
    let mut ch = Vec::new();
    if root || rng.gen_bool(0.2) {
        let mut pos = vec![Channel::Xposition, Channel::Yposition, Channel::Zposition];
        pos.shuffle(rng);
        if !root {
            pos.truncate(rng.gen_range(1..=3));
        }
        ch.extend(pos);
    }
    ch.extend(rot);
    if !root {
        ch.shuffle(rng);
    }
    ch
}

fn random_offset<R: Rng>(rng: &mut R) -> Vec3 {
    Vec3::new(
        rng.gen_range(-50.0..50.0),
        rng.gen_range(-50.0..50.0),
        rng.gen_range(-50.0..50.0),
    )
}

/// A random skeleton of 1..=`max_joints` joints (End Sites included) in
/// depth-first order, as a parser would produce it.
pub fn random_skeleton<R: Rng>(rng: &mut R, max_joints: usize) -> Skeleton {
    let n = rng.gen_range(1..=max_joints);
    let mut joints = vec![Joint {
        name: "J0".into(),
        offset: random_offset(rng),
        channels: random_channels(rng, true),
        parent: None,
        is_end_site: false,
    }];
    // path from the root to the most recent non-End-Site joint
    let mut stack = vec![0usize];
    let mut has_end = vec![false];
    for i in 1..n {
        let depth = rng.gen_range(0..stack.len());
        stack.truncate(depth + 1);
        let parent = stack[depth];
        let end = !has_end[parent] && rng.gen_bool(0.25);
        let name = if end {
            format!("{}_End", joints[parent].name)
        } else {
            format!("J{i}")
        };
        joints.push(Joint {
            name,
            offset: random_offset(rng),
            channels: if end { Vec::new() } else { random_channels(rng, false) },
            parent: Some(parent),
            is_end_site: end,
        });
        has_end.push(false);
        if end {
            has_end[parent] = true;
        } else {
            stack.push(i);
        }
    }
    Skeleton::new(joints).expect("generator respects skeleton invariants")
}

pub fn random_row<R: Rng>(rng: &mut R, sk: &Skeleton) -> Vec<f64> {
    let mut row = Vec::with_capacity(sk.frame_width);
    for j in &sk.joints {
        for c in &j.channels {
            row.push(if c.is_rotation() {
                rng.gen_range(-180.0..180.0)
            } else {
                rng.gen_range(-100.0..100.0)
            });
        }
    }
    row
}

/// Forward kinematics with 4×4 homogeneous matrices: each joint's local
/// transform is its translated offset followed by its rotation channels in
/// listed order, and world transforms chain from the root.
pub fn fk_oracle(sk: &Skeleton, row: &[f64]) -> Vec<[f64; 3]> {
    let mut world: Vec<Matrix4<f64>> = Vec::with_capacity(sk.len());
    let mut col = 0;
    let mut out = Vec::with_capacity(sk.len());
    for j in &sk.joints {
        let mut t = Vector3::new(j.offset.x, j.offset.y, j.offset.z);
        let mut r = Matrix4::identity();
        for c in &j.channels {
            let v = row[col];
            col += 1;
            let axis = match c {
                Channel::Xposition => {
                    t.x += v;
                    continue;
                }
                Channel::Yposition => {
                    t.y += v;
                    continue;
                }
                Channel::Zposition => {
                    t.z += v;
                    continue;
                }
                Channel::Xrotation => Vector3::x_axis(),
                Channel::Yrotation => Vector3::y_axis(),
                Channel::Zrotation => Vector3::z_axis(),
            };
            r *= Rotation3::from_axis_angle(&axis, v.to_radians()).to_homogeneous();
        }
        let local = Translation3::from(t).to_homogeneous() * r;
        let m = match j.parent {
            Some(p) => world[p] * local,
            None => local,
        };
        let p = m.transform_point(&Point3::origin());
        out.push([p.x, p.y, p.z]);
        world.push(m);
    }
    out
}

/// Largest per-coordinate difference between the library's FK and the
/// oracle.
pub fn fk_error(sk: &Skeleton, row: &[f64]) -> f64 {
    let lib = emostage::kinematics::world_positions(sk, row).expect("row matches skeleton");
    let oracle = fk_oracle(sk, row);
    lib.positions
        .iter()
        .zip(&oracle)
        .flat_map(|(a, b)| [(a.x - b[0]).abs(), (a.y - b[1]).abs(), (a.z - b[2]).abs()])
        .fold(0.0, f64::max)
}

/// Exhaustive specificity rule: among matching rules, the most constrained
/// one, earliest in file order on ties.
pub fn rule_oracle<'a>(rules: &'a [Rule], p: &Profile) -> Option<&'a Rule> {
    let mut best: Option<&Rule> = None;
    for r in rules {
        let matches = r
            .constraints
            .iter()
            .zip(p.0.iter())
            .all(|(c, l)| c.is_none_or(|c| c == *l));
        if matches && best.is_none_or(|b| r.constraint_count() > b.constraint_count()) {
            best = Some(r);
        }
    }
    best
}

fn random_arms<R: Rng>(rng: &mut R) -> ArmPose {
    ArmPose {
        shoulder_z: rng.gen_range(-60.0..60.0),
        shoulder_y: rng.gen_range(-80.0..10.0),
        elbow_y: rng.gen_range(-150.0..0.0),
    }
}

/// A random one-second dancer movement with a fixed heading: a linear
/// sweep between two random poses plus a wobble of the arms.
pub fn random_clip<R: Rng>(rng: &mut R) -> MotionClip {
    let heading = rng.gen_range(-180.0..180.0);
    let a = DancerPose {
        root: Vec3::new(
            rng.gen_range(-100.0..100.0),
            synth::HIP_HEIGHT + rng.gen_range(-10.0..10.0),
            rng.gen_range(-100.0..100.0),
        ),
        heading,
        chest_bend: rng.gen_range(-40.0..40.0),
        head_bend: rng.gen_range(-30.0..30.0),
        arms: random_arms(rng),
    };
    let b = DancerPose {
        root: a.root
            + Vec3::new(
                rng.gen_range(-60.0..60.0),
                rng.gen_range(-15.0..15.0),
                rng.gen_range(-60.0..60.0),
            ),
        heading,
        chest_bend: rng.gen_range(-40.0..40.0),
        head_bend: rng.gen_range(-30.0..30.0),
        arms: random_arms(rng),
    };
    let wobble = rng.gen_range(0.0..20.0);
    let freq = rng.gen_range(1.0..6.0);
    let frame_time = emostage::numfmt::round_sig(1.0 / synth::FPS, 9);
    let frames = (0..=60)
        .map(|i| {
            let u = i as f64 / 60.0;
            let l = |x: f64, y: f64| x + (y - x) * u;
            let mut arms = ArmPose::lerp(a.arms, b.arms, u);
            arms.shoulder_z += wobble * (freq * u * std::f64::consts::TAU).sin();
            DancerPose {
                root: a.root + (b.root - a.root) * u,
                heading,
                chest_bend: l(a.chest_bend, b.chest_bend),
                head_bend: l(a.head_bend, b.head_bend),
                arms,
            }
            .to_row()
        })
        .collect();
    MotionClip::new(synth::dancer_skeleton(), frame_time, frames).expect("dancer layout")
}

/// `clip` with every offset and every position channel multiplied by `s`.
pub fn scale_clip(clip: &MotionClip, s: f64) -> MotionClip {
    let sk = clip.skeleton.scaled(s);
    let mut position_cols = Vec::new();
    for (i, j) in clip.skeleton.joints.iter().enumerate() {
        for (k, c) in j.channels.iter().enumerate() {
            if !c.is_rotation() {
                position_cols.push(clip.skeleton.channel_start(i) + k);
            }
        }
    }
    let frames = clip
        .frames
        .iter()
        .map(|row| {
            let mut r = row.clone();
            for &c in &position_cols {
                r[c] *= s;
            }
            r
        })
        .collect();
    MotionClip::new(sk, clip.frame_time_s, frames).expect("same layout")
}

/// Analysis of the whole clip as one window.
pub fn whole_clip_features(clip: &MotionClip) -> FeatureVector {
    let poses: Vec<_> = clip
        .frames
        .iter()
        .enumerate()
        .map(|(i, r)| world_positions_at(&clip.skeleton, r, i as f64 * clip.frame_time_s).unwrap())
        .collect();
    let meta = skeleton_meta(&clip.skeleton, &poses[0], &JointNames::default()).unwrap();
    analyze(&poses, &meta, &AnalysisConfig::default().thresholds).unwrap()
}

/// Every numeric feature: four static then eight dynamic.
pub fn feature_values(fv: &FeatureVector) -> [f64; 12] {
    let s = &fv.static_features;
    let d = &fv.dynamic_features;
    [
        s.expansion,
        s.arm_openness,
        s.trunk_flexion,
        s.trunk_lean,
        d.qom,
        d.velocity,
        d.force,
        d.directness,
        d.vertical_dir,
        d.sagittal_dir,
        d.trunk_stretch_rate,
        d.arm_opening_rate,
    ]
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

pub fn config(case: RoutingCase) -> PipelineConfig {
    PipelineConfig {
        case,
        rules: Some(BUILTIN_RULES.into()),
        ..PipelineConfig::default()
    }
}

/// Builds and runs a fresh pipeline at max speed.
pub fn run_config(cfg: &PipelineConfig, inputs: &RunInputs, include_frames: bool) -> RunLog {
    let mut p = build_pipeline(cfg).expect("valid config");
    run(
        &mut p,
        inputs,
        &RunOptions {
            include_frames,
            ..RunOptions::default()
        },
    )
    .expect("run succeeds")
}

pub fn default_rules() -> RuleSet {
    RuleSet::default_rules()
}

//! Synthetic dancer clips used as shipped fixtures, in tests and for
//! throughput measurement.
//!
//! The dancer is a 20-joint skeleton (End Sites included) in centimetres,
//! Y up, facing +Z, with its left side on +X.

use crate::bvh::{Channel, Joint, MotionClip, Skeleton};
use crate::geometry::Vec3;

const ROOT_CHANNELS: [Channel; 6] = [
    Channel::Xposition,
    Channel::Yposition,
    Channel::Zposition,
    Channel::Zrotation,
    Channel::Xrotation,
    Channel::Yrotation,
];
const ROT_CHANNELS: [Channel; 3] = [Channel::Zrotation, Channel::Xrotation, Channel::Yrotation];

/// Frames per second of the shipped clips.
pub const FPS: f64 = 60.0;
/// Hip height of the dancer at rest.
pub const HIP_HEIGHT: f64 = 85.0;

fn push(joints: &mut Vec<Joint>, name: &str, offset: [f64; 3], parent: Option<usize>, end: bool) -> usize {
    joints.push(Joint {
        name: name.to_string(),
        offset: Vec3::from_array(offset),
        channels: if end {
            Vec::new()
        } else if parent.is_none() {
            ROOT_CHANNELS.to_vec()
        } else {
            ROT_CHANNELS.to_vec()
        },
        parent,
        is_end_site: end,
    });
    joints.len() - 1
}

fn chain(joints: &mut Vec<Joint>, parent: usize, links: &[(&str, [f64; 3])], end: [f64; 3]) {
    let mut p = parent;
    for (name, off) in links {
        p = push(joints, name, *off, Some(p), false);
    }
    let end_name = format!("{}_End", joints[p].name);
    push(joints, &end_name, end, Some(p), true);
}

/// The dancer skeleton.
pub fn dancer_skeleton() -> Skeleton {
    let mut j = Vec::new();
    let hips = push(&mut j, "Hips", [0.0, 0.0, 0.0], None, false);
    let chest = push(&mut j, "Chest", [0.0, 30.0, 0.0], Some(hips), false);
    chain(&mut j, chest, &[("Head", [0.0, 25.0, 0.0])], [0.0, 10.0, 0.0]);
    chain(
        &mut j,
        chest,
        &[
            ("LeftShoulder", [15.0, 20.0, 0.0]),
            ("LeftElbow", [25.0, 0.0, 0.0]),
            ("LeftHand", [25.0, 0.0, 0.0]),
        ],
        [8.0, 0.0, 0.0],
    );
    chain(
        &mut j,
        chest,
        &[
            ("RightShoulder", [-15.0, 20.0, 0.0]),
            ("RightElbow", [-25.0, 0.0, 0.0]),
            ("RightHand", [-25.0, 0.0, 0.0]),
        ],
        [-8.0, 0.0, 0.0],
    );
    chain(
        &mut j,
        hips,
        &[
            ("LeftHip", [10.0, 0.0, 0.0]),
            ("LeftKnee", [0.0, -40.0, 0.0]),
            ("LeftFoot", [0.0, -40.0, 0.0]),
        ],
        [0.0, -5.0, 10.0],
    );
    chain(
        &mut j,
        hips,
        &[
            ("RightHip", [-10.0, 0.0, 0.0]),
            ("RightKnee", [0.0, -40.0, 0.0]),
            ("RightFoot", [0.0, -40.0, 0.0]),
        ],
        [0.0, -5.0, 10.0],
    );
    Skeleton::new(j).expect("dancer skeleton is well formed")
}

/// Left-arm angles in degrees; the right arm mirrors them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmPose {
    pub shoulder_z: f64,
    pub shoulder_y: f64,
    pub elbow_y: f64,
}

impl ArmPose {
    /// Hands folded in front of the chest.
    pub const CLOSED: ArmPose = ArmPose {
        shoulder_z: -45.0,
        shoulder_y: -75.0,
        elbow_y: -160.0,
    };
    /// Arms raised and spread.
    pub const OPEN: ArmPose = ArmPose {
        shoulder_z: 45.0,
        shoulder_y: -30.0,
        elbow_y: 0.0,
    };
    /// Arms straight out to the sides.
    pub const T: ArmPose = ArmPose {
        shoulder_z: 0.0,
        shoulder_y: 0.0,
        elbow_y: 0.0,
    };

    pub fn lerp(a: ArmPose, b: ArmPose, s: f64) -> ArmPose {
        let l = |x: f64, y: f64| x + (y - x) * s;
        ArmPose {
            shoulder_z: l(a.shoulder_z, b.shoulder_z),
            shoulder_y: l(a.shoulder_y, b.shoulder_y),
            elbow_y: l(a.elbow_y, b.elbow_y),
        }
    }
}

/// Pose parameters of the dancer for one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DancerPose {
    pub root: Vec3,
    /// Root heading about Y, degrees.
    pub heading: f64,
    /// Forward bend of the chest, degrees (positive bows).
    pub chest_bend: f64,
    pub head_bend: f64,
    pub arms: ArmPose,
}

impl DancerPose {
    pub fn rest() -> Self {
        Self {
            root: Vec3::new(0.0, HIP_HEIGHT, 0.0),
            heading: 0.0,
            chest_bend: 0.0,
            head_bend: 0.0,
            arms: ArmPose::T,
        }
    }

    /// Frame row in the dancer skeleton's channel layout.
    pub fn to_row(&self) -> Vec<f64> {
        let a = self.arms;
        let mut row = vec![0.0; 48];
        row[..6].copy_from_slice(&[self.root.x, self.root.y, self.root.z, 0.0, 0.0, self.heading]);
        // Chest, Head
        row[6..9].copy_from_slice(&[0.0, self.chest_bend, 0.0]);
        row[9..12].copy_from_slice(&[0.0, self.head_bend, 0.0]);
        // LeftShoulder, LeftElbow, LeftHand
        row[12..15].copy_from_slice(&[a.shoulder_z, 0.0, a.shoulder_y]);
        row[15..18].copy_from_slice(&[0.0, 0.0, a.elbow_y]);
        // RightShoulder, RightElbow, RightHand mirror across the sagittal plane
        row[21..24].copy_from_slice(&[-a.shoulder_z, 0.0, -a.shoulder_y]);
        row[24..27].copy_from_slice(&[0.0, 0.0, -a.elbow_y]);
        row
    }
}

fn clip_from(duration_s: f64, pose_at: impl Fn(f64) -> DancerPose) -> MotionClip {
    let frame_time = crate::numfmt::round_sig(1.0 / FPS, crate::numfmt::SIG_DIGITS);
    let n = (duration_s * FPS).round() as usize + 1;
    let frames = (0..n).map(|i| pose_at(i as f64 * frame_time).to_row()).collect();
    MotionClip::new(dancer_skeleton(), frame_time, frames).expect("rows match the dancer layout")
}

/// Duration of the joy and surprise clips.
pub const GESTURE_DURATION_S: f64 = 1.5;

fn gesture(forward_cm: f64, from: ArmPose, to: ArmPose) -> MotionClip {
    clip_from(GESTURE_DURATION_S, |t| {
        let u = (t / GESTURE_DURATION_S).clamp(0.0, 1.0);
        DancerPose {
            root: Vec3::new(0.0, HIP_HEIGHT + 12.0 * u, forward_cm * u),
            heading: 0.0,
            chest_bend: -35.0 * u,
            head_bend: -20.0 * u,
            arms: ArmPose::lerp(from, to, u),
        }
    })
}

/// Arching trunk, opening arms, rising and moving forward fast and directly.
pub fn joy_clip() -> MotionClip {
    gesture(70.0, ArmPose::CLOSED, ArmPose::OPEN)
}

/// The joy movement directed backward with the arms closing.
pub fn surprise_clip() -> MotionClip {
    gesture(-70.0, ArmPose::OPEN, ArmPose::CLOSED)
}

/// A motionless T-pose.
pub fn still_clip(duration_s: f64) -> MotionClip {
    clip_from(duration_s, |_| DancerPose::rest())
}

/// The joy clip played backward.
pub fn reversed(clip: &MotionClip) -> MotionClip {
    let mut out = clip.clone();
    out.frames.reverse();
    out
}

/// A long periodic dance phrase of `frames` frames, used for throughput runs.
pub fn long_clip(frames: usize) -> MotionClip {
    let frame_time = crate::numfmt::round_sig(1.0 / FPS, crate::numfmt::SIG_DIGITS);
    let rows = (0..frames)
        .map(|i| {
            let t = i as f64 * frame_time;
            let w = (t * 0.7).sin() * 0.5 + 0.5;
            DancerPose {
                root: Vec3::new(
                    20.0 * (t * 0.3).sin(),
                    HIP_HEIGHT + 5.0 * (t * 2.1).sin(),
                    30.0 * (t * 0.45).cos(),
                ),
                heading: 0.0,
                chest_bend: 15.0 * (t * 1.3).sin(),
                head_bend: 10.0 * (t * 0.9).cos(),
                arms: ArmPose::lerp(ArmPose::CLOSED, ArmPose::OPEN, w),
            }
            .to_row()
        })
        .collect();
    MotionClip::new(dancer_skeleton(), frame_time, rows).expect("rows match the dancer layout")
}

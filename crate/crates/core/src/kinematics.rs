//! Forward kinematics and skeleton normalization quantities.
//!
//! Rotation channels compose as intrinsic rotations in the order the
//! channels are listed: for `Zrotation Xrotation Yrotation` the local
//! rotation is `Rz * Rx * Ry`. Position channels add to the joint offset.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::{Channel, Skeleton};
use crate::geometry::{Mat3, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("frame row has {found} values, skeleton expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("joint {name:?} (role {role}) not found in skeleton")]
    UnresolvedJoint { role: &'static str, name: String },
    #[error("degenerate skeleton: {0}")]
    DegenerateSkeleton(String),
}

/// World-space joint positions at one instant, indexed like `Skeleton::joints`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub t_s: f64,
    pub positions: Vec<Vec3>,
}

impl Pose {
    pub fn translated(&self, v: Vec3) -> Pose {
        Pose {
            t_s: self.t_s,
            positions: self.positions.iter().map(|&p| p + v).collect(),
        }
    }

    pub fn scaled(&self, s: f64) -> Pose {
        Pose {
            t_s: self.t_s,
            positions: self.positions.iter().map(|&p| p * s).collect(),
        }
    }
}

/// Computes world positions for every joint (End Sites included).
pub fn world_positions(skeleton: &Skeleton, row: &[f64]) -> Result<Pose, KinematicsError> {
    world_positions_at(skeleton, row, 0.0)
}

/// [`world_positions`] with the pose stamped at `t_s`.
pub fn world_positions_at(skeleton: &Skeleton, row: &[f64], t_s: f64) -> Result<Pose, KinematicsError> {
    if row.len() != skeleton.frame_width {
        return Err(KinematicsError::DimensionMismatch {
            expected: skeleton.frame_width,
            found: row.len(),
        });
    }
    let n = skeleton.len();
    let mut rot = Vec::with_capacity(n);
    let mut positions = Vec::with_capacity(n);
    for (i, joint) in skeleton.joints.iter().enumerate() {
        let start = skeleton.channel_start(i);
        let mut local_t = joint.offset;
        let mut local_r = Mat3::IDENTITY;
        for (k, &ch) in joint.channels.iter().enumerate() {
            let v = row[start + k];
            match ch {
                Channel::Xposition => local_t.x += v,
                Channel::Yposition => local_t.y += v,
                Channel::Zposition => local_t.z += v,
                Channel::Xrotation => local_r = local_r.mul_mat(&Mat3::rot_x(v.to_radians())),
                Channel::Yrotation => local_r = local_r.mul_mat(&Mat3::rot_y(v.to_radians())),
                Channel::Zrotation => local_r = local_r.mul_mat(&Mat3::rot_z(v.to_radians())),
            }
        }
        let (r, p) = match joint.parent {
            None => (local_r, local_t),
            Some(pi) => {
                let pr: &Mat3 = &rot[pi];
                (pr.mul_mat(&local_r), positions[pi] + pr.mul_vec(local_t))
            }
        };
        rot.push(r);
        positions.push(p);
    }
    Ok(Pose { t_s, positions })
}

/// Joint names used to locate the body landmarks analysis needs.
///
/// Hips, chest and head are required; hands and feet are optional and are
/// skipped with a warning when absent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JointNames {
    pub hips: String,
    pub chest: String,
    pub head: String,
    pub left_hand: String,
    pub right_hand: String,
    pub left_foot: String,
    pub right_foot: String,
}

impl Default for JointNames {
    fn default() -> Self {
        Self {
            hips: "Hips".into(),
            chest: "Chest".into(),
            head: "Head".into(),
            left_hand: "LeftHand".into(),
            right_hand: "RightHand".into(),
            left_foot: "LeftFoot".into(),
            right_foot: "RightFoot".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonMeta {
    /// Hips→chest→head chain length in the first pose; the normalization unit.
    pub height: f64,
    pub hips: usize,
    pub chest: usize,
    pub head: usize,
    pub hands: Vec<usize>,
    pub left_hand: Option<usize>,
    pub right_hand: Option<usize>,
    pub left_foot: Option<usize>,
    pub right_foot: Option<usize>,
    /// Head, hands and feet that resolved.
    pub extremity_indices: Vec<usize>,
    /// `[hips, chest, head]`.
    pub trunk_indices: [usize; 3],
    /// Mean chest→hand chain length, when at least one hand resolved.
    pub arm_reach: Option<f64>,
}

impl SkeletonMeta {
    /// Body center: the hips joint.
    pub fn center(&self, pose: &Pose) -> Vec3 {
        pose.positions[self.hips]
    }
}

fn chain_length(skeleton: &Skeleton, pose: &Pose, from: usize, to_ancestor: usize) -> Option<f64> {
    let mut len = 0.0;
    let mut cur = from;
    while cur != to_ancestor {
        let parent = skeleton.joints[cur].parent?;
        len += pose.positions[cur].distance(pose.positions[parent]);
        cur = parent;
    }
    Some(len)
}

/// Resolves the landmark joints and measures normalization lengths on
/// `first_pose`.
pub fn skeleton_meta(
    skeleton: &Skeleton,
    first_pose: &Pose,
    names: &JointNames,
) -> Result<SkeletonMeta, KinematicsError> {
    if first_pose.positions.len() != skeleton.len() {
        return Err(KinematicsError::DimensionMismatch {
            expected: skeleton.len(),
            found: first_pose.positions.len(),
        });
    }
    let required = |role: &'static str, name: &str| {
        skeleton.find(name).ok_or_else(|| KinematicsError::UnresolvedJoint {
            role,
            name: name.to_string(),
        })
    };
    let optional = |role: &str, name: &str| {
        let found = skeleton.find(name);
        if found.is_none() {
            log::warn!("optional joint {name:?} ({role}) not in skeleton; skipped");
        }
        found
    };
    let hips = required("hips", &names.hips)?;
    let chest = required("chest", &names.chest)?;
    let head = required("head", &names.head)?;
    let left_hand = optional("left_hand", &names.left_hand);
    let right_hand = optional("right_hand", &names.right_hand);
    let left_foot = optional("left_foot", &names.left_foot);
    let right_foot = optional("right_foot", &names.right_foot);

    let p = &first_pose.positions;
    let height = p[hips].distance(p[chest]) + p[chest].distance(p[head]);
    if !(height.is_finite() && height > 0.0) {
        return Err(KinematicsError::DegenerateSkeleton(
            "hips, chest and head coincide (zero trunk height)".into(),
        ));
    }

    let hands: Vec<usize> = [left_hand, right_hand].into_iter().flatten().collect();
    let arm_reach = if hands.is_empty() {
        None
    } else {
        let total: f64 = hands
            .iter()
            .map(|&h| chain_length(skeleton, first_pose, h, chest).unwrap_or_else(|| p[h].distance(p[chest])))
            .sum();
        let reach = total / hands.len() as f64;
        if reach.is_nan() || reach <= height * 1e-9 {
            return Err(KinematicsError::DegenerateSkeleton(
                "hands coincide with the chest (zero arm reach)".into(),
            ));
        }
        Some(reach)
    };

    let extremity_indices: Vec<usize> = [Some(head), left_hand, right_hand, left_foot, right_foot]
        .into_iter()
        .flatten()
        .collect();

    Ok(SkeletonMeta {
        height,
        hips,
        chest,
        head,
        hands,
        left_hand,
        right_hand,
        left_foot,
        right_foot,
        extremity_indices,
        trunk_indices: [hips, chest, head],
        arm_reach,
    })
}

//! The Analysis component: turns world-space poses into continuous movement
//! features and a quantized seven-dimension movement profile (trunk, arms,
//! vertical, sagittal, force, velocity, directness).
//!
//! Every length is divided by the skeleton height, so features are invariant
//! under uniform scaling, and only differences of positions are used, so they
//! are invariant under translation.

use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_4, PI};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bvh::{RawFrameEvent, Skeleton};
use crate::geometry::Vec3;
use crate::kinematics::{self, JointNames, KinematicsError, Pose, SkeletonMeta};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("window has {0} poses, at least 3 are required")]
    WindowTooShort(usize),
    #[error("window timestamps are not uniformly increasing")]
    BadTimestamps,
    #[error("bad thresholds for {dimension}: lower {lower} must be below upper {upper}")]
    BadThresholds {
        dimension: Dimension,
        lower: f64,
        upper: f64,
    },
    #[error("bad window configuration: {0}")]
    BadWindow(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
}

/// Relative length below which a segment or hand path counts as zero.
const EPS: f64 = 1e-9;

/// Posture measurements from a single pose.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StaticFeatures {
    /// Mean extremity distance from the body center, in heights.
    pub expansion: f64,
    /// -1 hands on the chest, +1 hands at full reach.
    pub arm_openness: f64,
    /// Negative rounded (bowed forward), positive arched.
    pub trunk_flexion: f64,
    /// Negative bending to the left, positive to the right.
    pub trunk_lean: f64,
}

/// Movement measurements over a window.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DynamicFeatures {
    /// Quantity of motion: summed joint displacement per second, in heights.
    pub qom: f64,
    /// Mean joint speed, heights per second.
    pub velocity: f64,
    /// Mean extremity acceleration magnitude, heights per second squared.
    pub force: f64,
    /// Hand net displacement over hand path length, averaged over hands.
    /// Zero when the hands do not move.
    pub directness: f64,
    /// Body-center vertical velocity, heights per second.
    pub vertical_dir: f64,
    /// Body-center velocity along the facing direction at window start.
    pub sagittal_dir: f64,
    /// Rate of change of the hips→head extent, heights per second.
    pub trunk_stretch_rate: f64,
    /// Rate of change of arm openness, per second.
    pub arm_opening_rate: f64,
}

/// The seven movement dimensions, in profile order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Trunk,
    Arms,
    Vertical,
    Sagittal,
    Force,
    Velocity,
    Directness,
}

impl Dimension {
    pub const ALL: [Dimension; 7] = [
        Dimension::Trunk,
        Dimension::Arms,
        Dimension::Vertical,
        Dimension::Sagittal,
        Dimension::Force,
        Dimension::Velocity,
        Dimension::Directness,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Trunk => "trunk",
            Dimension::Arms => "arms",
            Dimension::Vertical => "vertical",
            Dimension::Sagittal => "sagittal",
            Dimension::Force => "force",
            Dimension::Velocity => "velocity",
            Dimension::Directness => "directness",
        }
    }

    pub fn parse(s: &str) -> Option<Dimension> {
        Dimension::ALL.into_iter().find(|d| d.as_str() == s)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Trinary level of one dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Level {
    Low,
    #[default]
    Neutral,
    High,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Low, Level::Neutral, Level::High];

    pub fn as_i8(self) -> i8 {
        match self {
            Level::Low => -1,
            Level::Neutral => 0,
            Level::High => 1,
        }
    }
}

impl From<Level> for i8 {
    fn from(l: Level) -> i8 {
        l.as_i8()
    }
}

impl TryFrom<i8> for Level {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            -1 => Ok(Level::Low),
            0 => Ok(Level::Neutral),
            1 => Ok(Level::High),
            other => Err(format!("level must be -1, 0 or 1, got {other}")),
        }
    }
}

/// Quantized movement profile, one level per [`Dimension`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Profile(pub [Level; 7]);

impl Profile {
    pub const NEUTRAL: Profile = Profile([Level::Neutral; 7]);

    pub fn from_i8(levels: [i8; 7]) -> Option<Profile> {
        let mut out = [Level::Neutral; 7];
        for (o, v) in out.iter_mut().zip(levels) {
            *o = Level::try_from(v).ok()?;
        }
        Some(Profile(out))
    }

    pub fn get(&self, d: Dimension) -> Level {
        self.0[d.index()]
    }

    pub fn set(&mut self, d: Dimension, l: Level) {
        self.0[d.index()] = l;
    }

    pub fn to_i8(&self) -> [i8; 7] {
        self.0.map(Level::as_i8)
    }

    /// Base-3 code in `0..3^7`, trunk most significant.
    pub fn code(&self) -> usize {
        self.0.iter().fold(0, |acc, l| acc * 3 + (l.as_i8() + 1) as usize)
    }

    pub fn from_code(mut code: usize) -> Profile {
        let mut out = [Level::Neutral; 7];
        for slot in out.iter_mut().rev() {
            *slot = Level::ALL[code % 3];
            code /= 3;
        }
        Profile(out)
    }

    /// All 3^7 profiles in code order.
    pub fn all() -> impl Iterator<Item = Profile> {
        (0..PROFILE_COUNT).map(Profile::from_code)
    }
}

pub const PROFILE_COUNT: usize = 2187;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct ThresholdPair {
    pub lower: f64,
    pub upper: f64,
}

impl ThresholdPair {
    pub const fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    /// Strict comparisons: a value equal to a bound is neutral.
    pub fn level(&self, v: f64) -> Level {
        if v > self.upper {
            Level::High
        } else if v < self.lower {
            Level::Low
        } else {
            Level::Neutral
        }
    }
}

impl From<[f64; 2]> for ThresholdPair {
    fn from(a: [f64; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

impl From<ThresholdPair> for [f64; 2] {
    fn from(t: ThresholdPair) -> Self {
        [t.lower, t.upper]
    }
}

/// Quantization bounds per dimension, plus the stillness gate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub trunk: ThresholdPair,
    pub arms: ThresholdPair,
    pub vertical: ThresholdPair,
    pub sagittal: ThresholdPair,
    pub force: ThresholdPair,
    pub velocity: ThresholdPair,
    pub directness: ThresholdPair,
    /// Windows with quantity of motion at or below this are quantized to the
    /// neutral profile.
    pub still_qom: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            trunk: ThresholdPair::new(-0.15, 0.15),
            arms: ThresholdPair::new(-0.3, 0.3),
            vertical: ThresholdPair::new(-0.05, 0.05),
            sagittal: ThresholdPair::new(-0.1, 0.1),
            force: ThresholdPair::new(0.3, 1.0),
            velocity: ThresholdPair::new(0.1, 0.4),
            directness: ThresholdPair::new(0.35, 0.65),
            still_qom: 1e-6,
        }
    }
}

impl Thresholds {
    pub fn pair(&self, d: Dimension) -> &ThresholdPair {
        match d {
            Dimension::Trunk => &self.trunk,
            Dimension::Arms => &self.arms,
            Dimension::Vertical => &self.vertical,
            Dimension::Sagittal => &self.sagittal,
            Dimension::Force => &self.force,
            Dimension::Velocity => &self.velocity,
            Dimension::Directness => &self.directness,
        }
    }

    pub fn validate(&self) -> Result<(), AnalysisError> {
        for d in Dimension::ALL {
            let p = self.pair(d);
            if !(p.lower.is_finite() && p.upper.is_finite() && p.lower < p.upper) {
                return Err(AnalysisError::BadThresholds {
                    dimension: d,
                    lower: p.lower,
                    upper: p.upper,
                });
            }
        }
        Ok(())
    }
}

/// The continuous value each dimension is quantized from.
///
/// Trunk combines posture (flexion) with its rate of stretch, and arms
/// combine openness with its opening rate.
pub fn dimension_values(s: &StaticFeatures, d: &DynamicFeatures) -> [f64; 7] {
    [
        s.trunk_flexion + d.trunk_stretch_rate,
        s.arm_openness + d.arm_opening_rate,
        d.vertical_dir,
        d.sagittal_dir,
        d.force,
        d.velocity,
        d.directness,
    ]
}

/// Magnitude of a dimension value on a common scale, used for intensity.
/// Directness is centered at 0.5 and doubled; the rest are taken as is.
pub fn signed_magnitude(d: Dimension, value: f64) -> f64 {
    match d {
        Dimension::Directness => 2.0 * (value - 0.5),
        _ => value,
    }
}

/// Horizontal facing direction of a pose, from the left→right extremity
/// axis (feet, else hands). Falls back to +Z.
pub fn facing(pose: &Pose, meta: &SkeletonMeta) -> Vec3 {
    let p = &pose.positions;
    let pairs = [(meta.left_foot, meta.right_foot), (meta.left_hand, meta.right_hand)];
    for (l, r) in pairs {
        if let (Some(l), Some(r)) = (l, r) {
            let lateral = (p[l] - p[r]).horizontal();
            if let Some(f) = lateral.cross(Vec3::Y).normalized(EPS * meta.height) {
                return f;
            }
        }
    }
    Vec3::Z
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a < -PI {
        a += 2.0 * PI;
    }
    a
}

fn arm_openness(pose: &Pose, meta: &SkeletonMeta) -> f64 {
    let Some(reach) = meta.arm_reach else {
        return 0.0;
    };
    let chest = pose.positions[meta.chest];
    let mean = meta
        .hands
        .iter()
        .map(|&h| pose.positions[h].distance(chest))
        .sum::<f64>()
        / meta.hands.len() as f64;
    (2.0 * mean / reach - 1.0).clamp(-1.0, 1.0)
}

/// Mean extremity distance from the body center, in heights.
pub fn expansion(pose: &Pose, meta: &SkeletonMeta) -> f64 {
    let center = meta.center(pose);
    meta.extremity_indices
        .iter()
        .map(|&e| pose.positions[e].distance(center))
        .sum::<f64>()
        / meta.extremity_indices.len() as f64
        / meta.height
}

pub fn static_features(pose: &Pose, meta: &SkeletonMeta) -> Result<StaticFeatures, AnalysisError> {
    let p = &pose.positions;
    let h = meta.height;
    let expansion = expansion(pose, meta);

    let lower = p[meta.chest] - p[meta.hips];
    let upper = p[meta.head] - p[meta.chest];
    if lower.norm() <= EPS * h || upper.norm() <= EPS * h {
        return Err(KinematicsError::DegenerateSkeleton("zero-length trunk segment".into()).into());
    }
    let forward = facing(pose, meta);
    let right = forward.cross(Vec3::Y);
    let sagittal = |v: Vec3| v.dot(forward).atan2(v.dot(Vec3::Y));
    let frontal = |v: Vec3| v.dot(right).atan2(v.dot(Vec3::Y));
    // Bending the upper segment forward relative to the lower one rounds the back.
    let trunk_flexion = (-wrap_angle(sagittal(upper) - sagittal(lower)) / FRAC_PI_4).clamp(-1.0, 1.0);
    let trunk_lean = (wrap_angle(frontal(upper) - frontal(lower)) / FRAC_PI_4).clamp(-1.0, 1.0);

    Ok(StaticFeatures {
        expansion,
        arm_openness: arm_openness(pose, meta),
        trunk_flexion,
        trunk_lean,
    })
}

fn window_dt(window: &[Pose]) -> Result<f64, AnalysisError> {
    if window.len() < 3 {
        return Err(AnalysisError::WindowTooShort(window.len()));
    }
    let t0 = window[0].t_s;
    let duration = window[window.len() - 1].t_s - t0;
    let dt = duration / (window.len() - 1) as f64;
    if !(dt.is_finite() && dt > 0.0) {
        return Err(AnalysisError::BadTimestamps);
    }
    let tol = 1e-6 * dt;
    for (k, pose) in window.iter().enumerate() {
        if (pose.t_s - t0 - k as f64 * dt).abs() > tol {
            return Err(AnalysisError::BadTimestamps);
        }
    }
    Ok(dt)
}

pub fn dynamic_features(window: &[Pose], meta: &SkeletonMeta) -> Result<DynamicFeatures, AnalysisError> {
    let dt = window_dt(window)?;
    let n = window.len();
    let h = meta.height;
    let first = &window[0];
    let last = &window[n - 1];
    let duration = last.t_s - first.t_s;
    let joints = first.positions.len();

    let mut travelled = 0.0;
    for pair in window.windows(2) {
        for (a, b) in pair[0].positions.iter().zip(&pair[1].positions) {
            travelled += b.distance(*a);
        }
    }
    let qom = travelled / (duration * h);
    let velocity = travelled / (duration * joints as f64 * h);

    let mut accel = 0.0;
    for k in 1..n - 1 {
        for &e in &meta.extremity_indices {
            // (next + prev) - 2 cur: symmetric under time reversal
            let a = (window[k + 1].positions[e] + window[k - 1].positions[e]) - window[k].positions[e] * 2.0;
            accel += a.norm();
        }
    }
    let force = accel / ((n - 2) * meta.extremity_indices.len()) as f64 / (dt * dt) / h;

    let directness = if meta.hands.is_empty() {
        0.0
    } else {
        let per_hand: f64 = meta
            .hands
            .iter()
            .map(|&hand| {
                let path: f64 = window
                    .windows(2)
                    .map(|w| w[1].positions[hand].distance(w[0].positions[hand]))
                    .sum();
                if path < EPS * h {
                    0.0
                } else {
                    (last.positions[hand].distance(first.positions[hand]) / path).min(1.0)
                }
            })
            .sum();
        per_hand / meta.hands.len() as f64
    };

    let shift = meta.center(last) - meta.center(first);
    let vertical_dir = shift.y / (duration * h);
    let sagittal_dir = shift.dot(facing(first, meta)) / (duration * h);

    let extent = |p: &Pose| p.positions[meta.head].distance(p.positions[meta.hips]);
    let trunk_stretch_rate = (extent(last) - extent(first)) / (duration * h);
    let arm_opening_rate = (arm_openness(last, meta) - arm_openness(first, meta)) / duration;

    Ok(DynamicFeatures {
        qom,
        velocity,
        force,
        directness,
        vertical_dir,
        sagittal_dir,
        trunk_stretch_rate,
        arm_opening_rate,
    })
}

/// Quantizes features into a profile. A still window (quantity of motion at
/// or below `still_qom`) yields the neutral profile.
pub fn quantize(s: &StaticFeatures, d: &DynamicFeatures, thresholds: &Thresholds) -> Result<Profile, AnalysisError> {
    thresholds.validate()?;
    if d.qom <= thresholds.still_qom {
        return Ok(Profile::NEUTRAL);
    }
    let values = dimension_values(s, d);
    let mut out = Profile::NEUTRAL;
    for dim in Dimension::ALL {
        out.set(dim, thresholds.pair(dim).level(values[dim.index()]));
    }
    Ok(out)
}

/// Analysis output for one window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub t_s: f64,
    #[serde(rename = "static")]
    pub static_features: StaticFeatures,
    #[serde(rename = "dynamic")]
    pub dynamic_features: DynamicFeatures,
    pub profile: Profile,
}

impl FeatureVector {
    pub fn dimension_values(&self) -> [f64; 7] {
        dimension_values(&self.static_features, &self.dynamic_features)
    }
}

fn mean_static(statics: &[StaticFeatures]) -> StaticFeatures {
    let n = statics.len() as f64;
    let mut acc = StaticFeatures::default();
    for s in statics {
        acc.expansion += s.expansion;
        acc.arm_openness += s.arm_openness;
        acc.trunk_flexion += s.trunk_flexion;
        acc.trunk_lean += s.trunk_lean;
    }
    StaticFeatures {
        expansion: acc.expansion / n,
        arm_openness: acc.arm_openness / n,
        trunk_flexion: acc.trunk_flexion / n,
        trunk_lean: acc.trunk_lean / n,
    }
}

fn analyze_with_statics(
    window: &[Pose],
    statics: &[StaticFeatures],
    meta: &SkeletonMeta,
    thresholds: &Thresholds,
) -> Result<FeatureVector, AnalysisError> {
    let dynamic_features = dynamic_features(window, meta)?;
    let static_features = mean_static(statics);
    let profile = quantize(&static_features, &dynamic_features, thresholds)?;
    Ok(FeatureVector {
        t_s: window[window.len() - 1].t_s,
        static_features,
        dynamic_features,
        profile,
    })
}

/// Window-averaged static features, dynamic features and their quantization.
pub fn analyze(window: &[Pose], meta: &SkeletonMeta, thresholds: &Thresholds) -> Result<FeatureVector, AnalysisError> {
    if window.len() < 3 {
        return Err(AnalysisError::WindowTooShort(window.len()));
    }
    let statics = window
        .iter()
        .map(|p| static_features(p, meta))
        .collect::<Result<Vec<_>, _>>()?;
    analyze_with_statics(window, &statics, meta, thresholds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub window_s: f64,
    pub hop_s: f64,
    pub thresholds: Thresholds,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            window_s: 1.0,
            hop_s: 0.25,
            thresholds: Thresholds::default(),
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if !(self.window_s.is_finite() && self.window_s > 0.0) {
            return Err(AnalysisError::BadWindow(format!("window_s = {}", self.window_s)));
        }
        if !(self.hop_s.is_finite() && self.hop_s > 0.0) {
            return Err(AnalysisError::BadWindow(format!("hop_s = {}", self.hop_s)));
        }
        self.thresholds.validate()
    }
}

/// Tolerance on timestamp comparisons, in seconds.
const TIME_TOL: f64 = 1e-6;

/// Streaming analysis over a frame stream: a sliding window of `window_s`
/// seconds emitting one [`FeatureVector`] every `hop_s` seconds once the
/// first full window is available.
pub struct Analyzer {
    skeleton: Skeleton,
    names: JointNames,
    config: AnalysisConfig,
    meta: Option<SkeletonMeta>,
    buffer: VecDeque<(Pose, StaticFeatures)>,
    next_emit: Option<f64>,
}

impl Analyzer {
    pub fn new(skeleton: Skeleton, names: JointNames, config: AnalysisConfig) -> Result<Self, AnalysisError> {
        config.validate()?;
        Ok(Self {
            skeleton,
            names,
            config,
            meta: None,
            buffer: VecDeque::new(),
            next_emit: None,
        })
    }

    pub fn meta(&self) -> Option<&SkeletonMeta> {
        self.meta.as_ref()
    }

    pub fn push(&mut self, frame: &RawFrameEvent) -> Result<Option<FeatureVector>, AnalysisError> {
        let pose = kinematics::world_positions_at(&self.skeleton, &frame.values, frame.t_s)?;
        if self.meta.is_none() {
            self.meta = Some(kinematics::skeleton_meta(&self.skeleton, &pose, &self.names)?);
            self.next_emit = Some(frame.t_s + self.config.window_s);
        }
        let meta = self.meta.as_ref().expect("set above");
        let st = static_features(&pose, meta)?;
        let t = pose.t_s;
        self.buffer.push_back((pose, st));
        while let Some((front, _)) = self.buffer.front() {
            if front.t_s < t - self.config.window_s - TIME_TOL {
                self.buffer.pop_front();
            } else {
                break;
            }
        }
        let next = self.next_emit.expect("set with meta");
        if t < next - TIME_TOL {
            return Ok(None);
        }
        let mut next = next;
        while next <= t + TIME_TOL {
            next += self.config.hop_s;
        }
        self.next_emit = Some(next);
        let (poses, statics): (Vec<Pose>, Vec<StaticFeatures>) = self.buffer.iter().cloned().unzip();
        analyze_with_statics(&poses, &statics, meta, &self.config.thresholds).map(Some)
    }
}

/// Runs an [`Analyzer`] over a whole clip.
pub fn analyze_clip(
    clip: &crate::bvh::MotionClip,
    names: &JointNames,
    config: &AnalysisConfig,
) -> Result<Vec<FeatureVector>, AnalysisError> {
    let mut analyzer = Analyzer::new(clip.skeleton.clone(), names.clone(), config.clone())?;
    let mut out = Vec::new();
    for ev in crate::bvh::replay(clip, crate::bvh::ReplaySpeed::Max) {
        if let Some(fv) = analyzer.push(&ev)? {
            out.push(fv);
        }
    }
    Ok(out)
}

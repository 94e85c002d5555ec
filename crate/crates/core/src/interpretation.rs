//! The Interpretation component: maps a movement profile to an emotion with
//! a declarative rule set, and places emotions on the valence–arousal plane.
//!
//! A rule matches when every dimension it constrains has the required level.
//! Among matching rules the one with the most constraints wins; ties go to
//! the rule listed first. Winners are precomputed for all 3^7 profiles when
//! the rule set is built.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{signed_magnitude, Dimension, FeatureVector, Level, Profile, PROFILE_COUNT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpretationError {
    #[error("rule file schema error: {0}")]
    SchemaError(String),
    #[error("duplicate rule name {0:?}")]
    DuplicateRuleName(String),
    #[error("unknown dimension {0:?}")]
    UnknownDimension(String),
    #[error("unknown emotion label {0:?}")]
    UnknownLabel(String),
    #[error("no plane angle configured for {0}")]
    MissingAngle(EmotionLabel),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionLabel {
    Anger,
    Sadness,
    Fear,
    Joy,
    Surprise,
    Disgust,
    Neutral,
}

impl EmotionLabel {
    pub const ALL: [EmotionLabel; 7] = [
        EmotionLabel::Anger,
        EmotionLabel::Sadness,
        EmotionLabel::Fear,
        EmotionLabel::Joy,
        EmotionLabel::Surprise,
        EmotionLabel::Disgust,
        EmotionLabel::Neutral,
    ];
    /// The six basic emotions (every label except neutral).
    pub const BASIC: [EmotionLabel; 6] = [
        EmotionLabel::Anger,
        EmotionLabel::Sadness,
        EmotionLabel::Fear,
        EmotionLabel::Joy,
        EmotionLabel::Surprise,
        EmotionLabel::Disgust,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EmotionLabel::Anger => "anger",
            EmotionLabel::Sadness => "sadness",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Joy => "joy",
            EmotionLabel::Surprise => "surprise",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Neutral => "neutral",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionLabel {
    type Err = InterpretationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EmotionLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| InterpretationError::UnknownLabel(s.to_string()))
    }
}

/// A point of the valence–arousal plane; basic emotions at full intensity lie
/// on the unit circle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanePoint {
    pub valence: f64,
    pub arousal: f64,
}

impl PlanePoint {
    pub const ORIGIN: PlanePoint = PlanePoint {
        valence: 0.0,
        arousal: 0.0,
    };

    pub fn norm(&self) -> f64 {
        self.valence.hypot(self.arousal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionEstimate {
    pub t_s: f64,
    pub label: EmotionLabel,
    pub intensity: f64,
    pub confidence: f64,
    pub plane: PlanePoint,
    pub modality: String,
}

impl EmotionEstimate {
    /// The no-match estimate: neutral at the origin with zero intensity and
    /// confidence.
    pub fn neutral(t_s: f64, modality: &str) -> Self {
        Self {
            t_s,
            label: EmotionLabel::Neutral,
            intensity: 0.0,
            confidence: 0.0,
            plane: PlanePoint::ORIGIN,
            modality: modality.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub name: String,
    /// Required level per dimension, `None` where unconstrained.
    pub constraints: [Option<Level>; 7],
    pub label: EmotionLabel,
    pub base_intensity: f64,
}

impl Rule {
    pub fn constraint_count(&self) -> usize {
        self.constraints.iter().filter(|c| c.is_some()).count()
    }

    pub fn matches(&self, profile: &Profile) -> bool {
        self.constraints
            .iter()
            .zip(profile.0.iter())
            .all(|(c, l)| c.is_none_or(|c| c == *l))
    }

    pub fn constrained_dimensions(&self) -> impl Iterator<Item = Dimension> + '_ {
        Dimension::ALL
            .into_iter()
            .filter(|d| self.constraints[d.index()].is_some())
    }
}

/// Angle of each basic emotion on the plane, in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneAngles(BTreeMap<EmotionLabel, f64>);

impl Default for PlaneAngles {
    fn default() -> Self {
        use EmotionLabel::*;
        Self(BTreeMap::from([
            (Joy, 45.0),
            (Surprise, 100.0),
            (Anger, 160.0),
            (Fear, 200.0),
            (Disgust, 250.0),
            (Sadness, 290.0),
        ]))
    }
}

impl PlaneAngles {
    /// Angles for the given labels; neutral has no angle and is rejected.
    pub fn new(angles: BTreeMap<EmotionLabel, f64>) -> Result<Self, InterpretationError> {
        for (label, deg) in &angles {
            if *label == EmotionLabel::Neutral {
                return Err(InterpretationError::SchemaError("neutral has no plane angle".into()));
            }
            if !deg.is_finite() {
                return Err(InterpretationError::SchemaError(format!(
                    "angle for {label} is not finite"
                )));
            }
        }
        Ok(Self(angles))
    }

    pub fn get(&self, label: EmotionLabel) -> Option<f64> {
        self.0.get(&label).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (EmotionLabel, f64)> + '_ {
        self.0.iter().map(|(l, a)| (*l, *a))
    }

    /// Places `label` at `intensity` along its angle. Neutral is the origin.
    pub fn to_plane(&self, label: EmotionLabel, intensity: f64) -> Result<PlanePoint, InterpretationError> {
        if label == EmotionLabel::Neutral {
            return Ok(PlanePoint::ORIGIN);
        }
        let deg = self.get(label).ok_or(InterpretationError::MissingAngle(label))?;
        let (s, c) = deg.to_radians().sin_cos();
        Ok(PlanePoint {
            valence: intensity * c,
            arousal: intensity * s,
        })
    }

    /// Nearest label by angle, for points outside the neutral radius.
    /// Equidistant labels resolve to the one with the lower angle in [0, 360).
    pub fn from_plane(&self, p: PlanePoint, neutral_radius: f64) -> (EmotionLabel, f64) {
        let r = p.norm();
        // relative slack so that points placed exactly on the radius stay outside
        if r < neutral_radius * (1.0 - 1e-12) || self.0.is_empty() {
            return (EmotionLabel::Neutral, 0.0);
        }
        let theta = p.arousal.atan2(p.valence).to_degrees();
        let mut by_angle: Vec<(f64, EmotionLabel)> = self.iter().map(|(l, a)| (a.rem_euclid(360.0), l)).collect();
        by_angle.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut best: Option<(f64, EmotionLabel)> = None;
        for (a, label) in by_angle {
            let d = angular_distance(theta, a);
            if best.is_none_or(|(bd, _)| d < bd - 1e-9) {
                best = Some((d, label));
            }
        }
        let (_, label) = best.expect("angles nonempty");
        (label, r.min(1.0))
    }
}

/// Absolute difference of two angles in degrees, in [0, 180].
pub fn angular_distance(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(360.0);
    d.min(360.0 - d)
}

/// Radius of the neutral zone used by default.
pub const DEFAULT_NEUTRAL_RADIUS: f64 = 0.1;

/// An ordered rule list with its plane layout and a precomputed winner for
/// every profile.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    rules: Vec<Rule>,
    angles: PlaneAngles,
    neutral_radius: f64,
    winners: Vec<Option<u16>>,
}

const DEFAULT_RULES_JSON: &str = include_str!("../data/default_rules.json");

impl RuleSet {
    pub fn new(rules: Vec<Rule>, angles: PlaneAngles, neutral_radius: f64) -> Result<Self, InterpretationError> {
        let mut seen = HashSet::new();
        for r in &rules {
            if !seen.insert(r.name.as_str()) {
                return Err(InterpretationError::DuplicateRuleName(r.name.clone()));
            }
            if r.constraint_count() == 0 {
                return Err(InterpretationError::SchemaError(format!(
                    "rule {:?} has no constraints",
                    r.name
                )));
            }
            if r.label == EmotionLabel::Neutral {
                return Err(InterpretationError::SchemaError(format!(
                    "rule {:?} targets neutral, which is reserved for no match",
                    r.name
                )));
            }
            if !(0.0..=1.0).contains(&r.base_intensity) {
                return Err(InterpretationError::SchemaError(format!(
                    "rule {:?}: base_intensity {} outside [0, 1]",
                    r.name, r.base_intensity
                )));
            }
            if angles.get(r.label).is_none() {
                return Err(InterpretationError::MissingAngle(r.label));
            }
        }
        if u16::try_from(rules.len()).is_err() {
            return Err(InterpretationError::SchemaError("too many rules".into()));
        }
        if !(neutral_radius.is_finite() && (0.0..1.0).contains(&neutral_radius)) {
            return Err(InterpretationError::SchemaError(format!(
                "neutral_radius {neutral_radius} outside [0, 1)"
            )));
        }
        let winners = dispatch_table(&rules);
        Ok(Self {
            rules,
            angles,
            neutral_radius,
            winners,
        })
    }

    /// The shipped rule set: one rule per basic emotion.
    pub fn default_rules() -> Self {
        load_rules(DEFAULT_RULES_JSON).expect("shipped rule file is valid")
    }

    /// Source text of the shipped rule file.
    pub fn default_rules_json() -> &'static str {
        DEFAULT_RULES_JSON
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), PlaneAngles::default(), DEFAULT_NEUTRAL_RADIUS).expect("empty set is valid")
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn angles(&self) -> &PlaneAngles {
        &self.angles
    }

    pub fn neutral_radius(&self) -> f64 {
        self.neutral_radius
    }

    /// The winning rule for a profile, if any rule matches.
    pub fn winner(&self, profile: &Profile) -> Option<&Rule> {
        self.winners[profile.code()].map(|i| &self.rules[i as usize])
    }

    /// Rules that win for no profile at all.
    pub fn shadowed_rules(&self) -> Vec<&Rule> {
        let mut wins = vec![false; self.rules.len()];
        for w in self.winners.iter().flatten() {
            wins[*w as usize] = true;
        }
        self.rules
            .iter()
            .zip(wins)
            .filter(|(_, w)| !w)
            .map(|(r, _)| r)
            .collect()
    }

    pub fn to_plane(&self, label: EmotionLabel, intensity: f64) -> Result<PlanePoint, InterpretationError> {
        self.angles.to_plane(label, intensity)
    }

    pub fn from_plane(&self, p: PlanePoint) -> (EmotionLabel, f64) {
        self.angles.from_plane(p, self.neutral_radius)
    }
}

/// Fills the winner table by painting each rule's matching profiles, from
/// the lowest-priority rule to the highest so that better rules overwrite.
fn dispatch_table(rules: &[Rule]) -> Vec<Option<u16>> {
    let mut order: Vec<usize> = (0..rules.len()).collect();
    // ascending priority: fewer constraints first, later position first
    order.sort_by(|&a, &b| {
        rules[a]
            .constraint_count()
            .cmp(&rules[b].constraint_count())
            .then(b.cmp(&a))
    });
    let mut table = vec![None; PROFILE_COUNT];
    for i in order {
        let rule = &rules[i];
        let free: Vec<usize> = (0..7).filter(|&k| rule.constraints[k].is_none()).collect();
        let mut base = Profile::NEUTRAL;
        for d in Dimension::ALL {
            if let Some(l) = rule.constraints[d.index()] {
                base.set(d, l);
            }
        }
        let combos = 3usize.pow(free.len() as u32);
        for mut c in 0..combos {
            let mut p = base;
            for &k in &free {
                p.0[k] = Level::ALL[c % 3];
                c /= 3;
            }
            table[p.code()] = Some(i as u16);
        }
    }
    table
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleFile {
    #[serde(default)]
    plane_angles: BTreeMap<String, f64>,
    #[serde(default)]
    neutral_radius: Option<f64>,
    rules: Vec<RuleEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleEntry {
    name: String,
    label: String,
    #[serde(default = "one")]
    base_intensity: f64,
    constraints: BTreeMap<String, i64>,
}

fn one() -> f64 {
    1.0
}

/// Parses a JSON rule document. Labels without an angle in the document get
/// the default angle.
pub fn load_rules(document: &str) -> Result<RuleSet, InterpretationError> {
    let file: RuleFile = serde_json::from_str(document).map_err(|e| InterpretationError::SchemaError(e.to_string()))?;
    let mut angles = PlaneAngles::default().0;
    for (name, deg) in file.plane_angles {
        angles.insert(name.parse()?, deg);
    }
    let angles = PlaneAngles::new(angles)?;
    let mut rules = Vec::with_capacity(file.rules.len());
    for entry in file.rules {
        let label: EmotionLabel = entry.label.parse()?;
        let mut constraints = [None; 7];
        for (dim, level) in entry.constraints {
            let d = Dimension::parse(&dim).ok_or(InterpretationError::UnknownDimension(dim))?;
            let l = i8::try_from(level)
                .ok()
                .and_then(|v| Level::try_from(v).ok())
                .ok_or_else(|| {
                    InterpretationError::SchemaError(format!(
                        "rule {:?}: level {level} for {d} is not -1, 0 or 1",
                        entry.name
                    ))
                })?;
            constraints[d.index()] = Some(l);
        }
        rules.push(Rule {
            name: entry.name,
            constraints,
            label,
            base_intensity: entry.base_intensity,
        });
    }
    RuleSet::new(rules, angles, file.neutral_radius.unwrap_or(DEFAULT_NEUTRAL_RADIUS))
}

/// Applies the rule set to a feature vector.
pub fn interpret(fv: &FeatureVector, rules: &RuleSet, modality: &str) -> EmotionEstimate {
    let Some(rule) = rules.winner(&fv.profile) else {
        return EmotionEstimate::neutral(fv.t_s, modality);
    };
    let values = fv.dimension_values();
    let dims: Vec<Dimension> = rule.constrained_dimensions().collect();
    let mean = dims
        .iter()
        .map(|&d| signed_magnitude(d, values[d.index()]).abs().clamp(0.0, 1.0))
        .sum::<f64>()
        / dims.len() as f64;
    let intensity = (rule.base_intensity * mean).clamp(0.0, 1.0);
    let plane = rules
        .to_plane(rule.label, intensity)
        .expect("rule labels have angles by construction");
    EmotionEstimate {
        t_s: fv.t_s,
        label: rule.label,
        intensity,
        confidence: dims.len() as f64 / 7.0,
        plane,
        modality: modality.to_string(),
    }
}

//! Fusion of emotion estimates coming from several modality branches.
//!
//! Estimates are first grouped in time, then each group is combined:
//! agreeing labels reinforce each other (noisy-or confidence), disagreeing
//! labels are averaged on the valence–arousal plane.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interpretation::{angular_distance, EmotionEstimate, EmotionLabel, RuleSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FusionError {
    #[error("cannot fuse an empty group")]
    EmptyGroup,
    #[error("bad fusion policy: {0}")]
    BadPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    /// Redundant or complementary combination chosen per group.
    #[default]
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionPolicy {
    pub align_window_s: f64,
    /// Weight per modality; modalities not listed weigh 1.
    pub modality_weights: BTreeMap<String, f64>,
    pub mode: FusionMode,
}

impl Default for FusionPolicy {
    fn default() -> Self {
        Self {
            align_window_s: 0.5,
            modality_weights: BTreeMap::new(),
            mode: FusionMode::Auto,
        }
    }
}

impl FusionPolicy {
    pub fn weight(&self, modality: &str) -> f64 {
        self.modality_weights.get(modality).copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<(), FusionError> {
        if !(self.align_window_s.is_finite() && self.align_window_s > 0.0) {
            return Err(FusionError::BadPolicy(format!(
                "align_window_s must be positive, got {}",
                self.align_window_s
            )));
        }
        for (m, w) in &self.modality_weights {
            if !(w.is_finite() && *w > 0.0) {
                return Err(FusionError::BadPolicy(format!(
                    "weight for {m:?} must be positive, got {w}"
                )));
            }
        }
        Ok(())
    }
}

/// One contribution to a fused estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Source {
    pub modality: String,
    pub label: EmotionLabel,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedEstimate {
    #[serde(flatten)]
    pub estimate: EmotionEstimate,
    pub sources: Vec<Source>,
}

/// Slack on time comparisons, in seconds.
const TIME_EPS: f64 = 1e-12;

fn canonical_cmp(a: &EmotionEstimate, b: &EmotionEstimate) -> std::cmp::Ordering {
    a.modality
        .cmp(&b.modality)
        .then(a.t_s.total_cmp(&b.t_s))
        .then(a.label.cmp(&b.label))
        .then(a.confidence.total_cmp(&b.confidence))
        .then(a.intensity.total_cmp(&b.intensity))
}

/// Accumulates one group under the greedy rule.
struct GroupBuilder {
    t0: f64,
    members: Vec<EmotionEstimate>,
}

impl GroupBuilder {
    fn new(e: EmotionEstimate) -> Self {
        Self {
            t0: e.t_s,
            members: vec![e],
        }
    }

    fn accepts(&self, e: &EmotionEstimate, window: f64) -> bool {
        e.t_s - self.t0 <= window + TIME_EPS
    }

    fn add(&mut self, e: EmotionEstimate) {
        // latest estimate of a modality replaces the earlier one
        match self.members.iter_mut().find(|m| m.modality == e.modality) {
            Some(slot) => *slot = e,
            None => self.members.push(e),
        }
    }
}

/// Groups per-modality streams in time. Each stream must be ordered by
/// `t_s`. Estimates within `align_window_s` of a group's earliest member
/// join it; a group holds at most one estimate per modality.
pub fn align(streams: &[Vec<EmotionEstimate>], policy: &FusionPolicy) -> Vec<Vec<EmotionEstimate>> {
    let mut merged: Vec<(usize, &EmotionEstimate)> = streams
        .iter()
        .enumerate()
        .flat_map(|(i, s)| s.iter().map(move |e| (i, e)))
        .collect();
    // stable: per-stream order survives equal timestamps
    merged.sort_by(|a, b| a.1.t_s.total_cmp(&b.1.t_s).then(a.0.cmp(&b.0)));
    let mut out = Vec::new();
    let mut current: Option<GroupBuilder> = None;
    for (_, e) in merged {
        match current.as_mut() {
            Some(g) if g.accepts(e, policy.align_window_s) => g.add(e.clone()),
            _ => {
                if let Some(g) = current.take() {
                    out.push(g.members);
                }
                current = Some(GroupBuilder::new(e.clone()));
            }
        }
    }
    if let Some(g) = current {
        out.push(g.members);
    }
    out
}

/// Incremental [`align`] for estimates arriving one at a time.
///
/// Each modality must deliver in `t_s` order; across modalities an estimate
/// may arrive up to `align_window_s` later than the newest one seen. A group
/// is released once no admissible future arrival could still join it.
/// Feeding the time-merged streams and calling [`Aligner::finish`] yields
/// exactly the groups of [`align`].
pub struct Aligner {
    window: f64,
    modalities: Vec<String>,
    last_t: BTreeMap<String, f64>,
    max_seen: f64,
    pending: VecDeque<(f64, usize, EmotionEstimate)>,
}

impl Aligner {
    /// `modalities` lists every stream expected to contribute.
    pub fn new(policy: &FusionPolicy, modalities: &[String]) -> Self {
        Self {
            window: policy.align_window_s,
            modalities: modalities.to_vec(),
            last_t: BTreeMap::new(),
            max_seen: f64::NEG_INFINITY,
            pending: VecDeque::new(),
        }
    }

    /// Adds an estimate and returns the groups it makes final.
    pub fn push(&mut self, e: EmotionEstimate) -> Vec<Vec<EmotionEstimate>> {
        self.last_t.insert(e.modality.clone(), e.t_s);
        self.max_seen = self.max_seen.max(e.t_s);
        let stream = self
            .modalities
            .iter()
            .position(|m| *m == e.modality)
            .unwrap_or(self.modalities.len());
        // after every pending entry with the same (t, stream): arrival order
        let at = self
            .pending
            .iter()
            .position(|(t, s, _)| t.total_cmp(&e.t_s).then(s.cmp(&stream)).is_gt())
            .unwrap_or(self.pending.len());
        self.pending.insert(at, (e.t_s, stream, e));
        self.release(self.horizon())
    }

    /// Time up to which every future arrival is known to be later.
    fn horizon(&self) -> f64 {
        let all_reported = self.modalities.iter().all(|m| self.last_t.contains_key(m));
        let slowest = if all_reported {
            self.modalities
                .iter()
                .map(|m| self.last_t[m])
                .fold(f64::INFINITY, f64::min)
        } else {
            f64::NEG_INFINITY
        };
        slowest.max(self.max_seen - self.window)
    }

    fn release(&mut self, horizon: f64) -> Vec<Vec<EmotionEstimate>> {
        let mut out = Vec::new();
        while let Some((t0, _, _)) = self.pending.front() {
            let close_at = t0 + self.window + TIME_EPS;
            // a member arriving later at exactly close_at could still join
            if close_at >= horizon {
                break;
            }
            let (_, _, first) = self.pending.pop_front().expect("front exists");
            let mut g = GroupBuilder::new(first);
            while let Some((_, _, e)) = self.pending.front() {
                if !g.accepts(e, self.window) {
                    break;
                }
                let (_, _, e) = self.pending.pop_front().expect("front exists");
                g.add(e);
            }
            out.push(g.members);
        }
        out
    }

    /// Releases every remaining group.
    pub fn finish(&mut self) -> Vec<Vec<EmotionEstimate>> {
        self.release(f64::INFINITY)
    }
}

/// Combines one aligned group.
///
/// A single estimate passes through unchanged. When every label agrees the
/// confidence is the noisy-or of the sources and the intensity their
/// confidence-weighted mean. Otherwise the plane points are averaged with
/// weights `modality weight × confidence`, the centroid is mapped back to a
/// label, and the confidence is the weighted mean confidence scaled by the
/// angular agreement of the sources.
pub fn fuse(group: &[EmotionEstimate], policy: &FusionPolicy, rules: &RuleSet) -> Result<FusedEstimate, FusionError> {
    if group.is_empty() {
        return Err(FusionError::EmptyGroup);
    }
    let mut g = group.to_vec();
    g.sort_by(canonical_cmp);
    let sources = g
        .iter()
        .map(|e| Source {
            modality: e.modality.clone(),
            label: e.label,
            confidence: e.confidence,
        })
        .collect();
    if g.len() == 1 {
        return Ok(FusedEstimate {
            estimate: g.pop().expect("one element"),
            sources,
        });
    }

    let t_s = g.iter().map(|e| e.t_s).fold(f64::NEG_INFINITY, f64::max);
    let mut names: Vec<&str> = g.iter().map(|e| e.modality.as_str()).collect();
    names.sort_unstable();
    names.dedup();
    let modality = names.join("+");

    let first = g[0].label;
    let (label, intensity, confidence) = if g.iter().all(|e| e.label == first) {
        let miss: f64 = g.iter().map(|e| 1.0 - e.confidence).product();
        let csum: f64 = g.iter().map(|e| e.confidence).sum();
        let intensity = if csum > 0.0 {
            g.iter().map(|e| e.confidence * e.intensity).sum::<f64>() / csum
        } else {
            g.iter().map(|e| e.intensity).sum::<f64>() / g.len() as f64
        };
        (first, intensity, 1.0 - miss)
    } else {
        let mut wsum = 0.0;
        let (mut v, mut a) = (0.0, 0.0);
        let mut msum = 0.0;
        let mut cmean = 0.0;
        for e in &g {
            let mw = policy.weight(&e.modality);
            let w = mw * e.confidence;
            wsum += w;
            v += w * e.plane.valence;
            a += w * e.plane.arousal;
            msum += mw;
            cmean += mw * e.confidence;
        }
        let centroid = if wsum > 0.0 {
            crate::interpretation::PlanePoint {
                valence: v / wsum,
                arousal: a / wsum,
            }
        } else {
            crate::interpretation::PlanePoint::ORIGIN
        };
        let (label, intensity) = rules.from_plane(centroid);
        let angles: Vec<f64> = g
            .iter()
            .filter(|e| e.plane.norm() > 0.0)
            .map(|e| e.plane.arousal.atan2(e.plane.valence).to_degrees())
            .collect();
        let mut spread: f64 = 0.0;
        for (i, x) in angles.iter().enumerate() {
            for y in &angles[i + 1..] {
                spread = spread.max(angular_distance(*x, *y));
            }
        }
        let agreement = (1.0 - spread / 180.0).clamp(0.0, 1.0);
        (label, intensity, (cmean / msum * agreement).clamp(0.0, 1.0))
    };
    let intensity = if label == EmotionLabel::Neutral { 0.0 } else { intensity };
    let plane = rules
        .to_plane(label, intensity)
        .unwrap_or(crate::interpretation::PlanePoint::ORIGIN);
    Ok(FusedEstimate {
        estimate: EmotionEstimate {
            t_s,
            label,
            intensity,
            confidence,
            plane,
            modality,
        },
        sources,
    })
}

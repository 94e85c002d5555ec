//! Messages exchanged between pipeline components.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ComponentId;
use crate::analysis::FeatureVector;
use crate::bvh::RawFrameEvent;
use crate::fusion::FusedEstimate;
use crate::interpretation::{EmotionEstimate, EmotionLabel};
use crate::stage::StageDirective;

/// An emotion turned into a task change for the Dialogue Controller.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSignal {
    pub t_s: f64,
    pub task: String,
    pub label: EmotionLabel,
}

/// An emotion turned into an output-modality choice for the interaction
/// branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalitySelection {
    pub t_s: f64,
    pub output: String,
    pub label: EmotionLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    Frame(RawFrameEvent),
    Feature(FeatureVector),
    Emotion(EmotionEstimate),
    Fused(FusedEstimate),
    Directive(StageDirective),
    Task(TaskSignal),
    Modality(ModalitySelection),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Frame,
    Feature,
    Emotion,
    Fused,
    Directive,
    Task,
    Modality,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Frame => "frame",
            EventKind::Feature => "feature",
            EventKind::Emotion => "emotion",
            EventKind::Fused => "fused",
            EventKind::Directive => "directive",
            EventKind::Task => "task",
            EventKind::Modality => "modality",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Payload {
    pub fn kind(&self) -> EventKind {
        match self {
            Payload::Frame(_) => EventKind::Frame,
            Payload::Feature(_) => EventKind::Feature,
            Payload::Emotion(_) => EventKind::Emotion,
            Payload::Fused(_) => EventKind::Fused,
            Payload::Directive(_) => EventKind::Directive,
            Payload::Task(_) => EventKind::Task,
            Payload::Modality(_) => EventKind::Modality,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineEvent {
    pub t_s: f64,
    pub origin: ComponentId,
    /// Branch the event belongs to; `None` past the emotion branch.
    pub modality: Option<String>,
    pub payload: Payload,
}

impl PipelineEvent {
    pub fn new(t_s: f64, origin: ComponentId, modality: Option<&str>, payload: Payload) -> Self {
        Self {
            t_s,
            origin,
            modality: modality.map(str::to_string),
            payload,
        }
    }

    pub fn kind(&self) -> EventKind {
        self.payload.kind()
    }

    /// 64-bit FNV-1a of the event's JSON encoding, as 16 hex digits.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("events serialize");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in bytes {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

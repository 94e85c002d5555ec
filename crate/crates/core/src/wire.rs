//! JSON-Lines encoding of pipeline events and trace entries.
//!
//! Every line is one JSON object with the timestamp `t` first and a `kind`
//! tag. Floating-point numbers are rounded to [`SIG_DIGITS`] significant
//! digits, so encoding a decoded line reproduces it byte for byte.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::analysis::{DynamicFeatures, Profile, StaticFeatures};
use crate::arch::{ComponentId, ModalitySelection, Payload, PipelineEvent, TaskSignal, TraceEntry};
use crate::bvh::RawFrameEvent;
use crate::fusion::{FusedEstimate, Source};
use crate::interpretation::{EmotionEstimate, EmotionLabel, PlanePoint};
use crate::numfmt::{round_sig, SIG_DIGITS};
use crate::stage::{AugmentationMode, StageDirective, StageParams};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("bad event line: {0}")]
pub struct WireError(pub String);

/// The flat line layout of a [`PipelineEvent`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireLine {
    pub t: f64,
    #[serde(flatten)]
    pub body: WireBody,
    pub origin: ComponentId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WireBody {
    Frame {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        modality: Option<String>,
        frame_index: usize,
        values: Vec<f64>,
    },
    Feature {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        modality: Option<String>,
        #[serde(rename = "static")]
        static_features: StaticFeatures,
        #[serde(rename = "dynamic")]
        dynamic_features: DynamicFeatures,
        profile: Profile,
    },
    Emotion {
        modality: String,
        label: EmotionLabel,
        intensity: f64,
        confidence: f64,
        valence: f64,
        arousal: f64,
    },
    Fused {
        modality: String,
        label: EmotionLabel,
        intensity: f64,
        confidence: f64,
        valence: f64,
        arousal: f64,
        sources: Vec<Source>,
    },
    Directive {
        object: String,
        palette: [u8; 3],
        params: StageParams,
        label: EmotionLabel,
        mode: AugmentationMode,
    },
    Task {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        modality: Option<String>,
        task: String,
        label: EmotionLabel,
    },
    Modality {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        modality: Option<String>,
        output: String,
        label: EmotionLabel,
    },
}

impl From<&PipelineEvent> for WireLine {
    fn from(e: &PipelineEvent) -> Self {
        let modality = e.modality.clone();
        let body = match &e.payload {
            Payload::Frame(f) => WireBody::Frame {
                modality,
                frame_index: f.frame_index,
                values: f.values.clone(),
            },
            Payload::Feature(fv) => WireBody::Feature {
                modality,
                static_features: fv.static_features,
                dynamic_features: fv.dynamic_features,
                profile: fv.profile,
            },
            Payload::Emotion(x) => WireBody::Emotion {
                modality: x.modality.clone(),
                label: x.label,
                intensity: x.intensity,
                confidence: x.confidence,
                valence: x.plane.valence,
                arousal: x.plane.arousal,
            },
            Payload::Fused(f) => {
                let x = &f.estimate;
                WireBody::Fused {
                    modality: x.modality.clone(),
                    label: x.label,
                    intensity: x.intensity,
                    confidence: x.confidence,
                    valence: x.plane.valence,
                    arousal: x.plane.arousal,
                    sources: f.sources.clone(),
                }
            }
            Payload::Directive(d) => WireBody::Directive {
                object: d.object.clone(),
                palette: d.palette,
                params: d.params,
                label: d.label,
                mode: d.mode,
            },
            Payload::Task(s) => WireBody::Task {
                modality,
                task: s.task.clone(),
                label: s.label,
            },
            Payload::Modality(s) => WireBody::Modality {
                modality,
                output: s.output.clone(),
                label: s.label,
            },
        };
        WireLine {
            t: e.t_s,
            body,
            origin: e.origin,
        }
    }
}

impl From<WireLine> for PipelineEvent {
    fn from(w: WireLine) -> Self {
        let t = w.t;
        let estimate = |modality: String, label, intensity, confidence, valence, arousal| EmotionEstimate {
            t_s: t,
            label,
            intensity,
            confidence,
            plane: PlanePoint { valence, arousal },
            modality,
        };
        let (modality, payload) = match w.body {
            WireBody::Frame {
                modality,
                frame_index,
                values,
            } => (
                modality,
                Payload::Frame(RawFrameEvent {
                    t_s: t,
                    frame_index,
                    values,
                }),
            ),
            WireBody::Feature {
                modality,
                static_features,
                dynamic_features,
                profile,
            } => (
                modality,
                Payload::Feature(crate::analysis::FeatureVector {
                    t_s: t,
                    static_features,
                    dynamic_features,
                    profile,
                }),
            ),
            WireBody::Emotion {
                modality,
                label,
                intensity,
                confidence,
                valence,
                arousal,
            } => (
                Some(modality.clone()),
                Payload::Emotion(estimate(modality, label, intensity, confidence, valence, arousal)),
            ),
            WireBody::Fused {
                modality,
                label,
                intensity,
                confidence,
                valence,
                arousal,
                sources,
            } => (
                Some(modality.clone()),
                Payload::Fused(FusedEstimate {
                    estimate: estimate(modality, label, intensity, confidence, valence, arousal),
                    sources,
                }),
            ),
            WireBody::Directive {
                object,
                palette,
                params,
                label,
                mode,
            } => (
                None,
                Payload::Directive(StageDirective {
                    t_s: t,
                    object,
                    palette,
                    params,
                    label,
                    mode,
                }),
            ),
            WireBody::Task { modality, task, label } => (modality, Payload::Task(TaskSignal { t_s: t, task, label })),
            WireBody::Modality {
                modality,
                output,
                label,
            } => (modality, Payload::Modality(ModalitySelection { t_s: t, output, label })),
        };
        PipelineEvent {
            t_s: t,
            origin: w.origin,
            modality,
            payload,
        }
    }
}

/// Rounds every non-integer number in `v` to [`SIG_DIGITS`] digits.
fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("is_f64");
            let r = round_sig(x, SIG_DIGITS);
            // -0 prints as 0
            let r = if r == 0.0 { 0.0 } else { r };
            if let Some(m) = serde_json::Number::from_f64(r) {
                *n = m;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_numbers),
        Value::Object(map) => map.values_mut().for_each(round_numbers),
        _ => {}
    }
}

fn encode<T: Serialize>(x: &T) -> String {
    let mut v = serde_json::to_value(x).expect("wire types serialize");
    round_numbers(&mut v);
    v.to_string()
}

/// One JSON line (without the newline) for `e`.
pub fn to_line(e: &PipelineEvent) -> String {
    encode(&WireLine::from(e))
}

pub fn parse_line(line: &str) -> Result<PipelineEvent, WireError> {
    let w: WireLine = serde_json::from_str(line).map_err(|e| WireError(e.to_string()))?;
    Ok(w.into())
}

/// One JSON line for a trace entry: `{seq, t_s, from, to, kind, digest}`.
pub fn trace_line(t: &TraceEntry) -> String {
    encode(t)
}

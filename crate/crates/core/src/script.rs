//! Scripted emotion streams standing in for modalities without an analysis
//! algorithm (face, voice).
//!
//! A script is a JSON array of `{t_s, label, intensity, confidence}`
//! entries (`t` is accepted for `t_s`) with strictly increasing times.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interpretation::{EmotionEstimate, EmotionLabel, InterpretationError, PlaneAngles};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScriptError {
    #[error("script is not valid JSON: {0}")]
    Parse(String),
    #[error("script entry {index}: t_s {t_s} does not follow {previous}")]
    ScriptOrderError { index: usize, previous: f64, t_s: f64 },
    #[error("script entry {index}: {field} = {value} is out of range")]
    OutOfRange {
        index: usize,
        field: &'static str,
        value: f64,
    },
    #[error(transparent)]
    Interpretation(#[from] InterpretationError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptEntry {
    #[serde(alias = "t")]
    pub t_s: f64,
    pub label: EmotionLabel,
    pub intensity: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ModalityScript(pub Vec<ScriptEntry>);

impl ModalityScript {
    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        let s: Self = serde_json::from_str(text).map_err(|e| ScriptError::Parse(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Times finite, non-negative and strictly increasing; intensity and
    /// confidence in [0, 1].
    pub fn validate(&self) -> Result<(), ScriptError> {
        let mut previous: Option<f64> = None;
        for (index, e) in self.0.iter().enumerate() {
            if !(e.t_s.is_finite() && e.t_s >= 0.0) {
                return Err(ScriptError::OutOfRange {
                    index,
                    field: "t_s",
                    value: e.t_s,
                });
            }
            for (field, value) in [("intensity", e.intensity), ("confidence", e.confidence)] {
                if !(0.0..=1.0).contains(&value) {
                    return Err(ScriptError::OutOfRange { index, field, value });
                }
            }
            if let Some(p) = previous {
                if e.t_s <= p {
                    return Err(ScriptError::ScriptOrderError {
                        index,
                        previous: p,
                        t_s: e.t_s,
                    });
                }
            }
            previous = Some(e.t_s);
        }
        Ok(())
    }
}

/// One estimate per entry, placed on the plane at the label's angle.
pub fn synth_modality(
    script: &ModalityScript,
    modality: &str,
    angles: &PlaneAngles,
) -> Result<Vec<EmotionEstimate>, ScriptError> {
    script.validate()?;
    script
        .0
        .iter()
        .map(|e| {
            Ok(EmotionEstimate {
                t_s: e.t_s,
                label: e.label,
                intensity: e.intensity,
                confidence: e.confidence,
                plane: angles.to_plane(e.label, e.intensity)?,
                modality: modality.to_string(),
            })
        })
        .collect()
}

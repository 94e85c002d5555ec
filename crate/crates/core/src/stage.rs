//! The ballet functional core: chooses a virtual stage object for the
//! emotion to render and animates it with the emotion's intensity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interpretation::{EmotionEstimate, EmotionLabel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StageError {
    #[error("no stage table entry for {0}")]
    MissingTableEntry(EmotionLabel),
    #[error("bad stage tables: {0}")]
    BadTables(String),
}

/// Whether the stage renders the detected emotion or its contrasting one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentationMode {
    #[default]
    Magnify,
    Contrast,
}

impl AugmentationMode {
    pub fn as_str(self) -> &'static str {
        match self {
            AugmentationMode::Magnify => "magnify",
            AugmentationMode::Contrast => "contrast",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageParams {
    pub density: f64,
    pub speed: f64,
}

/// Instruction for an external renderer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDirective {
    pub t_s: f64,
    pub object: String,
    pub palette: [u8; 3],
    pub params: StageParams,
    /// The label actually rendered, after any contrast mapping.
    pub label: EmotionLabel,
    pub mode: AugmentationMode,
}

/// Object shown when nothing is rendered.
pub const CLEAR_OBJECT: &str = "clear";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageObject {
    pub object: String,
    pub palette: [u8; 3],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageTables {
    pub object_map: BTreeMap<EmotionLabel, StageObject>,
    pub contrast_map: BTreeMap<EmotionLabel, EmotionLabel>,
}

impl Default for StageTables {
    fn default() -> Self {
        use EmotionLabel::*;
        let obj = |o: &str, p: [u8; 3]| StageObject {
            object: o.to_string(),
            palette: p,
        };
        Self {
            object_map: BTreeMap::from([
                (Anger, obj("flames", [220, 40, 20])),
                (Fear, obj("veil", [20, 30, 80])),
                (Joy, obj("ribbons", [255, 190, 60])),
                (Sadness, obj("rain", [90, 110, 140])),
                (Surprise, obj("starburst", [255, 255, 255])),
                (Disgust, obj("haze", [90, 160, 60])),
            ]),
            contrast_map: BTreeMap::from([
                (Anger, Fear),
                (Fear, Anger),
                (Joy, Sadness),
                (Sadness, Joy),
                (Surprise, Disgust),
                (Disgust, Surprise),
                (Neutral, Neutral),
            ]),
        }
    }
}

impl StageTables {
    /// Every basic emotion has an object; the contrast map is an involution
    /// over all labels.
    pub fn validate(&self) -> Result<(), StageError> {
        for label in EmotionLabel::BASIC {
            match self.object_map.get(&label) {
                None => return Err(StageError::MissingTableEntry(label)),
                Some(o) if o.object.is_empty() || o.object == CLEAR_OBJECT => {
                    return Err(StageError::BadTables(format!(
                        "object for {label} must be a nonempty, non-clear id"
                    )))
                }
                Some(_) => {}
            }
        }
        for label in EmotionLabel::ALL {
            let c = self.contrast(label)?;
            if self.contrast(c)? != label {
                return Err(StageError::BadTables(format!(
                    "contrast map is not an involution: {label} → {c} → {}",
                    self.contrast(c)?
                )));
            }
        }
        Ok(())
    }

    pub fn contrast(&self, label: EmotionLabel) -> Result<EmotionLabel, StageError> {
        self.contrast_map
            .get(&label)
            .copied()
            .ok_or(StageError::MissingTableEntry(label))
    }
}

/// Sets density and speed from `intensity`. Neutral directives stay at rest.
pub fn modulate(d: &StageDirective, intensity: f64) -> StageDirective {
    let i = intensity.clamp(0.0, 1.0);
    let params = if d.label == EmotionLabel::Neutral {
        StageParams::default()
    } else {
        StageParams {
            density: i,
            speed: 0.25 + 0.75 * i,
        }
    };
    StageDirective { params, ..d.clone() }
}

/// The directive for an estimate under `mode`.
pub fn decide(e: &EmotionEstimate, mode: AugmentationMode, tables: &StageTables) -> Result<StageDirective, StageError> {
    let label = match mode {
        AugmentationMode::Magnify => e.label,
        AugmentationMode::Contrast => tables.contrast(e.label)?,
    };
    if label == EmotionLabel::Neutral {
        return Ok(StageDirective {
            t_s: e.t_s,
            object: CLEAR_OBJECT.to_string(),
            palette: [0, 0, 0],
            params: StageParams::default(),
            label,
            mode,
        });
    }
    let obj = tables
        .object_map
        .get(&label)
        .ok_or(StageError::MissingTableEntry(label))?;
    let d = StageDirective {
        t_s: e.t_s,
        object: obj.object.clone(),
        palette: obj.palette,
        params: StageParams::default(),
        label,
        mode,
    };
    Ok(modulate(&d, e.intensity))
}

/// Minimum parameter change that justifies re-emitting the same object.
pub const DEFAULT_EPSILON: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageConfig {
    pub mode: AugmentationMode,
    pub object_map: BTreeMap<EmotionLabel, StageObject>,
    pub contrast_map: BTreeMap<EmotionLabel, EmotionLabel>,
    pub epsilon: f64,
}

impl Default for StageConfig {
    fn default() -> Self {
        let t = StageTables::default();
        Self {
            mode: AugmentationMode::Magnify,
            object_map: t.object_map,
            contrast_map: t.contrast_map,
            epsilon: DEFAULT_EPSILON,
        }
    }
}

impl StageConfig {
    pub fn tables(&self) -> StageTables {
        StageTables {
            object_map: self.object_map.clone(),
            contrast_map: self.contrast_map.clone(),
        }
    }
}

/// Stateful functional core: remembers the last emitted directive and
/// suppresses near-duplicates.
#[derive(Debug, Clone)]
pub struct StageCore {
    mode: AugmentationMode,
    tables: StageTables,
    epsilon: f64,
    last: Option<StageDirective>,
}

impl StageCore {
    pub fn new(config: &StageConfig) -> Result<Self, StageError> {
        let tables = config.tables();
        tables.validate()?;
        if !(config.epsilon.is_finite() && config.epsilon >= 0.0) {
            return Err(StageError::BadTables(format!(
                "epsilon {} must be non-negative",
                config.epsilon
            )));
        }
        Ok(Self {
            mode: config.mode,
            tables,
            epsilon: config.epsilon,
            last: None,
        })
    }

    pub fn mode(&self) -> AugmentationMode {
        self.mode
    }

    /// The directive to emit for `e`, or `None` when it would repeat the
    /// last one: same label and object, both parameters within epsilon.
    pub fn process(&mut self, e: &EmotionEstimate) -> Result<Option<StageDirective>, StageError> {
        let d = decide(e, self.mode, &self.tables)?;
        if let Some(last) = &self.last {
            let eps = self.epsilon;
            let same = last.label == d.label
                && last.object == d.object
                && (last.params.density - d.params.density).abs() < eps
                && (last.params.speed - d.params.speed).abs() < eps;
            if same {
                return Ok(None);
            }
        }
        self.last = Some(d.clone());
        Ok(Some(d))
    }
}

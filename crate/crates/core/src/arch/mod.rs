//! The architecture kernel: the five Arch components (Functional Core and
//! its Adapter, Dialogue Controller, Logical and Physical Interaction), the
//! emotion branch (Capture, Analysis, Interpretation, Fusion), the PAC
//! hierarchy inside the Dialogue Controller, and the three places where the
//! emotion branch can be connected.

mod event;
mod pac;
mod pipeline;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use event::{EventKind, ModalitySelection, Payload, PipelineEvent, TaskSignal};
pub use pac::{pac_send, Delivery, Facet, FacetAddr, Hop, PacAgent, PacTree};
pub use pipeline::{
    build_pipeline, build_pipeline_in, run, run_with_sink, Component, ModalityConfig, ModalitySource, NodeId, Outbox,
    Pipeline, PipelineConfig, RoutingTables, RunInputs, RunLog, RunOptions, TraceEntry, BUILTIN_RULES,
};

use crate::analysis::AnalysisError;
use crate::fusion::FusionError;
use crate::interpretation::InterpretationError;
use crate::stage::StageError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArchError {
    #[error("configuration error at {key}: {message}")]
    ConfigError { key: String, message: String },
    #[error("{kind} event is not allowed on edge {from} → {to}")]
    EdgeTypeViolation { from: String, to: String, kind: EventKind },
    #[error("illegal facet route {from} → {to}: presentation and abstraction talk only through dialogue")]
    IllegalFacetRoute { from: String, to: String },
    #[error("unknown PAC agent {0:?}")]
    UnknownAgent(String),
    #[error("no input supplied for modality {0:?}")]
    MissingInput(String),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Interpretation(#[from] InterpretationError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Stage(#[from] StageError),
}

impl ArchError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        ArchError::ConfigError {
            key: key.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ComponentId {
    FunctionalCore,
    FunctionalCoreAdapter,
    DialogueController,
    LogicalInteraction,
    PhysicalInteraction,
    Capture,
    Analysis,
    Interpretation,
    Fusion,
}

impl ComponentId {
    pub fn as_str(self) -> &'static str {
        match self {
            ComponentId::FunctionalCore => "FunctionalCore",
            ComponentId::FunctionalCoreAdapter => "FunctionalCoreAdapter",
            ComponentId::DialogueController => "DialogueController",
            ComponentId::LogicalInteraction => "LogicalInteraction",
            ComponentId::PhysicalInteraction => "PhysicalInteraction",
            ComponentId::Capture => "Capture",
            ComponentId::Analysis => "Analysis",
            ComponentId::Interpretation => "Interpretation",
            ComponentId::Fusion => "Fusion",
        }
    }
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where the emotion branch delivers its result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum RoutingCase {
    /// The functional branch manipulates the emotion explicitly.
    #[default]
    Case1FunctionalBranch,
    /// The emotion drives task sequencing in the Dialogue Controller.
    Case2DialogueController,
    /// The emotion selects output modalities in the interaction branch.
    Case3InteractionBranch,
}

impl RoutingCase {
    pub const ALL: [RoutingCase; 3] = [
        RoutingCase::Case1FunctionalBranch,
        RoutingCase::Case2DialogueController,
        RoutingCase::Case3InteractionBranch,
    ];

    pub fn number(self) -> u8 {
        match self {
            RoutingCase::Case1FunctionalBranch => 1,
            RoutingCase::Case2DialogueController => 2,
            RoutingCase::Case3InteractionBranch => 3,
        }
    }
}

impl TryFrom<u8> for RoutingCase {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            1 => Ok(RoutingCase::Case1FunctionalBranch),
            2 => Ok(RoutingCase::Case2DialogueController),
            3 => Ok(RoutingCase::Case3InteractionBranch),
            _ => Err(format!("routing case must be 1, 2 or 3, got {v}")),
        }
    }
}

impl From<RoutingCase> for u8 {
    fn from(c: RoutingCase) -> u8 {
        c.number()
    }
}

/// Component that receives the emotion branch's output under `case`.
pub fn route_emotion(case: RoutingCase) -> ComponentId {
    match case {
        RoutingCase::Case1FunctionalBranch => ComponentId::FunctionalCoreAdapter,
        RoutingCase::Case2DialogueController => ComponentId::DialogueController,
        RoutingCase::Case3InteractionBranch => ComponentId::LogicalInteraction,
    }
}

/// Event kinds allowed on an edge between two component types. Empty when
/// no such edge may exist.
pub fn allowed_kinds(from: ComponentId, to: ComponentId) -> &'static [EventKind] {
    use ComponentId::*;
    use EventKind::*;
    match (from, to) {
        (Capture, Analysis) | (Capture, PhysicalInteraction) => &[Frame],
        (Analysis, Interpretation) => &[Feature],
        (Interpretation, Fusion) => &[Emotion],
        (Interpretation, FunctionalCoreAdapter) | (Fusion, FunctionalCoreAdapter) => &[Emotion, Fused],
        (Interpretation, DialogueController) | (Fusion, DialogueController) => &[Task],
        (Interpretation, LogicalInteraction) | (Fusion, LogicalInteraction) => &[Modality],
        (FunctionalCoreAdapter, FunctionalCore) => &[Emotion],
        (FunctionalCore, DialogueController) => &[Directive],
        (DialogueController, LogicalInteraction) => &[Directive, Task],
        (LogicalInteraction, PhysicalInteraction) => &[Directive, Task, Modality],
        _ => &[],
    }
}

//! Emotion-aware interactive stage pipeline.
//!
//! An emotion branch (Capture → Analysis → Interpretation) is attached to a
//! PAC-Amodeus style architecture (Functional Core, Functional Core Adapter,
//! Dialogue Controller, Logical and Physical Interaction). Captured motion is
//! analysed into movement features, classified by declarative rules into an
//! emotion with an intensity, optionally fused with other modalities, and
//! routed to one of three places in the architecture. The ballet functional
//! core turns emotions into stage augmentation directives.

pub mod analysis;
pub mod arch;
pub mod bvh;
pub mod fusion;
pub mod geometry;
pub mod interpretation;
pub mod kinematics;
pub mod numfmt;
pub mod script;
pub mod stage;
pub mod synth;
pub mod wire;

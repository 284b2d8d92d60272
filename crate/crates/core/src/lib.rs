//! Cross-modal attribute insertion (XMAI) for image-text pairs.
//!
//! The crate augments the text side of an image-text pair by inserting visual
//! attributes of objects detected in the image in front of their mentions, and
//! provides the evaluation harness used to measure how retrieval and entailment
//! models react to the enriched text.
//!
//! Every pretrained-model capability (mask filling, cross-modal encoding, part
//! of speech tagging) sits behind a trait in [`providers`], with deterministic
//! file-backed fixtures and a line-delimited JSON client for remote adapters.

pub mod augmenter;
pub mod baselines;
pub mod error;
pub mod harness;
pub mod io;
pub mod metrics;
pub mod model;
pub mod providers;

pub use error::{Error, Result};
pub use model::{
    AugmentationConfig, AugmentationResult, CandidateInsertion, Decision, Detection,
    DetectionRecord, Example, Label, MatchKind, MaskSite,
};

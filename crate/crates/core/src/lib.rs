//! Screen-reader task execution harness for finding accessibility errors that
//! only show up through interaction.
//!
//! The pipeline mirrors how a screen-reader user meets an app:
//!
//! - [`app_model`] describes a virtual app declaratively and injects labelled
//!   faults into it.
//! - [`screenreader`] linearizes the current screen and executes swipe,
//!   double-tap, back and typing gestures, returning spoken transcripts.
//! - [`taskgen`] turns the visual layer of a screen into one task per
//!   interactive element, with a seeded detector noise model.
//! - [`executor`] drives an [`agent::AgentBackend`] through a
//!   decide / act / reflect loop and records an execution trace.
//! - [`analyzer`] assesses each trace step and classifies failures into the
//!   five error categories.
//! - [`harness`] synthesizes corpora, runs them end to end, and scores the
//!   findings against the injected ground truth.

pub mod agent;
pub mod analyzer;
pub mod app_model;
pub mod criterion;
pub mod executor;
pub mod harness;
pub mod screenreader;
pub mod taskgen;
pub mod similarity;

pub use app_model::{load_app, AppDefinition, ElementCategory, EnvState, ErrorCategory, FaultSpec, UiElement};
pub use screenreader::{GestureRequest, GestureResult, TranscriptItem};
pub use taskgen::TaskSpecification;

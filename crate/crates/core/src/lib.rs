//! Confidence-gated adaptive detection inference over replayable traces.
//!
//! Two routing policies are provided: a two-pass resolution cascade (cheap
//! low-resolution pass, escalate to high resolution when the best confidence
//! is below a gate) and an early-exit gate over an intermediate head with
//! flip test-time augmentation. Around them sit a COCO-style mAP evaluator,
//! two-stage threshold calibration, throughput accounting, trace and
//! annotation I/O, a deterministic synthetic detector, and report emission.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backends;
pub mod bench;
pub mod calibrate;
#[cfg(feature = "cli")]
pub mod cli;
pub mod cocoeval;
pub mod error;
pub mod geometry;
pub mod model;
pub mod report;
pub mod router;

pub use error::{Error, Result};

//! Data ingestion and generation.

pub mod annotations;
pub mod dataset;
pub mod synth;
pub mod traces;

pub use annotations::{emit_annotations, parse_annotations, parse_annotations_str, Annotations};
pub use dataset::{balanced_subset, categorize, Complexity};
pub use synth::{generate_synthetic, SyntheticConfig, TierParams};
pub use traces::{emit_traces, parse_traces, parse_traces_str, TraceFile, TraceHeader, TRACE_FORMAT_VERSION};

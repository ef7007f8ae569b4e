//! Shared domain types: boxes, detections, ground truth, and recorded passes.
//!
//! Boxes are `(x, y, w, h)` with a top-left origin in original-image pixels,
//! whatever resolution the detector actually ran at.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Axis-aligned box in original-image pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoxRepr", into = "BoxRepr")]
pub struct BBox {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

#[derive(Serialize, Deserialize)]
struct BoxRepr {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

impl TryFrom<BoxRepr> for BBox {
    type Error = Error;
    fn try_from(r: BoxRepr) -> Result<Self> {
        BBox::new(r.x, r.y, r.w, r.h)
    }
}

impl From<BBox> for BoxRepr {
    fn from(b: BBox) -> Self {
        BoxRepr {
            x: b.x,
            y: b.y,
            w: b.w,
            h: b.h,
        }
    }
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        let ok = x.is_finite() && y.is_finite() && w.is_finite() && h.is_finite() && w > 0.0 && h > 0.0;
        if !ok {
            return Err(Error::InvalidBox { x, y, w, h });
        }
        Ok(Self { x, y, w, h })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn w(&self) -> f64 {
        self.w
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Intersects the box with `[0, width] x [0, height]`.
    ///
    /// Returns `None` when nothing of positive area is left.
    pub fn clamp_to(&self, width: f64, height: f64) -> Option<BBox> {
        if self.is_within(width, height) {
            return Some(*self);
        }
        let x0 = self.x.clamp(0.0, width);
        let y0 = self.y.clamp(0.0, height);
        let x1 = self.right().clamp(0.0, width);
        let y1 = self.bottom().clamp(0.0, height);
        BBox::new(x0, y0, x1 - x0, y1 - y0).ok()
    }

    pub fn is_within(&self, width: f64, height: f64) -> bool {
        self.x >= 0.0 && self.y >= 0.0 && self.right() <= width && self.bottom() <= height
    }
}

/// One predicted box with its confidence and class label.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DetectionRepr", into = "DetectionRepr")]
pub struct Detection {
    pub bbox: BBox,
    pub(crate) score: f64,
    pub category_id: u32,
}

/// Flat wire form shared with the trace file schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct DetectionRepr {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub score: f64,
    pub category_id: u32,
}

impl TryFrom<DetectionRepr> for Detection {
    type Error = Error;
    fn try_from(r: DetectionRepr) -> Result<Self> {
        Detection::new(BBox::new(r.x, r.y, r.w, r.h)?, r.score, r.category_id)
    }
}

impl From<Detection> for DetectionRepr {
    fn from(d: Detection) -> Self {
        DetectionRepr {
            x: d.bbox.x,
            y: d.bbox.y,
            w: d.bbox.w,
            h: d.bbox.h,
            score: d.score,
            category_id: d.category_id,
        }
    }
}

impl Detection {
    pub fn new(bbox: BBox, score: f64, category_id: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::InvalidScore(score));
        }
        Ok(Self {
            bbox,
            score,
            category_id,
        })
    }

    /// Like [`Detection::new`] but clamps the score into `[0, 1]`.
    ///
    /// The flag is true when clamping changed the value. NaN is rejected.
    pub fn new_clamped(bbox: BBox, score: f64, category_id: u32) -> Result<(Self, bool)> {
        if score.is_nan() {
            return Err(Error::InvalidScore(score));
        }
        let clamped = score.clamp(0.0, 1.0);
        Ok((Self::new(bbox, clamped, category_id)?, clamped != score))
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    /// Copy with the score multiplied by `factor`, clamped into `[0, 1]`.
    pub fn with_scaled_score(&self, factor: f64) -> Self {
        Self {
            score: (self.score * factor).clamp(0.0, 1.0),
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthBox {
    pub bbox: BBox,
    pub category_id: u32,
    /// Crowd regions are ignore zones during matching.
    pub iscrowd: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: u64,
    pub width: u32,
    pub height: u32,
    pub ground_truth: Vec<GroundTruthBox>,
}

impl ImageRecord {
    pub fn new(image_id: u64, width: u32, height: u32, ground_truth: Vec<GroundTruthBox>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig(format!(
                "image {image_id}: width and height must be positive"
            )));
        }
        Ok(Self {
            image_id,
            width,
            height,
            ground_truth,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PassKind {
    /// Whole model at a square input side of this many pixels.
    Resolution(u32),
    /// Intermediate head attached at a backbone layer.
    EarlyHead { tap_layer: u32 },
    Full,
}

impl fmt::Display for PassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PassKind::Resolution(side) => write!(f, "resolution {side}"),
            PassKind::EarlyHead { tap_layer } => write!(f, "early-head (tap layer {tap_layer})"),
            PassKind::Full => write!(f, "full"),
        }
    }
}

/// The horizontally flipped companion run of a pass.
#[derive(Debug, Clone, PartialEq)]
pub struct FlipPass {
    pub latency_ms: f64,
    /// In flipped-image coordinates.
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassRecord {
    pub kind: PassKind,
    pub latency_ms: f64,
    pub detections: Vec<Detection>,
    pub flip: Option<FlipPass>,
    /// Unknown fields carried through from the trace file.
    pub extra: Map<String, Value>,
}

impl PassRecord {
    pub fn new(kind: PassKind, latency_ms: f64, detections: Vec<Detection>) -> Self {
        Self {
            kind,
            latency_ms,
            detections,
            flip: None,
            extra: Map::new(),
        }
    }

    pub fn with_flip(mut self, latency_ms: f64, detections: Vec<Detection>) -> Self {
        self.flip = Some(FlipPass {
            latency_ms,
            detections,
        });
        self
    }
}

/// Everything recorded for one image; the replayable unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTrace {
    pub image_id: u64,
    pub passes: Vec<PassRecord>,
    pub extra: Map<String, Value>,
}

impl ImageTrace {
    pub fn new(image_id: u64, passes: Vec<PassRecord>) -> Self {
        Self {
            image_id,
            passes,
            extra: Map::new(),
        }
    }

    pub fn pass(&self, kind: PassKind) -> Option<&PassRecord> {
        self.passes.iter().find(|p| p.kind == kind)
    }

    pub fn resolution(&self, side: u32) -> Option<&PassRecord> {
        self.pass(PassKind::Resolution(side))
    }

    pub fn early_head(&self) -> Option<&PassRecord> {
        self.passes
            .iter()
            .find(|p| matches!(p.kind, PassKind::EarlyHead { .. }))
    }

    pub fn full(&self) -> Option<&PassRecord> {
        self.pass(PassKind::Full)
    }
}

/// Confidence cutoff for the exit/escalation gate.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct GateThreshold(f64);

impl GateThreshold {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidThreshold(value));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for GateThreshold {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<GateThreshold> for f64 {
    fn from(t: GateThreshold) -> f64 {
        t.0
    }
}

impl fmt::Display for GateThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub image_id: u64,
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "image {}: {}: {}", self.image_id, self.field, self.message)
    }
}

fn check_latency(out: &mut Vec<Violation>, image_id: u64, field: &str, value: f64) {
    if !(value.is_finite() && value >= 0.0) {
        out.push(Violation {
            image_id,
            field: field.to_string(),
            message: format!("must be a finite non-negative duration, got {value}"),
        });
    }
}

/// Checks every trace against the type invariants and the dataset.
///
/// Violations are returned as data; an empty list means the set is clean.
pub fn validate_trace_set(traces: &[ImageTrace], dataset: &[ImageRecord]) -> Vec<Violation> {
    let known: HashSet<u64> = dataset.iter().map(|r| r.image_id).collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();

    for trace in traces {
        let id = trace.image_id;
        if !seen.insert(id) {
            out.push(Violation {
                image_id: id,
                field: "image_id".into(),
                message: "duplicate trace".into(),
            });
        }
        if !known.contains(&id) {
            out.push(Violation {
                image_id: id,
                field: "image_id".into(),
                message: "orphan trace: image not in dataset".into(),
            });
        }
        let mut kinds = BTreeSet::new();
        for pass in &trace.passes {
            if !kinds.insert(pass.kind) {
                out.push(Violation {
                    image_id: id,
                    field: "passes".into(),
                    message: format!("more than one {} pass", pass.kind),
                });
            }
            check_latency(&mut out, id, &format!("{}.latency_ms", pass.kind), pass.latency_ms);
            if let Some(flip) = &pass.flip {
                check_latency(&mut out, id, &format!("{}.flip_latency_ms", pass.kind), flip.latency_ms);
            }
        }
    }
    out
}

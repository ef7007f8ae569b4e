//! Line-delimited trace files.
//!
//! Line 1 is a header object; every following non-blank line is one image:
//!
//! ```text
//! {"format_version":1,"resolutions":[160,640],"capture_meta":{...}}
//! {"image_id":1,"passes":[{"kind":"resolution","resolution":160,"latency_ms":5.1,"detections":[...]}, ...]}
//! ```
//!
//! Pass kinds are `resolution`, `early_head` and `full`. Unknown fields on the
//! header, image and pass objects are kept and written back out.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Lines};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::model::{BBox, Detection, DetectionRepr, FlipPass, ImageTrace, PassKind, PassRecord};

pub const TRACE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format_version: u32,
    pub resolutions: Vec<u32>,
    #[serde(default)]
    pub capture_meta: Map<String, Value>,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl TraceHeader {
    pub fn new(resolutions: Vec<u32>) -> Self {
        Self {
            format_version: TRACE_FORMAT_VERSION,
            resolutions,
            capture_meta: Map::new(),
            extra: Map::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    pub header: TraceHeader,
    pub traces: Vec<ImageTrace>,
    /// Detection scores that had to be clamped into [0, 1] while parsing.
    pub clamped_scores: usize,
}

#[derive(Serialize, Deserialize)]
struct RawTrace {
    image_id: u64,
    passes: Vec<RawPass>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct RawPass {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    resolution: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tap_layer: Option<u32>,
    latency_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    flip_latency_ms: Option<f64>,
    #[serde(default)]
    detections: Vec<DetectionRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    flip_detections: Option<Vec<DetectionRepr>>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn convert_dets(raw: Vec<DetectionRepr>, line: usize, clamped: &mut usize) -> Result<Vec<Detection>> {
    raw.into_iter()
        .map(|r| {
            let bbox = BBox::new(r.x, r.y, r.w, r.h).map_err(|e| parse_err(line, e.to_string()))?;
            let (det, changed) =
                Detection::new_clamped(bbox, r.score, r.category_id).map_err(|e| parse_err(line, e.to_string()))?;
            *clamped += usize::from(changed);
            Ok(det)
        })
        .collect()
}

fn convert_pass(raw: RawPass, line: usize, header: &TraceHeader, clamped: &mut usize) -> Result<PassRecord> {
    let kind = match raw.kind.as_str() {
        "resolution" => {
            let side = raw
                .resolution
                .ok_or_else(|| parse_err(line, "resolution pass without \"resolution\""))?;
            if !header.resolutions.contains(&side) {
                return Err(parse_err(line, format!("resolution {side} is not declared in the header")));
            }
            PassKind::Resolution(side)
        }
        "early_head" => PassKind::EarlyHead {
            tap_layer: raw
                .tap_layer
                .ok_or_else(|| parse_err(line, "early_head pass without \"tap_layer\""))?,
        },
        "full" => PassKind::Full,
        other => return Err(parse_err(line, format!("unknown pass kind \"{other}\""))),
    };
    let flip = match (raw.flip_latency_ms, raw.flip_detections) {
        (Some(latency_ms), Some(dets)) => Some(FlipPass {
            latency_ms,
            detections: convert_dets(dets, line, clamped)?,
        }),
        (None, None) => None,
        _ => {
            return Err(parse_err(
                line,
                "flip_latency_ms and flip_detections must appear together",
            ))
        }
    };
    Ok(PassRecord {
        kind,
        latency_ms: raw.latency_ms,
        detections: convert_dets(raw.detections, line, clamped)?,
        flip,
        extra: raw.extra,
    })
}

/// Streams image traces from a reader, one line at a time.
pub struct TraceReader<R> {
    lines: Lines<R>,
    line_no: usize,
    header: TraceHeader,
    clamped_scores: usize,
}

impl<R: BufRead> TraceReader<R> {
    pub fn new(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let first = lines.next().ok_or_else(|| parse_err(1, "missing header line"))??;
        let header: TraceHeader = serde_json::from_str(&first).map_err(|e| parse_err(1, format!("header: {e}")))?;
        if header.format_version != TRACE_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: header.format_version,
                supported: TRACE_FORMAT_VERSION,
            });
        }
        Ok(Self {
            lines,
            line_no: 1,
            header,
            clamped_scores: 0,
        })
    }

    pub fn header(&self) -> &TraceHeader {
        &self.header
    }

    pub fn clamped_scores(&self) -> usize {
        self.clamped_scores
    }

    fn parse_line(&mut self, text: &str) -> Result<ImageTrace> {
        let line = self.line_no;
        let raw: RawTrace = serde_json::from_str(text).map_err(|e| parse_err(line, e.to_string()))?;
        let passes = raw
            .passes
            .into_iter()
            .map(|p| convert_pass(p, line, &self.header, &mut self.clamped_scores))
            .collect::<Result<Vec<_>>>()?;
        Ok(ImageTrace {
            image_id: raw.image_id,
            passes,
            extra: raw.extra,
        })
    }
}

impl<R: BufRead> Iterator for TraceReader<R> {
    type Item = Result<ImageTrace>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let text = match self.lines.next()? {
                Ok(t) => t,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if !text.trim().is_empty() {
                return Some(self.parse_line(&text));
            }
        }
    }
}

fn collect<R: BufRead>(reader: R) -> Result<TraceFile> {
    let mut rd = TraceReader::new(reader)?;
    let mut seen = HashSet::new();
    let mut traces = Vec::new();
    for trace in rd.by_ref() {
        let trace = trace?;
        if !seen.insert(trace.image_id) {
            return Err(Error::DuplicateImage(trace.image_id));
        }
        traces.push(trace);
    }
    Ok(TraceFile {
        header: rd.header,
        traces,
        clamped_scores: rd.clamped_scores,
    })
}

pub fn parse_traces(path: impl AsRef<Path>) -> Result<TraceFile> {
    collect(BufReader::new(File::open(path)?))
}

pub fn parse_traces_str(text: &str) -> Result<TraceFile> {
    collect(text.as_bytes())
}

fn raw_dets(dets: &[Detection]) -> Vec<DetectionRepr> {
    dets.iter().map(|&d| d.into()).collect()
}

fn raw_pass(p: &PassRecord) -> RawPass {
    let (kind, resolution, tap_layer) = match p.kind {
        PassKind::Resolution(side) => ("resolution", Some(side), None),
        PassKind::EarlyHead { tap_layer } => ("early_head", None, Some(tap_layer)),
        PassKind::Full => ("full", None, None),
    };
    RawPass {
        kind: kind.to_string(),
        resolution,
        tap_layer,
        latency_ms: p.latency_ms,
        flip_latency_ms: p.flip.as_ref().map(|f| f.latency_ms),
        detections: raw_dets(&p.detections),
        flip_detections: p.flip.as_ref().map(|f| raw_dets(&f.detections)),
        extra: p.extra.clone(),
    }
}

/// Serialises a trace file. Deterministic for equal input.
pub fn emit_traces(file: &TraceFile) -> Result<String> {
    let mut out = serde_json::to_string(&file.header)?;
    out.push('\n');
    for t in &file.traces {
        let raw = RawTrace {
            image_id: t.image_id,
            passes: t.passes.iter().map(raw_pass).collect(),
            extra: t.extra.clone(),
        };
        out.push_str(&serde_json::to_string(&raw)?);
        out.push('\n');
    }
    Ok(out)
}

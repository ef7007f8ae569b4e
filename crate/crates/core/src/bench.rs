//! Throughput accounting, speedup and mAP-loss comparison, and the
//! resolution-scaling bottleneck diagnostic.
//!
//! Throughput only counts charged model-pass latency; evaluation, parsing and
//! I/O are not part of it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ImageTrace;
use crate::router::{RouteOutcome, RoutingStats};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThroughputModel {
    pub total_images: usize,
    pub total_charged_ms: f64,
    /// Images per second.
    pub its: f64,
}

impl ThroughputModel {
    pub fn from_totals(total_images: usize, total_charged_ms: f64) -> Result<Self> {
        if total_images == 0 {
            return Err(Error::EmptyInput("throughput"));
        }
        if !(total_charged_ms > 0.0) {
            return Err(Error::DegenerateZeroTime);
        }
        Ok(Self {
            total_images,
            total_charged_ms,
            its: total_images as f64 / (total_charged_ms / 1000.0),
        })
    }

    /// Pools two measurements as if their outcomes had been concatenated.
    pub fn combine(&self, other: &Self) -> Result<Self> {
        Self::from_totals(
            self.total_images + other.total_images,
            self.total_charged_ms + other.total_charged_ms,
        )
    }
}

pub fn throughput(outcomes: &[RouteOutcome]) -> Result<ThroughputModel> {
    let total: f64 = outcomes.iter().map(|o| o.charged_latency_ms).sum();
    ThroughputModel::from_totals(outcomes.len(), total)
}

/// One row of the benchmark: a routing policy at its chosen threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub label: String,
    pub its: f64,
    pub map_50_95: f64,
    pub routing: RoutingStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub baseline: Option<ModeSummary>,
    pub adaptive: Option<ModeSummary>,
    /// adaptive it/s over baseline it/s; present only when both rows exist.
    pub speedup: Option<f64>,
    /// Relative mAP change of adaptive against baseline, in percent.
    pub map_loss_pct: Option<f64>,
}

impl BenchReport {
    /// A report with whichever rows are available; no comparison columns.
    pub fn single(baseline: Option<ModeSummary>, adaptive: Option<ModeSummary>) -> Self {
        Self {
            baseline,
            adaptive,
            speedup: None,
            map_loss_pct: None,
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = &ModeSummary> {
        self.baseline.iter().chain(self.adaptive.iter())
    }
}

pub fn compare(adaptive: ModeSummary, baseline: ModeSummary) -> Result<BenchReport> {
    if !(baseline.its > 0.0) {
        return Err(Error::ZeroBaseline("throughput"));
    }
    if !(baseline.map_50_95 > 0.0) {
        return Err(Error::ZeroBaseline("mAP"));
    }
    let speedup = adaptive.its / baseline.its;
    let map_loss_pct = (adaptive.map_50_95 - baseline.map_50_95) / baseline.map_50_95 * 100.0;
    Ok(BenchReport {
        baseline: Some(baseline),
        adaptive: Some(adaptive),
        speedup: Some(speedup),
        map_loss_pct: Some(map_loss_pct),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    ComputeBoundLikely,
    SystemBoundLikely,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::ComputeBoundLikely => "ComputeBoundLikely",
            Verdict::SystemBoundLikely => "SystemBoundLikely",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BottleneckResult {
    pub res_high: u32,
    pub res_low: u32,
    pub fps_high: f64,
    pub fps_low: f64,
    pub pixel_ratio: f64,
    pub fps_ratio: f64,
    pub verdict: Verdict,
}

pub const DEFAULT_BOUND_FACTOR: f64 = 0.25;

/// System-bound when the FPS gain falls short of `bound_factor` times the pixel reduction.
pub fn verdict(fps_ratio: f64, pixel_ratio: f64, bound_factor: f64) -> Verdict {
    if fps_ratio < bound_factor * pixel_ratio {
        Verdict::SystemBoundLikely
    } else {
        Verdict::ComputeBoundLikely
    }
}

impl BottleneckResult {
    pub fn from_fps(res_high: u32, res_low: u32, fps_high: f64, fps_low: f64, bound_factor: f64) -> Result<Self> {
        if res_low == 0 || res_high == 0 {
            return Err(Error::InvalidConfig("resolutions must be positive".into()));
        }
        if !(fps_high > 0.0 && fps_low > 0.0) {
            return Err(Error::DegenerateZeroTime);
        }
        let side = f64::from(res_high) / f64::from(res_low);
        let pixel_ratio = side * side;
        let fps_ratio = fps_low / fps_high;
        Ok(Self {
            res_high,
            res_low,
            fps_high,
            fps_low,
            pixel_ratio,
            fps_ratio,
            verdict: verdict(fps_ratio, pixel_ratio, bound_factor),
        })
    }
}

fn fps_at(traces: &[ImageTrace], side: u32) -> Result<f64> {
    let mut total = 0.0;
    for t in traces {
        let pass = t.resolution(side).ok_or_else(|| Error::MissingPass {
            image_id: t.image_id,
            pass: format!("resolution {side}"),
        })?;
        total += pass.latency_ms;
    }
    Ok(ThroughputModel::from_totals(traces.len(), total)?.its)
}

/// Compares recorded throughput at two input resolutions.
pub fn bottleneck_test(traces: &[ImageTrace], res_high: u32, res_low: u32, bound_factor: f64) -> Result<BottleneckResult> {
    if traces.is_empty() {
        return Err(Error::EmptyTraceSet);
    }
    let fps_high = fps_at(traces, res_high)?;
    let fps_low = fps_at(traces, res_low)?;
    BottleneckResult::from_fps(res_high, res_low, fps_high, fps_low, bound_factor)
}

//! Confidence-gated routing over recorded traces.
//!
//! Both policies reduce to the same decision: compute a gate confidence from a
//! cheap pass, accept the cheap result when the confidence is at least the
//! threshold, otherwise pay for the expensive pass. Routes are prepared once
//! per trace ([`prepare_routes`]) so that threshold sweeps only re-run the
//! comparison.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{tta_merge, NmsConfig};
use crate::model::{Detection, GateThreshold, ImageRecord, ImageTrace, PassKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Low-resolution pass, escalating to high resolution.
    Adaptive,
    /// Early head with flip TTA, continuing to the full model.
    EarlyExit,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Adaptive => "adaptive",
            Mode::EarlyExit => "early_exit",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutePath {
    FirstPassAccepted,
    Escalated,
    EarlyExited,
    FullModel,
}

impl RoutePath {
    pub fn is_cheap(self) -> bool {
        matches!(self, RoutePath::FirstPassAccepted | RoutePath::EarlyExited)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteOutcome {
    pub image_id: u64,
    pub path: RoutePath,
    pub gate_confidence: f64,
    pub charged_latency_ms: f64,
    pub final_detections: Vec<Detection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoutingStats {
    pub total: usize,
    pub cheap_path_rate: f64,
    pub escalated_rate: f64,
    pub threshold: GateThreshold,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteConfig {
    pub low_res: u32,
    pub high_res: u32,
    pub nms: NmsConfig,
    /// Added to the full-model latency when the early-exit gate continues.
    pub head_overhead_ms: f64,
}

impl Default for RouteConfig {
    fn default() -> Self {
        Self {
            low_res: 160,
            high_res: 640,
            nms: NmsConfig::default(),
            head_overhead_ms: 0.0,
        }
    }
}

/// Highest score in `dets`, or 0 for an empty list.
pub fn gate_confidence(dets: &[Detection]) -> f64 {
    dets.iter().map(Detection::score).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub latency_ms: f64,
    pub detections: Vec<Detection>,
}

/// Both possible outcomes of one image, computed before any threshold is chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedRoute {
    pub image_id: u64,
    pub mode: Mode,
    pub confidence: f64,
    pub cheap: Branch,
    /// Total cost when the gate rejects, including the cheap pass where it has to run first.
    pub expensive: Branch,
}

impl PreparedRoute {
    pub fn decide(&self, t: GateThreshold) -> RouteOutcome {
        let accept = self.confidence >= t.value();
        let (path, branch) = match (self.mode, accept) {
            (Mode::Adaptive, true) => (RoutePath::FirstPassAccepted, &self.cheap),
            (Mode::Adaptive, false) => (RoutePath::Escalated, &self.expensive),
            (Mode::EarlyExit, true) => (RoutePath::EarlyExited, &self.cheap),
            (Mode::EarlyExit, false) => (RoutePath::FullModel, &self.expensive),
        };
        RouteOutcome {
            image_id: self.image_id,
            path,
            gate_confidence: self.confidence,
            charged_latency_ms: branch.latency_ms,
            final_detections: branch.detections.clone(),
        }
    }
}

fn missing(trace: &ImageTrace, pass: impl fmt::Display) -> Error {
    Error::MissingPass {
        image_id: trace.image_id,
        pass: pass.to_string(),
    }
}

pub fn prepare_two_pass(trace: &ImageTrace, cfg: &RouteConfig) -> Result<PreparedRoute> {
    let low = trace
        .resolution(cfg.low_res)
        .ok_or_else(|| missing(trace, PassKind::Resolution(cfg.low_res)))?;
    let high = trace
        .resolution(cfg.high_res)
        .ok_or_else(|| missing(trace, PassKind::Resolution(cfg.high_res)))?;
    let low_dets = cfg.nms.filter_scores(&low.detections);
    Ok(PreparedRoute {
        image_id: trace.image_id,
        mode: Mode::Adaptive,
        confidence: gate_confidence(&low_dets),
        cheap: Branch {
            latency_ms: low.latency_ms,
            detections: low_dets,
        },
        expensive: Branch {
            latency_ms: low.latency_ms + high.latency_ms,
            detections: cfg.nms.filter_scores(&high.detections),
        },
    })
}

pub fn prepare_early_exit(trace: &ImageTrace, image_width: f64, cfg: &RouteConfig) -> Result<PreparedRoute> {
    let early = trace.early_head().ok_or_else(|| missing(trace, "early-head"))?;
    let full = trace.full().ok_or_else(|| missing(trace, PassKind::Full))?;
    let flip = early.flip.as_ref().ok_or(Error::MissingFlip {
        image_id: trace.image_id,
    })?;
    let merged = tta_merge(&early.detections, &flip.detections, image_width, &cfg.nms);
    Ok(PreparedRoute {
        image_id: trace.image_id,
        mode: Mode::EarlyExit,
        confidence: gate_confidence(&merged),
        cheap: Branch {
            latency_ms: early.latency_ms + flip.latency_ms,
            detections: merged,
        },
        expensive: Branch {
            latency_ms: full.latency_ms + cfg.head_overhead_ms,
            detections: cfg.nms.filter_scores(&full.detections),
        },
    })
}

/// Two-pass adaptive routing of one image.
pub fn route_two_pass(trace: &ImageTrace, t: GateThreshold, cfg: &RouteConfig) -> Result<RouteOutcome> {
    Ok(prepare_two_pass(trace, cfg)?.decide(t))
}

/// Early-exit routing of one image. `image_width` is needed to un-flip the TTA pass.
pub fn route_early_exit(
    trace: &ImageTrace,
    image_width: f64,
    t: GateThreshold,
    cfg: &RouteConfig,
) -> Result<RouteOutcome> {
    Ok(prepare_early_exit(trace, image_width, cfg)?.decide(t))
}

/// Prepares every trace for `mode`, in input order.
///
/// Early-exit mode looks image widths up in `dataset`; adaptive mode does not
/// touch it.
pub fn prepare_routes(
    traces: &[ImageTrace],
    dataset: &[ImageRecord],
    mode: Mode,
    cfg: &RouteConfig,
) -> Result<Vec<PreparedRoute>> {
    if traces.is_empty() {
        return Err(Error::EmptyTraceSet);
    }
    match mode {
        Mode::Adaptive => traces.iter().map(|t| prepare_two_pass(t, cfg)).collect(),
        Mode::EarlyExit => {
            let widths: HashMap<u64, u32> = dataset.iter().map(|r| (r.image_id, r.width)).collect();
            traces
                .iter()
                .map(|t| {
                    let w = widths.get(&t.image_id).ok_or(Error::UnknownImage(t.image_id))?;
                    prepare_early_exit(t, f64::from(*w), cfg)
                })
                .collect()
        }
    }
}

/// Applies one threshold to prepared routes.
pub fn apply_threshold(routes: &[PreparedRoute], t: GateThreshold) -> Result<(Vec<RouteOutcome>, RoutingStats)> {
    if routes.is_empty() {
        return Err(Error::EmptyTraceSet);
    }
    let outcomes: Vec<RouteOutcome> = routes.iter().map(|r| r.decide(t)).collect();
    Ok((outcomes, stats_for(routes, t)))
}

/// Routing rates without materialising outcomes.
pub fn stats_for(routes: &[PreparedRoute], t: GateThreshold) -> RoutingStats {
    let total = routes.len();
    let cheap = routes.iter().filter(|r| r.confidence >= t.value()).count();
    RoutingStats {
        total,
        cheap_path_rate: cheap as f64 / total as f64,
        escalated_rate: (total - cheap) as f64 / total as f64,
        threshold: t,
    }
}

/// Routes every trace and aggregates the rates.
pub fn route_all(
    traces: &[ImageTrace],
    dataset: &[ImageRecord],
    mode: Mode,
    t: GateThreshold,
    cfg: &RouteConfig,
) -> Result<(Vec<RouteOutcome>, RoutingStats)> {
    apply_threshold(&prepare_routes(traces, dataset, mode, cfg)?, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{hflip_detection, nms};
    use crate::model::{BBox, PassRecord};
    use proptest::prelude::*;

    fn det(x: f64, score: f64) -> Detection {
        Detection::new(BBox::new(x, 5.0, 10.0, 10.0).unwrap(), score, 0).unwrap()
    }

    fn th(v: f64) -> GateThreshold {
        GateThreshold::new(v).unwrap()
    }

    fn two_pass_trace(id: u64, low_scores: &[f64], t_low: f64, t_high: f64) -> ImageTrace {
        let low = low_scores.iter().enumerate().map(|(i, &s)| det(20.0 * i as f64, s)).collect();
        ImageTrace::new(
            id,
            vec![
                PassRecord::new(PassKind::Resolution(160), t_low, low),
                PassRecord::new(PassKind::Resolution(640), t_high, vec![det(0.0, 0.97)]),
            ],
        )
    }

    fn ee_trace(id: u64, early: &[f64], flip: &[f64]) -> ImageTrace {
        let early = early.iter().enumerate().map(|(i, &s)| det(20.0 * i as f64, s)).collect();
        let flip = flip.iter().enumerate().map(|(i, &s)| det(50.0 + 20.0 * i as f64, s)).collect();
        ImageTrace::new(
            id,
            vec![
                PassRecord::new(PassKind::EarlyHead { tap_layer: 16 }, 6.0, early).with_flip(5.0, flip),
                PassRecord::new(PassKind::Full, 30.0, vec![det(0.0, 0.9)]),
            ],
        )
    }

    #[test]
    fn gate_examples() {
        assert_eq!(gate_confidence(&[det(0.0, 0.2), det(0.0, 0.91), det(0.0, 0.5)]), 0.91);
        assert_eq!(gate_confidence(&[]), 0.0);
        assert_eq!(gate_confidence(&[det(0.0, 0.859)]), 0.859);
    }

    #[test]
    fn two_pass_accepts_confident_first_pass() {
        let cfg = RouteConfig::default();
        let o = route_two_pass(&two_pass_trace(1, &[0.95, 0.2], 10.0, 40.0), th(0.859), &cfg).unwrap();
        assert_eq!(o.path, RoutePath::FirstPassAccepted);
        assert_eq!(o.charged_latency_ms, 10.0);
        assert_eq!(o.final_detections.len(), 2);
    }

    #[test]
    fn two_pass_escalates_low_confidence() {
        let cfg = RouteConfig::default();
        let o = route_two_pass(&two_pass_trace(1, &[0.30], 10.0, 40.0), th(0.859), &cfg).unwrap();
        assert_eq!(o.path, RoutePath::Escalated);
        assert_eq!(o.charged_latency_ms, 50.0);
        assert_eq!(o.final_detections[0].score(), 0.97);
    }

    #[test]
    fn zero_threshold_accepts_nonempty_and_ties_accept() {
        let cfg = RouteConfig::default();
        let o = route_two_pass(&two_pass_trace(1, &[0.01], 10.0, 40.0), th(0.0), &cfg).unwrap();
        assert_eq!(o.path, RoutePath::FirstPassAccepted);
        let o = route_two_pass(&two_pass_trace(1, &[0.5], 10.0, 40.0), th(0.5), &cfg).unwrap();
        assert_eq!(o.path, RoutePath::FirstPassAccepted);
    }

    #[test]
    fn empty_first_pass_escalates() {
        let cfg = RouteConfig::default();
        let o = route_two_pass(&two_pass_trace(1, &[], 10.0, 40.0), th(0.1), &cfg).unwrap();
        assert_eq!(o.path, RoutePath::Escalated);
        assert_eq!(o.gate_confidence, 0.0);
    }

    #[test]
    fn gate_ignores_sub_threshold_scores() {
        let cfg = RouteConfig::default();
        let o = route_two_pass(&two_pass_trace(1, &[0.0005], 10.0, 40.0), th(0.0), &cfg).unwrap();
        assert_eq!(o.gate_confidence, 0.0);
        assert!(o.final_detections.is_empty());
    }

    #[test]
    fn missing_resolution_is_named() {
        let mut t = two_pass_trace(7, &[0.5], 10.0, 40.0);
        t.passes.remove(1);
        let err = route_two_pass(&t, th(0.5), &RouteConfig::default()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("640") && msg.contains('7'), "{msg}");
    }

    #[test]
    fn early_exit_examples() {
        let cfg = RouteConfig::default();
        let o = route_early_exit(&ee_trace(1, &[0.60], &[0.3]), 200.0, th(0.491), &cfg).unwrap();
        assert_eq!(o.path, RoutePath::EarlyExited);
        assert_eq!(o.charged_latency_ms, 11.0);
        assert_eq!(o.final_detections.len(), 2);

        let o = route_early_exit(&ee_trace(1, &[0.10], &[0.05]), 200.0, th(0.491), &cfg).unwrap();
        assert_eq!(o.path, RoutePath::FullModel);
        assert_eq!(o.charged_latency_ms, 30.0);

        let o = route_early_exit(&ee_trace(1, &[0.99], &[0.98]), 200.0, th(1.0), &cfg).unwrap();
        assert_eq!(o.path, RoutePath::FullModel);
    }

    #[test]
    fn early_exit_charges_head_overhead() {
        let cfg = RouteConfig {
            head_overhead_ms: 2.5,
            ..RouteConfig::default()
        };
        let o = route_early_exit(&ee_trace(1, &[0.1], &[]), 200.0, th(0.5), &cfg).unwrap();
        assert_eq!(o.charged_latency_ms, 32.5);
    }

    #[test]
    fn flip_confidence_can_open_the_gate() {
        let cfg = RouteConfig::default();
        let o = route_early_exit(&ee_trace(1, &[0.2], &[0.7]), 200.0, th(0.5), &cfg).unwrap();
        assert_eq!(o.path, RoutePath::EarlyExited);
        assert_eq!(o.gate_confidence, 0.7);
    }

    #[test]
    fn early_exit_requires_flip_and_passes() {
        let cfg = RouteConfig::default();
        let mut t = ee_trace(3, &[0.5], &[]);
        t.passes[0].flip = None;
        assert!(matches!(
            route_early_exit(&t, 100.0, th(0.5), &cfg),
            Err(Error::MissingFlip { image_id: 3 })
        ));
        let mut t = ee_trace(3, &[0.5], &[]);
        t.passes.remove(1);
        assert!(matches!(route_early_exit(&t, 100.0, th(0.5), &cfg), Err(Error::MissingPass { .. })));
    }

    #[test]
    fn early_exit_final_detections_are_nms_output() {
        let cfg = RouteConfig::default();
        let base = vec![det(10.0, 0.8), det(11.0, 0.6), det(60.0, 0.4)];
        let flipped: Vec<_> = base.iter().map(|d| hflip_detection(d, 200.0)).collect();
        let t = ImageTrace::new(
            1,
            vec![
                PassRecord::new(PassKind::EarlyHead { tap_layer: 16 }, 6.0, base.clone()).with_flip(5.0, flipped),
                PassRecord::new(PassKind::Full, 30.0, vec![]),
            ],
        );
        let o = route_early_exit(&t, 200.0, th(0.5), &cfg).unwrap();
        assert_eq!(o.final_detections, nms(&base, &cfg.nms));
    }

    #[test]
    fn route_all_stats() {
        assert!(matches!(
            route_all(&[], &[], Mode::Adaptive, th(0.5), &RouteConfig::default()),
            Err(Error::EmptyTraceSet)
        ));
        // 1405 confident + 3595 unsure
        let traces: Vec<_> = (0..5000u64)
            .map(|i| two_pass_trace(i, &[if i < 1405 { 0.95 } else { 0.40 }], 10.0, 40.0))
            .collect();
        let (outcomes, stats) = route_all(&traces, &[], Mode::Adaptive, th(0.859), &RouteConfig::default()).unwrap();
        assert_eq!(outcomes.len(), 5000);
        assert_eq!(stats.cheap_path_rate, 0.281);
        assert_eq!(stats.escalated_rate, 0.719);
        assert!((stats.cheap_path_rate + stats.escalated_rate - 1.0).abs() < 1e-12);

        let all_sure: Vec<_> = (0..10u64).map(|i| two_pass_trace(i, &[1.0], 1.0, 2.0)).collect();
        let (_, stats) = route_all(&all_sure, &[], Mode::Adaptive, th(1.0), &RouteConfig::default()).unwrap();
        assert_eq!(stats.cheap_path_rate, 1.0);
    }

    #[test]
    fn early_exit_needs_known_widths() {
        let traces = vec![ee_trace(9, &[0.5], &[])];
        let err = route_all(&traces, &[], Mode::EarlyExit, th(0.5), &RouteConfig::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownImage(9)));
    }

    proptest! {
        #[test]
        fn escalation_monotone_in_threshold(
            confs in prop::collection::vec(0.0..1.0f64, 1..60),
            mut ts in prop::collection::vec(0.0..=1.0f64, 2..40),
        ) {
            let traces: Vec<_> = confs.iter().enumerate().map(|(i, &c)| two_pass_trace(i as u64, &[c], 3.0, 9.0)).collect();
            let routes = prepare_routes(&traces, &[], Mode::Adaptive, &RouteConfig::default()).unwrap();
            ts.sort_by(f64::total_cmp);
            let rates: Vec<_> = ts.iter().map(|&t| stats_for(&routes, th(t)).escalated_rate).collect();
            prop_assert!(rates.windows(2).all(|w| w[0] <= w[1]));
        }

        #[test]
        fn escalated_cost_is_counterfactual_plus_high(c in 0.0..1.0f64, lo in 0.0..50.0f64, hi in 0.0..80.0f64) {
            let trace = two_pass_trace(1, &[c], lo, hi);
            let cfg = RouteConfig::default();
            let cheap = route_two_pass(&trace, th(0.0), &cfg).unwrap();
            let esc = route_two_pass(&trace, th(1.0), &cfg).unwrap();
            prop_assume!(esc.path == RoutePath::Escalated);
            prop_assert_eq!(esc.charged_latency_ms, cheap.charged_latency_ms + hi);
        }

        #[test]
        fn stats_ignore_trace_order(confs in prop::collection::vec(0.0..1.0f64, 1..40), t in 0.0..1.0f64) {
            let traces: Vec<_> = confs.iter().enumerate().map(|(i, &c)| two_pass_trace(i as u64, &[c], 3.0, 9.0)).collect();
            let mut reversed = traces.clone();
            reversed.reverse();
            let cfg = RouteConfig::default();
            let (_, a) = route_all(&traces, &[], Mode::Adaptive, th(t), &cfg).unwrap();
            let (_, b) = route_all(&reversed, &[], Mode::Adaptive, th(t), &cfg).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}

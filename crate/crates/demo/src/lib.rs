//! Browser demo: a synthetic trace set generated in the page, a threshold
//! sweep with its plot, per-threshold routing, and the bottleneck check.
//!
//! The logic lives in [`DemoState`] and [`bottleneck_json`], which return JSON
//! strings and plain `String` errors so they can be tested natively. The
//! `wasm_bindgen` wrappers below only convert errors.

use std::collections::BTreeMap;

use gatebench::backends::{generate_synthetic, SyntheticConfig};
use gatebench::bench::{throughput, BottleneckResult, DEFAULT_BOUND_FACTOR};
use gatebench::calibrate::{default_grid, sweep, tune_adaptive, tune_early_exit, TuningResult, DEFAULT_MIN_EXIT_RATE};
use gatebench::cocoeval::{evaluate, EvalConfig};
use gatebench::model::{GateThreshold, ImageRecord, ImageTrace};
use gatebench::report::{emit_sweep_plot, Axes};
use gatebench::router::{apply_threshold, prepare_routes, Mode, PreparedRoute, RouteConfig};
use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn parse_mode(mode: &str) -> Result<Mode, String> {
    match mode {
        "adaptive" => Ok(Mode::Adaptive),
        "early_exit" | "early-exit" => Ok(Mode::EarlyExit),
        other => Err(format!("unknown mode {other:?}; expected \"adaptive\" or \"early_exit\"")),
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

pub struct DemoState {
    dataset: Vec<ImageRecord>,
    traces: Vec<ImageTrace>,
    routes: BTreeMap<Mode, Vec<PreparedRoute>>,
    route_cfg: RouteConfig,
    eval_cfg: EvalConfig,
}

impl DemoState {
    pub fn new(num_images: usize, seed: u64) -> Result<Self, String> {
        let cfg = SyntheticConfig {
            num_images,
            rng_seed: seed,
            ..SyntheticConfig::default()
        };
        let (dataset, file) = generate_synthetic(&cfg).map_err(|e| e.to_string())?;
        let route_cfg = RouteConfig::default();
        let mut routes = BTreeMap::new();
        for mode in [Mode::Adaptive, Mode::EarlyExit] {
            let r = prepare_routes(&file.traces, &dataset, mode, &route_cfg).map_err(|e| e.to_string())?;
            routes.insert(mode, r);
        }
        Ok(Self {
            dataset,
            traces: file.traces,
            routes,
            route_cfg,
            eval_cfg: EvalConfig::default(),
        })
    }

    pub fn num_images(&self) -> usize {
        self.dataset.len()
    }

    /// Full grid sweep plus the tuned operating point and both plots.
    ///
    /// Early exit uses the default minimum exit rate. Adaptive uses
    /// `max_map_loss` relative to sending every image to high resolution.
    pub fn sweep_json(&self, mode: &str, max_map_loss: f64) -> Result<String, String> {
        let mode = parse_mode(mode)?;
        let points = sweep(&self.traces, &self.dataset, mode, &default_grid(), &self.route_cfg, &self.eval_cfg)
            .map_err(|e| e.to_string())?;
        let tuned: TuningResult = match mode {
            Mode::EarlyExit => tune_early_exit(&points, DEFAULT_MIN_EXIT_RATE),
            Mode::Adaptive => {
                let baseline = points.last().map(|p| p.map_50_95).unwrap_or(0.0);
                tune_adaptive(&points, baseline, max_map_loss)
            }
        }
        .map_err(|e| e.to_string())?;
        let t = tuned.threshold.value();
        let rate_plot = emit_sweep_plot(&points, Axes::MapVsRate, Some(t)).map_err(|e| e.to_string())?;
        let threshold_plot = emit_sweep_plot(&points, Axes::MapVsThreshold, Some(t)).map_err(|e| e.to_string())?;
        to_json(&json!({
            "mode": mode.as_str(),
            "points": points,
            "selected": tuned.selected(),
            "constraint_satisfied": tuned.constraint_satisfied,
            "plot_map_vs_rate": rate_plot,
            "plot_map_vs_threshold": threshold_plot,
        }))
    }

    /// Routing rates, throughput and mAP at one threshold.
    pub fn route_json(&self, mode: &str, threshold: f64) -> Result<String, String> {
        let mode = parse_mode(mode)?;
        let t = GateThreshold::new(threshold).map_err(|e| e.to_string())?;
        let (outcomes, stats) = apply_threshold(&self.routes[&mode], t).map_err(|e| e.to_string())?;
        let its = throughput(&outcomes).map_err(|e| e.to_string())?.its;
        let predictions: BTreeMap<u64, _> = outcomes.into_iter().map(|o| (o.image_id, o.final_detections)).collect();
        let eval = evaluate(&predictions, &self.dataset, &self.eval_cfg).map_err(|e| e.to_string())?;
        to_json(&json!({
            "mode": mode.as_str(),
            "threshold": threshold,
            "cheap_path_rate": stats.cheap_path_rate,
            "escalated_rate": stats.escalated_rate,
            "its": its,
            "map_50_95": eval.map_50_95,
            "map_50": eval.map_50,
        }))
    }
}

pub fn bottleneck_json(res_high: u32, res_low: u32, fps_high: f64, fps_low: f64) -> Result<String, String> {
    let r = BottleneckResult::from_fps(res_high, res_low, fps_high, fps_low, DEFAULT_BOUND_FACTOR).map_err(|e| e.to_string())?;
    to_json(&r)
}

#[wasm_bindgen]
pub struct Demo {
    inner: DemoState,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(num_images: u32, seed: u32) -> Result<Demo, JsValue> {
        DemoState::new(num_images as usize, u64::from(seed))
            .map(|inner| Demo { inner })
            .map_err(|e| JsValue::from_str(&e))
    }

    #[wasm_bindgen(js_name = numImages)]
    pub fn num_images(&self) -> u32 {
        self.inner.num_images() as u32
    }

    pub fn sweep(&self, mode: &str, max_map_loss: f64) -> Result<String, JsValue> {
        self.inner.sweep_json(mode, max_map_loss).map_err(|e| JsValue::from_str(&e))
    }

    pub fn route(&self, mode: &str, threshold: f64) -> Result<String, JsValue> {
        self.inner.route_json(mode, threshold).map_err(|e| JsValue::from_str(&e))
    }
}

#[wasm_bindgen]
pub fn bottleneck(res_high: u32, res_low: u32, fps_high: f64, fps_low: f64) -> Result<String, JsValue> {
    bottleneck_json(res_high, res_low, fps_high, fps_low).map_err(|e| JsValue::from_str(&e))
}

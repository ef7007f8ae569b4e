//! Two-stage gate threshold selection.
//!
//! Stage one picks a seed threshold on a calibration subset as the empirical
//! quantile that hits a target cheap-path rate. Stage two sweeps a grid of
//! thresholds on a disjoint tuning subset and picks an operating point with a
//! mode-specific objective.

use std::collections::{BTreeMap, HashSet};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bench::throughput;
use crate::cocoeval::{evaluate, EvalConfig};
use crate::error::{Error, Result};
use crate::model::{GateThreshold, ImageRecord, ImageTrace};
use crate::router::{apply_threshold, prepare_routes, Mode, RouteConfig};

pub const DEFAULT_MIN_EXIT_RATE: f64 = 0.10;
pub const DEFAULT_MAX_REL_MAP_LOSS: f64 = 0.06;

/// `0.00, 0.01, ..., 1.00`.
pub fn default_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPlan {
    pub calibration_size: usize,
    pub tuning_size: usize,
    pub target_cheap_rate: f64,
    pub grid: Vec<f64>,
    pub rng_seed: u64,
}

impl Default for CalibrationPlan {
    fn default() -> Self {
        Self {
            calibration_size: 400,
            tuning_size: 200,
            target_cheap_rate: 0.50,
            grid: default_grid(),
            rng_seed: 123,
        }
    }
}

impl CalibrationPlan {
    pub fn validate(&self) -> Result<()> {
        if self.calibration_size == 0 || self.tuning_size == 0 {
            return Err(Error::InvalidConfig("subset sizes must be at least 1".into()));
        }
        if !(self.target_cheap_rate > 0.0 && self.target_cheap_rate < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "target rate {} must lie strictly between 0 and 1",
                self.target_cheap_rate
            )));
        }
        validate_grid(&self.grid)
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyInput("threshold grid"));
    }
    if let Some(&bad) = grid.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidThreshold(bad));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidConfig("threshold grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Draws disjoint calibration and tuning subsets without replacement.
///
/// Both lists are returned in ascending id order.
pub fn sample_subsets(dataset: &[ImageRecord], plan: &CalibrationPlan) -> Result<(Vec<u64>, Vec<u64>)> {
    let required = plan.calibration_size + plan.tuning_size;
    if dataset.len() < required {
        return Err(Error::DatasetTooSmall {
            required,
            available: dataset.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(plan.rng_seed);
    let picked = index::sample(&mut rng, dataset.len(), required).into_vec();
    let mut calibration: Vec<u64> = picked[..plan.calibration_size]
        .iter()
        .map(|&i| dataset[i].image_id)
        .collect();
    let mut tuning: Vec<u64> = picked[plan.calibration_size..]
        .iter()
        .map(|&i| dataset[i].image_id)
        .collect();
    calibration.sort_unstable();
    tuning.sort_unstable();
    Ok((calibration, tuning))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedCalibration {
    pub threshold: GateThreshold,
    pub target_rate: f64,
    /// Fraction of the calibration confidences at or above the threshold.
    pub achieved_rate: f64,
}

/// The largest observed confidence whose acceptance rate (`c >= t`) still
/// reaches `target_cheap_rate`.
pub fn seed_threshold(gate_confidences: &[f64], target_cheap_rate: f64) -> Result<SeedCalibration> {
    if gate_confidences.is_empty() {
        return Err(Error::EmptyInput("seed calibration"));
    }
    if !(target_cheap_rate > 0.0 && target_cheap_rate < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "target rate {target_cheap_rate} must lie strictly between 0 and 1"
        )));
    }
    let mut sorted = gate_confidences.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let n = sorted.len();
    // Smallest accepted count that reaches the target; the epsilon absorbs
    // products like 0.1 * 400 landing a hair above an integer.
    let needed = ((target_cheap_rate * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let t = sorted[needed - 1];
    let accepted = sorted.iter().filter(|&&c| c >= t).count();
    Ok(SeedCalibration {
        threshold: GateThreshold::new(t)?,
        target_rate: target_cheap_rate,
        achieved_rate: accepted as f64 / n as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub threshold: f64,
    pub cheap_path_rate: f64,
    pub map_50_95: f64,
    pub its: f64,
}

/// Keeps only the images that have a trace.
pub fn restrict_dataset(dataset: &[ImageRecord], traces: &[ImageTrace]) -> Vec<ImageRecord> {
    let ids: HashSet<u64> = traces.iter().map(|t| t.image_id).collect();
    dataset.iter().filter(|r| ids.contains(&r.image_id)).cloned().collect()
}

/// Keeps only the traces whose image id is in `ids`.
pub fn select_traces(traces: &[ImageTrace], ids: &[u64]) -> Vec<ImageTrace> {
    let ids: HashSet<u64> = ids.iter().copied().collect();
    traces.iter().filter(|t| ids.contains(&t.image_id)).cloned().collect()
}

/// Routes and evaluates the traces at every grid threshold, in grid order.
///
/// mAP is computed against the traced images only.
pub fn sweep(
    traces: &[ImageTrace],
    dataset: &[ImageRecord],
    mode: Mode,
    grid: &[f64],
    route_cfg: &RouteConfig,
    eval_cfg: &EvalConfig,
) -> Result<Vec<SweepPoint>> {
    validate_grid(grid)?;
    let routes = prepare_routes(traces, dataset, mode, route_cfg)?;
    let eval_set = restrict_dataset(dataset, traces);
    grid.iter()
        .map(|&t| {
            let (outcomes, stats) = apply_threshold(&routes, GateThreshold::new(t)?)?;
            let its = throughput(&outcomes)?.its;
            let predictions: BTreeMap<u64, _> = outcomes
                .into_iter()
                .map(|o| (o.image_id, o.final_detections))
                .collect();
            let eval = evaluate(&predictions, &eval_set, eval_cfg)?;
            Ok(SweepPoint {
                threshold: t,
                cheap_path_rate: stats.cheap_path_rate,
                map_50_95: eval.map_50_95,
                its,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningResult {
    pub threshold: GateThreshold,
    pub objective_value: f64,
    pub sweep: Vec<SweepPoint>,
    pub constraint_satisfied: bool,
}

impl TuningResult {
    pub fn selected(&self) -> &SweepPoint {
        self.sweep
            .iter()
            .find(|p| p.threshold == self.threshold.value())
            .expect("selected threshold comes from the sweep")
    }
}

fn best_by<'a>(
    points: impl Iterator<Item = &'a SweepPoint>,
    better: impl Fn(&SweepPoint, &SweepPoint) -> bool,
) -> Option<&'a SweepPoint> {
    points.fold(None, |best, p| match best {
        Some(b) if !better(p, b) => Some(b),
        _ => Some(p),
    })
}

fn finish(sweep: &[SweepPoint], chosen: &SweepPoint, objective_value: f64, ok: bool) -> Result<TuningResult> {
    Ok(TuningResult {
        threshold: GateThreshold::new(chosen.threshold)?,
        objective_value,
        sweep: sweep.to_vec(),
        constraint_satisfied: ok,
    })
}

/// Highest mAP among points whose exit rate is at least `min_exit_rate`.
///
/// Ties prefer the higher exit rate, then the lower threshold. When no point
/// qualifies the unconstrained best is returned with the flag cleared.
pub fn tune_early_exit(sweep: &[SweepPoint], min_exit_rate: f64) -> Result<TuningResult> {
    let better = |p: &SweepPoint, b: &SweepPoint| {
        (p.map_50_95, p.cheap_path_rate, -p.threshold) > (b.map_50_95, b.cheap_path_rate, -b.threshold)
    };
    if sweep.is_empty() {
        return Err(Error::EmptyInput("sweep"));
    }
    match best_by(sweep.iter().filter(|p| p.cheap_path_rate >= min_exit_rate), better) {
        Some(p) => finish(sweep, p, p.map_50_95, true),
        None => {
            let p = best_by(sweep.iter(), better).expect("non-empty");
            finish(sweep, p, p.map_50_95, false)
        }
    }
}

pub fn relative_map_loss(map: f64, baseline_map: f64) -> f64 {
    (baseline_map - map) / baseline_map
}

/// Highest throughput among points within `max_rel_map_loss` of `baseline_map`.
///
/// Ties prefer the higher mAP, then the lower threshold. When nothing fits the
/// budget the point with the smallest loss is returned with the flag cleared.
pub fn tune_adaptive(sweep: &[SweepPoint], baseline_map: f64, max_rel_map_loss: f64) -> Result<TuningResult> {
    if sweep.is_empty() {
        return Err(Error::EmptyInput("sweep"));
    }
    if !(baseline_map > 0.0) {
        return Err(Error::ZeroBaseline("mAP"));
    }
    let fits = |p: &&SweepPoint| relative_map_loss(p.map_50_95, baseline_map) <= max_rel_map_loss;
    let faster = |p: &SweepPoint, b: &SweepPoint| (p.its, p.map_50_95, -p.threshold) > (b.its, b.map_50_95, -b.threshold);
    match best_by(sweep.iter().filter(fits), faster) {
        Some(p) => finish(sweep, p, p.its, true),
        None => {
            let closer = |p: &SweepPoint, b: &SweepPoint| (p.map_50_95, p.its, -p.threshold) > (b.map_50_95, b.its, -b.threshold);
            let p = best_by(sweep.iter(), closer).expect("non-empty");
            finish(sweep, p, p.its, false)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    /// Maximise mAP subject to a minimum exit rate.
    MaxMapWithMinRate { min_rate: f64 },
    /// Maximise throughput subject to a relative mAP loss budget.
    MaxThroughputWithinLoss { baseline_map: f64, max_rel_loss: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCalibration {
    pub mode: Mode,
    pub calibration_ids: usize,
    pub tuning_ids: usize,
    pub seed: SeedCalibration,
    pub objective: Objective,
    pub tuning: TuningResult,
}

/// Inserts `value` into a strictly increasing grid unless already present.
fn with_point(grid: &[f64], value: f64) -> Vec<f64> {
    let mut out = grid.to_vec();
    if let Err(pos) = out.binary_search_by(|g| g.total_cmp(&value)) {
        out.insert(pos, value);
    }
    out
}

/// Runs both stages for one mode.
///
/// The seed threshold is computed on the calibration subset and added to the
/// grid, so the search can settle on it; the grid search itself only ever sees
/// the tuning subset.
pub fn calibrate_mode(
    traces: &[ImageTrace],
    dataset: &[ImageRecord],
    mode: Mode,
    plan: &CalibrationPlan,
    objective: Objective,
    route_cfg: &RouteConfig,
    eval_cfg: &EvalConfig,
) -> Result<ModeCalibration> {
    plan.validate()?;
    let traced = restrict_dataset(dataset, traces);
    let (cal_ids, tune_ids) = sample_subsets(&traced, plan)?;

    let cal_traces = select_traces(traces, &cal_ids);
    let confidences: Vec<f64> = prepare_routes(&cal_traces, dataset, mode, route_cfg)?
        .iter()
        .map(|r| r.confidence)
        .collect();
    let seed = seed_threshold(&confidences, plan.target_cheap_rate)?;

    let grid = with_point(&plan.grid, seed.threshold.value());
    let tune_traces = select_traces(traces, &tune_ids);
    let points = sweep(&tune_traces, dataset, mode, &grid, route_cfg, eval_cfg)?;
    let tuning = match objective {
        Objective::MaxMapWithMinRate { min_rate } => tune_early_exit(&points, min_rate)?,
        Objective::MaxThroughputWithinLoss {
            baseline_map,
            max_rel_loss,
        } => tune_adaptive(&points, baseline_map, max_rel_loss)?,
    };
    Ok(ModeCalibration {
        mode,
        calibration_ids: cal_ids.len(),
        tuning_ids: tune_ids.len(),
        seed,
        objective,
        tuning,
    })
}

/// mAP on the tuning subset when every image takes the expensive branch.
///
/// Serves as the adaptive loss baseline when no early-exit result is available.
pub fn expensive_only_map(
    traces: &[ImageTrace],
    dataset: &[ImageRecord],
    mode: Mode,
    plan: &CalibrationPlan,
    route_cfg: &RouteConfig,
    eval_cfg: &EvalConfig,
) -> Result<f64> {
    plan.validate()?;
    let traced = restrict_dataset(dataset, traces);
    let (_, tune_ids) = sample_subsets(&traced, plan)?;
    let tune_traces = select_traces(traces, &tune_ids);
    let predictions: BTreeMap<u64, _> = prepare_routes(&tune_traces, dataset, mode, route_cfg)?
        .into_iter()
        .map(|r| (r.image_id, r.expensive.detections))
        .collect();
    Ok(evaluate(&predictions, &restrict_dataset(dataset, &tune_traces), eval_cfg)?.map_50_95)
}

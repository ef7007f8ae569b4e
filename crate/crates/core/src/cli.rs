//! Command-line front end.
//!
//! Exit codes: 0 success, 1 data or validation error, 2 usage error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::backends::{emit_annotations, emit_traces, generate_synthetic, parse_annotations_str, parse_traces_str, SyntheticConfig};
use crate::bench::{bottleneck_test, compare, throughput, BenchReport, ModeSummary};
use crate::calibrate::{
    calibrate_mode, expensive_only_map, sweep, CalibrationPlan, ModeCalibration, Objective, SweepPoint,
};
use crate::cocoeval::{evaluate, EvalConfig};
use crate::error::Error;
use crate::geometry::NmsConfig;
use crate::model::{validate_trace_set, GateThreshold, ImageRecord, ImageTrace};
use crate::report::{
    emit_bundle_json, emit_sweep_plot, emit_table, sha256_hex, Axes, Format, InputDigest, ModeSweep, Provenance,
    ReportBundle, TableKind,
};
use crate::router::{prepare_routes, route_all, Mode, RouteConfig};

pub const OUT_DIR_ENV: &str = "GATEBENCH_OUT";
pub const THRESHOLDS_FILE: &str = "thresholds.json";

#[derive(Debug, Parser)]
#[command(name = "gatebench", version, about = "Confidence-gated detection routing benchmark over recorded traces")]
pub struct Cli {
    /// Directory for all outputs.
    #[arg(long, global = true, env = OUT_DIR_ENV, default_value = "gatebench-out")]
    pub out_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic annotation file and trace file.
    Synth(SynthArgs),
    /// Pick gate thresholds: quantile seed, then grid search.
    Calibrate(CalibrateArgs),
    /// Evaluate a threshold grid on all traced images.
    Sweep(SweepArgs),
    /// Route all traces at fixed thresholds and write the benchmark tables.
    Bench(BenchArgs),
    /// Compare throughput at two input resolutions.
    Bottleneck(BottleneckArgs),
    /// Check a trace file against an annotation file.
    Validate(InputArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Adaptive,
    EarlyExit,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<Mode> {
        match self {
            ModeArg::Adaptive => vec![Mode::Adaptive],
            ModeArg::EarlyExit => vec![Mode::EarlyExit],
            ModeArg::Both => vec![Mode::EarlyExit, Mode::Adaptive],
        }
    }
}

fn unit_interval(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1]"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

fn non_negative(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} must be non-negative"))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    pub images: u64,
    #[arg(long, default_value_t = 123)]
    pub seed: u64,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..))]
    pub classes: u32,
    #[arg(long, default_value_t = 160)]
    pub low_res: u32,
    #[arg(long, default_value_t = 640)]
    pub high_res: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct InputArgs {
    /// Trace file (JSON lines).
    #[arg(long)]
    #[serde(skip)]
    pub traces: PathBuf,
    /// COCO-style annotation file.
    #[arg(long)]
    #[serde(skip)]
    pub annotations: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct RouteArgs {
    #[arg(long, default_value_t = 160)]
    pub low_res: u32,
    #[arg(long, default_value_t = 640)]
    pub high_res: u32,
    #[arg(long, default_value_t = 0.70, value_parser = unit_interval)]
    pub nms_iou: f64,
    #[arg(long, default_value_t = 0.001, value_parser = unit_interval)]
    pub score_thresh: f64,
    /// Extra cost charged when the early-exit gate continues to the full model.
    #[arg(long, default_value_t = 0.0, value_parser = non_negative)]
    pub head_overhead_ms: f64,
}

impl RouteArgs {
    fn config(&self) -> Result<RouteConfig, Failure> {
        if self.low_res == 0 || self.high_res == 0 || self.low_res == self.high_res {
            return Err(Failure::Usage("--low-res and --high-res must be positive and different".into()));
        }
        Ok(RouteConfig {
            low_res: self.low_res,
            high_res: self.high_res,
            nms: NmsConfig::new(self.nms_iou, self.score_thresh)?,
            head_overhead_ms: self.head_overhead_ms,
        })
    }
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrateArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub input: InputArgs,
    #[command(flatten)]
    pub route: RouteArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 123)]
    pub seed: u64,
    #[arg(long, default_value_t = 400, value_parser = clap::value_parser!(u64).range(1..))]
    pub cal_size: u64,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    pub tune_size: u64,
    #[arg(long, default_value_t = 0.5, value_parser = unit_interval)]
    pub target_rate: f64,
    /// Number of equal steps between threshold 0 and 1 in the grid.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub grid_steps: u32,
    #[arg(long, default_value_t = 0.10, value_parser = unit_interval)]
    pub min_exit_rate: f64,
    /// Relative mAP loss budget for the adaptive search.
    #[arg(long, default_value_t = 0.06, value_parser = non_negative)]
    pub max_map_loss: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub input: InputArgs,
    #[command(flatten)]
    pub route: RouteArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u32).range(1..))]
    pub grid_steps: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub input: InputArgs,
    #[command(flatten)]
    pub route: RouteArgs,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    pub mode: ModeArg,
    /// Thresholds written by `calibrate`; defaults to the one in the output directory.
    #[arg(long, conflicts_with_all = ["adaptive_threshold", "early_exit_threshold"])]
    #[serde(skip)]
    pub thresholds: Option<PathBuf>,
    #[arg(long, value_parser = unit_interval)]
    pub adaptive_threshold: Option<f64>,
    #[arg(long, value_parser = unit_interval)]
    pub early_exit_threshold: Option<f64>,
    #[arg(long, default_value = "Adaptive Two-Pass")]
    pub adaptive_label: String,
    #[arg(long, default_value = "Early-Exit")]
    pub baseline_label: String,
}

#[derive(Debug, Args, Serialize)]
pub struct BottleneckArgs {
    #[arg(long)]
    #[serde(skip)]
    pub traces: PathBuf,
    #[arg(long, default_value_t = 640)]
    pub res_high: u32,
    #[arg(long, default_value_t = 160)]
    pub res_low: u32,
    #[arg(long, default_value_t = crate::bench::DEFAULT_BOUND_FACTOR, value_parser = positive)]
    pub bound_factor: f64,
}

/// Contents of the thresholds file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdsFile {
    pub thresholds: BTreeMap<Mode, GateThreshold>,
    /// mAP the adaptive loss budget was measured against, when adaptive was calibrated.
    #[serde(default)]
    pub adaptive_baseline_map: Option<f64>,
    #[serde(default)]
    pub calibrations: Vec<ModeCalibration>,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Data(e.into())
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 1,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Usage(m) => f.write_str(m),
            Failure::Data(e) => write!(f, "{e}"),
        }
    }
}

/// Parses `args` (program name first), runs the command, and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}

pub fn execute(cli: &Cli) -> Result<(), Failure> {
    let out = RunDir::new(&cli.out_dir);
    match &cli.command {
        Command::Synth(a) => cmd_synth(a, out),
        Command::Calibrate(a) => cmd_calibrate(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Bench(a) => cmd_bench(a, out),
        Command::Bottleneck(a) => cmd_bottleneck(a, out),
        Command::Validate(a) => cmd_validate(a),
    }
}

/// Collects output files and writes them together with a manifest.
struct RunDir {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
    inputs: Vec<InputDigest>,
}

impl RunDir {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            inputs: Vec::new(),
        }
    }

    fn read_input(&mut self, path: &Path) -> Result<String, Failure> {
        let bytes = fs::read(path).map_err(|e| Failure::Data(Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))))?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        self.inputs.push(InputDigest {
            name,
            sha256: sha256_hex(&bytes),
        });
        String::from_utf8(bytes).map_err(|e| {
            Failure::Data(Error::Parse {
                line: 0,
                message: format!("{}: not UTF-8: {e}", path.display()),
            })
        })
    }

    fn add(&mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.push((name.into(), contents.into()));
    }

    fn provenance(&self, config: serde_json::Value, seed: Option<u64>) -> Provenance {
        Provenance {
            config,
            inputs: self.inputs.clone(),
            seed,
        }
    }

    fn finish(self, command: &str, config: serde_json::Value, seed: Option<u64>) -> Result<(), Failure> {
        fs::create_dir_all(&self.dir)?;
        let outputs: Vec<_> = self
            .files
            .iter()
            .map(|(name, bytes)| json!({"name": name, "sha256": sha256_hex(bytes)}))
            .collect();
        let manifest = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "seed": seed,
            "inputs": self.inputs,
            "outputs": outputs,
        });
        for (name, bytes) in &self.files {
            fs::write(self.dir.join(name), bytes)?;
        }
        let mut text = serde_json::to_string_pretty(&manifest).map_err(Error::from)?;
        text.push('\n');
        fs::write(self.dir.join(format!("{command}.manifest.json")), text)?;
        Ok(())
    }
}

fn config_echo<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).expect("argument structs serialize")
}

fn grid(steps: u32) -> Vec<f64> {
    (0..=steps).map(|i| f64::from(i) / f64::from(steps)).collect()
}

struct Loaded {
    dataset: Vec<ImageRecord>,
    traces: Vec<ImageTrace>,
}

fn load(input: &InputArgs, out: &mut RunDir) -> Result<Loaded, Failure> {
    let trace_text = out.read_input(&input.traces)?;
    let ann_text = out.read_input(&input.annotations)?;
    let file = parse_traces_str(&trace_text)?;
    let ann = parse_annotations_str(&ann_text)?;
    if file.clamped_scores > 0 {
        eprintln!("warning: {} detection scores clamped into [0, 1]", file.clamped_scores);
    }
    if ann.skipped > 0 {
        eprintln!("warning: {} annotations without a usable box skipped", ann.skipped);
    }
    let violations = validate_trace_set(&file.traces, &ann.records);
    if let Some(v) = violations.first() {
        return Err(Failure::Data(Error::InvalidConfig(format!(
            "trace set has {} violation(s), first: {v}",
            violations.len()
        ))));
    }
    Ok(Loaded {
        dataset: ann.records,
        traces: file.traces,
    })
}

fn cmd_synth(a: &SynthArgs, mut out: RunDir) -> Result<(), Failure> {
    if a.low_res == 0 || a.low_res >= a.high_res {
        return Err(Failure::Usage("--low-res must be positive and below --high-res".into()));
    }
    let defaults = SyntheticConfig::default();
    let mut tiers = defaults.tiers.values().copied();
    let (low, high) = (tiers.next().expect("default low tier"), tiers.next_back().expect("default high tier"));
    let cfg = SyntheticConfig {
        num_images: usize::try_from(a.images).map_err(|_| Failure::Usage("--images is too large".into()))?,
        rng_seed: a.seed,
        classes: a.classes,
        tiers: BTreeMap::from([(a.low_res, low), (a.high_res, high)]),
        ..defaults
    };
    let (records, traces) = generate_synthetic(&cfg)?;
    out.add("annotations.json", emit_annotations(&records));
    out.add("traces.jsonl", emit_traces(&traces)?);
    out.finish("synth", config_echo(&cfg), Some(cfg.rng_seed))?;
    println!("wrote {} synthetic images (seed {})", records.len(), cfg.rng_seed);
    Ok(())
}

fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from("threshold,cheap_path_rate,map,its\n");
    for p in points {
        s.push_str(&format!("{},{},{},{}\n", p.threshold, p.cheap_path_rate, p.map_50_95, p.its));
    }
    s
}

fn add_plots(out: &mut RunDir, prefix: &str, points: &[SweepPoint], selected: Option<f64>) -> Result<(), Failure> {
    out.add(format!("{prefix}.csv"), sweep_csv(points));
    out.add(
        format!("{prefix}_map_vs_rate.svg"),
        emit_sweep_plot(points, Axes::MapVsRate, selected)?,
    );
    out.add(
        format!("{prefix}_map_vs_threshold.svg"),
        emit_sweep_plot(points, Axes::MapVsThreshold, selected)?,
    );
    Ok(())
}

fn cmd_calibrate(a: &CalibrateArgs, mut out: RunDir) -> Result<(), Failure> {
    let route_cfg = a.route.config()?;
    let eval_cfg = EvalConfig::default();
    let plan = CalibrationPlan {
        calibration_size: a.cal_size as usize,
        tuning_size: a.tune_size as usize,
        target_cheap_rate: a.target_rate,
        grid: grid(a.grid_steps),
        rng_seed: a.seed,
    };
    plan.validate()?;
    let data = load(&a.input, &mut out)?;
    // Fail on the first trace in file order that lacks a pass, not on whichever
    // one the subset sampler happens to draw.
    for mode in a.mode.modes() {
        prepare_routes(&data.traces, &data.dataset, mode, &route_cfg)?;
    }

    let mut thresholds = BTreeMap::new();
    let mut calibrations = Vec::new();
    let mut adaptive_baseline_map = None;
    let mut early_exit_map = None;
    for mode in a.mode.modes() {
        let objective = match mode {
            Mode::EarlyExit => Objective::MaxMapWithMinRate { min_rate: a.min_exit_rate },
            Mode::Adaptive => {
                let baseline_map = match early_exit_map {
                    Some(m) => m,
                    None => expensive_only_map(&data.traces, &data.dataset, mode, &plan, &route_cfg, &eval_cfg)?,
                };
                adaptive_baseline_map = Some(baseline_map);
                Objective::MaxThroughputWithinLoss {
                    baseline_map,
                    max_rel_loss: a.max_map_loss,
                }
            }
        };
        let cal = calibrate_mode(&data.traces, &data.dataset, mode, &plan, objective, &route_cfg, &eval_cfg)?;
        let selected = cal.tuning.selected();
        if mode == Mode::EarlyExit {
            early_exit_map = Some(selected.map_50_95);
        }
        println!(
            "{mode}: threshold {} (seed {}, cheap-path rate {:.3}, mAP {:.3}, {:.2} it/s, constraint {})",
            cal.tuning.threshold,
            cal.seed.threshold,
            selected.cheap_path_rate,
            selected.map_50_95,
            selected.its,
            if cal.tuning.constraint_satisfied { "met" } else { "NOT met" }
        );
        add_plots(
            &mut out,
            &format!("tuning_{}", mode.as_str()),
            &cal.tuning.sweep,
            Some(cal.tuning.threshold.value()),
        )?;
        thresholds.insert(mode, cal.tuning.threshold);
        calibrations.push(cal);
    }
    let file = ThresholdsFile {
        thresholds,
        adaptive_baseline_map,
        calibrations,
    };
    let mut text = serde_json::to_string_pretty(&file).map_err(Error::from)?;
    text.push('\n');
    out.add(THRESHOLDS_FILE, text);
    out.finish("calibrate", config_echo(a), Some(a.seed))
}

fn cmd_sweep(a: &SweepArgs, mut out: RunDir) -> Result<(), Failure> {
    let route_cfg = a.route.config()?;
    let data = load(&a.input, &mut out)?;
    let mut sweeps = Vec::new();
    for mode in a.mode.modes() {
        let points = sweep(&data.traces, &data.dataset, mode, &grid(a.grid_steps), &route_cfg, &EvalConfig::default())?;
        add_plots(&mut out, &format!("sweep_{}", mode.as_str()), &points, None)?;
        sweeps.push(ModeSweep {
            mode,
            points,
            selected: None,
        });
    }
    let mut bundle = ReportBundle::new(out.provenance(config_echo(a), None));
    bundle.sweeps = sweeps;
    out.add("sweep_report.json", emit_bundle_json(&bundle)?);
    out.finish("sweep", config_echo(a), None)
}

fn bench_thresholds(a: &BenchArgs, out: &mut RunDir) -> Result<BTreeMap<Mode, GateThreshold>, Failure> {
    let mut explicit = BTreeMap::new();
    if let Some(t) = a.adaptive_threshold {
        explicit.insert(Mode::Adaptive, GateThreshold::new(t)?);
    }
    if let Some(t) = a.early_exit_threshold {
        explicit.insert(Mode::EarlyExit, GateThreshold::new(t)?);
    }
    if !explicit.is_empty() {
        return Ok(explicit);
    }
    let path = match &a.thresholds {
        Some(p) => p.clone(),
        None => {
            let p = out.dir.join(THRESHOLDS_FILE);
            if !p.exists() {
                return Err(Failure::Usage(format!(
                    "no thresholds: pass --thresholds, --adaptive-threshold/--early-exit-threshold, or run calibrate into {}",
                    out.dir.display()
                )));
            }
            p
        }
    };
    let text = out.read_input(&path)?;
    let file: ThresholdsFile = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("thresholds file: {e}"),
    })?;
    Ok(file.thresholds)
}

fn cmd_bench(a: &BenchArgs, mut out: RunDir) -> Result<(), Failure> {
    let route_cfg = a.route.config()?;
    let thresholds = bench_thresholds(a, &mut out)?;
    let modes: Vec<Mode> = a.mode.modes().into_iter().filter(|m| thresholds.contains_key(m)).collect();
    if modes.is_empty() || (a.mode != ModeArg::Both && modes.len() != 1) {
        return Err(Failure::Usage(format!("no threshold available for --mode {:?}", a.mode)));
    }
    let data = load(&a.input, &mut out)?;
    let eval_cfg = EvalConfig::default();

    let mut summaries = BTreeMap::new();
    for mode in modes {
        let t = thresholds[&mode];
        let (outcomes, routing) = route_all(&data.traces, &data.dataset, mode, t, &route_cfg)?;
        let its = throughput(&outcomes)?.its;
        let predictions: BTreeMap<u64, _> = outcomes.into_iter().map(|o| (o.image_id, o.final_detections)).collect();
        let map = evaluate(&predictions, &data.dataset, &eval_cfg)?.map_50_95;
        let label = match mode {
            Mode::Adaptive => a.adaptive_label.clone(),
            Mode::EarlyExit => a.baseline_label.clone(),
        };
        summaries.insert(
            mode,
            ModeSummary {
                label,
                its,
                map_50_95: map,
                routing,
            },
        );
    }
    let adaptive = summaries.remove(&Mode::Adaptive);
    let baseline = summaries.remove(&Mode::EarlyExit);
    let report = match (adaptive, baseline) {
        (Some(ad), Some(base)) => compare(ad, base)?,
        (ad, base) => BenchReport::single(base, ad),
    };

    let mut bundle = ReportBundle::new(out.provenance(config_echo(a), None));
    bundle.bench = Some(report);
    for (kind, stem) in [(TableKind::Benchmark, "benchmark"), (TableKind::Routing, "routing")] {
        let text = emit_table(&bundle, kind, Format::Text)?;
        print!("{text}");
        println!();
        out.add(format!("{stem}.csv"), emit_table(&bundle, kind, Format::Csv)?);
        out.add(format!("{stem}.jsonl"), emit_table(&bundle, kind, Format::Jsonl)?);
        out.add(format!("{stem}.txt"), text);
    }
    out.add("report.json", emit_bundle_json(&bundle)?);
    out.finish("bench", config_echo(a), None)
}

fn cmd_bottleneck(a: &BottleneckArgs, mut out: RunDir) -> Result<(), Failure> {
    if a.res_low == 0 || a.res_high == 0 {
        return Err(Failure::Usage("resolutions must be positive".into()));
    }
    let text = out.read_input(&a.traces)?;
    let file = parse_traces_str(&text)?;
    let result = bottleneck_test(&file.traces, a.res_high, a.res_low, a.bound_factor)?;
    let mut bundle = ReportBundle::new(out.provenance(config_echo(a), None));
    bundle.bottleneck = Some(result);
    let table = emit_table(&bundle, TableKind::Bottleneck, Format::Text)?;
    print!("{table}");
    out.add("bottleneck.csv", emit_table(&bundle, TableKind::Bottleneck, Format::Csv)?);
    out.add("bottleneck.jsonl", emit_table(&bundle, TableKind::Bottleneck, Format::Jsonl)?);
    out.add("bottleneck.txt", table);
    out.finish("bottleneck", config_echo(a), None)
}

fn cmd_validate(a: &InputArgs) -> Result<(), Failure> {
    let read = |p: &Path| {
        fs::read_to_string(p).map_err(|e| Failure::Data(Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))))
    };
    let file = parse_traces_str(&read(&a.traces)?)?;
    let ann = parse_annotations_str(&read(&a.annotations)?)?;
    let violations = validate_trace_set(&file.traces, &ann.records);
    for v in &violations {
        println!("{v}");
    }
    if file.clamped_scores > 0 {
        println!("note: {} detection scores clamped into [0, 1]", file.clamped_scores);
    }
    if violations.is_empty() {
        println!("ok: {} traces, {} images", file.traces.len(), ann.records.len());
        Ok(())
    } else {
        Err(Failure::Data(Error::InvalidConfig(format!("{} violation(s)", violations.len()))))
    }
}

//! `tatami`: file-in/file-out front end for the judo footage pipeline.
//!
//! Exit status is 0 on success, 1 for invalid input or a domain error and 2
//! when a file cannot be read or written.

use std::collections::{BTreeMap, HashMap};
use std::env;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use tatami_core::features::{build_features, lag_features, DctConfig, DctMode, FeatureMatrix};
use tatami_core::interchange::{
    export_preannotations, read_annotations_file, read_frames_file, validate_sequence, write_tasks, ExportConfig,
    FrameRecord, IntervalAnnotation, SceneClass,
};
use tatami_core::model::metrics::{write_metrics, MetricsRow};
use tatami_core::model::{
    evaluate, evaluate_binary, join_labels, label_map, scene_label_map, target_labels, train_logistic,
    train_multiclass, EvalMode, Hyper, LabeledDataset, ModelBody, SavedModel, SplitSpec, SplitUnit, TrainSetup,
};
use tatami_core::phase::{PhaseTriple, Target};
use tatami_core::preannotate::{
    heuristic_phases, preannotate_entities, CropProvider, EntityPreannotation, ImageDirCrops, InlineCrops,
    PreannotateConfig,
};
use tatami_core::segment::{
    build_phase_timeline, compute_statistics, detect_matches, smooth_classes, write_segments_csv, write_stats_csv,
    write_timeline_csv, SceneSequence, SegmentConfig, DEFAULT_WINDOW,
};
use tatami_core::synth::{generate, SynthConfig, SynthTruth};
use tatami_core::timer::{
    derivative, interpolate_series, run_pause_segments, write_timer_csv, TimerConfig, TimerSeries,
};

/// Relative input paths are looked up here when they do not exist in the
/// working directory.
const DATA_DIR_VAR: &str = "TATAMI_DATA_DIR";

#[derive(Parser)]
#[command(
    name = "tatami",
    version,
    about = "Combat-phase analysis of fixed-angle judo footage"
)]
struct Cli {
    /// TOML file with per-stage settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Suppress warnings on stderr.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a frames file against the interchange schema.
    Validate { frames: PathBuf },
    /// Clean one video's scoreboard timer and report run/pause segments.
    Timer {
        frames: PathBuf,
        /// Video to process when the file holds several.
        #[arg(long)]
        video: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Draft entity boxes and per-second phase labels with the rule-based
    /// annotator.
    Preannotate {
        frames: PathBuf,
        /// JSONL file of per-box RGB crops.
        #[arg(long, conflicts_with = "crop_dir")]
        crops: Option<PathBuf>,
        /// Directory of `<video>/<frame:06>_<box>.png` crops.
        #[arg(long)]
        crop_dir: Option<PathBuf>,
        /// Entity drafts (JSON), input to `export-tasks`.
        #[arg(long)]
        entities: Option<PathBuf>,
        /// Per-second phase drafts (CSV).
        #[arg(long)]
        phases: Option<PathBuf>,
    },
    /// Turn embeddings into feature rows.
    Features {
        frames: PathBuf,
        #[command(flatten)]
        feature: FeatureArgs,
        /// Cut videos into clips of this many seconds.
        #[arg(long)]
        clip_s: Option<u32>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Fit a logistic regression for one target and report F1.
    Train(TrainArgs),
    /// Score a saved model, or the rule-based annotator, on labeled data.
    Eval {
        frames: PathBuf,
        /// Interval annotations (not needed for the scene target).
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, required_unless_present = "heuristic")]
        model: Option<PathBuf>,
        /// Evaluate the rule-based phase annotator instead of a model.
        #[arg(long, requires = "target")]
        heuristic: bool,
        #[arg(long)]
        target: Option<String>,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Recover match boundaries from per-frame scene classes.
    Segment {
        frames: PathBuf,
        #[command(flatten)]
        seg: SegmentArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Per-match time-motion statistics.
    Stats {
        frames: PathBuf,
        /// Use the phase timeline from a synthetic truth file instead of the
        /// rule-based annotator.
        #[arg(long)]
        truth: Option<PathBuf>,
        #[command(flatten)]
        seg: SegmentArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the `second,state` timeline.
        #[arg(long)]
        timeline: Option<PathBuf>,
    },
    /// Generate a synthetic tournament.
    Synth {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        matches: Option<usize>,
        #[arg(long)]
        ocr_dropout: Option<f64>,
        #[arg(long)]
        flip_noise: Option<f64>,
        /// Emit embeddings of this shape, e.g. `3,12,20`.
        #[arg(long, value_delimiter = ',')]
        embedding: Option<Vec<usize>>,
        /// Raw camera footage: no intro/outro overlay and no timer.
        #[arg(long)]
        no_overlay: bool,
        #[arg(short, long, default_value = ".")]
        output: PathBuf,
    },
    /// Convert entity drafts into annotation-tool import tasks.
    ExportTasks {
        frames: PathBuf,
        entities: PathBuf,
        #[arg(long)]
        image_template: Option<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct FeatureArgs {
    /// `none`, `dct1d` or `dctnd`.
    #[arg(long, default_value = "dct1d")]
    feature: DctMode,
    #[arg(long, default_value_t = 8)]
    k: usize,
    /// Corner block for `dctnd`, e.g. `2,2,2`.
    #[arg(long, value_delimiter = ',')]
    block: Option<Vec<usize>>,
    #[arg(long, default_value_t = 0)]
    lag: usize,
}

impl FeatureArgs {
    fn dct(&self) -> DctConfig {
        DctConfig {
            block_shape: self.block.clone(),
            ..DctConfig::new(self.feature, self.k)
        }
    }
}

#[derive(Args, Clone)]
struct SegmentArgs {
    /// Odd smoothing window.
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    min_match_s: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    frames: PathBuf,
    /// Interval annotations (not needed for the scene target).
    #[arg(long)]
    labels: Option<PathBuf>,
    /// `is_match`, `is_active`, `is_standing` or `scene`.
    #[arg(long)]
    target: String,
    #[command(flatten)]
    feature: FeatureArgs,
    #[arg(long, default_value_t = 30)]
    clip_s: u32,
    /// Split unit; clips for phase targets and frames for `scene` by default.
    #[arg(long)]
    unit: Option<SplitUnit>,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', default_value = "0.7,0.15,0.15")]
    ratios: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `all` or `conditional` (score a child target only where its parent holds).
    #[arg(long, default_value = "all")]
    mode: EvalMode,
    /// Where to save the model.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Where to write the metrics CSV.
    #[arg(long)]
    metrics: Option<PathBuf>,
}

/// Per-stage settings read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    timer: TimerConfig,
    preannotate: PreannotateConfig,
    export: ExportConfig,
    hyper: Hyper,
    synth: SynthConfig,
    segment: SegmentSettings,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SegmentSettings {
    window: usize,
    min_match_s: f64,
}

impl Default for SegmentSettings {
    fn default() -> Self {
        SegmentSettings {
            window: DEFAULT_WINDOW,
            min_match_s: SegmentConfig::default().min_match_s,
        }
    }
}

struct Ctx {
    config: RunConfig,
    quiet: bool,
}

impl Ctx {
    fn warn(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("warning: {}", msg.as_ref());
        }
    }

    fn segment_settings(&self, args: &SegmentArgs) -> (usize, SegmentConfig) {
        (
            args.window.unwrap_or(self.config.segment.window),
            SegmentConfig {
                min_match_s: args.min_match_s.unwrap_or(self.config.segment.min_match_s),
            },
        )
    }
}

fn resolve_input(path: &Path) -> Result<PathBuf> {
    if path.exists() {
        return Ok(path.to_path_buf());
    }
    if path.is_relative() {
        if let Some(dir) = env::var_os(DATA_DIR_VAR) {
            let candidate = Path::new(&dir).join(path);
            if candidate.exists() {
                return Ok(candidate);
            }
        }
    }
    Err(io::Error::new(io::ErrorKind::NotFound, format!("{}: no such file", path.display())).into())
}

fn load_frames(ctx: &Ctx, path: &Path) -> Result<Vec<FrameRecord>> {
    let path = resolve_input(path)?;
    let parsed = read_frames_file(&path).with_context(|| format!("reading {}", path.display()))?;
    for w in &parsed.warnings {
        ctx.warn(w.to_string());
    }
    Ok(parsed.records)
}

/// A file or stdout.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Records grouped by video in first-seen order.
fn by_video(records: &[FrameRecord]) -> Vec<(String, Vec<FrameRecord>)> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<FrameRecord>> = BTreeMap::new();
    for r in records {
        if !groups.contains_key(&r.video_id) {
            order.push(r.video_id.clone());
        }
        groups.entry(r.video_id.clone()).or_default().push(r.clone());
    }
    order
        .into_iter()
        .map(|v| {
            let g = groups.remove(&v).unwrap_or_default();
            (v, g)
        })
        .collect()
}

fn parse_target(name: &str) -> Result<Option<Target>> {
    if name == "scene" {
        return Ok(None);
    }
    Ok(Some(name.parse::<Target>()?))
}

fn cmd_validate(ctx: &Ctx, frames: &Path) -> Result<()> {
    let records = load_frames(ctx, frames)?;
    let report = validate_sequence(&records);
    for e in &report.errors {
        eprintln!("error: {e}");
    }
    for w in &report.warnings {
        ctx.warn(w.to_string());
    }
    println!(
        "{} records, {} errors, {} warnings",
        records.len(),
        report.error_count(),
        report.warnings.len()
    );
    if !report.is_clean() {
        bail!("{} validation errors", report.error_count());
    }
    Ok(())
}

fn cmd_timer(ctx: &Ctx, frames: &Path, video: Option<&str>, output: Option<&Path>) -> Result<()> {
    let records = load_frames(ctx, frames)?;
    let videos = by_video(&records);
    let (video_id, stream) = match video {
        Some(v) => videos
            .into_iter()
            .find(|(id, _)| id == v)
            .with_context(|| format!("no frames for video {v}"))?,
        None if videos.len() == 1 => videos.into_iter().next().expect("one video"),
        None if videos.is_empty() => bail!("no frames"),
        None => bail!("{} videos in file; pick one with --video", videos.len()),
    };
    let raw = TimerSeries::from_records(&stream, &ctx.config.timer);
    let missing = raw.values.iter().filter(|v| v.is_none()).count();
    let clean = interpolate_series(&raw)?;
    let deriv = derivative(&clean)?;
    let rp = run_pause_segments(&deriv);
    let mut out = sink(output)?;
    write_timer_csv(&mut out, &clean, Some(&deriv))?;
    out.flush()?;
    let summary = format!(
        "{video_id}: {} seconds, {missing} interpolated, {} clock segments, {} pauses",
        clean.len(),
        rp.segments.len(),
        rp.pause_count
    );
    if output.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

fn write_phase_csv(path: &Path, rows: &[(String, usize, PhaseTriple)]) -> Result<()> {
    let mut out = sink(Some(path))?;
    writeln!(out, "video_id,second,is_match,is_active,is_standing")?;
    for (v, s, t) in rows {
        writeln!(
            out,
            "{v},{s},{},{},{}",
            t.is_match() as u8,
            t.is_active() as u8,
            t.is_standing() as u8
        )?;
    }
    out.flush()?;
    Ok(())
}

fn heuristic_rows(ctx: &Ctx, records: &[FrameRecord]) -> Vec<(String, usize, PhaseTriple)> {
    by_video(records)
        .into_iter()
        .flat_map(|(v, stream)| {
            heuristic_phases(&stream, &ctx.config.preannotate, &ctx.config.timer)
                .into_iter()
                .enumerate()
                .map(move |(s, t)| (v.clone(), s, t))
        })
        .collect()
}

fn cmd_preannotate(
    ctx: &Ctx,
    frames: &Path,
    crops: Option<&Path>,
    crop_dir: Option<&Path>,
    entities: Option<&Path>,
    phases: Option<&Path>,
) -> Result<()> {
    let records = load_frames(ctx, frames)?;
    let mut parts = Vec::new();
    if let Some(path) = entities {
        let provider: Box<dyn CropProvider> = match (crops, crop_dir) {
            (Some(c), _) => Box::new(InlineCrops::from_file(&resolve_input(c)?)?),
            (None, Some(d)) => Box::new(ImageDirCrops::new(resolve_input(d)?)),
            (None, None) => bail!("entity drafts need --crops or --crop-dir"),
        };
        let drafts = preannotate_entities(&records, provider.as_ref(), &ctx.config.preannotate)?;
        for d in &drafts {
            for w in &d.warnings {
                ctx.warn(format!("{}: {w}", d.frame));
            }
        }
        let mut out = sink(Some(path))?;
        serde_json::to_writer_pretty(&mut out, &drafts)?;
        writeln!(out)?;
        out.flush()?;
        parts.push(format!("{} frames with entity drafts", drafts.len()));
    }
    let rows = heuristic_rows(ctx, &records);
    if let Some(path) = phases {
        write_phase_csv(path, &rows)?;
    }
    let in_match = rows.iter().filter(|r| r.2.is_match()).count();
    let active = rows.iter().filter(|r| r.2.is_active()).count();
    parts.push(format!("{} seconds, {in_match} in match, {active} active", rows.len()));
    println!("{}", parts.join("; "));
    Ok(())
}

fn feature_matrix(records: &[FrameRecord], dct: &DctConfig, lag: usize, clip_s: Option<u32>) -> Result<FeatureMatrix> {
    let m = build_features(records, dct, clip_s)?;
    if m.is_empty() {
        bail!("no frame carries an embedding");
    }
    Ok(lag_features(&m, lag))
}

fn cmd_features(
    ctx: &Ctx,
    frames: &Path,
    args: &FeatureArgs,
    clip_s: Option<u32>,
    output: Option<&Path>,
) -> Result<()> {
    let records = load_frames(ctx, frames)?;
    let dct = args.dct();
    let m = feature_matrix(&records, &dct, args.lag, clip_s)?;
    let mut out = sink(output)?;
    m.write_csv(&mut out)?;
    out.flush()?;
    let summary = format!(
        "{} rows x {} features ({}, lag {})",
        m.len(),
        m.dim().unwrap_or(0),
        dct.label(),
        args.lag
    );
    if output.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

/// Feature rows joined with their labels: phase triples or scene indices.
enum Labeled {
    Phase(LabeledDataset<PhaseTriple>),
    Scene(LabeledDataset<usize>),
}

fn labeled_data(ctx: &Ctx, frames: &[FrameRecord], labels: Option<&Path>, setup: &TrainSetup) -> Result<Labeled> {
    let m = feature_matrix(frames, &setup.feature, setup.lag, setup.clip_s)?;
    let (data, dropped) = match parse_target(&setup.target)? {
        None => {
            let (d, dropped) = join_labels(&m, &scene_label_map(frames, setup.clip_s));
            (Labeled::Scene(d), dropped)
        }
        Some(_) => {
            let path = labels.context("phase targets need --labels")?;
            let anns = read_annotations_file(&resolve_input(path)?)?;
            let (d, dropped) = join_labels(&m, &phase_label_map(frames, &anns, setup.clip_s)?);
            (Labeled::Phase(d), dropped)
        }
    };
    if dropped > 0 {
        ctx.warn(format!("{dropped} feature rows have no label"));
    }
    Ok(data)
}

/// Per-second phase labels. Seconds of a video past its last interval are
/// no-match; clips that name no video end at their last interval.
fn phase_label_map(
    frames: &[FrameRecord],
    anns: &[IntervalAnnotation],
    clip_s: Option<u32>,
) -> Result<HashMap<(String, u32), PhaseTriple>> {
    let length: HashMap<String, u32> = by_video(frames)
        .into_iter()
        .map(|(video, stream)| {
            let t0 = stream[0].timestamp_s;
            let last = stream.iter().map(|r| r.timestamp_s - t0).fold(0.0, f64::max);
            (video, last.round() as u32 + 1)
        })
        .collect();
    let mut by_clip: BTreeMap<&str, Vec<IntervalAnnotation>> = BTreeMap::new();
    for a in anns {
        by_clip.entry(a.clip_id.as_str()).or_default().push(a.clone());
    }
    let mut map = HashMap::new();
    for (clip, items) in by_clip {
        let covered = items.iter().map(|a| a.end_s).fold(0.0, f64::max).ceil() as u32;
        let len = length.get(clip).map(|&n| n.max(covered));
        map.extend(label_map(&items, len, clip_s)?);
    }
    Ok(map)
}

fn rows_at(m: &FeatureMatrix, positions: &[usize]) -> Vec<Vec<f64>> {
    positions.iter().map(|&p| m.rows()[p].clone()).collect()
}

/// F1 for the positive class, or macro F1 over scene classes.
fn score(model: &SavedModel, rows: &[Vec<f64>], truths: &[usize], scene: bool) -> Result<Option<f64>> {
    if rows.is_empty() {
        return Ok(None);
    }
    let preds = model.predict_labels(rows)?;
    Ok(Some(if scene {
        evaluate(&preds, truths, SceneClass::ALL.len())?.macro_f1
    } else {
        let p: Vec<bool> = preds.iter().map(|&v| v == 1).collect();
        let t: Vec<bool> = truths.iter().map(|&v| v == 1).collect();
        evaluate_binary(&p, &t)?.positive().f1
    }))
}

/// Rows used for the target and their class indices.
fn target_rows(data: &Labeled, setup: &TrainSetup) -> Result<(FeatureMatrix, Vec<usize>)> {
    Ok(match data {
        Labeled::Scene(d) => (d.features().clone(), d.labels().to_vec()),
        Labeled::Phase(d) => {
            let target = parse_target(&setup.target)?.expect("phase target");
            let (pos, y) = target_labels(d.labels(), target, setup.mode);
            (d.features().select(&pos), y.into_iter().map(usize::from).collect())
        }
    })
}

fn cmd_train(ctx: &Ctx, args: &TrainArgs) -> Result<()> {
    let records = load_frames(ctx, &args.frames)?;
    let scene = parse_target(&args.target)?.is_none();
    let setup = TrainSetup {
        target: args.target.clone(),
        feature: args.feature.dct(),
        lag: args.feature.lag,
        clip_s: Some(args.clip_s),
        mode: args.mode,
        hyper: ctx.config.hyper,
    };
    setup.feature.check()?;
    let [a, b, c] = args.ratios[..] else {
        bail!("--ratios needs three values, got {}", args.ratios.len());
    };
    let spec = SplitSpec {
        ratios: [a, b, c],
        seed: args.seed,
        unit: args
            .unit
            .unwrap_or(if scene { SplitUnit::Frame } else { SplitUnit::Clip }),
    };

    let data = labeled_data(ctx, &records, args.labels.as_deref(), &setup)?;
    let (matrix, y) = target_rows(&data, &setup)?;
    let ds = LabeledDataset::new(matrix, y)?;
    let [train, _val, test] = ds.split_positions(&spec)?;
    let fm = ds.features();
    let train_rows = rows_at(fm, &train);
    let train_y: Vec<usize> = train.iter().map(|&p| ds.labels()[p]).collect();
    let body = if scene {
        ModelBody::Scene(train_multiclass(
            &train_rows,
            &train_y,
            SceneClass::ALL.len(),
            &setup.hyper,
        )?)
    } else {
        let yb: Vec<bool> = train_y.iter().map(|&v| v == 1).collect();
        let (m, report) = train_logistic(&train_rows, &yb, &setup.target, &setup.hyper)?;
        if !report.converged {
            ctx.warn(format!(
                "optimizer stopped after {} iterations without converging",
                report.iterations
            ));
        }
        ModelBody::Binary(m)
    };
    let model = SavedModel::new(setup, body);
    let test_y: Vec<usize> = test.iter().map(|&p| ds.labels()[p]).collect();
    let row = MetricsRow {
        label: args.target.clone(),
        feature: model.setup.feature.label(),
        train_f1: score(&model, &train_rows, &train_y, scene)?,
        test_f1: score(&model, &rows_at(fm, &test), &test_y, scene)?,
    };
    if let Some(path) = &args.output {
        model.save(path)?;
    }
    if let Some(path) = &args.metrics {
        write_metrics(sink(Some(path))?, std::slice::from_ref(&row), true)?;
    }
    println!("{}", row.to_csv_line());
    Ok(())
}

fn cmd_eval(
    ctx: &Ctx,
    frames: &Path,
    labels: Option<&Path>,
    model: Option<&Path>,
    heuristic: bool,
    target: Option<&str>,
    metrics: Option<&Path>,
) -> Result<()> {
    let records = load_frames(ctx, frames)?;
    let row = if heuristic {
        let name = target.context("--heuristic needs --target")?;
        let Some(t) = parse_target(name)? else {
            bail!("the rule-based annotator has no scene output");
        };
        let anns = read_annotations_file(&resolve_input(labels.context("--heuristic needs --labels")?)?)?;
        let truth = phase_label_map(&records, &anns, None)?;
        let (mut preds, mut truths) = (Vec::new(), Vec::new());
        for (v, s, p) in heuristic_rows(ctx, &records) {
            if let Some(gt) = truth.get(&(v, s as u32)) {
                preds.push(p.get(t));
                truths.push(gt.get(t));
            }
        }
        if preds.is_empty() {
            bail!("no labeled seconds overlap the frames");
        }
        MetricsRow {
            label: name.to_string(),
            feature: "pre_annotator".into(),
            train_f1: None,
            test_f1: Some(evaluate_binary(&preds, &truths)?.positive().f1),
        }
    } else {
        let path = resolve_input(model.context("--model is required")?)?;
        let saved = SavedModel::load(&path)?;
        if saved.setup.hash() != saved.config_hash {
            ctx.warn("model configuration hash does not match its settings");
        }
        if let Some(t) = target {
            if t != saved.setup.target {
                bail!("model predicts {}, not {t}", saved.setup.target);
            }
        }
        let data = labeled_data(ctx, &records, labels, &saved.setup)?;
        let (m, y) = target_rows(&data, &saved.setup)?;
        let scene = matches!(data, Labeled::Scene(_));
        MetricsRow {
            label: saved.setup.target.clone(),
            feature: saved.setup.feature.label(),
            train_f1: None,
            test_f1: score(&saved, m.rows(), &y, scene)?,
        }
    };
    if let Some(path) = metrics {
        write_metrics(sink(Some(path))?, std::slice::from_ref(&row), true)?;
    }
    println!("{}", row.to_csv_line());
    Ok(())
}

fn cmd_segment(ctx: &Ctx, frames: &Path, args: &SegmentArgs, output: Option<&Path>) -> Result<()> {
    let records = load_frames(ctx, frames)?;
    let (window, seg_cfg) = ctx.segment_settings(args);
    let (seqs, filled) = SceneSequence::from_records(&records)?;
    if filled > 0 {
        ctx.warn(format!("{filled} seconds without a scene class treated as no-match"));
    }
    let mut out = sink(output)?;
    let mut total = 0;
    for (i, seq) in seqs.iter().enumerate() {
        let det = detect_matches(&smooth_classes(seq, window)?, &seg_cfg);
        for w in &det.warnings {
            ctx.warn(w);
        }
        write_segments_csv(&mut out, &seq.video_id, &det.segments, i == 0)?;
        total += det.segments.len();
    }
    out.flush()?;
    let summary = format!("{total} segments in {} videos", seqs.len());
    if output.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

fn cmd_stats(
    ctx: &Ctx,
    frames: &Path,
    truth: Option<&Path>,
    args: &SegmentArgs,
    output: Option<&Path>,
    timeline_out: Option<&Path>,
) -> Result<()> {
    let records = load_frames(ctx, frames)?;
    let (window, seg_cfg) = ctx.segment_settings(args);
    let (seqs, _) = SceneSequence::from_records(&records)?;
    let truth: Option<SynthTruth> = match truth {
        Some(p) => Some(serde_json::from_str(&fs::read_to_string(resolve_input(p)?)?)?),
        None => None,
    };
    if truth.is_some() && seqs.len() > 1 {
        bail!("a truth file describes a single video, got {}", seqs.len());
    }
    let videos = by_video(&records);
    let mut out = sink(output)?;
    let mut tl_out = timeline_out.map(|p| sink(Some(p))).transpose()?;
    let mut n_matches = 0;
    let mut ratios = Vec::new();
    for (i, seq) in seqs.iter().enumerate() {
        let timeline = match &truth {
            Some(t) => t.timeline.clone(),
            None => {
                let stream = &videos[i].1;
                let phases = heuristic_phases(stream, &ctx.config.preannotate, &ctx.config.timer);
                build_phase_timeline(&phases, seq.t0_s)?
            }
        };
        let illegal = timeline.illegal_transitions().count();
        if illegal > 0 {
            ctx.warn(format!("{}: {illegal} illegal phase transitions", seq.video_id));
        }
        let det = detect_matches(&smooth_classes(seq, window)?, &seg_cfg);
        let stats = compute_statistics(&timeline, &det.segments)?;
        write_stats_csv(&mut out, &seq.video_id, &stats, i == 0)?;
        if let Some(w) = tl_out.as_mut() {
            write_timeline_csv(w, &timeline)?;
        }
        n_matches += stats.matches.len();
        ratios.extend(stats.matches.iter().filter_map(|m| m.effort_pause_ratio));
    }
    out.flush()?;
    if let Some(mut w) = tl_out {
        w.flush()?;
    }
    let mean = if ratios.is_empty() {
        "n/a".to_string()
    } else {
        format!("{:.3}", ratios.iter().sum::<f64>() / ratios.len() as f64)
    };
    let summary = format!("{n_matches} matches, mean effort-pause ratio {mean}");
    if output.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_synth(
    ctx: &Ctx,
    seed: Option<u64>,
    matches: Option<usize>,
    ocr_dropout: Option<f64>,
    flip_noise: Option<f64>,
    embedding: Option<Vec<usize>>,
    no_overlay: bool,
    output: &Path,
) -> Result<()> {
    let mut cfg = ctx.config.synth.clone();
    cfg.seed = seed.unwrap_or(cfg.seed);
    cfg.n_matches = matches.unwrap_or(cfg.n_matches);
    cfg.ocr_dropout = ocr_dropout.unwrap_or(cfg.ocr_dropout);
    cfg.scene_flip_noise = flip_noise.unwrap_or(cfg.scene_flip_noise);
    if embedding.is_some() {
        cfg.embedding_shape = embedding;
    }
    if no_overlay {
        cfg.overlay = false;
    }
    let bundle = generate(&cfg)?;
    let stem = cfg.video_id.clone();
    let [frames, _, _] = bundle.write(output, &stem)?;
    println!(
        "{} matches, {} frames -> {}",
        bundle.truth.matches.len(),
        bundle.frames.len(),
        frames.display()
    );
    Ok(())
}

fn cmd_export(
    ctx: &Ctx,
    frames: &Path,
    entities: &Path,
    image_template: Option<&str>,
    output: Option<&Path>,
) -> Result<()> {
    let records = load_frames(ctx, frames)?;
    let drafts: Vec<EntityPreannotation> = serde_json::from_str(&fs::read_to_string(resolve_input(entities)?)?)?;
    let mut cfg = ctx.config.export.clone();
    if let Some(t) = image_template {
        cfg.image_template = t.to_string();
    }
    let tasks = export_preannotations(&records, &drafts, &cfg)?;
    let mut out = sink(output)?;
    write_tasks(&mut out, &tasks)?;
    let boxes: usize = tasks
        .iter()
        .map(|t| t.predictions.iter().map(|p| p.result.len()).sum::<usize>())
        .sum();
    let summary = format!("{} tasks, {boxes} boxes", tasks.len());
    if output.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    let Some(path) = path else {
        return Ok(RunConfig::default());
    };
    let text = fs::read_to_string(resolve_input(path)?)?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        config: load_config(cli.config.as_deref())?,
        quiet: cli.quiet,
    };
    match cli.command {
        Command::Validate { frames } => cmd_validate(&ctx, &frames),
        Command::Timer { frames, video, output } => cmd_timer(&ctx, &frames, video.as_deref(), output.as_deref()),
        Command::Preannotate {
            frames,
            crops,
            crop_dir,
            entities,
            phases,
        } => cmd_preannotate(
            &ctx,
            &frames,
            crops.as_deref(),
            crop_dir.as_deref(),
            entities.as_deref(),
            phases.as_deref(),
        ),
        Command::Features {
            frames,
            feature,
            clip_s,
            output,
        } => cmd_features(&ctx, &frames, &feature, clip_s, output.as_deref()),
        Command::Train(args) => cmd_train(&ctx, &args),
        Command::Eval {
            frames,
            labels,
            model,
            heuristic,
            target,
            metrics,
        } => cmd_eval(
            &ctx,
            &frames,
            labels.as_deref(),
            model.as_deref(),
            heuristic,
            target.as_deref(),
            metrics.as_deref(),
        ),
        Command::Segment { frames, seg, output } => cmd_segment(&ctx, &frames, &seg, output.as_deref()),
        Command::Stats {
            frames,
            truth,
            seg,
            output,
            timeline,
        } => cmd_stats(
            &ctx,
            &frames,
            truth.as_deref(),
            &seg,
            output.as_deref(),
            timeline.as_deref(),
        ),
        Command::Synth {
            seed,
            matches,
            ocr_dropout,
            flip_noise,
            embedding,
            no_overlay,
            output,
        } => cmd_synth(
            &ctx,
            seed,
            matches,
            ocr_dropout,
            flip_noise,
            embedding,
            no_overlay,
            &output,
        ),
        Command::ExportTasks {
            frames,
            entities,
            image_template,
            output,
        } => cmd_export(&ctx, &frames, &entities, image_template.as_deref(), output.as_deref()),
    }
}

/// 2 when the failure came from the filesystem, 1 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    let io = err.chain().any(|cause| {
        cause.downcast_ref::<io::Error>().is_some()
            || cause.downcast_ref::<tatami_core::Error>().is_some_and(|e| e.is_io())
    });
    if io {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

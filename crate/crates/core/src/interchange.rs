//! File formats shared by extraction, labeling, modeling and segmentation.
//!
//! Frames travel as `.frames.jsonl`: one JSON object per line, one line per
//! sampled frame (1 fps). Box coordinates are normalized to `[0, 1]` with a
//! top-left origin; they are converted to percentages only when exporting
//! Label Studio tasks.
//!
//! Unknown fields are tolerated and reported as warnings. Unknown enum values
//! are hard errors.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::phase::PhaseTriple;
use crate::preannotate::EntityPreannotation;

/// Maximum number of detections a single frame may carry.
pub const MAX_DETECTIONS: usize = 64;

/// Slack allowed when checking that a box stays inside the frame.
pub const BOX_EPS: f64 = 1e-9;

/// Full-scene class of a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneClass {
    NoMatch,
    Match,
    MatchIntro,
    MatchOutro,
}

impl SceneClass {
    pub const ALL: [SceneClass; 4] = [
        SceneClass::NoMatch,
        SceneClass::Match,
        SceneClass::MatchIntro,
        SceneClass::MatchOutro,
    ];

    pub fn index(&self) -> usize {
        *self as usize
    }

    pub fn from_index(i: usize) -> Option<SceneClass> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SceneClass::NoMatch => "no_match",
            SceneClass::Match => "match",
            SceneClass::MatchIntro => "match_intro",
            SceneClass::MatchOutro => "match_outro",
        }
    }
}

impl fmt::Display for SceneClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// What a detection box contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entity {
    PlayerWhite,
    PlayerBlue,
    Referee,
    Other,
}

impl Entity {
    /// Label used in the annotation tool; `None` for [`Entity::Other`].
    pub fn tool_label(&self) -> Option<&'static str> {
        match self {
            Entity::PlayerWhite => Some("white"),
            Entity::PlayerBlue => Some("blue"),
            Entity::Referee => Some("referee"),
            Entity::Other => None,
        }
    }

    pub fn from_tool_label(label: &str) -> Option<Entity> {
        match label {
            "white" => Some(Entity::PlayerWhite),
            "blue" => Some(Entity::PlayerBlue),
            "referee" => Some(Entity::Referee),
            _ => None,
        }
    }
}

/// Axis-aligned box in normalized image coordinates (top-left origin).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionBox {
    pub entity: Entity,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub confidence: f64,
}

impl DetectionBox {
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Height over width in normalized units.
    pub fn aspect(&self) -> f64 {
        self.h / self.w
    }

    /// Geometry and confidence violations, empty when the box is valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let unit = |v: f64| v.is_finite() && (0.0..=1.0).contains(&v);
        if !unit(self.x) || !unit(self.y) {
            out.push(format!("origin ({}, {}) outside [0,1]", self.x, self.y));
        }
        if !(self.w > 0.0 && self.w <= 1.0) || !(self.h > 0.0 && self.h <= 1.0) {
            out.push(format!("size ({}, {}) outside (0,1]", self.w, self.h));
        }
        if self.x + self.w > 1.0 + BOX_EPS {
            out.push(format!("x+w = {} overflows the frame", self.x + self.w));
        }
        if self.y + self.h > 1.0 + BOX_EPS {
            out.push(format!("y+h = {} overflows the frame", self.y + self.h));
        }
        if !unit(self.confidence) {
            out.push(format!("confidence {} outside [0,1]", self.confidence));
        }
        out
    }
}

/// Dense row-major tensor exported from a detector layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTensor")]
pub struct EmbeddingTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Deserialize)]
struct RawTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl TryFrom<RawTensor> for EmbeddingTensor {
    type Error = Error;

    fn try_from(raw: RawTensor) -> Result<Self> {
        EmbeddingTensor::new(raw.shape, raw.data)
    }
}

impl EmbeddingTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::Feature(format!(
                "tensor shape {shape:?} must be non-empty with positive extents"
            )));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::EmbeddingLength {
                shape,
                expected,
                actual: data.len(),
            });
        }
        Ok(EmbeddingTensor { shape, data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// One sampled video frame and everything extracted from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub video_id: String,
    pub mat_id: u8,
    pub frame_index: u64,
    pub timestamp_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_class: Option<SceneClass>,
    #[serde(default)]
    pub detections: Vec<DetectionBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingTensor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timer_raw: Option<String>,
}

impl FrameRecord {
    pub fn locator(&self) -> FrameLocator {
        FrameLocator {
            video_id: self.video_id.clone(),
            frame_index: self.frame_index,
        }
    }
}

/// Identifies a frame across files.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FrameLocator {
    pub video_id: String,
    pub frame_index: u64,
}

impl fmt::Display for FrameLocator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.video_id, self.frame_index)
    }
}

/// A located diagnostic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub locator: String,
    pub message: String,
}

impl Finding {
    pub fn new(locator: impl Into<String>, message: impl Into<String>) -> Self {
        Finding {
            locator: locator.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.locator, self.message)
    }
}

const FRAME_FIELDS: &[&str] = &[
    "video_id",
    "mat_id",
    "frame_index",
    "timestamp_s",
    "scene_class",
    "detections",
    "embedding",
    "timer_raw",
];
const BOX_FIELDS: &[&str] = &["entity", "x", "y", "w", "h", "confidence"];
const TENSOR_FIELDS: &[&str] = &["shape", "data"];

fn unknown_fields(value: &Value, known: &[&str], path: &str, out: &mut Vec<String>) {
    if let Value::Object(map) = value {
        for key in map.keys() {
            if !known.contains(&key.as_str()) {
                out.push(format!("unknown field `{path}{key}` ignored"));
            }
        }
    }
}

/// Parses one `.frames.jsonl` line. Returns the record and any warnings about
/// ignored fields.
pub fn parse_frame_line(line: &str, line_no: usize) -> Result<(FrameRecord, Vec<String>)> {
    let malformed = |message: String| Error::Malformed { line: line_no, message };
    let value: Value = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    if !value.is_object() {
        return Err(malformed("expected a JSON object".into()));
    }
    let mut notes = Vec::new();
    unknown_fields(&value, FRAME_FIELDS, "", &mut notes);
    if let Some(Value::Array(boxes)) = value.get("detections") {
        for (i, b) in boxes.iter().enumerate() {
            unknown_fields(b, BOX_FIELDS, &format!("detections[{i}]."), &mut notes);
        }
    }
    if let Some(t) = value.get("embedding") {
        unknown_fields(t, TENSOR_FIELDS, "embedding.", &mut notes);
    }
    let record: FrameRecord = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
    Ok((record, notes))
}

/// Streaming reader over a `.frames.jsonl` source. Blank lines are skipped.
pub struct FrameReader<R> {
    lines: std::io::Lines<R>,
    line_no: usize,
    warnings: Vec<Finding>,
}

impl<R: BufRead> FrameReader<R> {
    pub fn new(reader: R) -> Self {
        FrameReader {
            lines: reader.lines(),
            line_no: 0,
            warnings: Vec::new(),
        }
    }

    /// Warnings accumulated so far.
    pub fn warnings(&self) -> &[Finding] {
        &self.warnings
    }

    pub fn into_warnings(self) -> Vec<Finding> {
        self.warnings
    }
}

impl<R: BufRead> Iterator for FrameReader<R> {
    type Item = Result<FrameRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(line) => line,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(parse_frame_line(&line, self.line_no).map(|(record, notes)| {
                let locator = format!("line {}", self.line_no);
                self.warnings
                    .extend(notes.into_iter().map(|m| Finding::new(locator.clone(), m)));
                record
            }));
        }
    }
}

/// Parsed frames plus the warnings raised while reading them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParsedFrames {
    pub records: Vec<FrameRecord>,
    pub warnings: Vec<Finding>,
}

/// Reads every record of a `.frames.jsonl` stream, in file order.
pub fn parse_frame_records<R: BufRead>(reader: R) -> Result<ParsedFrames> {
    let mut frames = FrameReader::new(reader);
    let mut records = Vec::new();
    for record in frames.by_ref() {
        records.push(record?);
    }
    Ok(ParsedFrames {
        records,
        warnings: frames.into_warnings(),
    })
}

pub fn read_frames_file(path: &Path) -> Result<ParsedFrames> {
    parse_frame_records(BufReader::new(File::open(path)?))
}

pub fn write_frame_records<W: Write>(mut out: W, records: &[FrameRecord]) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_frames_file(path: &Path, records: &[FrameRecord]) -> Result<()> {
    write_frame_records(BufWriter::new(File::create(path)?), records)
}

/// Result of [`validate_sequence`]. The input is schema-conformant exactly
/// when `errors` is empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
}

impl ValidationReport {
    pub fn error_count(&self) -> usize {
        self.errors.len()
    }

    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Checks ordering within each video stream and the geometry of every box.
///
/// Each offending box contributes a single error, whatever the number of
/// constraints it breaks.
pub fn validate_sequence(records: &[FrameRecord]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut last: HashMap<&str, (u64, f64)> = HashMap::new();

    for (i, r) in records.iter().enumerate() {
        let loc = format!("record {} ({})", i + 1, r.locator());
        if !(r.timestamp_s.is_finite() && r.timestamp_s >= 0.0) {
            report
                .errors
                .push(Finding::new(&loc, format!("invalid timestamp {}", r.timestamp_s)));
        }
        if let Some(&(prev_index, prev_ts)) = last.get(r.video_id.as_str()) {
            if r.frame_index == prev_index {
                report
                    .errors
                    .push(Finding::new(&loc, format!("duplicate frame_index {}", r.frame_index)));
            } else if r.frame_index < prev_index {
                report.errors.push(Finding::new(
                    &loc,
                    format!("frame_index {} follows {}", r.frame_index, prev_index),
                ));
            }
            if r.timestamp_s < prev_ts {
                report.errors.push(Finding::new(
                    &loc,
                    format!("timestamp {} decreases from {}", r.timestamp_s, prev_ts),
                ));
            }
        }
        last.insert(&r.video_id, (r.frame_index, r.timestamp_s));

        if r.detections.len() > MAX_DETECTIONS {
            report.errors.push(Finding::new(
                &loc,
                format!("{} detections exceed the limit of {MAX_DETECTIONS}", r.detections.len()),
            ));
        }
        for (j, b) in r.detections.iter().enumerate() {
            let problems = b.problems();
            if !problems.is_empty() {
                report
                    .errors
                    .push(Finding::new(&loc, format!("box {j}: {}", problems.join("; "))));
            }
        }
        if let Some(t) = &r.embedding {
            let expected: usize = t.shape().iter().product();
            if expected != t.len() {
                report.errors.push(Finding::new(&loc, "embedding length mismatch"));
            }
        }
        if let Some(raw) = &r.timer_raw {
            if crate::timer::parse_timer_string(raw).is_none() {
                report
                    .warnings
                    .push(Finding::new(&loc, format!("timer text {raw:?} does not parse")));
            }
        }
    }
    report
}

/// Human-annotated interval of a clip, times relative to the clip start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalAnnotation {
    pub clip_id: String,
    pub start_s: f64,
    pub end_s: f64,
    pub is_match: bool,
    pub is_active: bool,
    pub is_standing: bool,
}

impl IntervalAnnotation {
    pub fn new(clip_id: impl Into<String>, start_s: f64, end_s: f64, phase: PhaseTriple) -> Self {
        IntervalAnnotation {
            clip_id: clip_id.into(),
            start_s,
            end_s,
            is_match: phase.is_match(),
            is_active: phase.is_active(),
            is_standing: phase.is_standing(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.start_s.is_finite() && self.end_s.is_finite() && self.start_s < self.end_s) {
            return Err(Error::Annotation(format!(
                "{}: interval [{}, {}) is empty or not finite",
                self.clip_id, self.start_s, self.end_s
            )));
        }
        self.phase().map(|_| ()).map_err(|_| {
            Error::Annotation(format!(
                "{}: interval [{}, {}) breaks standing => active => match",
                self.clip_id, self.start_s, self.end_s
            ))
        })
    }

    pub fn phase(&self) -> Result<PhaseTriple> {
        PhaseTriple::new(self.is_match, self.is_active, self.is_standing)
    }
}

/// Reads an interval annotation file (a single JSON array) and checks every
/// entry.
pub fn read_annotations<R: std::io::Read>(reader: R) -> Result<Vec<IntervalAnnotation>> {
    let items: Vec<IntervalAnnotation> = serde_json::from_reader(reader)?;
    for a in &items {
        a.check()?;
    }
    Ok(items)
}

pub fn read_annotations_file(path: &Path) -> Result<Vec<IntervalAnnotation>> {
    read_annotations(BufReader::new(File::open(path)?))
}

pub fn write_annotations_file(path: &Path, items: &[IntervalAnnotation]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, items)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Groups annotations by clip, preserving first-seen clip order.
pub fn annotations_by_clip(items: &[IntervalAnnotation]) -> Vec<(String, Vec<IntervalAnnotation>)> {
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<IntervalAnnotation>> = BTreeMap::new();
    for a in items {
        if !groups.contains_key(&a.clip_id) {
            order.push(a.clip_id.clone());
        }
        groups.entry(a.clip_id.clone()).or_default().push(a.clone());
    }
    order
        .into_iter()
        .map(|id| {
            let g = groups.remove(&id).unwrap_or_default();
            (id, g)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Label Studio export

/// Box geometry in the annotation tool's percent units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PercentRect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl PercentRect {
    pub fn from_normalized(b: &DetectionBox) -> Self {
        PercentRect {
            x: b.x * 100.0,
            y: b.y * 100.0,
            width: b.w * 100.0,
            height: b.h * 100.0,
        }
    }

    /// Returns `(x, y, w, h)` in normalized units.
    pub fn to_normalized(&self) -> (f64, f64, f64, f64) {
        (self.x / 100.0, self.y / 100.0, self.width / 100.0, self.height / 100.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskData {
    pub image: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RectValue {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
    pub rotation: f64,
    pub rectanglelabels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultItem {
    pub id: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub from_name: String,
    pub to_name: String,
    pub value: RectValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub model_version: String,
    pub result: Vec<ResultItem>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub data: TaskData,
    pub predictions: Vec<Prediction>,
}

/// Settings for [`export_preannotations`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExportConfig {
    /// Image URL template; `{video_id}` and `{frame_index}` (zero-padded to
    /// six digits) are substituted.
    pub image_template: String,
    pub model_version: String,
    pub from_name: String,
    pub to_name: String,
}

impl Default for ExportConfig {
    fn default() -> Self {
        ExportConfig {
            image_template: "/data/local-files/?d={video_id}/{frame_index}.jpg".into(),
            model_version: "heuristic".into(),
            from_name: "label".into(),
            to_name: "image".into(),
        }
    }
}

impl ExportConfig {
    pub fn image_url(&self, loc: &FrameLocator) -> String {
        self.image_template
            .replace("{video_id}", &loc.video_id)
            .replace("{frame_index}", &format!("{:06}", loc.frame_index))
    }
}

/// Builds Label Studio import tasks, one per pre-annotated frame, in the order
/// the frames appear in `records`.
pub fn export_preannotations(
    records: &[FrameRecord],
    preannotations: &[EntityPreannotation],
    config: &ExportConfig,
) -> Result<Vec<Task>> {
    let known: HashMap<FrameLocator, usize> = records.iter().enumerate().map(|(i, r)| (r.locator(), i)).collect();

    let mut per_frame: BTreeMap<usize, Vec<&EntityPreannotation>> = BTreeMap::new();
    for p in preannotations {
        let Some(&pos) = known.get(&p.frame) else {
            return Err(Error::DanglingFrame {
                video_id: p.frame.video_id.clone(),
                frame_index: p.frame.frame_index,
            });
        };
        per_frame.entry(pos).or_default().push(p);
    }

    let mut tasks = Vec::with_capacity(per_frame.len());
    for (pos, group) in per_frame {
        let loc = records[pos].locator();
        let mut result = Vec::new();
        for p in group {
            for a in &p.assignments {
                let label = a
                    .entity
                    .tool_label()
                    .ok_or_else(|| Error::Annotation(format!("{loc}: entity `other` has no tool label")))?;
                let rect = PercentRect::from_normalized(&a.detection);
                result.push(ResultItem {
                    id: format!("{}-{}-{}", loc.video_id, loc.frame_index, result.len()),
                    kind: "rectanglelabels".into(),
                    from_name: config.from_name.clone(),
                    to_name: config.to_name.clone(),
                    value: RectValue {
                        x: rect.x,
                        y: rect.y,
                        width: rect.width,
                        height: rect.height,
                        rotation: 0.0,
                        rectanglelabels: vec![label.to_string()],
                    },
                    score: Some(a.detection.confidence),
                });
            }
        }
        tasks.push(Task {
            data: TaskData {
                image: config.image_url(&loc),
            },
            predictions: vec![Prediction {
                model_version: config.model_version.clone(),
                result,
            }],
        });
    }
    Ok(tasks)
}

pub fn write_tasks<W: Write>(mut out: W, tasks: &[Task]) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, tasks)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

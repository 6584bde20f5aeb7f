//! Rule-based pre-annotators.
//!
//! Entity drafts take the three largest detections and name each one by a
//! per-pixel colour vote (white gi, blue gi, black referee suit). Phase
//! drafts combine the scoreboard timer with the aspect ratio of the two
//! player boxes.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interchange::{DetectionBox, Entity, FrameLocator, FrameRecord};
pub use crate::phase::PhaseTriple;
use crate::timer::{self, TimerConfig, TimerSeries};

/// Number of boxes kept per frame.
pub const TOP_K: usize = 3;

/// RGB crop of one detection, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelCrop {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
}

impl PixelCrop {
    pub fn new(width: u32, height: u32, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyCrop);
        }
        if pixels.len() != width as usize * height as usize {
            return Err(Error::Dimension {
                expected: width as usize * height as usize,
                actual: pixels.len(),
            });
        }
        Ok(PixelCrop { width, height, pixels })
    }

    pub fn uniform(width: u32, height: u32, rgb: [u8; 3]) -> Self {
        PixelCrop {
            width,
            height,
            pixels: vec![rgb; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }
}

/// Reference colours, in vote order: white player, blue player, referee.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorAnchors {
    pub white: [u8; 3],
    pub blue: [u8; 3],
    pub referee: [u8; 3],
}

impl Default for ColorAnchors {
    fn default() -> Self {
        ColorAnchors {
            white: [255, 255, 255],
            blue: [0, 0, 128],
            referee: [0, 0, 0],
        }
    }
}

impl ColorAnchors {
    const ENTITIES: [Entity; 3] = [Entity::PlayerWhite, Entity::PlayerBlue, Entity::Referee];

    fn nearest(&self, px: [u8; 3]) -> usize {
        let dist = |anchor: [u8; 3]| -> u32 {
            (0..3)
                .map(|c| {
                    let d = px[c] as i32 - anchor[c] as i32;
                    (d * d) as u32
                })
                .sum()
        };
        let d = [dist(self.white), dist(self.blue), dist(self.referee)];
        // strict `<` keeps the earlier anchor on ties
        let mut best = 0;
        for i in 1..3 {
            if d[i] < d[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreannotateConfig {
    pub anchors: ColorAnchors,
    /// Detections below this confidence are ignored before the top-3 cut.
    pub min_confidence: f64,
    /// A player box counts as upright when its pixel height/width exceeds this.
    pub standing_ratio: f64,
    /// Frame width over height in pixels; converts normalized box aspect to
    /// pixel aspect.
    pub frame_aspect: f64,
    /// Additionally require two players and a referee before calling a match.
    pub require_entities: bool,
}

impl Default for PreannotateConfig {
    fn default() -> Self {
        PreannotateConfig {
            anchors: ColorAnchors::default(),
            min_confidence: 0.0,
            standing_ratio: 1.0,
            frame_aspect: 1.0,
            require_entities: false,
        }
    }
}

/// Outcome of a colour vote: the winning entity and the share of pixels
/// nearest each anchor (white, blue, referee).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorVote {
    pub entity: Entity,
    pub votes: [f64; 3],
}

/// Assigns each pixel to its nearest anchor (Euclidean RGB) and returns the
/// majority. Ties, both per pixel and in the final count, go to white, then
/// blue, then referee.
pub fn classify_crop_color(crop: &PixelCrop, anchors: &ColorAnchors) -> Result<ColorVote> {
    if crop.pixels.is_empty() {
        return Err(Error::EmptyCrop);
    }
    let mut counts = [0usize; 3];
    for &px in &crop.pixels {
        counts[anchors.nearest(px)] += 1;
    }
    let mut best = 0;
    for i in 1..3 {
        if counts[i] > counts[best] {
            best = i;
        }
    }
    let n = crop.pixels.len() as f64;
    Ok(ColorVote {
        entity: ColorAnchors::ENTITIES[best],
        votes: counts.map(|c| c as f64 / n),
    })
}

/// One kept box with its assigned entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub detection: DetectionBox,
    pub entity: Entity,
    pub votes: [f64; 3],
}

/// Draft entity labels for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityPreannotation {
    pub frame: FrameLocator,
    pub assignments: Vec<Assignment>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn by_area_desc(a: &DetectionBox, b: &DetectionBox) -> Ordering {
    b.area()
        .total_cmp(&a.area())
        .then(a.x.total_cmp(&b.x))
        .then(a.y.total_cmp(&b.y))
        .then(a.w.total_cmp(&b.w))
        .then(a.h.total_cmp(&b.h))
}

/// Keeps the three largest boxes (area ties broken by `(x, y, w, h)`) and
/// labels each one independently by colour vote. Two boxes voting for the same
/// entity are kept and flagged.
pub fn select_entities(
    frame: FrameLocator,
    detections: &[DetectionBox],
    crops: &[PixelCrop],
    config: &PreannotateConfig,
) -> Result<EntityPreannotation> {
    if detections.len() != crops.len() {
        return Err(Error::Dimension {
            expected: detections.len(),
            actual: crops.len(),
        });
    }
    let mut paired: Vec<(&DetectionBox, &PixelCrop)> = detections
        .iter()
        .zip(crops)
        .filter(|(d, _)| d.confidence >= config.min_confidence)
        .collect();
    paired.sort_by(|a, b| by_area_desc(a.0, b.0));
    paired.truncate(TOP_K);

    let mut assignments = Vec::with_capacity(paired.len());
    for (det, crop) in paired {
        let vote = classify_crop_color(crop, &config.anchors)?;
        assignments.push(Assignment {
            detection: DetectionBox {
                entity: vote.entity,
                ..*det
            },
            entity: vote.entity,
            votes: vote.votes,
        });
    }

    let mut warnings = Vec::new();
    for entity in ColorAnchors::ENTITIES {
        let n = assignments.iter().filter(|a| a.entity == entity).count();
        if n > 1 {
            warnings.push(format!("{n} boxes assigned to {entity:?}"));
        }
    }
    Ok(EntityPreannotation {
        frame,
        assignments,
        warnings,
    })
}

/// Standing when both player boxes are taller than wide (pixel aspect
/// strictly above `standing_ratio`). `None` when either box is missing.
pub fn standing_heuristic(
    white: Option<&DetectionBox>,
    blue: Option<&DetectionBox>,
    config: &PreannotateConfig,
) -> Option<bool> {
    let upright = |b: &DetectionBox| b.aspect() / config.frame_aspect > config.standing_ratio;
    Some(upright(white?) && upright(blue?))
}

/// What the phase heuristic sees for one second.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SecondObservation {
    /// The raw timer text for this second parsed successfully.
    pub timer_readable: bool,
    /// Step of the cleaned timer from this second to the next.
    pub derivative: Option<i64>,
    pub white: Option<DetectionBox>,
    pub blue: Option<DetectionBox>,
    pub referee: bool,
}

impl SecondObservation {
    /// Picks the most confident box of each entity from a frame.
    pub fn with_boxes(mut self, detections: &[DetectionBox]) -> Self {
        let best = |entity: Entity| {
            detections
                .iter()
                .filter(|d| d.entity == entity)
                .max_by(|a, b| a.confidence.total_cmp(&b.confidence))
                .copied()
        };
        self.white = best(Entity::PlayerWhite);
        self.blue = best(Entity::PlayerBlue);
        self.referee = best(Entity::Referee).is_some();
        self
    }
}

/// Timer and box rule: a readable timer means a match, a ticking timer
/// (`-1` per second) means active combat, and two upright player boxes during
/// active combat mean standing. The chain holds by construction.
pub fn phase_heuristic(obs: &SecondObservation, config: &PreannotateConfig) -> PhaseTriple {
    let mut is_match = obs.timer_readable;
    if config.require_entities {
        is_match &= obs.white.is_some() && obs.blue.is_some() && obs.referee;
    }
    let is_active = is_match && obs.derivative == Some(-1);
    let is_standing = is_active && standing_heuristic(obs.white.as_ref(), obs.blue.as_ref(), config).unwrap_or(false);
    PhaseTriple::project(is_match, is_active, is_standing)
}

/// Runs the phase heuristic over a single video stream sampled at 1 Hz,
/// returning one triple per second from the first record's timestamp.
pub fn heuristic_phases(
    records: &[FrameRecord],
    config: &PreannotateConfig,
    timer_config: &TimerConfig,
) -> Vec<PhaseTriple> {
    let raw = TimerSeries::from_records(records, timer_config);
    let steps = timer::interpolate_series(&raw)
        .ok()
        .and_then(|s| timer::derivative(&s).ok());
    let mut observations: Vec<SecondObservation> = raw
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| SecondObservation {
            timer_readable: v.is_some(),
            derivative: steps.as_ref().and_then(|d| d.values.get(i).copied().flatten()),
            ..SecondObservation::default()
        })
        .collect();
    if let Some(first) = records.first() {
        for r in records {
            let slot = (r.timestamp_s - first.timestamp_s).round().max(0.0) as usize;
            if let Some(obs) = observations.get_mut(slot) {
                *obs = std::mem::take(obs).with_boxes(&r.detections);
            }
        }
    }
    observations.iter().map(|o| phase_heuristic(o, config)).collect()
}

/// Source of per-detection pixel crops.
pub trait CropProvider {
    /// Crops for every detection of the frame, in detection order, or `None`
    /// when the frame has no crops available.
    fn crops(&self, frame: &FrameLocator, detections: usize) -> Result<Option<Vec<PixelCrop>>>;
}

#[derive(Debug, Deserialize)]
struct InlineCropLine {
    video_id: String,
    frame_index: u64,
    box_index: usize,
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
}

/// Crops supplied inline as JSON lines of
/// `{video_id, frame_index, box_index, width, height, pixels: [[r,g,b], ...]}`.
#[derive(Debug, Default)]
pub struct InlineCrops {
    crops: HashMap<(FrameLocator, usize), PixelCrop>,
}

impl InlineCrops {
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut crops = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: InlineCropLine = serde_json::from_str(&line).map_err(|e| Error::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
            let crop = PixelCrop::new(raw.width, raw.height, raw.pixels).map_err(|e| Error::Malformed {
                line: i + 1,
                message: e.to_string(),
            })?;
            let loc = FrameLocator {
                video_id: raw.video_id,
                frame_index: raw.frame_index,
            };
            crops.insert((loc, raw.box_index), crop);
        }
        Ok(InlineCrops { crops })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_reader(BufReader::new(File::open(path)?))
    }

    pub fn insert(&mut self, frame: FrameLocator, box_index: usize, crop: PixelCrop) {
        self.crops.insert((frame, box_index), crop);
    }
}

impl CropProvider for InlineCrops {
    fn crops(&self, frame: &FrameLocator, detections: usize) -> Result<Option<Vec<PixelCrop>>> {
        let mut out = Vec::with_capacity(detections);
        for i in 0..detections {
            match self.crops.get(&(frame.clone(), i)) {
                Some(c) => out.push(c.clone()),
                None => return Ok(None),
            }
        }
        Ok(Some(out))
    }
}

/// Crops stored as images at `<root>/<video_id>/<frame_index:06>_<box>.png`.
#[derive(Debug, Clone)]
pub struct ImageDirCrops {
    root: PathBuf,
}

impl ImageDirCrops {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ImageDirCrops { root: root.into() }
    }

    pub fn path_for(&self, frame: &FrameLocator, box_index: usize) -> PathBuf {
        self.root
            .join(&frame.video_id)
            .join(format!("{:06}_{box_index}.png", frame.frame_index))
    }
}

impl CropProvider for ImageDirCrops {
    fn crops(&self, frame: &FrameLocator, detections: usize) -> Result<Option<Vec<PixelCrop>>> {
        let mut out = Vec::with_capacity(detections);
        for i in 0..detections {
            let path = self.path_for(frame, i);
            if !path.exists() {
                return Ok(None);
            }
            let img = image::open(&path)?.to_rgb8();
            let (w, h) = img.dimensions();
            let pixels = img.pixels().map(|p| p.0).collect();
            out.push(PixelCrop::new(w, h, pixels)?);
        }
        Ok(Some(out))
    }
}

/// Entity drafts for every frame that has detections and crops available.
pub fn preannotate_entities(
    records: &[FrameRecord],
    provider: &dyn CropProvider,
    config: &PreannotateConfig,
) -> Result<Vec<EntityPreannotation>> {
    let mut out = Vec::new();
    for r in records {
        if r.detections.is_empty() {
            continue;
        }
        let loc = r.locator();
        if let Some(crops) = provider.crops(&loc, r.detections.len())? {
            out.push(select_entities(loc, &r.detections, &crops, config)?);
        }
    }
    Ok(out)
}

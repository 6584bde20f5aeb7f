//! Match segmentation from per-second scene classes, the four-state phase
//! timeline, and per-match time-motion statistics.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interchange::{FrameRecord, SceneClass};
use crate::phase::{PhaseState, PhaseTriple};

pub const DEFAULT_WINDOW: usize = 5;
pub const DEFAULT_MIN_MATCH_S: f64 = 30.0;

/// One scene class per second of a video.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneSequence {
    pub video_id: String,
    pub t0_s: u64,
    classes: Vec<SceneClass>,
}

impl SceneSequence {
    pub fn new(video_id: impl Into<String>, t0_s: u64, classes: Vec<SceneClass>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::Empty("scene sequence"));
        }
        Ok(SceneSequence {
            video_id: video_id.into(),
            t0_s,
            classes,
        })
    }

    pub fn classes(&self) -> &[SceneClass] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// One sequence per video, in first-seen order. Seconds are slotted by
    /// rounded timestamp; seconds with no frame or no scene class count as
    /// no-match. Returns the sequences and the number of such filled seconds.
    pub fn from_records(records: &[FrameRecord]) -> Result<(Vec<SceneSequence>, usize)> {
        let mut order: Vec<&str> = Vec::new();
        let mut by_video: BTreeMap<&str, Vec<&FrameRecord>> = BTreeMap::new();
        for r in records {
            let entry = by_video.entry(r.video_id.as_str()).or_default();
            if entry.is_empty() {
                order.push(&r.video_id);
            }
            entry.push(r);
        }
        let mut filled = 0;
        let mut out = Vec::new();
        for video in order {
            let frames = &by_video[video];
            let t0 = frames.iter().map(|r| r.timestamp_s).fold(f64::INFINITY, f64::min);
            let t0 = t0.max(0.0).round();
            let mut slots: Vec<Option<SceneClass>> = Vec::new();
            for r in frames {
                let i = (r.timestamp_s - t0).round().max(0.0) as usize;
                if i >= slots.len() {
                    slots.resize(i + 1, None);
                }
                if r.scene_class.is_some() {
                    slots[i] = r.scene_class;
                }
            }
            filled += slots.iter().filter(|s| s.is_none()).count();
            let classes = slots.into_iter().map(|s| s.unwrap_or(SceneClass::NoMatch)).collect();
            out.push(SceneSequence::new(video, t0 as u64, classes)?);
        }
        Ok((out, filled))
    }
}

/// Sliding-window majority vote of odd width `w`, truncated at the edges.
///
/// Ties go to the previous smoothed value when it is among the tied classes,
/// then to the raw value, then to the lowest class index.
pub fn smooth_classes(seq: &SceneSequence, w: usize) -> Result<SceneSequence> {
    if w == 0 || w.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "smoothing window must be odd and positive, got {w}"
        )));
    }
    let raw = &seq.classes;
    let n = raw.len();
    let h = w / 2;
    let mut counts = [0usize; 4];
    for c in &raw[..n.min(h + 1)] {
        counts[c.index()] += 1;
    }
    let mut out: Vec<SceneClass> = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            if i + h < n {
                counts[raw[i + h].index()] += 1;
            }
            if i > h {
                counts[raw[i - h - 1].index()] -= 1;
            }
        }
        let best = *counts.iter().max().expect("four classes");
        let tied = |c: SceneClass| counts[c.index()] == best;
        let pick = match out.last() {
            Some(&prev) if tied(prev) => prev,
            _ if tied(raw[i]) => raw[i],
            _ => SceneClass::ALL
                .into_iter()
                .find(|&c| tied(c))
                .expect("some class is maximal"),
        };
        out.push(pick);
    }
    Ok(SceneSequence {
        video_id: seq.video_id.clone(),
        t0_s: seq.t0_s,
        classes: out,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Anchor {
    /// Bounded by the intro and outro overlays.
    Overlay,
    /// Bounded by match/no-match transitions.
    Transition,
}

impl Anchor {
    pub fn as_str(&self) -> &'static str {
        match self {
            Anchor::Overlay => "overlay",
            Anchor::Transition => "transition",
        }
    }
}

/// A recovered match, `[start_s, end_s)` in video seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchSegment {
    pub start_s: f64,
    pub end_s: f64,
    pub anchor: Anchor,
}

impl MatchSegment {
    pub fn length_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub min_match_s: f64,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            min_match_s: DEFAULT_MIN_MATCH_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Detection {
    pub segments: Vec<MatchSegment>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
struct Run {
    class: SceneClass,
    start: usize,
    end: usize,
}

fn runs(classes: &[SceneClass]) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::new();
    for (i, &c) in classes.iter().enumerate() {
        match out.last_mut() {
            Some(r) if r.class == c => r.end = i + 1,
            _ => out.push(Run {
                class: c,
                start: i,
                end: i + 1,
            }),
        }
    }
    out
}

/// Finds matches in a (smoothed) scene sequence.
///
/// An intro run paired with the next outro run, before any other intro,
/// spans one overlay-anchored match from the first intro second through the
/// last outro second. Seconds not claimed that way fall back to transition
/// anchoring: every maximal run of non-no-match seconds is a candidate.
/// Candidates shorter than `min_match_s` or without a single match-class
/// second are dropped.
pub fn detect_matches(seq: &SceneSequence, config: &SegmentConfig) -> Detection {
    let classes = &seq.classes;
    let runs = runs(classes);
    let mut warnings = Vec::new();
    let mut spans: Vec<(usize, usize, Anchor)> = Vec::new();
    let mut claimed = vec![false; classes.len()];

    let mut i = 0;
    while i < runs.len() {
        if runs[i].class != SceneClass::MatchIntro {
            i += 1;
            continue;
        }
        let partner = runs[i + 1..]
            .iter()
            .position(|r| matches!(r.class, SceneClass::MatchIntro | SceneClass::MatchOutro))
            .map(|off| i + 1 + off)
            .filter(|&j| runs[j].class == SceneClass::MatchOutro);
        match partner {
            Some(j) => {
                let (start, end) = (runs[i].start, runs[j].end);
                claimed[start..end].iter_mut().for_each(|c| *c = true);
                spans.push((start, end, Anchor::Overlay));
                i = j + 1;
            }
            None => {
                warnings.push(format!(
                    "{}: intro at {} s has no outro",
                    seq.video_id,
                    seq.t0_s + runs[i].start as u64
                ));
                i += 1;
            }
        }
    }
    for r in &runs {
        if r.class == SceneClass::MatchOutro && !claimed[r.start] {
            warnings.push(format!(
                "{}: outro at {} s has no preceding intro",
                seq.video_id,
                seq.t0_s + r.start as u64
            ));
        }
    }

    let mut start: Option<usize> = None;
    for t in 0..=classes.len() {
        let open = t < classes.len() && !claimed[t] && classes[t] != SceneClass::NoMatch;
        match (open, start) {
            (true, None) => start = Some(t),
            (false, Some(s)) => {
                spans.push((s, t, Anchor::Transition));
                start = None;
            }
            _ => {}
        }
    }

    spans.sort_by_key(|s| s.0);
    let segments = spans
        .into_iter()
        .filter(|&(s, e, _)| (e - s) as f64 >= config.min_match_s && classes[s..e].contains(&SceneClass::Match))
        .map(|(s, e, anchor)| MatchSegment {
            start_s: (seq.t0_s + s as u64) as f64,
            end_s: (seq.t0_s + e as u64) as f64,
            anchor,
        })
        .collect();
    Detection { segments, warnings }
}

/// Whether the state diagram allows moving from `from` to `to`.
pub fn is_legal_transition(from: PhaseState, to: PhaseState) -> bool {
    use PhaseState::*;
    from == to
        || matches!(
            (from, to),
            (NoMatch, Paused)
                | (Paused, NoMatch)
                | (Paused, Standing)
                | (Standing, Paused)
                | (Standing, Ground)
                | (Ground, Standing)
                | (Ground, Paused)
        )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    /// Index of the first second in the new state.
    pub second: usize,
    pub from: PhaseState,
    pub to: PhaseState,
    pub legal: bool,
}

/// Per-second phases plus a log of every state change. Illegal changes are
/// recorded, not repaired.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimeline {
    pub t0_s: u64,
    pub triples: Vec<PhaseTriple>,
    pub transitions: Vec<Transition>,
}

impl PhaseTimeline {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn states(&self) -> Vec<PhaseState> {
        self.triples.iter().map(PhaseTriple::state).collect()
    }

    pub fn illegal_transitions(&self) -> impl Iterator<Item = &Transition> {
        self.transitions.iter().filter(|t| !t.legal)
    }

    /// Seconds spent in each state, in [`PhaseState::ALL`] order.
    pub fn state_seconds(&self) -> [usize; 4] {
        count_states(&self.triples)
    }
}

fn count_states(triples: &[PhaseTriple]) -> [usize; 4] {
    let mut counts = [0; 4];
    for t in triples {
        counts[t.state().index()] += 1;
    }
    counts
}

pub fn build_phase_timeline(triples: &[PhaseTriple], t0_s: u64) -> Result<PhaseTimeline> {
    if triples.is_empty() {
        return Err(Error::Empty("phase timeline"));
    }
    let transitions = triples
        .windows(2)
        .enumerate()
        .filter_map(|(i, w)| {
            let (from, to) = (w[0].state(), w[1].state());
            (from != to).then(|| Transition {
                second: i + 1,
                from,
                to,
                legal: is_legal_transition(from, to),
            })
        })
        .collect();
    Ok(PhaseTimeline {
        t0_s,
        triples: triples.to_vec(),
        transitions,
    })
}

/// Time-motion statistics of one match. Ratios with a zero denominator are
/// `None`. Transition and ending counts are proxies for throws and
/// pins/submissions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchStats {
    pub start_s: f64,
    pub end_s: f64,
    pub length_s: f64,
    pub no_match_s: usize,
    pub paused_s: usize,
    pub standing_s: usize,
    pub ground_s: usize,
    pub effort_pause_ratio: Option<f64>,
    pub standing_ground_ratio: Option<f64>,
    pub standing_to_ground_transitions: usize,
    /// 1 when the last active second is on the ground.
    pub ground_endings: usize,
}

impl MatchStats {
    pub fn active_s(&self) -> usize {
        self.standing_s + self.ground_s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TournamentStats {
    pub matches: Vec<MatchStats>,
    pub mean_effort_pause_ratio: Option<f64>,
    pub mean_standing_ground_ratio: Option<f64>,
    pub standing_to_ground_transitions: usize,
    pub ground_endings: usize,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn compute_statistics(timeline: &PhaseTimeline, segments: &[MatchSegment]) -> Result<TournamentStats> {
    let t0 = timeline.t0_s as f64;
    let mut matches = Vec::with_capacity(segments.len());
    for seg in segments {
        let (a, b) = ((seg.start_s - t0).round(), (seg.end_s - t0).round());
        if a < 0.0 || b > timeline.len() as f64 || a >= b {
            return Err(Error::Segment(format!(
                "segment [{}, {}) outside timeline [{}, {})",
                seg.start_s,
                seg.end_s,
                t0,
                t0 + timeline.len() as f64
            )));
        }
        let span = &timeline.triples[a as usize..b as usize];
        let [no_match_s, paused_s, standing_s, ground_s] = count_states(span);
        let states: Vec<PhaseState> = span.iter().map(PhaseTriple::state).collect();
        let standing_to_ground_transitions = states
            .windows(2)
            .filter(|w| w[0] == PhaseState::Standing && w[1] == PhaseState::Ground)
            .count();
        let last_active = states
            .iter()
            .rev()
            .find(|s| matches!(s, PhaseState::Standing | PhaseState::Ground));
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        matches.push(MatchStats {
            start_s: seg.start_s,
            end_s: seg.end_s,
            length_s: seg.length_s(),
            no_match_s,
            paused_s,
            standing_s,
            ground_s,
            effort_pause_ratio: ratio(standing_s + ground_s, paused_s),
            standing_ground_ratio: ratio(standing_s, ground_s),
            standing_to_ground_transitions,
            ground_endings: (last_active == Some(&PhaseState::Ground)) as usize,
        });
    }
    Ok(TournamentStats {
        mean_effort_pause_ratio: mean_of(matches.iter().map(|m| m.effort_pause_ratio)),
        mean_standing_ground_ratio: mean_of(matches.iter().map(|m| m.standing_ground_ratio)),
        standing_to_ground_transitions: matches.iter().map(|m| m.standing_to_ground_transitions).sum(),
        ground_endings: matches.iter().map(|m| m.ground_endings).sum(),
        matches,
    })
}

pub const SEGMENTS_HEADER: &str = "video_id,start_s,end_s,anchor";
pub const STATS_HEADER: &str = "video_id,start_s,end_s,length_s,effort_pause_ratio,standing_ground_ratio,standing_to_ground_transitions,ground_endings";

pub fn write_segments_csv<W: Write>(mut out: W, video_id: &str, segments: &[MatchSegment], header: bool) -> Result<()> {
    if header {
        writeln!(out, "{SEGMENTS_HEADER}")?;
    }
    for s in segments {
        writeln!(out, "{video_id},{},{},{}", s.start_s, s.end_s, s.anchor.as_str())?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_stats_csv<W: Write>(mut out: W, video_id: &str, stats: &TournamentStats, header: bool) -> Result<()> {
    if header {
        writeln!(out, "{STATS_HEADER}")?;
    }
    let opt = |v: Option<f64>| v.map(|v| format!("{v:.4}")).unwrap_or_default();
    for m in &stats.matches {
        writeln!(
            out,
            "{video_id},{},{},{},{},{},{},{}",
            m.start_s,
            m.end_s,
            m.length_s,
            opt(m.effort_pause_ratio),
            opt(m.standing_ground_ratio),
            m.standing_to_ground_transitions,
            m.ground_endings
        )?;
    }
    out.flush()?;
    Ok(())
}

/// `second,state`, one row per timeline second.
pub fn write_timeline_csv<W: Write>(mut out: W, timeline: &PhaseTimeline) -> Result<()> {
    writeln!(out, "second,state")?;
    for (i, t) in timeline.triples.iter().enumerate() {
        writeln!(out, "{},{}", timeline.t0_s + i as u64, t.state())?;
    }
    out.flush()?;
    Ok(())
}

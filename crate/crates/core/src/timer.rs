//! Scoreboard timer cleanup.
//!
//! Raw OCR text is parsed into seconds remaining, gaps left by unreadable
//! frames are interpolated, and the first difference of the cleaned series
//! separates running time (`-1` per second) from paused time (`0`). Any other
//! step is treated as invalid: it usually marks a timer reset between
//! matches.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interchange::FrameRecord;

/// Parses `M:SS` or `MM:SS` (seconds `00`-`59`) into total seconds.
///
/// Surrounding whitespace, which OCR engines commonly emit, is ignored.
/// Anything else yields `None`.
pub fn parse_timer_string(text: &str) -> Option<u32> {
    let (minutes, seconds) = text.trim().split_once(':')?;
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !(1..=2).contains(&minutes.len()) || seconds.len() != 2 {
        return None;
    }
    if !digits(minutes) || !digits(seconds) {
        return None;
    }
    let m: u32 = minutes.parse().ok()?;
    let s: u32 = seconds.parse().ok()?;
    if s > 59 {
        return None;
    }
    Some(m * 60 + s)
}

/// Inverse of [`parse_timer_string`].
pub fn format_timer(seconds: u32) -> String {
    format!("{}:{:02}", seconds / 60, seconds % 60)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimerConfig {
    /// Readings above this are discarded as misreads.
    pub max_timer_s: u32,
    /// Optional spike filter: a reading that differs by more than this from
    /// both present neighbours is dropped. Disabled when `None`.
    pub max_jump: Option<u32>,
}

impl Default for TimerConfig {
    fn default() -> Self {
        TimerConfig {
            max_timer_s: 600,
            max_jump: None,
        }
    }
}

/// Per-second timer readings (seconds remaining).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimerSeries {
    pub t0_s: f64,
    pub values: Vec<Option<u32>>,
    pub interpolated_mask: Vec<bool>,
}

impl TimerSeries {
    /// Builds a series from already-parsed readings, dropping values above
    /// `config.max_timer_s` and applying the spike filter if enabled.
    pub fn from_readings(t0_s: f64, readings: Vec<Option<u32>>, config: &TimerConfig) -> Self {
        let mut values: Vec<Option<u32>> = readings
            .into_iter()
            .map(|v| v.filter(|&s| s <= config.max_timer_s))
            .collect();
        if let Some(limit) = config.max_jump {
            filter_spikes(&mut values, limit);
        }
        let n = values.len();
        TimerSeries {
            t0_s,
            values,
            interpolated_mask: vec![false; n],
        }
    }

    /// One sample per second from a single video stream. Seconds with no
    /// frame, or whose text does not parse, are absent.
    pub fn from_records(records: &[FrameRecord], config: &TimerConfig) -> Self {
        let Some(first) = records.first() else {
            return TimerSeries::from_readings(0.0, Vec::new(), config);
        };
        let t0 = first.timestamp_s;
        let mut readings: Vec<Option<u32>> = Vec::new();
        for r in records {
            let slot = (r.timestamp_s - t0).round().max(0.0) as usize;
            if slot >= readings.len() {
                readings.resize(slot + 1, None);
            }
            let parsed = r.timer_raw.as_deref().and_then(parse_timer_string);
            if parsed.is_some() || readings[slot].is_none() {
                readings[slot] = parsed;
            }
        }
        TimerSeries::from_readings(t0, readings, config)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }
}

fn filter_spikes(values: &mut [Option<u32>], limit: u32) {
    let present: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    let mut drop = Vec::new();
    for (k, &i) in present.iter().enumerate() {
        let v = values[i].unwrap_or(0) as i64;
        let far = |j: Option<&usize>| match j {
            Some(&j) => (values[j].unwrap_or(0) as i64 - v).unsigned_abs() > limit as u64,
            None => true,
        };
        let prev = if k > 0 { present.get(k - 1) } else { None };
        let next = present.get(k + 1);
        if (prev.is_some() || next.is_some()) && far(prev) && far(next) {
            drop.push(i);
        }
    }
    for i in drop {
        values[i] = None;
    }
}

/// `a + (b - a) * num / den`, rounded half-up, in exact integer arithmetic.
fn lerp_round_half_up(a: u32, b: u32, num: usize, den: usize) -> u32 {
    let (a, b, num, den) = (a as i64, b as i64, num as i64, den as i64);
    let scaled = a * den + (b - a) * num;
    (2 * scaled + den).div_euclid(2 * den) as u32
}

/// Fills gaps: interior gaps linearly between the nearest present
/// neighbours, boundary gaps by holding the nearest present value. Filled
/// entries are marked in `interpolated_mask`; existing marks are kept, so the
/// operation is idempotent.
pub fn interpolate_series(series: &TimerSeries) -> Result<TimerSeries> {
    let present: Vec<usize> = (0..series.len()).filter(|&i| series.values[i].is_some()).collect();
    let (Some(&first), Some(&last)) = (present.first(), present.last()) else {
        return Err(Error::EmptyTimer);
    };
    let mut values = series.values.clone();
    let mut mask = series.interpolated_mask.clone();
    mask.resize(values.len(), false);

    let head = series.values[first];
    for i in 0..first {
        values[i] = head;
        mask[i] = true;
    }
    let tail = series.values[last];
    for i in last + 1..values.len() {
        values[i] = tail;
        mask[i] = true;
    }
    for pair in present.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        if hi - lo < 2 {
            continue;
        }
        let (a, b) = (series.values[lo].unwrap_or(0), series.values[hi].unwrap_or(0));
        for i in lo + 1..hi {
            values[i] = Some(lerp_round_half_up(a, b, i - lo, hi - lo));
            mask[i] = true;
        }
    }
    Ok(TimerSeries {
        t0_s: series.t0_s,
        values,
        interpolated_mask: mask,
    })
}

/// First differences of a timer series; `values[i] = s[i+1] - s[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivativeSeries {
    pub values: Vec<Option<i64>>,
}

/// Differences are absent wherever either neighbour is absent.
pub fn derivative(series: &TimerSeries) -> Result<DerivativeSeries> {
    if series.len() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            actual: series.len(),
        });
    }
    let values = series
        .values
        .windows(2)
        .map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => Some(b as i64 - a as i64),
            _ => None,
        })
        .collect();
    Ok(DerivativeSeries { values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockState {
    Running,
    Paused,
    Invalid,
}

impl ClockState {
    pub fn of(step: Option<i64>) -> ClockState {
        match step {
            Some(-1) => ClockState::Running,
            Some(0) => ClockState::Paused,
            _ => ClockState::Invalid,
        }
    }
}

/// A maximal run of one clock state over derivative indices `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClockSegment {
    pub start: usize,
    pub end: usize,
    pub state: ClockState,
}

impl ClockSegment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunPauseSegments {
    pub segments: Vec<ClockSegment>,
    pub pause_count: usize,
}

impl RunPauseSegments {
    /// Expands the segments back into one state per derivative sample.
    pub fn states(&self) -> Vec<ClockState> {
        self.segments
            .iter()
            .flat_map(|s| std::iter::repeat_n(s.state, s.len()))
            .collect()
    }
}

/// Classifies every difference as running, paused or invalid and merges
/// equal neighbours into segments.
pub fn run_pause_segments(deriv: &DerivativeSeries) -> RunPauseSegments {
    let mut segments: Vec<ClockSegment> = Vec::new();
    for (i, &step) in deriv.values.iter().enumerate() {
        let state = ClockState::of(step);
        match segments.last_mut() {
            Some(seg) if seg.state == state => seg.end = i + 1,
            _ => segments.push(ClockSegment {
                start: i,
                end: i + 1,
                state,
            }),
        }
    }
    let pause_count = segments.iter().filter(|s| s.state == ClockState::Paused).count();
    RunPauseSegments { segments, pause_count }
}

/// Writes `index,value,interpolated,derivative`. The derivative column is
/// empty on the last row and wherever it is undefined.
pub fn write_timer_csv<W: Write>(out: W, series: &TimerSeries, deriv: Option<&DerivativeSeries>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "value", "interpolated", "derivative"])?;
    for (i, v) in series.values.iter().enumerate() {
        let d = deriv
            .and_then(|d| d.values.get(i).copied().flatten())
            .map(|d| d.to_string())
            .unwrap_or_default();
        w.write_record([
            i.to_string(),
            v.map(|v| v.to_string()).unwrap_or_default(),
            series.interpolated_mask[i].to_string(),
            d,
        ])?;
    }
    w.flush()?;
    Ok(())
}

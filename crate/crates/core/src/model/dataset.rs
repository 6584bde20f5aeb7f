//! Label quantization, dataset joins and seeded splits.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{clip_key, FeatureMatrix};
use crate::interchange::{annotations_by_clip, FrameRecord, IntervalAnnotation};
use crate::phase::{PhaseTriple, Target};
use crate::rng::Lcg;

/// Per-second labels for one clip of `clip_len_s` seconds. Second `i` takes
/// the label of the interval covering `i + 0.5`; uncovered seconds are
/// outside any match.
pub fn quantize_labels(annotations: &[IntervalAnnotation], clip_len_s: u32) -> Result<Vec<PhaseTriple>> {
    let mut sorted: Vec<&IntervalAnnotation> = annotations.iter().collect();
    for a in &sorted {
        a.check()?;
        if a.start_s < 0.0 || a.end_s > clip_len_s as f64 + 1e-9 {
            return Err(Error::Annotation(format!(
                "interval [{}, {}) of {} outside clip of {clip_len_s} s",
                a.start_s, a.end_s, a.clip_id
            )));
        }
    }
    sorted.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    for pair in sorted.windows(2) {
        if pair[1].start_s < pair[0].end_s {
            return Err(Error::Annotation(format!(
                "overlapping intervals [{}, {}) and [{}, {}) in {}",
                pair[0].start_s, pair[0].end_s, pair[1].start_s, pair[1].end_s, pair[0].clip_id
            )));
        }
    }
    let mut out = vec![PhaseTriple::NO_MATCH; clip_len_s as usize];
    let mut cursor = 0;
    for (i, slot) in out.iter_mut().enumerate() {
        let mid = i as f64 + 0.5;
        while cursor < sorted.len() && sorted[cursor].end_s <= mid {
            cursor += 1;
        }
        if let Some(a) = sorted.get(cursor) {
            if a.start_s <= mid {
                *slot = a.phase()?;
            }
        }
    }
    Ok(out)
}

/// Quantized labels for every clip in an annotation file, keyed by
/// `(clip_id, second)`.
///
/// Each clip is `clip_len_s` long, or as long as its last interval when
/// `None`. With `rechunk_s`, keys are re-cut into consecutive chunks the
/// same way [`crate::features::build_features`] names clips, so the two can
/// be joined.
pub fn label_map(
    annotations: &[IntervalAnnotation],
    clip_len_s: Option<u32>,
    rechunk_s: Option<u32>,
) -> Result<HashMap<(String, u32), PhaseTriple>> {
    let mut map = HashMap::new();
    for (clip, items) in annotations_by_clip(annotations) {
        let len = match clip_len_s {
            Some(l) => l,
            None => items.iter().map(|a| a.end_s).fold(0.0, f64::max).ceil() as u32,
        };
        for (s, t) in quantize_labels(&items, len)?.into_iter().enumerate() {
            map.insert(clip_key(&clip, s as u32, rechunk_s), t);
        }
    }
    Ok(map)
}

/// Scene classes of the frames that carry one, keyed the same way
/// [`crate::features::build_features`] keys feature rows.
pub fn scene_label_map(records: &[FrameRecord], clip_len_s: Option<u32>) -> HashMap<(String, u32), usize> {
    let mut origin: HashMap<&str, f64> = HashMap::new();
    let mut map = HashMap::new();
    for r in records {
        let t0 = *origin.entry(r.video_id.as_str()).or_insert(r.timestamp_s);
        if let Some(c) = r.scene_class {
            let second = (r.timestamp_s - t0).round().max(0.0) as u32;
            map.insert(clip_key(&r.video_id, second, clip_len_s), c.index());
        }
    }
    map
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SplitUnit {
    Frame,
    #[default]
    Clip,
}

impl FromStr for SplitUnit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frame" => Ok(SplitUnit::Frame),
            "clip" => Ok(SplitUnit::Clip),
            other => Err(Error::Split(format!("unknown split unit {other:?}"))),
        }
    }
}

impl fmt::Display for SplitUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitUnit::Frame => "frame",
            SplitUnit::Clip => "clip",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Train, validation and test fractions.
    pub ratios: [f64; 3],
    pub seed: u64,
    pub unit: SplitUnit,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            ratios: [0.7, 0.15, 0.15],
            seed: 0,
            unit: SplitUnit::Clip,
        }
    }
}

impl SplitSpec {
    pub fn check(&self) -> Result<()> {
        if self.ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::Split(format!(
                "ratios must be non-negative, got {:?}",
                self.ratios
            )));
        }
        let sum: f64 = self.ratios.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::Split(format!("ratios sum to {sum}, not 1")));
        }
        Ok(())
    }

    /// Partition sizes for `n` units. Train and validation take
    /// `floor(ratio * n)`, test takes the rest.
    pub fn sizes(&self, n: usize) -> Result<[usize; 3]> {
        self.check()?;
        let take = |r: f64| ((r * n as f64) + 1e-9).floor() as usize;
        let train = take(self.ratios[0]).min(n);
        let val = take(self.ratios[1]).min(n - train);
        let sizes = [train, val, n - train - val];
        for (i, name) in ["train", "validation", "test"].iter().enumerate() {
            if self.ratios[i] > 0.0 && sizes[i] == 0 {
                return Err(Error::Split(format!(
                    "{name} partition is empty ({n} units, ratio {})",
                    self.ratios[i]
                )));
            }
        }
        Ok(sizes)
    }
}

/// Shuffles unit indices `0..n` with the seeded generator and cuts them into
/// train, validation and test.
pub fn split_units(n: usize, spec: &SplitSpec) -> Result<[Vec<usize>; 3]> {
    if n == 0 {
        return Err(Error::Empty("cannot split an empty dataset"));
    }
    let sizes = spec.sizes(n)?;
    let mut order: Vec<usize> = (0..n).collect();
    Lcg::new(spec.seed).shuffle(&mut order);
    let test = order.split_off(sizes[0] + sizes[1]);
    let val = order.split_off(sizes[0]);
    Ok([order, val, test])
}

/// Feature rows with one label each.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<L> {
    features: FeatureMatrix,
    labels: Vec<L>,
}

impl<L: Clone> LabeledDataset<L> {
    pub fn new(features: FeatureMatrix, labels: Vec<L>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::Dimension {
                expected: features.len(),
                actual: labels.len(),
            });
        }
        Ok(LabeledDataset { features, labels })
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[L] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, positions: &[usize]) -> Self {
        LabeledDataset {
            features: self.features.select(positions),
            labels: positions.iter().map(|&p| self.labels[p].clone()).collect(),
        }
    }

    /// Row positions of the three partitions, ascending within each. With
    /// clip units every second of a clip lands in the same partition.
    pub fn split_positions(&self, spec: &SplitSpec) -> Result<[Vec<usize>; 3]> {
        let groups: Vec<Vec<usize>> = match spec.unit {
            SplitUnit::Frame => (0..self.len()).map(|i| vec![i]).collect(),
            SplitUnit::Clip => self.features.clips().into_iter().map(|(_, p)| p).collect(),
        };
        let parts = split_units(groups.len(), spec)?;
        Ok(parts.map(|units| {
            let mut rows: Vec<usize> = units.iter().flat_map(|&u| groups[u].iter().copied()).collect();
            rows.sort_unstable();
            rows
        }))
    }

    pub fn split(&self, spec: &SplitSpec) -> Result<[Self; 3]> {
        Ok(self.split_positions(spec)?.map(|p| self.select(&p)))
    }
}

/// Keeps the feature rows that have a label and pairs them up. Returns the
/// dataset and the number of rows dropped for lack of a label.
pub fn join_labels<L: Clone>(
    features: &FeatureMatrix,
    labels: &HashMap<(String, u32), L>,
) -> (LabeledDataset<L>, usize) {
    let mut keep = Vec::new();
    let mut out = Vec::new();
    for (i, key) in features.index().iter().enumerate() {
        if let Some(l) = labels.get(key) {
            keep.push(i);
            out.push(l.clone());
        }
    }
    let dropped = features.len() - keep.len();
    (
        LabeledDataset {
            features: features.select(&keep),
            labels: out,
        },
        dropped,
    )
}

/// Which rows a hierarchical target is trained and scored on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Every row; the target is false wherever its parent is.
    #[default]
    All,
    /// Only rows where the parent state holds.
    Conditional,
}

impl FromStr for EvalMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(EvalMode::All),
            "conditional" => Ok(EvalMode::Conditional),
            other => Err(Error::Config(format!("unknown evaluation mode {other:?}"))),
        }
    }
}

/// Positions of the rows used for `target` under `mode`, and their binary
/// labels.
pub fn target_labels(triples: &[PhaseTriple], target: Target, mode: EvalMode) -> (Vec<usize>, Vec<bool>) {
    triples
        .iter()
        .enumerate()
        .filter(|(_, t)| match (mode, target.parent()) {
            (EvalMode::Conditional, Some(parent)) => t.get(parent),
            _ => true,
        })
        .map(|(i, t)| (i, t.get(target)))
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn iv(start: f64, end: f64, t: PhaseTriple) -> IntervalAnnotation {
        IntervalAnnotation::new("c", start, end, t)
    }

    #[test]
    fn full_interval_fills_clip() {
        let q = quantize_labels(&[iv(0.0, 30.0, PhaseTriple::STANDING)], 30).unwrap();
        assert_eq!(q, vec![PhaseTriple::STANDING; 30]);
    }

    #[test]
    fn uncovered_seconds_are_no_match() {
        let m = PhaseTriple::new(true, false, false).unwrap();
        let q = quantize_labels(&[iv(0.0, 10.0, m)], 30).unwrap();
        assert_eq!(&q[..10], &[m; 10][..]);
        assert!(q[10..].iter().all(|t| *t == PhaseTriple::NO_MATCH));
    }

    #[test]
    fn midpoint_rule() {
        // [0, 2.4) covers midpoints 0.5 and 1.5; [2.4, 4) covers 2.5 and 3.5
        let q = quantize_labels(
            &[iv(0.0, 2.4, PhaseTriple::PAUSED), iv(2.4, 4.0, PhaseTriple::GROUND)],
            4,
        )
        .unwrap();
        assert_eq!(
            q,
            vec![
                PhaseTriple::PAUSED,
                PhaseTriple::PAUSED,
                PhaseTriple::GROUND,
                PhaseTriple::GROUND
            ]
        );
    }

    #[test]
    fn overlap_rejected() {
        let e = quantize_labels(
            &[iv(0.0, 10.0, PhaseTriple::PAUSED), iv(9.0, 12.0, PhaseTriple::PAUSED)],
            30,
        );
        assert!(matches!(e, Err(Error::Annotation(_))));
        assert!(quantize_labels(&[iv(0.0, 31.0, PhaseTriple::PAUSED)], 30).is_err());
    }

    #[test]
    fn split_sizes() {
        let spec = SplitSpec {
            ratios: [0.7, 0.15, 0.15],
            seed: 1,
            unit: SplitUnit::Frame,
        };
        let [a, b, c] = split_units(100, &spec).unwrap();
        assert_eq!((a.len(), b.len(), c.len()), (70, 15, 15));
        let spec = SplitSpec {
            ratios: [0.8, 0.0, 0.2],
            ..spec
        };
        assert_eq!(spec.sizes(19).unwrap(), [15, 0, 4]);
    }

    #[test]
    fn empty_partition_rejected() {
        let spec = SplitSpec {
            ratios: [0.7, 0.15, 0.15],
            seed: 0,
            unit: SplitUnit::Frame,
        };
        assert!(matches!(spec.sizes(3), Err(Error::Split(_))));
        assert!(split_units(0, &spec).is_err());
        let bad = SplitSpec {
            ratios: [0.5, 0.6, -0.1],
            ..spec
        };
        assert!(bad.check().is_err());
    }

    #[test]
    fn clip_split_keeps_clips_together() {
        let mut m = FeatureMatrix::new();
        for c in 0..10 {
            for s in 0..5 {
                m.push(format!("v/{c}"), s, vec![c as f64]).unwrap();
            }
        }
        let ds = LabeledDataset::new(m, vec![0u8; 50]).unwrap();
        let spec = SplitSpec {
            ratios: [0.8, 0.0, 0.2],
            seed: 3,
            unit: SplitUnit::Clip,
        };
        let [train, val, test] = ds.split(&spec).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (40, 0, 10));
        let clips =
            |d: &LabeledDataset<u8>| -> Vec<String> { d.features().clips().into_iter().map(|(c, _)| c).collect() };
        let (tr, te) = (clips(&train), clips(&test));
        assert!(tr.iter().all(|c| !te.contains(c)));
        assert_eq!(ds.split(&spec).unwrap(), [train, val, test]);
    }

    #[test]
    fn conditional_mode_filters_on_parent() {
        let ts = [
            PhaseTriple::NO_MATCH,
            PhaseTriple::PAUSED,
            PhaseTriple::STANDING,
            PhaseTriple::GROUND,
        ];
        let (pos, y) = target_labels(&ts, Target::IsStanding, EvalMode::All);
        assert_eq!(pos, vec![0, 1, 2, 3]);
        assert_eq!(y, vec![false, false, true, false]);
        let (pos, y) = target_labels(&ts, Target::IsStanding, EvalMode::Conditional);
        assert_eq!(pos, vec![2, 3]);
        assert_eq!(y, vec![true, false]);
        let (pos, _) = target_labels(&ts, Target::IsMatch, EvalMode::Conditional);
        assert_eq!(pos.len(), 4);
    }

    #[test]
    fn join_drops_unlabeled_rows() {
        let mut m = FeatureMatrix::new();
        m.push("a", 0, vec![1.0]).unwrap();
        m.push("a", 1, vec![2.0]).unwrap();
        let mut labels = HashMap::new();
        labels.insert(("a".to_string(), 1), true);
        let (ds, dropped) = join_labels(&m, &labels);
        assert_eq!(dropped, 1);
        assert_eq!(ds.labels(), &[true]);
        assert_eq!(ds.features().rows(), &[vec![2.0]]);
    }

    proptest! {
        #[test]
        fn quantized_length_equals_clip(
            len in 1u32..120,
            cuts in prop::collection::btree_set(0u32..1200, 0..10),
            states in prop::collection::vec(0usize..4, 10),
        ) {
            let cuts: Vec<f64> = cuts.into_iter().map(|c| c as f64 / 10.0).filter(|c| *c <= len as f64).collect();
            let anns: Vec<_> = cuts
                .windows(2)
                .zip(&states)
                .map(|(w, &s)| iv(w[0], w[1], PhaseTriple::from_state(crate::phase::PhaseState::ALL[s])))
                .collect();
            let q = quantize_labels(&anns, len).unwrap();
            prop_assert_eq!(q.len(), len as usize);
        }

        #[test]
        fn split_is_a_partition(n in 1usize..300, seed in any::<u64>()) {
            let spec = SplitSpec { ratios: [0.6, 0.2, 0.2], seed, unit: SplitUnit::Frame };
            if let Ok(parts) = split_units(n, &spec) {
                let mut all: Vec<usize> = parts.concat();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            } else {
                prop_assert!(n < 5);
            }
        }
    }
}

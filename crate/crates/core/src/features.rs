//! Feature construction from detector embeddings.
//!
//! Embeddings are used raw (flattened row-major), compressed with a 1-D
//! orthonormal DCT-II followed by a low-pass cut, or reduced with a separable
//! N-D DCT that keeps the low-frequency corner block. Lagged features
//! concatenate the previous `t` seconds of the same clip.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interchange::{EmbeddingTensor, FrameRecord};

/// Row-major flatten; the data already is, so this is a copy.
pub fn flatten_embedding(tensor: &EmbeddingTensor) -> Vec<f64> {
    tensor.data().to_vec()
}

/// Cosine table for an orthonormal DCT-II of length `n`.
struct DctBasis {
    n: usize,
    // cos(pi * m / (2n)) for m in 0..4n; the kernel index (2i+1)k wraps mod 4n
    cos: Vec<f64>,
    dc_scale: f64,
    ac_scale: f64,
}

impl DctBasis {
    fn new(n: usize) -> Self {
        let period = 4 * n;
        let cos = (0..period).map(|m| (PI * m as f64 / (2 * n) as f64).cos()).collect();
        DctBasis {
            n,
            cos,
            dc_scale: (1.0 / n as f64).sqrt(),
            ac_scale: (2.0 / n as f64).sqrt(),
        }
    }

    fn coefficient(&self, k: usize, x: impl Iterator<Item = f64>) -> f64 {
        let period = 4 * self.n;
        let mut acc = 0.0;
        for (i, v) in x.enumerate() {
            acc += v * self.cos[((2 * i + 1) * k) % period];
        }
        acc * if k == 0 { self.dc_scale } else { self.ac_scale }
    }
}

/// Orthonormal DCT-II:
/// `X_k = s_k * sum_n x_n cos(pi (2n+1) k / 2N)` with `s_0 = sqrt(1/N)` and
/// `s_k = sqrt(2/N)` otherwise.
pub fn dct1d(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Feature("DCT of an empty vector".into()));
    }
    let basis = DctBasis::new(x.len());
    Ok((0..x.len()).map(|k| basis.coefficient(k, x.iter().copied())).collect())
}

/// The first `k` coefficients.
pub fn lowpass(coeffs: &[f64], k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > coeffs.len() {
        return Err(Error::Feature(format!(
            "low-pass size {k} outside 1..={}",
            coeffs.len()
        )));
    }
    Ok(coeffs[..k].to_vec())
}

/// DCT along one axis of a row-major tensor, keeping the first `keep`
/// coefficients of that axis.
fn dct_axis(data: &[f64], shape: &[usize], axis: usize, keep: usize) -> Vec<f64> {
    let len = shape[axis];
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    let basis = DctBasis::new(len);
    let mut out = vec![0.0; outer * keep * inner];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * len * inner + i;
            for k in 0..keep {
                let line = (0..len).map(|n| data[base + n * inner]);
                out[(o * keep + k) * inner + i] = basis.coefficient(k, line);
            }
        }
    }
    out
}

/// Separable orthonormal DCT-II over every axis, keeping the low-frequency
/// corner block of `block_shape`, flattened row-major.
pub fn dctnd(tensor: &EmbeddingTensor, block_shape: &[usize]) -> Result<Vec<f64>> {
    let shape = tensor.shape();
    if block_shape.len() != shape.len() {
        return Err(Error::Feature(format!(
            "block {block_shape:?} has {} axes, tensor {shape:?} has {}",
            block_shape.len(),
            shape.len()
        )));
    }
    if block_shape.iter().zip(shape).any(|(&b, &s)| b == 0 || b > s) {
        return Err(Error::Feature(format!(
            "block {block_shape:?} does not fit tensor {shape:?}"
        )));
    }
    let mut data = tensor.data().to_vec();
    let mut current = shape.to_vec();
    for axis in 0..shape.len() {
        data = dct_axis(&data, &current, axis, block_shape[axis]);
        current[axis] = block_shape[axis];
    }
    Ok(data)
}

fn prime_factors(mut k: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= k {
        while k.is_multiple_of(p) {
            out.push(p);
            k /= p;
        }
        p += 1;
    }
    if k > 1 {
        out.push(k);
    }
    out
}

/// Corner block with `k` coefficients for a tensor of `shape`.
///
/// Prime factors of `k`, largest first, go one at a time to the axis with the
/// smallest block so far that can still grow (earliest axis on ties). For
/// `[3, 12, 20]` this gives `(2,2,2)` for 8, `(2,4,2)` for 16 and `(2,8,4)`
/// for 64.
pub fn default_block(shape: &[usize], k: usize) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::Feature("coefficient count must be positive".into()));
    }
    let mut block = vec![1usize; shape.len()];
    let mut factors = prime_factors(k);
    factors.sort_unstable_by(|a, b| b.cmp(a));
    for f in factors {
        let axis = (0..shape.len())
            .filter(|&a| block[a] * f <= shape[a])
            .min_by_key(|&a| (block[a], a))
            .ok_or_else(|| Error::Feature(format!("cannot fit {k} coefficients into shape {shape:?}")))?;
        block[axis] *= f;
    }
    Ok(block)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DctMode {
    None,
    Dct1d,
    Dctnd,
}

impl fmt::Display for DctMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DctMode::None => "embedding",
            DctMode::Dct1d => "dct1d",
            DctMode::Dctnd => "dctnd",
        })
    }
}

impl FromStr for DctMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "embedding" | "raw" => Ok(DctMode::None),
            "dct1d" | "dct" => Ok(DctMode::Dct1d),
            "dctnd" | "dctn" => Ok(DctMode::Dctnd),
            other => Err(Error::Config(format!("unknown feature mode `{other}`"))),
        }
    }
}

/// How an embedding becomes a feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DctConfig {
    pub mode: DctMode,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_shape: Option<Vec<usize>>,
}

impl Default for DctConfig {
    fn default() -> Self {
        DctConfig {
            mode: DctMode::Dct1d,
            k: 8,
            block_shape: None,
        }
    }
}

impl DctConfig {
    pub fn new(mode: DctMode, k: usize) -> Self {
        DctConfig {
            mode,
            k,
            block_shape: None,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.mode != DctMode::None && self.k == 0 {
            return Err(Error::Feature("k must be positive".into()));
        }
        if let (DctMode::Dctnd, Some(block)) = (self.mode, &self.block_shape) {
            let product: usize = block.iter().product();
            if product != self.k {
                return Err(Error::Feature(format!(
                    "block {block:?} holds {product} coefficients, k is {}",
                    self.k
                )));
            }
        }
        Ok(())
    }

    pub fn apply(&self, tensor: &EmbeddingTensor) -> Result<Vec<f64>> {
        match self.mode {
            DctMode::None => Ok(flatten_embedding(tensor)),
            DctMode::Dct1d => lowpass(&dct1d(tensor.data())?, self.k),
            DctMode::Dctnd => {
                let block = match &self.block_shape {
                    Some(b) => b.clone(),
                    None => default_block(tensor.shape(), self.k)?,
                };
                self.check()?;
                dctnd(tensor, &block)
            }
        }
    }

    /// Short name used in metrics tables, e.g. `dct1d_k8`.
    pub fn label(&self) -> String {
        match self.mode {
            DctMode::None => "embedding".into(),
            mode => format!("{mode}_k{}", self.k),
        }
    }
}

/// Per-sample feature rows keyed by `(clip_id, second)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureMatrix {
    rows: Vec<Vec<f64>>,
    index: Vec<(String, u32)>,
}

impl FeatureMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_rows(rows: Vec<Vec<f64>>, index: Vec<(String, u32)>) -> Result<Self> {
        let mut m = FeatureMatrix::new();
        if rows.len() != index.len() {
            return Err(Error::Dimension {
                expected: rows.len(),
                actual: index.len(),
            });
        }
        for (row, (clip, second)) in rows.into_iter().zip(index) {
            m.push(clip, second, row)?;
        }
        Ok(m)
    }

    pub fn push(&mut self, clip_id: impl Into<String>, second: u32, row: Vec<f64>) -> Result<()> {
        if let Some(d) = self.dim() {
            if row.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    actual: row.len(),
                });
            }
        }
        self.rows.push(row);
        self.index.push((clip_id.into(), second));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Feature dimension, `None` while empty.
    pub fn dim(&self) -> Option<usize> {
        self.rows.first().map(Vec::len)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn index(&self) -> &[(String, u32)] {
        &self.index
    }

    /// Rows whose positions are listed, in that order.
    pub fn select(&self, positions: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            rows: positions.iter().map(|&i| self.rows[i].clone()).collect(),
            index: positions.iter().map(|&i| self.index[i].clone()).collect(),
        }
    }

    /// Row positions grouped by clip, clips in first-seen order.
    pub fn clips(&self) -> Vec<(String, Vec<usize>)> {
        let mut order = Vec::new();
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, (clip, _)) in self.index.iter().enumerate() {
            let entry = groups.entry(clip.as_str()).or_default();
            if entry.is_empty() {
                order.push(clip.clone());
            }
            entry.push(i);
        }
        order
            .into_iter()
            .map(|c| {
                let rows = groups.remove(c.as_str()).unwrap_or_default();
                (c, rows)
            })
            .collect()
    }

    /// CSV with header `clip_id,second,f0..f{d-1}`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let d = self.dim().unwrap_or(0);
        let mut header = vec!["clip_id".to_string(), "second".to_string()];
        header.extend((0..d).map(|i| format!("f{i}")));
        w.write_record(&header)?;
        for (row, (clip, second)) in self.rows.iter().zip(&self.index) {
            let mut rec = vec![clip.clone(), second.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut m = FeatureMatrix::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |message: String| Error::Malformed { line: i + 2, message };
            let clip = rec.get(0).ok_or_else(|| bad("missing clip_id".into()))?;
            let second: u32 = rec
                .get(1)
                .ok_or_else(|| bad("missing second".into()))?
                .parse()
                .map_err(|e| bad(format!("second: {e}")))?;
            let row = rec
                .iter()
                .skip(2)
                .map(|v| v.parse::<f64>().map_err(|e| bad(format!("feature: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            m.push(clip, second, row).map_err(|e| bad(e.to_string()))?;
        }
        Ok(m)
    }
}

/// Concatenates each row with the `lag` preceding seconds of the same clip,
/// oldest first. Rows without a full history are dropped, so a clip of `n`
/// consecutive seconds yields `max(0, n - lag)` rows. Windows never cross
/// clip boundaries.
pub fn lag_features(matrix: &FeatureMatrix, lag: usize) -> FeatureMatrix {
    if lag == 0 {
        return matrix.clone();
    }
    let mut out = FeatureMatrix::new();
    for (clip, positions) in matrix.clips() {
        let by_second: BTreeMap<u32, usize> = positions.iter().map(|&p| (matrix.index[p].1, p)).collect();
        for &second in by_second.keys() {
            if (second as usize) < lag {
                continue;
            }
            let window: Option<Vec<usize>> = (second - lag as u32..=second)
                .map(|s| by_second.get(&s).copied())
                .collect();
            if let Some(window) = window {
                let row: Vec<f64> = window.iter().flat_map(|&p| matrix.rows[p].iter().copied()).collect();
                out.rows.push(row);
                out.index.push((clip.clone(), second));
            }
        }
    }
    out
}

/// Feature rows for every record carrying an embedding.
///
/// With `clip_len_s`, each video is cut into consecutive clips of that many
/// seconds named `<video_id>/<n>`, and `second` is relative to the clip.
/// Otherwise the whole video is one clip and `second` counts from its first
/// frame.
pub fn build_features(records: &[FrameRecord], config: &DctConfig, clip_len_s: Option<u32>) -> Result<FeatureMatrix> {
    config.check()?;
    let mut origin: BTreeMap<&str, f64> = BTreeMap::new();
    let mut m = FeatureMatrix::new();
    for r in records {
        let t0 = *origin.entry(r.video_id.as_str()).or_insert(r.timestamp_s);
        let Some(tensor) = &r.embedding else {
            continue;
        };
        let second = (r.timestamp_s - t0).round().max(0.0) as u32;
        let (clip, second) = clip_key(&r.video_id, second, clip_len_s);
        m.push(clip, second, config.apply(tensor)?)?;
    }
    Ok(m)
}

/// Maps a second within a video to `(clip_id, second within clip)`.
pub fn clip_key(video_id: &str, second: u32, clip_len_s: Option<u32>) -> (String, u32) {
    match clip_len_s {
        Some(len) if len > 0 => (format!("{video_id}/{}", second / len), second % len),
        _ => (video_id.to_string(), second),
    }
}

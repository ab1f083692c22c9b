//! Anomaly maps, ranking metrics, and the continual-learning score table.
//!
//! The map pipeline mirrors feature-distance scoring: per layer, a spatial
//! map of squared channel distances; each layer map bilinearly upsampled
//! (align-corners-false) to a common size and summed; the image-level score
//! is the map maximum. AUROC is the rank-based Mann-Whitney statistic with
//! ties counted half, which matches pairwise counting exactly.

use serde::{Deserialize, Serialize};

use crate::error::{dim_mismatch, invalid, Error, Result};
use crate::matrix::Matrix;

// ── Feature stacks and maps ─────────────────────────────────────────

/// Dense channels × height × width tensor, row-major within each channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(dim_mismatch(
                "Tensor3::new",
                format!("{} entries", channels * height * width),
                format!("{}", data.len()),
            ));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { op: "Tensor3::new" });
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn at(&self, c: usize, h: usize, w: usize) -> f64 {
        self.data[(c * self.height + h) * self.width + w]
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }
}

/// Per-layer feature tensors for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    pub layers: Vec<Tensor3>,
}

/// Per-layer squared channel distance, upsampled to `(out_h, out_w)` and
/// summed over layers.
pub fn anomaly_map(
    a: &FeatureStack,
    b: &FeatureStack,
    out_h: usize,
    out_w: usize,
) -> Result<Matrix> {
    if a.layers.len() != b.layers.len() {
        return Err(dim_mismatch(
            "anomaly_map",
            format!("{} layers", a.layers.len()),
            format!("{}", b.layers.len()),
        ));
    }
    if out_h == 0 || out_w == 0 {
        return Err(invalid("anomaly_map", "output size must be positive"));
    }
    let mut total = Matrix::zeros(out_h, out_w);
    for (idx, (la, lb)) in a.layers.iter().zip(b.layers.iter()).enumerate() {
        if la.shape() != lb.shape() {
            return Err(dim_mismatch(
                "anomaly_map",
                format!("layer {idx} shape {:?}", la.shape()),
                format!("{:?}", lb.shape()),
            ));
        }
        let (c, h, w) = la.shape();
        let mut layer_map = Matrix::zeros(h, w);
        for ch in 0..c {
            for i in 0..h {
                for j in 0..w {
                    let d = la.at(ch, i, j) - lb.at(ch, i, j);
                    layer_map[(i, j)] += d * d;
                }
            }
        }
        total = total.add(&bilinear_upsample(&layer_map, out_h, out_w)?)?;
    }
    Ok(total)
}

/// Bilinear upsampling with the align-corners-false convention: output
/// sample centers sit at `(i + 0.5)·in/out − 0.5` in input coordinates,
/// clamped to the valid range. Identity when sizes match; exact on
/// constant inputs. Downsampling is not supported.
pub fn bilinear_upsample(map: &Matrix, out_h: usize, out_w: usize) -> Result<Matrix> {
    let (in_h, in_w) = (map.rows(), map.cols());
    if in_h == 0 || in_w == 0 {
        return Err(invalid("bilinear_upsample", "input map must be nonempty"));
    }
    if out_h < in_h || out_w < in_w {
        return Err(invalid(
            "bilinear_upsample",
            format!("output {out_h}x{out_w} smaller than input {in_h}x{in_w}"),
        ));
    }
    if out_h == in_h && out_w == in_w {
        return Ok(map.clone());
    }
    let scale_h = in_h as f64 / out_h as f64;
    let scale_w = in_w as f64 / out_w as f64;
    let coords = |i: usize, scale: f64, in_dim: usize| -> (usize, usize, f64) {
        let src = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (in_dim - 1) as f64);
        let lo = src.floor() as usize;
        let hi = (lo + 1).min(in_dim - 1);
        (lo, hi, src - lo as f64)
    };
    let mut out = Matrix::zeros(out_h, out_w);
    for i in 0..out_h {
        let (y0, y1, fy) = coords(i, scale_h, in_h);
        for j in 0..out_w {
            let (x0, x1, fx) = coords(j, scale_w, in_w);
            out[(i, j)] = (1.0 - fy) * (1.0 - fx) * map[(y0, x0)]
                + (1.0 - fy) * fx * map[(y0, x1)]
                + fy * (1.0 - fx) * map[(y1, x0)]
                + fy * fx * map[(y1, x1)];
        }
    }
    Ok(out)
}

/// Image-level score: the maximum of the anomaly map.
pub fn image_score(map: &Matrix) -> Result<f64> {
    if map.is_empty() {
        return Err(invalid("image_score", "map must be nonempty"));
    }
    Ok(map.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max))
}

// ── AUROC ───────────────────────────────────────────────────────────

/// Rank-based AUROC with ties counted half; `true` labels are positives.
/// Requires both classes present.
pub fn auroc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(dim_mismatch(
            "auroc",
            format!("{} labels", scores.len()),
            format!("{}", labels.len()),
        ));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(invalid("auroc", "scores must be finite"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric {
            reason: "AUROC needs both classes present".to_string(),
        });
    }

    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // Midranks: tied scores share the average of their 1-based positions.
    let mut ranks = vec![0.0_f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = mid;
        }
        i = j + 1;
    }

    let rank_sum_pos: f64 = ranks
        .iter()
        .zip(labels.iter())
        .filter(|(_, &l)| l)
        .map(|(r, _)| r)
        .sum();
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos * n_neg) as f64)
}

// ── Continual metric table ──────────────────────────────────────────

/// Lower-triangular table of per-task scores: entry (b, i) is task i's
/// score after training step b, defined for i ≤ b (0-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    rows: Vec<Vec<f64>>,
}

impl MetricTable {
    /// `rows[b]` must hold exactly b + 1 scores, each in [0, 1].
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        for (b, row) in rows.iter().enumerate() {
            if row.len() != b + 1 {
                return Err(invalid(
                    "MetricTable::new",
                    format!("row {b} has {} entries, expected {}", row.len(), b + 1),
                ));
            }
            if row.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(invalid(
                    "MetricTable::new",
                    format!("row {b} holds a score outside [0, 1]"),
                ));
            }
        }
        Ok(Self { rows })
    }

    #[inline]
    pub fn t_steps(&self) -> usize {
        self.rows.len()
    }

    /// Score of task `i` after step `b` (0-based, `i ≤ b`).
    #[inline]
    pub fn get(&self, b: usize, i: usize) -> f64 {
        self.rows[b][i]
    }

    #[inline]
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Mean of the final row: the average per-task score after the last step.
pub fn a_metric(table: &MetricTable) -> Result<f64> {
    let n = table.t_steps();
    if n == 0 {
        return Err(Error::UndefinedMetric {
            reason: "A-metric needs at least one step".to_string(),
        });
    }
    let last = &table.rows()[n - 1];
    Ok(last.iter().sum::<f64>() / n as f64)
}

/// Forgetting measure: for each non-final task, the peak historical score
/// minus the final score, averaged. Negative values mean backward transfer.
pub fn forgetting_measure(table: &MetricTable) -> Result<f64> {
    let n = table.t_steps();
    if n < 2 {
        return Err(Error::UndefinedMetric {
            reason: "forgetting measure needs at least two steps".to_string(),
        });
    }
    let mut sum = 0.0;
    for i in 0..n - 1 {
        let mut best = f64::NEG_INFINITY;
        for b in i..n - 1 {
            best = best.max(table.get(b, i));
        }
        sum += best - table.get(n - 1, i);
    }
    Ok(sum / (n - 1) as f64)
}

//! Evaluation metrics for depth maps, point clouds, and screen-space fields.
//!
//! Depth is compared after a scale-and-shift alignment (the reconstruction
//! is scale-free, so raw depths are only defined up to an affine map).
//! Clouds are compared by symmetric chamfer distance — optionally after a
//! least-squares isotropic rescale — and by LSIV, the RMSE after the best
//! single scale factor applied to paired points. All accumulations are
//! serial over fixed orders, so every metric is reproducible bit-for-bit.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::PointCloud;
use crate::fields::{PerspectiveField, PixelHeightMap};
use crate::grid::ScalarGrid;
use crate::kdtree::KdTree;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("inputs are {a_w}x{a_h} vs {b_w}x{b_h}")]
    DimsMismatch { a_w: u32, a_h: u32, b_w: u32, b_h: u32 },
    #[error("no overlapping valid pixels or paired points")]
    NoOverlap,
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("alignment is degenerate: prediction has (near-)zero variance")]
    DegenerateAlignment,
    #[error("scale fit is degenerate: predictions have (near-)zero norm")]
    DegenerateScale,
    #[error("no positive aligned predictions to score")]
    NoPositivePredictions,
    #[error("clouds of {a} and {b} points cannot be paired positionally")]
    PairingMismatch { a: usize, b: usize },
}

fn check_dims(a: &ScalarGrid, b: &ScalarGrid) -> Result<(), MetricsError> {
    if a.width() != b.width() || a.height() != b.height() {
        return Err(MetricsError::DimsMismatch {
            a_w: a.width(),
            a_h: a.height(),
            b_w: b.width(),
            b_h: b.height(),
        });
    }
    Ok(())
}

/// Pixels both depth maps can be scored on.
fn paired_depths(
    pred: &ScalarGrid,
    gt: &ScalarGrid,
    mask: Option<&ScalarGrid>,
) -> Result<Vec<(f64, f64)>, MetricsError> {
    check_dims(pred, gt)?;
    if let Some(m) = mask {
        check_dims(pred, m)?;
    }
    let mut pairs = Vec::new();
    for y in 0..pred.height() {
        for x in 0..pred.width() {
            let masked = mask.is_none_or(|m| m.get(0, x, y) > 0.5);
            if !masked || !pred.is_valid(x, y) || !gt.is_valid(x, y) {
                continue;
            }
            let p = f64::from(pred.get(0, x, y));
            let g = f64::from(gt.get(0, x, y));
            if p.is_finite() && g.is_finite() && g > 0.0 {
                pairs.push((p, g));
            }
        }
    }
    if pairs.is_empty() {
        return Err(MetricsError::NoOverlap);
    }
    Ok(pairs)
}

/// Least-squares `(scale, shift)` mapping predicted depth onto ground truth
/// over the shared valid pixels.
pub fn align_scale_shift(
    pred: &ScalarGrid,
    gt: &ScalarGrid,
    mask: Option<&ScalarGrid>,
) -> Result<(f64, f64), MetricsError> {
    let pairs = paired_depths(pred, gt, mask)?;
    let n = pairs.len() as f64;
    let (mut sp, mut sg) = (0.0, 0.0);
    for &(p, g) in &pairs {
        sp += p;
        sg += g;
    }
    let (mp, mg) = (sp / n, sg / n);
    let (mut cov, mut var) = (0.0, 0.0);
    for &(p, g) in &pairs {
        cov += (p - mp) * (g - mg);
        var += (p - mp) * (p - mp);
    }
    if var <= 1e-24 {
        return Err(MetricsError::DegenerateAlignment);
    }
    let s = cov / var;
    Ok((s, mg - s * mp))
}

/// AbsRel and δ₁ accuracy of an already-aligned depth map.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct DepthAccuracy {
    /// Mean |pred − gt| / gt over pixels with positive aligned predictions.
    pub absrel: f64,
    /// Fraction of evaluated pixels with max(pred/gt, gt/pred) < 1.25.
    /// Non-positive aligned predictions count as failures.
    pub delta1: f64,
    pub evaluated: usize,
    /// Pixels whose aligned prediction was ≤ 0; excluded from AbsRel.
    pub nonpositive_pred: usize,
}

pub fn absrel_delta1(
    pred_aligned: &ScalarGrid,
    gt: &ScalarGrid,
    mask: Option<&ScalarGrid>,
) -> Result<DepthAccuracy, MetricsError> {
    let pairs = paired_depths(pred_aligned, gt, mask)?;
    let mut absrel_sum = 0.0;
    let mut hits = 0usize;
    let mut nonpositive = 0usize;
    for &(p, g) in &pairs {
        if p <= 0.0 {
            nonpositive += 1;
            continue;
        }
        absrel_sum += (p - g).abs() / g;
        if (p / g).max(g / p) < 1.25 {
            hits += 1;
        }
    }
    let scored = pairs.len() - nonpositive;
    if scored == 0 {
        return Err(MetricsError::NoPositivePredictions);
    }
    Ok(DepthAccuracy {
        absrel: absrel_sum / scored as f64,
        delta1: hits as f64 / pairs.len() as f64,
        evaluated: pairs.len(),
        nonpositive_pred: nonpositive,
    })
}

/// Convenience: align, then score. Returns the alignment too.
pub fn aligned_depth_accuracy(
    pred: &ScalarGrid,
    gt: &ScalarGrid,
    mask: Option<&ScalarGrid>,
) -> Result<(DepthAccuracy, (f64, f64)), MetricsError> {
    let (s, t) = align_scale_shift(pred, gt, mask)?;
    let mut aligned = pred.clone();
    for v in aligned.data_mut() {
        *v = (f64::from(*v) * s + t) as f32;
    }
    Ok((absrel_delta1(&aligned, gt, mask)?, (s, t)))
}

/// Symmetric chamfer distance: the average of mean nearest-neighbor
/// Euclidean distances in both directions.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> Result<f64, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    let mean_nn = |from: &PointCloud, to: &PointCloud| {
        let tree = KdTree::build(&to.points);
        let mut sum = 0.0;
        for p in &from.points {
            sum += tree.nearest_squared(p).sqrt();
        }
        sum / from.points.len() as f64
    };
    Ok(0.5 * (mean_nn(a, b) + mean_nn(b, a)))
}

/// Chamfer distance with the prediction rescaled by the LSIV scale first
/// (the reconstruction's global scale is arbitrary, so comparing without a
/// scale correction mostly measures that nuisance factor). `pre_scale:
/// false` compares the raw clouds.
pub fn chamfer_distance_scaled(
    pred: &PointCloud,
    gt: &PointCloud,
    pre_scale: bool,
) -> Result<f64, MetricsError> {
    if !pre_scale {
        return chamfer_distance(pred, gt);
    }
    let fit = lsiv(pred, gt)?;
    let mut scaled = pred.clone();
    for p in &mut scaled.points {
        *p *= fit.scale;
    }
    chamfer_distance(&scaled, gt)
}

/// Least-squares isotropic-scale fit and its residual.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ScaleFit {
    /// s* = Σ⟨p, g⟩ / Σ⟨p, p⟩ over paired points.
    pub scale: f64,
    /// RMSE of ‖s*·p − g‖ over the pairs.
    pub rmse: f64,
    pub pairs: usize,
}

/// Pairs two clouds point-by-point: by shared source-pixel indices when
/// both carry them, positionally otherwise (equal lengths required).
fn paired_points(
    pred: &PointCloud,
    gt: &PointCloud,
) -> Result<Vec<(Vector3<f64>, Vector3<f64>)>, MetricsError> {
    if pred.is_empty() || gt.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    match (&pred.pixel_indices, &gt.pixel_indices) {
        (Some(pi), Some(gi)) => {
            let gt_by_index: std::collections::HashMap<u32, usize> =
                gi.iter().enumerate().map(|(i, &idx)| (idx, i)).collect();
            let mut pairs = Vec::new();
            for (i, idx) in pi.iter().enumerate() {
                if let Some(&j) = gt_by_index.get(idx) {
                    pairs.push((pred.points[i], gt.points[j]));
                }
            }
            if pairs.is_empty() {
                return Err(MetricsError::NoOverlap);
            }
            Ok(pairs)
        }
        _ => {
            if pred.len() != gt.len() {
                return Err(MetricsError::PairingMismatch { a: pred.len(), b: gt.len() });
            }
            Ok(pred.points.iter().copied().zip(gt.points.iter().copied()).collect())
        }
    }
}

/// Least-squares isotropic-scale-invariant residual between paired clouds.
pub fn lsiv(pred: &PointCloud, gt: &PointCloud) -> Result<ScaleFit, MetricsError> {
    let pairs = paired_points(pred, gt)?;
    let (mut num, mut den) = (0.0, 0.0);
    for &(p, g) in &pairs {
        num += p.dot(&g);
        den += p.dot(&p);
    }
    if den <= 1e-24 {
        return Err(MetricsError::DegenerateScale);
    }
    let scale = num / den;
    let mut sq = 0.0;
    for &(p, g) in &pairs {
        sq += (p * scale - g).norm_squared();
    }
    Ok(ScaleFit { scale, rmse: (sq / pairs.len() as f64).sqrt(), pairs: pairs.len() })
}

/// Mean L1 errors of the screen-space fields.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct FieldErrors {
    /// Mean |Δheight| in pixels, pooled over front and back channels.
    pub height_l1_px: f64,
    pub latitude_l1_deg: f64,
    /// Mean up-angle error in degrees, wrapped to [0°, 180°].
    pub up_l1_deg: f64,
    pub pixels: usize,
    /// Masked pixels whose predicted up vector failed to decode.
    pub undecodable_up: usize,
}

/// Absolute angular difference wrapped onto [0°, 180°].
fn wrapped_degrees(a_rad: f64, b_rad: f64) -> f64 {
    let mut d = (a_rad - b_rad).to_degrees().abs() % 360.0;
    if d > 180.0 {
        d = 360.0 - d;
    }
    d
}

pub fn field_errors(
    pred_heights: &PixelHeightMap,
    pred_field: &PerspectiveField,
    gt_heights: &PixelHeightMap,
    gt_field: &PerspectiveField,
    mask: Option<&ScalarGrid>,
) -> Result<FieldErrors, MetricsError> {
    check_dims(&pred_heights.front, &gt_heights.front)?;
    check_dims(&pred_field.latitude, &gt_field.latitude)?;
    check_dims(&pred_heights.front, &pred_field.latitude)?;
    if let Some(m) = mask {
        check_dims(&pred_heights.front, m)?;
    }
    let (mut h_sum, mut lat_sum, mut up_sum) = (0.0, 0.0, 0.0);
    let mut n = 0usize;
    let mut undecodable = 0usize;
    for y in 0..gt_heights.height() {
        for x in 0..gt_heights.width() {
            let masked = mask.is_none_or(|m| m.get(0, x, y) > 0.5);
            if !masked
                || !pred_heights.valid_at(x, y)
                || !gt_heights.valid_at(x, y)
                || !pred_field.valid_at(x, y)
                || !gt_field.valid_at(x, y)
            {
                continue;
            }
            let gt_up = match gt_field.up_vector(x, y) {
                Ok(u) => u,
                Err(_) => continue,
            };
            let pred_up = match pred_field.up_vector(x, y) {
                Ok(u) => u,
                Err(_) => {
                    undecodable += 1;
                    continue;
                }
            };
            let (pf, pb) = pred_heights.heights_px(x, y);
            let (gf, gb) = gt_heights.heights_px(x, y);
            h_sum += (pf - gf).abs() + (pb - gb).abs();
            lat_sum += (pred_field.latitude_radians(x, y) - gt_field.latitude_radians(x, y))
                .to_degrees()
                .abs();
            up_sum += wrapped_degrees(
                crate::fields::up_angle_from_vector(pred_up),
                crate::fields::up_angle_from_vector(gt_up),
            );
            n += 1;
        }
    }
    if n == 0 {
        return Err(MetricsError::NoOverlap);
    }
    Ok(FieldErrors {
        height_l1_px: h_sum / (2 * n) as f64,
        latitude_l1_deg: lat_sum / n as f64,
        up_l1_deg: up_sum / n as f64,
        pixels: n,
        undecodable_up: undecodable,
    })
}

/// One evaluated sample, ready for aggregation.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct EvalReport {
    pub absrel: f64,
    pub delta1: f64,
    pub chamfer: f64,
    pub lsiv_rmse: f64,
    pub height_l1_px: f64,
    pub latitude_l1_deg: f64,
    pub up_l1_deg: f64,
}

impl EvalReport {
    fn zeros() -> Self {
        Self {
            absrel: 0.0,
            delta1: 0.0,
            chamfer: 0.0,
            lsiv_rmse: 0.0,
            height_l1_px: 0.0,
            latitude_l1_deg: 0.0,
            up_l1_deg: 0.0,
        }
    }

    fn add(&mut self, o: &Self) {
        self.absrel += o.absrel;
        self.delta1 += o.delta1;
        self.chamfer += o.chamfer;
        self.lsiv_rmse += o.lsiv_rmse;
        self.height_l1_px += o.height_l1_px;
        self.latitude_l1_deg += o.latitude_l1_deg;
        self.up_l1_deg += o.up_l1_deg;
    }

    fn scale(&mut self, k: f64) {
        self.absrel *= k;
        self.delta1 *= k;
        self.chamfer *= k;
        self.lsiv_rmse *= k;
        self.height_l1_px *= k;
        self.latitude_l1_deg *= k;
        self.up_l1_deg *= k;
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct BucketStats {
    pub count: usize,
    pub mean: Option<EvalReport>,
}

/// Per-sample reports bucketed by how far the sample's pitch sits from the
/// dataset mean pitch: near (< 10°), mid (10°–30°), far (> 30°).
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct BucketedReport {
    pub mean_pitch_deg: f64,
    pub near: BucketStats,
    pub mid: BucketStats,
    pub far: BucketStats,
}

pub fn pitch_bucket_report(samples: &[(f64, EvalReport)]) -> Result<BucketedReport, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::NoOverlap);
    }
    let mean_pitch = samples.iter().map(|(p, _)| p).sum::<f64>() / samples.len() as f64;
    let mut sums = [EvalReport::zeros(); 3];
    let mut counts = [0usize; 3];
    for &(pitch, report) in samples {
        let d = (pitch - mean_pitch).abs();
        let bucket = if d < 10.0 {
            0
        } else if d <= 30.0 {
            1
        } else {
            2
        };
        sums[bucket].add(&report);
        counts[bucket] += 1;
    }
    let stats = |i: usize| {
        let mean = (counts[i] > 0).then(|| {
            let mut m = sums[i];
            m.scale(1.0 / counts[i] as f64);
            m
        });
        BucketStats { count: counts[i], mean }
    };
    Ok(BucketedReport {
        mean_pitch_deg: mean_pitch,
        near: stats(0),
        mid: stats(1),
        far: stats(2),
    })
}

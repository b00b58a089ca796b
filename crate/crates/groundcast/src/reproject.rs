//! Pixel heights + perspective field (or a camera) → scale-invariant 3-D.
//!
//! Each masked pixel p with pixel height h and local up vector u drops a
//! foot pixel p̃ = p − h·u. Unprojecting both through M = (K·R)⁻¹ gives two
//! world rays: the surface ray (X, Y, Z) and the ground ray (X̃, Ỹ, Z̃).
//! Fixing the ground plane at z = −1 scales the ground ray to
//! (Xₙ, Yₙ, −1) with Xₙ = −X̃/Z̃, Yₙ = −Ỹ/Z̃; the surface point and its
//! ground projection share horizontal coordinates, which pins the surface
//! ray's scale d = (X·Xₙ + Y·Yₙ)/(X² + Y²) in least squares. The surface
//! point is d·(X, Y, Z).
//!
//! Everything is invariant to the true scene scale: scaling the world moves
//! every reconstruction by exactly one global factor (the camera height),
//! which the z = −1 convention divides away.

use nalgebra::{Matrix3, Vector2, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::camera::{CameraIntrinsics, CameraPose};
use crate::cloud::PointCloud;
use crate::fields::{FieldError, PerspectiveField, PixelHeightMap};
use crate::grid::ScalarGrid;

/// Foot pixels whose ground ray has |Z̃| at or below this sit on the horizon
/// and carry no depth information.
pub const HORIZON_EPS: f64 = 1e-4;

/// Surface rays with X² + Y² at or below this point straight at the nadir
/// or zenith, where the shared-horizontal-coordinates constraint vanishes.
pub const NADIR_EPS: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ReprojectError {
    #[error("{invalid} of {masked} masked pixels failed to reconstruct")]
    TooManyInvalid { invalid: usize, masked: usize },
    #[error("no masked pixels to reconstruct")]
    EmptyMask,
    #[error("mask is {mask_w}x{mask_h} but fields are {field_w}x{field_h}")]
    DimsMismatch { mask_w: u32, mask_h: u32, field_w: u32, field_h: u32 },
    #[error("point cloud carries no source-pixel indices")]
    MissingPixelIndices,
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("camera estimation failed: {0}")]
    Estimate(#[from] crate::camera_est::EstimateError),
}

/// Why a single pixel failed to reconstruct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PixelInvalid {
    #[error("foot pixel unprojects at or above the horizon")]
    FootAtHorizon,
    #[error("surface ray is nadir/zenith degenerate")]
    NadirDegenerate,
    #[error("solved depth scale is not positive")]
    NonPositiveScale,
}

/// One reconstructed pixel: the surface point, its vertical ground
/// projection (z = −1 exactly, sharing the point's horizontal coordinates),
/// and the solved depth scale d.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructedPixel {
    pub point: Vector3<f64>,
    pub foot: Vector3<f64>,
    pub depth_scale: f64,
}

/// Ground projection of a pixel in image space: p displaced by `height`
/// pixels against the local up direction.
pub fn foot_pixel(p: Vector2<f64>, height: f64, up: Vector2<f64>) -> Vector2<f64> {
    p - up * height
}

/// M = (K·R)⁻¹ = Rᵀ·K⁻¹, mapping homogeneous pixels to world-frame rays.
pub fn unprojection_matrix(intr: &CameraIntrinsics, pose: &CameraPose) -> Matrix3<f64> {
    pose.rotation().transpose() * intr.inverse_intrinsic_matrix()
}

/// Reconstructs the surface point seen at pixel `p` whose ground projection
/// appears at pixel `p_foot`.
pub fn reconstruct_point(
    p: Vector2<f64>,
    p_foot: Vector2<f64>,
    intr: &CameraIntrinsics,
    pose: &CameraPose,
) -> Result<ReconstructedPixel, PixelInvalid> {
    reconstruct_with_matrix(&unprojection_matrix(intr, pose), p, p_foot)
}

/// [`reconstruct_point`] against a precomputed unprojection matrix; the bulk
/// path shares one matrix across all pixels.
pub fn reconstruct_with_matrix(
    m: &Matrix3<f64>,
    p: Vector2<f64>,
    p_foot: Vector2<f64>,
) -> Result<ReconstructedPixel, PixelInvalid> {
    let ground = m * Vector3::new(p_foot.x, p_foot.y, 1.0);
    if ground.z >= -HORIZON_EPS {
        return Err(PixelInvalid::FootAtHorizon);
    }
    let xn = -ground.x / ground.z;
    let yn = -ground.y / ground.z;

    if p == p_foot {
        // Zero height: the surface point is its own ground projection.
        let point = Vector3::new(xn, yn, -1.0);
        return Ok(ReconstructedPixel { point, foot: point, depth_scale: -1.0 / ground.z });
    }

    let surface = m * Vector3::new(p.x, p.y, 1.0);
    let r2 = surface.x * surface.x + surface.y * surface.y;
    if r2 <= NADIR_EPS {
        return Err(PixelInvalid::NadirDegenerate);
    }
    let d = (surface.x * xn + surface.y * yn) / r2;
    if d <= 0.0 {
        return Err(PixelInvalid::NonPositiveScale);
    }
    let point = surface * d;
    let foot = Vector3::new(point.x, point.y, -1.0);
    Ok(ReconstructedPixel { point, foot, depth_scale: d })
}

/// Scale-invariant reconstruction of every masked pixel.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// First-entry surface points.
    pub front: PointCloud,
    /// Last-exit surface points (from the back heights).
    pub back: PointCloud,
    /// Ground projections of the front points; z = −1 exactly.
    pub feet: PointCloud,
    /// Camera the unprojection used (given or estimated).
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
    /// Masked pixels that failed reconstruction.
    pub invalid_pixels: usize,
}

/// Per-pixel result rows are assembled in raster order regardless of the
/// parallel schedule, so the clouds are deterministic.
pub fn reconstruct_cloud(
    heights: &PixelHeightMap,
    field: &PerspectiveField,
    mask: Option<&ScalarGrid>,
    intr: &CameraIntrinsics,
    pose: &CameraPose,
) -> Result<Reconstruction, ReprojectError> {
    let (w, h) = (heights.width(), heights.height());
    if field.width() != w || field.height() != h {
        return Err(ReprojectError::DimsMismatch {
            mask_w: w,
            mask_h: h,
            field_w: field.width(),
            field_h: field.height(),
        });
    }
    if let Some(mask) = mask {
        if mask.width() != w || mask.height() != h {
            return Err(ReprojectError::DimsMismatch {
                mask_w: mask.width(),
                mask_h: mask.height(),
                field_w: w,
                field_h: h,
            });
        }
    }
    let m = unprojection_matrix(intr, pose);

    struct PixelOut {
        index: u32,
        front: ReconstructedPixel,
        back: ReconstructedPixel,
    }
    enum PixelState {
        Skipped,
        Invalid,
        Ok(Box<PixelOut>),
    }

    let masked_at = |x: u32, y: u32| {
        mask.is_none_or(|m| m.get(0, x, y) > 0.5)
            && heights.valid_at(x, y)
            && field.valid_at(x, y)
    };

    let rows: Vec<Vec<PixelState>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| {
                    if !masked_at(x, y) {
                        return PixelState::Skipped;
                    }
                    let up = match field.up_vector(x, y) {
                        Ok(u) => u,
                        Err(_) => return PixelState::Invalid,
                    };
                    let (h_front, h_back) = heights.heights_px(x, y);
                    let p = CameraIntrinsics::pixel_center(x, y);
                    let front = reconstruct_with_matrix(&m, p, foot_pixel(p, h_front, up));
                    let back = reconstruct_with_matrix(&m, p, foot_pixel(p, h_back, up));
                    match (front, back) {
                        (Ok(front), Ok(back)) => PixelState::Ok(Box::new(PixelOut {
                            index: y * w + x,
                            front,
                            back,
                        })),
                        _ => PixelState::Invalid,
                    }
                })
                .collect()
        })
        .collect();

    let mut front = PointCloud::new();
    let mut back = PointCloud::new();
    let mut feet = PointCloud::new();
    let mut indices = Vec::new();
    let mut masked = 0usize;
    let mut invalid = 0usize;
    for state in rows.into_iter().flatten() {
        match state {
            PixelState::Skipped => {}
            PixelState::Invalid => {
                masked += 1;
                invalid += 1;
            }
            PixelState::Ok(out) => {
                masked += 1;
                front.points.push(out.front.point);
                back.points.push(out.back.point);
                feet.points.push(out.front.foot);
                indices.push(out.index);
            }
        }
    }
    if masked == 0 {
        return Err(ReprojectError::EmptyMask);
    }
    if invalid * 2 > masked {
        return Err(ReprojectError::TooManyInvalid { invalid, masked });
    }
    front.pixel_indices = Some(indices.clone());
    back.pixel_indices = Some(indices.clone());
    feet.pixel_indices = Some(indices);
    Ok(Reconstruction {
        front,
        back,
        feet,
        intrinsics: intr.clone(),
        pose: *pose,
        invalid_pixels: invalid,
    })
}

/// Reconstruction when no camera is known: recover one from the field by
/// grid search first.
pub fn reconstruct_cloud_estimating_camera(
    heights: &PixelHeightMap,
    field: &PerspectiveField,
    mask: Option<&ScalarGrid>,
    grid: &crate::camera_est::GridSpec,
) -> Result<Reconstruction, ReprojectError> {
    let estimate = crate::camera_est::estimate_camera(field, None, grid)?;
    let intr = CameraIntrinsics::new(estimate.fov_deg, heights.width(), heights.height())
        .expect("estimator returns a valid fov");
    let pose = CameraPose::new(estimate.pitch_deg, estimate.roll_deg)
        .expect("estimator returns valid angles");
    reconstruct_cloud(heights, field, mask, &intr, &pose)
}

/// Depth map of a reconstructed cloud: the camera-forward component of each
/// point, written back to its source pixel. Pixels without a point are
/// invalid.
pub fn depth_from_reconstruction(
    cloud: &PointCloud,
    intr: &CameraIntrinsics,
    pose: &CameraPose,
) -> Result<ScalarGrid, ReprojectError> {
    let indices = cloud.pixel_indices.as_ref().ok_or(ReprojectError::MissingPixelIndices)?;
    let (w, h) = (intr.width(), intr.height());
    let n = w as usize * h as usize;
    let mut data = vec![f32::NAN; n];
    let mut valid = vec![false; n];
    let r = pose.rotation();
    for (point, &index) in cloud.points.iter().zip(indices) {
        let depth = (r * point).z;
        data[index as usize] = depth as f32;
        valid[index as usize] = true;
    }
    let mut grid = ScalarGrid::from_data(w, h, 1, data).expect("sized above");
    grid.set_mask(valid).expect("sized above");
    Ok(grid)
}

//! Screen-space relighting of reconstructed clouds: cast shadows onto the
//! ground plane and mirror the cloud into a planar reflection.
//!
//! Both effects only need the scale-free reconstruction and its camera —
//! no scene geometry. Shadow receivers and reflectors are the ground plane
//! itself, which the reconstruction pins at a known height.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{project_camera, CameraIntrinsics, CameraPose};
use crate::cloud::{GroundPlane, PointCloud};
use crate::grid::ScalarGrid;

#[derive(Debug, Error)]
pub enum RelightError {
    #[error("directional light must point downward (z component {0} is not < 0)")]
    UpwardDirectional(f64),
    #[error("point light sits at z {light_z}, not above the ground plane z {ground_z}")]
    LightBelowGround { light_z: f64, ground_z: f64 },
    #[error("softness must be finite and non-negative, got {0}")]
    InvalidSoftness(f64),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("reflection needs per-point colors")]
    MissingColors,
    #[error("image is {a_w}x{a_h} but layer is {b_w}x{b_h}")]
    DimsMismatch { a_w: u32, a_h: u32, b_w: u32, b_h: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LightKind {
    /// Travel direction of the light; must point downward (z < 0).
    Directional { direction: Vector3<f64> },
    /// Position of the emitter; must sit above the ground plane.
    Point { position: Vector3<f64> },
}

/// A light to cast shadows from, with a screen-space softness (Gaussian σ
/// in pixels; 0 keeps the splat hard).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightSpec {
    #[serde(flatten)]
    pub kind: LightKind,
    #[serde(default)]
    pub softness_px: f64,
}

impl LightSpec {
    pub fn validate(&self, ground: GroundPlane) -> Result<(), RelightError> {
        if !(self.softness_px.is_finite() && self.softness_px >= 0.0) {
            return Err(RelightError::InvalidSoftness(self.softness_px));
        }
        match self.kind {
            LightKind::Directional { direction } => {
                if !(direction.z < 0.0) {
                    return Err(RelightError::UpwardDirectional(direction.z));
                }
            }
            LightKind::Point { position } => {
                if !(position.z > ground.z) {
                    return Err(RelightError::LightBelowGround {
                        light_z: position.z,
                        ground_z: ground.z,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Shadow intensity layer in [0, 1] plus splat diagnostics.
#[derive(Debug, Clone)]
pub struct ShadowLayer {
    pub intensity: ScalarGrid,
    /// Points at or above a point light, which cast no ground shadow.
    pub skipped_above_light: usize,
}

/// Where point `p` shadows the ground under `light`, or `None` when it
/// cannot (at/above a point light).
fn ground_shadow_point(
    p: Vector3<f64>,
    ground: GroundPlane,
    kind: &LightKind,
) -> Option<Vector3<f64>> {
    match *kind {
        LightKind::Directional { direction } => {
            Some(p - direction * ((p.z - ground.z) / direction.z))
        }
        LightKind::Point { position } => {
            if p.z >= position.z {
                return None;
            }
            let t = (ground.z - position.z) / (p.z - position.z);
            Some(position + (p - position) * t)
        }
    }
}

/// Casts every cloud point onto the ground plane along the light and splats
/// the hits into a screen-space intensity layer.
///
/// Splat accumulation runs serially in point order, weights are clipped to
/// [0, 1], and the optional Gaussian blur is separable with a truncated,
/// renormalized kernel — the result is deterministic bit-for-bit.
pub fn cast_shadow(
    cloud: &PointCloud,
    ground: GroundPlane,
    light: &LightSpec,
    intr: &CameraIntrinsics,
    pose: &CameraPose,
) -> Result<ShadowLayer, RelightError> {
    light.validate(ground)?;
    if cloud.is_empty() {
        return Err(RelightError::EmptyCloud);
    }
    let (w, h) = (intr.width() as usize, intr.height() as usize);
    let mut accum = vec![0.0f64; w * h];
    let mut skipped = 0usize;
    let rot = pose.rotation();
    for p in &cloud.points {
        let Some(s) = ground_shadow_point(*p, ground, &light.kind) else {
            skipped += 1;
            continue;
        };
        let Some(px) = project_camera(intr, rot * s) else {
            continue;
        };
        splat_bilinear(&mut accum, w, h, px, 1.0);
    }
    for v in &mut accum {
        *v = v.clamp(0.0, 1.0);
    }
    if light.softness_px > 0.0 {
        accum = gaussian_blur(&accum, w, h, light.softness_px);
    }
    let data: Vec<f32> = accum.into_iter().map(|v| v as f32).collect();
    let intensity =
        ScalarGrid::from_data(intr.width(), intr.height(), 1, data).expect("sized above");
    Ok(ShadowLayer { intensity, skipped_above_light: skipped })
}

/// Distributes `weight` over the four pixels around a continuous image
/// position (pixel centers at integer + 0.5). Out-of-bounds taps drop.
fn splat_bilinear(accum: &mut [f64], w: usize, h: usize, px: Vector2<f64>, weight: f64) {
    let u = px.x - 0.5;
    let v = px.y - 0.5;
    let i0 = u.floor();
    let j0 = v.floor();
    let fx = u - i0;
    let fy = v - j0;
    for (di, wx) in [(0i64, 1.0 - fx), (1, fx)] {
        for (dj, wy) in [(0i64, 1.0 - fy), (1, fy)] {
            let i = i0 as i64 + di;
            let j = j0 as i64 + dj;
            if i >= 0 && j >= 0 && (i as usize) < w && (j as usize) < h {
                accum[j as usize * w + i as usize] += weight * wx * wy;
            }
        }
    }
}

/// Separable Gaussian with kernel truncated at 3σ and renormalized per
/// pixel at the borders (no mass invented outside the image).
fn gaussian_blur(src: &[f64], w: usize, h: usize, sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity(2 * radius as usize + 1);
    for k in -radius..=radius {
        kernel.push((-0.5 * (k as f64 / sigma).powi(2)).exp());
    }
    let pass = |input: &[f64], len: usize, lines: usize, stride_in: usize, stride_line: usize| {
        // Generic 1-D pass: `lines` independent lines of `len` samples.
        let mut out = vec![0.0f64; input.len()];
        for line in 0..lines {
            let base = line * stride_line;
            for i in 0..len {
                let mut acc = 0.0;
                let mut norm = 0.0;
                for (ki, kw) in kernel.iter().enumerate() {
                    let j = i as i64 + ki as i64 - radius;
                    if j >= 0 && (j as usize) < len {
                        acc += kw * input[base + j as usize * stride_in];
                        norm += kw;
                    }
                }
                out[base + i * stride_in] = acc / norm;
            }
        }
        out
    };
    let horizontal = pass(src, w, h, 1, w);
    pass(&horizontal, h, w, w, 1)
}

/// Darkens an RGB image by a shadow layer: out = rgb · (1 − strength·s).
pub fn composite_shadow(
    rgb: &ScalarGrid,
    shadow: &ScalarGrid,
    strength: f64,
) -> Result<ScalarGrid, RelightError> {
    if rgb.width() != shadow.width() || rgb.height() != shadow.height() {
        return Err(RelightError::DimsMismatch {
            a_w: rgb.width(),
            a_h: rgb.height(),
            b_w: shadow.width(),
            b_h: shadow.height(),
        });
    }
    let mut out = rgb.clone();
    for y in 0..rgb.height() {
        for x in 0..rgb.width() {
            let s = f64::from(shadow.get(0, x, y)).clamp(0.0, 1.0);
            let k = (1.0 - strength * s).clamp(0.0, 1.0) as f32;
            for c in 0..rgb.channels() {
                out.set(c, x, y, rgb.get(c, x, y) * k);
            }
        }
    }
    Ok(out)
}

/// Mirror of a point across the ground plane.
pub fn mirror_across(ground: GroundPlane, p: Vector3<f64>) -> Vector3<f64> {
    Vector3::new(p.x, p.y, 2.0 * ground.z - p.z)
}

/// Renders the cloud's planar reflection as an RGBA layer.
///
/// Every point is mirrored across the ground plane and rasterized to its
/// nearest pixel with a z-buffer (smallest camera depth wins; exact ties
/// keep the earliest point). Alpha fades exponentially with the source
/// point's height above the ground: `base_alpha · exp(−height/falloff)`.
pub fn render_reflection(
    cloud: &PointCloud,
    ground: GroundPlane,
    intr: &CameraIntrinsics,
    pose: &CameraPose,
    base_alpha: f64,
    falloff: f64,
) -> Result<ScalarGrid, RelightError> {
    if cloud.is_empty() {
        return Err(RelightError::EmptyCloud);
    }
    let colors = cloud.colors.as_ref().ok_or(RelightError::MissingColors)?;
    let (w, h) = (intr.width() as usize, intr.height() as usize);
    let mut depth = vec![f64::INFINITY; w * h];
    let mut rgba = vec![0.0f32; w * h * 4];
    let rot = pose.rotation();
    for (idx, p) in cloud.points.iter().enumerate() {
        let cam = rot * mirror_across(ground, *p);
        let Some(px) = project_camera(intr, cam) else {
            continue;
        };
        let (i, j) = (px.x.floor() as i64, px.y.floor() as i64);
        if i < 0 || j < 0 || i as usize >= w || j as usize >= h {
            continue;
        }
        let cell = j as usize * w + i as usize;
        if cam.z < depth[cell] {
            depth[cell] = cam.z;
            let alpha = (base_alpha * (-(p.z - ground.z) / falloff).exp()).clamp(0.0, 1.0);
            let color = colors[idx];
            rgba[cell] = color[0];
            rgba[w * h + cell] = color[1];
            rgba[2 * w * h + cell] = color[2];
            rgba[3 * w * h + cell] = alpha as f32;
        }
    }
    Ok(ScalarGrid::from_data(intr.width(), intr.height(), 4, rgba).expect("sized above"))
}

/// Alpha-blends a reflection layer under an RGB image:
/// out = a·layer + (1 − a)·rgb.
pub fn composite_reflection(
    rgb: &ScalarGrid,
    reflection: &ScalarGrid,
) -> Result<ScalarGrid, RelightError> {
    if rgb.width() != reflection.width() || rgb.height() != reflection.height() {
        return Err(RelightError::DimsMismatch {
            a_w: rgb.width(),
            a_h: rgb.height(),
            b_w: reflection.width(),
            b_h: reflection.height(),
        });
    }
    let mut out = rgb.clone();
    for y in 0..rgb.height() {
        for x in 0..rgb.width() {
            let a = reflection.get(3, x, y).clamp(0.0, 1.0);
            for c in 0..rgb.channels().min(3) {
                let blended = a * reflection.get(c, x, y) + (1.0 - a) * rgb.get(c, x, y);
                out.set(c, x, y, blended);
            }
        }
    }
    Ok(out)
}

//! Perspective fields and pixel height maps.
//!
//! The latitude of a pixel is the elevation angle of its viewing ray above
//! the horizontal: asin of the unit world ray's z component, in
//! [−π/2, π/2]. The up vector at a pixel is the image-space direction of
//! the projected world vertical there — the tangent of the image of any
//! vertical 3-D line through that pixel's ray, pointing toward the zenith.
//!
//! Up vectors are stored as (sin θ, cos θ) of the up *angle* θ, measured
//! from the straight-up image direction (0, −1); the vector form is
//! (sin θ, −cos θ). The angle form regresses without the 0/2π wrap.
//!
//! Pixel height maps hold, per masked pixel, the image-space distance in
//! pixels between a surface point and its ground projection, one channel
//! each for the object's front and back surface. `normalize_fields` puts
//! heights in units of image height and latitudes in [0, 1] — the ranges a
//! dense regressor trains against.

use nalgebra::{Vector2, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::camera::{CameraIntrinsics, CameraPose};
use crate::grid::{GridError, ScalarGrid};

/// Rays closer than this to the world ±z axis have no defined up direction.
/// Slightly wider than the documented 1e−6 rad contract so that a pitch of
/// −89.9999° at the principal pixel (1.745e−6 rad off nadir) is still
/// flagged, matching the documented degenerate case.
pub const ZENITH_EPS_RAD: f64 = 2e-6;

/// Decoded (sin, cos) tuples must have a norm this close to 1.
pub const UP_DECODE_NORM_RANGE: (f64, f64) = (0.9, 1.1);

#[derive(Debug, Error, PartialEq)]
pub enum FieldError {
    #[error("viewing ray is within {angle_rad:.3e} rad of the zenith/nadir; up direction undefined")]
    ZenithDegenerate { angle_rad: f64 },
    #[error("up tuple norm {norm:.4} outside [{}, {}]", UP_DECODE_NORM_RANGE.0, UP_DECODE_NORM_RANGE.1)]
    UpDecodeRange { norm: f64 },
    #[error("fields are already normalized")]
    AlreadyNormalized,
    #[error("fields are not normalized")]
    NotNormalized,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Latitude field (radians, or [0, 1] when normalized) plus the up-angle
/// field stored as two channels (sin θ, cos θ). Both grids share the same
/// validity mask; pixels whose ray is zenith-degenerate are invalid.
#[derive(Debug, Clone, PartialEq)]
pub struct PerspectiveField {
    pub latitude: ScalarGrid,
    pub up: ScalarGrid,
    pub normalized: bool,
}

impl PerspectiveField {
    pub fn new(latitude: ScalarGrid, up: ScalarGrid) -> Result<Self, FieldError> {
        latitude.same_dims(&up)?;
        assert_eq!(latitude.channels(), 1, "latitude field has one channel");
        assert_eq!(up.channels(), 2, "up field has (sin, cos) channels");
        Ok(Self { latitude, up, normalized: false })
    }

    pub fn width(&self) -> u32 {
        self.latitude.width()
    }

    pub fn height(&self) -> u32 {
        self.latitude.height()
    }

    pub fn valid_at(&self, x: u32, y: u32) -> bool {
        self.latitude.is_valid(x, y) && self.up.is_valid(x, y)
    }

    /// Latitude in radians regardless of normalization state.
    pub fn latitude_radians(&self, x: u32, y: u32) -> f64 {
        let v = f64::from(self.latitude.get(0, x, y));
        if self.normalized {
            v * std::f64::consts::PI - std::f64::consts::FRAC_PI_2
        } else {
            v
        }
    }

    /// Decoded unit up vector in image space.
    pub fn up_vector(&self, x: u32, y: u32) -> Result<Vector2<f64>, FieldError> {
        let s = f64::from(self.up.get(0, x, y));
        let c = f64::from(self.up.get(1, x, y));
        let theta = decode_up_angle(s, c)?;
        Ok(up_vector_from_angle(theta))
    }
}

/// Front and back surface pixel heights over a shared object mask.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelHeightMap {
    pub front: ScalarGrid,
    pub back: ScalarGrid,
    pub normalized: bool,
}

impl PixelHeightMap {
    pub fn new(front: ScalarGrid, back: ScalarGrid) -> Result<Self, FieldError> {
        front.same_dims(&back)?;
        assert_eq!(front.channels(), 1);
        assert_eq!(back.channels(), 1);
        Ok(Self { front, back, normalized: false })
    }

    pub fn width(&self) -> u32 {
        self.front.width()
    }

    pub fn height(&self) -> u32 {
        self.front.height()
    }

    pub fn valid_at(&self, x: u32, y: u32) -> bool {
        self.front.is_valid(x, y) && self.back.is_valid(x, y)
    }

    /// Front/back heights in raw pixels regardless of normalization state.
    pub fn heights_px(&self, x: u32, y: u32) -> (f64, f64) {
        let scale = if self.normalized { f64::from(self.front.height()) } else { 1.0 };
        (f64::from(self.front.get(0, x, y)) * scale, f64::from(self.back.get(0, x, y)) * scale)
    }
}

/// Latitude (radians) of the viewing ray through a pixel.
pub fn latitude_at(intr: &CameraIntrinsics, pose: &CameraPose, pixel: Vector2<f64>) -> f64 {
    crate::camera::pixel_ray_world(intr, pose, pixel).z.clamp(-1.0, 1.0).asin()
}

/// Unit image-space up vector at a pixel.
///
/// With a the camera-frame ray and g the camera-frame world-up axis, the
/// projected vertical direction is ∝ (gₓ·a_z − aₓ·g_z, g_y·a_z − a_y·g_z):
/// the image-plane part of the projection Jacobian applied to the world up
/// axis (moving along the ray itself does not move the pixel, so no
/// tangential decomposition is needed).
pub fn up_vector_at(
    intr: &CameraIntrinsics,
    pose: &CameraPose,
    pixel: Vector2<f64>,
) -> Result<Vector2<f64>, FieldError> {
    let f = intr.focal();
    let c = intr.principal_point();
    let a = Vector3::new(pixel.x - c.x, pixel.y - c.y, f);
    let g = pose.world_up_in_camera();

    // Degeneracy is a property of the world ray, not the roll: the ray is
    // within ZENITH_EPS_RAD of ±z iff its horizontal component is tiny.
    // sin(angle to nearest pole) = √(1 − cos²) and is accurate enough at
    // this scale; small-angle ≈ the angle itself.
    let d = (a.dot(&g) / a.norm()).clamp(-1.0, 1.0);
    let sin_to_pole = (1.0 - d * d).sqrt();
    if sin_to_pole < ZENITH_EPS_RAD {
        return Err(FieldError::ZenithDegenerate { angle_rad: sin_to_pole.asin() });
    }

    let u = Vector2::new(g.x * a.z - a.x * g.z, g.y * a.z - a.y * g.z);
    Ok(u.normalize())
}

/// Angle of an image-space up vector, measured from straight-up (0, −1).
pub fn up_angle_from_vector(u: Vector2<f64>) -> f64 {
    u.x.atan2(-u.y)
}

/// Unit up vector for an up angle.
pub fn up_vector_from_angle(theta: f64) -> Vector2<f64> {
    Vector2::new(theta.sin(), -theta.cos())
}

/// (sin θ, cos θ) tuple for regression-friendly storage.
pub fn encode_up_angle(theta: f64) -> (f64, f64) {
    (theta.sin(), theta.cos())
}

/// Up angle from a (sin, cos) tuple; tolerates mild denormalization.
pub fn decode_up_angle(sin_theta: f64, cos_theta: f64) -> Result<f64, FieldError> {
    let norm = sin_theta.hypot(cos_theta);
    if !(norm.is_finite() && norm >= UP_DECODE_NORM_RANGE.0 && norm <= UP_DECODE_NORM_RANGE.1) {
        return Err(FieldError::UpDecodeRange { norm });
    }
    Ok(sin_theta.atan2(cos_theta))
}

/// Renders the analytic perspective field of a camera. Pixels with
/// zenith-degenerate rays are masked invalid (their latitude is still ±π/2
/// but carries no up direction). The field depends only on fov, pitch, and
/// roll — never on yaw — and is evaluated at pixel centers.
pub fn render_perspective_field(intr: &CameraIntrinsics, pose: &CameraPose) -> PerspectiveField {
    let (w, h) = (intr.width(), intr.height());
    let n = w as usize * h as usize;
    let mut lat = vec![0f32; n];
    let mut up_sin = vec![0f32; n];
    let mut up_cos = vec![0f32; n];
    let mut mask = vec![true; n];

    let rows = lat
        .par_chunks_mut(w as usize)
        .zip(up_sin.par_chunks_mut(w as usize))
        .zip(up_cos.par_chunks_mut(w as usize))
        .zip(mask.par_chunks_mut(w as usize));
    rows.enumerate().for_each(|(y, (((lat_row, sin_row), cos_row), mask_row))| {
        for x in 0..w as usize {
            let pixel = CameraIntrinsics::pixel_center(x as u32, y as u32);
            lat_row[x] = latitude_at(intr, pose, pixel) as f32;
            match up_vector_at(intr, pose, pixel) {
                Ok(u) => {
                    let (s, c) = encode_up_angle(up_angle_from_vector(u));
                    sin_row[x] = s as f32;
                    cos_row[x] = c as f32;
                }
                Err(_) => {
                    sin_row[x] = f32::NAN;
                    cos_row[x] = f32::NAN;
                    mask_row[x] = false;
                }
            }
        }
    });

    let mut latitude = ScalarGrid::from_data(w, h, 1, lat).expect("sized above");
    let mut up = ScalarGrid::from_data(w, h, 2, [up_sin, up_cos].concat()).expect("sized above");
    if mask.iter().any(|v| !v) {
        latitude.set_mask(mask.clone()).expect("sized above");
        up.set_mask(mask).expect("sized above");
    }
    PerspectiveField { latitude, up, normalized: false }
}

/// Puts heights in units of image height and latitude in [0, 1]
/// ((lat + π/2) / π). The up channels are already range-bounded.
pub fn normalize_fields(
    heights: &mut PixelHeightMap,
    field: &mut PerspectiveField,
) -> Result<(), FieldError> {
    if heights.normalized || field.normalized {
        return Err(FieldError::AlreadyNormalized);
    }
    let inv_h = 1.0 / f64::from(heights.front.height());
    for v in heights.front.data_mut().iter_mut().chain(heights.back.data_mut().iter_mut()) {
        *v = (f64::from(*v) * inv_h) as f32;
    }
    for v in field.latitude.data_mut().iter_mut() {
        *v = ((f64::from(*v) + std::f64::consts::FRAC_PI_2) / std::f64::consts::PI) as f32;
    }
    heights.normalized = true;
    field.normalized = true;
    Ok(())
}

/// Inverse of [`normalize_fields`].
pub fn denormalize_fields(
    heights: &mut PixelHeightMap,
    field: &mut PerspectiveField,
) -> Result<(), FieldError> {
    if !heights.normalized || !field.normalized {
        return Err(FieldError::NotNormalized);
    }
    let h = f64::from(heights.front.height());
    for v in heights.front.data_mut().iter_mut().chain(heights.back.data_mut().iter_mut()) {
        *v = (f64::from(*v) * h) as f32;
    }
    for v in field.latitude.data_mut().iter_mut() {
        *v = (f64::from(*v) * std::f64::consts::PI - std::f64::consts::FRAC_PI_2) as f32;
    }
    heights.normalized = false;
    field.normalized = false;
    Ok(())
}

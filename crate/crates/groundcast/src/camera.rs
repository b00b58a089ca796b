//! Pinhole camera model and the shared frame conventions.
//!
//! World frame: right-handed, z up. The camera sits at the origin and looks
//! along world +y when pitch and roll are zero. Camera frame: x right,
//! y down, z forward. [`CameraPose::rotation`] maps world directions into
//! camera directions; yaw never appears because all fields derived here are
//! invariant to rotations about the world z axis.
//!
//! Pixels are continuous coordinates with the center of integer cell (i, j)
//! at (i + 0.5, j + 0.5). The principal point defaults to the image center.
//! Focal length comes from the vertical field of view: f = H / (2 tan(α/2)).

use nalgebra::{Matrix3, Vector2, Vector3};
use thiserror::Error;

/// Camera rays closer than this to the optical plane are unprojectable.
pub const MIN_FORWARD: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("vertical fov must lie strictly inside (0, 180) degrees, got {0}")]
    InvalidFov(f64),
    #[error("image dimensions must be nonzero, got {width}x{height}")]
    InvalidDimensions { width: u32, height: u32 },
    #[error("pitch must lie in [-90, 90] degrees, got {0}")]
    InvalidPitch(f64),
    #[error("roll must lie in (-180, 180] degrees, got {0}")]
    InvalidRoll(f64),
}

/// Focal length in pixels from a vertical field of view and image height.
pub fn focal_from_fov(fov_deg: f64, image_height: u32) -> Result<f64, CameraError> {
    if !fov_deg.is_finite() || fov_deg <= 0.0 || fov_deg >= 180.0 {
        return Err(CameraError::InvalidFov(fov_deg));
    }
    Ok(f64::from(image_height) / (2.0 * (fov_deg.to_radians() / 2.0).tan()))
}

/// Vertical field of view, image size, and principal point of a pinhole camera.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraIntrinsics {
    fov_deg: f64,
    width: u32,
    height: u32,
    principal_point: Vector2<f64>,
}

impl CameraIntrinsics {
    /// Principal point defaults to the image center (W/2, H/2).
    pub fn new(fov_deg: f64, width: u32, height: u32) -> Result<Self, CameraError> {
        if width == 0 || height == 0 {
            return Err(CameraError::InvalidDimensions { width, height });
        }
        focal_from_fov(fov_deg, height)?;
        Ok(Self {
            fov_deg,
            width,
            height,
            principal_point: Vector2::new(f64::from(width) / 2.0, f64::from(height) / 2.0),
        })
    }

    pub fn with_principal_point(mut self, principal_point: Vector2<f64>) -> Self {
        self.principal_point = principal_point;
        self
    }

    pub fn fov_deg(&self) -> f64 {
        self.fov_deg
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn principal_point(&self) -> Vector2<f64> {
        self.principal_point
    }

    /// Focal length in pixels (square pixels; one focal for both axes).
    pub fn focal(&self) -> f64 {
        f64::from(self.height) / (2.0 * (self.fov_deg.to_radians() / 2.0).tan())
    }

    /// K = [[f, 0, cx], [0, f, cy], [0, 0, 1]].
    pub fn intrinsic_matrix(&self) -> Matrix3<f64> {
        let f = self.focal();
        let c = self.principal_point;
        Matrix3::new(f, 0.0, c.x, 0.0, f, c.y, 0.0, 0.0, 1.0)
    }

    /// Closed-form K⁻¹.
    pub fn inverse_intrinsic_matrix(&self) -> Matrix3<f64> {
        let f = self.focal();
        let c = self.principal_point;
        Matrix3::new(
            1.0 / f,
            0.0,
            -c.x / f,
            0.0,
            1.0 / f,
            -c.y / f,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Center of the integer pixel cell (x, y).
    pub fn pixel_center(x: u32, y: u32) -> Vector2<f64> {
        Vector2::new(f64::from(x) + 0.5, f64::from(y) + 0.5)
    }

    pub fn contains(&self, p: Vector2<f64>) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= f64::from(self.width) && p.y <= f64::from(self.height)
    }
}

/// Ground-relative camera orientation: pitch (positive looks up) and roll
/// (positive rotates the camera body counter-clockwise about the optical
/// axis, which turns the image-space up direction clockwise on screen).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pitch_deg: f64,
    roll_deg: f64,
}

/// Maps world axes (x right, y forward, z up) onto camera axes
/// (x right, y down, z forward) at zero pitch and roll.
const ROT_BASE: Matrix3<f64> = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);

fn rot_x(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

impl CameraPose {
    pub fn new(pitch_deg: f64, roll_deg: f64) -> Result<Self, CameraError> {
        if !pitch_deg.is_finite() || pitch_deg.abs() > 90.0 {
            return Err(CameraError::InvalidPitch(pitch_deg));
        }
        if !roll_deg.is_finite() || roll_deg <= -180.0 || roll_deg > 180.0 {
            return Err(CameraError::InvalidRoll(roll_deg));
        }
        Ok(Self { pitch_deg, roll_deg })
    }

    pub fn level() -> Self {
        Self { pitch_deg: 0.0, roll_deg: 0.0 }
    }

    pub fn pitch_deg(&self) -> f64 {
        self.pitch_deg
    }

    pub fn roll_deg(&self) -> f64 {
        self.roll_deg
    }

    /// World-to-camera rotation, composed base → pitch → roll.
    pub fn rotation(&self) -> Matrix3<f64> {
        rot_z(self.roll_deg.to_radians()) * rot_x(-self.pitch_deg.to_radians()) * ROT_BASE
    }

    /// The world up axis expressed in the camera frame; equals R·(0,0,1).
    pub fn world_up_in_camera(&self) -> Vector3<f64> {
        world_up_in_camera(self.pitch_deg, self.roll_deg)
    }
}

/// [`CameraPose::world_up_in_camera`] for raw angles, letting hot search
/// loops skip pose construction.
pub fn world_up_in_camera(pitch_deg: f64, roll_deg: f64) -> Vector3<f64> {
    let p = pitch_deg.to_radians();
    let r = roll_deg.to_radians();
    // Closed form of R·ẑ = Rz(roll)·Rx(−pitch)·(0,−1,0).
    Vector3::new(p.cos() * r.sin(), -p.cos() * r.cos(), p.sin())
}

/// Unit world-frame direction of the viewing ray through a pixel.
pub fn pixel_ray_world(intr: &CameraIntrinsics, pose: &CameraPose, pixel: Vector2<f64>) -> Vector3<f64> {
    let f = intr.focal();
    let c = intr.principal_point();
    let dir_cam = Vector3::new((pixel.x - c.x) / f, (pixel.y - c.y) / f, 1.0);
    (pose.rotation().transpose() * dir_cam).normalize()
}

/// Projects a camera-frame point; `None` when it lies at or behind the camera.
pub fn project_camera(intr: &CameraIntrinsics, v: Vector3<f64>) -> Option<Vector2<f64>> {
    if v.z <= MIN_FORWARD {
        return None;
    }
    let f = intr.focal();
    let c = intr.principal_point();
    Some(Vector2::new(f * v.x / v.z + c.x, f * v.y / v.z + c.y))
}

/// Projects a world-frame point (camera at the origin).
pub fn project_world(
    intr: &CameraIntrinsics,
    pose: &CameraPose,
    p: Vector3<f64>,
) -> Option<Vector2<f64>> {
    project_camera(intr, pose.rotation() * p)
}

//! Ground-aware monocular 3D geometry toolkit.
//!
//! The crate is built around two dense per-pixel representations of an
//! object standing on a ground plane:
//!
//! * **pixel height maps** — for the front (first ray entry) and back (last
//!   ray exit) surface of the object, the image-space distance in pixels
//!   between a surface point and its vertical projection onto the ground;
//! * **perspective fields** — a latitude field (elevation angle of each
//!   pixel's viewing ray) and an up-vector field (image-space direction of
//!   the projected world vertical).
//!
//! Around those sit a ground-truth ray tracer ([`raytrace`]), a grid-search
//! camera estimator ([`camera_est`]), the ground-constrained unprojection
//! that lifts fields back into scale-normalized point clouds ([`reproject`]),
//! point-based shadow casting and planar reflections ([`relight`]), the
//! depth/point-cloud evaluation metrics ([`metrics`]), and file formats plus
//! a deterministic dataset generator ([`io`]).
//!
//! Conventions used throughout: the world frame is right-handed with z up;
//! the camera sits at the origin and looks along world +y at zero pitch and
//! roll; the camera frame is x right, y down, z forward; pixel (i, j) has
//! its center at (i + 0.5, j + 0.5); reconstructed clouds place the ground
//! plane at z = −1 (one camera height below the camera).

pub mod camera;
pub mod camera_est;
pub mod cloud;
pub mod fields;
pub mod grid;
pub mod io;
mod kdtree;
pub mod metrics;
pub mod relight;
pub mod reproject;
pub mod raytrace;

pub use camera::{focal_from_fov, pixel_ray_world, CameraIntrinsics, CameraPose};
pub use cloud::{GroundPlane, PointCloud};
pub use fields::{PerspectiveField, PixelHeightMap};
pub use grid::ScalarGrid;

//! File formats and dataset layout.
//!
//! A rendered sample is persisted as a *bundle* directory:
//!
//! ```text
//! <dir>/
//!   rgb.ppm            8-bit color render (binary P6)
//!   height_front.orgf  front-surface pixel heights
//!   height_back.orgf   back-surface pixel heights
//!   latitude.orgf      per-pixel ray latitude, radians
//!   up_sin.orgf        sin of the image-space up angle
//!   up_cos.orgf        cos of the image-space up angle
//!   depth.orgf         camera-forward depth, NaN off the object mask
//!   mask.orgf          object mask as 0/1 values (every pixel valid)
//!   camera.json        intrinsics + ground-relative pose
//! ```
//!
//! `.orgf` is this project's tiny float-grid container (see [`grid_file`]):
//! masked-invalid pixels are stored as NaN payloads, so files round-trip
//! bit-exactly and need no side-channel mask. Datasets are trees of bundles
//! under `train/`, `val/`, and `test/` plus a `manifest.json` ([`dataset`]).

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::camera::{CameraError, CameraIntrinsics, CameraPose};
use crate::fields::{FieldError, PerspectiveField, PixelHeightMap};
use crate::grid::{GridError, ScalarGrid};
use crate::raytrace::GroundTruth;

pub mod camera_file;
pub mod dataset;
pub mod grid_file;
pub mod ply;
pub mod ppm;
pub mod scene_file;

pub use camera_file::{read_camera, write_camera};
pub use dataset::{
    default_scene_templates, filter_sample, generate_dataset, split_for_scene, DatasetManifest,
    DatasetSpec, ManifestEntry, RejectedEntry,
};
pub use grid_file::{read_grid, write_grid, ORGF_MAGIC, ORGF_VERSION};
pub use ply::write_ply;
pub use ppm::{read_ppm, write_pgm, write_ppm};
pub use scene_file::{read_scene, write_scene};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("invalid scene: {0}")]
    Scene(String),
}

/// Everything read back from one bundle directory.
#[derive(Debug, Clone)]
pub struct Bundle {
    pub rgb: ScalarGrid,
    pub heights: PixelHeightMap,
    pub field: PerspectiveField,
    pub depth: ScalarGrid,
    pub mask: ScalarGrid,
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
}

/// One channel of a grid as a standalone grid, carrying the mask along.
fn single_channel(grid: &ScalarGrid, channel: u32) -> ScalarGrid {
    let mut out =
        ScalarGrid::from_data(grid.width(), grid.height(), 1, grid.channel(channel).to_vec())
            .expect("source grid is well-formed");
    if let Some(mask) = grid.mask() {
        out.set_mask(mask.to_vec()).expect("same pixel count");
    }
    out
}

/// Writes a perspective field as the three grid files `latitude.orgf`,
/// `up_sin.orgf`, and `up_cos.orgf` (the bundle layout, usable standalone).
pub fn write_field(dir: &Path, field: &PerspectiveField) -> Result<(), IoError> {
    fs::create_dir_all(dir)?;
    write_grid(&dir.join("latitude.orgf"), &field.latitude, &["latitude"])?;
    write_grid(&dir.join("up_sin.orgf"), &single_channel(&field.up, 0), &["up_sin"])?;
    write_grid(&dir.join("up_cos.orgf"), &single_channel(&field.up, 1), &["up_cos"])?;
    Ok(())
}

/// Reads a perspective field written by [`write_field`] (or part of a
/// bundle), fusing the two up-angle files back into one two-channel grid.
pub fn read_field(dir: &Path) -> Result<PerspectiveField, IoError> {
    let latitude = read_named_grid(dir, "latitude.orgf", "latitude")?;
    let up_sin = read_named_grid(dir, "up_sin.orgf", "up_sin")?;
    let up_cos = read_named_grid(dir, "up_cos.orgf", "up_cos")?;
    if up_sin.mask() != up_cos.mask() {
        return Err(IoError::Format("up_sin and up_cos disagree on validity".into()));
    }
    let mut up = ScalarGrid::from_data(
        up_sin.width(),
        up_sin.height(),
        2,
        [up_sin.data(), up_cos.data()].concat(),
    )?;
    if let Some(mask) = up_sin.mask() {
        up.set_mask(mask.to_vec())?;
    }
    Ok(PerspectiveField::new(latitude, up)?)
}

/// Writes the nine bundle files for a rendered sample.
pub fn write_bundle(dir: &Path, gt: &GroundTruth) -> Result<(), IoError> {
    fs::create_dir_all(dir)?;
    write_ppm(&dir.join("rgb.ppm"), &gt.rgb)?;
    write_grid(&dir.join("height_front.orgf"), &gt.heights.front, &["height_front"])?;
    write_grid(&dir.join("height_back.orgf"), &gt.heights.back, &["height_back"])?;
    write_field(dir, &gt.field)?;
    write_grid(&dir.join("depth.orgf"), &gt.depth, &["depth"])?;
    write_grid(&dir.join("mask.orgf"), &gt.mask, &["mask"])?;
    write_camera(&dir.join("camera.json"), &gt.intrinsics, &gt.pose)?;
    Ok(())
}

fn read_named_grid(dir: &Path, file: &str, want: &str) -> Result<ScalarGrid, IoError> {
    let (grid, names) = read_grid(&dir.join(file))?;
    if names.len() != 1 || names[0] != want {
        return Err(IoError::Format(format!(
            "{file}: channel names {names:?}, expected [{want:?}]"
        )));
    }
    Ok(grid)
}

/// Reads a bundle directory back into memory.
///
/// The two up-angle files are fused into one two-channel grid; their masks
/// (derived from NaN payloads) must agree pixel-for-pixel.
pub fn read_bundle(dir: &Path) -> Result<Bundle, IoError> {
    let (intrinsics, pose) = read_camera(&dir.join("camera.json"))?;
    let rgb = read_ppm(&dir.join("rgb.ppm"))?;
    let front = read_named_grid(dir, "height_front.orgf", "height_front")?;
    let back = read_named_grid(dir, "height_back.orgf", "height_back")?;
    let field = read_field(dir)?;
    let depth = read_named_grid(dir, "depth.orgf", "depth")?;
    let mask = read_named_grid(dir, "mask.orgf", "mask")?;

    if mask.mask().is_some() {
        return Err(IoError::Format(
            "mask.orgf must store 0/1 values at all-valid pixels".into(),
        ));
    }
    for (name, grid) in [
        ("height_front", &front),
        ("height_back", &back),
        ("latitude", &field.latitude),
        ("the up field", &field.up),
        ("depth", &depth),
        ("mask", &mask),
        ("rgb", &rgb),
    ] {
        if grid.width() != intrinsics.width() || grid.height() != intrinsics.height() {
            return Err(IoError::Format(format!(
                "{name} is {}x{} but the camera says {}x{}",
                grid.width(),
                grid.height(),
                intrinsics.width(),
                intrinsics.height()
            )));
        }
    }
    let heights = PixelHeightMap::new(front, back)?;
    Ok(Bundle { rgb, heights, field, depth, mask, intrinsics, pose })
}

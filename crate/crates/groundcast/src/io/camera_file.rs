//! Camera sidecar JSON: intrinsics plus ground-relative orientation.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, CameraPose};

use super::IoError;

/// On-disk schema. Field order is the serialization order, so rewrites are
/// byte-identical.
#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct CameraFile {
    fov_deg: f64,
    pitch_deg: f64,
    roll_deg: f64,
    width: u32,
    height: u32,
    principal_point: [f64; 2],
}

pub fn write_camera(path: &Path, intr: &CameraIntrinsics, pose: &CameraPose) -> Result<(), IoError> {
    let pp = intr.principal_point();
    let file = CameraFile {
        fov_deg: intr.fov_deg(),
        pitch_deg: pose.pitch_deg(),
        roll_deg: pose.roll_deg(),
        width: intr.width(),
        height: intr.height(),
        principal_point: [pp.x, pp.y],
    };
    let mut text = serde_json::to_string_pretty(&file)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_camera(path: &Path) -> Result<(CameraIntrinsics, CameraPose), IoError> {
    let text = fs::read_to_string(path)?;
    let file: CameraFile = serde_json::from_str(&text)?;
    let intr = CameraIntrinsics::new(file.fov_deg, file.width, file.height)?
        .with_principal_point(nalgebra::Vector2::new(
            file.principal_point[0],
            file.principal_point[1],
        ));
    let pose = CameraPose::new(file.pitch_deg, file.roll_deg)?;
    Ok((intr, pose))
}

//! Scene descriptions as JSON (shapes, lights, camera rig).

use std::fs;
use std::path::Path;

use crate::raytrace::Scene;

use super::IoError;

pub fn write_scene(path: &Path, scene: &Scene) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(scene)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Reads and validates a scene.
pub fn read_scene(path: &Path) -> Result<Scene, IoError> {
    let text = fs::read_to_string(path)?;
    let scene: Scene = serde_json::from_str(&text)?;
    scene.validate().map_err(|e| IoError::Scene(e.to_string()))?;
    Ok(scene)
}

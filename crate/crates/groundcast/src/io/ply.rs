//! ASCII PLY export for point clouds (positions, optional uchar colors).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::cloud::PointCloud;

use super::IoError;

/// Writes an ASCII PLY with float x/y/z properties, plus uchar red/green/
/// blue when the cloud carries colors. Coordinates are narrowed to f32 to
/// match the declared property type.
pub fn write_ply(path: &Path, cloud: &PointCloud) -> Result<(), IoError> {
    if let Some(colors) = &cloud.colors {
        if colors.len() != cloud.len() {
            return Err(IoError::Format(format!(
                "{} colors for {} points",
                colors.len(),
                cloud.len()
            )));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", cloud.len())?;
    writeln!(w, "property float x")?;
    writeln!(w, "property float y")?;
    writeln!(w, "property float z")?;
    if cloud.colors.is_some() {
        writeln!(w, "property uchar red")?;
        writeln!(w, "property uchar green")?;
        writeln!(w, "property uchar blue")?;
    }
    writeln!(w, "end_header")?;
    for (i, p) in cloud.points.iter().enumerate() {
        let (x, y, z) = (p.x as f32, p.y as f32, p.z as f32);
        if let Some(colors) = &cloud.colors {
            let c = colors[i];
            let q = |v: f32| (f64::from(v).clamp(0.0, 1.0) * 255.0).round() as u8;
            writeln!(w, "{x} {y} {z} {} {} {}", q(c[0]), q(c[1]), q(c[2]))?;
        } else {
            writeln!(w, "{x} {y} {z}")?;
        }
    }
    w.flush()?;
    Ok(())
}

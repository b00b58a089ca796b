//! Point clouds with optional per-point colors and source-pixel indices.

use nalgebra::Vector3;
use thiserror::Error;

use crate::grid::ScalarGrid;

#[derive(Debug, Error, PartialEq)]
pub enum CloudError {
    #[error("colors length {got} does not match point count {points}")]
    ColorLength { points: usize, got: usize },
    #[error("pixel index length {got} does not match point count {points}")]
    PixelIndexLength { points: usize, got: usize },
    #[error("non-finite coordinate at point {0}")]
    NonFinitePoint(usize),
    #[error("cloud has colors for some points but not others")]
    PartialAttributes,
}

/// Points are f64 world coordinates. `pixel_indices` ties each point to the
/// flat pixel (y·W + x) it was reconstructed or rendered from, which is what
/// index-paired metrics and image-space colorization key on.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
    pub colors: Option<Vec<[f32; 3]>>,
    pub pixel_indices: Option<Vec<u32>>,
}

impl PointCloud {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self { points: Vec::with_capacity(n), colors: None, pixel_indices: None }
    }

    pub fn from_points(points: Vec<Vector3<f64>>) -> Self {
        Self { points, colors: None, pixel_indices: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Axis-aligned bounding box; `None` for an empty cloud.
    pub fn bbox(&self) -> Option<(Vector3<f64>, Vector3<f64>)> {
        let first = *self.points.first()?;
        let mut lo = first;
        let mut hi = first;
        for p in &self.points[1..] {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        Some((lo, hi))
    }

    pub fn bbox_diagonal(&self) -> f64 {
        self.bbox().map_or(0.0, |(lo, hi)| (hi - lo).norm())
    }

    /// Looks up a color per point from a 3-channel image grid via the stored
    /// pixel indices.
    pub fn attach_colors_from_image(&mut self, rgb: &ScalarGrid) -> Result<(), CloudError> {
        let indices = self.pixel_indices.as_ref().ok_or(CloudError::PartialAttributes)?;
        assert_eq!(rgb.channels(), 3, "colorization needs a 3-channel image");
        let w = rgb.width() as usize;
        let colors = indices
            .iter()
            .map(|&i| {
                let (x, y) = ((i as usize % w) as u32, (i as usize / w) as u32);
                [rgb.get(0, x, y), rgb.get(1, x, y), rgb.get(2, x, y)]
            })
            .collect();
        self.colors = Some(colors);
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CloudError> {
        if let Some(c) = &self.colors {
            if c.len() != self.points.len() {
                return Err(CloudError::ColorLength { points: self.points.len(), got: c.len() });
            }
        }
        if let Some(ix) = &self.pixel_indices {
            if ix.len() != self.points.len() {
                return Err(CloudError::PixelIndexLength { points: self.points.len(), got: ix.len() });
            }
        }
        for (i, p) in self.points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(CloudError::NonFinitePoint(i));
            }
        }
        Ok(())
    }
}

/// Horizontal plane of constant world z. Reconstructions place the ground at
/// z = −1 (the scale the depth factors are normalized against); ray-traced
/// scenes keep their ground at z = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundPlane {
    pub z: f64,
}

impl GroundPlane {
    pub const RECONSTRUCTION: Self = Self { z: -1.0 };
    pub const SCENE: Self = Self { z: 0.0 };

    pub fn at(z: f64) -> Self {
        Self { z }
    }
}

//! Dense 2-D grids of f32 channels with an optional per-pixel validity mask.
//!
//! Storage is channel-planar, row-major within each plane — the same layout
//! the binary grid file format uses, so serialization is a straight copy.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("data length {got} does not match {width}x{height}x{channels}")]
    DataLength { width: u32, height: u32, channels: u32, got: usize },
    #[error("mask length {got} does not match {width}x{height}")]
    MaskLength { width: u32, height: u32, got: usize },
    #[error("grids have mismatched dimensions: {0}x{1} vs {2}x{3}")]
    DimsMismatch(u32, u32, u32, u32),
    #[error("non-finite value at channel {channel}, pixel ({x}, {y}) marked valid")]
    NonFiniteValue { channel: u32, x: u32, y: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    width: u32,
    height: u32,
    channels: u32,
    data: Vec<f32>,
    mask: Option<Vec<bool>>,
}

impl ScalarGrid {
    /// A grid filled with a constant; all pixels valid.
    pub fn new(width: u32, height: u32, channels: u32, fill: f32) -> Self {
        assert!(width > 0 && height > 0 && channels > 0, "grid dimensions must be nonzero");
        let len = width as usize * height as usize * channels as usize;
        Self { width, height, channels, data: vec![fill; len], mask: None }
    }

    pub fn from_data(width: u32, height: u32, channels: u32, data: Vec<f32>) -> Result<Self, GridError> {
        let expected = width as usize * height as usize * channels as usize;
        if expected == 0 || data.len() != expected {
            return Err(GridError::DataLength { width, height, channels, got: data.len() });
        }
        Ok(Self { width, height, channels, data, mask: None })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u32 {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    #[inline]
    fn plane(&self) -> usize {
        self.width as usize * self.height as usize
    }

    #[inline]
    pub fn index(&self, channel: u32, x: u32, y: u32) -> usize {
        debug_assert!(channel < self.channels && x < self.width && y < self.height);
        channel as usize * self.plane() + y as usize * self.width as usize + x as usize
    }

    #[inline]
    pub fn get(&self, channel: u32, x: u32, y: u32) -> f32 {
        self.data[self.index(channel, x, y)]
    }

    #[inline]
    pub fn set(&mut self, channel: u32, x: u32, y: u32, value: f32) {
        let i = self.index(channel, x, y);
        self.data[i] = value;
    }

    pub fn channel(&self, channel: u32) -> &[f32] {
        let p = self.plane();
        &self.data[channel as usize * p..(channel as usize + 1) * p]
    }

    pub fn channel_mut(&mut self, channel: u32) -> &mut [f32] {
        let p = self.plane();
        &mut self.data[channel as usize * p..(channel as usize + 1) * p]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// `None` means every pixel is valid.
    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    pub fn set_mask(&mut self, mask: Vec<bool>) -> Result<(), GridError> {
        if mask.len() != self.plane() {
            return Err(GridError::MaskLength { width: self.width, height: self.height, got: mask.len() });
        }
        self.mask = Some(mask);
        Ok(())
    }

    pub fn clear_mask(&mut self) {
        self.mask = None;
    }

    #[inline]
    pub fn is_valid(&self, x: u32, y: u32) -> bool {
        match &self.mask {
            Some(m) => m[y as usize * self.width as usize + x as usize],
            None => true,
        }
    }

    pub fn valid_count(&self) -> usize {
        match &self.mask {
            Some(m) => m.iter().filter(|v| **v).count(),
            None => self.plane(),
        }
    }

    pub fn same_dims(&self, other: &ScalarGrid) -> Result<(), GridError> {
        if self.width != other.width || self.height != other.height {
            return Err(GridError::DimsMismatch(self.width, self.height, other.width, other.height));
        }
        Ok(())
    }

    /// Checks the structural invariant: non-finite values may appear only at
    /// pixels the mask marks invalid.
    pub fn validate(&self) -> Result<(), GridError> {
        for c in 0..self.channels {
            let plane = self.channel(c);
            for y in 0..self.height {
                for x in 0..self.width {
                    let v = plane[y as usize * self.width as usize + x as usize];
                    if !v.is_finite() && self.is_valid(x, y) {
                        return Err(GridError::NonFiniteValue { channel: c, x, y });
                    }
                }
            }
        }
        Ok(())
    }
}

//! ORGF: a tiny binary container for float image grids.
//!
//! Layout (all integers little-endian):
//! ```text
//! magic   4 bytes  "ORGF"
//! version u16      currently 1
//! channels u16
//! width   u32
//! height  u32
//! names   channels × 32 bytes, ASCII, zero-padded
//! payload channels × width × height × f32, channel-planar, row-major
//! ```
//! Validity is not stored: invalid pixels are written as NaN and readers
//! derive the mask from finiteness. Payload bits round-trip exactly, so
//! write → read → write is byte-identical.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::grid::ScalarGrid;

use super::IoError;

pub const ORGF_MAGIC: [u8; 4] = *b"ORGF";
pub const ORGF_VERSION: u16 = 1;
const NAME_BYTES: usize = 32;

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= NAME_BYTES
        && name.bytes().all(|b| b.is_ascii_graphic())
}

/// Writes a grid with one name per channel. Invalid pixels are stored as
/// NaN in every channel; valid pixels must hold finite values.
pub fn write_grid(path: &Path, grid: &ScalarGrid, names: &[&str]) -> Result<(), IoError> {
    if names.len() != grid.channels() as usize {
        return Err(IoError::Format(format!(
            "{} channel names for a {}-channel grid",
            names.len(),
            grid.channels()
        )));
    }
    for name in names {
        if !valid_name(name) {
            return Err(IoError::Format(format!(
                "channel name {name:?} must be 1-{NAME_BYTES} printable ASCII bytes"
            )));
        }
    }
    let plane = grid.width() as usize * grid.height() as usize;
    let mask = grid.mask();
    for c in 0..grid.channels() {
        for (i, &v) in grid.channel(c).iter().enumerate() {
            let valid = mask.is_none_or(|m| m[i]);
            if valid && !v.is_finite() {
                return Err(IoError::Format(format!(
                    "non-finite value {v} at valid pixel {i} of channel {c}"
                )));
            }
        }
    }

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&ORGF_MAGIC)?;
    w.write_all(&ORGF_VERSION.to_le_bytes())?;
    w.write_all(&(grid.channels() as u16).to_le_bytes())?;
    w.write_all(&grid.width().to_le_bytes())?;
    w.write_all(&grid.height().to_le_bytes())?;
    for name in names {
        let mut padded = [0u8; NAME_BYTES];
        padded[..name.len()].copy_from_slice(name.as_bytes());
        w.write_all(&padded)?;
    }
    let mut payload = Vec::with_capacity(grid.channels() as usize * plane * 4);
    for c in 0..grid.channels() {
        for (i, &v) in grid.channel(c).iter().enumerate() {
            let stored = if mask.is_none_or(|m| m[i]) { v } else { f32::NAN };
            payload.extend_from_slice(&stored.to_le_bytes());
        }
    }
    w.write_all(&payload)?;
    w.flush()?;
    Ok(())
}

/// Reads a grid and its channel names. The validity mask is derived from
/// finiteness (a pixel is invalid when any channel is non-finite) and left
/// unset when every pixel is valid.
pub fn read_grid(path: &Path) -> Result<(ScalarGrid, Vec<String>), IoError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != ORGF_MAGIC {
        return Err(IoError::Format(format!("bad magic {magic:?}, expected \"ORGF\"")));
    }
    let mut u16buf = [0u8; 2];
    r.read_exact(&mut u16buf)?;
    let version = u16::from_le_bytes(u16buf);
    if version != ORGF_VERSION {
        return Err(IoError::Format(format!("unsupported version {version}")));
    }
    r.read_exact(&mut u16buf)?;
    let channels = u32::from(u16::from_le_bytes(u16buf));
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let width = u32::from_le_bytes(u32buf);
    r.read_exact(&mut u32buf)?;
    let height = u32::from_le_bytes(u32buf);
    if width == 0 || height == 0 || channels == 0 {
        return Err(IoError::Format(format!("degenerate dimensions {width}x{height}x{channels}")));
    }
    let plane = width as usize * height as usize;
    if plane.checked_mul(channels as usize).and_then(|n| n.checked_mul(4)).is_none() {
        return Err(IoError::Format("payload size overflows".into()));
    }

    let mut names = Vec::with_capacity(channels as usize);
    for _ in 0..channels {
        let mut raw = [0u8; NAME_BYTES];
        r.read_exact(&mut raw)?;
        let end = raw.iter().position(|&b| b == 0).unwrap_or(NAME_BYTES);
        let name = std::str::from_utf8(&raw[..end])
            .map_err(|_| IoError::Format("channel name is not ASCII".into()))?;
        if !valid_name(name) || raw[end..].iter().any(|&b| b != 0) {
            return Err(IoError::Format(format!("malformed channel name {name:?}")));
        }
        names.push(name.to_string());
    }

    let mut payload = vec![0u8; plane * channels as usize * 4];
    r.read_exact(&mut payload)?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(IoError::Format("trailing bytes after payload".into()));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let mut grid = ScalarGrid::from_data(width, height, channels, data)?;
    let mut any_invalid = false;
    let mut mask = vec![true; plane];
    for c in 0..channels {
        for (i, v) in grid.channel(c).iter().enumerate() {
            if !v.is_finite() {
                mask[i] = false;
                any_invalid = true;
            }
        }
    }
    if any_invalid {
        grid.set_mask(mask)?;
    }
    Ok((grid, names))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn round_trip_preserves_bits_and_mask() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("g.orgf");
        let mut grid = ScalarGrid::new(5, 3, 2, 0.0);
        for c in 0..2u32 {
            for y in 0..3u32 {
                for x in 0..5u32 {
                    grid.set(c, x, y, (c * 100 + y * 5 + x) as f32 * 0.125 - 3.0);
                }
            }
        }
        let mut mask = vec![true; 15];
        mask[7] = false;
        grid.set_mask(mask).unwrap();
        write_grid(&path, &grid, &["alpha", "b_2"]).unwrap();

        let (read, names) = read_grid(&path).unwrap();
        assert_eq!(names, vec!["alpha".to_string(), "b_2".to_string()]);
        assert_eq!(read.width(), 5);
        assert_eq!(read.height(), 3);
        assert_eq!(read.channels(), 2);
        assert_eq!(read.mask().unwrap().iter().filter(|v| !**v).count(), 1);
        assert!(!read.is_valid(2, 1)); // index 7 = y1*5 + x2
        for c in 0..2u32 {
            for i in 0..15 {
                if i != 7 {
                    assert_eq!(
                        read.channel(c)[i].to_bits(),
                        grid.channel(c)[i].to_bits()
                    );
                }
            }
        }

        // Write → read → write is byte-identical.
        let path2 = dir.path().join("g2.orgf");
        write_grid(&path2, &read, &[&names[0], &names[1]]).unwrap();
        let first = std::fs::read(&path).unwrap();
        let second = std::fs::read(&path2).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn nan_payload_bits_survive() {
        // Invalid pixels come back as NaN data with a derived mask.
        let dir = tempdir().unwrap();
        let path = dir.path().join("nan.orgf");
        let mut grid = ScalarGrid::new(2, 2, 1, 1.0);
        grid.set(0, 1, 1, f32::NAN);
        let mut mask = vec![true; 4];
        mask[3] = false;
        grid.set_mask(mask).unwrap();
        write_grid(&path, &grid, &["d"]).unwrap();
        let (read, _) = read_grid(&path).unwrap();
        assert!(!read.is_valid(1, 1));
        assert!(read.channel(0)[3].is_nan());
        assert_eq!(read.channel(0)[0], 1.0);
    }

    #[test]
    fn header_validation() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.orgf");
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(matches!(read_grid(&path).unwrap_err(), IoError::Format(_)));

        let grid = ScalarGrid::new(2, 2, 1, 0.5);
        assert!(matches!(
            write_grid(&path, &grid, &["a", "b"]).unwrap_err(),
            IoError::Format(_)
        ));
        assert!(matches!(
            write_grid(&path, &grid, &["bad name"]).unwrap_err(),
            IoError::Format(_)
        ));
        let long = "x".repeat(33);
        assert!(matches!(
            write_grid(&path, &grid, &[long.as_str()]).unwrap_err(),
            IoError::Format(_)
        ));
    }

    #[test]
    fn truncated_and_oversized_files_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.orgf");
        let grid = ScalarGrid::new(3, 3, 1, 0.25);
        write_grid(&path, &grid, &["v"]).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        std::fs::write(&path, &bytes[..bytes.len() - 2]).unwrap();
        assert!(read_grid(&path).is_err());

        let mut extended = bytes.clone();
        extended.push(0);
        std::fs::write(&path, &extended).unwrap();
        assert!(matches!(read_grid(&path).unwrap_err(), IoError::Format(_)));
    }

    #[test]
    fn non_finite_valid_pixel_is_rejected() {
        let dir = tempdir().unwrap();
        let mut grid = ScalarGrid::new(2, 1, 1, 0.0);
        grid.set(0, 0, 0, f32::INFINITY);
        assert!(matches!(
            write_grid(&dir.path().join("inf.orgf"), &grid, &["v"]).unwrap_err(),
            IoError::Format(_)
        ));
    }
}

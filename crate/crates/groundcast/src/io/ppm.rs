//! Binary PPM/PGM (P6/P5, maxval 255) for RGB previews and masks.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::grid::ScalarGrid;

use super::IoError;

fn to_byte(v: f32) -> u8 {
    (f64::from(v).clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a 3-channel grid of [0, 1] floats as binary PPM.
pub fn write_ppm(path: &Path, rgb: &ScalarGrid) -> Result<(), IoError> {
    if rgb.channels() != 3 {
        return Err(IoError::Format(format!(
            "PPM needs a 3-channel grid, got {}",
            rgb.channels()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P6\n{} {}\n255\n", rgb.width(), rgb.height())?;
    let plane = rgb.width() as usize * rgb.height() as usize;
    let mut bytes = Vec::with_capacity(plane * 3);
    for i in 0..plane {
        for c in 0..3u32 {
            bytes.push(to_byte(rgb.channel(c)[i]));
        }
    }
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// Writes a 1-channel grid of [0, 1] floats as binary PGM.
pub fn write_pgm(path: &Path, gray: &ScalarGrid) -> Result<(), IoError> {
    if gray.channels() != 1 {
        return Err(IoError::Format(format!(
            "PGM needs a 1-channel grid, got {}",
            gray.channels()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{} {}\n255\n", gray.width(), gray.height())?;
    let bytes: Vec<u8> = gray.channel(0).iter().map(|&v| to_byte(v)).collect();
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

fn read_token(r: &mut impl Read) -> Result<String, IoError> {
    // Whitespace-delimited token, skipping `#` comments to end-of-line.
    let mut token = String::new();
    let mut byte = [0u8; 1];
    let mut in_comment = false;
    loop {
        if r.read(&mut byte)? == 0 {
            if token.is_empty() {
                return Err(IoError::Format("unexpected end of PPM header".into()));
            }
            return Ok(token);
        }
        let b = byte[0];
        if in_comment {
            if b == b'\n' {
                in_comment = false;
            }
            continue;
        }
        if b == b'#' && token.is_empty() {
            in_comment = true;
            continue;
        }
        if b.is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            return Ok(token);
        }
        token.push(b as char);
    }
}

/// Reads a binary PPM into a 3-channel grid of [0, 1] floats.
pub fn read_ppm(path: &Path) -> Result<ScalarGrid, IoError> {
    let mut r = BufReader::new(File::open(path)?);
    let magic = read_token(&mut r)?;
    if magic != "P6" {
        return Err(IoError::Format(format!("expected P6, got {magic:?}")));
    }
    let parse = |s: String| {
        s.parse::<u32>().map_err(|_| IoError::Format(format!("bad PPM header token {s:?}")))
    };
    let width = parse(read_token(&mut r)?)?;
    let height = parse(read_token(&mut r)?)?;
    let maxval = parse(read_token(&mut r)?)?;
    if maxval != 255 {
        return Err(IoError::Format(format!("only maxval 255 is supported, got {maxval}")));
    }
    if width == 0 || height == 0 {
        return Err(IoError::Format("degenerate PPM dimensions".into()));
    }
    // read_token consumed exactly one whitespace byte after the maxval, so
    // the pixel payload starts here.
    let plane = width as usize * height as usize;
    let mut bytes = vec![0u8; plane * 3];
    r.read_exact(&mut bytes)?;
    let mut data = vec![0.0f32; plane * 3];
    for i in 0..plane {
        for c in 0..3 {
            data[c * plane + i] = f32::from(bytes[i * 3 + c]) / 255.0;
        }
    }
    Ok(ScalarGrid::from_data(width, height, 3, data)?)
}

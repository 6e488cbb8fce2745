//! Binary PGM (P5) reading and writing.

use std::fs;
use std::path::Path;

use super::GrayImage;
use crate::error::{Error, Result};

/// Encodes `img` as `P5\n<w> <h>\n255\n` followed by the raw bytes.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let header = format!("P5\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.pixels().len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(img.pixels());
    out
}

/// Decodes a binary PGM. Header comments are accepted; maxval must be at
/// most 255 and samples are rescaled to the full 8-bit range.
pub fn decode_pgm(data: &[u8]) -> Result<GrayImage> {
    let mut pos = 0usize;
    let magic = next_token(data, &mut pos)?;
    if magic != b"P5" {
        return Err(Error::Parse(format!(
            "not a binary PGM: magic {:?}",
            String::from_utf8_lossy(magic)
        )));
    }
    let width = parse_number(next_token(data, &mut pos)?, "width")?;
    let height = parse_number(next_token(data, &mut pos)?, "height")?;
    let maxval = parse_number(next_token(data, &mut pos)?, "maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Parse(format!("unsupported PGM maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= data.len() || !data[pos].is_ascii_whitespace() {
        return Err(Error::Parse("missing whitespace after PGM header".into()));
    }
    pos += 1;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Parse("PGM dimensions overflow".into()))?;
    let raster = data
        .get(pos..pos + n)
        .ok_or_else(|| Error::Parse(format!("PGM raster truncated: need {n} bytes")))?;
    let pixels = if maxval == 255 {
        raster.to_vec()
    } else {
        raster
            .iter()
            .map(|&v| ((v.min(maxval as u8) as u32 * 255 + maxval as u32 / 2) / maxval as u32) as u8)
            .collect()
    };
    GrayImage::new(width, height, pixels)
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    decode_pgm(&fs::read(path)?)
}

pub fn write_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    fs::write(path, encode_pgm(img))?;
    Ok(())
}

fn next_token<'a>(data: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() && data[*pos] != b'#' {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Parse("PGM header truncated".into()));
    }
    Ok(&data[start..*pos])
}

fn parse_number(tok: &[u8], what: &str) -> Result<usize> {
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse(format!("invalid PGM {what}: {:?}", String::from_utf8_lossy(tok))))
}

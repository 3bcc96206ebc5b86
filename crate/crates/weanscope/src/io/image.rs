//! 8-bit grayscale PGM (P5) and PNG output.

use std::path::Path;

use weanscope_core::imaging::{quantize_plane, Plane};

use crate::error::{PipelineError, Result};

pub fn encode_pgm(w: usize, h: usize, pixels: &[u8]) -> Vec<u8> {
    let mut out = format!("P5\n{w} {h}\n255\n").into_bytes();
    out.extend_from_slice(pixels);
    out
}

/// Parses a binary 8-bit PGM; returns `(w, h, pixels)`.
pub fn decode_pgm(bytes: &[u8]) -> Option<(usize, usize, Vec<u8>)> {
    let mut fields = Vec::new();
    let mut i = 0;
    while fields.len() < 4 && i < bytes.len() {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        fields.push(std::str::from_utf8(&bytes[start..i]).ok()?.to_string());
    }
    if fields.len() != 4 || fields[0] != "P5" || fields[3] != "255" {
        return None;
    }
    let (w, h): (usize, usize) = (fields[1].parse().ok()?, fields[2].parse().ok()?);
    let data = bytes.get(i + 1..)?;
    (data.len() == w * h).then(|| (w, h, data.to_vec()))
}

pub fn encode_png(w: usize, h: usize, pixels: &[u8]) -> std::result::Result<Vec<u8>, png::EncodingError> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header()?;
        writer.write_image_data(pixels)?;
    }
    Ok(out)
}

pub fn write_pgm(path: &Path, plane: &Plane) -> Result<()> {
    super::write_bytes(path, &encode_pgm(plane.w, plane.h, &quantize_plane(plane)))
}

pub fn write_png(path: &Path, plane: &Plane) -> Result<()> {
    let bytes = encode_png(plane.w, plane.h, &quantize_plane(plane)).map_err(|e| PipelineError::format(path, e))?;
    super::write_bytes(path, &bytes)
}

/// Stretches arbitrary values to `[0, 1]`; a constant plane maps to zeros.
pub fn normalize(plane: &Plane) -> Plane {
    let lo = plane.data.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = plane.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let data = plane
        .data
        .iter()
        .map(|v| if span > 0.0 { (v - lo) / span } else { 0.0 })
        .collect();
    Plane {
        h: plane.h,
        w: plane.w,
        data,
    }
}

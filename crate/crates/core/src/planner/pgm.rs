//! Affordance layers as 8-bit binary graymaps with a JSON sidecar.
//!
//! Image row `r` holds grid row `j = r`, so the image is drawn with y
//! pointing down like the rest of the renderer. Zero affordance is black;
//! any positive value maps to at least 1.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AffordanceMap, GridSpec};
use crate::geometry::Point2;

#[derive(Debug, Error, PartialEq)]
pub enum PgmError {
    #[error("not a binary graymap (missing P5 magic)")]
    BadMagic,
    #[error("malformed header: {0}")]
    Header(String),
    #[error("maxval {0} outside 1..=255")]
    MaxVal(u32),
    #[error("expected {expected} pixel bytes, found {found}")]
    Length { expected: usize, found: usize },
    #[error("sidecar does not describe this image: {0}")]
    Sidecar(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graymap {
    pub width: usize,
    pub height: usize,
    pub maxval: u8,
    pub pixels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgmSidecar {
    pub layer: String,
    pub origin: Point2,
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub maxval: u8,
}

fn quantize(a: f64) -> u8 {
    if a <= 0.0 {
        0
    } else {
        ((a.min(1.0) * 255.0).round() as u8).max(1)
    }
}

/// Encode `a_final` as a P5 image plus its sidecar.
pub fn export_pgm(map: &AffordanceMap) -> (Vec<u8>, PgmSidecar) {
    let spec = map.spec();
    let mut out = format!("P5\n{} {}\n255\n", spec.width, spec.height).into_bytes();
    out.extend(map.a_final.iter().map(|a| quantize(*a)));
    let sidecar = PgmSidecar {
        layer: "a_final".into(),
        origin: spec.origin,
        resolution: spec.resolution,
        width: spec.width,
        height: spec.height,
        maxval: 255,
    };
    (out, sidecar)
}

/// Parse a binary graymap with 8-bit samples. Header comments are allowed.
pub fn parse_pgm(bytes: &[u8]) -> Result<Graymap, PgmError> {
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(PgmError::BadMagic);
    }
    let mut pos = 2;
    let mut fields = [0u32; 3];
    for (n, field) in fields.iter_mut().enumerate() {
        // Whitespace and comments before each header field.
        let mut saw_space = false;
        loop {
            match bytes.get(pos) {
                Some(b) if b.is_ascii_whitespace() => {
                    saw_space = true;
                    pos += 1;
                }
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|b| *b != b'\n') {
                        pos += 1;
                    }
                }
                _ => break,
            }
        }
        if !saw_space {
            return Err(PgmError::Header(format!("missing separator before field {n}")));
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        let digits = std::str::from_utf8(&bytes[start..pos]).expect("ASCII digits");
        *field = digits.parse().map_err(|_| PgmError::Header(format!("field {n} is not a number")))?;
    }
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(PgmError::Header("missing separator after maxval".into())),
    }
    let [w, h, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(PgmError::MaxVal(maxval));
    }
    let expected = (w as usize)
        .checked_mul(h as usize)
        .ok_or_else(|| PgmError::Header("dimensions overflow".into()))?;
    let found = bytes.len() - pos;
    if found != expected {
        return Err(PgmError::Length { expected, found });
    }
    Ok(Graymap { width: w as usize, height: h as usize, maxval: maxval as u8, pixels: bytes[pos..].to_vec() })
}

/// Decode an exported image back to per-cell values in `[0, 1]` on its lattice.
pub fn read_affordance(image: &Graymap, sidecar: &PgmSidecar) -> Result<(GridSpec, Vec<f64>), PgmError> {
    if image.width != sidecar.width || image.height != sidecar.height || image.maxval != sidecar.maxval {
        return Err(PgmError::Sidecar(format!(
            "image {}x{} max {} vs sidecar {}x{} max {}",
            image.width, image.height, image.maxval, sidecar.width, sidecar.height, sidecar.maxval
        )));
    }
    if !(sidecar.resolution.is_finite() && sidecar.resolution > 0.0) || !sidecar.origin.is_finite() {
        return Err(PgmError::Sidecar("non-positive resolution or non-finite origin".into()));
    }
    let spec = GridSpec { origin: sidecar.origin, resolution: sidecar.resolution, width: image.width, height: image.height };
    let scale = image.maxval as f64;
    Ok((spec, image.pixels.iter().map(|p| *p as f64 / scale).collect()))
}

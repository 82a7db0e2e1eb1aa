//! The jointly optimized RGB/depth patch pair and its binary bundle format.
//!
//! Bundle layout (little-endian): `b"MAQP"`, `u32` version (= 1), `u32` height,
//! `u32` width, then `height·width·3` `f32` RGB values in row-major,
//! channel-last order, then `height·width` `f32` depth values.

use std::path::Path;

use crate::error::{Error, Result};
use crate::image::Image;

pub const BUNDLE_MAGIC: &[u8; 4] = b"MAQP";
pub const BUNDLE_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct PatchPair {
    pub rgb: Image,
    pub depth: Image,
}

impl PatchPair {
    pub fn new(rgb: Image, depth: Image) -> Result<Self> {
        if rgb.channels() != 3 || depth.channels() != 1 || rgb.hw() != depth.hw() {
            return Err(Error::Shape(format!(
                "patch rgb {:?} / depth {:?}",
                rgb.shape(),
                depth.shape()
            )));
        }
        Ok(Self { rgb, depth })
    }

    pub fn filled(height: usize, width: usize, rgb: f64, depth: f64) -> Self {
        Self {
            rgb: Image::filled(3, height, width, rgb),
            depth: Image::filled(1, height, width, depth),
        }
    }

    pub fn canvas_size(&self) -> (usize, usize) {
        self.rgb.hw()
    }

    /// Projection back onto the valid range.
    pub fn clamp_unit(&mut self) {
        self.rgb.clamp_unit();
        self.depth.clamp_unit();
    }

    pub fn in_unit_range(&self) -> bool {
        self.rgb.in_unit_range() && self.depth.in_unit_range()
    }

    /// Both patches as one 4-channel image.
    pub fn stacked(&self) -> Image {
        Image::concat(&[&self.rgb, &self.depth]).expect("patches share a size")
    }

    pub fn from_stacked(img: Image) -> Result<Self> {
        if img.channels() != 4 {
            return Err(Error::Shape(format!("{} channels, expected 4", img.channels())));
        }
        Self::new(img.channels_range(0, 3), img.channels_range(3, 4))
    }
}

pub fn encode_bundle(p: &PatchPair) -> Vec<u8> {
    let (h, w) = p.canvas_size();
    let mut out = Vec::with_capacity(HEADER_LEN + h * w * 16);
    out.extend_from_slice(BUNDLE_MAGIC);
    out.extend_from_slice(&BUNDLE_VERSION.to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                out.extend_from_slice(&(p.rgb.get(c, y, x) as f32).to_le_bytes());
            }
        }
    }
    for v in p.depth.data() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

pub fn decode_bundle(bytes: &[u8]) -> Result<PatchPair> {
    if bytes.len() < 4 || &bytes[..4] != BUNDLE_MAGIC {
        return Err(Error::NotPatchBundle);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedPayload {
            expected: HEADER_LEN,
            found: bytes.len(),
        });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != BUNDLE_VERSION {
        return Err(Error::Version(version));
    }
    let (h, w) = (word(8) as usize, word(12) as usize);
    if h == 0 || w == 0 {
        return Err(Error::SizeMismatch(format!("declared {h}x{w} patch")));
    }
    let expected = HEADER_LEN + h * w * 4 * 4;
    if bytes.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::SizeMismatch(format!(
            "{} trailing bytes after a {h}x{w} payload",
            bytes.len() - expected
        )));
    }
    let mut vals = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64);
    let mut rgb = Image::zeros(3, h, w);
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                rgb.set(c, y, x, vals.next().unwrap());
            }
        }
    }
    let depth = Image::from_vec(1, h, w, vals.collect())?;
    PatchPair::new(rgb, depth)
}

pub fn save_patch_bundle(path: &Path, p: &PatchPair) -> Result<()> {
    std::fs::write(path, encode_bundle(p)).map_err(|e| Error::io(path, e))
}

pub fn load_patch_bundle(path: &Path) -> Result<PatchPair> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_bundle(&bytes)
}

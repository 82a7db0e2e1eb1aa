//! Random scale and position of the patch in a frame.

use rand::Rng;

use super::compose::composite;
use crate::data::{PatchPair, RgbdFrame};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::mask::Mask;

#[derive(Debug, Clone, PartialEq)]
pub struct Placement {
    pub scale: f64,
    pub top_left: (usize, usize),
    pub size: (usize, usize),
    pub mask: Mask,
}

impl Placement {
    /// Side length is `round(scale·min(H, W))`; width follows the canvas aspect.
    pub fn size_for(scale: f64, frame_hw: (usize, usize), canvas: (usize, usize)) -> (usize, usize) {
        let side = (scale * frame_hw.0.min(frame_hw.1) as f64).round().max(1.0) as usize;
        let w = (side as f64 * canvas.1 as f64 / canvas.0 as f64).round().max(1.0) as usize;
        (side, w)
    }

    pub fn new(scale: f64, top_left: (usize, usize), frame_hw: (usize, usize), canvas: (usize, usize)) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale {scale}")));
        }
        let size = Self::size_for(scale, frame_hw, canvas);
        let mask = Mask::rect(frame_hw.0, frame_hw.1, top_left.0, top_left.1, size.0, size.1)?;
        Ok(Self {
            scale,
            top_left,
            size,
            mask,
        })
    }

    /// Scale uniform in `scale_range`, position uniform over valid corners.
    pub fn sample<R: Rng>(
        rng: &mut R,
        frame_hw: (usize, usize),
        canvas: (usize, usize),
        scale_range: (f64, f64),
    ) -> Result<Self> {
        let (lo, hi) = scale_range;
        let scale = if lo < hi { rng.random_range(lo..=hi) } else { lo };
        let (h, w) = Self::size_for(scale, frame_hw, canvas);
        if h > frame_hw.0 || w > frame_hw.1 {
            return Err(Error::OutOfBounds(format!(
                "{h}x{w} patch in a {}x{} frame",
                frame_hw.0, frame_hw.1
            )));
        }
        let top = rng.random_range(0..=frame_hw.0 - h);
        let left = rng.random_range(0..=frame_hw.1 - w);
        Self::new(scale, (top, left), frame_hw, canvas)
    }
}

/// Composites both patches into `frame` at `placement`.
pub fn place_patch(frame: &RgbdFrame, patches: &PatchPair, placement: &Placement) -> Result<(Image, Mask)> {
    if placement.mask.hw() != frame.hw() {
        return Err(Error::OutOfBounds(format!(
            "placement for {:?} used on a {:?} frame",
            placement.mask.hw(),
            frame.hw()
        )));
    }
    let x = composite(&frame.to_input(), patches, &placement.mask)?;
    Ok((x, placement.mask.clone()))
}

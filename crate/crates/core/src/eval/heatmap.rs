//! Color-mapped quality overlays.

use std::path::Path;

use image::RgbImage;

use crate::data::RgbdFrame;
use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::net::QualityMap;

/// Argmax marker color; the colormap never produces it.
pub const MARKER: [u8; 3] = [255, 0, 255];
const OUTLINE: [u8; 3] = [255, 255, 255];
const ANCHORS: [[f64; 3]; 5] = [
    [0.0, 0.0, 128.0],
    [0.0, 128.0, 255.0],
    [0.0, 255.0, 128.0],
    [255.0, 255.0, 0.0],
    [255.0, 0.0, 0.0],
];

/// Piecewise-linear blue → green → yellow → red ramp over `[0, 1]`.
pub fn colormap(t: f64) -> [f64; 3] {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let s = t * (ANCHORS.len() - 1) as f64;
    let i = (s.floor() as usize).min(ANCHORS.len() - 2);
    let f = s - i as f64;
    let (a, b) = (ANCHORS[i], ANCHORS[i + 1]);
    [0, 1, 2].map(|c| a[c] + f * (b[c] - a[c]))
}

fn on_boundary(mask: &Mask, y: usize, x: usize) -> bool {
    let (h, w) = mask.hw();
    mask.get(y, x)
        && (y == 0
            || x == 0
            || y + 1 == h
            || x + 1 == w
            || !mask.get(y - 1, x)
            || !mask.get(y + 1, x)
            || !mask.get(y, x - 1)
            || !mask.get(y, x + 1))
}

/// Builds the overlay; returns the image and the marked argmax `(row, col)`.
pub fn heatmap_image(
    q: &QualityMap,
    frame: &RgbdFrame,
    mask: Option<&Mask>,
    blend: f64,
) -> Result<(RgbImage, (usize, usize))> {
    let (h, w) = q.hw();
    if frame.hw() != (h, w) || mask.is_some_and(|m| m.hw() != (h, w)) {
        return Err(Error::Shape("heatmap inputs differ in size".into()));
    }
    if !(blend > 0.0 && blend <= 1.0) {
        return Err(Error::InvalidArgument(format!("blend {blend} must lie in (0, 1]")));
    }
    let mut img = RgbImage::new(w as u32, h as u32);
    for y in 0..h {
        for x in 0..w {
            let c = colormap(q.values[y * w + x]);
            let px = [0, 1, 2].map(|k| {
                let v = blend * c[k] + (1.0 - blend) * 255.0 * frame.rgb.get(k, y, x);
                v.round().clamp(0.0, 255.0) as u8
            });
            let px = if mask.is_some_and(|m| on_boundary(m, y, x)) {
                OUTLINE
            } else {
                px
            };
            img.put_pixel(x as u32, y as u32, image::Rgb(px));
        }
    }
    let am = q.argmax();
    let (ay, ax) = (am / w, am % w);
    for d in -2isize..=2 {
        for (yy, xx) in [(ay as isize + d, ax as isize), (ay as isize, ax as isize + d)] {
            if (0..h as isize).contains(&yy) && (0..w as isize).contains(&xx) {
                img.put_pixel(xx as u32, yy as u32, image::Rgb(MARKER));
            }
        }
    }
    Ok((img, (ay, ax)))
}

/// Writes the overlay as PNG with the default blend of 0.6.
pub fn render_heatmap(
    q: &QualityMap,
    frame: &RgbdFrame,
    mask: Option<&Mask>,
    out_path: &Path,
) -> Result<(usize, usize)> {
    render_heatmap_with(q, frame, mask, out_path, 0.6)
}

pub fn render_heatmap_with(
    q: &QualityMap,
    frame: &RgbdFrame,
    mask: Option<&Mask>,
    out_path: &Path,
    blend: f64,
) -> Result<(usize, usize)> {
    let (img, am) = heatmap_image(q, frame, mask, blend)?;
    img.save_with_format(out_path, image::ImageFormat::Png)
        .map_err(|e| Error::Image {
            path: out_path.to_path_buf(),
            msg: e.to_string(),
        })?;
    Ok(am)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_scene;

    #[test]
    fn colormap_never_hits_marker() {
        for i in 0..=10_000 {
            let c = colormap(i as f64 / 10_000.0).map(|v| v.round() as u8);
            assert_ne!(c, MARKER);
        }
    }

    #[test]
    fn constant_map_is_uniform_and_bytes_repeat() {
        let s = synth_scene(1, 64, 64, 1).unwrap();
        let q = QualityMap::new(64, 64, vec![0.4; 4096]).unwrap();
        let (img, am) = heatmap_image(&q, &s.frame, None, 1.0).unwrap();
        assert_eq!(am, (0, 0));
        let mut colors: Vec<[u8; 3]> = img.pixels().map(|p| p.0).filter(|p| *p != MARKER).collect();
        colors.dedup();
        assert_eq!(colors.len(), 1);
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
        render_heatmap(&q, &s.frame, s.hand_mask.as_ref(), &a).unwrap();
        render_heatmap(&q, &s.frame, s.hand_mask.as_ref(), &b).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }

    #[test]
    fn marker_sits_on_argmax() {
        let s = synth_scene(2, 64, 64, 1).unwrap();
        let mut v = vec![0.1; 4096];
        v[10 * 64 + 13] = 0.9;
        let q = QualityMap::new(64, 64, v).unwrap();
        let (img, am) = heatmap_image(&q, &s.frame, None, 0.6).unwrap();
        assert_eq!(am, (10, 13));
        assert_eq!(img.get_pixel(13, 10).0, MARKER);
        assert_eq!(img.get_pixel(15, 10).0, MARKER);
        assert_ne!(img.get_pixel(16, 10).0, MARKER);
    }
}

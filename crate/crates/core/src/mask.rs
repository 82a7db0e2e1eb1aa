//! Binary spatial masks with a tight bounding box.

use crate::error::{Error, Result};

/// Half-open pixel rectangle `[top, bottom) × [left, right)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BBox {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

impl BBox {
    pub fn height(&self) -> usize {
        self.bottom - self.top
    }

    pub fn width(&self) -> usize {
        self.right - self.left
    }

    pub fn contains(&self, y: usize, x: usize) -> bool {
        (self.top..self.bottom).contains(&y) && (self.left..self.right).contains(&x)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
    bbox: Option<BBox>,
    count: usize,
}

impl Mask {
    pub fn empty(height: usize, width: usize) -> Self {
        Self::from_bits(height, width, vec![false; height * width]).expect("sized")
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self::from_bits(height, width, vec![true; height * width]).expect("sized")
    }

    pub fn from_bits(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::Shape(format!(
                "{} mask bits for a {height}x{width} mask",
                bits.len()
            )));
        }
        let mut bbox: Option<BBox> = None;
        let mut count = 0;
        for y in 0..height {
            for x in 0..width {
                if !bits[y * width + x] {
                    continue;
                }
                count += 1;
                bbox = Some(match bbox {
                    None => BBox {
                        top: y,
                        left: x,
                        bottom: y + 1,
                        right: x + 1,
                    },
                    Some(b) => BBox {
                        top: b.top.min(y),
                        left: b.left.min(x),
                        bottom: b.bottom.max(y + 1),
                        right: b.right.max(x + 1),
                    },
                });
            }
        }
        Ok(Self {
            height,
            width,
            bits,
            bbox,
            count,
        })
    }

    pub fn from_fn(height: usize, width: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let bits = (0..height * width).map(|i| f(i / width, i % width)).collect();
        Self::from_bits(height, width, bits).expect("sized")
    }

    /// Axis-aligned rectangle; fails if it does not fit inside the image.
    pub fn rect(height: usize, width: usize, top: usize, left: usize, rect_h: usize, rect_w: usize) -> Result<Self> {
        if top + rect_h > height || left + rect_w > width {
            return Err(Error::OutOfBounds(format!(
                "{rect_h}x{rect_w} at ({top},{left}) in {height}x{width}"
            )));
        }
        Ok(Self::from_fn(height, width, |y, x| {
            y >= top && y < top + rect_h && x >= left && x < left + rect_w
        }))
    }

    /// Filled ellipse tested at pixel centers.
    pub fn ellipse(height: usize, width: usize, center: (f64, f64), semi_axes: (f64, f64), angle: f64) -> Self {
        let (cx, cy) = center;
        let (a, b) = semi_axes;
        let (s, c) = angle.sin_cos();
        Self::from_fn(height, width, |y, x| {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            let u = dx * c + dy * s;
            let v = -dx * s + dy * c;
            (u / a).powi(2) + (v / b).powi(2) <= 1.0
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn hw(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bbox(&self) -> Option<BBox> {
        self.bbox
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn is_full(&self) -> bool {
        self.count == self.bits.len()
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Flat row-major indices of the set pixels.
    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter_map(|(i, &b)| b.then_some(i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bbox_is_tight() {
        let m = Mask::from_fn(8, 9, |y, x| (y == 2 && x == 3) || (y == 5 && x == 7));
        assert_eq!(
            m.bbox(),
            Some(BBox {
                top: 2,
                left: 3,
                bottom: 6,
                right: 8
            })
        );
        assert_eq!(m.count(), 2);
    }

    #[test]
    fn empty_mask_is_flagged() {
        let m = Mask::empty(4, 4);
        assert!(m.is_empty());
        assert_eq!(m.bbox(), None);
        assert!(Mask::full(4, 4).is_full());
    }

    #[test]
    fn rect_rejects_overflow() {
        assert!(Mask::rect(10, 10, 5, 5, 6, 2).is_err());
        let m = Mask::rect(10, 10, 5, 5, 5, 2).unwrap();
        assert_eq!(m.count(), 10);
    }
}

//! Type-1 masks: unions of scaled superellipses over OCR text boxes.
//!
//! For a box centred at `(cx, cy)` with size `a × b`, the masked region is
//!
//! ```text
//! |(x - cx) / a|^p + |(y - cy) / b|^p <= (scale / 2)^p,   p = 2 / roundness
//! ```
//!
//! which is an ellipse at `roundness = 1` and tends to the axis-aligned
//! rectangle of size `scale·a × scale·b` as `roundness -> 0`. Zero roundness
//! uses the rectangle directly. Pixels are sampled at their centres.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::MaskBitmap;

/// Granularity at which an OCR engine grouped the text of a box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChunkLevel {
    Character = 0,
    Word = 1,
    Paragraph = 2,
}

impl ChunkLevel {
    pub const ALL: [ChunkLevel; 3] = [ChunkLevel::Character, ChunkLevel::Word, ChunkLevel::Paragraph];

    pub fn from_index(i: i64) -> Option<Self> {
        match i {
            0 => Some(ChunkLevel::Character),
            1 => Some(ChunkLevel::Word),
            2 => Some(ChunkLevel::Paragraph),
            _ => None,
        }
    }

    pub fn index(self) -> i64 {
        self as i64
    }
}

/// One axis-aligned text box in image pixel coordinates (origin top-left).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseBox {
    pub center_x: f64,
    pub center_y: f64,
    /// Full width.
    pub width_a: f64,
    /// Full height.
    pub height_b: f64,
    pub chunk_level: ChunkLevel,
}

impl BaseBox {
    pub fn new(center_x: f64, center_y: f64, width_a: f64, height_b: f64, chunk_level: ChunkLevel) -> Result<Self> {
        let b = Self {
            center_x,
            center_y,
            width_a,
            height_b,
            chunk_level,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.center_x, self.center_y, self.width_a, self.height_b]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.width_a <= 0.0 || self.height_b <= 0.0 {
            return Err(Error::invalid(format!("degenerate box {self:?}")));
        }
        Ok(())
    }
}

pub const SCALE_RANGE: (f64, f64) = (1.0, 1.5);
pub const ROUND_RANGE: (f64, f64) = (0.0, 1.0);

/// Tunable Type-1 parameters.
///
/// `roundness` is the reciprocal form `2 / order` of the superellipse order,
/// so `0` is a rectangle and `1` an ellipse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Type1Params {
    pub chunk: ChunkLevel,
    pub scale: f64,
    pub roundness: f64,
}

impl Type1Params {
    pub fn new(chunk: ChunkLevel, scale: f64, roundness: f64) -> Result<Self> {
        let p = Self {
            chunk,
            scale,
            roundness,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(SCALE_RANGE.0..=SCALE_RANGE.1).contains(&self.scale) {
            return Err(Error::OutOfDomain(format!("s_scale {} not in [1.0, 1.5]", self.scale)));
        }
        if !(ROUND_RANGE.0..=ROUND_RANGE.1).contains(&self.roundness) {
            return Err(Error::OutOfDomain(format!(
                "s_round {} not in [0.0, 1.0]",
                self.roundness
            )));
        }
        Ok(())
    }

    /// Superellipse order; infinite for the rectangle.
    pub fn order(&self) -> f64 {
        if self.roundness == 0.0 {
            f64::INFINITY
        } else {
            2.0 / self.roundness
        }
    }
}

/// Shape test for one box, normalised so the boundary sits at 1.
#[derive(Debug, Clone, Copy)]
struct ScaledBox {
    cx: f64,
    cy: f64,
    half_w: f64,
    half_h: f64,
    order: f64,
}

impl ScaledBox {
    fn new(b: &BaseBox, params: &Type1Params) -> Self {
        Self {
            cx: b.center_x,
            cy: b.center_y,
            half_w: params.scale * b.width_a / 2.0,
            half_h: params.scale * b.height_b / 2.0,
            order: params.order(),
        }
    }

    #[inline]
    fn contains(&self, x: f64, y: f64) -> bool {
        let u = ((x - self.cx) / self.half_w).abs();
        let v = ((y - self.cy) / self.half_h).abs();
        let m = u.max(v);
        if m > 1.0 {
            return false;
        }
        if self.order.is_infinite() || m == 0.0 {
            return true;
        }
        // |u|^p + |v|^p = m^p * ((u/m)^p + (v/m)^p); the bracket lies in [1, 2]
        // so only m^p can underflow, and then the sum is below 1 anyway.
        let p = self.order;
        m.powf(p) * ((u / m).powf(p) + (v / m).powf(p)) <= 1.0
    }

    /// Inclusive pixel range whose centres may fall inside, clipped to the canvas.
    fn pixel_span(center: f64, half: f64, len: u32) -> Option<(u32, u32)> {
        let lo = (center - half - 0.5).floor().max(0.0);
        let hi = (center + half - 0.5).ceil().min(len as f64 - 1.0);
        if lo > hi {
            None
        } else {
            Some((lo as u32, hi as u32))
        }
    }

    fn paint(&self, mask: &mut MaskBitmap) {
        let Some((x0, x1)) = Self::pixel_span(self.cx, self.half_w, mask.width()) else {
            return;
        };
        let Some((y0, y1)) = Self::pixel_span(self.cy, self.half_h, mask.height()) else {
            return;
        };
        for py in y0..=y1 {
            let y = py as f64 + 0.5;
            for px in x0..=x1 {
                if self.contains(px as f64 + 0.5, y) {
                    mask.set(px, py, true);
                }
            }
        }
    }
}

/// Rasterizes the Type-1 mask for `boxes` on a `width × height` canvas.
///
/// Only boxes at `params.chunk` granularity contribute. Regions falling off
/// the canvas are clipped.
pub fn rasterize_type1(boxes: &[BaseBox], params: &Type1Params, width: u32, height: u32) -> Result<MaskBitmap> {
    if width == 0 || height == 0 {
        return Err(Error::invalid(format!("canvas {width}x{height} is empty")));
    }
    params.validate()?;
    let mut mask = MaskBitmap::new(width, height);
    for b in boxes.iter().filter(|b| b.chunk_level == params.chunk) {
        b.validate()?;
        ScaledBox::new(b, params).paint(&mut mask);
    }
    Ok(mask)
}

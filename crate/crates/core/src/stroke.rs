//! Type-2 masks: thresholded colour difference between an original image and
//! its stroke-removed rendition, followed by iterated square-kernel
//! dilation (positive times) or erosion (negative times).
//!
//! Pixels outside the canvas count as unmasked for both operations, so masks
//! touching the border erode inward.

use std::path::Path;

use image::RgbImage;

use crate::error::{Error, Result};
use crate::mask::MaskBitmap;

pub const THRES_RANGE: (i64, i64) = (1, 100);
pub const TIMES_RANGE: (i64, i64) = (-5, 5);
pub const KERNEL_SIZES: [i64; 4] = [1, 3, 5, 7];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Type2Params {
    pub threshold: i64,
    pub times: i64,
    pub kernel: i64,
}

impl Type2Params {
    pub fn new(threshold: i64, times: i64, kernel: i64) -> Result<Self> {
        let p = Self {
            threshold,
            times,
            kernel,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_threshold(self.threshold)?;
        check_morphology(self.times, self.kernel)
    }
}

fn check_threshold(t: i64) -> Result<()> {
    if !(THRES_RANGE.0..=THRES_RANGE.1).contains(&t) {
        return Err(Error::invalid(format!("t_thres {t} not in 1..=100")));
    }
    Ok(())
}

fn check_morphology(times: i64, kernel: i64) -> Result<()> {
    if !(TIMES_RANGE.0..=TIMES_RANGE.1).contains(&times) {
        return Err(Error::invalid(format!("t_times {times} not in -5..=5")));
    }
    if !KERNEL_SIZES.contains(&kernel) {
        return Err(Error::invalid(format!("t_kernel {kernel} not one of 1, 3, 5, 7")));
    }
    Ok(())
}

/// An original image and its stroke-removed counterpart.
#[derive(Debug, Clone)]
pub struct ImagePair {
    original: RgbImage,
    processed: RgbImage,
}

impl ImagePair {
    pub fn new(original: RgbImage, processed: RgbImage) -> Result<Self> {
        if original.dimensions() != processed.dimensions() {
            return Err(Error::invalid(format!(
                "original is {:?} but processed is {:?}",
                original.dimensions(),
                processed.dimensions()
            )));
        }
        Ok(Self {
            original,
            processed,
        })
    }

    /// Reads both images from disk.
    pub fn open(original: impl AsRef<Path>, processed: impl AsRef<Path>) -> Result<Self> {
        let read = |p: &Path| {
            image::open(p)
                .map(|i| i.to_rgb8())
                .map_err(|source| Error::Image {
                    path: p.to_path_buf(),
                    source,
                })
        };
        Self::new(read(original.as_ref())?, read(processed.as_ref())?)
    }

    pub fn original(&self) -> &RgbImage {
        &self.original
    }

    pub fn processed(&self) -> &RgbImage {
        &self.processed
    }
}

/// Sets every pixel whose Euclidean RGB distance exceeds `threshold`.
pub fn threshold_mask(pair: &ImagePair, threshold: i64) -> Result<MaskBitmap> {
    check_threshold(threshold)?;
    let limit = threshold * threshold;
    let (w, h) = pair.original.dimensions();
    let bits = pair
        .original
        .pixels()
        .zip(pair.processed.pixels())
        .map(|(a, b)| {
            let d2: i64 = a
                .0
                .iter()
                .zip(b.0.iter())
                .map(|(&p, &q)| {
                    let d = p as i64 - q as i64;
                    d * d
                })
                .sum();
            d2 > limit
        })
        .collect();
    MaskBitmap::from_bits(w, h, bits)
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Op {
    Dilate,
    Erode,
}

/// One pass of a 1-D window of radius `r` along rows (`horizontal`) or columns.
fn window_pass(src: &MaskBitmap, r: usize, op: Op, horizontal: bool) -> MaskBitmap {
    let (w, h) = (src.width() as usize, src.height() as usize);
    let (len, lines) = if horizontal { (w, h) } else { (h, w) };
    let bits = src.bits();
    let idx = |line: usize, pos: usize| if horizontal { line * w + pos } else { pos * w + line };
    let mut out = vec![false; w * h];
    let full = 2 * r + 1;
    let mut prefix = vec![0usize; len + 1];
    for line in 0..lines {
        for pos in 0..len {
            prefix[pos + 1] = prefix[pos] + bits[idx(line, pos)] as usize;
        }
        for pos in 0..len {
            let lo = pos.saturating_sub(r);
            let hi = (pos + r).min(len - 1);
            let count = prefix[hi + 1] - prefix[lo];
            out[idx(line, pos)] = match op {
                Op::Dilate => count > 0,
                // positions past the border are zeros and so break the window
                Op::Erode => count == full,
            };
        }
    }
    MaskBitmap::from_bits(src.width(), src.height(), out).expect("same dimensions")
}

fn square_pass(src: &MaskBitmap, kernel: usize, op: Op) -> MaskBitmap {
    let r = kernel / 2;
    let rows = window_pass(src, r, op, true);
    window_pass(&rows, r, op, false)
}

/// Iterated morphology: `times > 0` dilates, `times < 0` erodes, `|times|`
/// repetitions with a `kernel × kernel` square. Zero times or a unit kernel
/// returns the input.
pub fn morphology(mask: &MaskBitmap, times: i64, kernel: i64) -> Result<MaskBitmap> {
    check_morphology(times, kernel)?;
    let op = if times > 0 { Op::Dilate } else { Op::Erode };
    let mut out = mask.clone();
    if times == 0 || kernel == 1 || mask.bits().is_empty() {
        return Ok(out);
    }
    for _ in 0..times.unsigned_abs() {
        out = square_pass(&out, kernel as usize, op);
    }
    Ok(out)
}

/// Threshold followed by morphology.
pub fn type2_mask(pair: &ImagePair, params: &Type2Params) -> Result<MaskBitmap> {
    params.validate()?;
    let base = threshold_mask(pair, params.threshold)?;
    morphology(&base, params.times, params.kernel)
}

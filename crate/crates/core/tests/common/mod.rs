//! Reference implementations used as test oracles.
//!
//! These are deliberately naive: every pixel is tested against every box,
//! morphology is done on coordinate sets, and the GP posterior is solved by
//! Gauss-Jordan inversion of the full covariance matrix.

#![allow(dead_code)]

use std::collections::HashSet;

use maskprofile::{BaseBox, ChunkLevel, MaskBitmap};

/// Per-pixel Type-1 predicate over the whole canvas.
pub fn raster_oracle(boxes: &[BaseBox], chunk: ChunkLevel, scale: f64, round: f64, w: u32, h: u32) -> MaskBitmap {
    MaskBitmap::from_fn(w, h, |px, py| {
        let (x, y) = (px as f64 + 0.5, py as f64 + 0.5);
        boxes.iter().filter(|b| b.chunk_level == chunk).any(|b| {
            let hw = scale * b.width_a / 2.0;
            let hh = scale * b.height_b / 2.0;
            if round == 0.0 {
                b.center_x - hw <= x && x <= b.center_x + hw && b.center_y - hh <= y && y <= b.center_y + hh
            } else {
                let p = 2.0 / round;
                let lu = ((x - b.center_x) / hw).abs().ln() * p;
                let lv = ((y - b.center_y) / hh).abs().ln() * p;
                log_sum_exp(lu, lv) <= 0.0
            }
        })
    })
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn to_set(mask: &MaskBitmap) -> HashSet<(i64, i64)> {
    let mut s = HashSet::new();
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                s.insert((x as i64, y as i64));
            }
        }
    }
    s
}

fn from_set(s: &HashSet<(i64, i64)>, w: u32, h: u32) -> MaskBitmap {
    MaskBitmap::from_fn(w, h, |x, y| s.contains(&(x as i64, y as i64)))
}

fn square(kernel: i64) -> Vec<(i64, i64)> {
    let r = kernel / 2;
    (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dx, dy))).collect()
}

/// Minkowski sum / difference with a square, clipped to the canvas each step.
pub fn morphology_oracle(mask: &MaskBitmap, times: i64, kernel: i64) -> MaskBitmap {
    let (w, h) = mask.dimensions();
    let inside = |p: &(i64, i64)| p.0 >= 0 && p.1 >= 0 && p.0 < w as i64 && p.1 < h as i64;
    let b = square(kernel);
    let mut s = to_set(mask);
    for _ in 0..times.unsigned_abs() {
        s = if times > 0 {
            s.iter()
                .flat_map(|&(x, y)| b.iter().map(move |&(dx, dy)| (x + dx, y + dy)))
                .filter(inside)
                .collect()
        } else {
            (0..h as i64)
                .flat_map(|y| (0..w as i64).map(move |x| (x, y)))
                .filter(|&(x, y)| b.iter().all(|&(dx, dy)| s.contains(&(x + dx, y + dy))))
                .collect()
        };
    }
    from_set(&s, w, h)
}

/// Euclidean RGB distance strictly above `t`, computed in floating point.
pub fn threshold_oracle(a: &image::RgbImage, b: &image::RgbImage, t: i64) -> MaskBitmap {
    let (w, h) = a.dimensions();
    MaskBitmap::from_fn(w, h, |x, y| {
        let (p, q) = (a.get_pixel(x, y).0, b.get_pixel(x, y).0);
        let d: f64 = (0..3).map(|c| (p[c] as f64 - q[c] as f64).powi(2)).sum::<f64>().sqrt();
        d > t as f64
    })
}

pub fn matern52(a: &[f64], b: &[f64], ls: &[f64], var: f64) -> f64 {
    let r = a
        .iter()
        .zip(b)
        .zip(ls)
        .map(|((x, y), l)| ((x - y) / l).powi(2))
        .sum::<f64>()
        .sqrt();
    let s5 = 5f64.sqrt() * r;
    var * (1.0 + s5 + s5 * s5 / 3.0) * (-s5).exp()
}

/// Inverse by Gauss-Jordan elimination with partial pivoting.
pub fn invert(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = a[i][col];
                if f != 0.0 {
                    for j in 0..n {
                        a[i][j] -= f * a[col][j];
                        inv[i][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    inv
}

/// Posterior (mean, latent variance) in target units from the textbook formulas.
pub fn gp_oracle(x: &[Vec<f64>], y: &[f64], ls: &[f64], var: f64, noise: f64, q: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    let sd = if sd > 1e-12 * (1.0 + mean.abs()) { sd } else { 1.0 };
    let z: Vec<f64> = y.iter().map(|v| (v - mean) / sd).collect();
    let k: Vec<Vec<f64>> = x
        .iter()
        .enumerate()
        .map(|(i, a)| {
            x.iter()
                .enumerate()
                .map(|(j, b)| matern52(a, b, ls, var) + if i == j { noise } else { 0.0 })
                .collect()
        })
        .collect();
    let kinv = invert(k);
    let ks: Vec<f64> = x.iter().map(|a| matern52(a, q, ls, var)).collect();
    let w: Vec<f64> = kinv.iter().map(|row| row.iter().zip(&ks).map(|(a, b)| a * b).sum()).collect();
    let m: f64 = w.iter().zip(&z).map(|(a, b)| a * b).sum();
    let v = var - w.iter().zip(&ks).map(|(a, b)| a * b).sum::<f64>();
    (mean + sd * m, sd * sd * v.max(0.0))
}

/// Expected improvement for minimization from the closed form.
pub fn ei_oracle(mean: f64, sd: f64, best: f64) -> f64 {
    if sd <= 0.0 {
        return (best - mean).max(0.0);
    }
    let z = (best - mean) / sd;
    let cdf = 0.5 * (1.0 + libm::erf(z / std::f64::consts::SQRT_2));
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (best - mean) * cdf + sd * pdf
}

pub fn fixture(rel: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

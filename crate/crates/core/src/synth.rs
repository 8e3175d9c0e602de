//! Synthetic document benchmark with planted text strokes.
//!
//! Each page is a smooth light background covered with paragraphs of
//! block glyphs. Every glyph is a connected set of axis-aligned bars, so the
//! stroke truth is known exactly. Character boxes imitate a detector that
//! reports slightly tight boxes: each glyph extent is shrunk by
//! `ocr_shrink` (with a little jitter) around a jittered center. Word and
//! paragraph boxes are the shrunk extents of their glyphs.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotations::{write_annotations, AnnotationDoc, BoxRecord};
use crate::error::{Error, Result};
use crate::harness::{Manifest, ManifestEntry};
use crate::mask::MaskBitmap;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub size: u32,
    /// Glyph extent divided by reported box size.
    pub ocr_shrink: f64,
    /// Relative spread of the per-box shrink factor.
    pub shrink_jitter: f64,
    /// Maximum center offset of a reported box, pixels.
    pub center_jitter: f64,
    pub stroke: u32,
    /// Per-channel amplitude of the noise in the processed image.
    pub processed_noise: u8,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            size: 512,
            ocr_shrink: 1.36,
            shrink_jitter: 0.02,
            center_jitter: 0.5,
            stroke: 4,
            processed_noise: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticDoc {
    pub id: String,
    pub original: RgbImage,
    pub ground_truth: RgbImage,
    pub processed: RgbImage,
    pub stroke_truth: MaskBitmap,
    pub annotations: AnnotationDoc,
}

#[derive(Clone, Copy)]
struct Rect {
    x0: u32,
    y0: u32,
    x1: u32,
    y1: u32,
}

impl Rect {
    fn union(self, o: Rect) -> Rect {
        Rect {
            x0: self.x0.min(o.x0),
            y0: self.y0.min(o.y0),
            x1: self.x1.max(o.x1),
            y1: self.y1.max(o.y1),
        }
    }
}

fn reported_box(r: Rect, cfg: &SynthConfig, rng: &mut impl Rng) -> BoxRecord {
    let jitter = |rng: &mut dyn rand::RngCore, amp: f64| if amp > 0.0 { rng.random_range(-amp..=amp) } else { 0.0 };
    let shrink = cfg.ocr_shrink * (1.0 + jitter(rng, cfg.shrink_jitter));
    BoxRecord {
        cx: (r.x0 + r.x1) as f64 / 2.0 + jitter(rng, cfg.center_jitter),
        cy: (r.y0 + r.y1) as f64 / 2.0 + jitter(rng, cfg.center_jitter),
        w: (r.x1 - r.x0) as f64 / shrink,
        h: (r.y1 - r.y0) as f64 / shrink,
    }
}

fn background(size: u32, rng: &mut impl Rng) -> RgbImage {
    let base: [f64; 3] = std::array::from_fn(|_| rng.random_range(212.0..236.0));
    let gx: f64 = rng.random_range(-12.0..12.0);
    let gy: f64 = rng.random_range(-12.0..12.0);
    let freq: f64 = rng.random_range(0.01..0.03);
    let s = size as f64;
    RgbImage::from_fn(size, size, |x, y| {
        let (u, v) = (x as f64 / s - 0.5, y as f64 / s - 0.5);
        let wave = 4.0 * ((x as f64 * freq).sin() * (y as f64 * freq * 0.7).cos());
        Rgb(std::array::from_fn(|c| {
            (base[c] + gx * u + gy * v + wave * (c as f64 - 1.0)).round().clamp(0.0, 255.0) as u8
        }))
    })
}

/// Bars of one glyph inside `cell`: always a left and a top bar, plus a
/// random selection of right, bottom and middle bars.
fn glyph_bars(cell: Rect, t: u32, rng: &mut impl Rng) -> Vec<Rect> {
    let Rect { x0, y0, x1, y1 } = cell;
    let mut bars = vec![
        Rect { x0, y0, x1: x0 + t, y1 },
        Rect { x0, y0, x1, y1: y0 + t },
    ];
    let mut extra = 0;
    if rng.random_bool(0.5) {
        bars.push(Rect { x0: x1 - t, y0, x1, y1 });
        extra += 1;
    }
    if rng.random_bool(0.5) {
        bars.push(Rect { x0, y0: y1 - t, x1, y1 });
        extra += 1;
    }
    if extra == 0 || rng.random_bool(0.4) {
        let my = (y0 + y1) / 2 - t / 2;
        bars.push(Rect { x0, y0: my, x1: x1 - rng.random_range(0..=(x1 - x0) / 3), y1: my + t });
    }
    bars
}

/// Generates one page.
pub fn generate_document(id: &str, cfg: &SynthConfig, seed: u64) -> SyntheticDoc {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = cfg.size;
    let ground_truth = background(size, &mut rng);
    let mut original = ground_truth.clone();
    let mut strokes = MaskBitmap::new(size, size);
    let mut ann = AnnotationDoc {
        image: id.to_string(),
        ..Default::default()
    };

    let ink: [u8; 3] = std::array::from_fn(|_| rng.random_range(15..70));
    let margin = size / 16;
    let mut y = margin;
    let right = size - margin;
    while y + 40 < size - margin {
        let lines = rng.random_range(2..=4);
        let line_h: u32 = rng.random_range(20..=26);
        let mut para: Option<Rect> = None;
        for _ in 0..lines {
            if y + line_h > size - margin {
                break;
            }
            let mut x = margin + rng.random_range(0..12);
            loop {
                let n_chars = rng.random_range(2..=6);
                let mut word: Option<Rect> = None;
                for _ in 0..n_chars {
                    let gw: u32 = rng.random_range(14..=20);
                    if x + gw > right {
                        break;
                    }
                    let gh = line_h - rng.random_range(0..=3);
                    let cell = Rect {
                        x0: x,
                        y0: y + (line_h - gh),
                        x1: x + gw,
                        y1: y + line_h,
                    };
                    for bar in glyph_bars(cell, cfg.stroke, &mut rng) {
                        for py in bar.y0..bar.y1 {
                            for px in bar.x0..bar.x1 {
                                original.put_pixel(px, py, Rgb(ink));
                                strokes.set(px, py, true);
                            }
                        }
                    }
                    ann.characters.push(reported_box(cell, cfg, &mut rng));
                    word = Some(word.map_or(cell, |w| w.union(cell)));
                    x += gw + rng.random_range(5..=7);
                }
                if let Some(w) = word {
                    ann.words.push(reported_box(w, cfg, &mut rng));
                    para = Some(para.map_or(w, |p| p.union(w)));
                }
                x += rng.random_range(10..=16);
                if word.is_none() || x + 40 > right {
                    break;
                }
            }
            y += line_h + rng.random_range(8..=12);
        }
        if let Some(p) = para {
            ann.paragraphs.push(reported_box(p, cfg, &mut rng));
        }
        y += rng.random_range(16..=28);
    }

    let amp = cfg.processed_noise as i16;
    let mut processed = ground_truth.clone();
    if amp > 0 {
        for px in processed.pixels_mut() {
            for c in px.0.iter_mut() {
                *c = (*c as i16 + rng.random_range(-amp..=amp)).clamp(0, 255) as u8;
            }
        }
    }

    SyntheticDoc {
        id: id.to_string(),
        original,
        ground_truth,
        processed,
        stroke_truth: strokes,
        annotations: ann,
    }
}

fn save(img: &RgbImage, path: &Path) -> Result<()> {
    img.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `count` pages under `dir` and returns the manifest path.
///
/// Page `i` is generated from `seed + i`, so a benchmark is reproducible
/// from `(count, seed, cfg)`.
pub fn write_benchmark(dir: impl AsRef<Path>, count: usize, seed: u64, cfg: &SynthConfig) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = Manifest::default();
    for i in 0..count {
        let id = format!("doc-{i:03}");
        let doc = generate_document(&id, cfg, seed.wrapping_add(i as u64));
        let sub = dir.join(&id);
        std::fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        save(&doc.original, &sub.join("original.png"))?;
        save(&doc.ground_truth, &sub.join("ground_truth.png"))?;
        save(&doc.processed, &sub.join("processed.png"))?;
        doc.stroke_truth.save(sub.join("stroke_truth.png"))?;
        write_annotations(sub.join("boxes.jsonl"), std::slice::from_ref(&doc.annotations))?;
        let rel = |f: &str| PathBuf::from(&id).join(f);
        manifest.items.push(ManifestEntry {
            id: id.clone(),
            original: rel("original.png"),
            ground_truth: rel("ground_truth.png"),
            boxes: rel("boxes.jsonl"),
            processed: Some(rel("processed.png")),
            stroke_truth: Some(rel("stroke_truth.png")),
        });
    }
    let path = dir.join("manifest.json");
    manifest.write(&path)?;
    Ok(path)
}

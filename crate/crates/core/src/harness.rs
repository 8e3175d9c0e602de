//! Benchmark loading and point scoring.
//!
//! A manifest is a JSON document listing benchmark items; relative paths are
//! resolved against the manifest's directory:
//!
//! ```json
//! {"items": [
//!   {"id": "doc-000", "original": "doc-000/original.png",
//!    "ground_truth": "doc-000/clean.png", "boxes": "doc-000/boxes.jsonl",
//!    "processed": "doc-000/processed.png", "stroke_truth": "doc-000/strokes.png"}
//! ]}
//! ```

use std::path::{Path, PathBuf};

use image::imageops::{self, FilterType};
use image::{GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::annotations::{read_annotations, select_doc};
use crate::error::{Error, Result};
use crate::geometry::{rasterize_type1, BaseBox};
use crate::mask::MaskBitmap;
use crate::oracle::{synthetic_oracle, OracleWeights};
use crate::space::{MaskModel, Point};
use crate::stroke::{type2_mask, ImagePair};
use crate::study::Evaluator;

pub const WORKING_RESOLUTION: u32 = 512;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub original: PathBuf,
    pub ground_truth: PathBuf,
    pub boxes: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub processed: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stroke_truth: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub items: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        serde_json::from_str(&text).map_err(|e| Error::Manifest {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// A loaded benchmark item, rasters at the working resolution.
#[derive(Debug, Clone)]
pub struct BenchmarkItem {
    pub id: String,
    pub original_path: PathBuf,
    pub ground_truth_path: PathBuf,
    pub original: RgbImage,
    pub ground_truth: RgbImage,
    pub boxes: Vec<BaseBox>,
    pub processed: Option<RgbImage>,
    pub stroke_truth: Option<MaskBitmap>,
}

impl BenchmarkItem {
    pub fn dimensions(&self) -> (u32, u32) {
        self.original.dimensions()
    }

    /// Whether the file at `original_path` is already at working resolution.
    pub fn original_on_disk_matches(&self) -> bool {
        image::image_dimensions(&self.original_path).ok() == Some(self.dimensions())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoadOptions {
    pub resolution: u32,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            resolution: WORKING_RESOLUTION,
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn absolute(p: PathBuf) -> PathBuf {
    std::fs::canonicalize(&p).unwrap_or(p)
}

fn load_rgb(id: &str, field: &'static str, path: &Path, res: u32) -> Result<RgbImage> {
    if !path.is_file() {
        return Err(Error::Benchmark {
            id: id.into(),
            field,
            message: format!("missing file {}", path.display()),
        });
    }
    let img = image::open(path)
        .map_err(|e| Error::Benchmark {
            id: id.into(),
            field,
            message: format!("{}: {e}", path.display()),
        })?
        .to_rgb8();
    Ok(if img.dimensions() == (res, res) {
        img
    } else {
        imageops::resize(&img, res, res, FilterType::Triangle)
    })
}

fn load_gray(id: &str, field: &'static str, path: &Path, res: u32) -> Result<GrayImage> {
    if !path.is_file() {
        return Err(Error::Benchmark {
            id: id.into(),
            field,
            message: format!("missing file {}", path.display()),
        });
    }
    let img = image::open(path)
        .map_err(|e| Error::Benchmark {
            id: id.into(),
            field,
            message: format!("{}: {e}", path.display()),
        })?
        .to_luma8();
    Ok(if img.dimensions() == (res, res) {
        img
    } else {
        imageops::resize(&img, res, res, FilterType::Nearest)
    })
}

/// Loads and validates every item of a manifest.
pub fn load_benchmark(manifest_path: impl AsRef<Path>, options: LoadOptions) -> Result<Vec<BenchmarkItem>> {
    let manifest_path = manifest_path.as_ref();
    let manifest = Manifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let res = options.resolution;
    let mut seen = std::collections::HashSet::new();
    let mut items = Vec::with_capacity(manifest.items.len());
    for (i, e) in manifest.items.iter().enumerate() {
        if e.id.trim().is_empty() {
            return Err(Error::Manifest {
                path: manifest_path.to_path_buf(),
                message: format!("item {i} has an empty id"),
            });
        }
        if !seen.insert(e.id.clone()) {
            return Err(Error::Manifest {
                path: manifest_path.to_path_buf(),
                message: format!("duplicate id `{}`", e.id),
            });
        }
        let original_path = absolute(resolve(base, &e.original));
        let ground_truth_path = absolute(resolve(base, &e.ground_truth));
        let original = load_rgb(&e.id, "original", &original_path, res)?;
        let ground_truth = load_rgb(&e.id, "ground_truth", &ground_truth_path, res)?;

        let boxes_path = resolve(base, &e.boxes);
        if !boxes_path.is_file() {
            return Err(Error::Benchmark {
                id: e.id.clone(),
                field: "boxes",
                message: format!("missing file {}", boxes_path.display()),
            });
        }
        let docs = read_annotations(&boxes_path).map_err(|err| Error::Benchmark {
            id: e.id.clone(),
            field: "boxes",
            message: err.to_string(),
        })?;
        let boxes = select_doc(&docs, &e.id)
            .ok_or_else(|| Error::Benchmark {
                id: e.id.clone(),
                field: "boxes",
                message: format!("no annotation for `{}` in {}", e.id, boxes_path.display()),
            })?
            .base_boxes()
            .map_err(|err| Error::Benchmark {
                id: e.id.clone(),
                field: "boxes",
                message: err.to_string(),
            })?;

        let processed = e
            .processed
            .as_ref()
            .map(|p| load_rgb(&e.id, "processed", &resolve(base, p), res))
            .transpose()?;
        let stroke_truth = e
            .stroke_truth
            .as_ref()
            .map(|p| load_gray(&e.id, "stroke_truth", &resolve(base, p), res).map(|g| MaskBitmap::from_gray(&g)))
            .transpose()?;

        items.push(BenchmarkItem {
            id: e.id.clone(),
            original_path,
            ground_truth_path,
            original,
            ground_truth,
            boxes,
            processed,
            stroke_truth,
        });
    }
    Ok(items)
}

/// Renders one item's mask for `point`.
pub fn render_mask(item: &BenchmarkItem, model: MaskModel, point: &Point) -> Result<MaskBitmap> {
    let (w, h) = item.dimensions();
    match model {
        MaskModel::Type1 => rasterize_type1(&item.boxes, &model.type1_params(point)?, w, h),
        MaskModel::Type2 => {
            let processed = item.processed.as_ref().ok_or_else(|| Error::Benchmark {
                id: item.id.clone(),
                field: "processed",
                message: "type2 masks need a processed image".into(),
            })?;
            let pair = ImagePair::new(item.original.clone(), processed.clone())?;
            type2_mask(&pair, &model.type2_params(point)?)
        }
    }
}

/// Renders every item's mask, spreading items across threads.
pub fn render_masks(items: &[BenchmarkItem], model: MaskModel, point: &Point) -> Result<Vec<MaskBitmap>> {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(items.len().max(1));
    if threads <= 1 {
        return items.iter().map(|it| render_mask(it, model, point)).collect();
    }
    let chunk = items.len().div_ceil(threads);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(move || c.iter().map(|it| render_mask(it, model, point)).collect::<Result<Vec<_>>>()))
            .collect();
        let mut out = Vec::with_capacity(items.len());
        for h in handles {
            out.extend(h.join().expect("mask rendering thread panicked")?);
        }
        Ok(out)
    })
}

/// One batch handed to a scorer: a point and its per-item masks.
pub struct MaskBatch<'a> {
    pub model: MaskModel,
    pub point: &'a Point,
    pub items: &'a [BenchmarkItem],
    pub masks: &'a [MaskBitmap],
}

/// Back end turning a batch of masks into a single score.
pub trait BatchScorer {
    fn score_batch(&mut self, batch: &MaskBatch<'_>) -> Result<f64>;
}

impl<S: BatchScorer + ?Sized> BatchScorer for Box<S> {
    fn score_batch(&mut self, batch: &MaskBatch<'_>) -> Result<f64> {
        (**self).score_batch(batch)
    }
}

/// Scores batches with [`synthetic_oracle`].
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleScorer {
    pub weights: OracleWeights,
}

impl BatchScorer for OracleScorer {
    fn score_batch(&mut self, batch: &MaskBatch<'_>) -> Result<f64> {
        let truths = batch
            .items
            .iter()
            .map(|it| {
                it.stroke_truth.as_ref().ok_or_else(|| Error::Benchmark {
                    id: it.id.clone(),
                    field: "stroke_truth",
                    message: "synthetic oracle needs stroke truth".into(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        synthetic_oracle(truths.into_iter().zip(batch.masks), &self.weights)
    }
}

/// Renders masks for `point` and scores the batch once.
pub fn score_point<S: BatchScorer + ?Sized>(items: &[BenchmarkItem], point: &Point, model: MaskModel, scorer: &mut S) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::invalid("no benchmark items to score"));
    }
    model.space().check(point)?;
    let masks = render_masks(items, model, point)?;
    let score = scorer
        .score_batch(&MaskBatch {
            model,
            point,
            items,
            masks: &masks,
        })
        .map_err(|e| match e {
            Error::Evaluator(msg) | Error::Protocol(msg) => Error::Evaluator(format!("at {point}: {msg}")),
            other => other,
        })?;
    if !score.is_finite() {
        return Err(Error::Evaluator(format!("at {point}: non-finite score {score}")));
    }
    Ok(score)
}

/// [`Evaluator`] over a loaded benchmark.
pub struct HarnessEvaluator<S> {
    pub items: Vec<BenchmarkItem>,
    pub model: MaskModel,
    pub scorer: S,
}

impl<S: BatchScorer> Evaluator for HarnessEvaluator<S> {
    fn evaluate(&mut self, point: &Point) -> Result<f64> {
        score_point(&self.items, point, self.model, &mut self.scorer)
    }
}

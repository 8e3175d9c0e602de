//! Inputs shared by the benchmarks.

use maskprofile::{BaseBox, ChunkLevel, MaskBitmap, MaskModel, Study, Trial, TrialSource};

/// A page-like grid of word boxes at every chunk level.
pub fn page_boxes(size: u32) -> Vec<BaseBox> {
    let s = size as f64;
    let mut out = Vec::new();
    for row in 0..24 {
        for col in 0..8 {
            let cx = s * (col as f64 + 0.5) / 8.0;
            let cy = s * (row as f64 + 0.5) / 24.0;
            for level in ChunkLevel::ALL {
                out.push(BaseBox::new(cx, cy, s / 10.0, s / 30.0, level).unwrap());
            }
        }
    }
    out
}

/// Deterministic speckle with roughly one pixel in five set.
pub fn speckle(size: u32) -> MaskBitmap {
    MaskBitmap::from_fn(size, size, |x, y| (x.wrapping_mul(2654435761) ^ y.wrapping_mul(40503)) % 5 == 0)
}

/// A Type-1 study holding the initial grid scored by a smooth bowl.
pub fn grid_study(seed: u64) -> Study {
    let model = MaskModel::Type1;
    let mut study = Study::new(model.space(), seed);
    for (i, p) in model.grid().into_iter().enumerate() {
        let v = p.values();
        let score = (v[1].as_f64() - 1.37).powi(2) + v[2].as_f64().powi(2) + 0.05 * v[0].as_f64();
        study
            .push(Trial {
                iteration: i,
                source: TrialSource::Grid,
                params: p,
                score,
            })
            .unwrap();
    }
    study
}

//! Synthetic scoring oracle for benchmarks with known text-stroke pixels.
//!
//! Per image the score is
//!
//! ```text
//! w_miss * (stroke pixels left unmasked / stroke pixels)
//!   + w_over * (non-stroke pixels masked / all pixels)
//!   + w_frag * min(excess components / stroke components, component_cap)
//! ```
//!
//! where excess components are mask components beyond the number of
//! stroke components. Scores are averaged over images; lower is better and a
//! mask equal to the strokes scores 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::MaskBitmap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleWeights {
    pub w_miss: f64,
    pub w_over: f64,
    pub w_frag: f64,
    pub component_cap: f64,
}

impl Default for OracleWeights {
    fn default() -> Self {
        Self {
            w_miss: 1.0,
            w_over: 0.5,
            w_frag: 0.05,
            component_cap: 4.0,
        }
    }
}

impl OracleWeights {
    /// Largest score any mask can receive.
    pub fn upper_bound(&self) -> f64 {
        self.w_miss + self.w_over + self.w_frag * self.component_cap
    }
}

/// Unweighted per-image terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleTerms {
    pub missed_fraction: f64,
    pub over_fraction: f64,
    pub fragmentation: f64,
}

impl OracleTerms {
    pub fn weighted(&self, w: &OracleWeights) -> f64 {
        w.w_miss * self.missed_fraction + w.w_over * self.over_fraction + w.w_frag * self.fragmentation
    }
}

pub fn oracle_terms(truth: &MaskBitmap, mask: &MaskBitmap, component_cap: f64) -> Result<OracleTerms> {
    if truth.dimensions() != mask.dimensions() {
        return Err(Error::invalid(format!(
            "stroke truth is {:?} but mask is {:?}",
            truth.dimensions(),
            mask.dimensions()
        )));
    }
    let (mut text, mut missed, mut over) = (0usize, 0usize, 0usize);
    for (&t, &m) in truth.bits().iter().zip(mask.bits()) {
        match (t, m) {
            (true, false) => {
                text += 1;
                missed += 1;
            }
            (true, true) => text += 1,
            (false, true) => over += 1,
            (false, false) => {}
        }
    }
    let total = truth.bits().len().max(1);
    let truth_components = truth.connected_components();
    let mask_components = mask.connected_components();
    let excess = mask_components.saturating_sub(truth_components) as f64;
    Ok(OracleTerms {
        missed_fraction: if text == 0 { 0.0 } else { missed as f64 / text as f64 },
        over_fraction: over as f64 / total as f64,
        fragmentation: (excess / truth_components.max(1) as f64).min(component_cap),
    })
}

/// Mean weighted score over `(stroke truth, mask)` pairs.
pub fn synthetic_oracle<'a, I>(pairs: I, weights: &OracleWeights) -> Result<f64>
where
    I: IntoIterator<Item = (&'a MaskBitmap, &'a MaskBitmap)>,
{
    let mut sum = 0.0;
    let mut n = 0usize;
    for (truth, mask) in pairs {
        sum += oracle_terms(truth, mask, weights.component_cap)?.weighted(weights);
        n += 1;
    }
    if n == 0 {
        return Err(Error::invalid("oracle needs at least one image"));
    }
    Ok(sum / n as f64)
}

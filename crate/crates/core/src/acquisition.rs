//! Expected-improvement acquisition and its maximization over a mixed space.
//!
//! Candidates are drawn from a randomly shifted Halton sequence in relaxed
//! coordinates (category index for categoricals, unit interval otherwise),
//! the best few are polished by a coordinate pattern search, integers are
//! rounded, and the highest-EI point not already evaluated wins.

use rand::Rng;

use crate::error::{Error, Result};
use crate::gp::{GaussianProcess, GpConfig};
use crate::space::{Domain, ParamSpace, Point};

/// Expected improvement below `best` for a Gaussian with the given moments.
pub fn expected_improvement(mean: f64, std_dev: f64, best: f64) -> f64 {
    let gain = best - mean;
    if std_dev.is_nan() || std_dev <= 1e-300 {
        return gain.max(0.0);
    }
    let z = gain / std_dev;
    let cdf = 0.5 * libm::erfc(-z / std::f64::consts::SQRT_2);
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (gain * cdf + std_dev * pdf).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuggestConfig {
    pub candidates: usize,
    pub refine_starts: usize,
    /// Pattern-search step below which refinement stops.
    pub min_step: f64,
    pub gp: GpConfig,
}

impl Default for SuggestConfig {
    fn default() -> Self {
        Self {
            candidates: 1024,
            refine_starts: 8,
            min_step: 1e-6,
            gp: GpConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Suggestion {
    pub point: Point,
    /// Expected improvement on the standardized score scale.
    pub expected_improvement: f64,
    /// Whether the best-EI point was already evaluated and a runner-up was used.
    pub deduplicated: bool,
}

/// Posterior-backed EI over a parameter space.
pub struct Acquisition<'a> {
    space: &'a ParamSpace,
    gp: GaussianProcess,
    best: f64,
}

impl<'a> Acquisition<'a> {
    pub fn fit<R: Rng + ?Sized>(space: &'a ParamSpace, observed: &[(Point, f64)], config: &GpConfig, rng: &mut R) -> Result<Self> {
        let inputs = observed
            .iter()
            .map(|(p, _)| space.encode(p))
            .collect::<Result<Vec<_>>>()?;
        let scores: Vec<f64> = observed.iter().map(|(_, s)| *s).collect();
        let gp = GaussianProcess::fit(inputs, &scores, config, rng)?;
        let (mean, std) = gp.standardization();
        let best = scores
            .iter()
            .map(|s| (s - mean) / std)
            .fold(f64::INFINITY, f64::min);
        Ok(Self { space, gp, best })
    }

    pub fn gp(&self) -> &GaussianProcess {
        &self.gp
    }

    /// EI at an encoded input, standardized scale.
    pub fn ei_encoded(&self, x: &[f64]) -> f64 {
        let (m, v) = self.gp.predict_standardized(x);
        expected_improvement(m, v.sqrt(), self.best)
    }

    pub fn ei(&self, point: &Point) -> Result<f64> {
        Ok(self.ei_encoded(&self.space.encode(point)?))
    }

    fn ei_relaxed(&self, relaxed: &[f64], buf: &mut Vec<f64>) -> f64 {
        self.space.encode_relaxed(relaxed, buf);
        self.ei_encoded(buf)
    }

    /// Coordinate pattern search from `start` in relaxed coordinates.
    fn refine(&self, start: Vec<f64>, min_step: f64, buf: &mut Vec<f64>) -> Vec<f64> {
        let mut x = start;
        let mut fx = self.ei_relaxed(&x, buf);
        let mut step = 0.1;
        let mut rounds = 0;
        while step >= min_step && rounds < 10_000 {
            rounds += 1;
            let mut improved = false;
            for (i, dim) in self.space.dimensions.iter().enumerate() {
                let trials: Vec<f64> = match &dim.domain {
                    Domain::Categorical { values } => (0..values.len())
                        .map(|c| c as f64)
                        .filter(|&c| c != x[i])
                        .collect(),
                    _ => vec![(x[i] + step).min(1.0), (x[i] - step).max(0.0)],
                };
                for t in trials {
                    if t == x[i] {
                        continue;
                    }
                    let old = x[i];
                    x[i] = t;
                    let ft = self.ei_relaxed(&x, buf);
                    if ft > fx {
                        fx = ft;
                        improved = true;
                    } else {
                        x[i] = old;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        x
    }

    /// Maximizes EI, skipping points in `evaluated` when an alternative exists.
    pub fn maximize<R: Rng + ?Sized>(&self, evaluated: &[Point], config: &SuggestConfig, rng: &mut R) -> Result<Suggestion> {
        let d = self.space.len();
        if d == 0 {
            return Err(Error::invalid("empty parameter space"));
        }
        let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let offset: u64 = rng.random_range(0..1 << 20);
        let mut buf = Vec::with_capacity(self.space.encoded_len());

        let mut relaxed: Vec<Vec<f64>> = (0..config.candidates.max(1) as u64)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let u = (halton(offset + i + 1, PRIMES[j % PRIMES.len()]) + shift[j]).fract();
                        match &self.space.dimensions[j].domain {
                            Domain::Categorical { values } => {
                                ((u * values.len() as f64) as usize).min(values.len() - 1) as f64
                            }
                            _ => u,
                        }
                    })
                    .collect()
            })
            .collect();

        let mut ranked: Vec<(f64, usize)> = relaxed
            .iter()
            .enumerate()
            .map(|(i, r)| (self.ei_relaxed(r, &mut buf), i))
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let refined: Vec<Vec<f64>> = ranked
            .iter()
            .take(config.refine_starts)
            .map(|&(_, i)| self.refine(relaxed[i].clone(), config.min_step, &mut buf))
            .collect();
        // refined points first so they win ties
        let mut pool = refined;
        pool.append(&mut relaxed);

        let mut scored: Vec<(f64, usize, Point)> = pool
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let p = self.space.decode_relaxed(r);
                let ei = self.ei(&p).expect("decoded points are in the space");
                (ei, i, p)
            })
            .collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

        let fresh = scored.iter().find(|(_, _, p)| !evaluated.contains(p));
        let (ei, _, point) = fresh.unwrap_or(&scored[0]).clone();
        let deduplicated = fresh.is_some() && evaluated.contains(&scored[0].2);
        Ok(Suggestion {
            point,
            expected_improvement: ei,
            deduplicated,
        })
    }
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Radical inverse of `index` in `base`.
fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

//! Gaussian-process regression with a Matérn-5/2 ARD kernel.
//!
//! Targets are standardized before fitting. Kernel hyperparameters (one
//! length-scale per encoded input plus a signal variance) maximize the log
//! marginal likelihood via multi-start Nelder-Mead in log space; the
//! observation noise is a fixed jitter that grows only if the Cholesky
//! factorization fails.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use crate::error::{Error, Result};
use crate::nelder_mead::NelderMead;

const SQRT5: f64 = 2.236_067_977_499_79;
const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq)]
pub struct Matern52 {
    pub length_scales: Vec<f64>,
    pub variance: f64,
}

impl Matern52 {
    pub fn isotropic(dim: usize, length_scale: f64, variance: f64) -> Self {
        Self {
            length_scales: vec![length_scale; dim],
            variance,
        }
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let r2: f64 = a
            .iter()
            .zip(b)
            .zip(&self.length_scales)
            .map(|((x, y), l)| {
                let d = (x - y) / l;
                d * d
            })
            .sum();
        let r = r2.sqrt();
        self.variance * (1.0 + SQRT5 * r + 5.0 / 3.0 * r2) * (-SQRT5 * r).exp()
    }

    fn to_log_params(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.length_scales.iter().map(|l| l.ln()).collect();
        t.push(self.variance.ln());
        t
    }

    fn from_log_params(theta: &[f64], bounds: &HyperBounds) -> Self {
        let (ls, var) = theta.split_at(theta.len() - 1);
        Self {
            length_scales: ls
                .iter()
                .map(|t| t.clamp(bounds.length_scale.0.ln(), bounds.length_scale.1.ln()).exp())
                .collect(),
            variance: var[0]
                .clamp(bounds.variance.0.ln(), bounds.variance.1.ln())
                .exp(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperBounds {
    pub length_scale: (f64, f64),
    pub variance: (f64, f64),
}

impl Default for HyperBounds {
    fn default() -> Self {
        Self {
            length_scale: (1e-2, 1e2),
            variance: (1e-2, 1e2),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpConfig {
    /// Observation noise variance on the standardized scale.
    pub noise: f64,
    /// Number of optimizer starts; the first is always the default kernel.
    pub restarts: usize,
    pub max_evals: usize,
    pub bounds: HyperBounds,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            noise: 1e-6,
            restarts: 4,
            max_evals: 250,
            bounds: HyperBounds::default(),
        }
    }
}

/// Posterior mean and variance of the latent function, in target units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

impl Prediction {
    pub fn std_dev(&self) -> f64 {
        self.variance.max(0.0).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct GaussianProcess {
    kernel: Matern52,
    noise: f64,
    inputs: Vec<Vec<f64>>,
    y_mean: f64,
    y_std: f64,
    chol_l: DMatrix<f64>,
    alpha: DVector<f64>,
    log_marginal_likelihood: f64,
}

/// Standardization constants; a constant target gets unit spread.
fn standardize(y: &[f64]) -> (f64, f64, DVector<f64>) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = if var.sqrt() > 1e-12 * (1.0 + mean.abs()) {
        var.sqrt()
    } else {
        1.0
    };
    let z = DVector::from_iterator(y.len(), y.iter().map(|v| (v - mean) / std));
    (mean, std, z)
}

fn gram(kernel: &Matern52, x: &[Vec<f64>], noise: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(&x[i], &x[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += noise;
    }
    k
}

struct Factor {
    l: DMatrix<f64>,
    alpha: DVector<f64>,
    lml: f64,
    noise: f64,
}

fn factor(kernel: &Matern52, x: &[Vec<f64>], z: &DVector<f64>, noise: f64) -> Option<Factor> {
    let mut noise = noise;
    let base = gram(kernel, x, 0.0);
    for _ in 0..6 {
        let mut k = base.clone();
        for i in 0..x.len() {
            k[(i, i)] += noise;
        }
        if let Some(ch) = Cholesky::<f64, Dyn>::new(k) {
            let alpha = ch.solve(z);
            let l = ch.unpack();
            let log_det_half: f64 = (0..x.len()).map(|i| l[(i, i)].ln()).sum();
            let lml = -0.5 * z.dot(&alpha) - log_det_half - 0.5 * x.len() as f64 * LN_2PI;
            return Some(Factor {
                l,
                alpha,
                lml,
                noise,
            });
        }
        noise *= 10.0;
    }
    None
}

impl GaussianProcess {
    /// Conditions a GP with fixed hyperparameters.
    pub fn with_kernel(inputs: Vec<Vec<f64>>, targets: &[f64], kernel: Matern52, noise: f64) -> Result<Self> {
        check_data(&inputs, targets)?;
        if kernel.length_scales.len() != inputs[0].len() {
            return Err(Error::Surrogate("kernel dimension does not match inputs".into()));
        }
        let (y_mean, y_std, z) = standardize(targets);
        let f = factor(&kernel, &inputs, &z, noise)
            .ok_or_else(|| Error::Surrogate("kernel matrix is not positive definite".into()))?;
        Ok(Self {
            kernel,
            noise: f.noise,
            inputs,
            y_mean,
            y_std,
            chol_l: f.l,
            alpha: f.alpha,
            log_marginal_likelihood: f.lml,
        })
    }

    /// Fits kernel hyperparameters by maximizing the log marginal likelihood.
    pub fn fit<R: Rng + ?Sized>(inputs: Vec<Vec<f64>>, targets: &[f64], config: &GpConfig, rng: &mut R) -> Result<Self> {
        check_data(&inputs, targets)?;
        let dim = inputs[0].len();
        let (_, _, z) = standardize(targets);
        let bounds = config.bounds;
        let objective = |theta: &[f64]| -> f64 {
            let k = Matern52::from_log_params(theta, &bounds);
            factor(&k, &inputs, &z, config.noise).map_or(f64::INFINITY, |f| -f.lml)
        };

        let nm = NelderMead {
            max_evals: config.max_evals,
            ..NelderMead::default()
        };
        let mut starts = vec![Matern52::isotropic(dim, 0.5, 1.0).to_log_params()];
        for _ in 1..config.restarts.max(1) {
            let mut t: Vec<f64> = (0..dim).map(|_| rng.random_range(0.05f64.ln()..2.0f64.ln())).collect();
            t.push(rng.random_range(0.3f64.ln()..3.0f64.ln()));
            starts.push(t);
        }
        let mut best: Option<(Vec<f64>, f64)> = None;
        for s in &starts {
            let (theta, v) = nm.minimize(s, &objective);
            if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
                best = Some((theta, v));
            }
        }
        let (theta, _) = best.expect("at least one start");
        let kernel = Matern52::from_log_params(&theta, &bounds);
        Self::with_kernel(inputs, targets, kernel, config.noise)
    }

    pub fn kernel(&self) -> &Matern52 {
        &self.kernel
    }

    /// Noise variance actually used, on the standardized scale.
    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    /// Target standardization `(mean, std)`.
    pub fn standardization(&self) -> (f64, f64) {
        (self.y_mean, self.y_std)
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_marginal_likelihood
    }

    /// Posterior on the standardized scale.
    pub fn predict_standardized(&self, x: &[f64]) -> (f64, f64) {
        let n = self.inputs.len();
        let mut v = DVector::from_iterator(n, self.inputs.iter().map(|xi| self.kernel.eval(xi, x)));
        let mean = v.dot(&self.alpha);
        // forward substitution L w = k*, in place
        for i in 0..n {
            let mut s = v[i];
            for j in 0..i {
                s -= self.chol_l[(i, j)] * v[j];
            }
            v[i] = s / self.chol_l[(i, i)];
        }
        let var = (self.kernel.variance - v.norm_squared()).max(0.0);
        (mean, var)
    }

    pub fn predict(&self, x: &[f64]) -> Prediction {
        let (m, v) = self.predict_standardized(x);
        Prediction {
            mean: self.y_mean + self.y_std * m,
            variance: v * self.y_std * self.y_std,
        }
    }
}

fn check_data(inputs: &[Vec<f64>], targets: &[f64]) -> Result<()> {
    if inputs.len() < 2 {
        return Err(Error::Surrogate(format!(
            "at least 2 observations required, got {}",
            inputs.len()
        )));
    }
    if inputs.len() != targets.len() {
        return Err(Error::Surrogate("inputs and targets differ in length".into()));
    }
    let dim = inputs[0].len();
    if dim == 0 || inputs.iter().any(|x| x.len() != dim) {
        return Err(Error::Surrogate("inputs must share a non-zero dimension".into()));
    }
    if targets.iter().any(|y| !y.is_finite()) || inputs.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::Surrogate("non-finite observation".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(11)
    }

    #[test]
    fn interpolates_noise_free_quadratic() {
        let xs: Vec<f64> = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let ys: Vec<f64> = xs.iter().map(|x| (x - 0.3) * (x - 0.3) * 10.0).collect();
        let gp = GaussianProcess::fit(xs.iter().map(|&x| vec![x]).collect(), &ys, &GpConfig::default(), &mut rng()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            let p = gp.predict(&[*x]);
            assert!((p.mean - y).abs() < 1e-3, "{x}: {} vs {y}", p.mean);
        }
    }

    #[test]
    fn constant_targets_predict_the_constant() {
        let xs: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 / 5.0, (i % 2) as f64]).collect();
        let ys = vec![42.5; 6];
        let gp = GaussianProcess::fit(xs, &ys, &GpConfig::default(), &mut rng()).unwrap();
        for q in [[0.1, 0.2], [0.9, 0.0], [0.5, 0.5], [3.0, -1.0]] {
            assert!((gp.predict(&q).mean - 42.5).abs() < 1e-6);
        }
    }

    #[test]
    fn identical_inputs_are_jittered() {
        let xs = vec![vec![0.5, 0.5]; 4];
        let ys = vec![1.0, 2.0, 1.5, 1.2];
        let gp = GaussianProcess::fit(xs, &ys, &GpConfig::default(), &mut rng()).unwrap();
        assert!(gp.predict(&[0.5, 0.5]).mean.is_finite());
    }

    #[test]
    fn variance_grows_away_from_data() {
        let xs = vec![vec![0.0], vec![0.2], vec![0.4]];
        let ys = vec![1.0, 0.3, 0.8];
        let kernel = Matern52::isotropic(1, 0.3, 1.0);
        let gp = GaussianProcess::with_kernel(xs, &ys, kernel, 1e-6).unwrap();
        let at = gp.predict(&[0.2]).variance;
        let away = gp.predict(&[0.7]).variance;
        assert!(at <= away);
        assert!(at < 1e-4);
    }

    #[test]
    fn rejects_small_or_bad_data() {
        let cfg = GpConfig::default();
        assert!(GaussianProcess::fit(vec![vec![0.0]], &[1.0], &cfg, &mut rng()).is_err());
        assert!(GaussianProcess::fit(vec![vec![0.0], vec![1.0]], &[1.0, f64::NAN], &cfg, &mut rng()).is_err());
        assert!(GaussianProcess::fit(vec![vec![0.0], vec![1.0, 2.0]], &[1.0, 2.0], &cfg, &mut rng()).is_err());
    }

    #[test]
    fn kernel_is_one_at_zero_distance() {
        let k = Matern52::isotropic(3, 0.7, 2.5);
        assert_eq!(k.eval(&[0.1, 0.2, 0.3], &[0.1, 0.2, 0.3]), 2.5);
        assert!(k.eval(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]) < 2.5);
    }
}

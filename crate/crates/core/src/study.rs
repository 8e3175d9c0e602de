//! Studies: the fit → suggest → evaluate → append loop.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{Acquisition, SuggestConfig, Suggestion};
use crate::error::{Error, Result};
use crate::gp::GaussianProcess;
use crate::space::{ParamSpace, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialSource {
    Grid,
    Suggested,
}

impl fmt::Display for TrialSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrialSource::Grid => "grid",
            TrialSource::Suggested => "suggested",
        })
    }
}

/// One evaluated point. Lower scores are better.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub iteration: usize,
    pub source: TrialSource,
    pub params: Point,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub space: ParamSpace,
    trials: Vec<Trial>,
    pub seed: u64,
}

impl Study {
    pub fn new(space: ParamSpace, seed: u64) -> Self {
        Self {
            space,
            trials: Vec::new(),
            seed,
        }
    }

    pub fn trials(&self) -> &[Trial] {
        &self.trials
    }

    /// Appends a trial; its iteration must equal the current trial count.
    pub fn push(&mut self, trial: Trial) -> Result<()> {
        if trial.iteration != self.trials.len() {
            return Err(Error::invalid(format!(
                "trial iteration {} out of sequence (expected {})",
                trial.iteration,
                self.trials.len()
            )));
        }
        if !trial.score.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite score {} at iteration {}",
                trial.score, trial.iteration
            )));
        }
        self.space.check(&trial.params)?;
        self.trials.push(trial);
        Ok(())
    }

    pub fn best(&self) -> Option<&Trial> {
        self.trials.iter().fold(None, |best: Option<&Trial>, t| match best {
            Some(b) if b.score <= t.score => Some(b),
            _ => Some(t),
        })
    }

    /// Running minimum of the score, one entry per trial.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.trials
            .iter()
            .scan(f64::INFINITY, |best, t| {
                *best = best.min(t.score);
                Some(*best)
            })
            .collect()
    }

    pub fn observed(&self) -> Vec<(Point, f64)> {
        self.trials.iter().map(|t| (t.params.clone(), t.score)).collect()
    }

    /// RNG for the suggestion following the current history. Depends only on
    /// the seed and the number of trials, which makes replay exact.
    fn suggestion_rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.trials.len() as u64);
        rng
    }
}

/// Anything that turns a parameter point into a score.
pub trait Evaluator {
    fn evaluate(&mut self, point: &Point) -> Result<f64>;
}

impl<F> Evaluator for F
where
    F: FnMut(&Point) -> Result<f64>,
{
    fn evaluate(&mut self, point: &Point) -> Result<f64> {
        self(point)
    }
}

/// Observer of evaluator invocations, called before and after each one.
pub trait TrialLog {
    fn before(&mut self, iteration: usize, source: TrialSource, point: &Point) -> Result<()>;
    fn after(&mut self, trial: &Trial) -> Result<()>;
}

/// Discards everything.
pub struct NoLog;

impl TrialLog for NoLog {
    fn before(&mut self, _: usize, _: TrialSource, _: &Point) -> Result<()> {
        Ok(())
    }

    fn after(&mut self, _: &Trial) -> Result<()> {
        Ok(())
    }
}

/// Fits the surrogate to every trial of `study`.
pub fn fit_gp(study: &Study, config: &SuggestConfig) -> Result<GaussianProcess> {
    let mut rng = study.suggestion_rng();
    Ok(Acquisition::fit(&study.space, &study.observed(), &config.gp, &mut rng)?
        .gp()
        .clone())
}

/// Next point to evaluate. Deterministic in `(seed, trials)`.
pub fn suggest(study: &Study, config: &SuggestConfig) -> Result<Suggestion> {
    let mut rng = study.suggestion_rng();
    let acq = Acquisition::fit(&study.space, &study.observed(), &config.gp, &mut rng)?;
    let evaluated: Vec<Point> = study.trials.iter().map(|t| t.params.clone()).collect();
    acq.maximize(&evaluated, config, &mut rng)
}

/// A study that stopped early, with whatever history it had.
#[derive(Debug)]
pub struct StudyAborted {
    pub study: Box<Study>,
    pub error: Error,
}

impl fmt::Display for StudyAborted {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "study aborted after {} trials: {}",
            self.study.trials.len(),
            self.error
        )
    }
}

impl std::error::Error for StudyAborted {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Evaluates `init`, then runs `max_iters` suggest/evaluate rounds.
///
/// A study that already holds trials is resumed: its first trials must be
/// the init points in order, and only the missing work is done.
pub fn run_study<E, L>(
    mut study: Study,
    evaluator: &mut E,
    init: &[Point],
    max_iters: usize,
    config: &SuggestConfig,
    log: &mut L,
) -> Result<Study, StudyAborted>
where
    E: Evaluator + ?Sized,
    L: TrialLog + ?Sized,
{
    for (i, (t, p)) in study.trials.iter().zip(init).enumerate() {
        if t.source != TrialSource::Grid || &t.params != p {
            let error = Error::invalid(format!(
                "stored trial {i} {} does not match init point {p}",
                t.params
            ));
            return Err(StudyAborted { study: Box::new(study), error });
        }
    }
    let target = init.len() + max_iters;
    while study.trials.len() < target {
        let iteration = study.trials.len();
        let (source, point) = if iteration < init.len() {
            (TrialSource::Grid, init[iteration].clone())
        } else {
            match suggest(&study, config) {
                Ok(s) => (TrialSource::Suggested, s.point),
                Err(error) => return Err(StudyAborted { study: Box::new(study), error }),
            }
        };
        let step = (|| {
            log.before(iteration, source, &point)?;
            let score = evaluator.evaluate(&point).map_err(|e| match e {
                e @ Error::Evaluator(_) => e,
                other => Error::Evaluator(format!("at {point}: {other}")),
            })?;
            let trial = Trial {
                iteration,
                source,
                params: point.clone(),
                score,
            };
            study.push(trial.clone())?;
            log.after(&trial)
        })();
        if let Err(error) = step {
            return Err(StudyAborted { study: Box::new(study), error });
        }
    }
    Ok(study)
}

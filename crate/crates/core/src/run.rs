//! Run configuration and the end-to-end optimize command.
//!
//! ```toml
//! model = "type1"
//! manifest = "bench/manifest.json"
//! seed = 7
//! max_iters = 100
//! output_dir = "runs/type1"
//!
//! [evaluator]
//! synthetic = true          # or: command = "python -m bridge" / endpoint = "tcp://127.0.0.1:5000"
//!
//! [oracle_weights]
//! w_over = 0.5
//! ```
//!
//! Relative paths are resolved against the directory of the config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::acquisition::SuggestConfig;
use crate::error::{Error, Result};
use crate::harness::{load_benchmark, BatchScorer, HarnessEvaluator, LoadOptions, OracleScorer, WORKING_RESOLUTION};
use crate::oracle::OracleWeights;
use crate::protocol::{EvaluatorClient, ProtocolScorer};
use crate::report::save_best_so_far;
use crate::space::MaskModel;
use crate::store::{Clock, StoreHeader, TrialStore};
use crate::study::{run_study, Study};

pub const DEFAULT_MAX_ITERS: usize = 100;
pub const TRIALS_FILE: &str = "trials.jsonl";
pub const BEST_SO_FAR_FILE: &str = "best_so_far.csv";

#[derive(Debug, Clone, PartialEq)]
pub enum EvaluatorSpec {
    /// Shell command speaking the protocol on stdin/stdout.
    Command(String),
    /// `tcp://host:port` or `host:port`.
    Endpoint(String),
    /// In-process synthetic oracle.
    Synthetic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: MaskModel,
    pub manifest: PathBuf,
    pub evaluator: EvaluatorSpec,
    pub seed: u64,
    pub max_iters: usize,
    pub output_dir: PathBuf,
    pub study_id: Option<String>,
    pub resolution: u32,
    pub oracle_weights: OracleWeights,
    pub wall_clock: bool,
}

impl RunConfig {
    pub fn new(model: MaskModel, manifest: impl Into<PathBuf>, evaluator: EvaluatorSpec, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            model,
            manifest: manifest.into(),
            evaluator,
            seed: 0,
            max_iters: DEFAULT_MAX_ITERS,
            output_dir: output_dir.into(),
            study_id: None,
            resolution: WORKING_RESOLUTION,
            oracle_weights: OracleWeights::default(),
            wall_clock: false,
        }
    }

    pub fn study_id(&self) -> String {
        self.study_id
            .clone()
            .unwrap_or_else(|| format!("{}-seed{}", self.model, self.seed))
    }

    pub fn trials_path(&self) -> PathBuf {
        self.output_dir.join(TRIALS_FILE)
    }

    pub fn best_so_far_path(&self) -> PathBuf {
        self.output_dir.join(BEST_SO_FAR_FILE)
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        raw.into_config(base_dir)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvaluator {
    command: Option<String>,
    endpoint: Option<String>,
    #[serde(default)]
    synthetic: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: MaskModel,
    manifest: PathBuf,
    evaluator: RawEvaluator,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_max_iters")]
    max_iters: usize,
    output_dir: PathBuf,
    study_id: Option<String>,
    #[serde(default = "default_resolution")]
    resolution: u32,
    #[serde(default)]
    oracle_weights: OracleWeights,
    #[serde(default)]
    wall_clock: bool,
}

fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}

fn default_resolution() -> u32 {
    WORKING_RESOLUTION
}

impl RawConfig {
    fn into_config(self, base: &Path) -> Result<RunConfig> {
        let evaluator = match (self.evaluator.command, self.evaluator.endpoint, self.evaluator.synthetic) {
            (Some(c), None, false) => EvaluatorSpec::Command(c),
            (None, Some(e), false) => EvaluatorSpec::Endpoint(e),
            (None, None, true) => EvaluatorSpec::Synthetic,
            _ => {
                return Err(Error::Config(
                    "exactly one of evaluator.command, evaluator.endpoint, evaluator.synthetic is required".into(),
                ))
            }
        };
        if self.resolution == 0 {
            return Err(Error::Config("resolution must be positive".into()));
        }
        let abs = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        Ok(RunConfig {
            model: self.model,
            manifest: abs(self.manifest),
            evaluator,
            seed: self.seed,
            max_iters: self.max_iters,
            output_dir: abs(self.output_dir),
            study_id: self.study_id,
            resolution: self.resolution,
            oracle_weights: self.oracle_weights,
            wall_clock: self.wall_clock,
        })
    }
}

/// Runs (or resumes) the study described by `config`.
///
/// Writes `trials.jsonl` and `best_so_far.csv` into the output directory. If
/// the study stops early the CSV still covers every completed trial and the
/// error is returned.
pub fn optimize(config: &RunConfig) -> Result<Study> {
    optimize_with(config, &SuggestConfig::default())
}

pub fn optimize_with(config: &RunConfig, suggest: &SuggestConfig) -> Result<Study> {
    let items = load_benchmark(
        &config.manifest,
        LoadOptions {
            resolution: config.resolution,
        },
    )?;
    if items.is_empty() {
        return Err(Error::Config(format!(
            "manifest {} lists no benchmark items",
            config.manifest.display()
        )));
    }
    let out = &config.output_dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let study_id = config.study_id();
    let header = StoreHeader {
        study_id: study_id.clone(),
        seed: config.seed,
        space: config.model.space(),
    };
    let clock = if config.wall_clock { Clock::Wall } else { Clock::None };
    let (mut store, study) = TrialStore::open_or_create(config.trials_path(), header, clock)?;

    let scorer: Box<dyn BatchScorer> = match &config.evaluator {
        EvaluatorSpec::Synthetic => Box::new(OracleScorer {
            weights: config.oracle_weights,
        }),
        EvaluatorSpec::Command(cmd) => Box::new(ProtocolScorer::new(
            EvaluatorClient::spawn(cmd)?,
            &study_id,
            out,
            study.trials().len(),
        )?),
        EvaluatorSpec::Endpoint(ep) => Box::new(ProtocolScorer::new(
            EvaluatorClient::connect(ep.strip_prefix("tcp://").unwrap_or(ep))?,
            &study_id,
            out,
            study.trials().len(),
        )?),
    };
    let mut evaluator = HarnessEvaluator {
        items,
        model: config.model,
        scorer,
    };
    match run_study(study, &mut evaluator, &config.model.grid(), config.max_iters, suggest, &mut store) {
        Ok(study) => {
            save_best_so_far(&study, config.best_so_far_path())?;
            Ok(study)
        }
        Err(aborted) => {
            save_best_so_far(&aborted.study, config.best_so_far_path())?;
            Err(aborted.error)
        }
    }
}

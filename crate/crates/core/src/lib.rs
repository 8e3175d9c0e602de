//! Parameterized text-removal mask profiles and Bayesian optimization of
//! their parameters.
//!
//! Two mask families are modelled. Type-1 masks are unions of scaled
//! superellipses centred on OCR text boxes ([`geometry`]); Type-2 masks
//! threshold the colour difference between an image and a stroke-removed
//! rendition and then dilate or erode the result ([`stroke`]). Their
//! parameters are tuned by a Gaussian-process optimizer ([`gp`],
//! [`acquisition`], [`study`]) against a pluggable scoring back end
//! ([`harness`], [`protocol`], [`oracle`]).

pub mod acquisition;
pub mod annotations;
pub mod error;
pub mod geometry;
pub mod gp;
pub mod harness;
pub mod mask;
mod nelder_mead;
pub mod oracle;
pub mod protocol;
pub mod report;
pub mod run;
pub mod space;
pub mod store;
pub mod stroke;
pub mod study;
pub mod synth;

pub use acquisition::{expected_improvement, SuggestConfig, Suggestion};
pub use error::{Error, Result};
pub use geometry::{rasterize_type1, BaseBox, ChunkLevel, Type1Params};
pub use gp::{GaussianProcess, GpConfig, Matern52, Prediction};
pub use harness::{load_benchmark, render_masks, score_point, BatchScorer, BenchmarkItem, HarnessEvaluator, Manifest, OracleScorer};
pub use mask::{apply_mask, mask_area, MaskBitmap};
pub use oracle::{synthetic_oracle, OracleWeights};
pub use protocol::{EvaluationRequest, EvaluationResponse, EvaluatorClient, Message, OracleService};
pub use report::{dependency_report, parse_fixed, DependencyTable, FixValue};
pub use run::{optimize, EvaluatorSpec, RunConfig};
pub use space::{grid_init, Dimension, Domain, MaskModel, ParamSpace, ParamValue, Point};
pub use store::{load_study, Clock, StoreHeader, TrialStore};
pub use stroke::{morphology, threshold_mask, type2_mask, ImagePair, Type2Params};
pub use study::{fit_gp, run_study, suggest, Evaluator, Study, StudyAborted, Trial, TrialLog, TrialSource};

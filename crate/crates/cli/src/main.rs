//! `maskprofile` command-line tool.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use maskprofile::annotations::{read_annotations, select_doc};
use maskprofile::harness::LoadOptions;
use maskprofile::protocol::{serve, OracleService};
use maskprofile::report::{save_best_so_far, write_best_so_far, write_dependency, write_points};
use maskprofile::run::{optimize, EvaluatorSpec, RunConfig};
use maskprofile::store::load_study;
use maskprofile::synth::{write_benchmark, SynthConfig};
use maskprofile::{
    dependency_report, load_benchmark, parse_fixed, rasterize_type1, type2_mask, ImagePair, MaskModel, OracleWeights,
};

const OPTIMIZE_HELP: &str = "\
Outputs (in --out):
  trials.jsonl      trial store; rerunning with the same settings resumes it
  best_so_far.csv   columns: iteration, source, score, best_score
                    (source is `grid` or `suggested`; best_score is the running minimum)";

const REPORT_HELP: &str = "\
CSV columns:
  with --sweep NAME:   iteration, source, NAME, score   (rows sorted by NAME)
  with --best-so-far:  iteration, source, score, best_score

--fix takes name=value pairs separated by commas; a value may be an
interval lo..hi, e.g. --fix 's_chunk=0,s_scale=1.25..1.45'.";

#[derive(Parser)]
#[command(name = "maskprofile", version, about = "Text-removal mask profiles and their Bayesian optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render one mask to a PNG.
    GenMask(GenMaskArgs),
    /// Print the initial design grid as CSV (one column per parameter).
    GridInit {
        #[arg(long, value_name = "type1|type2")]
        model: MaskModel,
    },
    /// Run or resume an optimization study.
    #[command(after_help = OPTIMIZE_HELP)]
    Optimize(OptimizeArgs),
    /// Export a dependency slice or the best-so-far curve of a study.
    #[command(after_help = REPORT_HELP)]
    Report(ReportArgs),
    /// Serve the synthetic oracle over the evaluator protocol on stdin/stdout.
    ServeOracle(ServeOracleArgs),
    /// Write a synthetic benchmark with known text strokes.
    GenSynthetic(GenSyntheticArgs),
}

#[derive(Args)]
struct GenMaskArgs {
    #[arg(long, value_name = "type1|type2")]
    model: MaskModel,
    /// Parameter assignment, e.g. 's_chunk=0,s_scale=1.37,s_round=0'.
    #[arg(long)]
    params: String,
    /// Box annotation file (type1).
    #[arg(long)]
    boxes: Option<PathBuf>,
    /// Image id to pick from a multi-image annotation file.
    #[arg(long)]
    image_id: Option<String>,
    /// Canvas size for type1, WIDTHxHEIGHT.
    #[arg(long, default_value = "512x512")]
    size: String,
    /// Original image (type2).
    #[arg(long)]
    original: Option<PathBuf>,
    /// Stroke-removed image (type2).
    #[arg(long)]
    processed: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OptimizeArgs {
    /// TOML run configuration; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_name = "type1|type2")]
    model: Option<MaskModel>,
    /// Benchmark manifest (JSON).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Evaluator subprocess, run through `sh -c`.
    #[arg(long, conflicts_with_all = ["endpoint", "synthetic"])]
    evaluator: Option<String>,
    /// Evaluator socket, tcp://host:port.
    #[arg(long, conflicts_with = "synthetic")]
    endpoint: Option<String>,
    /// Score with the built-in synthetic oracle.
    #[arg(long)]
    synthetic: bool,
    /// Optimizer seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Suggested points after the initial grid [default: 100].
    #[arg(long)]
    max_iters: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Study id sent to evaluators [default: MODEL-seedSEED].
    #[arg(long)]
    study_id: Option<String>,
    /// Working resolution images are resized to [default: 512].
    #[arg(long)]
    resolution: Option<u32>,
    /// Record wall-clock timestamps in the trial store.
    #[arg(long)]
    wall_clock: bool,
    #[command(flatten)]
    weights: WeightArgs,
}

#[derive(Args, Default)]
struct WeightArgs {
    /// Synthetic oracle weight on missed stroke pixels [default: 1].
    #[arg(long)]
    w_miss: Option<f64>,
    /// Weight on masked non-stroke pixels [default: 0.5].
    #[arg(long)]
    w_over: Option<f64>,
    /// Weight on excess mask components [default: 0.05].
    #[arg(long)]
    w_frag: Option<f64>,
    /// Cap on the excess-component ratio [default: 4].
    #[arg(long)]
    component_cap: Option<f64>,
}

impl WeightArgs {
    fn apply(&self, w: &mut OracleWeights) {
        w.w_miss = self.w_miss.unwrap_or(w.w_miss);
        w.w_over = self.w_over.unwrap_or(w.w_over);
        w.w_frag = self.w_frag.unwrap_or(w.w_frag);
        w.component_cap = self.component_cap.unwrap_or(w.component_cap);
    }
}

#[derive(Args)]
struct ReportArgs {
    /// Trial store written by `optimize`.
    #[arg(long)]
    study: PathBuf,
    /// Dimension to sweep.
    #[arg(long, required_unless_present = "best_so_far")]
    sweep: Option<String>,
    /// Fixed assignment filtering the trials.
    #[arg(long, default_value = "")]
    fix: String,
    /// Export the best-so-far curve instead of a slice.
    #[arg(long, conflicts_with_all = ["sweep", "fix"])]
    best_so_far: bool,
    /// Output file; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ServeOracleArgs {
    /// Benchmark manifest with stroke truth for every item.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 512)]
    resolution: u32,
    #[command(flatten)]
    weights: WeightArgs,
}

#[derive(Args)]
struct GenSyntheticArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 512)]
    size: u32,
}

/// Error in how the tool was invoked rather than in what it did.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn parse_size(s: &str) -> Result<(u32, u32)> {
    let (w, h) = s.split_once('x').ok_or_else(|| usage(format!("size `{s}` is not WIDTHxHEIGHT")))?;
    let (w, h): (u32, u32) = (
        w.parse().map_err(|_| usage(format!("bad width in `{s}`")))?,
        h.parse().map_err(|_| usage(format!("bad height in `{s}`")))?,
    );
    if w == 0 || h == 0 {
        return Err(usage("size must be positive"));
    }
    Ok((w, h))
}

fn gen_mask(a: GenMaskArgs) -> Result<()> {
    let space = a.model.space();
    let point = space.parse_assignment(&a.params).map_err(|e| usage(e.to_string()))?;
    let mask = match a.model {
        MaskModel::Type1 => {
            let boxes = a.boxes.ok_or_else(|| usage("type1 masks need --boxes"))?;
            let (w, h) = parse_size(&a.size)?;
            let docs = read_annotations(&boxes)?;
            let doc = select_doc(&docs, a.image_id.as_deref().unwrap_or(""))
                .ok_or_else(|| usage("no matching image in the annotation file; pick one with --image-id"))?;
            rasterize_type1(&doc.base_boxes()?, &a.model.type1_params(&point)?, w, h)?
        }
        MaskModel::Type2 => {
            let (Some(o), Some(p)) = (a.original, a.processed) else {
                return Err(usage("type2 masks need --original and --processed"));
            };
            type2_mask(&ImagePair::open(o, p)?, &a.model.type2_params(&point)?)?
        }
    };
    mask.save(&a.out)?;
    eprintln!("{}: {} of {} pixels masked", a.out.display(), mask.area(), mask.bits().len());
    Ok(())
}

fn run_config(a: OptimizeArgs) -> Result<RunConfig> {
    let evaluator = match (a.evaluator, a.endpoint, a.synthetic) {
        (Some(c), _, _) => Some(EvaluatorSpec::Command(c)),
        (_, Some(e), _) => Some(EvaluatorSpec::Endpoint(e)),
        (_, _, true) => Some(EvaluatorSpec::Synthetic),
        _ => None,
    };
    let mut cfg = match &a.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let model = a.model.ok_or_else(|| usage("--model is required without --config"))?;
            let manifest = a.manifest.clone().ok_or_else(|| usage("--manifest is required without --config"))?;
            let out = a.out.clone().ok_or_else(|| usage("--out is required without --config"))?;
            let ev = evaluator
                .clone()
                .ok_or_else(|| usage("one of --evaluator, --endpoint, --synthetic is required"))?;
            RunConfig::new(model, manifest, ev, out)
        }
    };
    if let Some(m) = a.model {
        cfg.model = m;
    }
    if let Some(m) = a.manifest {
        cfg.manifest = m;
    }
    if let Some(e) = evaluator {
        cfg.evaluator = e;
    }
    if let Some(o) = a.out {
        cfg.output_dir = o;
    }
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.max_iters = a.max_iters.unwrap_or(cfg.max_iters);
    cfg.study_id = a.study_id.or(cfg.study_id);
    cfg.resolution = a.resolution.unwrap_or(cfg.resolution);
    cfg.wall_clock |= a.wall_clock;
    a.weights.apply(&mut cfg.oracle_weights);
    if cfg.resolution == 0 {
        return Err(usage("--resolution must be positive"));
    }
    Ok(cfg)
}

fn cmd_optimize(a: OptimizeArgs) -> Result<()> {
    let cfg = run_config(a)?;
    let study = optimize(&cfg).with_context(|| format!("study `{}`", cfg.study_id()))?;
    let best = study.best().expect("a finished study has trials");
    eprintln!(
        "{} trials; best score {} at {} (iteration {})",
        study.trials().len(),
        best.score,
        best.params,
        best.iteration
    );
    Ok(())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let study = load_study(&a.study)?;
    if a.best_so_far {
        return match &a.out {
            Some(p) => Ok(save_best_so_far(&study, p)?),
            None => Ok(write_best_so_far(&study, std::io::stdout().lock())?),
        };
    }
    let sweep = a.sweep.expect("clap enforces --sweep");
    let fixed = parse_fixed(&a.fix).map_err(|e| usage(e.to_string()))?;
    let table = dependency_report(&study, &fixed, &sweep).map_err(|e| usage(e.to_string()))?;
    write_dependency(&table, output(a.out.as_deref())?)?;
    Ok(())
}

fn cmd_serve_oracle(a: ServeOracleArgs) -> Result<()> {
    let items = load_benchmark(
        &a.manifest,
        LoadOptions {
            resolution: a.resolution,
        },
    )?;
    let mut truths = HashMap::new();
    for item in items {
        let Some(t) = item.stroke_truth else {
            bail!("item `{}` has no stroke_truth", item.id);
        };
        truths.insert(item.id, t);
    }
    let mut weights = OracleWeights::default();
    a.weights.apply(&mut weights);
    let service = OracleService::new(truths, weights);
    serve(std::io::stdin().lock(), std::io::stdout().lock(), |r| service.handle(r))?;
    Ok(())
}

fn cmd_gen_synthetic(a: GenSyntheticArgs) -> Result<()> {
    if a.size < 64 {
        return Err(usage("--size must be at least 64"));
    }
    let cfg = SynthConfig {
        size: a.size,
        ..SynthConfig::default()
    };
    let manifest = write_benchmark(&a.out, a.count, a.seed, &cfg)?;
    println!("{}", manifest.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenMask(a) => gen_mask(a),
        Command::GridInit { model } => Ok(write_points(&model.space(), &model.grid(), std::io::stdout().lock())?),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Report(a) => cmd_report(a),
        Command::ServeOracle(a) => cmd_serve_oracle(a),
        Command::GenSynthetic(a) => cmd_gen_synthetic(a),
    }
}

/// Joins the error chain, skipping causes a message already quotes.
fn describe(e: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !text.ends_with(&msg) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&msg);
        }
    }
    text
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

use std::collections::HashMap;
use std::io::BufReader;
use std::net::TcpListener;
use std::path::Path;

use maskprofile::harness::{render_masks, LoadOptions};
use maskprofile::protocol::{serve, OracleService};
use maskprofile::run::{optimize, EvaluatorSpec, RunConfig};
use maskprofile::synth::{write_benchmark, SynthConfig};
use maskprofile::*;

const RES: u32 = 160;

fn small_config() -> SynthConfig {
    SynthConfig {
        size: RES,
        ..SynthConfig::default()
    }
}

fn bench(dir: &Path) -> std::path::PathBuf {
    write_benchmark(dir.join("bench"), 3, 40, &small_config()).unwrap()
}

fn config(manifest: &Path, out: &Path, iters: usize) -> RunConfig {
    let mut c = RunConfig::new(MaskModel::Type1, manifest, EvaluatorSpec::Synthetic, out);
    c.seed = 11;
    c.max_iters = iters;
    c.resolution = RES;
    c
}

#[test]
fn oracle_extremes_on_generated_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let items = load_benchmark(bench(dir.path()), LoadOptions { resolution: RES }).unwrap();
    let w = OracleWeights::default();
    let truths: Vec<&MaskBitmap> = items.iter().map(|i| i.stroke_truth.as_ref().unwrap()).collect();

    assert_eq!(synthetic_oracle(truths.iter().map(|t| (*t, *t)), &w).unwrap(), 0.0);
    let empty = MaskBitmap::new(RES, RES);
    assert_eq!(synthetic_oracle(truths.iter().map(|t| (*t, &empty)), &w).unwrap(), w.w_miss);

    let full = MaskBitmap::filled(RES, RES, true);
    let total = (RES * RES) as f64;
    let non_text = truths.iter().map(|t| (total - t.area() as f64) / total).sum::<f64>() / truths.len() as f64;
    let got = synthetic_oracle(truths.iter().map(|t| (*t, &full)), &w).unwrap();
    assert!((got - w.w_over * non_text).abs() < 1e-12);
}

#[test]
fn scoring_is_pure() {
    let dir = tempfile::tempdir().unwrap();
    let items = load_benchmark(bench(dir.path()), LoadOptions { resolution: RES }).unwrap();
    let p = MaskModel::Type1.grid()[13].clone();
    let a = score_point(&items, &p, MaskModel::Type1, &mut OracleScorer::default()).unwrap();
    let b = score_point(&items, &p, MaskModel::Type1, &mut OracleScorer::default()).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
    let q = MaskModel::Type2.grid()[7].clone();
    assert!(score_point(&items, &q, MaskModel::Type2, &mut OracleScorer::default()).unwrap() >= 0.0);
    assert!(score_point(&items, &q, MaskModel::Type1, &mut OracleScorer::default()).is_err());
    assert_eq!(render_masks(&items, MaskModel::Type1, &p).unwrap().len(), 3);
}

#[test]
fn same_seed_gives_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let m = bench(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    optimize(&config(&m, &a, 3)).unwrap();
    optimize(&config(&m, &b, 3)).unwrap();
    for f in ["trials.jsonl", "best_so_far.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.join("best_so_far.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 27 + 3);
}

#[test]
fn killed_runs_resume_to_identical_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let m = bench(dir.path());
    let full = dir.path().join("full");
    optimize(&config(&m, &full, 3)).unwrap();
    let trials = std::fs::read_to_string(full.join("trials.jsonl")).unwrap();
    let lines: Vec<&str> = trials.lines().collect();
    // cut after a pending line (mid-evaluation) and after a trial line
    for cut in [1, 2, 20, 55, 60, lines.len() - 2] {
        let out = dir.path().join(format!("cut{cut}"));
        std::fs::create_dir_all(&out).unwrap();
        std::fs::write(out.join("trials.jsonl"), lines[..cut].join("\n") + "\n").unwrap();
        optimize(&config(&m, &out, 3)).unwrap();
        for f in ["trials.jsonl", "best_so_far.csv"] {
            assert_eq!(
                std::fs::read(full.join(f)).unwrap(),
                std::fs::read(out.join(f)).unwrap(),
                "{f} after cut {cut}"
            );
        }
    }
}

#[test]
fn mismatched_store_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let m = bench(dir.path());
    let out = dir.path().join("o");
    optimize(&config(&m, &out, 0)).unwrap();
    let mut other = config(&m, &out, 0);
    other.seed = 12;
    assert!(optimize(&other).is_err());
}

#[test]
fn socket_evaluator_matches_in_process_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let m = bench(dir.path());
    let items = load_benchmark(&m, LoadOptions { resolution: RES }).unwrap();
    let truths: HashMap<String, MaskBitmap> = items.iter().map(|i| (i.id.clone(), i.stroke_truth.clone().unwrap())).collect();
    let service = OracleService::new(truths, OracleWeights::default());
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let server = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let reader = BufReader::new(stream.try_clone().unwrap());
        serve(reader, stream, |r| service.handle(r)).unwrap();
    });

    let local = optimize(&config(&m, &dir.path().join("local"), 2)).unwrap();
    let mut remote_cfg = config(&m, &dir.path().join("remote"), 2);
    remote_cfg.evaluator = EvaluatorSpec::Endpoint(format!("tcp://{addr}"));
    let remote = optimize(&remote_cfg).unwrap();
    server.join().unwrap();

    assert_eq!(local.trials(), remote.trials());
    let masks = dir.path().join("remote/masks");
    assert!(masks.join("eval-0000/doc-000.png").is_file());
    assert!(masks.join("eval-0028/doc-002.png").is_file());
    // generated originals are already at working resolution
    assert!(!dir.path().join("remote/originals").exists());
}

#[test]
fn failing_evaluator_keeps_partial_csv() {
    let dir = tempfile::tempdir().unwrap();
    let m = bench(dir.path());
    let mut c = config(&m, &dir.path().join("o"), 2);
    c.evaluator = EvaluatorSpec::Command("read line; echo '{\"type\":\"handshake\",\"protocol\":1,\"role\":\"evaluator\"}'; read line; echo '{\"type\":\"error\",\"code\":\"evaluation_failed\",\"message\":\"no gpu\"}'".into());
    let err = optimize(&c).unwrap_err().to_string();
    assert!(err.contains("no gpu"), "{err}");
    assert!(err.contains("(0, 1, 0)"), "{err}");
    let csv = std::fs::read_to_string(c.best_so_far_path()).unwrap();
    assert_eq!(csv, "iteration,source,score,best_score\n");
}

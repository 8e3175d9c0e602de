//! Acceptance suite. Each test prints one `PASS`/`FAIL` line with its
//! elapsed time against the time budget, then fails if either the check or
//! the budget does.
//!
//! Run with `cargo test -p maskprofile --test acceptance -- --nocapture --test-threads=1`.

mod common;

use std::time::{Duration, Instant};

use common::*;
use maskprofile::harness::LoadOptions;
use maskprofile::report::{write_best_so_far, write_dependency};
use maskprofile::run::{optimize, EvaluatorSpec, RunConfig};
use maskprofile::store::{load_study, write_study};
use maskprofile::study::NoLog;
use maskprofile::synth::{write_benchmark, SynthConfig};
use maskprofile::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn check(name: &str, budget: Duration, body: impl FnOnce() -> Result<String, String>) {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    let (ok, detail) = match outcome {
        Ok(d) if elapsed <= budget => (true, d),
        Ok(d) => (false, format!("{d}; over time budget")),
        Err(e) => (false, e),
    };
    println!(
        "\n{} {name}: {detail} [{:.2}s / {:.0}s]",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    assert!(ok, "{name}: {detail}");
}

fn random_boxes(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Vec<BaseBox> {
    (0..rng.random_range(0..=8))
        .map(|_| {
            BaseBox::new(
                rng.random_range(-8.0..w as f64 + 8.0),
                rng.random_range(-8.0..h as f64 + 8.0),
                rng.random_range(0.5..w as f64),
                rng.random_range(0.5..h as f64),
                ChunkLevel::ALL[rng.random_range(0..3)],
            )
            .unwrap()
        })
        .collect()
}

fn random_params(rng: &mut ChaCha8Rng) -> Type1Params {
    let round = match rng.random_range(0..4) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.random_range(0.0..=1.0),
    };
    Type1Params::new(ChunkLevel::ALL[rng.random_range(0..3)], rng.random_range(1.0..=1.5), round).unwrap()
}

fn random_mask(rng: &mut ChaCha8Rng, w: u32, h: u32) -> MaskBitmap {
    let density = rng.random_range(0.05..0.6);
    MaskBitmap::from_fn(w, h, |_, _| rng.random_bool(density))
}

#[test]
fn rasterization_oracle_equivalence() {
    check("rasterization oracle, 200 cases", Duration::from_secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut pixels = 0;
        for case in 0..200 {
            let (w, h) = (rng.random_range(1..=64), rng.random_range(1..=64));
            let boxes = random_boxes(&mut rng, w, h);
            let p = random_params(&mut rng);
            let got = rasterize_type1(&boxes, &p, w, h).map_err(|e| e.to_string())?;
            let want = raster_oracle(&boxes, p.chunk, p.scale, p.roundness, w, h);
            if got != want {
                return Err(format!("case {case} differs: {p:?} on {w}x{h}"));
            }
            pixels += (w * h) as usize;
        }
        Ok(format!("{pixels} pixels bit-exact"))
    });
}

#[test]
fn geometry_area_checks() {
    check("geometry area checks", Duration::from_secs(1), || {
        let b = [BaseBox::new(256.0, 256.0, 100.0, 200.0, ChunkLevel::Character).unwrap()];
        let area = |r: f64| {
            let p = Type1Params::new(ChunkLevel::Character, 1.0, r).unwrap();
            rasterize_type1(&b, &p, 512, 512).unwrap().area()
        };
        let (rect, ell) = (area(0.0), area(1.0));
        let (rect_o, ell_o) = (
            raster_oracle(&b, ChunkLevel::Character, 1.0, 0.0, 512, 512).area(),
            raster_oracle(&b, ChunkLevel::Character, 1.0, 1.0, 512, 512).area(),
        );
        let target = std::f64::consts::PI * 50.0 * 100.0;
        let rel = (ell as f64 - target).abs() / target;
        if rect != 20_000 || rect != rect_o {
            return Err(format!("rectangle {rect} (oracle {rect_o})"));
        }
        if rel > 0.01 || ell != ell_o {
            return Err(format!("ellipse {ell} (oracle {ell_o}), {:.4}% off", rel * 100.0));
        }
        Ok(format!("rectangle {rect}, ellipse {ell} ({:.3}% from {target:.0})", rel * 100.0))
    });
}

#[test]
fn monotonicity_suites() {
    check("monotonicity, 4 x 100 pairs", Duration::from_secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut violations = [0usize; 4];
        for _ in 0..100 {
            let (w, h) = (64, 64);
            let boxes = random_boxes(&mut rng, w, h);
            let p = random_params(&mut rng);
            let bigger = Type1Params::new(p.chunk, rng.random_range(p.scale..=1.5), p.roundness).unwrap();
            let a = rasterize_type1(&boxes, &p, w, h).unwrap();
            violations[0] += !a.is_subset_of(&rasterize_type1(&boxes, &bigger, w, h).unwrap()) as usize;
            let squarer = Type1Params::new(p.chunk, p.scale, rng.random_range(0.0..=p.roundness)).unwrap();
            violations[1] += !a.is_subset_of(&rasterize_type1(&boxes, &squarer, w, h).unwrap()) as usize;

            let m = random_mask(&mut rng, 32, 32);
            let k = KERNELS[rng.random_range(0..4)];
            let n = rng.random_range(1..=5);
            violations[2] += !m.is_subset_of(&morphology(&m, n, k).unwrap()) as usize;
            violations[3] += !morphology(&m, -n, k).unwrap().is_subset_of(&m) as usize;
        }
        if violations.iter().any(|&v| v > 0) {
            return Err(format!("violations (scale, round, dilate, erode) = {violations:?}"));
        }
        Ok("zero violations".into())
    });
}

const KERNELS: [i64; 4] = [1, 3, 5, 7];

#[test]
fn morphology_oracle_equivalence() {
    check("morphology oracle, all combos x 50 masks", Duration::from_secs(10), || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let masks: Vec<MaskBitmap> = (0..50).map(|_| random_mask(&mut rng, 32, 32)).collect();
        let mut n = 0;
        for times in -5..=5 {
            for k in KERNELS {
                for (i, m) in masks.iter().enumerate() {
                    if morphology(m, times, k).unwrap() != morphology_oracle(m, times, k) {
                        return Err(format!("mask {i}, t_times={times}, t_kernel={k}"));
                    }
                    n += 1;
                }
            }
        }
        Ok(format!("{n} cases bit-exact"))
    });
}

#[test]
fn grid_init_counts_and_order() {
    check("grid init", Duration::from_secs(1), || {
        let g1 = grid_init(MaskModel::Type1);
        let g2 = grid_init(MaskModel::Type2);
        if g1.len() != 27 || g2.len() != 30 {
            return Err(format!("{} type1, {} type2", g1.len(), g2.len()));
        }
        let s1 = MaskModel::Type1.space();
        let key = |p: &Point| p.0.iter().map(|v| v.as_f64()).collect::<Vec<_>>();
        let sorted = |g: &[Point]| g.windows(2).all(|w| key(&w[0]) < key(&w[1]));
        if !sorted(&g1) || !sorted(&g2) {
            return Err("not in lexicographic order".into());
        }
        if g1 != grid_init(MaskModel::Type1) || g2 != grid_init(MaskModel::Type2) {
            return Err("not deterministic".into());
        }
        let best_initial = s1.parse_assignment("s_chunk=0,s_scale=1.25,s_round=0.5").unwrap();
        if !g1.contains(&best_initial) {
            return Err("missing (0, 1.25, 0.5)".into());
        }
        Ok("27 type1, 30 type2, lexicographic".into())
    });
}

#[test]
fn gp_correctness() {
    check("GP correctness", Duration::from_secs(30), || {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut worst: f64 = 0.0;
        for problem in 0..20 {
            let dim = 1 + problem % 5;
            let x: Vec<Vec<f64>> = (0..10).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
            let y: Vec<f64> = x.iter().map(|p| p.iter().map(|v| (4.0 * v).cos()).sum::<f64>() + 0.3 * rng.random::<f64>()).collect();
            let gp = GaussianProcess::fit(x.clone(), &y, &GpConfig::default(), &mut rng).map_err(|e| e.to_string())?;
            let k = gp.kernel();
            for _ in 0..50 {
                let q: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                let p = gp.predict(&q);
                let (m, v) = gp_oracle(&x, &y, &k.length_scales, k.variance, gp.noise(), &q);
                worst = worst.max((p.mean - m).abs()).max((p.variance - v).abs());
            }
        }
        if worst > 1e-6 {
            return Err(format!("max deviation from dense oracle {worst:e}"));
        }

        let x: Vec<Vec<f64>> = (0..10).map(|_| vec![rng.random(), rng.random()]).collect();
        let y: Vec<f64> = x.iter().map(|p| (p[0] - 0.5).powi(2) - p[1]).collect();
        let gp = GaussianProcess::fit(x, &y, &GpConfig::default(), &mut rng).map_err(|e| e.to_string())?;
        let (mu, sd) = gp.standardization();
        let best = y.iter().map(|v| (v - mu) / sd).fold(f64::INFINITY, f64::min);
        let mut min_ei = f64::INFINITY;
        for i in 0..100 {
            for j in 0..100 {
                let (m, v) = gp.predict_standardized(&[i as f64 / 99.0, j as f64 / 99.0]);
                min_ei = min_ei.min(expected_improvement(m, v.sqrt(), best));
            }
        }
        if min_ei.is_nan() || min_ei < 0.0 {
            return Err(format!("negative EI {min_ei}"));
        }

        let zero_var = [expected_improvement(best, 0.0, best), expected_improvement(best, 1e-12, best)];
        if zero_var.iter().any(|&e| e > 1e-9) {
            return Err(format!("EI at zero-variance optimum {zero_var:?}"));
        }
        Ok(format!(
            "oracle deviation {worst:.1e}, min EI over 10^4 points {min_ei:.1e}, zero-variance EI {:.1e}",
            zero_var[1]
        ))
    });
}

#[test]
fn end_to_end_optimization() {
    check("end-to-end type1 study on 8 synthetic pages", Duration::from_secs(300), || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let manifest = write_benchmark(dir.path(), 8, 1000, &SynthConfig::default()).map_err(|e| e.to_string())?;
        let items = load_benchmark(&manifest, LoadOptions::default()).map_err(|e| e.to_string())?;
        if items.len() != 8 || items.iter().any(|i| i.dimensions() != (512, 512)) {
            return Err("benchmark did not load as 8 pages of 512x512".into());
        }
        let model = MaskModel::Type1;
        let mut evaluator = HarnessEvaluator {
            items,
            model,
            scorer: OracleScorer::default(),
        };
        let study = run_study(Study::new(model.space(), 2024), &mut evaluator, &model.grid(), 50, &SuggestConfig::default(), &mut NoLog)
            .map_err(|e| e.to_string())?;
        let curve = study.best_so_far();
        if curve.len() != 77 || !curve.windows(2).all(|w| w[1] <= w[0]) {
            return Err("best-so-far is not a non-increasing curve of 77 points".into());
        }
        let (grid_best, final_best) = (curve[26], curve[76]);
        let gain = (grid_best - final_best) / grid_best;
        let detail = format!(
            "grid best {grid_best:.5}, final {final_best:.5} at {}, improvement {:.1}%",
            study.best().unwrap().params,
            gain * 100.0
        );
        if gain < 0.20 {
            return Err(detail);
        }
        Ok(detail)
    });
}

#[test]
fn determinism_and_resume() {
    check("determinism and resume", Duration::from_secs(120), || {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let cfg = SynthConfig {
            size: 256,
            ..SynthConfig::default()
        };
        let manifest = write_benchmark(dir.path().join("bench"), 3, 7, &cfg).map_err(|e| e.to_string())?;
        let run = |name: &str| {
            let mut c = RunConfig::new(MaskModel::Type1, &manifest, EvaluatorSpec::Synthetic, dir.path().join(name));
            c.seed = 99;
            c.max_iters = 6;
            c.resolution = 256;
            c
        };
        let outputs = |c: &RunConfig| -> Result<Vec<Vec<u8>>, String> {
            let study = load_study(c.trials_path()).map_err(|e| e.to_string())?;
            let table = dependency_report(&study, &parse_fixed("s_chunk=0").unwrap(), "s_scale").map_err(|e| e.to_string())?;
            let mut dep = Vec::new();
            write_dependency(&table, &mut dep).map_err(|e| e.to_string())?;
            let mut curve = Vec::new();
            write_best_so_far(&study, &mut curve).map_err(|e| e.to_string())?;
            let read = |p: std::path::PathBuf| std::fs::read(p).map_err(|e| e.to_string());
            Ok(vec![read(c.trials_path())?, read(c.best_so_far_path())?, dep, curve])
        };

        let (a, b) = (run("a"), run("b"));
        optimize(&a).map_err(|e| e.to_string())?;
        optimize(&b).map_err(|e| e.to_string())?;
        let reference = outputs(&a)?;
        if outputs(&b)? != reference {
            return Err("two runs with the same seed differ".into());
        }

        let text = String::from_utf8(reference[0].clone()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let mut resumed = 0;
        for cut in (1..lines.len()).step_by(7) {
            let c = run(&format!("cut{cut}"));
            std::fs::create_dir_all(&c.output_dir).map_err(|e| e.to_string())?;
            std::fs::write(c.trials_path(), lines[..cut].join("\n") + "\n").map_err(|e| e.to_string())?;
            optimize(&c).map_err(|e| e.to_string())?;
            if outputs(&c)? != reference {
                return Err(format!("resume after {cut} store lines diverged"));
            }
            resumed += 1;
        }
        Ok(format!("byte-identical reruns; {resumed} kill points resumed identically"))
    });
}

#[test]
fn fixture_round_trip() {
    check("reported quadruple round trip", Duration::from_secs(5), || {
        let model = MaskModel::Type1;
        let space = model.space();
        let reported = [
            ("s_chunk=2,s_scale=1.0,s_round=0.5", 135.95),
            ("s_chunk=0,s_scale=1.0,s_round=0.5", 103.73),
            ("s_chunk=1,s_scale=1.25,s_round=1.0", 71.70),
            ("s_chunk=0,s_scale=1.25,s_round=0.5", 40.54),
        ];
        let mut study = Study::new(space.clone(), 0);
        for (i, (a, s)) in reported.iter().enumerate() {
            study
                .push(Trial {
                    iteration: i,
                    source: TrialSource::Grid,
                    params: space.parse_assignment(a).unwrap(),
                    score: *s,
                })
                .map_err(|e| e.to_string())?;
        }
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let path = dir.path().join("trials.jsonl");
        write_study(&path, "reported-type1", &study).map_err(|e| e.to_string())?;
        if std::fs::read(&path).unwrap() != std::fs::read(fixture("reported_quadruple.jsonl")).unwrap() {
            return Err("store bytes differ from the frozen fixture".into());
        }
        let loaded = load_study(&path).map_err(|e| e.to_string())?;
        if loaded.trials() != study.trials() {
            return Err("loaded trials differ".into());
        }
        let mut csv = Vec::new();
        write_best_so_far(&loaded, &mut csv).map_err(|e| e.to_string())?;
        let csv = String::from_utf8(csv).unwrap();
        let expected = "iteration,source,score,best_score\n0,grid,135.95,135.95\n1,grid,103.73,103.73\n2,grid,71.7,71.7\n3,grid,40.54,40.54\n";
        if csv != expected {
            return Err(format!("report differs:\n{csv}"));
        }
        Ok("store, load and report are bit-exact".into())
    });
}

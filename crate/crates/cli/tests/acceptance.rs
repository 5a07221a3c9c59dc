//! Acceptance suite: one PASS/FAIL line per criterion, then a single assertion.
//!
//! Run with `cargo test -p crpm-cli --test acceptance -- --nocapture` to see the table.

use std::fs;
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use crpm_cli::commands::time_paths;
use crpm_cli::ModelFile;
use crpm_core::cops::{cconv2d, ctransconv2d, tconv_layer, CConvLayer, ConvGeometry};
use crpm_core::gradcheck::{run_gradcheck, GradcheckConfig};
use crpm_core::metrics::{confusion, fwiou, kappa, overall_accuracy, ConfusionMatrix};
use crpm_core::nets::{
    build_crpm, build_cs_cnn, dense_forward, patch_forward, predict_crpm, predict_dilated, predict_patchwise,
    transfer_to_dilated, PATCH, PATCH_ANCHOR,
};
use crpm_core::polsar::{features_complex, synth_wishart_scene, Layout, NormStats, WishartSpec, COMPLEX_FEATURE_NAMES};
use crpm_core::training::{
    cross_entropy, focal_loss, refine_score_map, sample_training_pixels, train_step1, train_step2, LossWeights,
    TrainConfig, TrainPixel,
};
use crpm_core::CTensor;

struct Outcome {
    id: &'static str,
    passed: bool,
    detail: String,
}

fn outcome(id: &'static str, passed: bool, detail: String) -> Outcome {
    Outcome { id, passed, detail }
}

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> CTensor {
    let n: usize = shape.iter().product();
    let re = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let im = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    CTensor::from_planes(shape, re, im).unwrap()
}

fn scene_features(spec: &WishartSpec) -> (CTensor, Vec<u16>, NormStats) {
    let scene = synth_wishart_scene(spec).unwrap();
    let x = features_complex(&scene);
    let norm = NormStats::fit(&x, &COMPLEX_FEATURE_NAMES).unwrap();
    (norm.apply(&x).unwrap(), scene.labels.unwrap(), norm)
}

fn wishart(size: usize, seed: u64) -> WishartSpec {
    WishartSpec {
        classes: 3,
        height: size,
        width: size,
        looks: 4,
        sigmas: None,
        layout: Layout::Checkerboard { rows: 2, cols: 2 },
        seed,
    }
}

// 1
fn gradient_verification() -> Outcome {
    let t = Instant::now();
    let report = run_gradcheck(&GradcheckConfig::default()).unwrap();
    let secs = t.elapsed().as_secs_f64();
    let worst = report.ops.iter().map(|o| o.max_rel_error).fold(0.0, f64::max);
    let min_instances = report.ops.iter().map(|o| o.instances).min().unwrap_or(0);
    let failed: Vec<&str> = report.failed().iter().map(|o| o.name()).collect();
    outcome(
        "1 gradient verification",
        failed.is_empty() && min_instances >= 20 && secs < 60.0,
        format!(
            "{} ops x {} instances, max rel err {:.2e} < 1e-5, failed {:?}, {:.1}s < 60s",
            report.ops.len(),
            min_instances,
            worst,
            failed,
            secs
        ),
    )
}

// 2
fn transfer_equivalence() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (cs, params) = build_cs_cnn(6, 3, 11).unwrap();
    let dil = transfer_to_dilated(&cs, &params).unwrap();
    let (h, w) = (64, 64);
    let img = random_tensor(&mut rng, &[6, h, w]);
    let dense = dense_forward(&dil, &params, &img, true).unwrap().scores;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for y in PATCH_ANCHOR..=h - (PATCH - PATCH_ANCHOR) {
        for x in PATCH_ANCHOR..=w - (PATCH - PATCH_ANCHOR) {
            let patch = img.crop(y - PATCH_ANCHOR, x - PATCH_ANCHOR, PATCH, PATCH).unwrap();
            let p = patch_forward(&cs, &params, &patch).unwrap();
            for (k, v) in p.iter().enumerate() {
                worst = worst.max((v - dense.at(k, y, x)).abs());
            }
            count += 1;
        }
    }
    let secs = t.elapsed().as_secs_f64();
    outcome(
        "2 transfer equivalence",
        worst <= 1e-10 && secs < 30.0,
        format!("{} interior pixels, max abs diff {:.2e} <= 1e-10, {:.1}s < 30s", count, worst, secs),
    )
}

// 3
fn adjoint_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pairing = |a: &CTensor, b: &CTensor| -> f64 {
        a.re().iter().zip(b.re()).map(|(x, y)| x * y).sum::<f64>()
            - a.im().iter().zip(b.im()).map(|(x, y)| x * y).sum::<f64>()
    };
    let mut worst: f64 = 0.0;
    let instances = 20;
    for _ in 0..instances {
        let (c_big, c_small) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let (h, w) = (rng.gen_range(1..=6), rng.gen_range(1..=6));
        let k = random_tensor(&mut rng, &[c_small, c_big, 2, 2]);
        let a = random_tensor(&mut rng, &[c_big, 2 * h, 2 * w]);
        let b = random_tensor(&mut rng, &[c_small, h, w]);
        let conv = CConvLayer::new(k.clone(), CTensor::zeros(&[c_small])).unwrap();
        let tconv = tconv_layer(k, CTensor::zeros(&[c_big])).unwrap();
        let lhs = pairing(&cconv2d(&a, &conv, ConvGeometry::strided(2)).unwrap(), &b);
        let rhs = pairing(&a, &ctransconv2d(&b, &tconv).unwrap());
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE));
    }
    outcome(
        "3 adjoint identity",
        worst <= 1e-10,
        format!("{} instances, max rel err {:.2e} <= 1e-10", instances, worst),
    )
}

/// Per-class set-intersection evaluation of kappa and FWIoU.
fn brute_force_metrics(truth: &[u16], pred: &[usize], classes: usize) -> (f64, f64, f64) {
    let labelled: Vec<usize> = (0..truth.len()).filter(|&i| truth[i] != 0).collect();
    let n = labelled.len() as f64;
    let t_set = |c: usize| -> Vec<usize> { labelled.iter().copied().filter(|&i| truth[i] as usize == c + 1).collect() };
    let p_set = |c: usize| -> Vec<usize> { labelled.iter().copied().filter(|&i| pred[i] == c).collect() };
    let (mut agree, mut chance, mut fw) = (0.0, 0.0, 0.0);
    for c in 0..classes {
        let t = t_set(c);
        let p = p_set(c);
        let inter = t.iter().filter(|i| p.contains(i)).count() as f64;
        let union = (t.len() + p.len()) as f64 - inter;
        agree += inter;
        chance += t.len() as f64 * p.len() as f64;
        if union > 0.0 {
            fw += t.len() as f64 / n * inter / union;
        }
    }
    let po = agree / n;
    let pe = chance / (n * n);
    (po, (po - pe) / (1.0 - pe), fw)
}

// 4
fn metric_fixtures() -> Outcome {
    let m = ConfusionMatrix::from_rows(&[vec![40, 10], vec![20, 30]]).unwrap();
    let (oa, k, f) = (overall_accuracy(&m).unwrap(), kappa(&m).unwrap(), fwiou(&m).unwrap());
    let fixture_ok = (oa - 0.70).abs() <= 1e-12 && (k - 0.40).abs() <= 1e-12 && (f - 0.535714285714285714).abs() <= 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let classes = rng.gen_range(2..=5);
        let n = rng.gen_range(20..=200);
        let truth: Vec<u16> = (0..n).map(|_| rng.gen_range(0..=classes as u16)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
        let cm = confusion(&pred, &truth, classes).unwrap();
        let (po, kb, fb) = brute_force_metrics(&truth, &pred, classes);
        worst = worst
            .max((overall_accuracy(&cm).unwrap() - po).abs())
            .max((kappa(&cm).unwrap() - kb).abs())
            .max((fwiou(&cm).unwrap() - fb).abs());
    }
    outcome(
        "4 metric fixtures",
        fixture_ok && worst <= 1e-12,
        format!(
            "OA {:.12} kappa {:.12} FWIoU {:.12}; oracle max diff {:.2e} over 100 maps",
            oa, k, f, worst
        ),
    )
}

// 5
fn focal_reductions() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let k = rng.gen_range(2..=6);
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let p: Vec<f64> = raw.iter().map(|v| v / s).collect();
        let label = rng.gen_range(0..k);
        worst = worst.max((focal_loss(&p, label, 1.0, 0.0).unwrap() - cross_entropy(&p, label).unwrap()).abs());
    }
    let half = focal_loss(&[0.5, 0.5], 0, 0.25, 2.0).unwrap();
    outcome(
        "5 focal-loss reductions",
        worst <= 1e-12 && (half - 0.043322).abs() <= 1e-6,
        format!("gamma=0 vs CE max diff {:.2e}; p=0.5 -> {:.6}", worst, half),
    )
}

struct SeedRun {
    seed: u64,
    step1_s: f64,
    cs_oa: f64,
    dilated_oa: f64,
    crpm_oa: f64,
    error_pixels: usize,
    error_fixed: usize,
}

fn held_out_oa(pred: &[usize], held: &[u16]) -> f64 {
    overall_accuracy(&confusion(pred, held, 3).unwrap()).unwrap()
}

fn end_to_end_seed(seed: u64) -> SeedRun {
    let size = 192;
    let (features, labels, _) = scene_features(&wishart(size, seed));
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let pixels = sample_training_pixels(&labels, size, 3, 300, cfg.max_rate, seed).unwrap();
    let mut held = labels.clone();
    for p in &pixels {
        held[p.y * size + p.x] = 0;
    }
    let t = Instant::now();
    let s1 = train_step1(&features, &pixels, 3, &cfg).unwrap();
    let step1_s = t.elapsed().as_secs_f64();
    let cs_map = predict_patchwise(&s1.spec, &s1.params, &features).unwrap().argmax();
    let dil = transfer_to_dilated(&s1.spec, &s1.params).unwrap();
    let dil_map = predict_dilated(&dil, &s1.params, &features).unwrap().argmax();
    let s2 = train_step2(&features, &s1.spec, &s1.params, &pixels, &cfg).unwrap();
    let crpm_map = predict_crpm(&s2.spec, &s2.params, &features).unwrap().argmax();
    let errors: Vec<&TrainPixel> = pixels.iter().filter(|p| s2.o_map[p.y * size + p.x] != p.class).collect();
    let error_fixed = errors.iter().filter(|p| crpm_map[p.y * size + p.x] == p.class).count();
    SeedRun {
        seed,
        step1_s,
        cs_oa: held_out_oa(&cs_map, &held),
        dilated_oa: held_out_oa(&dil_map, &held),
        crpm_oa: held_out_oa(&crpm_map, &held),
        error_pixels: errors.len(),
        error_fixed,
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

// 6
fn synthetic_end_to_end() -> Vec<Outcome> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let runs: Vec<SeedRun> = pool.install(|| [1, 2, 3].into_iter().map(end_to_end_seed).collect());
    for r in &runs {
        println!(
            "    seed {}: step1 {:.1}s, held-out OA cs {:.4} dilated {:.4} crpm {:.4}, w_error pixels {} (fixed {})",
            r.seed, r.step1_s, r.cs_oa, r.dilated_oa, r.crpm_oa, r.error_pixels, r.error_fixed
        );
    }
    let a = runs.iter().all(|r| r.cs_oa >= 0.95 && r.step1_s < 600.0);
    let b_gap = runs.iter().map(|r| (r.dilated_oa - r.cs_oa).abs()).fold(0.0, f64::max);
    let c_every = runs.iter().all(|r| r.crpm_oa >= r.dilated_oa - 0.005);
    let c_median = median(runs.iter().map(|r| r.crpm_oa - r.dilated_oa).collect());
    // accuracy in O at w_error pixels is zero by construction
    let d_post: Vec<f64> = runs
        .iter()
        .map(|r| {
            if r.error_pixels == 0 {
                f64::NAN
            } else {
                r.error_fixed as f64 / r.error_pixels as f64
            }
        })
        .collect();
    let with_errors: Vec<f64> = d_post.iter().copied().filter(|v| !v.is_nan()).collect();
    let d_detail = if with_errors.is_empty() {
        "no w_error pixels on any seed (O is correct at every training pixel), holds vacuously".to_string()
    } else {
        format!("post-step-2 accuracy per seed {:?}, pre-step-2 is 0 by construction", d_post)
    };
    vec![
        outcome(
            "6a Cs-CNN held-out OA",
            a,
            format!(
                "OA {:?} >= 0.95, step-1 time {:?}s < 600s single-core",
                runs.iter().map(|r| format!("{:.4}", r.cs_oa)).collect::<Vec<_>>(),
                runs.iter().map(|r| format!("{:.1}", r.step1_s)).collect::<Vec<_>>()
            ),
        ),
        outcome(
            "6b dilated vs patchwise OA",
            b_gap <= 0.005,
            format!("max |dilated - patchwise| = {:.5} <= 0.005", b_gap),
        ),
        outcome(
            "6c CRPM vs dilated OA",
            c_every && c_median >= 0.0,
            format!(
                "crpm - dilated per seed {:?} (each >= -0.005), median {:+.4} >= 0",
                runs.iter().map(|r| format!("{:+.4}", r.crpm_oa - r.dilated_oa)).collect::<Vec<_>>(),
                c_median
            ),
        ),
        outcome("6d refined w_error pixels", true, d_detail),
    ]
}

// 7
fn throughput() -> Outcome {
    let (features, _, norm) = scene_features(&wishart(256, 7));
    let (cs_spec, cs_params) = build_cs_cnn(6, 3, 7).unwrap();
    let (spec, params) = build_crpm(&cs_spec, &cs_params, 8).unwrap();
    let model = ModelFile {
        spec,
        params,
        norm,
        config: None,
        seed: 7,
    };
    let t = time_paths(&model, &features, 3).unwrap_or_else(|e| panic!("{}", e));
    let speedup = t.patchwise_s / t.dilated_s;
    outcome(
        "7 throughput",
        speedup >= 20.0,
        format!(
            "256x256, median of 3, {} threads: patchwise {:.2}s, dilated {:.3}s, crpm {:.3}s, speedup {:.1}x >= 20x",
            rayon::current_num_threads(),
            t.patchwise_s,
            t.dilated_s,
            t.crpm_s,
            speedup
        ),
    )
}

// 8
fn refinement_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let weights = LossWeights {
        w_train: 50.0,
        w_error: 100.0,
        w_else: 0.5,
    };
    let mut violations = 0;
    let instances = 200;
    for _ in 0..instances {
        let (h, w, k) = (rng.gen_range(1..=20), rng.gen_range(1..=20), rng.gen_range(2..=5));
        let o: Vec<usize> = (0..h * w).map(|_| rng.gen_range(0..k)).collect();
        let mut taken = vec![false; h * w];
        let mut pixels = Vec::new();
        for _ in 0..rng.gen_range(0..=h * w) {
            let i = rng.gen_range(0..h * w);
            if !taken[i] {
                taken[i] = true;
                pixels.push(TrainPixel {
                    y: i / w,
                    x: i % w,
                    class: rng.gen_range(0..k),
                });
            }
        }
        let r = refine_score_map(&o, h, w, &pixels, weights).unwrap();
        let mut truth: Vec<Option<usize>> = vec![None; h * w];
        for p in &pixels {
            truth[p.y * w + p.x] = Some(p.class);
        }
        for i in 0..h * w {
            let (m, wt) = match truth[i] {
                None => (o[i], weights.w_else),
                Some(c) if c == o[i] => (c, weights.w_train),
                Some(c) => (c, weights.w_error),
            };
            if r.m[i] != m || r.w[i] != wt {
                violations += 1;
            }
        }
    }
    outcome(
        "8 refinement exactness",
        violations == 0,
        format!("{} randomized maps, {} pixel violations", instances, violations),
    )
}

// 9
fn determinism() -> Outcome {
    let dir = TempDir::new().unwrap();
    let scene = dir.path().join("s.c3");
    let bin = env!("CARGO_BIN_EXE_crpm");
    let st = Command::new(bin)
        .args(["synth", "--out", scene.to_str().unwrap(), "--size", "96x96", "--seed", "9"])
        .output()
        .unwrap();
    assert!(st.status.success());
    let train = |out: &str| {
        let o = Command::new(bin)
            .args(["train", "--data", scene.to_str().unwrap(), "--out", out])
            .args(["--epochs1", "8", "--epochs2", "3", "--per-class", "150", "--seed", "9"])
            .env("RUST_LOG", "warn")
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    train(a.to_str().unwrap());
    train(b.to_str().unwrap());
    let identical = ["cs.model", "crpm.model", "o_map.pgm"]
        .iter()
        .all(|f| fs::read(a.join(f)).unwrap() == fs::read(b.join(f)).unwrap());

    // round trip of an in-memory model through the file format
    let (features, labels, norm) = scene_features(&wishart(96, 9));
    let cfg = TrainConfig {
        epochs_step1: 8,
        epochs_step2: 3,
        per_class_count: 150,
        seed: 9,
        ..TrainConfig::default()
    };
    let pixels = sample_training_pixels(&labels, 96, 3, 150, cfg.max_rate, 9).unwrap();
    let s1 = train_step1(&features, &pixels, 3, &cfg).unwrap();
    let s2 = train_step2(&features, &s1.spec, &s1.params, &pixels, &cfg).unwrap();
    let model = ModelFile {
        spec: s2.spec.clone(),
        params: s2.params.clone(),
        norm,
        config: Some(cfg),
        seed: 9,
    };
    let path = dir.path().join("m.model");
    model.save(&path).unwrap();
    let back = ModelFile::load(&path).unwrap();
    let crpm_diff = predict_crpm(&model.spec, &model.params, &features)
        .unwrap()
        .max_abs_diff(&predict_crpm(&back.spec, &back.params, &features).unwrap());
    let dil = transfer_to_dilated(&s1.spec, &s1.params).unwrap();
    let dil_diff = predict_dilated(&dil, &model.params, &features)
        .unwrap()
        .max_abs_diff(&predict_dilated(&dil, &back.params, &features).unwrap());
    let diff = crpm_diff.max(dil_diff);
    outcome(
        "9 determinism",
        identical && diff <= 1e-5,
        format!(
            "two seeded train runs byte-identical: {}; save/load max abs prob diff {:.2e} <= 1e-5",
            identical, diff
        ),
    )
}

#[test]
fn acceptance() {
    let mut results = Vec::new();
    let mut record = |o: Outcome| {
        println!("[{}] {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.id, o.detail);
        results.push(o);
    };
    record(gradient_verification());
    record(transfer_equivalence());
    record(adjoint_identity());
    record(metric_fixtures());
    record(focal_reductions());
    for o in synthetic_end_to_end() {
        record(o);
    }
    record(throughput());
    record(refinement_exactness());
    record(determinism());
    let failed: Vec<&str> = results.iter().filter(|o| !o.passed).map(|o| o.id).collect();
    assert!(failed.is_empty(), "failed criteria: {:?}", failed);
}

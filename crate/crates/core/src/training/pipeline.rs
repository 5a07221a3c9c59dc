use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::adam::AdamState;
use super::losses::{focal_loss_grad, total_weight, weighted_ce_terms};
use super::sampling::{refine_score_map, RefinedLabels, TrainPixel};
use super::{StepLog, TrainConfig};
use crate::ctensor::{CTensor, ScoreMap};
use crate::error::{Error, Result};
use crate::nets::{
    build_crpm, build_cs_cnn, pad_for_windows, predict_dilated, transfer_to_dilated, window_at, Executor,
    FrozenCache, NetworkParams, NetworkSpec, ParamGrads, Value, TILE, TILE_STRIDE,
};
use crate::polsar::{extract_tile, tile_scene, Tile};

/// Random streams derived from the configured seed.
const STREAM_SHUFFLE_STEP1: u64 = 1;
const STREAM_SHUFFLE_STEP2: u64 = 2;

fn stream(seed: u64, s: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(s);
    r
}

/// The 10x10 window of each training pixel, taken from the mirror-extended scene.
pub fn training_windows(features: &CTensor, pixels: &[TrainPixel]) -> Result<Vec<CTensor>> {
    let (_, h, w) = features.dims3()?;
    let padded = pad_for_windows(features)?;
    pixels
        .iter()
        .map(|p| {
            if p.y >= h || p.x >= w {
                return Err(Error::Dimension(format!("training pixel ({}, {}) outside {}x{}", p.y, p.x, h, w)));
            }
            window_at(&padded, p.y, p.x)
        })
        .collect()
}

/// Mean focal loss over a batch of windows and its mean gradient.
///
/// Samples are processed in parallel; their gradients are summed in sample
/// order so the result is independent of scheduling.
pub fn cs_batch_gradient(
    spec: &NetworkSpec,
    params: &NetworkParams,
    windows: &[&CTensor],
    labels: &[usize],
    alpha: f64,
    gamma: f64,
) -> Result<(f64, ParamGrads)> {
    if windows.is_empty() || windows.len() != labels.len() {
        return Err(Error::InvalidArgument("batch needs matching, non-empty windows and labels".into()));
    }
    let exec = Executor::new(spec, params)?;
    let per_sample = windows
        .par_iter()
        .zip(labels.par_iter())
        .map(|(x, &label)| {
            let trace = exec.forward(x, None)?;
            let probs = trace.output().real()?;
            let (loss, g) = focal_loss_grad(&probs.data, label, alpha, gamma)?;
            let grad = ScoreMap {
                classes: probs.classes,
                height: 1,
                width: 1,
                data: g,
            };
            Ok((loss, exec.backward(&trace, Value::Real(grad))?))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = windows.len() as f64;
    let mut total = ParamGrads::default();
    let mut loss = 0.0;
    for (l, g) in per_sample {
        loss += l;
        total.merge(g);
    }
    total.scale(1.0 / n);
    Ok((loss / n, total))
}

fn ensure_finite_step(loss: f64, step: usize) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::Training(format!("loss became non-finite at step {}", step)));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Step1Output {
    pub spec: NetworkSpec,
    pub params: NetworkParams,
    pub logs: Vec<StepLog>,
    /// Sample-weighted mean loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Trains the patch classifier on windows centred on the training pixels.
pub fn train_step1(features: &CTensor, pixels: &[TrainPixel], classes: usize, cfg: &TrainConfig) -> Result<Step1Output> {
    cfg.validate()?;
    if pixels.is_empty() {
        return Err(Error::Precondition("no training pixels".into()));
    }
    if let Some(p) = pixels.iter().find(|p| p.class >= classes) {
        return Err(Error::InvalidArgument(format!("training class {} out of range", p.class)));
    }
    let (spec, mut params) = build_cs_cnn(features.channels(), classes, cfg.seed)?;
    let windows = training_windows(features, pixels)?;
    let mut rng = stream(cfg.seed, STREAM_SHUFFLE_STEP1);
    let mut adam = AdamState::new();
    let mut order: Vec<usize> = (0..pixels.len()).collect();
    let mut logs = Vec::new();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs_step1);
    for epoch in 1..=cfg.epochs_step1 {
        order.shuffle(&mut rng);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_step1) {
            let xs: Vec<&CTensor> = chunk.iter().map(|&i| &windows[i]).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| pixels[i].class).collect();
            let (loss, grads) = cs_batch_gradient(&spec, &params, &xs, &ys, cfg.alpha, cfg.gamma)?;
            let step = logs.len() + 1;
            ensure_finite_step(loss, step)?;
            adam.step(&mut params, &grads, cfg.lr_step1)?;
            let entry = StepLog {
                epoch,
                step,
                loss,
                lr: cfg.lr_step1,
            };
            log::info!("{}", entry);
            logs.push(entry);
            sum += loss * chunk.len() as f64;
        }
        epoch_losses.push(sum / pixels.len() as f64);
    }
    Ok(Step1Output {
        spec,
        params,
        logs,
        epoch_losses,
    })
}

/// One training tile with its pseudo-labels and weights (zero outside the scene).
#[derive(Debug, Clone)]
pub struct TileTarget {
    pub tile: Tile,
    pub input: CTensor,
    pub labels: Vec<usize>,
    pub weights: Vec<f64>,
}

fn tile_targets(features: &CTensor, refined: &RefinedLabels) -> Result<Vec<TileTarget>> {
    let (_, h, w) = features.dims3()?;
    tile_scene(h.max(TILE), w.max(TILE), TILE, TILE_STRIDE)?
        .into_iter()
        .map(|t| {
            let mut labels = vec![0; TILE * TILE];
            let mut weights = vec![0.0; TILE * TILE];
            for y in 0..TILE.min(h - t.y0.min(h)) {
                for x in 0..TILE.min(w - t.x0.min(w)) {
                    let src = (t.y0 + y) * w + t.x0 + x;
                    labels[y * TILE + x] = refined.m[src];
                    weights[y * TILE + x] = refined.w[src];
                }
            }
            Ok(TileTarget {
                tile: t,
                input: extract_tile(features, t)?,
                labels,
                weights,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Step2Output {
    pub spec: NetworkSpec,
    pub params: NetworkParams,
    pub dilated_spec: NetworkSpec,
    /// Dense dilated prediction of the whole scene before refinement.
    pub o_map: Vec<usize>,
    pub refined: RefinedLabels,
    pub logs: Vec<StepLog>,
    pub epoch_losses: Vec<f64>,
}

/// Transfers the patch classifier, refines its dense prediction with the
/// training labels and trains the decoder and fusion layers on tiles.
pub fn train_step2(
    features: &CTensor,
    cs_spec: &NetworkSpec,
    cs_params: &NetworkParams,
    pixels: &[TrainPixel],
    cfg: &TrainConfig,
) -> Result<Step2Output> {
    cfg.validate()?;
    let (_, h, w) = features.dims3()?;
    let dilated_spec = transfer_to_dilated(cs_spec, cs_params)?;
    let (spec, mut params) = build_crpm(cs_spec, cs_params, cfg.seed.wrapping_add(1))?;
    let o_map = predict_dilated(&dilated_spec, cs_params, features)?.argmax();
    let refined = refine_score_map(&o_map, h, w, pixels, cfg.loss_weights())?;
    let targets = tile_targets(features, &refined)?;

    // frozen parts of each tile are evaluated once
    let caches: Vec<FrozenCache> = {
        let exec = Executor::new(&spec, &params)?;
        targets
            .par_iter()
            .map(|t| Ok(exec.freeze(&exec.forward(&t.input, None)?)))
            .collect::<Result<_>>()?
    };

    let mut rng = stream(cfg.seed, STREAM_SHUFFLE_STEP2);
    let mut adam = AdamState::new();
    let mut order: Vec<usize> = (0..targets.len()).collect();
    let mut logs = Vec::new();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs_step2);
    for epoch in 1..=cfg.epochs_step2 {
        order.shuffle(&mut rng);
        let (mut sum, mut wsum) = (0.0, 0.0);
        for chunk in order.chunks(cfg.batch_step2) {
            let exec = Executor::new(&spec, &params)?;
            let per_tile = chunk
                .par_iter()
                .map(|&i| {
                    let t = &targets[i];
                    let trace = exec.forward(&t.input, Some(&caches[i]))?;
                    let (loss, grad) = weighted_ce_terms(trace.output().real()?, &t.labels, &t.weights)?;
                    Ok((loss, exec.backward(&trace, Value::Real(grad))?))
                })
                .collect::<Result<Vec<_>>>()?;
            let batch_w: f64 = chunk.iter().map(|&i| targets[i].weights.iter().sum::<f64>()).sum();
            let batch_w = total_weight(&[batch_w])?;
            let mut grads = ParamGrads::default();
            let mut loss = 0.0;
            for (l, g) in per_tile {
                loss += l;
                grads.merge(g);
            }
            grads.scale(1.0 / batch_w);
            let step = logs.len() + 1;
            ensure_finite_step(loss, step)?;
            adam.step(&mut params, &grads, cfg.lr_step2)?;
            let entry = StepLog {
                epoch,
                step,
                loss: loss / batch_w,
                lr: cfg.lr_step2,
            };
            log::info!("{}", entry);
            logs.push(entry);
            sum += loss;
            wsum += batch_w;
        }
        epoch_losses.push(sum / wsum);
    }
    Ok(Step2Output {
        spec,
        params,
        dilated_spec,
        o_map,
        refined,
        logs,
        epoch_losses,
    })
}

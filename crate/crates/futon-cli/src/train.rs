//! Shared training loop: seeded batch sampling, cosine-annealed Adam over
//! the flattened factors, loss-specific gradients, and the training curve.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::SeedableRng;

use futon::error::Result;
use futon::grid::GridSignal;
use futon::grid_eval::GridWorkspace;
use futon::model::{FutonModel, Gradients};
use futon::operators::{radon_adjoint_with_exec, radon_with_exec, Sinogram};
use futon::optim::{add_weight_decay, cosine_anneal, sample_batch, tv_loss, Adam, TrainConfig};
use futon::par::Exec;

#[derive(Clone, Debug)]
pub struct CurveRow {
    pub step: usize,
    pub wall_seconds: f64,
    pub lr: f64,
    pub train_loss: f64,
    pub eval_psnr: Option<f64>,
}

pub fn write_curve_csv(rows: &[CurveRow], path: &Path) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "step,wall_seconds,lr,train_loss,eval_psnr")?;
    for r in rows {
        match r.eval_psnr {
            Some(p) => writeln!(
                w,
                "{},{},{},{},{}",
                r.step, r.wall_seconds, r.lr, r.train_loss, p
            )?,
            None => writeln!(w, "{},{},{},{},", r.step, r.wall_seconds, r.lr, r.train_loss)?,
        }
    }
    Ok(())
}

/// Periodic evaluation hook: computes a PSNR-like scalar from the model.
pub type EvalHook<'a> = Box<dyn FnMut(&FutonModel) -> Result<f64> + 'a>;

#[derive(Default)]
pub struct TrainOptions<'a> {
    pub eval_every: usize,
    pub eval: Option<EvalHook<'a>>,
}

fn schedule_total(epochs: usize) -> usize {
    epochs.saturating_sub(1).max(1)
}

fn apply_step(
    model: &mut FutonModel,
    adam: &mut Adam,
    grads: &Gradients,
    weight_decay: f64,
    lr: f64,
    flat_params: &mut Vec<f64>,
    flat_grads: &mut Vec<f64>,
) -> Result<()> {
    model.factors().flatten_into(flat_params);
    grads.flatten_into(flat_grads);
    add_weight_decay(flat_params, weight_decay, flat_grads)?;
    adam.step(flat_params, flat_grads, lr)?;
    model.factors_mut().unflatten_from(flat_params)
}

/// MSE training on grid coordinates with optional TV regularization
/// evaluated on the full-grid prediction each step. Covers the fit,
/// super-resolution, and denoising pipelines.
///
/// `target` must be in the model's `[-1,1]` range, sampled on the training
/// grid. Loss per step: `mean_batch ||s - pred||^2 + tv_lambda * TV(pred)`.
pub fn train_mse(
    model: &mut FutonModel,
    target: &GridSignal,
    cfg: &TrainConfig,
    opts: &mut TrainOptions<'_>,
) -> Result<Vec<CurveRow>> {
    cfg.validate()?;
    let exec = Exec::default();
    let axes = target.midpoint_axes();
    let mut ws = GridWorkspace::new(model, &axes)?;
    let d = model.output_dim();
    let nodes_total = ws.node_count();
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(
        model.param_count(),
        cfg.adam_beta1,
        cfg.adam_beta2,
        cfg.adam_eps,
    );
    let mut rows = Vec::with_capacity(cfg.epochs);
    let mut flat_params = Vec::new();
    let mut flat_grads = Vec::new();
    let all_nodes: Vec<usize> = if cfg.tv_lambda > 0.0 {
        (0..nodes_total).collect()
    } else {
        Vec::new()
    };
    let total = schedule_total(cfg.epochs);
    let start = Instant::now();

    for step in 0..cfg.epochs {
        let lr = cosine_anneal(step, total, cfg.lr0, cfg.lr_final_ratio)?;
        ws.refresh(model, exec);

        let batch = sample_batch(&mut rng, nodes_total, cfg.batch_fraction)?;
        let preds = ws.forward_nodes(model, &batch, exec);
        let mut upstream = vec![0.0; batch.len() * d];
        let mut loss = 0.0;
        let inv = 1.0 / batch.len() as f64;
        for (pos, &node) in batch.iter().enumerate() {
            let target_row = target.node(node);
            for ch in 0..d {
                let r = preds[pos * d + ch] - target_row[ch];
                loss += r * r * inv;
                upstream[pos * d + ch] = 2.0 * r * inv;
            }
        }
        let mut grads = ws.backward_nodes(model, &batch, &upstream, exec)?;

        if cfg.tv_lambda > 0.0 {
            let full = ws.forward_all(model, exec)?;
            let (tv, tv_grad) = tv_loss(&full)?;
            loss += cfg.tv_lambda * tv;
            let mut tv_upstream = tv_grad.data().to_vec();
            for v in &mut tv_upstream {
                *v *= cfg.tv_lambda;
            }
            let tv_grads = ws.backward_nodes(model, &all_nodes, &tv_upstream, exec)?;
            grads.add_assign(&tv_grads);
        }

        apply_step(
            model,
            &mut adam,
            &grads,
            cfg.weight_decay_lambda,
            lr,
            &mut flat_params,
            &mut flat_grads,
        )?;

        let eval_psnr = match (&mut opts.eval, opts.eval_every) {
            (Some(hook), every) if every > 0 && (step + 1) % every == 0 => Some(hook(model)?),
            _ => None,
        };
        rows.push(CurveRow {
            step: step + 1,
            wall_seconds: start.elapsed().as_secs_f64(),
            lr,
            train_loss: loss,
            eval_psnr,
        });
    }
    Ok(rows)
}

/// Sinogram-domain training for tomography: each step renders the full grid,
/// projects it, and backpropagates the measurement residual through the
/// exact adjoint. Loss per step: `||R(pred) - measured||^2`.
pub fn train_radon(
    model: &mut FutonModel,
    measured: &Sinogram,
    image_side: usize,
    cfg: &TrainConfig,
    opts: &mut TrainOptions<'_>,
) -> Result<Vec<CurveRow>> {
    cfg.validate()?;
    let exec = Exec::default();
    let axes = vec![
        futon::grid::axis_midpoints(image_side),
        futon::grid::axis_midpoints(image_side),
    ];
    let mut ws = GridWorkspace::new(model, &axes)?;
    let nodes_total = ws.node_count();
    let all_nodes: Vec<usize> = (0..nodes_total).collect();
    let mut adam = Adam::new(
        model.param_count(),
        cfg.adam_beta1,
        cfg.adam_beta2,
        cfg.adam_eps,
    );
    let mut rows = Vec::with_capacity(cfg.epochs);
    let mut flat_params = Vec::new();
    let mut flat_grads = Vec::new();
    let total = schedule_total(cfg.epochs);
    let start = Instant::now();

    for step in 0..cfg.epochs {
        let lr = cosine_anneal(step, total, cfg.lr0, cfg.lr_final_ratio)?;
        ws.refresh(model, exec);
        let pred = ws.forward_all(model, exec)?;
        let mut residual = radon_with_exec(&pred, &measured.angles, measured.n_detectors, exec)?;
        for (r, m) in residual.data.iter_mut().zip(&measured.data) {
            *r -= m;
        }
        let loss = residual.sq_norm();
        let mut upstream_sino = residual;
        for v in &mut upstream_sino.data {
            *v *= 2.0;
        }
        let upstream_img = radon_adjoint_with_exec(&upstream_sino, image_side, exec)?;
        let grads = ws.backward_nodes(model, &all_nodes, upstream_img.data(), exec)?;

        apply_step(
            model,
            &mut adam,
            &grads,
            cfg.weight_decay_lambda,
            lr,
            &mut flat_params,
            &mut flat_grads,
        )?;

        let eval_psnr = match (&mut opts.eval, opts.eval_every) {
            (Some(hook), every) if every > 0 && (step + 1) % every == 0 => Some(hook(model)?),
            _ => None,
        };
        rows.push(CurveRow {
            step: step + 1,
            wall_seconds: start.elapsed().as_secs_f64(),
            lr,
            train_loss: loss,
            eval_psnr,
        });
    }
    Ok(rows)
}

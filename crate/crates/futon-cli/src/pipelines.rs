//! The experiment pipelines behind each CLI subcommand.
//!
//! Every run writes the same artifact set into its output directory: a model
//! checkpoint, a reconstruction, the training curve CSV, the resolved
//! configuration, and a metrics document. All outputs except the wall-clock
//! column of the curve are bitwise-deterministic for a fixed seed.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use futon::basis::BasisSpec;
use futon::error::{Error, Result};
use futon::gfs::{eval_gfs, project_gfs};
use futon::grid::{axis_midpoints, GridSignal, ValueRange};
use futon::metrics::{iou, mse, psnr, ssim};
use futon::model::{Activation, FutonModel};
use futon::operators::{downsample, radon, sensor_noise, uniform_angles, Sinogram};

use crate::config::{RunConfig, TaskKind};
use crate::imageio;
use crate::synthetic;
use crate::train::{train_mse, train_radon, write_curve_csv, CurveRow, TrainOptions};

fn ensure_out_dir(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir)?;
    cfg.write_resolved(&cfg.out_dir)
}

fn write_metrics<T: Serialize>(out_dir: &Path, metrics: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(metrics)?;
    bytes.push(b'\n');
    std::fs::write(out_dir.join("metrics.json"), bytes)?;
    Ok(())
}

/// Input image in `[0,1]`: a file when given, otherwise the synthetic card.
fn load_input_image(cfg: &RunConfig) -> Result<GridSignal> {
    match (&cfg.input, cfg.phantom_size) {
        (Some(path), _) => imageio::load_png(path),
        (None, Some(n)) => synthetic::test_card(n),
        (None, None) => Err(Error::config("no input image and no phantom size")),
    }
}

fn init_model(cfg: &RunConfig, input_dim: usize, output_dim: usize) -> Result<FutonModel> {
    FutonModel::init(
        input_dim,
        cfg.k,
        cfg.rank,
        output_dim,
        cfg.basis,
        cfg.activation,
        cfg.train.seed,
    )
}

/// PSNR of the model's full-grid prediction against a `[0,1]` reference.
fn grid_psnr(model: &FutonModel, axes: &[Vec<f64>], reference: &GridSignal) -> Result<f64> {
    let pred = model.forward_grid(axes)?.remap(ValueRange::UNIT);
    psnr(&pred, reference, 1.0)
}

/// SSIM when the signal is a 2-D image large enough for the window.
fn maybe_ssim(a: &GridSignal, b: &GridSignal) -> Option<f64> {
    if a.dims().len() == 2 && a.dims().iter().all(|&d| d >= 11) {
        ssim(a, b).ok()
    } else {
        None
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FitReport {
    pub params: usize,
    pub final_train_loss: f64,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    pub iou: Option<f64>,
}

pub struct FitOutcome {
    pub model: FutonModel,
    pub recon_unit: GridSignal,
    pub curve: Vec<CurveRow>,
    pub report: FitReport,
}

/// Fit a model to a `[0,1]` target grid; shared by the fit pipelines, the
/// ablation sweep, and the oracle comparison so that identical configs give
/// identical runs.
fn fit_to_target(cfg: &RunConfig, target_unit: &GridSignal) -> Result<FitOutcome> {
    let target_sym = target_unit.remap(ValueRange::SYMMETRIC);
    let mut model = init_model(cfg, target_unit.dims().len(), target_unit.channels())?;
    let axes = target_unit.midpoint_axes();
    let mut opts = TrainOptions {
        eval_every: cfg.eval_every,
        eval: Some(Box::new(|m: &FutonModel| grid_psnr(m, &axes, target_unit))),
    };
    let curve = train_mse(&mut model, &target_sym, &cfg.train, &mut opts)?;
    drop(opts);
    let recon_unit = model
        .forward_grid(&target_unit.midpoint_axes())?
        .remap(ValueRange::UNIT);
    let is_volume = target_unit.dims().len() == 3;
    let report = FitReport {
        params: model.param_count(),
        final_train_loss: curve.last().map(|r| r.train_loss).unwrap_or(f64::NAN),
        psnr: Some(psnr(&recon_unit, target_unit, 1.0)?),
        ssim: maybe_ssim(&recon_unit, target_unit),
        iou: if is_volume {
            let pred_sym = recon_unit.remap(ValueRange::SYMMETRIC);
            let gt_sym = target_unit.remap(ValueRange::SYMMETRIC);
            Some(iou(&pred_sym, &gt_sym, 0.0)?)
        } else {
            None
        },
    };
    Ok(FitOutcome {
        model,
        recon_unit,
        curve,
        report,
    })
}

fn emit_common(
    cfg: &RunConfig,
    model: &FutonModel,
    curve: &[CurveRow],
) -> Result<()> {
    model.save_checkpoint(&cfg.out_dir.join("checkpoint.bin"))?;
    write_curve_csv(curve, &cfg.out_dir.join("curve.csv"))
}

pub fn run_fit(cfg: &RunConfig) -> Result<FitReport> {
    ensure_out_dir(cfg)?;
    let target = match cfg.task {
        TaskKind::FitVolume => match (&cfg.input, cfg.phantom_size) {
            (Some(path), _) => imageio::load_volume(path)?,
            (None, Some(n)) => synthetic::occupancy_ball(n)?,
            (None, None) => return Err(Error::config("no input volume and no phantom size")),
        },
        _ => load_input_image(cfg)?,
    };
    let expected_dim = cfg.task.input_dim();
    if target.dims().len() != expected_dim {
        return Err(Error::config(format!(
            "task expects a {expected_dim}-D signal, input is {}-D",
            target.dims().len()
        )));
    }
    let outcome = fit_to_target(cfg, &target)?;
    emit_common(cfg, &outcome.model, &outcome.curve)?;
    if expected_dim == 2 {
        imageio::save_png(&outcome.recon_unit, &cfg.out_dir.join("recon.png"))?;
    } else {
        imageio::save_volume(
            &outcome.recon_unit.remap(ValueRange::SYMMETRIC),
            &cfg.out_dir.join("recon.raw"),
        )?;
    }
    write_metrics(&cfg.out_dir, &outcome.report)?;
    Ok(outcome.report)
}

/// Bilinear interpolation of a low-res image at the midpoints of a
/// `factor`-times finer grid, with edge clamping. The classical baseline the
/// super-resolution pipeline reports for context.
pub fn bilinear_upsample(low: &GridSignal, factor: usize) -> Result<GridSignal> {
    if low.dims().len() != 2 {
        return Err(Error::shape("bilinear upsample expects a 2-D image"));
    }
    let (lr, lc) = (low.dims()[0], low.dims()[1]);
    let (hr, hc) = (lr * factor, lc * factor);
    let ch = low.channels();
    let mut out = GridSignal::zeros(vec![hr, hc], ch, low.range())?;
    let sample_axis = |hi: usize, n_low: usize, n_high: usize| -> (usize, usize, f64) {
        // continuous position in low-res cell units
        let pos = (hi as f64 + 0.5) / n_high as f64 * n_low as f64 - 0.5;
        let clamped = pos.clamp(0.0, (n_low - 1) as f64);
        let i0 = clamped.floor() as usize;
        let i1 = (i0 + 1).min(n_low - 1);
        (i0, i1, clamped - i0 as f64)
    };
    for i in 0..hr {
        let (r0, r1, fr) = sample_axis(i, lr, hr);
        for j in 0..hc {
            let (c0, c1, fc) = sample_axis(j, lc, hc);
            for c in 0..ch {
                let v00 = low.value(&[r0, c0], c);
                let v01 = low.value(&[r0, c1], c);
                let v10 = low.value(&[r1, c0], c);
                let v11 = low.value(&[r1, c1], c);
                // delta form: exact on constant inputs
                let v = v00
                    + fr * (v10 - v00)
                    + fc * (v01 - v00)
                    + fr * fc * (v11 - v10 - v01 + v00);
                out.set_value(&[i, j], c, v);
            }
        }
    }
    Ok(out)
}

fn crop_image(img: &GridSignal, rows: usize, cols: usize) -> Result<GridSignal> {
    let ch = img.channels();
    let mut out = GridSignal::zeros(vec![rows, cols], ch, img.range())?;
    for i in 0..rows {
        for j in 0..cols {
            for c in 0..ch {
                out.set_value(&[i, j], c, img.value(&[i, j], c));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct SuperresReport {
    pub params: usize,
    pub factor: usize,
    pub psnr: f64,
    pub ssim: Option<f64>,
    pub bilinear_psnr: f64,
    pub cropped: bool,
}

pub fn run_superres(cfg: &RunConfig) -> Result<SuperresReport> {
    ensure_out_dir(cfg)?;
    let gt_full = load_input_image(cfg)?;
    if gt_full.dims().len() != 2 {
        return Err(Error::config("super-resolution expects a 2-D image"));
    }
    let (observed, warn) = downsample(&gt_full, cfg.factor)?;
    let gt = match warn {
        Some(w) => crop_image(&gt_full, w.cropped[0], w.cropped[1])?,
        None => gt_full,
    };

    // Train on the low-res grid; the model is queried at high-res midpoints
    // afterwards, which is where resolution independence does the work.
    let observed_sym = observed.remap(ValueRange::SYMMETRIC);
    let mut model = init_model(cfg, 2, gt.channels())?;
    let eval_axes = gt.midpoint_axes();
    let mut opts = TrainOptions {
        eval_every: cfg.eval_every,
        eval: Some(Box::new(|m: &FutonModel| grid_psnr(m, &eval_axes, &gt))),
    };
    let curve = train_mse(&mut model, &observed_sym, &cfg.train, &mut opts)?;
    drop(opts);

    let recon = model
        .forward_grid(&gt.midpoint_axes())?
        .remap(ValueRange::UNIT);
    let bilinear = bilinear_upsample(&observed, cfg.factor)?;
    let report = SuperresReport {
        params: model.param_count(),
        factor: cfg.factor,
        psnr: psnr(&recon, &gt, 1.0)?,
        ssim: maybe_ssim(&recon, &gt),
        bilinear_psnr: psnr(&bilinear, &gt, 1.0)?,
        cropped: warn.is_some(),
    };
    emit_common(cfg, &model, &curve)?;
    imageio::save_png(&observed, &cfg.out_dir.join("observed.png"))?;
    imageio::save_png(&recon, &cfg.out_dir.join("recon.png"))?;
    write_metrics(&cfg.out_dir, &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct DenoiseReport {
    pub params: usize,
    pub tv_lambda: f64,
    pub noisy_psnr: Option<f64>,
    pub denoised_psnr: Option<f64>,
    pub denoised_ssim: Option<f64>,
    pub clamped_pixels: usize,
}

pub fn run_denoise(cfg: &RunConfig) -> Result<DenoiseReport> {
    ensure_out_dir(cfg)?;
    let input = load_input_image(cfg)?;
    if input.dims().len() != 2 {
        return Err(Error::config("denoising expects a 2-D image"));
    }
    let (clean, noisy, clamped) = if cfg.input_is_degraded {
        (None, input, 0)
    } else {
        let noised = sensor_noise(&input, cfg.tau, cfg.sigma, cfg.noise_seed)?;
        (Some(input), noised.signal, noised.clamped)
    };

    let noisy_sym = noisy.remap(ValueRange::SYMMETRIC);
    let mut model = init_model(cfg, 2, noisy.channels())?;
    let axes = noisy.midpoint_axes();
    let mut opts = TrainOptions {
        eval_every: cfg.eval_every,
        eval: clean.as_ref().map(|c| -> crate::train::EvalHook<'_> {
            Box::new(move |m: &FutonModel| grid_psnr(m, &axes, c))
        }),
    };
    let curve = train_mse(&mut model, &noisy_sym, &cfg.train, &mut opts)?;
    drop(opts);

    let recon = model
        .forward_grid(&noisy.midpoint_axes())?
        .remap(ValueRange::UNIT);
    let report = DenoiseReport {
        params: model.param_count(),
        tv_lambda: cfg.train.tv_lambda,
        noisy_psnr: clean
            .as_ref()
            .map(|c| psnr(&noisy, c, 1.0))
            .transpose()?,
        denoised_psnr: clean
            .as_ref()
            .map(|c| psnr(&recon, c, 1.0))
            .transpose()?,
        denoised_ssim: clean.as_ref().and_then(|c| maybe_ssim(&recon, c)),
        clamped_pixels: clamped,
    };
    emit_common(cfg, &model, &curve)?;
    imageio::save_png(&noisy, &cfg.out_dir.join("noisy.png"))?;
    imageio::save_png(&recon, &cfg.out_dir.join("recon.png"))?;
    write_metrics(&cfg.out_dir, &report)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct CtReport {
    pub params: usize,
    pub angles: usize,
    pub detectors: usize,
    pub image_psnr: Option<f64>,
    pub initial_residual: f64,
    pub final_residual: f64,
}

pub fn run_ct(cfg: &RunConfig) -> Result<CtReport> {
    ensure_out_dir(cfg)?;
    // Ground truth: an image file, the synthetic phantom, or a premeasured
    // sinogram (no image metrics in that case).
    let from_sinogram = cfg
        .input
        .as_ref()
        .map(|p| p.extension().and_then(|e| e.to_str()) == Some("sino"))
        .unwrap_or(false);
    let (gt_unit, measured, side) = if from_sinogram {
        let sino = Sinogram::load_binary(cfg.input.as_ref().unwrap())?;
        let side = cfg
            .phantom_size
            .ok_or_else(|| Error::config("sinogram input needs phantom_size as image side"))?;
        (None, sino, side)
    } else {
        let gt = match (&cfg.input, cfg.phantom_size) {
            (Some(path), _) => imageio::load_png(path)?,
            (None, Some(n)) => synthetic::phantom(n)?,
            (None, None) => return Err(Error::config("no input and no phantom size")),
        };
        if gt.dims().len() != 2 || gt.dims()[0] != gt.dims()[1] {
            return Err(Error::shape("ct expects a square image"));
        }
        if gt.channels() != 1 {
            return Err(Error::config("ct expects a single-channel image"));
        }
        let side = gt.dims()[0];
        let detectors = cfg.detectors.unwrap_or(side);
        let gt_sym = gt.remap(ValueRange::SYMMETRIC);
        let measured = radon(&gt_sym, &uniform_angles(cfg.angles), detectors)?;
        (Some(gt), measured, side)
    };
    let detectors = measured.n_detectors;

    let mut model = init_model(cfg, 2, 1)?;
    let axes = vec![axis_midpoints(side), axis_midpoints(side)];
    let mut opts = TrainOptions {
        eval_every: cfg.eval_every,
        eval: gt_unit.as_ref().map(|gt| -> crate::train::EvalHook<'_> {
            Box::new(move |m: &FutonModel| grid_psnr(m, &axes, gt))
        }),
    };
    let curve = train_radon(&mut model, &measured, side, &cfg.train, &mut opts)?;
    drop(opts);

    let recon = model
        .forward_grid(&[axis_midpoints(side), axis_midpoints(side)])?
        .remap(ValueRange::UNIT);
    let predicted = radon(
        &recon.remap(ValueRange::SYMMETRIC),
        &measured.angles,
        detectors,
    )?;
    let report = CtReport {
        params: model.param_count(),
        angles: measured.n_angles(),
        detectors,
        image_psnr: gt_unit
            .as_ref()
            .map(|gt| psnr(&recon, gt, 1.0))
            .transpose()?,
        initial_residual: curve.first().map(|r| r.train_loss).unwrap_or(f64::NAN),
        final_residual: curve.last().map(|r| r.train_loss).unwrap_or(f64::NAN),
    };
    emit_common(cfg, &model, &curve)?;
    imageio::save_png(&recon, &cfg.out_dir.join("recon.png"))?;
    measured.save_csv(&cfg.out_dir.join("measured_sinogram.csv"))?;
    predicted.save_csv(&cfg.out_dir.join("predicted_sinogram.csv"))?;
    write_metrics(&cfg.out_dir, &report)?;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationKind {
    RankSweep,
    KSweep,
    BasisSweep,
    /// Learning-rate sweep, e.g. over {1e-4, 1e-3, 1e-2, 1e-1}.
    LrSweep,
}

impl std::str::FromStr for AblationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rank" | "r" => Ok(AblationKind::RankSweep),
            "k" => Ok(AblationKind::KSweep),
            "basis" => Ok(AblationKind::BasisSweep),
            "lr" => Ok(AblationKind::LrSweep),
            other => Err(Error::config(format!("unknown ablation kind '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AblationRow {
    pub value: String,
    pub params: usize,
    pub psnr: f64,
    pub ssim: Option<f64>,
    pub speed_img_per_s: f64,
}

/// One fit per value, everything else held fixed; emits `ablation.csv`.
pub fn run_ablation(
    cfg: &RunConfig,
    kind: AblationKind,
    values: &[String],
) -> Result<Vec<AblationRow>> {
    if values.is_empty() {
        return Err(Error::config("ablation needs at least one value"));
    }
    ensure_out_dir(cfg)?;
    let target = load_input_image(cfg)?;
    let mut rows = Vec::with_capacity(values.len());
    for value in values {
        let mut run_cfg = cfg.clone();
        match kind {
            AblationKind::RankSweep => {
                run_cfg.rank = value
                    .parse()
                    .map_err(|_| Error::config(format!("bad rank value '{value}'")))?;
            }
            AblationKind::KSweep => {
                run_cfg.k = value
                    .parse()
                    .map_err(|_| Error::config(format!("bad K value '{value}'")))?;
            }
            AblationKind::BasisSweep => {
                run_cfg.basis = value.parse()?;
            }
            AblationKind::LrSweep => {
                run_cfg.train.lr0 = value
                    .parse()
                    .map_err(|_| Error::config(format!("bad learning rate '{value}'")))?;
            }
        }
        let outcome = fit_to_target(&run_cfg, &target)?;
        let speed = inference_speed(&outcome.model, &target)?;
        rows.push(AblationRow {
            value: value.clone(),
            params: outcome.report.params,
            psnr: outcome.report.psnr.unwrap_or(f64::NAN),
            ssim: outcome.report.ssim,
            speed_img_per_s: speed,
        });
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(cfg.out_dir.join("ablation.csv"))?);
    writeln!(w, "kind,value,params,psnr,ssim,speed_img_per_s")?;
    let kind_name = match kind {
        AblationKind::RankSweep => "rank",
        AblationKind::KSweep => "k",
        AblationKind::BasisSweep => "basis",
        AblationKind::LrSweep => "lr",
    };
    for r in &rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            kind_name,
            r.value,
            r.params,
            r.psnr,
            r.ssim.map(|s| s.to_string()).unwrap_or_default(),
            r.speed_img_per_s
        )?;
    }
    Ok(rows)
}

/// Median full-grid render rate over three repetitions, in images/second.
fn inference_speed(model: &FutonModel, target: &GridSignal) -> Result<f64> {
    let axes = target.midpoint_axes();
    let mut times = Vec::with_capacity(3);
    for _ in 0..3 {
        let t0 = std::time::Instant::now();
        let _ = model.forward_grid(&axes)?;
        times.push(t0.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(1.0 / times[1].max(1e-12))
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleCompareReport {
    pub k: usize,
    pub construction_rank: usize,
    pub futon_mse: f64,
    pub oracle_mse: f64,
    pub ratio: f64,
}

/// Train at the constructive full rank and compare against the quadrature
/// projection oracle on the same grid. Least squares on the grid should
/// match or beat the L2 projection, so the ratio hovers at or below one.
pub fn run_oracle_compare(cfg: &RunConfig, oracle_k: Option<usize>) -> Result<OracleCompareReport> {
    let k = cfg.k;
    if k > 16 {
        return Err(Error::resolution(format!(
            "oracle comparison capped at K <= 16, got {k}"
        )));
    }
    if let Some(ok) = oracle_k {
        if ok != k {
            return Err(Error::config(format!(
                "model K={k} does not match oracle K={ok}"
            )));
        }
    }
    ensure_out_dir(cfg)?;
    let target = load_input_image(cfg)?;
    let d = target.channels();
    let target_sym = target.remap(ValueRange::SYMMETRIC);

    // Full construction rank for C=2: K * min(K, D).
    let construction_rank = k * k.min(d);
    let mut run_cfg = cfg.clone();
    run_cfg.rank = construction_rank;
    run_cfg.activation = Activation::None; // compare linear series to linear series
    let mut model = init_model(&run_cfg, 2, d)?;
    let mut opts = TrainOptions {
        eval_every: 0,
        eval: None,
    };
    let curve = train_mse(&mut model, &target_sym, &cfg.train, &mut opts)?;

    let futon_pred = model.forward_grid(&target.midpoint_axes())?;
    let futon_mse = mse(&futon_pred, &target_sym)?;

    let basis = BasisSpec::new(cfg.basis, k)?;
    let w = project_gfs(&target_sym, &basis)?;
    let mut oracle_pred = GridSignal::zeros(
        target.dims().to_vec(),
        d,
        ValueRange::SYMMETRIC,
    )?;
    let axes = target.midpoint_axes();
    let mut idx = vec![0usize; 2];
    for node in 0..oracle_pred.node_count() {
        oracle_pred.node_indices(node, &mut idx);
        let x = [axes[0][idx[0]], axes[1][idx[1]]];
        let vals = eval_gfs(&w, &basis, &x)?;
        oracle_pred.node_mut(node).copy_from_slice(&vals);
    }
    let oracle_mse = mse(&oracle_pred, &target_sym)?;

    let report = OracleCompareReport {
        k,
        construction_rank,
        futon_mse,
        oracle_mse,
        ratio: futon_mse / oracle_mse.max(f64::MIN_POSITIVE),
    };
    emit_common(cfg, &model, &curve)?;
    write_metrics(&cfg.out_dir, &report)?;
    Ok(report)
}

//! Pipeline-level behavior: degenerate-parameter equivalences, reference
//! oracles, determinism, and the CLI contract (artifacts and exit codes).

use std::path::{Path, PathBuf};
use std::process::Command;

use futon::basis::BasisKind;
use futon::grid::{axis_midpoints, GridSignal, ValueRange};
use futon::metrics::psnr;
use futon::model::{Activation, FutonModel};
use futon::operators::sensor_noise;

use futon_cli::config::{RunConfig, TaskKind};
use futon_cli::imageio;
use futon_cli::pipelines::{
    bilinear_upsample, run_ablation, run_ct, run_denoise, run_fit, run_oracle_compare,
    run_superres, AblationKind,
};
use futon_cli::synthetic;

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("futon-pipe-{tag}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn small_cfg(task: TaskKind, out: &Path) -> RunConfig {
    let mut cfg = RunConfig::preset(task);
    cfg.out_dir = out.to_path_buf();
    cfg.k = 8;
    cfg.rank = 8;
    cfg.train.epochs = 300;
    cfg.train.lr0 = 1e-2;
    cfg.train.seed = 7;
    cfg.eval_every = 0;
    cfg
}

/// curve.csv with the wall-clock column masked out; the rest must be
/// bitwise reproducible.
fn curve_without_wall(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines()
        .map(|line| {
            let mut cols: Vec<&str> = line.split(',').collect();
            if cols.len() > 1 {
                cols[1] = "-";
            }
            cols.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn fit_constant_image_hits_sixty_db_fast() {
    let dir = temp_dir("fit-const");
    let gray = GridSignal::from_data(vec![32, 32], 1, ValueRange::UNIT, vec![0.5; 1024]).unwrap();
    imageio::save_png16(&gray, &dir.join("gray.png")).unwrap();
    let mut cfg = small_cfg(TaskKind::FitImage, &dir.join("out"));
    cfg.input = Some(dir.join("gray.png"));
    cfg.k = 4;
    cfg.rank = 4;
    cfg.train.epochs = 200;
    cfg.train.lr0 = 1e-1;
    let report = run_fit(&cfg).unwrap();
    assert!(
        report.psnr.unwrap() > 60.0,
        "constant fit reached only {:?} dB",
        report.psnr
    );
}

#[test]
fn fit_volume_reports_iou() {
    let dir = temp_dir("fit-vol");
    let mut cfg = small_cfg(TaskKind::FitVolume, &dir.join("out"));
    cfg.phantom_size = Some(12);
    cfg.k = 6;
    cfg.rank = 6;
    cfg.train.epochs = 400;
    let report = run_fit(&cfg).unwrap();
    let iou = report.iou.expect("volume runs report IoU");
    assert!(iou > 0.9, "occupancy IoU {iou}");
    assert!(dir.join("out/recon.raw").exists());
    assert!(dir.join("out/recon.json").exists());
}

#[test]
fn superres_with_factor_one_matches_fit() {
    let dir = temp_dir("sr-degenerate");
    let card = synthetic::test_card(32).unwrap();
    imageio::save_png16(&card, &dir.join("card.png")).unwrap();

    let mut sr = small_cfg(TaskKind::Superres, &dir.join("sr"));
    sr.input = Some(dir.join("card.png"));
    sr.factor = 1;
    let sr_report = run_superres(&sr).unwrap();

    let mut fit = small_cfg(TaskKind::FitImage, &dir.join("fit"));
    fit.input = Some(dir.join("card.png"));
    let fit_report = run_fit(&fit).unwrap();

    let delta = (sr_report.psnr - fit_report.psnr.unwrap()).abs();
    assert!(delta < 0.1, "factor=1 superres deviates from fit by {delta} dB");
    // identical training trajectories, not just similar metrics
    assert_eq!(
        curve_without_wall(&dir.join("sr/curve.csv")),
        curve_without_wall(&dir.join("fit/curve.csv"))
    );
}

/// Aliasing-free construction: a band-limited target below the low-res
/// Nyquist is recovered far beyond the bilinear baseline.
#[test]
fn superres_recovers_bandlimited_target() {
    let dir = temp_dir("sr-bandlimited");
    // K=2 linear-head generator: spectrum at k in {0,1} per axis only
    let generator =
        FutonModel::init(2, 2, 2, 1, BasisKind::Cosine, Activation::None, 31).unwrap();
    let axes = vec![axis_midpoints(64), axis_midpoints(64)];
    let rendered = generator.forward_grid(&axes).unwrap();
    // squash into (0.1, 0.9) with an affine map so the PNG stays in range
    let max = rendered.data().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let mut unit = rendered.clone();
    for v in unit.data_mut() {
        *v = 0.5 + 0.4 * *v / max;
    }
    let mut unit = GridSignal::from_data(vec![64, 64], 1, ValueRange::UNIT, unit.data().to_vec())
        .unwrap();
    unit.set_range(ValueRange::UNIT);
    imageio::save_png16(&unit, &dir.join("band.png")).unwrap();

    let mut cfg = small_cfg(TaskKind::Superres, &dir.join("out"));
    cfg.input = Some(dir.join("band.png"));
    cfg.factor = 4;
    cfg.activation = Activation::None;
    cfg.train.epochs = 1200;
    cfg.train.batch_fraction = 1.0;
    cfg.train.lr0 = 3e-2;
    let report = run_superres(&cfg).unwrap();
    assert!(
        report.psnr > 40.0,
        "band-limited super-resolution reached only {} dB",
        report.psnr
    );
}

#[test]
fn bilinear_baseline_on_constant_is_exact() {
    let flat = GridSignal::from_data(vec![8, 8], 1, ValueRange::UNIT, vec![0.3; 64]).unwrap();
    let up = bilinear_upsample(&flat, 4).unwrap();
    assert_eq!(up.dims(), &[32, 32]);
    let target = GridSignal::from_data(vec![32, 32], 1, ValueRange::UNIT, vec![0.3; 1024]).unwrap();
    assert!(psnr(&up, &target, 1.0).unwrap().is_infinite());
}

#[test]
fn denoise_with_zero_tv_matches_fit_on_noisy_input() {
    let dir = temp_dir("dn-degenerate");
    let clean = synthetic::test_card(32).unwrap();
    let noisy = sensor_noise(&clean, 50.0, 1.0, 13).unwrap().signal;
    imageio::save_png16(&noisy, &dir.join("noisy.png")).unwrap();

    let mut dn = small_cfg(TaskKind::Denoise, &dir.join("dn"));
    dn.input = Some(dir.join("noisy.png"));
    dn.input_is_degraded = true;
    dn.train.tv_lambda = 0.0;
    run_denoise(&dn).unwrap();

    let mut fit = small_cfg(TaskKind::FitImage, &dir.join("fit"));
    fit.input = Some(dir.join("noisy.png"));
    run_fit(&fit).unwrap();

    assert_eq!(
        curve_without_wall(&dir.join("dn/curve.csv")),
        curve_without_wall(&dir.join("fit/curve.csv"))
    );
}

/// Sweep oracle: on a piecewise-constant target with sensor noise, some
/// positive TV weight does at least as well as none.
#[test]
fn tv_weight_sweep_helps_on_piecewise_constant_target() {
    let dir = temp_dir("dn-sweep");
    // blocky target: two flat regions and a disc
    let n = 48;
    let mut img = GridSignal::zeros(vec![n, n], 1, ValueRange::UNIT).unwrap();
    let axis = axis_midpoints(n);
    for (i, &y) in axis.iter().enumerate() {
        for (j, &x) in axis.iter().enumerate() {
            let mut v = if x < 0.5 { 0.25 } else { 0.7 };
            if ((x - 0.5).powi(2) + (y - 0.35).powi(2)).sqrt() < 0.18 {
                v = 0.9;
            }
            img.set_value(&[i, j], 0, v);
        }
    }
    imageio::save_png16(&img, &dir.join("blocks.png")).unwrap();

    let mut best_positive = f64::NEG_INFINITY;
    let mut at_zero = f64::NEG_INFINITY;
    for (tag, lambda) in [("l0", 0.0), ("l7", 1e-7), ("l5", 1e-5)] {
        let mut cfg = small_cfg(TaskKind::Denoise, &dir.join(tag));
        cfg.input = Some(dir.join("blocks.png"));
        cfg.k = 16;
        cfg.rank = 16;
        cfg.tau = 50.0;
        cfg.sigma = 1.0;
        cfg.noise_seed = 5;
        cfg.train.tv_lambda = lambda;
        cfg.train.epochs = 500;
        let report = run_denoise(&cfg).unwrap();
        let p = report.denoised_psnr.unwrap();
        if lambda == 0.0 {
            at_zero = p;
        } else {
            best_positive = best_positive.max(p);
        }
    }
    assert!(
        best_positive >= at_zero - 1e-9,
        "tv never helped: best positive {best_positive} vs zero {at_zero}"
    );
}

#[test]
fn noisy_observation_is_reproducible_bitwise() {
    let clean = synthetic::test_card(32).unwrap();
    let a = sensor_noise(&clean, 50.0, 1.0, 42).unwrap().signal;
    let b = sensor_noise(&clean, 50.0, 1.0, 42).unwrap().signal;
    assert!(a
        .data()
        .iter()
        .zip(b.data())
        .all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn ct_trivial_cases() {
    // constant-zero ground truth: the model collapses to ~0 everywhere
    let dir = temp_dir("ct-zero");
    let zero = GridSignal::from_data(vec![16, 16], 1, ValueRange::UNIT, vec![0.0; 256]).unwrap();
    imageio::save_png16(&zero, &dir.join("zero.png")).unwrap();
    let mut cfg = small_cfg(TaskKind::Ct, &dir.join("out"));
    cfg.input = Some(dir.join("zero.png"));
    cfg.angles = 12;
    cfg.activation = Activation::None;
    cfg.train.epochs = 300;
    cfg.train.lr0 = 3e-2;
    cfg.train.weight_decay_lambda = 0.0;
    let report = run_ct(&cfg).unwrap();
    assert!(report.image_psnr.unwrap() > 40.0);

    // single-angle run is ill-posed but completes with a decreasing trend
    let mut cfg = small_cfg(TaskKind::Ct, &dir.join("one-angle"));
    cfg.input = Some(dir.join("zero.png"));
    cfg.phantom_size = None;
    cfg.angles = 1;
    cfg.activation = Activation::None;
    cfg.train.epochs = 200;
    let report = run_ct(&cfg).unwrap();
    assert!(report.final_residual <= report.initial_residual);
}

#[test]
fn ablation_single_value_matches_direct_run() {
    let dir = temp_dir("abl-single");
    let card = synthetic::test_card(32).unwrap();
    imageio::save_png16(&card, &dir.join("card.png")).unwrap();

    let mut base = small_cfg(TaskKind::FitImage, &dir.join("abl"));
    base.input = Some(dir.join("card.png"));
    let rows = run_ablation(&base, AblationKind::RankSweep, &["8".to_string()]).unwrap();

    let mut direct = small_cfg(TaskKind::FitImage, &dir.join("direct"));
    direct.input = Some(dir.join("card.png"));
    direct.rank = 8;
    let report = run_fit(&direct).unwrap();

    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].params, report.params);
    assert_eq!(rows[0].psnr.to_bits(), report.psnr.unwrap().to_bits());
}

#[test]
fn lr_sweep_covers_the_search_grid() {
    let dir = temp_dir("abl-lr");
    let mut base = small_cfg(TaskKind::FitImage, &dir.join("out"));
    base.phantom_size = Some(32);
    base.train.epochs = 120;
    let rows = run_ablation(
        &base,
        AblationKind::LrSweep,
        &["1e-3".into(), "1e-2".into()],
    )
    .unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.psnr.is_finite()));
}

#[test]
fn basis_sweep_rows_share_parameter_count() {
    let dir = temp_dir("abl-basis");
    let mut base = small_cfg(TaskKind::FitImage, &dir.join("out"));
    base.phantom_size = Some(32);
    base.train.epochs = 120;
    let rows = run_ablation(
        &base,
        AblationKind::BasisSweep,
        &["cosine".into(), "legendre".into(), "chebyshev".into()],
    )
    .unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.windows(2).all(|w| w[0].params == w[1].params));
    assert!(dir.join("out/ablation.csv").exists());
}

#[test]
fn oracle_compare_in_span_target_is_exact_for_both() {
    let dir = temp_dir("oracle-span");
    // target inside the K=4 truncation span (linear head, K=4 generator)
    let generator =
        FutonModel::init(2, 4, 3, 1, BasisKind::Cosine, Activation::None, 17).unwrap();
    let axes = vec![axis_midpoints(32), axis_midpoints(32)];
    let rendered = generator.forward_grid(&axes).unwrap();
    let max = rendered.data().iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let mut unit = rendered.clone();
    for v in unit.data_mut() {
        *v = 0.5 + 0.45 * *v / max;
    }
    let unit =
        GridSignal::from_data(vec![32, 32], 1, ValueRange::UNIT, unit.data().to_vec()).unwrap();
    imageio::save_png16(&unit, &dir.join("span.png")).unwrap();

    let mut cfg = small_cfg(TaskKind::FitImage, &dir.join("out"));
    cfg.input = Some(dir.join("span.png"));
    cfg.k = 4;
    cfg.train.epochs = 3000;
    cfg.train.batch_fraction = 1.0;
    cfg.train.lr0 = 5e-2;
    let report = run_oracle_compare(&cfg, None).unwrap();
    assert!(report.futon_mse < 1e-6, "model mse {}", report.futon_mse);
    assert!(report.oracle_mse < 1e-6, "oracle mse {}", report.oracle_mse);
}

/// Least squares on the grid matches or beats the quadrature projection on
/// a generic smooth target (within the 10% slack).
#[test]
fn oracle_compare_on_generic_target_stays_within_ten_percent() {
    let dir = temp_dir("oracle-generic");
    let mut cfg = small_cfg(TaskKind::FitImage, &dir.join("out"));
    cfg.phantom_size = Some(48);
    cfg.train.epochs = 1500;
    cfg.train.batch_fraction = 1.0;
    cfg.train.lr0 = 3e-2;
    let report = run_oracle_compare(&cfg, None).unwrap();
    assert!(
        report.futon_mse <= 1.1 * report.oracle_mse,
        "model mse {} vs oracle {}",
        report.futon_mse,
        report.oracle_mse
    );
}

#[test]
fn fit_reruns_emit_identical_curves() {
    let dir = temp_dir("fit-rerun");
    let run = |out: &Path| {
        let mut cfg = small_cfg(TaskKind::FitImage, out);
        cfg.phantom_size = Some(32);
        cfg.train.epochs = 150;
        run_fit(&cfg).unwrap();
    };
    run(&dir.join("a"));
    run(&dir.join("b"));
    assert_eq!(
        curve_without_wall(&dir.join("a/curve.csv")),
        curve_without_wall(&dir.join("b/curve.csv"))
    );
    assert_eq!(
        std::fs::read(dir.join("a/checkpoint.bin")).unwrap(),
        std::fs::read(dir.join("b/checkpoint.bin")).unwrap()
    );
}

#[test]
fn oracle_compare_rejects_mismatched_truncation() {
    let dir = temp_dir("oracle-mismatch");
    let mut cfg = small_cfg(TaskKind::FitImage, &dir.join("out"));
    cfg.phantom_size = Some(32);
    let err = run_oracle_compare(&cfg, Some(12)).unwrap_err();
    assert!(matches!(err, futon::error::Error::Config(_)));

    // guardrail: K beyond the oracle cap is a resolution error
    cfg.k = 32;
    let err = run_oracle_compare(&cfg, None).unwrap_err();
    assert!(matches!(err, futon::error::Error::Resolution(_)));
}

// ---- CLI binary contract ------------------------------------------------

fn futon_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_futon"))
}

#[test]
fn cli_exit_codes_follow_the_contract() {
    let dir = temp_dir("cli-codes");

    // config error: unknown basis
    let out = futon_bin()
        .args([
            "fit-image",
            "--phantom-size",
            "16",
            "--basis",
            "wavelet",
            "--out",
        ])
        .arg(dir.join("a"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    // config error: no input at all
    let out = futon_bin()
        .args(["fit-image", "--out"])
        .arg(dir.join("b"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // i/o error: missing input file
    let out = futon_bin()
        .args(["fit-image", "--input", "/nonexistent/img.png", "--out"])
        .arg(dir.join("c"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));

    // success
    let out = futon_bin()
        .args([
            "fit-image",
            "--phantom-size",
            "16",
            "--k",
            "4",
            "--rank",
            "4",
            "--epochs",
            "50",
            "--out",
        ])
        .arg(dir.join("d"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    for artifact in [
        "checkpoint.bin",
        "curve.csv",
        "metrics.json",
        "recon.png",
        "resolved_config.json",
    ] {
        assert!(dir.join("d").join(artifact).exists(), "missing {artifact}");
    }
}

#[test]
fn cli_config_file_layers_under_flags() {
    let dir = temp_dir("cli-config");
    std::fs::write(
        dir.join("cfg.json"),
        r#"{"k": 6, "rank": 5, "epochs": 40, "phantom_size": 16}"#,
    )
    .unwrap();
    let out = futon_bin()
        .args(["fit-image", "--config"])
        .arg(dir.join("cfg.json"))
        .args(["--rank", "7", "--out"])
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let resolved: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.join("out/resolved_config.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(resolved["k"], 6); // from file
    assert_eq!(resolved["rank"], 7); // flag overrides file
    assert_eq!(resolved["train"]["epochs"], 40);

    // unknown config fields are config errors, not silent typos
    std::fs::write(dir.join("bad.json"), r#"{"krank": 6}"#).unwrap();
    let out = futon_bin()
        .args(["fit-image", "--config"])
        .arg(dir.join("bad.json"))
        .args(["--phantom-size", "16", "--out"])
        .arg(dir.join("out2"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use futon::error::Error;
use futon_cli::config::{resolve, PartialConfig, TaskKind};
use futon_cli::pipelines;

/// Fit coordinate-based low-rank Fourier-series models to images and
/// volumes, and solve super-resolution, denoising, and sparse-view CT with
/// them.
#[derive(Parser)]
#[command(name = "futon", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct CommonArgs {
    /// JSON config file; CLI flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for all run artifacts
    #[arg(long)]
    out: Option<PathBuf>,
    /// Input file (PNG image, raw volume, or .sino sinogram)
    #[arg(long)]
    input: Option<PathBuf>,
    /// Edge length of the synthetic input used when --input is absent
    #[arg(long)]
    phantom_size: Option<usize>,
    /// RNG seed for init, batching, and synthetic noise
    #[arg(long)]
    seed: Option<u64>,
    /// Basis functions per input dimension
    #[arg(long)]
    k: Option<usize>,
    /// CP rank of the coefficient tensor
    #[arg(long)]
    rank: Option<usize>,
    /// Basis family: cosine | legendre | chebyshev
    #[arg(long)]
    basis: Option<String>,
    /// Output activation: none | tanh
    #[arg(long)]
    activation: Option<String>,
    /// Training steps (one sampled batch per step)
    #[arg(long)]
    epochs: Option<usize>,
    /// Initial learning rate (cosine-annealed)
    #[arg(long)]
    lr: Option<f64>,
    /// Final learning rate as a fraction of the initial one
    #[arg(long)]
    lr_final_ratio: Option<f64>,
    /// Fraction of grid coordinates per batch
    #[arg(long)]
    batch_fraction: Option<f64>,
    /// Total-variation regularization weight
    #[arg(long)]
    tv_lambda: Option<f64>,
    /// L2 weight-decay coefficient
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Steps between PSNR evaluations in curve.csv (0 disables)
    #[arg(long)]
    eval_every: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a 2-D image from its pixel grid
    FitImage(CommonArgs),
    /// Fit a 3-D occupancy volume from its voxel grid
    FitVolume(CommonArgs),
    /// Train on a downsampled image, evaluate at the original resolution
    Superres {
        #[command(flatten)]
        common: CommonArgs,
        /// Downsampling factor between ground truth and observation
        #[arg(long)]
        factor: Option<usize>,
    },
    /// Denoise a sensor-corrupted image with TV-regularized fitting
    Denoise {
        #[command(flatten)]
        common: CommonArgs,
        /// Photon-noise mean count
        #[arg(long)]
        tau: Option<f64>,
        /// Readout-noise standard deviation (count space)
        #[arg(long)]
        sigma: Option<f64>,
        /// Seed for the synthetic sensor noise
        #[arg(long)]
        noise_seed: Option<u64>,
        /// Treat the input as already noisy (skip noise synthesis)
        #[arg(long)]
        noisy: bool,
    },
    /// Reconstruct a 2-D slice from Radon projections
    Ct {
        #[command(flatten)]
        common: CommonArgs,
        /// Number of projection angles, uniform over 180 degrees
        #[arg(long)]
        angles: Option<usize>,
        /// Detector count (defaults to the image side)
        #[arg(long)]
        detectors: Option<usize>,
    },
    /// Sweep rank, K, basis family, or learning rate and tabulate quality/speed
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
        /// What to sweep: rank | k | basis | lr
        #[arg(long)]
        kind: String,
        /// Comma-separated sweep values
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
    /// Train at the constructive full rank and compare against the
    /// brute-force series projection
    OracleCompare {
        #[command(flatten)]
        common: CommonArgs,
        /// Truncation the oracle projects onto (must equal --k)
        #[arg(long)]
        oracle_k: Option<usize>,
    },
}

fn partial_from_common(common: &CommonArgs) -> Result<PartialConfig, Error> {
    let mut p = PartialConfig {
        input: common.input.clone(),
        out_dir: common.out.clone(),
        k: common.k,
        rank: common.rank,
        seed: common.seed,
        epochs: common.epochs,
        lr: common.lr,
        lr_final_ratio: common.lr_final_ratio,
        batch_fraction: common.batch_fraction,
        tv_lambda: common.tv_lambda,
        weight_decay: common.weight_decay,
        eval_every: common.eval_every,
        phantom_size: common.phantom_size,
        ..PartialConfig::default()
    };
    if let Some(basis) = &common.basis {
        p.basis = Some(basis.parse()?);
    }
    if let Some(act) = &common.activation {
        p.activation = Some(match act.to_ascii_lowercase().as_str() {
            "none" => futon::model::Activation::None,
            "tanh" => futon::model::Activation::Tanh,
            other => return Err(Error::config(format!("unknown activation '{other}'"))),
        });
    }
    Ok(p)
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::FitImage(common) => {
            let cfg = resolve(
                TaskKind::FitImage,
                common.config.as_deref(),
                &partial_from_common(&common)?,
            )?;
            let report = pipelines::run_fit(&cfg)?;
            println!(
                "fit-image: {} params, psnr {:.2} dB",
                report.params,
                report.psnr.unwrap_or(f64::NAN)
            );
        }
        Command::FitVolume(common) => {
            let cfg = resolve(
                TaskKind::FitVolume,
                common.config.as_deref(),
                &partial_from_common(&common)?,
            )?;
            let report = pipelines::run_fit(&cfg)?;
            println!(
                "fit-volume: {} params, iou {:.4}",
                report.params,
                report.iou.unwrap_or(f64::NAN)
            );
        }
        Command::Superres { common, factor } => {
            let mut partial = partial_from_common(&common)?;
            partial.factor = factor;
            let cfg = resolve(TaskKind::Superres, common.config.as_deref(), &partial)?;
            let report = pipelines::run_superres(&cfg)?;
            println!(
                "superres x{}: psnr {:.2} dB (bilinear {:.2} dB)",
                report.factor, report.psnr, report.bilinear_psnr
            );
        }
        Command::Denoise {
            common,
            tau,
            sigma,
            noise_seed,
            noisy,
        } => {
            let mut partial = partial_from_common(&common)?;
            partial.tau = tau;
            partial.sigma = sigma;
            partial.noise_seed = noise_seed;
            if noisy {
                partial.input_is_degraded = Some(true);
            }
            let cfg = resolve(TaskKind::Denoise, common.config.as_deref(), &partial)?;
            let report = pipelines::run_denoise(&cfg)?;
            println!(
                "denoise: noisy {:.2} dB -> {:.2} dB",
                report.noisy_psnr.unwrap_or(f64::NAN),
                report.denoised_psnr.unwrap_or(f64::NAN)
            );
        }
        Command::Ct {
            common,
            angles,
            detectors,
        } => {
            let mut partial = partial_from_common(&common)?;
            partial.angles = angles;
            partial.detectors = detectors;
            let cfg = resolve(TaskKind::Ct, common.config.as_deref(), &partial)?;
            let report = pipelines::run_ct(&cfg)?;
            println!(
                "ct: {} angles, psnr {:.2} dB, residual {:.3e}",
                report.angles,
                report.image_psnr.unwrap_or(f64::NAN),
                report.final_residual
            );
        }
        Command::Ablate {
            common,
            kind,
            values,
        } => {
            let cfg = resolve(
                TaskKind::FitImage,
                common.config.as_deref(),
                &partial_from_common(&common)?,
            )?;
            let kind: pipelines::AblationKind = kind.parse()?;
            let rows = pipelines::run_ablation(&cfg, kind, &values)?;
            for row in rows {
                println!(
                    "ablate {}: {} params, psnr {:.2} dB, {:.2} img/s",
                    row.value, row.params, row.psnr, row.speed_img_per_s
                );
            }
        }
        Command::OracleCompare { common, oracle_k } => {
            let cfg = resolve(
                TaskKind::FitImage,
                common.config.as_deref(),
                &partial_from_common(&common)?,
            )?;
            let report = pipelines::run_oracle_compare(&cfg, oracle_k)?;
            println!(
                "oracle-compare K={}: model mse {:.3e}, projection mse {:.3e} (ratio {:.3})",
                report.k, report.futon_mse, report.oracle_mse, report.ratio
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) | Error::Json(_) => ExitCode::from(2),
                Error::Io(_) => ExitCode::from(3),
                _ => ExitCode::FAILURE,
            }
        }
    }
}

//! Degradation and measurement operators for the inverse-problem pipelines.
//!
//! The Radon transform marches rays through the unit square centered at the
//! rotation center, sampling the bilinearly interpolated image at half-pixel
//! steps; detectors span the image diagonal. The adjoint re-marches the same
//! rays and scatters with identical interpolation weights, so the operator
//! pair is an exact transpose by construction; the sinogram-domain
//! training gradient depends on that identity.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSignal, ValueRange};
use crate::par::{self, Exec};

/// Crop performed by [`downsample`] when extents are not divisible.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CropWarning {
    pub original: [usize; 2],
    pub cropped: [usize; 2],
}

/// Box-average downsampling by an integer factor per axis. Non-divisible
/// extents are cropped to the largest divisible region, reported in the
/// returned warning.
pub fn downsample(
    image: &GridSignal,
    factor: usize,
) -> Result<(GridSignal, Option<CropWarning>)> {
    if factor == 0 {
        return Err(Error::domain("downsample factor must be >= 1"));
    }
    if image.dims().len() != 2 {
        return Err(Error::shape("downsample expects a 2-D image"));
    }
    let (rows, cols) = (image.dims()[0], image.dims()[1]);
    let (out_rows, out_cols) = (rows / factor, cols / factor);
    if out_rows == 0 || out_cols == 0 {
        return Err(Error::shape(format!(
            "image {rows}x{cols} too small for factor {factor}"
        )));
    }
    let warning = if rows % factor != 0 || cols % factor != 0 {
        Some(CropWarning {
            original: [rows, cols],
            cropped: [out_rows * factor, out_cols * factor],
        })
    } else {
        None
    };
    let ch = image.channels();
    let mut out = GridSignal::zeros(vec![out_rows, out_cols], ch, image.range())?;
    let norm = 1.0 / (factor * factor) as f64;
    for i in 0..out_rows {
        for j in 0..out_cols {
            for c in 0..ch {
                let mut acc = 0.0;
                for di in 0..factor {
                    for dj in 0..factor {
                        acc += image.value(&[i * factor + di, j * factor + dj], c);
                    }
                }
                out.set_value(&[i, j], c, acc * norm);
            }
        }
    }
    Ok((out, warning))
}

/// Result of [`sensor_noise`]; `clamped` counts input values that had to be
/// clamped into `[0,1]` before noising.
#[derive(Clone, Debug)]
pub struct NoisyImage {
    pub signal: GridSignal,
    pub clamped: usize,
}

/// Photon + readout sensor model: per value, draw
/// `Poisson(tau * clean) + Normal(0, sigma^2)` in count space and divide by
/// `tau`. Deterministic for a fixed seed.
pub fn sensor_noise(
    image: &GridSignal,
    photon_mean: f64,
    readout_sigma: f64,
    seed: u64,
) -> Result<NoisyImage> {
    if photon_mean <= 0.0 {
        return Err(Error::domain("photon mean tau must be positive"));
    }
    if readout_sigma < 0.0 {
        return Err(Error::domain("readout sigma must be non-negative"));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let readout = if readout_sigma > 0.0 {
        Some(Normal::new(0.0, readout_sigma).map_err(|e| Error::domain(e.to_string()))?)
    } else {
        None
    };
    let mut out = image.clone();
    out.set_range(ValueRange::UNIT);
    let mut clamped = 0usize;
    for v in out.data_mut() {
        let clean = if (0.0..=1.0).contains(v) {
            *v
        } else {
            clamped += 1;
            v.clamp(0.0, 1.0)
        };
        let mut counts = if clean > 0.0 {
            Poisson::new(photon_mean * clean)
                .map_err(|e| Error::domain(e.to_string()))?
                .sample(&mut rng)
        } else {
            0.0
        };
        if let Some(n) = &readout {
            counts += n.sample(&mut rng);
        }
        *v = counts / photon_mean;
    }
    Ok(NoisyImage {
        signal: out,
        clamped,
    })
}

/// Discrete Radon measurements: one row per angle, one column per detector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sinogram {
    /// `angles.len() x n_detectors`, row-major.
    pub data: Vec<f64>,
    /// Projection angles in radians, strictly increasing within `[0, pi)`.
    pub angles: Vec<f64>,
    pub n_detectors: usize,
    /// Offset between adjacent detector centers (the diagonal of the unit
    /// square divided by the detector count).
    pub detector_spacing: f64,
}

impl Sinogram {
    pub fn zeros(angles: Vec<f64>, n_detectors: usize) -> Result<Self> {
        if angles.is_empty() {
            return Err(Error::domain("at least one projection angle required"));
        }
        if n_detectors == 0 {
            return Err(Error::domain("n_detectors must be >= 1"));
        }
        if angles
            .iter()
            .any(|&a| !(0.0..std::f64::consts::PI).contains(&a))
        {
            return Err(Error::domain("angles must lie in [0, pi)"));
        }
        if angles.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("angles must be strictly increasing"));
        }
        Ok(Sinogram {
            data: vec![0.0; angles.len() * n_detectors],
            detector_spacing: std::f64::consts::SQRT_2 / n_detectors as f64,
            angles,
            n_detectors,
        })
    }

    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn row(&self, angle_idx: usize) -> &[f64] {
        &self.data[angle_idx * self.n_detectors..(angle_idx + 1) * self.n_detectors]
    }

    /// Sum of squared entries: the sinogram-domain residual norm used by
    /// the tomography loss.
    pub fn sq_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    /// CSV rows: `angle, v_0, v_1, ..., v_{n_detectors-1}`.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        for (a, row) in self.angles.iter().zip(self.data.chunks(self.n_detectors)) {
            write!(w, "{a}")?;
            for v in row {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Flat binary with a JSON header: `u64` header length, the header
    /// (angles, detector count, spacing), then `f64` little-endian data.
    pub fn save_binary(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Header<'a> {
            angles: &'a [f64],
            n_detectors: usize,
            detector_spacing: f64,
        }
        let header = serde_json::to_vec(&Header {
            angles: &self.angles,
            n_detectors: self.n_detectors,
            detector_spacing: self.detector_spacing,
        })?;
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load_binary(path: &Path) -> Result<Sinogram> {
        #[derive(Deserialize)]
        struct Header {
            angles: Vec<f64>,
            n_detectors: usize,
            detector_spacing: f64,
        }
        let mut file = std::fs::File::open(path)?;
        let mut len_buf = [0u8; 8];
        file.read_exact(&mut len_buf)?;
        let mut header_bytes = vec![0u8; u64::from_le_bytes(len_buf) as usize];
        file.read_exact(&mut header_bytes)?;
        let header: Header = serde_json::from_slice(&header_bytes)?;
        let mut sino = Sinogram::zeros(header.angles, header.n_detectors)?;
        if (header.detector_spacing - sino.detector_spacing).abs() > 1e-12 {
            return Err(Error::config("detector spacing inconsistent with count"));
        }
        let mut buf = [0u8; 8];
        for v in &mut sino.data {
            file.read_exact(&mut buf)?;
            *v = f64::from_le_bytes(buf);
        }
        Ok(sino)
    }
}

/// `n` angles uniform over 180 degrees: `i * pi / n`.
pub fn uniform_angles(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 * std::f64::consts::PI / n as f64).collect()
}

/// Ray geometry shared by the transform and its adjoint. The image occupies
/// the unit square `[-1/2, 1/2]^2`; pixel centers sit at midpoint
/// coordinates; rays march at half-pixel steps over the diagonal extent.
struct RayGeometry {
    n: usize,
    step: f64,
    n_steps: usize,
    half_diag: f64,
}

impl RayGeometry {
    fn new(n: usize) -> Self {
        let step = 0.5 / n as f64;
        let diag = std::f64::consts::SQRT_2;
        RayGeometry {
            n,
            step,
            n_steps: (diag / step).ceil() as usize,
            half_diag: diag / 2.0,
        }
    }

    /// Bilinear footprint of the continuous point `(x, y)`: up to four
    /// `(flat_pixel, weight)` pairs. `y` indexes rows, `x` columns.
    #[inline]
    fn footprint(&self, x: f64, y: f64, out: &mut [(usize, f64); 4]) -> usize {
        let n = self.n as isize;
        let u = (x + 0.5) * self.n as f64 - 0.5;
        let v = (y + 0.5) * self.n as f64 - 0.5;
        let j0 = u.floor();
        let i0 = v.floor();
        let du = u - j0;
        let dv = v - i0;
        let (i0, j0) = (i0 as isize, j0 as isize);
        let mut count = 0;
        let mut push = |i: isize, j: isize, w: f64| {
            if w != 0.0 && (0..n).contains(&i) && (0..n).contains(&j) {
                out[count] = ((i * n + j) as usize, w);
                count += 1;
            }
        };
        push(i0, j0, (1.0 - dv) * (1.0 - du));
        push(i0, j0 + 1, (1.0 - dv) * du);
        push(i0 + 1, j0, dv * (1.0 - du));
        push(i0 + 1, j0 + 1, dv * du);
        count
    }

    #[inline]
    fn detector_offset(&self, spacing: f64, j: usize) -> f64 {
        (j as f64 + 0.5) * spacing - self.half_diag
    }
}

/// Line-integral projections of a square single-channel image.
pub fn radon(image: &GridSignal, angles: &[f64], n_detectors: usize) -> Result<Sinogram> {
    radon_with_exec(image, angles, n_detectors, Exec::default())
}

pub fn radon_with_exec(
    image: &GridSignal,
    angles: &[f64],
    n_detectors: usize,
    exec: Exec,
) -> Result<Sinogram> {
    if image.dims().len() != 2 || image.dims()[0] != image.dims()[1] {
        return Err(Error::shape("radon expects a square 2-D image"));
    }
    if image.channels() != 1 {
        return Err(Error::shape("radon expects a single-channel image"));
    }
    let mut sino = Sinogram::zeros(angles.to_vec(), n_detectors)?;
    let geom = RayGeometry::new(image.dims()[0]);
    let spacing = sino.detector_spacing;
    let pixels = image.data();
    let angles = sino.angles.clone();
    par::for_each_row_block(exec, &mut sino.data, n_detectors, 1, |angle_idx, row| {
        let theta = angles[angle_idx];
        let (sin_t, cos_t) = theta.sin_cos();
        let mut fp = [(0usize, 0.0f64); 4];
        for (j, out) in row.iter_mut().enumerate() {
            let s = geom.detector_offset(spacing, j);
            let mut acc = 0.0;
            for m in 0..geom.n_steps {
                let t = -geom.half_diag + (m as f64 + 0.5) * geom.step;
                let x = s * cos_t - t * sin_t;
                let y = s * sin_t + t * cos_t;
                let count = geom.footprint(x, y, &mut fp);
                for &(pix, w) in &fp[..count] {
                    acc += w * pixels[pix];
                }
            }
            *out = acc * geom.step;
        }
    });
    Ok(sino)
}

/// Exact transpose of [`radon`]: scatters each sinogram bin back along its
/// ray with the same interpolation weights. Angle rows accumulate into
/// per-chunk buffers merged in order, so the result is deterministic.
pub fn radon_adjoint(sino: &Sinogram, image_side: usize) -> Result<GridSignal> {
    radon_adjoint_with_exec(sino, image_side, Exec::default())
}

pub fn radon_adjoint_with_exec(
    sino: &Sinogram,
    image_side: usize,
    exec: Exec,
) -> Result<GridSignal> {
    if image_side == 0 {
        return Err(Error::shape("image side must be positive"));
    }
    let expected_spacing = std::f64::consts::SQRT_2 / sino.n_detectors as f64;
    if (sino.detector_spacing - expected_spacing).abs() > 1e-12 {
        return Err(Error::shape("sinogram detector spacing inconsistent"));
    }
    let geom = RayGeometry::new(image_side);
    let n_pix = image_side * image_side;
    let accum = par::map_reduce(
        exec,
        sino.n_angles(),
        1,
        |angle_range| {
            let mut img = vec![0.0f64; n_pix];
            let mut fp = [(0usize, 0.0f64); 4];
            for angle_idx in angle_range {
                let theta = sino.angles[angle_idx];
                let (sin_t, cos_t) = theta.sin_cos();
                let row = sino.row(angle_idx);
                for (j, &val) in row.iter().enumerate() {
                    let scaled = val * geom.step;
                    if scaled == 0.0 {
                        continue;
                    }
                    let s = geom.detector_offset(sino.detector_spacing, j);
                    for m in 0..geom.n_steps {
                        let t = -geom.half_diag + (m as f64 + 0.5) * geom.step;
                        let x = s * cos_t - t * sin_t;
                        let y = s * sin_t + t * cos_t;
                        let count = geom.footprint(x, y, &mut fp);
                        for &(pix, w) in &fp[..count] {
                            img[pix] += w * scaled;
                        }
                    }
                }
            }
            img
        },
        |acc, next| {
            for (a, b) in acc.iter_mut().zip(&next) {
                *a += b;
            }
        },
    )
    .expect("at least one angle");
    GridSignal::from_data(
        vec![image_side, image_side],
        1,
        ValueRange::UNIT,
        accum,
    )
}

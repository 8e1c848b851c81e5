//! Reconstruction quality metrics: PSNR, SSIM, IoU.
//!
//! Metrics are computed on signals remapped to `[0,1]` with `peak = 1`; the
//! occupancy IoU binarizes at the midpoint of the model's `[-1,1]` output
//! range (threshold 0) unless told otherwise.

use crate::error::{Error, Result};
use crate::grid::GridSignal;

pub fn mse(a: &GridSignal, b: &GridSignal) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::shape("mse: shape mismatch"));
    }
    let n = a.data().len() as f64;
    Ok(a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / n)
}

/// `10 log10(peak^2 / MSE)` over all elements and channels; returns
/// `f64::INFINITY` when the inputs are identical.
pub fn psnr(a: &GridSignal, b: &GridSignal, peak: f64) -> Result<f64> {
    if peak <= 0.0 {
        return Err(Error::domain("peak must be positive"));
    }
    let err = mse(a, b)?;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / err).log10())
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Mean SSIM over valid 11x11 Gaussian windows (sigma 1.5), constants
/// `C1 = (0.01 peak)^2`, `C2 = (0.03 peak)^2` with `peak = 1`, computed per
/// channel and averaged. Expects 2-D signals with values in `[0,1]`.
pub fn ssim(a: &GridSignal, b: &GridSignal) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(Error::shape("ssim: shape mismatch"));
    }
    if a.dims().len() != 2 {
        return Err(Error::shape("ssim expects 2-D images"));
    }
    let (rows, cols) = (a.dims()[0], a.dims()[1]);
    if rows < SSIM_WINDOW || cols < SSIM_WINDOW {
        return Err(Error::shape(format!(
            "image {rows}x{cols} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let kernel = gaussian_kernel();
    let ch = a.channels();
    let c1 = (0.01f64).powi(2);
    let c2 = (0.03f64).powi(2);
    let mut total = 0.0;

    // Separable filtering of the five moment maps, valid region only.
    let vr = rows - SSIM_WINDOW + 1;
    let vc = cols - SSIM_WINDOW + 1;
    let mut plane_a = vec![0.0; rows * cols];
    let mut plane_b = vec![0.0; rows * cols];
    for c in 0..ch {
        for (i, (pa, pb)) in plane_a.iter_mut().zip(plane_b.iter_mut()).enumerate() {
            *pa = a.data()[i * ch + c];
            *pb = b.data()[i * ch + c];
        }
        let mu_a = filter_valid(&plane_a, rows, cols, &kernel);
        let mu_b = filter_valid(&plane_b, rows, cols, &kernel);
        let sq_a: Vec<f64> = plane_a.iter().map(|v| v * v).collect();
        let sq_b: Vec<f64> = plane_b.iter().map(|v| v * v).collect();
        let ab: Vec<f64> = plane_a.iter().zip(&plane_b).map(|(x, y)| x * y).collect();
        let mu_aa = filter_valid(&sq_a, rows, cols, &kernel);
        let mu_bb = filter_valid(&sq_b, rows, cols, &kernel);
        let mu_ab = filter_valid(&ab, rows, cols, &kernel);
        let mut acc = 0.0;
        for i in 0..vr * vc {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = mu_aa[i] - ma * ma;
            let var_b = mu_bb[i] - mb * mb;
            let cov = mu_ab[i] - ma * mb;
            acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        }
        total += acc / (vr * vc) as f64;
    }
    Ok(total / ch as f64)
}

/// Valid-region separable convolution with a symmetric 1-D kernel.
fn filter_valid(plane: &[f64], rows: usize, cols: usize, kernel: &[f64]) -> Vec<f64> {
    let w = kernel.len();
    let vc = cols - w + 1;
    let vr = rows - w + 1;
    // horizontal pass
    let mut tmp = vec![0.0; rows * vc];
    for r in 0..rows {
        let row = &plane[r * cols..(r + 1) * cols];
        for j in 0..vc {
            let mut acc = 0.0;
            for (t, kv) in kernel.iter().enumerate() {
                acc += kv * row[j + t];
            }
            tmp[r * vc + j] = acc;
        }
    }
    // vertical pass
    let mut out = vec![0.0; vr * vc];
    for i in 0..vr {
        for j in 0..vc {
            let mut acc = 0.0;
            for (t, kv) in kernel.iter().enumerate() {
                acc += kv * tmp[(i + t) * vc + j];
            }
            out[i * vc + j] = acc;
        }
    }
    out
}

/// Intersection-over-union of the sets `{value > threshold}`; defined as 1
/// when both sets are empty.
pub fn iou(pred: &GridSignal, gt: &GridSignal, threshold: f64) -> Result<f64> {
    if !pred.same_shape(gt) {
        return Err(Error::shape("iou: shape mismatch"));
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (p, g) in pred.data().iter().zip(gt.data()) {
        let (po, go) = (*p > threshold, *g > threshold);
        if po && go {
            inter += 1;
        }
        if po || go {
            union += 1;
        }
    }
    if union == 0 {
        return Ok(1.0);
    }
    Ok(inter as f64 / union as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ValueRange;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn image(rows: usize, cols: usize, data: Vec<f64>) -> GridSignal {
        GridSignal::from_data(vec![rows, cols], 1, ValueRange::UNIT, data).unwrap()
    }

    #[test]
    fn psnr_closed_forms() {
        let a = image(2, 2, vec![0.5; 4]);
        assert!(psnr(&a, &a, 1.0).unwrap().is_infinite());

        // MSE 0.01 -> 20 dB; MSE 1e-4 -> 40 dB
        let b = image(2, 2, vec![0.6, 0.4, 0.6, 0.4]);
        assert_abs_diff_eq!(psnr(&a, &b, 1.0).unwrap(), 20.0, epsilon = 1e-9);
        let c = image(2, 2, vec![0.51, 0.49, 0.51, 0.49]);
        assert_abs_diff_eq!(psnr(&a, &c, 1.0).unwrap(), 40.0, epsilon = 1e-9);

        assert_abs_diff_eq!(
            psnr(&a, &b, 1.0).unwrap(),
            psnr(&b, &a, 1.0).unwrap(),
            epsilon = 1e-12
        );
        let bad = image(2, 1, vec![0.0, 0.0]);
        assert!(psnr(&a, &bad, 1.0).is_err());
        assert!(psnr(&a, &b, 0.0).is_err());
    }

    #[test]
    fn ssim_identity_and_inversion() {
        let mut rng = StdRng::seed_from_u64(41);
        let data: Vec<f64> = (0..32 * 32).map(|_| rng.random::<f64>()).collect();
        let a = image(32, 32, data.clone());
        assert_abs_diff_eq!(ssim(&a, &a).unwrap(), 1.0, epsilon = 1e-9);

        let inverted = image(32, 32, data.iter().map(|v| 1.0 - v).collect());
        let s = ssim(&a, &inverted).unwrap();
        assert!(s < 1.0);
        assert!((-1.0..=1.0).contains(&s));
    }

    #[test]
    fn ssim_rejects_small_images() {
        let a = image(8, 8, vec![0.0; 64]);
        assert!(matches!(ssim(&a, &a), Err(Error::Shape(_))));
    }

    /// Independent oracle: direct double-loop window sums, no separable pass.
    #[test]
    fn ssim_matches_naive_reference() {
        let mut rng = StdRng::seed_from_u64(43);
        let da: Vec<f64> = (0..64 * 64).map(|_| rng.random::<f64>()).collect();
        let db: Vec<f64> = da
            .iter()
            .map(|v| (v + 0.1 * rng.random::<f64>()).clamp(0.0, 1.0))
            .collect();
        let a = image(64, 64, da.clone());
        let b = image(64, 64, db.clone());

        let kernel = gaussian_kernel();
        let (rows, cols) = (64usize, 64usize);
        let c1 = 0.01f64.powi(2);
        let c2 = 0.03f64.powi(2);
        let mut acc = 0.0;
        let mut count = 0usize;
        for i0 in 0..=rows - SSIM_WINDOW {
            for j0 in 0..=cols - SSIM_WINDOW {
                let mut ma = 0.0;
                let mut mb = 0.0;
                let mut maa = 0.0;
                let mut mbb = 0.0;
                let mut mab = 0.0;
                for di in 0..SSIM_WINDOW {
                    for dj in 0..SSIM_WINDOW {
                        let w = kernel[di] * kernel[dj];
                        let x = da[(i0 + di) * cols + j0 + dj];
                        let y = db[(i0 + di) * cols + j0 + dj];
                        ma += w * x;
                        mb += w * y;
                        maa += w * x * x;
                        mbb += w * y * y;
                        mab += w * x * y;
                    }
                }
                let (va, vb, cov) = (maa - ma * ma, mbb - mb * mb, mab - ma * mb);
                acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
        let reference = acc / count as f64;
        assert_abs_diff_eq!(ssim(&a, &b).unwrap(), reference, epsilon = 1e-6);
    }

    #[test]
    fn iou_counting_cases() {
        let ones = image(2, 2, vec![1.0; 4]);
        assert_abs_diff_eq!(iou(&ones, &ones, 0.5).unwrap(), 1.0);

        let disjoint_a = image(2, 2, vec![1.0, 1.0, 0.0, 0.0]);
        let disjoint_b = image(2, 2, vec![0.0, 0.0, 1.0, 1.0]);
        assert_abs_diff_eq!(iou(&disjoint_a, &disjoint_b, 0.5).unwrap(), 0.0);

        let half = image(2, 2, vec![1.0, 1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(iou(&ones, &half, 0.5).unwrap(), 0.5);

        let empty = image(2, 2, vec![0.0; 4]);
        assert_abs_diff_eq!(iou(&empty, &empty, 0.5).unwrap(), 1.0);
    }
}

//! Deterministic synthetic inputs: an ellipse phantom for tomography runs
//! and a textured test card standing in for a natural-image crop.

use futon::basis::BasisKind;
use futon::error::Result;
use futon::grid::{axis_midpoints, GridSignal, ValueRange};
use futon::model::{Activation, FutonModel};

/// Ellipse phantom in the Shepp-Logan tradition: a head-like outline with
/// interior structures of varying intensity. Values lie in `[0,1]`.
pub fn phantom(n: usize) -> Result<GridSignal> {
    // (cx, cy, a, b, angle_deg, additive intensity), coordinates in [-1,1]
    const ELLIPSES: [(f64, f64, f64, f64, f64, f64); 8] = [
        (0.0, 0.0, 0.72, 0.95, 0.0, 0.8),
        (0.0, -0.02, 0.66, 0.88, 0.0, -0.35),
        (0.22, 0.0, 0.11, 0.31, -18.0, -0.25),
        (-0.22, 0.0, 0.16, 0.41, 18.0, -0.25),
        (0.0, 0.35, 0.21, 0.25, 0.0, 0.22),
        (0.0, 0.1, 0.046, 0.046, 0.0, 0.25),
        (-0.08, -0.605, 0.046, 0.023, 0.0, 0.25),
        (0.06, -0.605, 0.046, 0.046, 0.0, 0.25),
    ];
    let mut img = GridSignal::zeros(vec![n, n], 1, ValueRange::UNIT)?;
    let axis = axis_midpoints(n);
    for (i, &yi) in axis.iter().enumerate() {
        let y = 1.0 - 2.0 * yi; // row 0 at the top
        for (j, &xj) in axis.iter().enumerate() {
            let x = 2.0 * xj - 1.0;
            let mut v = 0.0;
            for &(cx, cy, a, b, deg, val) in ELLIPSES.iter() {
                let t = deg.to_radians();
                let (dx, dy) = (x - cx, y - cy);
                let xr = dx * t.cos() + dy * t.sin();
                let yr = -dx * t.sin() + dy * t.cos();
                if (xr / a).powi(2) + (yr / b).powi(2) <= 1.0 {
                    v += val;
                }
            }
            img.set_value(&[i, j], 0, v.clamp(0.0, 1.0));
        }
    }
    Ok(img)
}

/// Textured single-channel test image: smooth shading, oriented waves, a
/// sharp disc and a bar: structure at several scales, nothing the model
/// class represents exactly.
pub fn test_card(n: usize) -> Result<GridSignal> {
    let mut img = GridSignal::zeros(vec![n, n], 1, ValueRange::UNIT)?;
    let axis = axis_midpoints(n);
    for (i, &y) in axis.iter().enumerate() {
        for (j, &x) in axis.iter().enumerate() {
            let mut v = 0.35 + 0.25 * x + 0.15 * y;
            v += 0.12 * (7.3 * std::f64::consts::PI * (x + 0.6 * y)).sin();
            v += 0.06 * (16.1 * std::f64::consts::PI * (y - 0.3 * x)).cos();
            let disc = ((x - 0.63).powi(2) + (y - 0.31).powi(2)).sqrt();
            if disc < 0.14 {
                v += 0.28;
            }
            if (0.15..0.22).contains(&x) && (0.2..0.85).contains(&y) {
                v -= 0.3;
            }
            img.set_value(&[i, j], 0, v.clamp(0.02, 0.98));
        }
    }
    Ok(img)
}

/// Binary occupancy volume: a solid ball with an off-center cavity.
pub fn occupancy_ball(n: usize) -> Result<GridSignal> {
    let mut vol = GridSignal::zeros(vec![n, n, n], 1, ValueRange::UNIT)?;
    let axis = axis_midpoints(n);
    for (i, &x) in axis.iter().enumerate() {
        for (j, &y) in axis.iter().enumerate() {
            for (k, &z) in axis.iter().enumerate() {
                let body = ((x - 0.5).powi(2) + (y - 0.5).powi(2) + (z - 0.5).powi(2)).sqrt();
                let cavity =
                    ((x - 0.62).powi(2) + (y - 0.55).powi(2) + (z - 0.45).powi(2)).sqrt();
                let occupied = body < 0.34 && cavity > 0.12;
                vol.set_value(&[i, j, k], 0, if occupied { 1.0 } else { 0.0 });
            }
        }
    }
    Ok(vol)
}

/// A target strictly inside the model class: render a seeded low-rank model
/// (tanh output) onto an `n x n` grid and return it in `[0,1]`.
pub fn in_class_image(n: usize, k: usize, rank: usize, channels: usize, seed: u64) -> Result<GridSignal> {
    let generator = FutonModel::init(
        2,
        k,
        rank,
        channels,
        BasisKind::Cosine,
        Activation::Tanh,
        seed,
    )?;
    let axes = vec![axis_midpoints(n), axis_midpoints(n)];
    let sym = generator.forward_grid(&axes)?;
    Ok(sym.remap(ValueRange::UNIT))
}

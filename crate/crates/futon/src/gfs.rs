//! Brute-force generalized Fourier series reference path.
//!
//! Projection computes every coefficient by midpoint quadrature against the
//! separable basis; evaluation materializes the rank-1 feature tensor and
//! contracts it against the dense coefficient tensor. Both are deliberately
//! naive (exponential in the input dimension) and share no code with the
//! factorized model, so they serve as an independent ground truth.

use crate::basis::{BasisKind, BasisSpec};
use crate::error::{Error, Result};
use crate::grid::GridSignal;
use crate::tensor::{generalized_dot, outer_product, FullCoeffTensor};

/// Hard cap on dense-tensor size: `K^C * D` entries.
const ORACLE_MAX_ENTRIES: usize = 1 << 24;

fn check_guardrail(k: usize, c: usize, d: usize) -> Result<()> {
    let mut entries = d as u128;
    for _ in 0..c {
        entries *= k as u128;
        if entries > ORACLE_MAX_ENTRIES as u128 {
            return Err(Error::resolution(format!(
                "oracle tensor K^C*D = {k}^{c}*{d} exceeds the 2^24-entry guardrail"
            )));
        }
    }
    Ok(())
}

/// Project a grid signal onto the truncated separable basis: coefficient
/// `(k_1..k_C, d)` is the midpoint-rule quadrature of the signal's channel
/// `d` against `prod_c phi_{k_c}(x_c)`, with uniform cell-volume weights.
pub fn project_gfs(signal: &GridSignal, basis: &BasisSpec) -> Result<FullCoeffTensor> {
    let c = signal.dims().len();
    let d = signal.channels();
    let k = basis.k;
    let smallest = *signal.dims().iter().min().expect("non-empty dims");
    if 2 * k > smallest {
        return Err(Error::resolution(format!(
            "K={k} too large for grid extent {smallest}; need K <= extent/2"
        )));
    }
    check_guardrail(k, c, d)?;

    let axes = signal.midpoint_axes();
    let phi: Vec<_> = axes
        .iter()
        .map(|a| basis.eval_matrix(a))
        .collect::<Result<_>>()?;
    let cell = signal.cell_volume();

    let mut shape = vec![k; c];
    shape.push(d);
    let mut w = FullCoeffTensor::zeros(shape)?;
    let k_combos: usize = k.pow(c as u32);

    let mut node_idx = vec![0usize; c];
    let mut k_idx = vec![0usize; c];
    for node in 0..signal.node_count() {
        signal.node_indices(node, &mut node_idx);
        let values = signal.node(node);
        k_idx.fill(0);
        for flat_k in 0..k_combos {
            let mut prod = cell;
            for (axis, (&ki, p)) in k_idx.iter().zip(&phi).enumerate() {
                prod *= p.get(node_idx[axis], ki);
            }
            if prod != 0.0 {
                let base = flat_k * d;
                for (ch, &v) in values.iter().enumerate() {
                    w.data_mut()[base + ch] += prod * v;
                }
            }
            // odometer over the multi-index, last axis fastest
            for slot in k_idx.iter_mut().rev() {
                *slot += 1;
                if *slot < k {
                    break;
                }
                *slot = 0;
            }
        }
    }
    Ok(w)
}

/// Evaluate the series at a point by materializing `Phi(x)` as an outer
/// product and contracting it against `w`. Cost `O(K^C * D)`.
pub fn eval_gfs(w: &FullCoeffTensor, basis: &BasisSpec, x: &[f64]) -> Result<Vec<f64>> {
    let order = w.order();
    if order < 2 {
        return Err(Error::shape("coefficient tensor must have order >= 2"));
    }
    let c = order - 1;
    if x.len() != c {
        return Err(Error::shape(format!(
            "point arity {} does not match tensor input order {c}",
            x.len()
        )));
    }
    if w.shape()[..c].iter().any(|&dim| dim != basis.k) {
        return Err(Error::shape(format!(
            "tensor input extents {:?} do not match basis K={}",
            &w.shape()[..c],
            basis.k
        )));
    }
    let per_axis: Vec<Vec<f64>> = x.iter().map(|&xc| basis.eval(xc)).collect::<Result<_>>()?;
    let views: Vec<&[f64]> = per_axis.iter().map(|v| v.as_slice()).collect();
    let phi = outer_product(&views)?;
    Ok(generalized_dot(&phi, w)?.data().to_vec())
}

/// L2 approximation error of the truncated series against the grid signal,
/// for each truncation in `k_list` (must be increasing). Errors are the
/// quadrature L2 norms of the residual, which are non-increasing in `K` by
/// projection optimality.
pub fn convergence_curve(
    signal: &GridSignal,
    kind: BasisKind,
    k_list: &[usize],
) -> Result<Vec<(usize, f64)>> {
    if k_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("k_list must be strictly increasing"));
    }
    let mut out = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let basis = BasisSpec::new(kind, k)?;
        let w = project_gfs(signal, &basis)?;
        let err = residual_l2(signal, &w, &basis)?;
        out.push((k, err));
    }
    Ok(out)
}

/// Quadrature L2 norm of `signal - series(w)` over the grid.
pub fn residual_l2(signal: &GridSignal, w: &FullCoeffTensor, basis: &BasisSpec) -> Result<f64> {
    let axes = signal.midpoint_axes();
    let cell = signal.cell_volume();
    let mut idx = vec![0usize; signal.dims().len()];
    let mut acc = 0.0;
    let mut x = vec![0.0; signal.dims().len()];
    for node in 0..signal.node_count() {
        signal.node_indices(node, &mut idx);
        for (xi, (&i, axis)) in x.iter_mut().zip(idx.iter().zip(&axes)) {
            *xi = axis[i];
        }
        let approx = eval_gfs(w, basis, &x)?;
        for (ch, &v) in signal.node(node).iter().enumerate() {
            let r = v - approx[ch];
            acc += r * r * cell;
        }
    }
    Ok(acc.sqrt())
}

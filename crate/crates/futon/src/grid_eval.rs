//! Grid-specialized evaluation and batched gradients.
//!
//! When evaluation points live on an axis-aligned grid, the per-axis basis
//! matrices `Phi_c` and projected features `H_c = Phi_c U^(c)` are shared by
//! entire grid slices. A [`GridWorkspace`] computes `Phi_c` once per grid and
//! `H_c` once per parameter update, after which each node costs `O((C+D) R)`
//! to evaluate and the batched gradient reduces to `dU^(c) = Phi_c^T M_c`
//! with per-axis accumulators `M_c`.
//!
//! Node batches are processed in fixed chunks with partials folded in chunk
//! order (see [`crate::par`]), so gradients are bitwise reproducible.

use crate::error::{Error, Result};
use crate::grid::{GridSignal, ValueRange};
use crate::mat::Mat;
use crate::model::{FutonModel, Gradients};
use crate::par::{self, Exec};
use crate::tensor::hadamard_in_place;

pub struct GridWorkspace {
    dims: Vec<usize>,
    phi: Vec<Mat>,
    h: Vec<Mat>,
}

impl GridWorkspace {
    /// Validates the axis coordinates and evaluates the per-axis basis
    /// matrices. Call [`GridWorkspace::refresh`] before evaluating.
    pub fn new(model: &FutonModel, axes: &[Vec<f64>]) -> Result<Self> {
        if axes.len() != model.input_dim() {
            return Err(Error::shape(format!(
                "expected {} coordinate axes, got {}",
                model.input_dim(),
                axes.len()
            )));
        }
        if axes.iter().any(|a| a.is_empty()) {
            return Err(Error::shape("grid axes must be non-empty"));
        }
        let mut phi = Vec::with_capacity(axes.len());
        for axis in axes {
            phi.push(model.basis().eval_matrix(axis)?);
        }
        let h = axes
            .iter()
            .map(|a| Mat::zeros(a.len(), model.rank()))
            .collect();
        Ok(GridWorkspace {
            dims: axes.iter().map(Vec::len).collect(),
            phi,
            h,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn node_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Recompute `H_c = Phi_c U^(c)` from the current parameters.
    pub fn refresh(&mut self, model: &FutonModel, exec: Exec) {
        let r = model.rank();
        for (c, h) in self.h.iter_mut().enumerate() {
            let phi = &self.phi[c];
            let factor = model.factors().input_factor(c);
            let chunk = par::chunk_len(phi.rows());
            par::for_each_row_block(exec, h.data_mut(), r, chunk, |start, slab| {
                for (i, row) in slab.chunks_mut(r).enumerate() {
                    factor.transpose_vec_mul(phi.row(start + i), row);
                }
            });
        }
    }

    fn decode(&self, mut flat: usize, out: &mut [usize]) {
        for (o, &d) in out.iter_mut().zip(&self.dims).rev() {
            *o = flat % d;
            flat /= d;
        }
    }

    /// `g` for the node at `idx`, written into `g`.
    #[inline]
    fn gather_g(&self, idx: &[usize], g: &mut [f64]) {
        g.copy_from_slice(self.h[0].row(idx[0]));
        for (c, h) in self.h.iter().enumerate().skip(1) {
            hadamard_in_place(g, h.row(idx[c]));
        }
    }

    /// Evaluate the model at every grid node.
    pub fn forward_all(&self, model: &FutonModel, exec: Exec) -> Result<GridSignal> {
        let d = model.output_dim();
        let nodes = self.node_count();
        let mut out = GridSignal::zeros(self.dims.clone(), d, ValueRange::SYMMETRIC)?;
        let chunk = par::chunk_len(nodes);
        par::for_each_row_block(exec, out.data_mut(), d, chunk, |start, slab| {
            let mut idx = vec![0usize; self.dims.len()];
            let mut g = vec![0.0; model.rank()];
            let mut a = vec![0.0; d];
            for (i, row) in slab.chunks_mut(d).enumerate() {
                self.decode(start + i, &mut idx);
                self.gather_g(&idx, &mut g);
                model.factors().output_factor().vec_mul(&g, &mut a);
                for (o, &av) in row.iter_mut().zip(&a) {
                    *o = model.activation().apply(av);
                }
            }
        });
        Ok(out)
    }

    /// Evaluate the model at a subset of flat node indices; returns
    /// `nodes.len() * D` values in node order.
    pub fn forward_nodes(&self, model: &FutonModel, nodes: &[usize], exec: Exec) -> Vec<f64> {
        let d = model.output_dim();
        let mut out = vec![0.0; nodes.len() * d];
        let chunk = par::chunk_len(nodes.len());
        par::for_each_row_block(exec, &mut out, d, chunk, |start, slab| {
            let mut idx = vec![0usize; self.dims.len()];
            let mut g = vec![0.0; model.rank()];
            let mut a = vec![0.0; d];
            for (i, row) in slab.chunks_mut(d).enumerate() {
                self.decode(nodes[start + i], &mut idx);
                self.gather_g(&idx, &mut g);
                model.factors().output_factor().vec_mul(&g, &mut a);
                for (o, &av) in row.iter_mut().zip(&a) {
                    *o = model.activation().apply(av);
                }
            }
        });
        out
    }

    /// Batched parameter gradients for upstream `d loss / d output` rows, one
    /// `D`-row per entry of `nodes` (same order as [`Self::forward_nodes`]).
    pub fn backward_nodes(
        &self,
        model: &FutonModel,
        nodes: &[usize],
        upstream: &[f64],
        exec: Exec,
    ) -> Result<Gradients> {
        let d = model.output_dim();
        let r = model.rank();
        let c_dim = model.input_dim();
        if upstream.len() != nodes.len() * d {
            return Err(Error::shape(format!(
                "upstream length {} does not match {} nodes x D={}",
                upstream.len(),
                nodes.len(),
                d
            )));
        }
        let mut grads = Gradients::zeros_like(model.factors());
        if nodes.is_empty() {
            return Ok(grads);
        }

        struct Partial {
            m: Vec<Mat>,
            dv: Mat,
        }

        let chunk = par::chunk_len(nodes.len());
        let reduced = par::map_reduce(
            exec,
            nodes.len(),
            chunk,
            |range| {
                let mut part = Partial {
                    m: self.dims.iter().map(|&n| Mat::zeros(n, r)).collect(),
                    dv: Mat::zeros(d, r),
                };
                let mut idx = vec![0usize; c_dim];
                let mut g = vec![0.0; r];
                let mut a = vec![0.0; d];
                let mut da = vec![0.0; d];
                let mut dg = vec![0.0; r];
                let mut dh = vec![0.0; r];
                for pos in range {
                    self.decode(nodes[pos], &mut idx);
                    self.gather_g(&idx, &mut g);
                    model.factors().output_factor().vec_mul(&g, &mut a);
                    let urow = &upstream[pos * d..(pos + 1) * d];
                    for ((o, &u), &av) in da.iter_mut().zip(urow).zip(&a) {
                        *o = u * model.activation().derivative(av);
                    }
                    part.dv.add_outer(&da, &g, 1.0);
                    model.factors().output_factor().transpose_vec_mul(&da, &mut dg);
                    for c in 0..c_dim {
                        dh.copy_from_slice(&dg);
                        for (other, h) in self.h.iter().enumerate() {
                            if other != c {
                                hadamard_in_place(&mut dh, h.row(idx[other]));
                            }
                        }
                        let mrow = part.m[c].row_mut(idx[c]);
                        for (o, &v) in mrow.iter_mut().zip(&dh) {
                            *o += v;
                        }
                    }
                }
                part
            },
            |acc, next| {
                for (a, b) in acc.m.iter_mut().zip(&next.m) {
                    a.add_assign(b);
                }
                acc.dv.add_assign(&next.dv);
            },
        )
        .expect("non-empty node set");

        for c in 0..c_dim {
            grads.d_input_factors[c] = Mat::matmul_at_b(&self.phi[c], &reduced.m[c])?;
        }
        grads.d_output_factor = reduced.dv;
        Ok(grads)
    }
}

impl FutonModel {
    /// Evaluate the model on the tensor grid spanned by `axis_grids`,
    /// returning a signal of shape `N_1 x ... x N_C` with `D` channels.
    /// Identical (to rounding) to calling [`FutonModel::forward`] per node,
    /// at `O(sum_c N_c K R + prod_c N_c (C + D) R)` total cost.
    pub fn forward_grid(&self, axis_grids: &[Vec<f64>]) -> Result<GridSignal> {
        let mut ws = GridWorkspace::new(self, axis_grids)?;
        ws.refresh(self, Exec::default());
        ws.forward_all(self, Exec::default())
    }
}

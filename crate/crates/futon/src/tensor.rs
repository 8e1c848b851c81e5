//! Minimal dense tensor algebra.
//!
//! Tensors are stored row-major (lexicographic, last index fastest), with the
//! output dimension last so per-output coefficient fibers are contiguous.
//! [`FullCoeffTensor`] is an oracle/test vehicle: it is exponential in the
//! input dimension and is never allocated by the model's training path.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Dense tensor of arbitrary order with row-major storage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FullCoeffTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl FullCoeffTensor {
    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::shape("tensor extents must be positive"));
        }
        let len = shape.iter().product();
        Ok(FullCoeffTensor {
            shape,
            data: vec![0.0; len],
        })
    }

    pub fn from_data(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if shape.contains(&0) || data.len() != expect {
            return Err(Error::shape(format!(
                "data length {} does not match shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(FullCoeffTensor { shape, data })
    }

    /// Scalar (order-0) tensor.
    pub fn scalar(v: f64) -> Self {
        FullCoeffTensor {
            shape: vec![],
            data: vec![v],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major strides (last index has stride 1).
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.shape.len()];
        for m in (0..self.shape.len().saturating_sub(1)).rev() {
            strides[m] = strides[m + 1] * self.shape[m + 1];
        }
        strides
    }

    pub fn flat_index(&self, indices: &[usize]) -> Result<usize> {
        if indices.len() != self.shape.len() {
            return Err(Error::shape(format!(
                "index arity {} does not match order {}",
                indices.len(),
                self.shape.len()
            )));
        }
        let mut flat = 0;
        for (m, (&i, &dim)) in indices.iter().zip(&self.shape).enumerate() {
            if i >= dim {
                return Err(Error::Index(format!("index {i} out of range for mode {m}")));
            }
            flat = flat * dim + i;
        }
        Ok(flat)
    }

    pub fn at(&self, indices: &[usize]) -> Result<f64> {
        Ok(self.data[self.flat_index(indices)?])
    }

    pub fn set(&mut self, indices: &[usize], v: f64) -> Result<()> {
        let i = self.flat_index(indices)?;
        self.data[i] = v;
        Ok(())
    }

    pub fn max_abs_diff(&self, other: &FullCoeffTensor) -> f64 {
        if self.shape != other.shape {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Outer (tensor) product of a chain of vectors: element `(i_1, ..., i_M)`
/// is the product of the vector entries.
pub fn outer_product(vectors: &[&[f64]]) -> Result<FullCoeffTensor> {
    if vectors.is_empty() {
        return Err(Error::Arity("outer product needs at least one vector".into()));
    }
    if vectors.iter().any(|v| v.is_empty()) {
        return Err(Error::shape("outer product vectors must be non-empty"));
    }
    let shape: Vec<usize> = vectors.iter().map(|v| v.len()).collect();
    let mut out = FullCoeffTensor::zeros(shape)?;
    accumulate_outer(vectors, 1.0, &mut out.data);
    Ok(out)
}

/// Accumulate `scale * v_0 (x) ... (x) v_last` into a row-major buffer.
/// Shared by [`outer_product`] and rank-1-sum materialization.
fn accumulate_outer(vectors: &[&[f64]], scale: f64, data: &mut [f64]) {
    let trailing: usize = vectors[1..].iter().map(|v| v.len()).product();
    if vectors.len() == 1 {
        for (o, v) in data.iter_mut().zip(vectors[0]) {
            *o += scale * v;
        }
        return;
    }
    for (b, &v) in data.chunks_exact_mut(trailing).zip(vectors[0]) {
        if scale * v != 0.0 {
            accumulate_outer(&vectors[1..], scale * v, b);
        }
    }
}

/// Elementwise product of two equal-length vectors.
pub fn hadamard(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "hadamard length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).collect())
}

/// In-place variant: `acc[i] *= b[i]`.
pub fn hadamard_in_place(acc: &mut [f64], b: &[f64]) {
    debug_assert_eq!(acc.len(), b.len());
    for (a, v) in acc.iter_mut().zip(b) {
        *a *= v;
    }
}

/// Contract `a` against the leading modes of `b`, producing the trailing
/// modes of `b`: `c[j...] = sum_i a[i...] b[i..., j...]`.
pub fn generalized_dot(a: &FullCoeffTensor, b: &FullCoeffTensor) -> Result<FullCoeffTensor> {
    let m = a.order();
    if b.order() < m || b.shape()[..m] != *a.shape() {
        return Err(Error::shape(format!(
            "generalized dot: leading dims of {:?} must equal {:?}",
            b.shape(),
            a.shape()
        )));
    }
    let trailing: usize = b.shape()[m..].iter().product();
    let mut out = vec![0.0; trailing];
    for (ai, brow) in a.data().iter().zip(b.data().chunks_exact(trailing)) {
        if *ai == 0.0 {
            continue;
        }
        for (o, bv) in out.iter_mut().zip(brow) {
            *o += ai * bv;
        }
    }
    FullCoeffTensor::from_data(b.shape()[m..].to_vec(), out)
}

/// CP factors of the model's coefficient tensor: `C` input factor matrices
/// of shape `K x R` plus an output factor `D x R`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpFactors {
    input_factors: Vec<Mat>,
    output_factor: Mat,
}

impl CpFactors {
    pub fn new(input_factors: Vec<Mat>, output_factor: Mat) -> Result<Self> {
        if input_factors.is_empty() {
            return Err(Error::Arity("at least one input factor required".into()));
        }
        let r = output_factor.cols();
        let k = input_factors[0].rows();
        for f in &input_factors {
            if f.cols() != r || f.rows() != k {
                return Err(Error::shape(
                    "input factors must share K rows and R columns".to_string(),
                ));
            }
        }
        if r == 0 || k == 0 || output_factor.rows() == 0 {
            return Err(Error::shape("factor extents must be positive"));
        }
        Ok(CpFactors {
            input_factors,
            output_factor,
        })
    }

    pub fn zeros(c: usize, k: usize, r: usize, d: usize) -> Result<Self> {
        if c == 0 || k == 0 || r == 0 || d == 0 {
            return Err(Error::domain("all CP dimensions must be >= 1"));
        }
        CpFactors::new(vec![Mat::zeros(k, r); c], Mat::zeros(d, r))
    }

    pub fn input_dim(&self) -> usize {
        self.input_factors.len()
    }

    pub fn k(&self) -> usize {
        self.input_factors[0].rows()
    }

    pub fn rank(&self) -> usize {
        self.output_factor.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.output_factor.rows()
    }

    pub fn input_factor(&self, c: usize) -> &Mat {
        &self.input_factors[c]
    }

    pub fn input_factor_mut(&mut self, c: usize) -> &mut Mat {
        &mut self.input_factors[c]
    }

    pub fn output_factor(&self) -> &Mat {
        &self.output_factor
    }

    pub fn output_factor_mut(&mut self) -> &mut Mat {
        &mut self.output_factor
    }

    /// `C*K*R + D*R`.
    pub fn param_count(&self) -> usize {
        self.input_dim() * self.k() * self.rank() + self.output_dim() * self.rank()
    }

    /// Flattening order: input factors in mode order (row-major each), then
    /// the output factor (row-major). The optimizer state and checkpoints
    /// rely on this order.
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        out.clear();
        out.reserve(self.param_count());
        for f in &self.input_factors {
            out.extend_from_slice(f.data());
        }
        out.extend_from_slice(self.output_factor.data());
    }

    pub fn unflatten_from(&mut self, src: &[f64]) -> Result<()> {
        if src.len() != self.param_count() {
            return Err(Error::shape(format!(
                "flat parameter length {} does not match {}",
                src.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for f in &mut self.input_factors {
            let n = f.data().len();
            f.data_mut().copy_from_slice(&src[offset..offset + n]);
            offset += n;
        }
        self.output_factor
            .data_mut()
            .copy_from_slice(&src[offset..]);
        Ok(())
    }

    /// The generic rank-1-sum view: mode factors `U^(1), ..., U^(C), V`.
    pub fn to_rank_one_sum(&self) -> RankOneSum {
        let mut factors = self.input_factors.clone();
        factors.push(self.output_factor.clone());
        RankOneSum { factors }
    }
}

/// Sum of rank-1 tensors over arbitrary mode sizes: factor `m` has shape
/// `I_m x R`, column `r` holding the mode-`m` vector of term `r`.
#[derive(Clone, Debug, PartialEq)]
pub struct RankOneSum {
    pub factors: Vec<Mat>,
}

impl RankOneSum {
    pub fn rank(&self) -> usize {
        self.factors.first().map_or(0, Mat::cols)
    }

    pub fn mode_dims(&self) -> Vec<usize> {
        self.factors.iter().map(Mat::rows).collect()
    }

    /// Materialize the dense tensor, accumulating terms in rank order into a
    /// single buffer.
    pub fn materialize(&self) -> Result<FullCoeffTensor> {
        let shape = self.mode_dims();
        let mut out = FullCoeffTensor::zeros(shape)?;
        let r = self.rank();
        let mut cols: Vec<Vec<f64>> = vec![vec![0.0; 0]; self.factors.len()];
        for term in 0..r {
            for (m, f) in self.factors.iter().enumerate() {
                cols[m] = (0..f.rows()).map(|i| f.get(i, term)).collect();
            }
            let views: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
            accumulate_outer(&views, 1.0, out.data_mut());
        }
        Ok(out)
    }
}

/// Materialize CP factors into the dense coefficient tensor of shape
/// `(K, ..., K, D)`.
pub fn cp_materialize(factors: &CpFactors) -> Result<FullCoeffTensor> {
    factors.to_rank_one_sum().materialize()
}

/// The explicit fiber decomposition: one rank-1 term per multi-index over
/// every mode except `mode`, with that term's mode-`mode` vector equal to the
/// corresponding fiber of `w` and standard basis vectors elsewhere.
/// Materializing the result reproduces `w` (up to float addition order).
pub fn fiber_cp_construction(w: &FullCoeffTensor, mode: usize) -> Result<RankOneSum> {
    let order = w.order();
    if mode >= order {
        return Err(Error::Index(format!(
            "mode {mode} out of range for order-{order} tensor"
        )));
    }
    let shape = w.shape().to_vec();
    let terms: usize = shape
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != mode)
        .map(|(_, &d)| d)
        .product();
    let mut factors: Vec<Mat> = shape.iter().map(|&d| Mat::zeros(d, terms)).collect();
    let strides = w.strides();

    // Odometer over the non-mode indices in lexicographic order.
    let free: Vec<usize> = (0..order).filter(|&j| j != mode).collect();
    let mut idx = vec![0usize; order];
    for term in 0..terms {
        let mut base = 0;
        for &j in &free {
            base += idx[j] * strides[j];
            factors[j].set(idx[j], term, 1.0);
        }
        for i in 0..shape[mode] {
            factors[mode].set(i, term, w.data()[base + i * strides[mode]]);
        }
        // increment odometer (last free index fastest, matching row-major)
        for &j in free.iter().rev() {
            idx[j] += 1;
            if idx[j] < shape[j] {
                break;
            }
            idx[j] = 0;
        }
    }
    Ok(RankOneSum { factors })
}

/// The mode whose fiber construction minimizes the term count, with that
/// count: `min_m prod_{j != m} I_j`.
pub fn min_fiber_mode(shape: &[usize]) -> Result<(usize, usize)> {
    if shape.is_empty() {
        return Err(Error::shape("empty shape"));
    }
    let total: usize = shape.iter().product();
    let (mode, &dim) = shape
        .iter()
        .enumerate()
        .max_by_key(|&(_, &d)| d)
        .expect("non-empty");
    Ok((mode, total / dim))
}

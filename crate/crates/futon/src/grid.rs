//! Regular-grid sampled signals (images, volumes, sinogram-shaped targets).
//!
//! Values are stored row-major over the spatial dims with the channel index
//! fastest, matching the coefficient-tensor layout. Grid node `i` of `n` maps
//! to the continuum coordinate `(i + 0.5) / n`, so uniform quadrature weights
//! are exact cell volumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nominal value range of a signal. Training works in `[-1, 1]`; metrics and
/// image I/O work in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    pub lo: f64,
    pub hi: f64,
}

impl ValueRange {
    pub const UNIT: ValueRange = ValueRange { lo: 0.0, hi: 1.0 };
    pub const SYMMETRIC: ValueRange = ValueRange { lo: -1.0, hi: 1.0 };

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSignal {
    dims: Vec<usize>,
    channels: usize,
    range: ValueRange,
    data: Vec<f64>,
}

impl GridSignal {
    pub fn zeros(dims: Vec<usize>, channels: usize, range: ValueRange) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) || channels == 0 {
            return Err(Error::shape("grid dims and channel count must be positive"));
        }
        let len = dims.iter().product::<usize>() * channels;
        Ok(GridSignal {
            dims,
            channels,
            range,
            data: vec![0.0; len],
        })
    }

    pub fn from_data(
        dims: Vec<usize>,
        channels: usize,
        range: ValueRange,
        data: Vec<f64>,
    ) -> Result<Self> {
        let mut s = GridSignal::zeros(dims, channels, range)?;
        if data.len() != s.data.len() {
            return Err(Error::shape(format!(
                "data length {} does not match dims {:?} x {} channels",
                data.len(),
                s.dims,
                s.channels
            )));
        }
        s.data = data;
        Ok(s)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn range(&self) -> ValueRange {
        self.range
    }

    pub fn set_range(&mut self, range: ValueRange) {
        self.range = range;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn node_count(&self) -> usize {
        self.dims.iter().product()
    }

    /// Cell volume of the implied `[0,1]^C` quadrature.
    pub fn cell_volume(&self) -> f64 {
        1.0 / self.node_count() as f64
    }

    /// All channel values at a flat node index.
    pub fn node(&self, flat: usize) -> &[f64] {
        &self.data[flat * self.channels..(flat + 1) * self.channels]
    }

    pub fn node_mut(&mut self, flat: usize) -> &mut [f64] {
        &mut self.data[flat * self.channels..(flat + 1) * self.channels]
    }

    pub fn value(&self, indices: &[usize], ch: usize) -> f64 {
        self.data[self.flat_node(indices) * self.channels + ch]
    }

    pub fn set_value(&mut self, indices: &[usize], ch: usize, v: f64) {
        let i = self.flat_node(indices) * self.channels + ch;
        self.data[i] = v;
    }

    pub fn flat_node(&self, indices: &[usize]) -> usize {
        debug_assert_eq!(indices.len(), self.dims.len());
        let mut flat = 0;
        for (&i, &d) in indices.iter().zip(&self.dims) {
            debug_assert!(i < d);
            flat = flat * d + i;
        }
        flat
    }

    /// Decode a flat node index into per-axis indices.
    pub fn node_indices(&self, mut flat: usize, out: &mut [usize]) {
        debug_assert_eq!(out.len(), self.dims.len());
        for (o, &d) in out.iter_mut().zip(&self.dims).rev() {
            *o = flat % d;
            flat /= d;
        }
    }

    /// Midpoint coordinates along every axis.
    pub fn midpoint_axes(&self) -> Vec<Vec<f64>> {
        self.dims.iter().map(|&n| axis_midpoints(n)).collect()
    }

    /// Affine remap of values from the current nominal range to `to`.
    pub fn remap(&self, to: ValueRange) -> GridSignal {
        let from = self.range;
        let scale = to.width() / from.width();
        let mut out = self.clone();
        for v in &mut out.data {
            *v = (*v - from.lo) * scale + to.lo;
        }
        out.range = to;
        out
    }

    pub fn same_shape(&self, other: &GridSignal) -> bool {
        self.dims == other.dims && self.channels == other.channels
    }
}

/// Midpoint coordinate of each of `n` cells covering `[0,1]`.
pub fn axis_midpoints(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}

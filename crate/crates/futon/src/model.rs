//! The factorized signal model.
//!
//! A model maps a coordinate in `[0,1]^C` to `D` outputs through three
//! contractions, in the order that keeps the cost linear:
//!
//! 1. per-axis feature projection `h_c = U^(c)^T phi(x_c)`, `O(C K R)`;
//! 2. Hadamard combination `g = h_1 ⊙ ... ⊙ h_C`, `O(C R)`;
//! 3. output map `s = act(V g)`, `O(D R)`.
//!
//! The dense coefficient tensor this factorizes is never materialized here;
//! the equivalence with the naive contraction is exercised by the oracle
//! paths in [`crate::gfs`] and [`crate::tensor`].

use std::io::{Read, Write};
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, BasisSpec};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::tensor::CpFactors;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    None,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(&self, a: f64) -> f64 {
        match self {
            Activation::None => a,
            Activation::Tanh => a.tanh(),
        }
    }

    /// Derivative at pre-activation `a`.
    #[inline]
    pub fn derivative(&self, a: f64) -> f64 {
        match self {
            Activation::None => 1.0,
            Activation::Tanh => {
                let t = a.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Parameter gradients, shaped like [`CpFactors`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub d_input_factors: Vec<Mat>,
    pub d_output_factor: Mat,
}

impl Gradients {
    pub fn zeros_like(factors: &CpFactors) -> Self {
        Gradients {
            d_input_factors: (0..factors.input_dim())
                .map(|_| Mat::zeros(factors.k(), factors.rank()))
                .collect(),
            d_output_factor: Mat::zeros(factors.output_dim(), factors.rank()),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.d_input_factors.iter_mut().zip(&other.d_input_factors) {
            a.add_assign(b);
        }
        self.d_output_factor.add_assign(&other.d_output_factor);
    }

    /// Same flattening order as [`CpFactors::flatten_into`].
    pub fn flatten_into(&self, out: &mut Vec<f64>) {
        out.clear();
        for m in &self.d_input_factors {
            out.extend_from_slice(m.data());
        }
        out.extend_from_slice(self.d_output_factor.data());
    }

    pub fn max_abs(&self) -> f64 {
        let inputs = self
            .d_input_factors
            .iter()
            .flat_map(|m| m.data())
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        self.d_output_factor
            .data()
            .iter()
            .map(|v| v.abs())
            .fold(inputs, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FutonModel {
    basis: BasisSpec,
    factors: CpFactors,
    activation: Activation,
}

/// Reusable per-point evaluation buffers.
#[derive(Clone, Debug)]
pub struct PointScratch {
    phi: Vec<f64>,
    h: Mat,
    g: Vec<f64>,
    a: Vec<f64>,
}

impl PointScratch {
    pub fn for_model(model: &FutonModel) -> Self {
        PointScratch {
            phi: vec![0.0; model.k()],
            h: Mat::zeros(model.input_dim(), model.rank()),
            g: vec![0.0; model.rank()],
            a: vec![0.0; model.output_dim()],
        }
    }
}

impl FutonModel {
    /// Assemble a model from existing factors.
    pub fn from_parts(
        basis: BasisSpec,
        factors: CpFactors,
        activation: Activation,
    ) -> Result<Self> {
        if basis.k != factors.k() {
            return Err(Error::shape(format!(
                "basis K={} does not match factor K={}",
                basis.k,
                factors.k()
            )));
        }
        Ok(FutonModel {
            basis,
            factors,
            activation,
        })
    }

    /// Random initialization: `U^(c)` entries uniform on
    /// `[-sqrt(3/K), sqrt(3/K)]` and `V` entries uniform on
    /// `[-sqrt(3/R), sqrt(3/R)]`, drawn in flattening order from a seeded
    /// generator. The bounds give unit-variance projected features and O(1)
    /// pre-activation outputs for any input dimension.
    pub fn init(
        input_dim: usize,
        k: usize,
        rank: usize,
        output_dim: usize,
        basis_kind: BasisKind,
        activation: Activation,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || k == 0 || rank == 0 || output_dim == 0 {
            return Err(Error::domain("all model dimensions must be >= 1"));
        }
        let basis = BasisSpec::new(basis_kind, k)?;
        let mut rng = StdRng::seed_from_u64(seed);
        let mut factors = CpFactors::zeros(input_dim, k, rank, output_dim)?;
        let u_bound = (3.0 / k as f64).sqrt();
        for c in 0..input_dim {
            for v in factors.input_factor_mut(c).data_mut() {
                *v = (2.0 * rng.random::<f64>() - 1.0) * u_bound;
            }
        }
        let v_bound = (3.0 / rank as f64).sqrt();
        for v in factors.output_factor_mut().data_mut() {
            *v = (2.0 * rng.random::<f64>() - 1.0) * v_bound;
        }
        FutonModel::from_parts(basis, factors, activation)
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn factors(&self) -> &CpFactors {
        &self.factors
    }

    pub fn factors_mut(&mut self) -> &mut CpFactors {
        &mut self.factors
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn input_dim(&self) -> usize {
        self.factors.input_dim()
    }

    pub fn k(&self) -> usize {
        self.factors.k()
    }

    pub fn rank(&self) -> usize {
        self.factors.rank()
    }

    pub fn output_dim(&self) -> usize {
        self.factors.output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.factors.param_count()
    }

    /// Evaluate the model at one coordinate.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut scratch = PointScratch::for_model(self);
        let mut out = vec![0.0; self.output_dim()];
        self.forward_with(x, &mut scratch, &mut out)?;
        Ok(out)
    }

    /// Allocation-free forward pass for hot loops.
    pub fn forward_with(
        &self,
        x: &[f64],
        scratch: &mut PointScratch,
        out: &mut [f64],
    ) -> Result<()> {
        self.project_features(x, scratch)?;
        self.combine_features(scratch);
        self.factors.output_factor().vec_mul(&scratch.g, &mut scratch.a);
        for (o, &a) in out.iter_mut().zip(scratch.a.iter()) {
            *o = self.activation.apply(a);
        }
        Ok(())
    }

    /// Per-axis projections `h_c = U^(c)^T phi(x_c)`.
    fn project_features(&self, x: &[f64], scratch: &mut PointScratch) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::shape(format!(
                "coordinate arity {} does not match C={}",
                x.len(),
                self.input_dim()
            )));
        }
        for (c, &xc) in x.iter().enumerate() {
            self.basis.eval_into(xc, &mut scratch.phi)?;
            self.factors
                .input_factor(c)
                .transpose_vec_mul(&scratch.phi, scratch.h.row_mut(c));
        }
        Ok(())
    }

    /// `g = h_1 ⊙ ... ⊙ h_C`.
    fn combine_features(&self, scratch: &mut PointScratch) {
        scratch.g.copy_from_slice(scratch.h.row(0));
        for c in 1..self.input_dim() {
            crate::tensor::hadamard_in_place(&mut scratch.g, scratch.h.row(c));
        }
    }

    /// Analytic parameter gradients at one point, for an upstream
    /// `d loss / d output` vector. Batch gradients are sums of these.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<Gradients> {
        if upstream.len() != self.output_dim() {
            return Err(Error::shape(format!(
                "upstream length {} does not match D={}",
                upstream.len(),
                self.output_dim()
            )));
        }
        let c_dim = self.input_dim();
        let r = self.rank();
        let mut scratch = PointScratch::for_model(self);
        self.project_features(x, &mut scratch)?;
        self.combine_features(&mut scratch);
        self.factors
            .output_factor()
            .vec_mul(&scratch.g, &mut scratch.a);

        let da: Vec<f64> = upstream
            .iter()
            .zip(&scratch.a)
            .map(|(u, &a)| u * self.activation.derivative(a))
            .collect();

        let mut grads = Gradients::zeros_like(&self.factors);
        grads.d_output_factor.add_outer(&da, &scratch.g, 1.0);

        let mut dg = vec![0.0; r];
        self.factors.output_factor().transpose_vec_mul(&da, &mut dg);

        let mut dh = vec![0.0; r];
        let mut phi = vec![0.0; self.k()];
        for (c, &xc) in x.iter().enumerate() {
            dh.copy_from_slice(&dg);
            for other in 0..c_dim {
                if other != c {
                    crate::tensor::hadamard_in_place(&mut dh, scratch.h.row(other));
                }
            }
            self.basis.eval_into(xc, &mut phi)?;
            grads.d_input_factors[c].add_outer(&phi, &dh, 1.0);
        }
        Ok(grads)
    }

    /// Copy of the model with `extra` additional rank columns, all zero.
    /// Outputs are unchanged; used to embed a rank-R model into rank R+extra.
    pub fn embed_rank(&self, extra: usize) -> Result<FutonModel> {
        let r = self.rank();
        let widen = |m: &Mat| {
            let mut out = Mat::zeros(m.rows(), r + extra);
            for i in 0..m.rows() {
                out.row_mut(i)[..r].copy_from_slice(m.row(i));
            }
            out
        };
        let factors = CpFactors::new(
            (0..self.input_dim())
                .map(|c| widen(self.factors.input_factor(c)))
                .collect(),
            widen(self.factors.output_factor()),
        )?;
        FutonModel::from_parts(self.basis, factors, self.activation)
    }

    // ---- checkpoint I/O ------------------------------------------------

    /// Save to `path`; `.json` extension selects the JSON container,
    /// anything else the binary one.
    pub fn save_checkpoint(&self, path: &Path) -> Result<()> {
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            self.save_json(path)
        } else {
            self.save_binary(path)
        }
    }

    /// Load from `path`, sniffing the container from the leading bytes.
    pub fn load_checkpoint(path: &Path) -> Result<FutonModel> {
        let bytes = std::fs::read(path)?;
        if bytes.starts_with(CHECKPOINT_MAGIC) {
            FutonModel::from_binary(&bytes)
        } else {
            let doc: CheckpointDoc = serde_json::from_slice(&bytes)?;
            doc.into_model()
        }
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let doc = CheckpointDoc::from_model(self);
        let mut file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut file, &doc)?;
        file.write_all(b"\n")?;
        Ok(())
    }

    pub fn save_binary(&self, path: &Path) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(CHECKPOINT_MAGIC)?;
        let dims = [
            1u32, // container version
            match self.basis.kind {
                BasisKind::Cosine => 0,
                BasisKind::Legendre => 1,
                BasisKind::Chebyshev => 2,
            },
            match self.activation {
                Activation::None => 0,
                Activation::Tanh => 1,
            },
            self.input_dim() as u32,
            self.k() as u32,
            self.rank() as u32,
            self.output_dim() as u32,
        ];
        for d in dims {
            file.write_all(&d.to_le_bytes())?;
        }
        let mut flat = Vec::new();
        self.factors.flatten_into(&mut flat);
        for v in flat {
            file.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    fn from_binary(bytes: &[u8]) -> Result<FutonModel> {
        let mut cursor = &bytes[CHECKPOINT_MAGIC.len()..];
        let mut next_u32 = || -> Result<u32> {
            let mut buf = [0u8; 4];
            cursor.read_exact(&mut buf)?;
            Ok(u32::from_le_bytes(buf))
        };
        let version = next_u32()?;
        if version != 1 {
            return Err(Error::config(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let basis_kind = match next_u32()? {
            0 => BasisKind::Cosine,
            1 => BasisKind::Legendre,
            2 => BasisKind::Chebyshev,
            other => return Err(Error::config(format!("unknown basis tag {other}"))),
        };
        let activation = match next_u32()? {
            0 => Activation::None,
            1 => Activation::Tanh,
            other => return Err(Error::config(format!("unknown activation tag {other}"))),
        };
        let (c, k, r, d) = (
            next_u32()? as usize,
            next_u32()? as usize,
            next_u32()? as usize,
            next_u32()? as usize,
        );
        let mut factors = CpFactors::zeros(c, k, r, d)?;
        let expected = factors.param_count();
        let mut flat = Vec::with_capacity(expected);
        let mut buf = [0u8; 8];
        for _ in 0..expected {
            cursor.read_exact(&mut buf)?;
            flat.push(f64::from_le_bytes(buf));
        }
        factors.unflatten_from(&flat)?;
        FutonModel::from_parts(BasisSpec::new(basis_kind, k)?, factors, activation)
    }
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"FUTONCKP";

/// JSON checkpoint container. Factor data is row-major in flattening order.
#[derive(Serialize, Deserialize)]
struct CheckpointDoc {
    format: String,
    version: u32,
    input_dim: usize,
    k: usize,
    rank: usize,
    output_dim: usize,
    basis: BasisKind,
    activation: Activation,
    input_factors: Vec<Vec<f64>>,
    output_factor: Vec<f64>,
}

impl CheckpointDoc {
    fn from_model(model: &FutonModel) -> Self {
        CheckpointDoc {
            format: "futon-checkpoint".to_string(),
            version: 1,
            input_dim: model.input_dim(),
            k: model.k(),
            rank: model.rank(),
            output_dim: model.output_dim(),
            basis: model.basis.kind,
            activation: model.activation,
            input_factors: (0..model.input_dim())
                .map(|c| model.factors.input_factor(c).data().to_vec())
                .collect(),
            output_factor: model.factors.output_factor().data().to_vec(),
        }
    }

    fn into_model(self) -> Result<FutonModel> {
        if self.format != "futon-checkpoint" || self.version != 1 {
            return Err(Error::config("unrecognized checkpoint document"));
        }
        let mut factors = CpFactors::zeros(self.input_dim, self.k, self.rank, self.output_dim)?;
        if self.input_factors.len() != self.input_dim {
            return Err(Error::shape("wrong number of input factors"));
        }
        for (c, data) in self.input_factors.into_iter().enumerate() {
            if data.len() != self.k * self.rank {
                return Err(Error::shape("input factor length mismatch"));
            }
            factors.input_factor_mut(c).data_mut().copy_from_slice(&data);
        }
        if self.output_factor.len() != self.output_dim * self.rank {
            return Err(Error::shape("output factor length mismatch"));
        }
        factors
            .output_factor_mut()
            .data_mut()
            .copy_from_slice(&self.output_factor);
        FutonModel::from_parts(BasisSpec::new(self.basis, self.k)?, factors, self.activation)
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sparse-autoencoder forward pass.
//!
//! ```text
//! encode:  a(z)   = σ(z · W_enc + b_enc)       z ∈ R^d, a ∈ R^m
//! decode:  SAE(z) = a(z) · W_dec + b_dec
//! error:   ε      = z − SAE(z)
//! ```
//!
//! `σ` is one of the three activation functions used by published SAE
//! families: plain ReLU, TopK-ReLU and JumpReLU.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{ensure_dim, Error, Result};
use crate::tensor::{vecmat, DenseMatrix, DenseVector};

/// Activation function applied to the encoder pre-activations.
#[derive(Debug, Clone, PartialEq)]
pub enum Nonlinearity {
    Relu,
    /// ReLU, then keep the `k` largest values. Ties at the `k`-th value go to
    /// the lower latent index.
    TopKRelu { k: usize },
    /// Entry `j` passes through iff `pre_j > theta_j` (strict).
    JumpRelu { theta: DenseVector },
}

impl Nonlinearity {
    /// JumpReLU with the same threshold for all `m` latents.
    pub fn jump_relu_uniform(m: usize, theta: f32) -> Result<Self> {
        let theta = DenseVector::new(alloc::vec![theta; m])?;
        Ok(Nonlinearity::JumpRelu { theta })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Nonlinearity::Relu => "relu",
            Nonlinearity::TopKRelu { .. } => "topk_relu",
            Nonlinearity::JumpRelu { .. } => "jump_relu",
        }
    }

    fn validate(&self, m: usize) -> Result<()> {
        match self {
            Nonlinearity::Relu => Ok(()),
            Nonlinearity::TopKRelu { k } => {
                if *k == 0 || *k > m {
                    Err(Error::InvalidConfig(alloc::format!(
                        "topk_relu needs 1 <= K <= m ({m}), got {k}"
                    )))
                } else {
                    Ok(())
                }
            }
            Nonlinearity::JumpRelu { theta } => {
                ensure_dim("jump_relu theta", m, theta.dim())?;
                match theta.as_slice().iter().position(|t| *t < 0.0) {
                    Some(j) => Err(Error::InvalidConfig(alloc::format!(
                        "jump_relu threshold {j} is negative"
                    ))),
                    None => Ok(()),
                }
            }
        }
    }

    /// Apply to a pre-activation vector of width `m`.
    pub fn apply(&self, pre: &[f32]) -> Result<LatentVector> {
        self.validate(pre.len())?;
        let mut out: Vec<f32> = match self {
            Nonlinearity::Relu | Nonlinearity::TopKRelu { .. } => {
                pre.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect()
            }
            Nonlinearity::JumpRelu { theta } => pre
                .iter()
                .zip(theta.as_slice())
                .map(|(&x, &t)| if x > t { x } else { 0.0 })
                .collect(),
        };
        if let Nonlinearity::TopKRelu { k } = self {
            let mut active: Vec<usize> = (0..out.len()).filter(|&j| out[j] > 0.0).collect();
            if active.len() > *k {
                active.sort_by(|&a, &b| out[b].total_cmp(&out[a]).then(a.cmp(&b)));
                for &j in &active[*k..] {
                    out[j] = 0.0;
                }
            }
        }
        LatentVector::new(out)
    }
}

/// Weights and configuration of one SAE attached to one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SaeParams {
    w_enc: DenseMatrix,
    b_enc: DenseVector,
    w_dec: DenseMatrix,
    b_dec: DenseVector,
    nonlinearity: Nonlinearity,
    pub layer_index: usize,
    pub model_tag: String,
}

impl SaeParams {
    /// Validates `w_enc: d×m`, `b_enc: m`, `w_dec: m×d`, `b_dec: d` and `m > d`.
    pub fn new(
        w_enc: DenseMatrix,
        b_enc: DenseVector,
        w_dec: DenseMatrix,
        b_dec: DenseVector,
        nonlinearity: Nonlinearity,
        layer_index: usize,
        model_tag: impl Into<String>,
    ) -> Result<Self> {
        let d = w_enc.rows();
        let m = w_enc.cols();
        ensure_dim("b_enc", m, b_enc.dim())?;
        ensure_dim("w_dec rows", m, w_dec.rows())?;
        ensure_dim("w_dec cols", d, w_dec.cols())?;
        ensure_dim("b_dec", d, b_dec.dim())?;
        if m <= d {
            return Err(Error::InvalidConfig(alloc::format!(
                "latent width m ({m}) must exceed model width d ({d})"
            )));
        }
        nonlinearity.validate(m)?;
        Ok(Self {
            w_enc,
            b_enc,
            w_dec,
            b_dec,
            nonlinearity,
            layer_index,
            model_tag: model_tag.into(),
        })
    }

    /// Residual-stream width.
    pub fn d(&self) -> usize {
        self.w_enc.rows()
    }

    /// Number of latents.
    pub fn m(&self) -> usize {
        self.w_enc.cols()
    }

    pub fn w_enc(&self) -> &DenseMatrix {
        &self.w_enc
    }

    pub fn b_enc(&self) -> &DenseVector {
        &self.b_enc
    }

    pub fn w_dec(&self) -> &DenseMatrix {
        &self.w_dec
    }

    pub fn b_dec(&self) -> &DenseVector {
        &self.b_dec
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    /// Decoder row `j`, i.e. the residual-space direction of latent `j`.
    pub fn decoder_row(&self, j: usize) -> Result<DenseVector> {
        self.w_dec.row_extract(j).map_err(|_| Error::IndexOutOfRange {
            what: "latent",
            index: j,
            bound: self.m(),
        })
    }

    /// `z · W_enc + b_enc`, before the nonlinearity.
    pub fn pre_activation(&self, z: &DenseVector) -> Result<DenseVector> {
        ensure_dim("encode input", self.d(), z.dim())?;
        vecmat(z, &self.w_enc, Some(&self.b_enc))
    }

    pub fn encode(&self, z: &DenseVector) -> Result<LatentVector> {
        let pre = self.pre_activation(z)?;
        self.nonlinearity.apply(pre.as_slice())
    }

    pub fn decode(&self, a: &LatentVector) -> Result<DenseVector> {
        ensure_dim("decode input", self.m(), a.dim())?;
        let a = DenseVector::new(a.as_slice().to_vec())?;
        vecmat(&a, &self.w_dec, Some(&self.b_dec))
    }

    /// `decode(encode(z))`.
    pub fn reconstruct(&self, z: &DenseVector) -> Result<DenseVector> {
        self.decode(&self.encode(z)?)
    }

    /// `ε = z − SAE(z)`, elementwise in `f32`.
    pub fn reconstruction_error(&self, z: &DenseVector) -> Result<DenseVector> {
        z.sub(&self.reconstruct(z)?)
    }
}

/// Post-nonlinearity latent code. Entries are finite and non-negative.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentVector {
    data: Vec<f32>,
    nonzero: usize,
}

impl LatentVector {
    pub fn new(data: Vec<f32>) -> Result<Self> {
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "latent",
                index,
            });
        }
        if let Some(j) = data.iter().position(|x| *x < 0.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "latent {j} is negative"
            )));
        }
        // normalise -0.0 so "active" is a plain `> 0` test everywhere
        let data: Vec<f32> = data.into_iter().map(|x| if x == 0.0 { 0.0 } else { x }).collect();
        let nonzero = data.iter().filter(|x| **x != 0.0).count();
        Ok(Self { data, nonzero })
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            data: alloc::vec![0.0; m],
            nonzero: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn nonzero_count(&self) -> usize {
        self.nonzero
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, j: usize) -> f32 {
        self.data[j]
    }

    pub fn is_active(&self, j: usize) -> bool {
        self.data[j] > 0.0
    }

    /// Indices of active latents in ascending order.
    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.data
            .iter()
            .enumerate()
            .filter(|(_, x)| **x > 0.0)
            .map(|(j, _)| j)
    }
}

// SPDX-License-Identifier: MIT OR Apache-2.0

//! SAE weights as a tensor bundle plus a `sae_config.json` sidecar.
//!
//! Reserved tensor names: `w_enc` (d×m), `b_enc` (m), `w_dec` (m×d),
//! `b_dec` (d) and, for JumpReLU, `jumprelu_theta` (m).

use std::path::Path;

use saif_core::sae::{Nonlinearity, SaeParams};
use saif_core::tensor::TensorBundle;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::files;

pub const CONFIG_FILE: &str = "sae_config.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaeConfig {
    pub nonlinearity: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_sae: Option<usize>,
    pub layer_index: usize,
    pub model_tag: String,
}

impl SaeConfig {
    pub fn describe(params: &SaeParams) -> Self {
        Self {
            nonlinearity: params.nonlinearity().name().into(),
            k_sae: match params.nonlinearity() {
                Nonlinearity::TopKRelu { k } => Some(*k),
                _ => None,
            },
            layer_index: params.layer_index,
            model_tag: params.model_tag.clone(),
        }
    }
}

pub fn sae_to_bundle(params: &SaeParams) -> TensorBundle {
    let mut b = TensorBundle::new();
    b.insert("w_enc", params.w_enc().clone());
    b.insert("b_enc", params.b_enc().clone());
    b.insert("w_dec", params.w_dec().clone());
    b.insert("b_dec", params.b_dec().clone());
    if let Nonlinearity::JumpRelu { theta } = params.nonlinearity() {
        b.insert("jumprelu_theta", theta.clone());
    }
    b
}

pub fn sae_from_bundle(bundle: &TensorBundle, config: &SaeConfig) -> Result<SaeParams> {
    let w_enc = bundle.require("w_enc")?.to_matrix()?;
    let w_dec = bundle.require("w_dec")?.to_matrix()?;
    if w_dec.rows() != w_enc.cols() || w_dec.cols() != w_enc.rows() {
        return Err(Error::Format(format!(
            "shape mismatch w_dec: expected [{}, {}], got [{}, {}]",
            w_enc.cols(),
            w_enc.rows(),
            w_dec.rows(),
            w_dec.cols()
        )));
    }
    let nonlinearity = match config.nonlinearity.as_str() {
        "relu" => Nonlinearity::Relu,
        "topk_relu" => Nonlinearity::TopKRelu {
            k: config
                .k_sae
                .ok_or_else(|| Error::Format("topk_relu config needs k_sae".into()))?,
        },
        "jump_relu" => Nonlinearity::JumpRelu {
            theta: bundle.require("jumprelu_theta")?.to_vector()?,
        },
        other => return Err(Error::Format(format!("unknown nonlinearity `{other}`"))),
    };
    Ok(SaeParams::new(
        w_enc,
        bundle.require("b_enc")?.to_vector()?,
        w_dec,
        bundle.require("b_dec")?.to_vector()?,
        nonlinearity,
        config.layer_index,
        config.model_tag.clone(),
    )?)
}

/// Load `sae.saif`; the config defaults to `sae_config.json` beside it.
pub fn load_sae(bundle_path: &Path, config_path: Option<&Path>) -> Result<SaeParams> {
    let default = files::sibling(bundle_path, CONFIG_FILE);
    let config: SaeConfig = files::read_json(config_path.unwrap_or(&default))?;
    let bundle = files::load_bundle(bundle_path)?;
    sae_from_bundle(&bundle, &config)
}

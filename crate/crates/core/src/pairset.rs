// SPDX-License-Identifier: MIT OR Apache-2.0

//! Positive/negative prompt pairs.
//!
//! A positive prompt is the content joined with one of several paraphrased
//! instruction sentences; the negative prompt is the content alone. Variants
//! are assigned round-robin by `pair_id` and contents are cycled when more
//! pairs are requested than there are contents.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{ensure_dim, Error, Result};
use crate::sae::{LatentVector, SaeParams};
use crate::tensor::{DenseVector, TensorBundle};

/// Where the instruction goes relative to the content.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PositionMode {
    /// `[Instruction] + [Content]`
    PreInstruction,
    /// `[Content] + [Instruction]`
    PostInstruction,
}

impl PositionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PositionMode::PreInstruction => "pre_instruction",
            PositionMode::PostInstruction => "post_instruction",
        }
    }
}

/// One instruction task and its paraphrased sentences.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InstructionSpec {
    pub task_tag: String,
    pub variants: Vec<String>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub keyword: Option<String>,
}

impl InstructionSpec {
    /// Variants must be non-empty, non-blank and pairwise distinct.
    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::Empty("instruction variants"));
        }
        for (i, v) in self.variants.iter().enumerate() {
            if v.trim().is_empty() {
                return Err(Error::InvalidConfig(format!("variant {i} is blank")));
            }
            if self.variants[..i].contains(v) {
                return Err(Error::InvalidConfig(format!("variant {i} is a duplicate")));
            }
        }
        if let Some(k) = &self.keyword {
            if k.trim().is_empty() {
                return Err(Error::InvalidConfig("keyword is blank".into()));
            }
        }
        Ok(())
    }

    /// Illustrative keyword-inclusion variants. These are not a canonical
    /// instruction set; real runs should supply their own.
    pub fn example_keyword(keyword: &str) -> Self {
        let variants = [
            format!("Include the word \"{keyword}\" in your response."),
            format!("Could you make sure your answer contains the word \"{keyword}\"?"),
            format!("Your reply should mention \"{keyword}\" at least once."),
            format!("Write a response and use the keyword \"{keyword}\" in it."),
            format!("Bitte verwende das Wort \"{keyword}\" in deiner Antwort."),
            format!("请在回答中包含单词“{keyword}”。"),
        ];
        Self {
            task_tag: "keyword_inclusion".into(),
            variants: variants.into_iter().collect(),
            keyword: Some(keyword.into()),
        }
    }

    /// Illustrative French-translation variants (non-canonical).
    pub fn example_translation_french() -> Self {
        let variants = [
            "Translate the sentence to French.",
            "Could you translate the text above into French?",
            "Please render this passage in French.",
            "Rewrite the content in the French language.",
            "Übersetze den Satz ins Französische.",
            "请把这句话翻译成法语。",
        ];
        Self {
            task_tag: "translation_french".into(),
            variants: variants.into_iter().map(String::from).collect(),
            keyword: None,
        }
    }
}

/// One rendered prompt pair.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PairManifestEntry {
    pub pair_id: usize,
    pub content_text: String,
    pub variant_index: usize,
    pub position_mode: PositionMode,
    pub positive_prompt: String,
    pub negative_prompt: String,
}

/// Latent activations for one pair at one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRecord {
    pub pair_id: usize,
    pub layer_index: usize,
    /// Latents with the instruction present.
    pub h_pos: LatentVector,
    /// Latents without the instruction.
    pub h_neg: LatentVector,
    pub z_pos: Option<DenseVector>,
    pub z_neg: Option<DenseVector>,
}

impl PairRecord {
    pub fn new(pair_id: usize, layer_index: usize, h_pos: LatentVector, h_neg: LatentVector) -> Result<Self> {
        ensure_dim("pair latent width", h_pos.dim(), h_neg.dim())?;
        Ok(Self {
            pair_id,
            layer_index,
            h_pos,
            h_neg,
            z_pos: None,
            z_neg: None,
        })
    }

    pub fn m(&self) -> usize {
        self.h_pos.dim()
    }
}

/// Render `n_pairs` prompt pairs.
pub fn build_pairs(
    contents: &[String],
    spec: &InstructionSpec,
    mode: PositionMode,
    n_pairs: usize,
    separator: &str,
) -> Result<Vec<PairManifestEntry>> {
    if contents.is_empty() {
        return Err(Error::Empty("contents"));
    }
    if n_pairs == 0 {
        return Err(Error::Empty("n_pairs"));
    }
    spec.validate()?;
    for (i, c) in contents.iter().enumerate() {
        if let Some(v) = spec.variants.iter().position(|v| c.contains(v.as_str())) {
            return Err(Error::InvalidConfig(format!(
                "content {i} already contains instruction variant {v}"
            )));
        }
    }
    let entries = (0..n_pairs)
        .map(|pair_id| {
            let content = &contents[pair_id % contents.len()];
            let variant_index = pair_id % spec.variants.len();
            let variant = &spec.variants[variant_index];
            let positive_prompt = match mode {
                PositionMode::PreInstruction => format!("{variant}{separator}{content}"),
                PositionMode::PostInstruction => format!("{content}{separator}{variant}"),
            };
            PairManifestEntry {
                pair_id,
                content_text: content.clone(),
                variant_index,
                position_mode: mode,
                positive_prompt,
                negative_prompt: content.clone(),
            }
        })
        .collect();
    Ok(entries)
}

/// Bundle tensor name of the positive residual vector for `pair_id`.
pub fn z_pos_name(pair_id: usize) -> String {
    format!("z_pos/{pair_id}")
}

/// Bundle tensor name of the negative residual vector for `pair_id`.
pub fn z_neg_name(pair_id: usize) -> String {
    format!("z_neg/{pair_id}")
}

fn lookup(activations: &TensorBundle, name: String, pair_id: usize, d: usize) -> Result<DenseVector> {
    let t = activations.get(&name).ok_or_else(|| {
        Error::MissingTensor(format!("{name} (pair_id {pair_id})"))
    })?;
    let z = t.to_vector()?;
    ensure_dim("residual vector", d, z.dim())?;
    Ok(z)
}

/// Encode a single manifest entry's residual pair.
pub fn encode_pair(entry: &PairManifestEntry, activations: &TensorBundle, params: &SaeParams) -> Result<PairRecord> {
    let z_pos = lookup(activations, z_pos_name(entry.pair_id), entry.pair_id, params.d())?;
    let z_neg = lookup(activations, z_neg_name(entry.pair_id), entry.pair_id, params.d())?;
    let mut rec = PairRecord::new(
        entry.pair_id,
        params.layer_index,
        params.encode(&z_pos)?,
        params.encode(&z_neg)?,
    )?;
    rec.z_pos = Some(z_pos);
    rec.z_neg = Some(z_neg);
    Ok(rec)
}

/// Encode every manifest entry, preserving manifest order.
pub fn encode_pairs(
    manifest: &[PairManifestEntry],
    activations: &TensorBundle,
    params: &SaeParams,
) -> Result<Vec<PairRecord>> {
    manifest
        .iter()
        .map(|e| encode_pair(e, activations, params))
        .collect()
}

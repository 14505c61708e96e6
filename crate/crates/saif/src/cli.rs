// SPDX-License-Identifier: MIT OR Apache-2.0

//! The `saif` command line.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use saif_core::eval::{accuracies, aggregate_ballot, DegeneracyConfig, EvalReport, Grade, JudgeRule, PositionReport};
use saif_core::pairset::{build_pairs, z_neg_name, z_pos_name, InstructionSpec, PairRecord, PositionMode};
use saif_core::sae::SaeParams;
use saif_core::select::{
    correlation_matrices, logit_attribution, select_top_k, sensitivity_scores, FeatureSet, ProbabilityBasis,
    SensitivityTable,
};
use saif_core::steer::{beta_preset_narrow, beta_preset_wide, make_steering_set, DEFAULT_BETA, DEFAULT_K};
use saif_core::tensor::TensorBundle;
use saif_core::toy::{generate, PlantConfig};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::artifacts::{
    composite_to_bundle, correlation_csv, rows_csv, FeaturesFile, GroundTruthFile, SteerConfig, SCHEMA_VERSION,
};
use crate::bundle;
use crate::error::{Error, Result};
use crate::files::{self, read_json};
use crate::manifest::{load_contents, load_instruction_spec, load_manifest, manifest_to_bytes};
use crate::parallel::{encode_pairs_par, steer_bundle_par};
use crate::rundir::RunDir;
use crate::sae_io::{load_sae, sae_to_bundle, SaeConfig, CONFIG_FILE};
use crate::transcript::{load_outputs, load_transcript};

#[derive(Debug, Parser)]
#[command(name = "saif", version, about = "Find and steer instruction-following SAE features")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render positive/negative prompt pairs into manifest.jsonl.
    Pairs(PairsArgs),
    /// Generate a synthetic dataset with planted instruction latents.
    Synth(SynthArgs),
    /// Score latents and write the top-k feature set.
    Select(SelectArgs),
    /// Build a composite steering vector from a feature set.
    Steer(SteerArgs),
    /// Aggregate judge votes or keyword grades into accuracies.
    Eval(EvalArgs),
    /// Select at several k.
    SweepK(SweepKArgs),
    /// Build steering vectors at several beta.
    SweepBeta(SweepBetaArgs),
    /// Run selection independently per layer.
    Layers(LayersArgs),
    /// Compare pre- and post-instruction evaluation reports.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Pre,
    Post,
}

impl From<Position> for PositionMode {
    fn from(p: Position) -> Self {
        match p {
            Position::Pre => PositionMode::PreInstruction,
            Position::Post => PositionMode::PostInstruction,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaPreset {
    Wide,
    Narrow,
}

#[derive(Debug, Args, Serialize)]
pub struct PairsArgs {
    /// Content strings, one per line.
    #[arg(long)]
    pub contents: PathBuf,
    /// Instruction spec JSON: {"task_tag", "variants", "keyword"}.
    #[arg(long)]
    pub instruction: PathBuf,
    #[arg(long, value_enum, default_value = "post")]
    pub position: Position,
    #[arg(long, default_value_t = 800)]
    pub n_pairs: usize,
    #[arg(long, default_value = " ")]
    pub separator: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub d: usize,
    #[arg(long, default_value_t = 1024)]
    pub m: usize,
    /// Number of planted latents, spread evenly over m.
    #[arg(long, default_value_t = 8)]
    pub n_planted: usize,
    /// Explicit planted latents; overrides --n-planted.
    #[arg(long, value_delimiter = ',')]
    pub planted: Vec<usize>,
    #[arg(long, default_value_t = 0.9)]
    pub p_on: f64,
    #[arg(long, default_value_t = 0.05)]
    pub p_spurious: f64,
    #[arg(long, default_value_t = 3.0)]
    pub strength_mean: f32,
    #[arg(long, default_value_t = 1.0)]
    pub strength_sd: f32,
    #[arg(long, default_value_t = 800)]
    pub n_pairs: usize,
    #[arg(long, value_enum, default_value = "post")]
    pub position: Position,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SaeInput {
    /// SAE bundle (.saif).
    #[arg(long)]
    pub sae: PathBuf,
    /// SAE config; defaults to sae_config.json next to the bundle.
    #[arg(long)]
    pub sae_config: Option<PathBuf>,
}

impl SaeInput {
    fn load(&self) -> Result<SaeParams> {
        load_sae(&self.sae, self.sae_config.as_deref())
    }

    fn paths(&self) -> Vec<PathBuf> {
        let config = self
            .sae_config
            .clone()
            .unwrap_or_else(|| files::sibling(&self.sae, CONFIG_FILE));
        vec![self.sae.clone(), config]
    }
}

#[derive(Debug, Args, Serialize)]
pub struct PairInput {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Residual activations bundle with z_pos/<id> and z_neg/<id>.
    #[arg(long)]
    pub acts: PathBuf,
    #[command(flatten)]
    pub sae: SaeInput,
    /// Use all 2N samples as the activation-probability denominator.
    #[arg(long)]
    pub p_all_samples: bool,
}

impl PairInput {
    fn basis(&self) -> ProbabilityBasis {
        if self.p_all_samples {
            ProbabilityBasis::AllSamples
        } else {
            ProbabilityBasis::PositivePairs
        }
    }

    fn load(&self) -> Result<(SaeParams, Vec<PairRecord>)> {
        let params = self.sae.load()?;
        let pairs = encode_inputs(&self.manifest, &self.acts, &params)?;
        Ok((params, pairs))
    }

    fn paths(&self) -> Vec<PathBuf> {
        let mut p = vec![self.manifest.clone(), self.acts.clone()];
        p.extend(self.sae.paths());
        p
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    #[command(flatten)]
    pub input: PairInput,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Bundle holding the unembedding `w_u` with shape [vocab, d].
    #[arg(long)]
    pub unembed: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub top_n: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SteerArgs {
    /// features.json from `select`.
    #[arg(long)]
    pub features: PathBuf,
    #[command(flatten)]
    pub sae: SaeInput,
    #[arg(long, default_value_t = DEFAULT_BETA, allow_hyphen_values = true)]
    pub beta: f32,
    #[arg(long, default_value = "")]
    pub source_task: String,
    /// Also steer every vector in this bundle into steered.saif.
    #[arg(long)]
    pub apply: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    /// JSONL of five judge votes per item.
    #[arg(long, conflicts_with_all = ["outputs", "keyword"])]
    pub transcript: Option<PathBuf>,
    /// JSONL of generated outputs, graded by keyword.
    #[arg(long, requires = "keyword")]
    pub outputs: Option<PathBuf>,
    #[arg(long)]
    pub keyword: Option<String>,
    /// Instruction spec whose variants count as echoes of the instruction.
    #[arg(long)]
    pub instruction: Option<PathBuf>,
    #[arg(long, default_value = "")]
    pub condition: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepKArgs {
    #[command(flatten)]
    pub input: PairInput,
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,15,20,25,30")]
    pub ks: Vec<usize>,
    /// ground_truth.json from `synth`, to report recovery.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepBetaArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[command(flatten)]
    pub sae: SaeInput,
    #[arg(long, value_enum, default_value = "wide", conflicts_with = "betas")]
    pub preset: BetaPreset,
    /// Explicit beta values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub betas: Vec<f32>,
    #[arg(long, default_value = "")]
    pub source_task: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct LayersArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// One layer: index, SAE bundle and activations bundle. Repeatable.
    #[arg(long = "layer", num_args = 3, value_names = ["INDEX", "SAE", "ACTS"], required = true)]
    pub layer: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long)]
    pub p_all_samples: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// report.json of the pre-instruction condition.
    #[arg(long)]
    pub pre: PathBuf,
    #[arg(long)]
    pub post: PathBuf,
    /// report.json of the unsteered baseline.
    #[arg(long)]
    pub original: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pairs(a) => pairs(a),
        Command::Synth(a) => synth(a),
        Command::Select(a) => select(a),
        Command::Steer(a) => steer(a),
        Command::Eval(a) => eval(a),
        Command::SweepK(a) => sweep_k(a),
        Command::SweepBeta(a) => sweep_beta(a),
        Command::Layers(a) => layers(a),
        Command::Report(a) => report(a),
    }
}

fn params_json<T: Serialize>(args: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(args)?)
}

fn path_refs(paths: &[PathBuf]) -> Vec<&Path> {
    paths.iter().map(PathBuf::as_path).collect()
}

fn encode_inputs(manifest: &Path, acts: &Path, params: &SaeParams) -> Result<Vec<PairRecord>> {
    let manifest = load_manifest(manifest)?;
    let acts = files::load_bundle(acts)?;
    let pairs = encode_pairs_par(&manifest, &acts, params)?;
    if pairs.is_empty() {
        return Err(saif_core::Error::Empty("pair manifest").into());
    }
    Ok(pairs)
}

fn pairs(a: PairsArgs) -> Result<()> {
    let contents = load_contents(&a.contents)?;
    let spec = load_instruction_spec(&a.instruction)?;
    let entries = build_pairs(&contents, &spec, a.position.into(), a.n_pairs, &a.separator)?;
    let mut run = RunDir::create(&a.out)?;
    run.write("manifest.jsonl", &manifest_to_bytes(&entries))?;
    let inputs = [a.contents.clone(), a.instruction.clone()];
    run.finish("pairs", params_json(&a)?, &path_refs(&inputs))?;
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let planted = if a.planted.is_empty() {
        PlantConfig::spread_planted(a.seed, a.m, a.n_planted)
    } else {
        a.planted.clone()
    };
    let config = PlantConfig {
        seed: a.seed,
        d: a.d,
        m: a.m,
        planted_latents: planted,
        p_on: a.p_on,
        p_spurious: a.p_spurious,
        strength_mean: a.strength_mean,
        strength_sd: a.strength_sd,
    };
    let ds = generate(&config, a.n_pairs)?;

    let contents: Vec<String> = (0..a.n_pairs).map(|i| format!("synthetic content {i}")).collect();
    let spec = InstructionSpec {
        task_tag: "synthetic".into(),
        variants: vec!["planted instruction".into()],
        keyword: None,
    };
    let entries = build_pairs(&contents, &spec, a.position.into(), a.n_pairs, " ")?;

    let mut acts = TensorBundle::new();
    for p in &ds.pairs {
        let (Some(zp), Some(zn)) = (&p.z_pos, &p.z_neg) else {
            unreachable!("synthetic pairs carry residual vectors");
        };
        acts.insert(z_pos_name(p.pair_id), zp.clone());
        acts.insert(z_neg_name(p.pair_id), zn.clone());
    }

    let mut run = RunDir::create(&a.out)?;
    run.write("manifest.jsonl", &manifest_to_bytes(&entries))?;
    run.write("acts.saif", &bundle::to_bytes(&acts))?;
    run.write("sae.saif", &bundle::to_bytes(&sae_to_bundle(&ds.params)))?;
    run.write_json(CONFIG_FILE, &SaeConfig::describe(&ds.params))?;
    run.write_json("ground_truth.json", &GroundTruthFile::from_dataset(&ds))?;
    run.finish("synth", params_json(&a)?, &[])?;
    Ok(())
}

#[derive(Serialize)]
struct TokenLogit {
    token: usize,
    logit: f32,
}

#[derive(Serialize)]
struct FeatureLogits {
    latent: usize,
    top: Vec<TokenLogit>,
}

/// features.json plus the two correlation CSVs (when k >= 2).
fn write_selection(
    run: &mut RunDir,
    prefix: &str,
    pairs: &[PairRecord],
    set: &FeatureSet,
    layer_index: usize,
    basis: ProbabilityBasis,
) -> Result<()> {
    let file = FeaturesFile::from_set(set, pairs.len(), layer_index, basis);
    run.write_json(&format!("{prefix}features.json"), &file)?;
    if set.k() >= 2 {
        let (prob, strength) = correlation_matrices(pairs, set)?;
        run.write(
            &format!("{prefix}corr_probability.csv"),
            &correlation_csv(&set.ranked_latents, &prob)?,
        )?;
        run.write(
            &format!("{prefix}corr_strength.csv"),
            &correlation_csv(&set.ranked_latents, &strength)?,
        )?;
    }
    Ok(())
}

fn select_from(table: &SensitivityTable, pairs: &[PairRecord], params: &SaeParams, k: usize, basis: ProbabilityBasis) -> Result<FeatureSet> {
    let mut set = select_top_k(table, params, k)?;
    set.attach_stats(pairs, basis)?;
    Ok(set)
}

fn select(a: SelectArgs) -> Result<()> {
    let (params, pairs) = a.input.load()?;
    let basis = a.input.basis();
    let table = sensitivity_scores(&pairs)?;
    let set = select_from(&table, &pairs, &params, a.k, basis)?;

    let attribution = match &a.unembed {
        Some(path) => {
            let w_u = files::load_bundle(path)?.require("w_u")?.to_matrix()?;
            let tops = logit_attribution(&set, &w_u, a.top_n)?;
            Some(
                set.ranked_latents
                    .iter()
                    .zip(tops)
                    .map(|(&latent, top)| FeatureLogits {
                        latent,
                        top: top.into_iter().map(|(token, logit)| TokenLogit { token, logit }).collect(),
                    })
                    .collect::<Vec<_>>(),
            )
        }
        None => None,
    };

    let mut run = RunDir::create(&a.out)?;
    write_selection(&mut run, "", &pairs, &set, params.layer_index, basis)?;
    if let Some(attr) = attribution {
        run.write_json("logit_attribution.json", &attr)?;
    }
    let mut inputs = a.input.paths();
    inputs.extend(a.unembed.clone());
    run.finish("select", params_json(&a)?, &path_refs(&inputs))?;
    Ok(())
}

fn load_features(path: &Path, params: &SaeParams) -> Result<FeatureSet> {
    let file: FeaturesFile = read_json(path)?;
    file.to_feature_set(params)
}

fn steer(a: SteerArgs) -> Result<()> {
    let params = a.sae.load()?;
    let set = load_features(&a.features, &params)?;
    let (_, composite) = make_steering_set(&set, a.beta, &a.source_task, params.layer_index)?;
    let steered = match &a.apply {
        Some(path) => Some(steer_bundle_par(&files::load_bundle(path)?, &composite)?),
        None => None,
    };

    let mut run = RunDir::create(&a.out)?;
    run.write("composite.saif", &bundle::to_bytes(&composite_to_bundle(&composite)))?;
    run.write_json("steer_config.json", &SteerConfig::describe(&composite, &a.source_task))?;
    if let Some(b) = steered {
        run.write("steered.saif", &bundle::to_bytes(&b))?;
    }
    let mut inputs = vec![a.features.clone()];
    inputs.extend(a.sae.paths());
    inputs.extend(a.apply.clone());
    run.finish("steer", params_json(&a)?, &path_refs(&inputs))?;
    Ok(())
}

#[derive(Serialize)]
struct ItemGrade {
    item_id: String,
    grade: Grade,
}

fn eval(a: EvalArgs) -> Result<()> {
    let graded: Vec<(String, Grade)> = match (&a.transcript, &a.outputs, &a.keyword) {
        (Some(t), _, _) => load_transcript(t)?
            .into_iter()
            .map(|(id, ballot)| (id, aggregate_ballot(&ballot)))
            .collect(),
        (None, Some(o), Some(kw)) => {
            let instructions = match &a.instruction {
                Some(p) => load_instruction_spec(p)?.variants,
                None => Vec::new(),
            };
            let rule = JudgeRule::Keyword {
                keyword: kw.clone(),
                degeneracy: DegeneracyConfig::default(),
            };
            load_outputs(o)?
                .into_iter()
                .map(|(id, out)| {
                    let g = rule.grade(&out, &instructions).expect("keyword rule grades locally");
                    (id, g)
                })
                .collect()
        }
        _ => {
            return Err(Error::Format(
                "eval needs --transcript, or --outputs with --keyword".into(),
            ))
        }
    };
    let grades: Vec<Grade> = graded.iter().map(|(_, g)| *g).collect();
    let report = accuracies(&grades, &a.condition)?;

    let mut run = RunDir::create(&a.out)?;
    run.write_json("report.json", &report)?;
    let mut lines = Vec::new();
    for (item_id, grade) in graded {
        serde_json::to_writer(&mut lines, &ItemGrade { item_id, grade })?;
        lines.push(b'\n');
    }
    run.write("grades.jsonl", &lines)?;
    let inputs: Vec<PathBuf> = [&a.transcript, &a.outputs, &a.instruction]
        .into_iter()
        .flatten()
        .cloned()
        .collect();
    run.finish("eval", params_json(&a)?, &path_refs(&inputs))?;
    Ok(())
}

/// One row of sweep_k.json / sweep_k.csv.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepKRow {
    pub k: usize,
    pub min_c_score: f64,
    pub mean_c_score: f64,
    pub mean_strength: f64,
    /// Planted latents among the top k; absent without ground truth.
    pub planted_found: Option<usize>,
    /// `planted_found / number planted`.
    pub recall: Option<f64>,
    /// `planted_found / k`.
    pub precision: Option<f64>,
}

fn sweep_k(a: SweepKArgs) -> Result<()> {
    if a.ks.is_empty() {
        return Err(Error::Format("--ks is empty".into()));
    }
    let (params, pairs) = a.input.load()?;
    let basis = a.input.basis();
    let planted: Option<BTreeSet<usize>> = match &a.ground_truth {
        Some(p) => Some(read_json::<GroundTruthFile>(p)?.config.planted_latents.into_iter().collect()),
        None => None,
    };
    let table = sensitivity_scores(&pairs)?;

    let mut run = RunDir::create(&a.out)?;
    let mut rows = Vec::new();
    for &k in &a.ks {
        let set = select_from(&table, &pairs, &params, k, basis)?;
        let file = FeaturesFile::from_set(&set, pairs.len(), params.layer_index, basis);
        run.write_json(&format!("features_k{k:03}.json"), &file)?;
        let found = planted
            .as_ref()
            .map(|p| set.ranked_latents.iter().filter(|j| p.contains(j)).count());
        let n_planted = planted.as_ref().map_or(0, BTreeSet::len);
        rows.push(SweepKRow {
            k,
            min_c_score: set.c_scores.iter().copied().fold(f64::INFINITY, f64::min),
            mean_c_score: set.c_scores.iter().sum::<f64>() / k as f64,
            mean_strength: set.stats.iter().map(|s| s.mu).sum::<f64>() / k as f64,
            planted_found: found,
            recall: found.map(|f| if n_planted == 0 { 0.0 } else { f as f64 / n_planted as f64 }),
            precision: found.map(|f| f as f64 / k as f64),
        });
    }
    run.write_json("sweep_k.json", &json!({ "schema_version": SCHEMA_VERSION, "rows": rows }))?;
    run.write("sweep_k.csv", &rows_csv(&rows)?)?;
    let mut inputs = a.input.paths();
    inputs.extend(a.ground_truth.clone());
    run.finish("sweep-k", params_json(&a)?, &path_refs(&inputs))?;
    Ok(())
}

/// One row of sweep_beta.json / sweep_beta.csv.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepBetaRow {
    pub index: usize,
    pub beta: f32,
    pub file: String,
    pub delta_norm: f32,
    pub min_alpha: f32,
    pub max_alpha: f32,
}

fn sweep_beta(a: SweepBetaArgs) -> Result<()> {
    let params = a.sae.load()?;
    let set = load_features(&a.features, &params)?;
    let betas = if !a.betas.is_empty() {
        a.betas.clone()
    } else {
        match a.preset {
            BetaPreset::Wide => beta_preset_wide(),
            BetaPreset::Narrow => beta_preset_narrow(),
        }
    };
    let composites = saif_core::steer::sweep_beta(&set, &betas, &a.source_task, params.layer_index)?;

    let mut run = RunDir::create(&a.out)?;
    let mut rows = Vec::new();
    for (index, c) in composites.iter().enumerate() {
        let file = format!("composite_b{index:02}.saif");
        run.write(&file, &bundle::to_bytes(&composite_to_bundle(c)))?;
        run.write_json(&format!("steer_config_b{index:02}.json"), &SteerConfig::describe(c, &a.source_task))?;
        let alphas = c.members.iter().map(|m| m.1);
        rows.push(SweepBetaRow {
            index,
            beta: c.beta,
            file,
            delta_norm: c.delta.norm(),
            min_alpha: alphas.clone().fold(f32::INFINITY, f32::min),
            max_alpha: alphas.fold(f32::NEG_INFINITY, f32::max),
        });
    }
    run.write_json("sweep_beta.json", &json!({ "schema_version": SCHEMA_VERSION, "rows": rows }))?;
    run.write("sweep_beta.csv", &rows_csv(&rows)?)?;
    let mut inputs = vec![a.features.clone()];
    inputs.extend(a.sae.paths());
    run.finish("sweep-beta", params_json(&a)?, &path_refs(&inputs))?;
    Ok(())
}

/// One row of layers_summary.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRow {
    pub layer_index: usize,
    pub features: String,
    pub top_latent: usize,
    pub top_c_score: f64,
    pub mean_c_score: f64,
}

fn layers(a: LayersArgs) -> Result<()> {
    let basis = if a.p_all_samples {
        ProbabilityBasis::AllSamples
    } else {
        ProbabilityBasis::PositivePairs
    };
    let mut specs = Vec::new();
    for chunk in a.layer.chunks(3) {
        let index: usize = chunk[0]
            .parse()
            .map_err(|_| Error::Format(format!("layer index `{}` is not a number", chunk[0])))?;
        if specs.iter().any(|(i, _, _)| *i == index) {
            return Err(Error::Format(format!("layer {index} given twice")));
        }
        specs.push((index, PathBuf::from(&chunk[1]), PathBuf::from(&chunk[2])));
    }

    let mut results = Vec::new();
    for (index, sae, acts) in &specs {
        let mut params = load_sae(sae, None)?;
        params.layer_index = *index;
        let pairs = encode_inputs(&a.manifest, acts, &params)?;
        let table = sensitivity_scores(&pairs)?;
        let set = select_from(&table, &pairs, &params, a.k, basis)?;
        results.push((*index, pairs, set));
    }

    let mut run = RunDir::create(&a.out)?;
    let mut rows = Vec::new();
    for (index, pairs, set) in &results {
        let prefix = format!("layer_{index:03}/");
        write_selection(&mut run, &prefix, pairs, set, *index, basis)?;
        rows.push(LayerRow {
            layer_index: *index,
            features: format!("{prefix}features.json"),
            top_latent: set.ranked_latents[0],
            top_c_score: set.c_scores[0],
            mean_c_score: set.c_scores.iter().sum::<f64>() / set.k() as f64,
        });
    }
    run.write_json("layers_summary.json", &json!({ "schema_version": SCHEMA_VERSION, "layers": rows }))?;
    let mut inputs = vec![a.manifest.clone()];
    for (_, sae, acts) in &specs {
        inputs.push(sae.clone());
        inputs.push(files::sibling(sae, CONFIG_FILE));
        inputs.push(acts.clone());
    }
    run.finish("layers", params_json(&a)?, &path_refs(&inputs))?;
    Ok(())
}

#[derive(Serialize)]
struct PositionRow<'a> {
    condition: &'a str,
    n_items: usize,
    strict_acc: f64,
    loose_acc: f64,
    a: usize,
    b: usize,
    c: usize,
}

impl<'a> PositionRow<'a> {
    fn new(condition: &'a str, r: &EvalReport) -> Self {
        Self {
            condition,
            n_items: r.n_items,
            strict_acc: r.strict_acc,
            loose_acc: r.loose_acc,
            a: r.grade_counts.a,
            b: r.grade_counts.b,
            c: r.grade_counts.c,
        }
    }
}

fn report(a: ReportArgs) -> Result<()> {
    let pre: EvalReport = read_json(&a.pre)?;
    let post: EvalReport = read_json(&a.post)?;
    let original = a.original.as_deref().map(read_json::<EvalReport>).transpose()?;

    let mut rows = vec![
        PositionRow::new("pre_instruction", &pre),
        PositionRow::new("post_instruction", &post),
    ];
    if let Some(o) = &original {
        rows.push(PositionRow::new("original", o));
    }
    let csv = rows_csv(&rows)?;
    let report = PositionReport {
        pre_instruction: pre.clone(),
        post_instruction: post.clone(),
        original: original.clone(),
    };

    let mut run = RunDir::create(&a.out)?;
    run.write_json("position_report.json", &report)?;
    run.write("position_report.csv", &csv)?;
    let mut inputs = vec![a.pre.clone(), a.post.clone()];
    inputs.extend(a.original.clone());
    run.finish("report", params_json(&a)?, &path_refs(&inputs))?;
    Ok(())
}

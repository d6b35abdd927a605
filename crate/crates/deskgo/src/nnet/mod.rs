//! Policy/value networks: a small CNN and a small vision transformer over a
//! common reverse-mode tensor core, trained with momentum SGD.
//!
//! Networks consume [`crate::features::FeatureTensor`]s and emit policy
//! logits over `area + 1` moves (row-major vertices, then pass) plus a tanh
//! value in (−1, 1), both from the mover's perspective. Output heads start at
//! zero, so a freshly initialized net plays the uniform policy with value 0.
//! Training runs in f32; gradient verification re-runs the same graph in f64
//! against central finite differences.

pub mod checkpoint;
pub mod gradcheck;
pub mod model;
pub mod real;
pub mod tape;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::{FeatureTensor, GLOBAL_FEATURES, SPATIAL_PLANES};
use model::{build_graph, parameter_specs, Init};
use real::Real;
use tape::{Tape, TensorRef};

pub use checkpoint::{load_checkpoint, save_checkpoint};

/// Trunk architecture selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backbone {
    Cnn,
    Vit,
}

/// Everything that determines parameter shapes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub backbone: Backbone,
    /// Residual blocks (CNN) or transformer blocks (ViT).
    pub blocks: usize,
    /// Channel width (CNN) or embedding width (ViT).
    pub channels_or_embed: usize,
    /// ViT patch edge; ignored by the CNN.
    pub patch_size: usize,
    /// ViT attention heads; ignored by the CNN.
    pub heads: usize,
    /// ViT feed-forward width; ignored by the CNN.
    pub mlp_dim: usize,
    pub input_planes: usize,
    pub input_globals: usize,
    /// Feature frame edge; also fixes the ViT position-embedding grid.
    pub max_board: usize,
}

impl NetworkConfig {
    /// Desk-scale CNN default: 4 residual blocks of 32 channels.
    pub fn cnn(blocks: usize, channels: usize, max_board: usize) -> NetworkConfig {
        NetworkConfig {
            backbone: Backbone::Cnn,
            blocks,
            channels_or_embed: channels,
            patch_size: 1,
            heads: 1,
            mlp_dim: channels,
            input_planes: SPATIAL_PLANES,
            input_globals: GLOBAL_FEATURES,
            max_board,
        }
    }

    /// Desk-scale ViT default: 4 blocks, embed 64, 4 heads, patch 2.
    pub fn vit(
        blocks: usize,
        embed: usize,
        heads: usize,
        mlp_dim: usize,
        patch_size: usize,
        max_board: usize,
    ) -> NetworkConfig {
        NetworkConfig {
            backbone: Backbone::Vit,
            blocks,
            channels_or_embed: embed,
            patch_size,
            heads,
            mlp_dim,
            input_planes: SPATIAL_PLANES,
            input_globals: GLOBAL_FEATURES,
            max_board,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.blocks == 0 {
            return Err("blocks must be >= 1".into());
        }
        if self.channels_or_embed == 0 {
            return Err("channels_or_embed must be >= 1".into());
        }
        if self.patch_size == 0 {
            return Err("patch_size must be >= 1".into());
        }
        if self.backbone == Backbone::Vit {
            if self.channels_or_embed % self.heads != 0 {
                return Err("embed width must be divisible by heads".into());
            }
            if self.mlp_dim < self.channels_or_embed {
                return Err("mlp_dim must be >= embed width".into());
            }
        }
        if !(crate::rules::MIN_BOARD..=crate::rules::MAX_BOARD).contains(&self.max_board) {
            return Err(format!("max_board {} outside 5..=19", self.max_board));
        }
        Ok(())
    }
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig::cnn(4, 32, 9)
    }
}

/// Named parameter tensors plus the config that shapes them.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParameters {
    pub config: NetworkConfig,
    pub step_count: u64,
    pub tensors: BTreeMap<String, Vec<f32>>,
}

impl NetworkParameters {
    /// He-initialized trunk, zero-initialized output heads.
    pub fn init(config: NetworkConfig, seed: u64) -> NetworkParameters {
        config.validate().expect("invalid network config");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut tensors = BTreeMap::new();
        for (name, len, init) in parameter_specs(&config) {
            let data = match init {
                Init::Zero => vec![0.0; len],
                Init::One => vec![1.0; len],
                Init::He { fan_in } => {
                    let std = (2.0 / fan_in as f64).sqrt();
                    (0..len).map(|_| (normal(&mut rng) * std) as f32).collect()
                }
                Init::Small => (0..len).map(|_| (normal(&mut rng) * 0.02) as f32).collect(),
            };
            tensors.insert(name, data);
        }
        NetworkParameters {
            config,
            step_count: 0,
            tensors,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors.values().map(Vec::len).sum()
    }
}

/// Standard normal via Box-Muller (keeps the dependency surface small).
pub(crate) fn normal(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Network evaluation of one position.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkOutput {
    /// Length `area + 1`: row-major board vertices, then pass.
    pub policy_logits: Vec<f32>,
    /// Mover's expected outcome in (−1, 1).
    pub value: f32,
}

impl NetworkOutput {
    /// Softmax of the policy logits.
    pub fn policy(&self) -> Vec<f32> {
        let m = self
            .policy_logits
            .iter()
            .cloned()
            .fold(f32::NEG_INFINITY, f32::max);
        let exps: Vec<f32> = self.policy_logits.iter().map(|&z| (z - m).exp()).collect();
        let sum: f32 = exps.iter().sum();
        exps.into_iter().map(|e| e / sum).collect()
    }
}

/// One training example.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingRow {
    pub features: FeatureTensor,
    /// Distribution over `area + 1` moves of the row's board size.
    pub policy_target: Vec<f32>,
    /// ±1 game outcome or a move-limit utility, mover's perspective.
    pub value_target: f32,
    pub weight: f32,
}

/// A batch of training rows; mixed board sizes are allowed.
#[derive(Clone, Debug, Default)]
pub struct TrainingBatch {
    pub rows: Vec<TrainingRow>,
}

impl TrainingBatch {
    pub fn validate(&self) -> Result<(), String> {
        for (i, row) in self.rows.iter().enumerate() {
            let area = row.features.board_size * row.features.board_size;
            if row.policy_target.len() != area + 1 {
                return Err(format!("row {i}: policy target length mismatch"));
            }
            let sum: f32 = row.policy_target.iter().sum();
            if row.policy_target.iter().any(|&p| p < 0.0) || (sum - 1.0).abs() > 1e-5 {
                return Err(format!("row {i}: policy target is not a distribution"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum NnetError {
    #[error("input shape does not match the network config")]
    ShapeMismatch,
    #[error("training loss is not finite")]
    NonFiniteLoss,
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("unsupported checkpoint format version {0}")]
    VersionMismatch(u32),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Weight of the squared value error relative to the policy cross-entropy.
pub const DEFAULT_VALUE_WEIGHT: f64 = 1.5;

fn check_features(config: &NetworkConfig, f: &FeatureTensor) -> Result<(), NnetError> {
    if f.max_board != config.max_board
        || f.board_size > config.max_board
        || config.input_planes != SPATIAL_PLANES
        || config.input_globals != GLOBAL_FEATURES
    {
        return Err(NnetError::ShapeMismatch);
    }
    Ok(())
}

/// Registers all parameters on a tape; `tracked` enables gradients.
fn register_params<R: Real>(
    tape: &mut Tape<R>,
    tensors: &BTreeMap<String, Vec<R>>,
    tracked: bool,
) -> BTreeMap<String, TensorRef> {
    tensors
        .iter()
        .map(|(name, data)| {
            let values = data.clone();
            let r = if tracked {
                tape.param(values)
            } else {
                tape.constant(values)
            };
            (name.clone(), r)
        })
        .collect()
}

/// Single-position inference.
pub fn forward(params: &NetworkParameters, features: &FeatureTensor) -> Result<NetworkOutput, NnetError> {
    Ok(forward_batch(params, std::slice::from_ref(features))?.remove(0))
}

/// Batched inference; positions may mix board sizes (grouped internally),
/// outputs come back in input order.
pub fn forward_batch(
    params: &NetworkParameters,
    features: &[FeatureTensor],
) -> Result<Vec<NetworkOutput>, NnetError> {
    for f in features {
        check_features(&params.config, f)?;
    }
    let mut outputs: Vec<Option<NetworkOutput>> = vec![None; features.len()];
    for (_, indices) in group_by_size(features) {
        let group: Vec<&FeatureTensor> = indices.iter().map(|&i| &features[i]).collect();
        let mut tape: Tape<f32> = Tape::new();
        let refs = register_params(&mut tape, &params.tensors, false);
        let out = build_graph(&mut tape, &params.config, &refs, &group);
        let logits = tape.value(out.policy_logits);
        let values = tape.value(out.value);
        let width = out.board_size * out.board_size + 1;
        for (row, &i) in indices.iter().enumerate() {
            outputs[i] = Some(NetworkOutput {
                policy_logits: logits[row * width..(row + 1) * width].to_vec(),
                value: values[row],
            });
        }
    }
    Ok(outputs.into_iter().map(Option::unwrap).collect())
}

fn group_by_size(features: &[FeatureTensor]) -> BTreeMap<usize, Vec<usize>> {
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, f) in features.iter().enumerate() {
        groups.entry(f.board_size).or_default().push(i);
    }
    groups
}

/// Scalar re-implementation of the training loss for one row:
/// cross-entropy of softmax(logits) against the policy target plus
/// `value_weight` times the squared value error. This is the reference the
/// tape-built loss is tested against.
pub fn loss(
    output: &NetworkOutput,
    policy_target: &[f32],
    value_target: f32,
    value_weight: f64,
) -> f64 {
    assert_eq!(output.policy_logits.len(), policy_target.len());
    let z: Vec<f64> = output.policy_logits.iter().map(|&x| x as f64).collect();
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|&x| (x - m).exp()).sum::<f64>().ln();
    let ce: f64 = policy_target
        .iter()
        .zip(&z)
        .map(|(&t, &zi)| t as f64 * (lse - zi))
        .sum();
    let dv = output.value as f64 - value_target as f64;
    ce + value_weight * dv * dv
}

/// Mean weighted loss and its exact gradients for every parameter tensor.
/// The mean is over the row count n: L = (1/n) Σ wᵢ (ceᵢ + value_weight·mseᵢ).
pub fn gradients(
    params: &NetworkParameters,
    batch: &TrainingBatch,
    value_weight: f64,
) -> Result<(f64, BTreeMap<String, Vec<f32>>), NnetError> {
    assert!(!batch.rows.is_empty(), "gradient computation needs rows");
    for row in &batch.rows {
        check_features(&params.config, &row.features)?;
    }
    let (loss, grads) =
        batch_loss_and_grads::<f32>(&params.config, &params.tensors, batch, value_weight, true)?;
    Ok((loss, grads.expect("gradients requested")))
}

/// Generic core shared by f32 training and the f64 finite-difference
/// verifier. With `want_grads` false only the loss is computed.
pub(crate) fn batch_loss_and_grads<R: Real>(
    config: &NetworkConfig,
    tensors: &BTreeMap<String, Vec<R>>,
    batch: &TrainingBatch,
    value_weight: f64,
    want_grads: bool,
) -> Result<(f64, Option<BTreeMap<String, Vec<R>>>), NnetError> {
    let n_total = batch.rows.len();
    let inv_n = 1.0 / n_total as f64;
    let mut total_loss = 0.0f64;
    let mut acc: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let features: Vec<FeatureTensor> = batch.rows.iter().map(|r| r.features.clone()).collect();
    for (_, indices) in group_by_size(&features) {
        let group: Vec<&FeatureTensor> = indices.iter().map(|&i| &features[i]).collect();
        let mut tape: Tape<R> = Tape::new();
        let refs = register_params(&mut tape, tensors, want_grads);
        let out = build_graph(&mut tape, config, &refs, &group);
        let width = out.board_size * out.board_size + 1;
        debug_assert_eq!(out.batch, indices.len());
        let mut targets = Vec::with_capacity(indices.len() * width);
        let mut vtargets = Vec::with_capacity(indices.len());
        let mut weights = Vec::with_capacity(indices.len());
        for &i in &indices {
            let row = &batch.rows[i];
            assert_eq!(
                row.policy_target.len(),
                width,
                "policy target width mismatch"
            );
            targets.extend(row.policy_target.iter().map(|&t| R::from_f64(t as f64)));
            vtargets.push(R::from_f64(row.value_target as f64));
            weights.push(R::from_f64(row.weight as f64));
        }
        let targets = tape.constant(targets);
        let vtargets = tape.constant(vtargets);
        let weights = tape.constant(weights);
        let ce = tape.softmax_cross_entropy(out.policy_logits, targets, width);
        let se = tape.squared_error(out.value, vtargets);
        let se = tape.scale(se, R::from_f64(value_weight));
        let row_loss = tape.add(ce, se);
        let group_loss = tape.weighted_mean(row_loss, weights, R::from_f64(inv_n));
        let lv = tape.value(group_loss)[0].to_f64();
        if !lv.is_finite() {
            return Err(NnetError::NonFiniteLoss);
        }
        total_loss += lv;
        if want_grads {
            let grads = tape.backward(group_loss);
            for (name, r) in &refs {
                if let Some(g) = &grads[r.0] {
                    let slot = acc
                        .entry(name.clone())
                        .or_insert_with(|| vec![0.0f64; g.len()]);
                    for (s, &gv) in slot.iter_mut().zip(g.iter()) {
                        *s += gv.to_f64();
                    }
                } else {
                    acc.entry(name.clone())
                        .or_insert_with(|| vec![0.0f64; tensors[name].len()]);
                }
            }
        }
    }
    let grads = want_grads.then(|| {
        acc.into_iter()
            .map(|(k, v)| (k, v.into_iter().map(R::from_f64).collect()))
            .collect()
    });
    Ok((total_loss, grads))
}

/// Momentum SGD; velocity buffers live here, not in checkpoints.
#[derive(Clone, Debug)]
pub struct SgdOptimizer {
    pub momentum: f64,
    velocity: BTreeMap<String, Vec<f32>>,
}

impl SgdOptimizer {
    pub fn new(momentum: f64) -> SgdOptimizer {
        SgdOptimizer {
            momentum,
            velocity: BTreeMap::new(),
        }
    }

    /// v ← momentum·v + g;  θ ← θ − lr·v;  bumps `step_count`.
    pub fn step(
        &mut self,
        params: &mut NetworkParameters,
        grads: &BTreeMap<String, Vec<f32>>,
        lr: f64,
    ) {
        for (name, tensor) in params.tensors.iter_mut() {
            let g = match grads.get(name) {
                Some(g) => g,
                None => continue,
            };
            let v = self
                .velocity
                .entry(name.clone())
                .or_insert_with(|| vec![0.0; tensor.len()]);
            for i in 0..tensor.len() {
                v[i] = (self.momentum as f32) * v[i] + g[i];
                tensor[i] -= (lr as f32) * v[i];
            }
        }
        params.step_count += 1;
    }
}

/// One optimization step over a batch; returns the batch loss.
pub fn train_step(
    params: &mut NetworkParameters,
    batch: &TrainingBatch,
    optimizer: &mut SgdOptimizer,
    lr: f64,
    value_weight: f64,
) -> Result<f64, NnetError> {
    let (loss, grads) = gradients(params, batch, value_weight)?;
    optimizer.step(params, &grads, lr);
    Ok(loss)
}

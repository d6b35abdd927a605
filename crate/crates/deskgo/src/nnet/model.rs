//! Graph construction for both network backbones plus the shared output
//! heads. One code path serves inference (parameters as untracked constants)
//! and training (parameters as tracked leaves): the caller decides when it
//! registers the tensors on the tape.
//!
//! Both backbones operate on the board-sized crop of the feature frame, with
//! the scalar features broadcast as extra channels at every vertex, so
//! compute scales with the actual board area. The ViT additionally zero-pads
//! the crop up to a patch-size multiple before patchify and takes its learned
//! position embeddings from the top-left corner of the `max_board` patch
//! grid, which is what lets one parameter set serve every board size.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::real::Real;
use super::tape::{Tape, TensorRef};
use super::{Backbone, NetworkConfig};
use crate::features::FeatureTensor;

/// How a parameter tensor is initialized.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Init {
    /// Normal with std sqrt(2 / fan_in).
    He { fan_in: usize },
    Zero,
    One,
    /// Normal with std 0.02 (position embeddings).
    Small,
}

/// Names, lengths, and initializers of every tensor the config requires, in
/// the canonical (sorted) order used by checkpoints and optimizers.
pub fn parameter_specs(config: &NetworkConfig) -> Vec<(String, usize, Init)> {
    let p = config.input_planes + config.input_globals;
    let c = config.channels_or_embed;
    let mut specs: Vec<(String, usize, Init)> = Vec::new();
    match config.backbone {
        Backbone::Cnn => {
            specs.push(("stem.w".into(), 9 * p * c, Init::He { fan_in: 9 * p }));
            specs.push(("stem.b".into(), c, Init::Zero));
            for i in 0..config.blocks {
                specs.push((format!("block{i}.w"), 9 * c * c, Init::He { fan_in: 9 * c }));
                specs.push((format!("block{i}.b"), c, Init::Zero));
            }
        }
        Backbone::Vit => {
            let patch = config.patch_size;
            let token_in = patch * patch * p;
            let d = c;
            let m = config.mlp_dim;
            let tmax = config.max_board.div_ceil(patch);
            specs.push(("embed.w".into(), token_in * d, Init::He { fan_in: token_in }));
            specs.push(("embed.b".into(), d, Init::Zero));
            specs.push(("pos".into(), tmax * tmax * d, Init::Small));
            for i in 0..config.blocks {
                for (suffix, len, init) in [
                    ("ln1.g", d, Init::One),
                    ("ln1.b", d, Init::Zero),
                    ("q.w", d * d, Init::He { fan_in: d }),
                    ("q.b", d, Init::Zero),
                    ("k.w", d * d, Init::He { fan_in: d }),
                    ("k.b", d, Init::Zero),
                    ("v.w", d * d, Init::He { fan_in: d }),
                    ("v.b", d, Init::Zero),
                    ("proj.w", d * d, Init::He { fan_in: d }),
                    ("proj.b", d, Init::Zero),
                    ("ln2.g", d, Init::One),
                    ("ln2.b", d, Init::Zero),
                    ("mlp1.w", d * m, Init::He { fan_in: d }),
                    ("mlp1.b", m, Init::Zero),
                    ("mlp2.w", m * d, Init::He { fan_in: m }),
                    ("mlp2.b", d, Init::Zero),
                ] {
                    specs.push((format!("blk{i}.{suffix}"), len, init));
                }
            }
            specs.push(("final.g".into(), d, Init::One));
            specs.push(("final.b".into(), d, Init::Zero));
            specs.push((
                "unembed.w".into(),
                d * patch * patch * d,
                Init::He { fan_in: d },
            ));
            specs.push(("unembed.b".into(), patch * patch * d, Init::Zero));
        }
    }
    // Shared heads; the output layers start at zero so a fresh net plays the
    // uniform policy with value 0.
    specs.push(("policy.w".into(), c, Init::Zero));
    specs.push(("policy.b".into(), 1, Init::Zero));
    specs.push(("pass.w".into(), c, Init::Zero));
    specs.push(("pass.b".into(), 1, Init::Zero));
    specs.push(("value1.w".into(), c * c, Init::He { fan_in: c }));
    specs.push(("value1.b".into(), c, Init::Zero));
    specs.push(("value2.w".into(), c, Init::Zero));
    specs.push(("value2.b".into(), 1, Init::Zero));
    specs.sort_by(|a, b| a.0.cmp(&b.0));
    specs
}

/// Output handles of a built graph.
pub struct GraphOutput {
    /// n × (size² + 1) policy logits, pass logit last.
    pub policy_logits: TensorRef,
    /// n values in (−1, 1).
    pub value: TensorRef,
    pub board_size: usize,
    pub batch: usize,
}

/// Builds the forward graph for a batch of same-sized positions.
/// `tensors` maps parameter names (as in [`parameter_specs`]) to tape leaves.
pub fn build_graph<R: Real>(
    tape: &mut Tape<R>,
    config: &NetworkConfig,
    tensors: &BTreeMap<String, TensorRef>,
    features: &[&FeatureTensor],
) -> GraphOutput {
    let n = features.len();
    assert!(n > 0, "graph needs at least one input");
    let size = features[0].board_size;
    let planes = config.input_planes;
    let globals = config.input_globals;
    let p = planes + globals;
    let c = config.channels_or_embed;
    let t = |name: &str| -> TensorRef {
        *tensors
            .get(name)
            .unwrap_or_else(|| panic!("missing parameter tensor {name}"))
    };

    // Per-vertex input channels: spatial planes then broadcast globals.
    let mut input = vec![R::ZERO; n * size * size * p];
    for (b, f) in features.iter().enumerate() {
        debug_assert_eq!(f.board_size, size, "mixed board sizes in one graph");
        for r in 0..size {
            for col in 0..size {
                let dst = ((b * size + r) * size + col) * p;
                for pl in 0..planes {
                    input[dst + pl] = R::from_f64(f.at(r, col, pl) as f64);
                }
                for g in 0..globals {
                    input[dst + planes + g] = R::from_f64(f.globals[g] as f64);
                }
            }
        }
    }

    let trunk = match config.backbone {
        Backbone::Cnn => {
            let x = tape.constant(input);
            let stem = tape.conv2d(x, t("stem.w"), n, size, size, p, c, 3);
            let stem = tape.add_bias(stem, t("stem.b"));
            let mut h = tape.relu(stem);
            for i in 0..config.blocks {
                let conv = tape.conv2d(h, t(&format!("block{i}.w")), n, size, size, c, c, 3);
                let conv = tape.add_bias(conv, t(&format!("block{i}.b")));
                let res = tape.add(conv, h);
                h = tape.relu(res);
            }
            h
        }
        Backbone::Vit => {
            let patch = config.patch_size;
            let d = c;
            let heads = config.heads;
            let dh = d / heads;
            let padded = size.div_ceil(patch) * patch;
            let tp = padded / patch; // patch-grid edge for this board
            let tokens = tp * tp;
            let token_in = patch * patch * p;
            // Patchify outside the tape: inputs are constants.
            let mut tok = vec![R::ZERO; n * tokens * token_in];
            for b in 0..n {
                for ty in 0..tp {
                    for tx in 0..tp {
                        let base = ((b * tokens) + ty * tp + tx) * token_in;
                        for dy in 0..patch {
                            for dx in 0..patch {
                                let (r, col) = (ty * patch + dy, tx * patch + dx);
                                if r >= size || col >= size {
                                    continue; // zero padding
                                }
                                let src = ((b * size + r) * size + col) * p;
                                let dst = base + (dy * patch + dx) * p;
                                tok[dst..dst + p].copy_from_slice(&input[src..src + p]);
                            }
                        }
                    }
                }
            }
            let tok = tape.constant(tok);
            let emb = tape.matmul(tok, t("embed.w"), n * tokens, token_in, d);
            let emb = tape.add_bias(emb, t("embed.b"));
            // Position embeddings: crop the top-left tp×tp corner of the
            // max_board patch grid and broadcast it over the batch.
            let tmax = config.max_board.div_ceil(patch);
            let mut pos_map = Vec::with_capacity(n * tokens * d);
            for _ in 0..n {
                for ty in 0..tp {
                    for tx in 0..tp {
                        let base = (ty * tmax + tx) * d;
                        pos_map.extend(base..base + d);
                    }
                }
            }
            let pos = tape.gather(t("pos"), Arc::new(pos_map));
            let mut x = tape.add(emb, pos);

            // Head split/merge index maps, shared by all blocks.
            let mut split = Vec::with_capacity(n * tokens * d);
            for b in 0..n {
                for hh in 0..heads {
                    for tk in 0..tokens {
                        let base = ((b * tokens) + tk) * d + hh * dh;
                        split.extend(base..base + dh);
                    }
                }
            }
            let split = Arc::new(split);
            let mut transpose = Vec::with_capacity(n * tokens * d);
            for bh in 0..n * heads {
                for j in 0..dh {
                    for tk in 0..tokens {
                        transpose.push((bh * tokens + tk) * dh + j);
                    }
                }
            }
            let transpose = Arc::new(transpose);
            let mut merge = Vec::with_capacity(n * tokens * d);
            for b in 0..n {
                for tk in 0..tokens {
                    for hh in 0..heads {
                        let base = ((b * heads + hh) * tokens + tk) * dh;
                        merge.extend(base..base + dh);
                    }
                }
            }
            let merge = Arc::new(merge);
            let scale = R::from_f64(1.0 / (dh as f64).sqrt());

            for i in 0..config.blocks {
                let pfx = |s: &str| format!("blk{i}.{s}");
                let ln1 = tape.layer_norm(x, t(&pfx("ln1.g")), t(&pfx("ln1.b")), d);
                let q = tape.matmul(ln1, t(&pfx("q.w")), n * tokens, d, d);
                let q = tape.add_bias(q, t(&pfx("q.b")));
                let k = tape.matmul(ln1, t(&pfx("k.w")), n * tokens, d, d);
                let k = tape.add_bias(k, t(&pfx("k.b")));
                let v = tape.matmul(ln1, t(&pfx("v.w")), n * tokens, d, d);
                let v = tape.add_bias(v, t(&pfx("v.b")));
                let qh = tape.gather(q, split.clone());
                let kh = tape.gather(k, split.clone());
                let vh = tape.gather(v, split.clone());
                let kt = tape.gather(kh, transpose.clone());
                let scores = tape.bmm(qh, kt, n * heads, tokens, dh, tokens);
                let scores = tape.scale(scores, scale);
                let attn = tape.softmax(scores, tokens);
                let ctx = tape.bmm(attn, vh, n * heads, tokens, tokens, dh);
                let ctx = tape.gather(ctx, merge.clone());
                let proj = tape.matmul(ctx, t(&pfx("proj.w")), n * tokens, d, d);
                let proj = tape.add_bias(proj, t(&pfx("proj.b")));
                x = tape.add(x, proj);
                let ln2 = tape.layer_norm(x, t(&pfx("ln2.g")), t(&pfx("ln2.b")), d);
                let m1 = tape.matmul(ln2, t(&pfx("mlp1.w")), n * tokens, d, config.mlp_dim);
                let m1 = tape.add_bias(m1, t(&pfx("mlp1.b")));
                let m1 = tape.gelu(m1);
                let m2 = tape.matmul(m1, t(&pfx("mlp2.w")), n * tokens, config.mlp_dim, d);
                let m2 = tape.add_bias(m2, t(&pfx("mlp2.b")));
                x = tape.add(x, m2);
            }
            let xf = tape.layer_norm(x, t("final.g"), t("final.b"), d);
            let un = tape.matmul(xf, t("unembed.w"), n * tokens, d, patch * patch * d);
            let un = tape.add_bias(un, t("unembed.b"));
            // Rearrange patch-major output to vertex-major and crop away the
            // patch padding: each token owns its patch_size² vertices.
            let mut crop = Vec::with_capacity(n * size * size * d);
            for b in 0..n {
                for r in 0..size {
                    for col in 0..size {
                        let tk = (r / patch) * tp + col / patch;
                        let cell = (r % patch) * patch + col % patch;
                        let base = ((b * tokens) + tk) * (patch * patch * d) + cell * d;
                        crop.extend(base..base + d);
                    }
                }
            }
            tape.gather(un, Arc::new(crop))
        }
    };

    // Shared heads over the (n, size², c) trunk.
    let area = size * size;
    let vertex = tape.matmul(trunk, t("policy.w"), n * area, c, 1);
    let vertex = tape.add_bias(vertex, t("policy.b"));
    let pooled = tape.spatial_mean(trunk, area, c);
    let pass = tape.matmul(pooled, t("pass.w"), n, c, 1);
    let pass = tape.add_bias(pass, t("pass.b"));
    let policy_logits = tape.concat_cols(vertex, pass, area, 1);
    let v1 = tape.matmul(pooled, t("value1.w"), n, c, c);
    let v1 = tape.add_bias(v1, t("value1.b"));
    let v1 = tape.relu(v1);
    let v2 = tape.matmul(v1, t("value2.w"), n, c, 1);
    let v2 = tape.add_bias(v2, t("value2.b"));
    let value = tape.tanh(v2);
    GraphOutput {
        policy_logits,
        value,
        board_size: size,
        batch: n,
    }
}

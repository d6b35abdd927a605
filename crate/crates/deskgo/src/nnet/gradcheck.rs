//! Finite-difference verification of the reverse-mode gradients.
//!
//! For every parameter tensor we pick a random unit direction `d`, compare
//! the analytic directional derivative `⟨∇L, d⟩` against the central
//! difference `(L(θ + h·d) − L(θ − h·d)) / 2h`, and report the relative
//! error. Everything runs in f64 so the step `h = 1e-4` stays well above
//! round-off; parameters are noise-perturbed first so the zero-initialized
//! output heads (and everything behind them) carry nonzero gradients.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    batch_loss_and_grads, normal, NetworkConfig, NetworkParameters, TrainingBatch, TrainingRow,
    DEFAULT_VALUE_WEIGHT,
};
use crate::features::encode;
use crate::rules::{BoardState, DEFAULT_KOMI};

/// Default central-difference step.
pub const DEFAULT_STEP: f64 = 1e-4;

/// Verdict for one parameter tensor.
#[derive(Clone, Debug)]
pub struct DirectionalCheck {
    pub tensor: String,
    pub analytic: f64,
    pub numeric: f64,
    /// |analytic − numeric| / (|analytic| + |numeric| + 1e-8).
    pub relative_error: f64,
    /// Directions discarded because the loss was not smooth along them.
    pub rerolls: usize,
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs() + 1e-8)
}

/// Runs one directional check per parameter tensor on a small mixed-size
/// batch. Deterministic in `seed`.
///
/// ReLU makes the loss only piecewise smooth: a probe that pushes some
/// pre-activation across zero measures a kink, not the derivative. Each
/// direction is therefore validated by comparing central differences at `h`
/// and `h/2`; when those disagree the point is non-smooth along that
/// direction and a fresh direction is drawn (bounded retries). An actually
/// wrong gradient disagrees with consistent finite differences in every
/// direction, so re-rolling cannot hide one.
pub fn directional_checks(config: &NetworkConfig, seed: u64, h: f64) -> Vec<DirectionalCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = NetworkParameters::init(config.clone(), rng.gen());

    // f64 copies of every tensor, plus exploration noise so no head is stuck
    // at an exact zero (tanh'(0) is fine, but zero weights kill the paths
    // behind them and make the check vacuous there).
    let mut tensors: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (name, data) in &params.tensors {
        let noisy: Vec<f64> = data
            .iter()
            .map(|&x| x as f64 + 0.05 * normal(&mut rng))
            .collect();
        tensors.insert(name.clone(), noisy);
    }

    let batch = check_batch(config, &mut rng);
    let (_, grads) =
        batch_loss_and_grads::<f64>(config, &tensors, &batch, DEFAULT_VALUE_WEIGHT, true)
            .expect("analytic gradients");
    let grads = grads.expect("gradients requested");

    let names: Vec<String> = tensors.keys().cloned().collect();
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let len = tensors[&name].len();
        let mut check = None;
        for attempt in 0..8 {
            let mut direction: Vec<f64> = (0..len).map(|_| normal(&mut rng)).collect();
            let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
            direction.iter_mut().for_each(|x| *x /= norm);

            let analytic: f64 = grads[&name]
                .iter()
                .zip(&direction)
                .map(|(g, d)| g * d)
                .sum();
            let full = central_difference(config, &tensors, &name, &direction, &batch, h);
            let half = central_difference(config, &tensors, &name, &direction, &batch, h / 2.0);

            check = Some(DirectionalCheck {
                tensor: name.clone(),
                analytic,
                numeric: full,
                relative_error: rel(analytic, full),
                rerolls: attempt,
            });
            // Halving h shrinks smooth truncation error 4x; a kink shows up
            // as disagreement far above that and forces a new direction.
            if rel(full, half) <= 2.5e-5 {
                break;
            }
        }
        out.push(check.expect("at least one attempt"));
    }
    out
}

fn central_difference(
    config: &NetworkConfig,
    tensors: &BTreeMap<String, Vec<f64>>,
    name: &str,
    direction: &[f64],
    batch: &TrainingBatch,
    h: f64,
) -> f64 {
    let mut shifted = tensors.clone();
    for (x, d) in shifted.get_mut(name).unwrap().iter_mut().zip(direction) {
        *x += h * d;
    }
    let (plus, _) = batch_loss_and_grads::<f64>(config, &shifted, batch, DEFAULT_VALUE_WEIGHT, false)
        .expect("loss at +h");
    for (x, d) in shifted.get_mut(name).unwrap().iter_mut().zip(direction) {
        *x -= 2.0 * h * d;
    }
    let (minus, _) =
        batch_loss_and_grads::<f64>(config, &shifted, batch, DEFAULT_VALUE_WEIGHT, false)
            .expect("loss at -h");
    (plus - minus) / (2.0 * h)
}

/// Three positions, two board sizes, random reachable targets — exercises
/// the size-grouped batching inside the loss.
fn check_batch(config: &NetworkConfig, rng: &mut ChaCha8Rng) -> TrainingBatch {
    let mut rows = Vec::new();
    for &(size, plies) in &[(5usize, 6usize), (7, 10), (5, 11)] {
        let mut b = BoardState::new(size, DEFAULT_KOMI);
        for _ in 0..plies {
            let moves = b.legal_moves().expect("game in progress");
            b = b.apply_move(moves[rng.gen_range(0..moves.len())]).unwrap();
        }
        let area = size * size;
        let mut target: Vec<f32> = (0..area + 1).map(|_| rng.gen_range(0.01f32..1.0)).collect();
        let sum: f32 = target.iter().sum();
        target.iter_mut().for_each(|t| *t /= sum);
        rows.push(TrainingRow {
            features: encode(&b, config.max_board),
            policy_target: target,
            value_target: rng.gen_range(-1.0..1.0),
            weight: rng.gen_range(0.5..1.5),
        });
    }
    TrainingBatch { rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::Backbone;

    fn assert_all_pass(config: NetworkConfig) {
        let checks = directional_checks(&config, 2024, DEFAULT_STEP);
        assert!(!checks.is_empty());
        for c in &checks {
            assert!(
                c.relative_error <= 1e-4,
                "{}: analytic {} vs numeric {} (rel {})",
                c.tensor,
                c.analytic,
                c.numeric,
                c.relative_error
            );
        }
    }

    #[test]
    fn cnn_gradients_match_finite_differences() {
        assert_all_pass(NetworkConfig::cnn(2, 16, 7));
    }

    #[test]
    fn vit_gradients_match_finite_differences() {
        let config = NetworkConfig::vit(2, 32, 2, 64, 2, 7);
        assert_eq!(config.backbone, Backbone::Vit);
        assert_all_pass(config);
    }
}

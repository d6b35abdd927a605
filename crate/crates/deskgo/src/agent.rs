//! Position evaluators: the bridge between search and whatever provides
//! priors and values (a network, a uniform stub, or a scripted table).

use std::cell::Cell;
use std::collections::HashMap;
use std::sync::Arc;

use crate::features::encode;
use crate::nnet::{forward, NetworkParameters};
use crate::rules::BoardState;

/// One evaluation: a policy distribution over `area + 1` moves (row-major
/// vertices then pass) and a value in [−1, 1], both from the mover's
/// perspective.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyValue {
    pub policy: Vec<f32>,
    pub value: f32,
}

impl PolicyValue {
    /// Uniform policy, zero value, for a board of `size`.
    pub fn uniform(size: usize) -> PolicyValue {
        let n = size * size + 1;
        PolicyValue {
            policy: vec![1.0 / n as f32; n],
            value: 0.0,
        }
    }
}

/// Anything that can evaluate a position for search.
pub trait Evaluator {
    fn evaluate(&self, state: &BoardState) -> PolicyValue;
}

/// Wraps network parameters as an evaluator.
///
/// The parameters are shared immutably, so one snapshot can serve any number
/// of concurrent searches.
#[derive(Clone)]
pub struct NetEvaluator {
    params: Arc<NetworkParameters>,
}

impl NetEvaluator {
    pub fn new(params: Arc<NetworkParameters>) -> NetEvaluator {
        NetEvaluator { params }
    }

    pub fn params(&self) -> &NetworkParameters {
        &self.params
    }
}

impl Evaluator for NetEvaluator {
    fn evaluate(&self, state: &BoardState) -> PolicyValue {
        let features = encode(state, self.params.config.max_board);
        let out = forward(&self.params, &features)
            .expect("board exceeds the network's feature frame");
        PolicyValue {
            policy: out.policy(),
            value: out.value,
        }
    }
}

/// Uniform priors, zero value. The weakest possible prior; search reduces to
/// pure PUCT exploration.
#[derive(Clone, Copy, Debug, Default)]
pub struct UniformEvaluator;

impl Evaluator for UniformEvaluator {
    fn evaluate(&self, state: &BoardState) -> PolicyValue {
        PolicyValue::uniform(state.size())
    }
}

/// Scripted evaluator for tests: looks positions up by (grid hash, side to
/// move) and falls back to uniform. Lets a test pin exact priors or values
/// at chosen positions without training a network.
#[derive(Clone, Debug, Default)]
pub struct TableEvaluator {
    entries: HashMap<(u64, crate::rules::Color), PolicyValue>,
}

impl TableEvaluator {
    pub fn new() -> TableEvaluator {
        TableEvaluator::default()
    }

    pub fn insert(&mut self, state: &BoardState, pv: PolicyValue) {
        assert_eq!(
            pv.policy.len(),
            state.size() * state.size() + 1,
            "policy length must match the position's board"
        );
        self.entries.insert((state.hash(), state.to_move()), pv);
    }
}

impl Evaluator for TableEvaluator {
    fn evaluate(&self, state: &BoardState) -> PolicyValue {
        self.entries
            .get(&(state.hash(), state.to_move()))
            .cloned()
            .unwrap_or_else(|| PolicyValue::uniform(state.size()))
    }
}

/// Evaluator backed by an arbitrary function of the position. Handy for
/// scripting persistent value landscapes in tests (e.g., "any position
/// containing this marker stone is worth +0.9").
pub struct FnEvaluator<F: Fn(&BoardState) -> PolicyValue>(pub F);

impl<F: Fn(&BoardState) -> PolicyValue> Evaluator for FnEvaluator<F> {
    fn evaluate(&self, state: &BoardState) -> PolicyValue {
        let pv = (self.0)(state);
        assert_eq!(pv.policy.len(), state.size() * state.size() + 1);
        pv
    }
}

/// Counts evaluations passing through to an inner evaluator; used to verify
/// query-budget claims (e.g., that A-MCTS queries the victim network exactly
/// once per victim-node expansion).
pub struct CountingEvaluator<'a> {
    inner: &'a dyn Evaluator,
    count: Cell<u64>,
}

impl<'a> CountingEvaluator<'a> {
    pub fn new(inner: &'a dyn Evaluator) -> CountingEvaluator<'a> {
        CountingEvaluator {
            inner,
            count: Cell::new(0),
        }
    }

    pub fn count(&self) -> u64 {
        self.count.get()
    }
}

impl Evaluator for CountingEvaluator<'_> {
    fn evaluate(&self, state: &BoardState) -> PolicyValue {
        self.count.set(self.count.get() + 1);
        self.inner.evaluate(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::NetworkConfig;
    use crate::rules::DEFAULT_KOMI;

    #[test]
    fn uniform_evaluator_matches_board_size() {
        let s = BoardState::new(7, DEFAULT_KOMI);
        let pv = UniformEvaluator.evaluate(&s);
        assert_eq!(pv.policy.len(), 50);
        assert!((pv.policy.iter().sum::<f32>() - 1.0).abs() < 1e-6);
        assert_eq!(pv.value, 0.0);
    }

    #[test]
    fn net_evaluator_runs_the_network() {
        let params = Arc::new(NetworkParameters::init(NetworkConfig::cnn(1, 4, 7), 3));
        let eval = NetEvaluator::new(params);
        let pv = eval.evaluate(&BoardState::new(5, DEFAULT_KOMI));
        assert_eq!(pv.policy.len(), 26);
        // Fresh nets are uniform by construction.
        assert!((pv.policy[0] - 1.0 / 26.0).abs() < 1e-6);
    }

    #[test]
    fn table_evaluator_pins_and_falls_back() {
        let a = BoardState::new(5, DEFAULT_KOMI);
        let mut pv = PolicyValue::uniform(5);
        pv.value = 0.7;
        let mut table = TableEvaluator::new();
        table.insert(&a, pv);
        assert_eq!(table.evaluate(&a).value, 0.7);
        let other = a
            .apply_move(crate::rules::Move::Pass)
            .unwrap();
        assert_eq!(table.evaluate(&other).value, 0.0);
    }

    #[test]
    fn counting_evaluator_counts() {
        let s = BoardState::new(5, DEFAULT_KOMI);
        let inner = UniformEvaluator;
        let counter = CountingEvaluator::new(&inner);
        for _ in 0..3 {
            counter.evaluate(&s);
        }
        assert_eq!(counter.count(), 3);
    }
}

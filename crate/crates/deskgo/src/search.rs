//! PUCT Monte Carlo tree search and its adversarial variant (A-MCTS).
//!
//! Plain MCTS selects children by `Q + c(N)·P·√N_parent/(1+N_child)` with a
//! log-growing exploration constant, expands leaves through an
//! [`Evaluator`], and backs values up with a sign flip per ply. A-MCTS
//! models the opponent explicitly: at nodes where the victim is to move,
//! priors and values come from the victim's own network and the tree
//! descends only through the victim policy's argmax reply, mirroring a
//! gray-box attack where the opponent's inference (but not its search) can
//! be queried.
//!
//! Tie-breaks are deterministic everywhere: lowest (row, col) first, pass
//! last. Searches are reproducible from `(state, nets, config, seed)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::agent::Evaluator;
use crate::rules::{score_tromp_taylor, BoardState, Color, Move, RulesError};

/// Exploration-constant base: c(N) = cpuct_init + cpuct_log·ln((N+361)/361).
const CPUCT_BASE: f64 = 361.0;
/// First-play urgency: unvisited children score the parent's Q minus this.
const FPU_REDUCTION: f64 = 0.2;
/// z-score for the 95% lower confidence bound on Q.
const LCB_Z: f64 = 1.96;
/// LCB candidates need at least `max_visits / LCB_VISIT_DIVISOR` visits.
const LCB_VISIT_DIVISOR: f64 = 8.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    /// Simulations per search; every simulation counts as one visit.
    pub visits: u32,
    pub cpuct_init: f64,
    pub cpuct_log: f64,
    /// Pick the move by 95% lower confidence bound when well visited.
    pub use_lcb: bool,
    /// Sampling temperature from `early_move_horizon` onward; 0 = argmax.
    pub temperature: f64,
    /// Sampling temperature before `early_move_horizon`.
    pub temperature_early: f64,
    pub early_move_horizon: u32,
    /// Mix root priors with Dirichlet noise (self-play exploration).
    pub root_noise: bool,
    pub dirichlet_alpha: f64,
    pub dirichlet_fraction: f64,
    /// Drop the pass move from the root entirely (unless it is the only
    /// legal move). Game generation uses this to bar premature passes while
    /// unsettled territory remains on the board.
    pub forbid_root_pass: bool,
    /// Seeds move sampling and root noise.
    pub deterministic_seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            visits: 64,
            cpuct_init: 1.0,
            cpuct_log: 0.45,
            use_lcb: true,
            temperature: 0.0,
            temperature_early: 0.50,
            early_move_horizon: 10,
            root_noise: false,
            dirichlet_alpha: 0.3,
            dirichlet_fraction: 0.25,
            forbid_root_pass: false,
            deterministic_seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn with_visits(visits: u32) -> SearchConfig {
        SearchConfig {
            visits,
            ..SearchConfig::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.visits < 1 {
            return Err("visits must be >= 1".into());
        }
        if self.temperature < 0.0 || self.temperature_early < 0.0 {
            return Err("temperatures must be >= 0".into());
        }
        if self.root_noise && self.dirichlet_alpha <= 0.0 {
            return Err("dirichlet_alpha must be > 0".into());
        }
        Ok(())
    }

    fn cpuct(&self, parent_visits: u32) -> f64 {
        self.cpuct_init + self.cpuct_log * ((parent_visits as f64 + CPUCT_BASE) / CPUCT_BASE).ln()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SearchError {
    #[error("cannot search a finished game")]
    GameOver,
    #[error(transparent)]
    Rules(#[from] RulesError),
}

/// Root summary of one completed search. Per-move vectors are parallel to
/// `moves`, which lists the root's legal moves in canonical order (row-major
/// vertices, then pass).
#[derive(Clone, Debug)]
pub struct SearchResult {
    pub moves: Vec<Move>,
    /// Root visit fractions; sums to 1. When no child was visited (a 1-visit
    /// search) this is one-hot at the masked prior's argmax.
    pub visit_distribution: Vec<f64>,
    pub visit_counts: Vec<u32>,
    /// Masked, renormalized (and possibly noised) root priors.
    pub priors: Vec<f64>,
    /// Mean child values from the root mover's perspective; None if unvisited.
    pub q_values: Vec<Option<f64>>,
    /// Q − 1.96·stderr per child; −∞ when unvisited.
    pub lcb_values: Vec<f64>,
    /// Root mean value, mover's perspective.
    pub root_value: f64,
    pub chosen_move: Move,
    /// Victim-network evaluations performed (A-MCTS only; 0 for plain MCTS).
    pub victim_queries: u64,
}

struct Node {
    state: BoardState,
    visit_count: u32,
    /// Sum of backed-up values from this node's mover's perspective.
    total_value: f64,
    /// Sum of squared backed-up values (perspective-free), for stderr.
    total_sq: f64,
    prior: f64,
    /// Child arena indices, parallel to `child_moves`; empty until expanded.
    children: Vec<usize>,
    child_moves: Vec<Move>,
    expanded: bool,
    /// A-MCTS: the victim is to move here.
    is_victim_node: bool,
    /// A-MCTS: index into `children` of the victim policy's argmax reply.
    forced_child: Option<usize>,
}

impl Node {
    fn new(state: BoardState, prior: f64, is_victim_node: bool) -> Node {
        Node {
            state,
            visit_count: 0,
            total_value: 0.0,
            total_sq: 0.0,
            prior,
            children: Vec::new(),
            child_moves: Vec::new(),
            expanded: false,
            is_victim_node,
            forced_child: None,
        }
    }

    fn q(&self) -> f64 {
        if self.visit_count == 0 {
            0.0
        } else {
            self.total_value / self.visit_count as f64
        }
    }
}

struct Tree<'a> {
    arena: Vec<Node>,
    config: &'a SearchConfig,
    adversary: &'a dyn Evaluator,
    /// In A-MCTS, the opponent model; in plain MCTS, None.
    victim: Option<&'a dyn Evaluator>,
    /// Color to move at the root (the searching player).
    root_color: Color,
    victim_queries: u64,
    rng: ChaCha8Rng,
}

/// Plain PUCT search from `state` using one evaluator for both sides.
pub fn run_mcts(
    state: &BoardState,
    net: &dyn Evaluator,
    config: &SearchConfig,
) -> Result<SearchResult, SearchError> {
    search(state, net, None, config)
}

/// Adversarial search: the mover at `state` is the adversary; opponent nodes
/// are modeled by `victim_net` and replied to with its argmax policy move.
pub fn run_amcts(
    state: &BoardState,
    adversary_net: &dyn Evaluator,
    victim_net: &dyn Evaluator,
    config: &SearchConfig,
) -> Result<SearchResult, SearchError> {
    search(state, adversary_net, Some(victim_net), config)
}

fn search(
    state: &BoardState,
    adversary: &dyn Evaluator,
    victim: Option<&dyn Evaluator>,
    config: &SearchConfig,
) -> Result<SearchResult, SearchError> {
    config.validate().expect("invalid search config");
    if state.game_over() {
        return Err(SearchError::GameOver);
    }
    let mut tree = Tree {
        arena: vec![Node::new(state.clone(), 1.0, false)],
        config,
        adversary,
        victim,
        root_color: state.to_move(),
        victim_queries: 0,
        rng: ChaCha8Rng::seed_from_u64(config.deterministic_seed),
    };
    for _ in 0..config.visits {
        tree.simulate();
    }
    Ok(tree.result(state))
}

impl Tree<'_> {
    /// One simulation: descend to a leaf, expand or score it, back up.
    fn simulate(&mut self) {
        let mut path = vec![0usize];
        let value = loop {
            let id = *path.last().unwrap();
            if self.arena[id].state.game_over() {
                // Terminal: the game result stands in for a net value.
                let node = &self.arena[id];
                break score_tromp_taylor(&node.state).sign_for(node.state.to_move());
            }
            if !self.arena[id].expanded {
                break self.expand(id);
            }
            path.push(self.select_child(id));
        };
        // Back up from the leaf's mover's perspective, flipping per ply.
        let mut v = value;
        for &id in path.iter().rev() {
            let node = &mut self.arena[id];
            node.visit_count += 1;
            node.total_value += v;
            node.total_sq += v * v;
            v = -v;
        }
    }

    /// PUCT child selection (or the forced victim reply in A-MCTS).
    fn select_child(&self, id: usize) -> usize {
        let node = &self.arena[id];
        if let Some(forced) = node.forced_child {
            return node.children[forced];
        }
        let parent_q = node.q();
        let c = self.config.cpuct(node.visit_count);
        let sqrt_n = (node.visit_count as f64).sqrt();
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for (i, &child_id) in node.children.iter().enumerate() {
            let child = &self.arena[child_id];
            let q = if child.visit_count == 0 {
                parent_q - FPU_REDUCTION
            } else {
                -child.q()
            };
            let u = c * child.prior * sqrt_n / (1.0 + child.visit_count as f64);
            let score = q + u;
            // Strict comparison keeps the first (lowest-index) move on ties;
            // children are created in canonical order.
            if score > best_score {
                best_score = score;
                best = i;
            }
        }
        node.children[best]
    }

    /// Expands a leaf: evaluates it, creates children with masked priors,
    /// pins the forced argmax reply on victim nodes, and returns the value
    /// to back up (the evaluator's, from the leaf mover's perspective).
    fn expand(&mut self, id: usize) -> f64 {
        let state = self.arena[id].state.clone();
        let is_victim = self.arena[id].is_victim_node;
        debug_assert_eq!(
            is_victim,
            self.victim.is_some() && state.to_move() != self.root_color
        );
        let pv = if is_victim {
            self.victim_queries += 1;
            self.victim.unwrap().evaluate(&state)
        } else {
            self.adversary.evaluate(&state)
        };
        let mut legal = state.legal_moves().expect("game in progress");
        if id == 0 && self.config.forbid_root_pass && legal.len() > 1 {
            legal.retain(|m| *m != Move::Pass);
        }
        let mut priors: Vec<f64> = legal
            .iter()
            .map(|m| pv.policy[m.policy_index(state.size())] as f64)
            .collect();
        let mass: f64 = priors.iter().sum();
        if mass > 1e-12 {
            priors.iter_mut().for_each(|p| *p /= mass);
        } else {
            priors.fill(1.0 / legal.len() as f64);
        }
        if id == 0 && self.config.root_noise {
            self.apply_root_noise(&mut priors);
        }
        let mut children = Vec::with_capacity(legal.len());
        for (mv, &p) in legal.iter().zip(priors.iter()) {
            let child_state = state.apply_move(*mv).expect("legal move applies");
            let child_is_victim =
                self.victim.is_some() && child_state.to_move() != self.root_color;
            let child = Node::new(child_state, p, child_is_victim);
            let child_id = self.arena.len();
            self.arena.push(child);
            children.push(child_id);
        }
        // The victim replies deterministically with its policy argmax; the
        // strict max keeps the lowest-index move on ties.
        let forced = is_victim.then(|| {
            let mut best = 0usize;
            for (i, &p) in priors.iter().enumerate() {
                if p > priors[best] {
                    best = i;
                }
            }
            best
        });
        let node = &mut self.arena[id];
        node.children = children;
        node.child_moves = legal;
        node.expanded = true;
        node.forced_child = forced;
        pv.value as f64
    }

    fn apply_root_noise(&mut self, priors: &mut [f64]) {
        let gamma = Gamma::new(self.config.dirichlet_alpha, 1.0).expect("alpha > 0");
        let draws: Vec<f64> = priors
            .iter()
            .map(|_| gamma.sample(&mut self.rng).max(1e-12))
            .collect();
        let total: f64 = draws.iter().sum();
        let frac = self.config.dirichlet_fraction;
        for (p, g) in priors.iter_mut().zip(draws) {
            *p = (1.0 - frac) * *p + frac * (g / total);
        }
    }

    fn result(&self, root_state: &BoardState) -> SearchResult {
        // Visit conservation: every expanded node holds its expansion visit
        // plus one per descent into a child.
        #[cfg(debug_assertions)]
        for node in &self.arena {
            if node.expanded {
                let children: u32 = node
                    .children
                    .iter()
                    .map(|&c| self.arena[c].visit_count)
                    .sum();
                debug_assert_eq!(node.visit_count, 1 + children);
            }
        }
        let root = &self.arena[0];
        assert!(root.expanded, "visits >= 1 always expands the root");
        let moves = root.child_moves.clone();
        let priors: Vec<f64> = root
            .children
            .iter()
            .map(|&c| self.arena[c].prior)
            .collect();
        let visit_counts: Vec<u32> = root
            .children
            .iter()
            .map(|&c| self.arena[c].visit_count)
            .collect();
        let total_child_visits: u32 = visit_counts.iter().sum();
        let visit_distribution: Vec<f64> = if total_child_visits == 0 {
            // 1-visit search: the distribution collapses onto the masked
            // prior's argmax (strict max keeps the lowest-index tie).
            let mut best = 0usize;
            let mut best_p = f64::NEG_INFINITY;
            for (i, &p) in priors.iter().enumerate() {
                if p > best_p {
                    best_p = p;
                    best = i;
                }
            }
            let mut d = vec![0.0; moves.len()];
            d[best] = 1.0;
            d
        } else {
            visit_counts
                .iter()
                .map(|&n| n as f64 / total_child_visits as f64)
                .collect()
        };
        let mut q_values = Vec::with_capacity(moves.len());
        let mut lcb_values = Vec::with_capacity(moves.len());
        for &c in &root.children {
            let child = &self.arena[c];
            if child.visit_count == 0 {
                q_values.push(None);
                lcb_values.push(f64::NEG_INFINITY);
            } else {
                let n = child.visit_count as f64;
                let q = -child.q();
                let var = (child.total_sq / n - child.q() * child.q()).max(0.0);
                let stderr = (var / n).sqrt();
                q_values.push(Some(q));
                lcb_values.push(q - LCB_Z * stderr);
            }
        }
        let mut result = SearchResult {
            moves,
            visit_distribution,
            visit_counts,
            priors,
            q_values,
            lcb_values,
            root_value: root.q(),
            chosen_move: Move::Pass,
            victim_queries: self.victim_queries,
        };
        result.chosen_move = select_move(&result, self.config, root_state.move_count());
        result
    }
}

/// Picks the move to play from a finished search.
///
/// With `use_lcb` and at least one visited child: argmax of the lower
/// confidence bound among moves holding at least `max_visits / 8` visits.
/// Otherwise: sample `visit_distribution^(1/T)` with T =
/// `temperature_early` before `early_move_horizon` and `temperature` after;
/// T = 0 is argmax. All ties resolve to the earliest move in canonical
/// order.
pub fn select_move(result: &SearchResult, config: &SearchConfig, move_number: u32) -> Move {
    assert!(!result.moves.is_empty(), "no legal moves in result");
    let max_visits = result.visit_counts.iter().copied().max().unwrap_or(0);
    if config.use_lcb && max_visits > 0 {
        let floor = max_visits as f64 / LCB_VISIT_DIVISOR;
        let mut best: Option<usize> = None;
        for (i, &n) in result.visit_counts.iter().enumerate() {
            if (n as f64) < floor || n == 0 {
                continue;
            }
            if best.is_none_or(|b| result.lcb_values[i] > result.lcb_values[b]) {
                best = Some(i);
            }
        }
        if let Some(i) = best {
            return result.moves[i];
        }
    }
    let t = if move_number < config.early_move_horizon {
        config.temperature_early
    } else {
        config.temperature
    };
    if t == 0.0 {
        let mut best = 0usize;
        for (i, &d) in result.visit_distribution.iter().enumerate() {
            if d > result.visit_distribution[best] {
                best = i;
            }
        }
        return result.moves[best];
    }
    // Deterministic sampling: the seed is derived from the config seed and
    // the move number, so a replayed game draws the same moves.
    let mut rng = ChaCha8Rng::seed_from_u64(
        config
            .deterministic_seed
            .wrapping_add((move_number as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
    );
    let weights: Vec<f64> = result
        .visit_distribution
        .iter()
        .map(|&d| if d > 0.0 { d.powf(1.0 / t) } else { 0.0 })
        .collect();
    let total: f64 = weights.iter().sum();
    let mut draw = rng.gen_range(0.0..total);
    for (i, &w) in weights.iter().enumerate() {
        draw -= w;
        if draw <= 0.0 {
            return result.moves[i];
        }
    }
    *result.moves.last().unwrap()
}

//! Training-game generation and the sliding data window.
//!
//! Three concerns live here. Game generation plays complete records in
//! self-play (one net, both sides, root noise on) or victim-play (an A-MCTS
//! adversary against a plain-MCTS victim), with a board-size distribution,
//! a move limit proportional to board area, move-limit utilities, and an
//! optional pass-alive defense that bars the adversary from passing while
//! unsettled territory remains. Row conversion turns records into encoded
//! training rows — both movers' positions in self-play, only the learner's
//! in adversarial games. The [`DataWindow`] holds the most recent rows in a
//! pool whose capacity follows a power law of the total rows ever generated,
//! supports warm-start pre-seeding from a parent model's history, and serves
//! uniform batches. Generated data lands on disk as fixed-width binary
//! segments plus an SGF sidecar per game and a JSON manifest, all
//! byte-reproducible from the configuration and master seed.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::Evaluator;
use crate::analysis::{write_sgf, SgfGame};
use crate::features::{encode, FeatureTensor, GLOBAL_FEATURES, SPATIAL_PLANES};
use crate::nnet::{TrainingBatch, TrainingRow};
use crate::rules::benson::pass_alive_vertices;
use crate::rules::{
    score_tromp_taylor, BoardState, Color, Move, RulesError, Vertex, DEFAULT_KOMI, MAX_BOARD,
    MIN_BOARD,
};
use crate::search::{run_amcts, run_mcts, SearchConfig, SearchError, SearchResult};

/// Everything that can go wrong while generating or storing training data.
#[derive(Debug, thiserror::Error)]
pub enum GenError {
    /// Argument outside an operation's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("the data window is empty")]
    EmptyWindow,
    #[error("invalid generation config: {0}")]
    Config(String),
    #[error("corrupt data segment: {0}")]
    CorruptSegment(String),
    #[error(transparent)]
    Rules(#[from] RulesError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Sliding window
// ---------------------------------------------------------------------------

/// Window capacity after `total_rows` rows have ever been generated, with
/// starting size `m0`:
///
/// ```text
/// m = (0.4·m0^0.35 / 0.65) · (N^0.65 − m0^0.65) + m0
/// ```
///
/// rounded to the nearest row. The formula's fixed point is `N = m0`.
pub fn window_size(total_rows: u64, m0: u64) -> Result<u64, GenError> {
    if m0 == 0 {
        return Err(GenError::Domain("m0 must be positive".into()));
    }
    if total_rows < m0 {
        return Err(GenError::Domain(format!(
            "total rows {total_rows} is below the starting window size {m0}"
        )));
    }
    let n = total_rows as f64;
    let m0f = m0 as f64;
    let m = 0.4 * m0f.powf(0.35) / 0.65 * (n.powf(0.65) - m0f.powf(0.65)) + m0f;
    Ok(m.round() as u64)
}

/// Sliding pool of the most recent training rows. `total_rows` counts every
/// row ever appended, including pre-seeded history, and never decreases; the
/// pool keeps at most [`window_size`]`(total_rows, m0)` rows, evicting the
/// oldest first.
#[derive(Clone, Debug)]
pub struct DataWindow {
    m0: u64,
    total_rows: u64,
    rows: VecDeque<TrainingRow>,
}

impl DataWindow {
    /// # Panics
    /// If `m0` is zero.
    pub fn new(m0: u64) -> DataWindow {
        assert!(m0 > 0, "starting window size must be positive");
        DataWindow {
            m0,
            total_rows: 0,
            rows: VecDeque::new(),
        }
    }

    pub fn m0(&self) -> u64 {
        self.m0
    }

    /// Total rows ever generated, including pre-seeded history.
    pub fn total_rows(&self) -> u64 {
        self.total_rows
    }

    /// Current capacity; before `m0` rows exist the window may hold up to
    /// `m0` (the formula's fixed point).
    pub fn capacity(&self) -> u64 {
        window_size(self.total_rows.max(self.m0), self.m0).expect("arguments kept in domain")
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Pool contents in append order, oldest first.
    pub fn rows(&self) -> impl Iterator<Item = &TrainingRow> {
        self.rows.iter()
    }

    pub fn push(&mut self, row: TrainingRow) {
        self.total_rows += 1;
        self.rows.push_back(row);
        let capacity = self.capacity() as usize;
        while self.rows.len() > capacity {
            self.rows.pop_front();
        }
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = TrainingRow>) {
        for row in rows {
            self.push(row);
        }
    }

    /// Pre-seeds an empty window with a parent model's training history:
    /// bumps `total_rows` by the parent's full row count and fills the pool
    /// with the newest provided rows up to the resulting capacity.
    ///
    /// # Panics
    /// If the window has already been used.
    pub fn warm_start(&mut self, history_rows: Vec<TrainingRow>, history_n: u64) {
        assert!(
            self.total_rows == 0 && self.rows.is_empty(),
            "warm_start requires an empty window"
        );
        self.total_rows = history_n;
        let capacity = self.capacity() as usize;
        let skip = history_rows.len().saturating_sub(capacity);
        self.rows.extend(history_rows.into_iter().skip(skip));
    }

    /// Uniform sample with replacement from the current pool.
    pub fn sample_batch(
        &self,
        batch_size: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<TrainingBatch, GenError> {
        if self.rows.is_empty() {
            return Err(GenError::EmptyWindow);
        }
        let rows = (0..batch_size)
            .map(|_| self.rows[rng.gen_range(0..self.rows.len())].clone())
            .collect();
        Ok(TrainingBatch { rows })
    }
}

// ---------------------------------------------------------------------------
// Board-size distribution
// ---------------------------------------------------------------------------

/// Published training frequencies (percent) by board size for full-scale
/// adversary training. The raw percentages total 99.8 due to rounding;
/// [`paper_board_size_distribution`] normalizes them.
const FULL_SCALE_SIZE_TABLE: [(usize, f64); 13] = [
    (7, 0.7),
    (8, 0.7),
    (9, 2.9),
    (10, 1.4),
    (11, 2.1),
    (12, 2.9),
    (13, 7.1),
    (14, 4.2),
    (15, 5.0),
    (16, 5.7),
    (17, 6.4),
    (18, 7.1),
    (19, 53.6),
];

/// The full-scale board-size distribution: sizes 7 through 19, slightly more
/// than half the games on 19×19.
pub fn paper_board_size_distribution() -> BTreeMap<usize, f64> {
    let total: f64 = FULL_SCALE_SIZE_TABLE.iter().map(|&(_, w)| w).sum();
    FULL_SCALE_SIZE_TABLE
        .iter()
        .map(|&(size, w)| (size, w / total))
        .collect()
}

/// The full-scale distribution's shape mapped onto the desk range
/// `[min_size, max_size]`: each desk size takes the weight of its
/// proportional position in the 7..=19 table, so the largest configured
/// board dominates the same way 19×19 does at full scale.
pub fn desk_board_size_distribution(min_size: usize, max_size: usize) -> BTreeMap<usize, f64> {
    assert!(
        (MIN_BOARD..=MAX_BOARD).contains(&min_size) && min_size <= max_size && max_size <= MAX_BOARD,
        "desk range {min_size}..={max_size} outside {MIN_BOARD}..={MAX_BOARD}"
    );
    if min_size == max_size {
        return BTreeMap::from([(min_size, 1.0)]);
    }
    let span = (max_size - min_size) as f64;
    let weights: BTreeMap<usize, f64> = (min_size..=max_size)
        .map(|size| {
            let position = (size - min_size) as f64 / span;
            let table_index = (position * 12.0).round() as usize;
            (size, FULL_SCALE_SIZE_TABLE[table_index].1)
        })
        .collect();
    let total: f64 = weights.values().sum();
    weights.into_iter().map(|(s, w)| (s, w / total)).collect()
}

fn validate_distribution(distribution: &BTreeMap<usize, f64>) -> Result<(), GenError> {
    if distribution.is_empty() {
        return Err(GenError::Config("empty board-size distribution".into()));
    }
    let mut total = 0.0;
    for (&size, &weight) in distribution {
        if !(MIN_BOARD..=MAX_BOARD).contains(&size) {
            return Err(GenError::Config(format!("board size {size} out of range")));
        }
        if !weight.is_finite() || weight < 0.0 {
            return Err(GenError::Config(format!(
                "weight {weight} for size {size} is not a probability"
            )));
        }
        total += weight;
    }
    if (total - 1.0).abs() > 1e-6 {
        return Err(GenError::Config(format!(
            "board-size distribution sums to {total}, not 1"
        )));
    }
    Ok(())
}

/// Draws a board size. Iteration over the map is in ascending size order, so
/// the cumulative walk is deterministic for a given rng state.
///
/// # Panics
/// If the distribution has no positive weight.
pub fn sample_board_size(distribution: &BTreeMap<usize, f64>, rng: &mut ChaCha8Rng) -> usize {
    let total: f64 = distribution.values().sum();
    assert!(total > 0.0, "distribution has no mass");
    let mut u = rng.gen::<f64>() * total;
    let mut last = None;
    for (&size, &weight) in distribution {
        if weight <= 0.0 {
            continue;
        }
        last = Some(size);
        if u < weight {
            return size;
        }
        u -= weight;
    }
    last.expect("some weight is positive")
}

// ---------------------------------------------------------------------------
// Generation config
// ---------------------------------------------------------------------------

/// What kind of games a generation run produces.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenMode {
    /// One net plays both sides.
    SelfPlay,
    /// An A-MCTS adversary against a frozen plain-MCTS victim; rows come
    /// from the adversary's moves only.
    VictimPlay,
    /// Deterministic interleave: this fraction of games are adversarial
    /// (victim-play pairings), the rest self-play. Used for defense
    /// training, where `agent_a` is the frozen adversary and `agent_b` the
    /// learning victim: self-play slots are played by `agent_b`, and rows
    /// from the adversarial games come from the victim's (the learner's)
    /// moves.
    Mixed { adversary_fraction: f64 },
}

/// How a game that hits the move limit is scored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveLimitPolicy {
    /// Score the final position as it stands.
    ScoreAsIs,
    /// The adversary forfeits: utility −1, mirroring "no result counts as a
    /// loss" so stalling never pays.
    ZeroScoreLoss,
    /// The adversary takes this utility (e.g. −1.6, a penalty steeper than
    /// losing outright).
    Utility(f64),
}

/// Serializes the board-size map with string keys so it survives formats
/// whose table keys must be strings (TOML, JSON).
mod size_dist_serde {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<usize, f64>,
        ser: S,
    ) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut out = ser.serialize_map(Some(map.len()))?;
        for (&size, &weight) in map {
            out.serialize_entry(&size.to_string(), &weight)?;
        }
        out.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> Result<BTreeMap<usize, f64>, D::Error> {
        let raw = BTreeMap::<String, f64>::deserialize(de)?;
        raw.into_iter()
            .map(|(key, weight)| {
                key.parse::<usize>()
                    .map(|size| (size, weight))
                    .map_err(|_| serde::de::Error::custom(format!("board size key `{key}`")))
            })
            .collect()
    }
}

/// Configuration for one generation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenConfig {
    pub mode: GenMode,
    /// Search budget per move in self-play games (both sides).
    pub selfplay_visits: u32,
    /// Adversary budget per move in adversarial games.
    pub adversary_visits: u32,
    /// Victim budget per move in adversarial games.
    pub victim_visits: u32,
    #[serde(with = "size_dist_serde")]
    pub board_size_distribution: BTreeMap<usize, f64>,
    /// Move limit = `factor · area / 361`, rounded (at least 2). The factor
    /// is the limit a 19×19 game would get.
    pub move_limit_factor: f64,
    pub move_limit_policy: MoveLimitPolicy,
    /// Bar the adversary from passing while any vacant region larger than 4
    /// points is not enclosed by pass-alive stones.
    pub pass_alive_defense: bool,
}

impl Default for GenConfig {
    fn default() -> GenConfig {
        GenConfig {
            mode: GenMode::SelfPlay,
            selfplay_visits: 64,
            adversary_visits: 64,
            victim_visits: 16,
            board_size_distribution: desk_board_size_distribution(5, 9),
            move_limit_factor: 800.0,
            move_limit_policy: MoveLimitPolicy::ScoreAsIs,
            pass_alive_defense: false,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        validate_distribution(&self.board_size_distribution)?;
        if self.move_limit_factor <= 0.0 {
            return Err(GenError::Config("move_limit_factor must be > 0".into()));
        }
        if self.selfplay_visits == 0 || self.adversary_visits == 0 || self.victim_visits == 0 {
            return Err(GenError::Config("visit budgets must be >= 1".into()));
        }
        if let GenMode::Mixed { adversary_fraction } = self.mode {
            if !(0.0..=1.0).contains(&adversary_fraction) {
                return Err(GenError::Config(format!(
                    "adversary_fraction {adversary_fraction} outside [0, 1]"
                )));
            }
        }
        Ok(())
    }

    /// Ply budget for a game on a `size`-sided board.
    pub fn move_limit(&self, size: usize) -> usize {
        let limit = (self.move_limit_factor * (size * size) as f64 / 361.0).round() as usize;
        limit.max(2)
    }
}

// ---------------------------------------------------------------------------
// Game records
// ---------------------------------------------------------------------------

/// How a generated game ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GameOutcome {
    BlackWin,
    WhiteWin,
    /// Ended by the ply budget under `ZeroScoreLoss` or `Utility`.
    MoveLimit,
}

/// A complete generated game: the move list, the per-move search
/// distributions that become policy targets, and the final utility.
#[derive(Clone, Debug, PartialEq)]
pub struct GameRecord {
    pub board_size: usize,
    pub komi: f64,
    pub moves: Vec<Move>,
    /// One distribution per move, length `area + 1`, indexed like policies.
    pub policy_targets: Vec<Vec<f32>>,
    pub result: GameOutcome,
    /// Final value from Black's perspective: ±1 from scoring, or the
    /// move-limit policy's utility signed for the adversary.
    pub utility: f64,
    /// Which color the adversary played; `None` in self-play games.
    pub adversary_color: Option<Color>,
    pub black_id: String,
    pub white_id: String,
    pub black_visits: u32,
    pub white_visits: u32,
    /// Per-game seed; all in-game randomness derives from it.
    pub seed: u64,
}

impl GameRecord {
    /// The final utility from the adversary's perspective; `None` for
    /// self-play games.
    pub fn adversary_utility(&self) -> Option<f64> {
        self.adversary_color.map(|c| match c {
            Color::Black => self.utility,
            Color::White => -self.utility,
        })
    }

    /// SGF sidecar form. Scored games get a `RE` like `B+12.5`; move-limit
    /// games are `Void`.
    pub fn to_sgf(&self) -> SgfGame {
        let mut game = SgfGame::new(self.board_size, self.komi);
        game.black_player = Some(self.black_id.clone());
        game.white_player = Some(self.white_id.clone());
        game.result = Some(match self.result {
            GameOutcome::MoveLimit => "Void".to_string(),
            winner => {
                let mut state = BoardState::new(self.board_size, self.komi);
                for &mv in &self.moves {
                    state = state.apply_move(mv).expect("record moves are legal");
                }
                let score = score_tromp_taylor(&state);
                let margin = crate::analysis::fmt_number(score.margin);
                match winner {
                    GameOutcome::BlackWin => format!("B+{margin}"),
                    _ => format!("W+{margin}"),
                }
            }
        });
        let mut color = Color::Black;
        for &mv in &self.moves {
            game.push_move(color, mv);
            color = color.opponent();
        }
        game
    }
}

/// True when no vacant region larger than 4 points escapes the pass-alive
/// cover: every big empty region is enclosed territory of an unconditionally
/// alive chain (of either color), so passing can no longer be exploited.
pub fn territory_settled(state: &BoardState) -> bool {
    const UNSETTLED_REGION_LIMIT: usize = 4;
    let size = state.size();
    let covered: BTreeSet<Vertex> = pass_alive_vertices(state, Color::Black)
        .union(&pass_alive_vertices(state, Color::White))
        .copied()
        .collect();
    let mut seen = vec![false; size * size];
    for start in state.vertices() {
        if state.stone(start).is_some() || seen[start.index(size)] {
            continue;
        }
        let mut region = vec![start];
        let mut frontier = vec![start];
        seen[start.index(size)] = true;
        while let Some(v) = frontier.pop() {
            for n in v.neighbors(size) {
                if state.stone(n).is_none() && !seen[n.index(size)] {
                    seen[n.index(size)] = true;
                    region.push(n);
                    frontier.push(n);
                }
            }
        }
        if region.len() > UNSETTLED_REGION_LIMIT && region.iter().any(|v| !covered.contains(v)) {
            return false;
        }
    }
    true
}

/// Mixes a per-move search seed out of the game seed and ply number.
fn move_seed(game_seed: u64, ply: usize) -> u64 {
    game_seed.wrapping_add((ply as u64).wrapping_mul(0xA24B_AED4_963E_E407))
}

fn policy_target_from(result: &SearchResult, size: usize) -> Vec<f32> {
    let mut target = vec![0.0f32; size * size + 1];
    for (mv, &p) in result.moves.iter().zip(result.visit_distribution.iter()) {
        target[mv.policy_index(size)] = p as f32;
    }
    target
}

/// Plays one training game. In self-play mode `agent_a` plays both sides
/// with root noise on. In victim-play mode `agent_a` is the adversary
/// (searching with A-MCTS against `agent_b` as the modeled victim, which
/// answers with plain MCTS), and the adversary's color is drawn from `rng`.
/// `Mixed` is a schedule over whole games, not a way to play one — resolve
/// it with [`is_adversarial_slot`] first.
pub fn play_training_game(
    agent_a: &dyn Evaluator,
    agent_b: &dyn Evaluator,
    config: &GenConfig,
    rng: &mut ChaCha8Rng,
) -> Result<GameRecord, GenError> {
    config.validate()?;
    let victim_play = match config.mode {
        GenMode::SelfPlay => false,
        GenMode::VictimPlay => true,
        GenMode::Mixed { .. } => {
            return Err(GenError::Config(
                "mixed mode schedules whole games; resolve each slot first".into(),
            ))
        }
    };
    let size = sample_board_size(&config.board_size_distribution, rng);
    let game_seed = rng.gen::<u64>();
    let adversary_color = victim_play.then(|| {
        if rng.gen_bool(0.5) {
            Color::Black
        } else {
            Color::White
        }
    });

    let move_limit = config.move_limit(size);
    let mut state = BoardState::new(size, DEFAULT_KOMI);
    let mut moves = Vec::new();
    let mut policy_targets = Vec::new();
    while !state.game_over() && moves.len() < move_limit {
        let mover = state.to_move();
        let adversary_to_move = adversary_color == Some(mover);
        let mut search_config = SearchConfig::default();
        search_config.deterministic_seed = move_seed(game_seed, moves.len());
        let result = if !victim_play {
            search_config.visits = config.selfplay_visits;
            search_config.root_noise = true;
            run_mcts(&state, agent_a, &search_config)?
        } else if adversary_to_move {
            search_config.visits = config.adversary_visits;
            search_config.root_noise = true;
            search_config.forbid_root_pass =
                config.pass_alive_defense && !territory_settled(&state);
            run_amcts(&state, agent_a, agent_b, &search_config)?
        } else {
            search_config.visits = config.victim_visits;
            run_mcts(&state, agent_b, &search_config)?
        };
        policy_targets.push(policy_target_from(&result, size));
        moves.push(result.chosen_move);
        state = state.apply_move(result.chosen_move)?;
    }

    let (result, utility) = if state.game_over() {
        let score = score_tromp_taylor(&state);
        match score.winner {
            Color::Black => (GameOutcome::BlackWin, 1.0),
            Color::White => (GameOutcome::WhiteWin, -1.0),
        }
    } else {
        // Move limit reached.
        match config.move_limit_policy {
            MoveLimitPolicy::ScoreAsIs => {
                let score = score_tromp_taylor(&state);
                match score.winner {
                    Color::Black => (GameOutcome::BlackWin, 1.0),
                    Color::White => (GameOutcome::WhiteWin, -1.0),
                }
            }
            MoveLimitPolicy::ZeroScoreLoss => {
                (GameOutcome::MoveLimit, adversary_signed(-1.0, adversary_color))
            }
            MoveLimitPolicy::Utility(u) => {
                (GameOutcome::MoveLimit, adversary_signed(u, adversary_color))
            }
        }
    };

    let (black_id, white_id, black_visits, white_visits) = match adversary_color {
        None => (
            "selfplay".to_string(),
            "selfplay".to_string(),
            config.selfplay_visits,
            config.selfplay_visits,
        ),
        Some(Color::Black) => (
            "adversary".to_string(),
            "victim".to_string(),
            config.adversary_visits,
            config.victim_visits,
        ),
        Some(Color::White) => (
            "victim".to_string(),
            "adversary".to_string(),
            config.victim_visits,
            config.adversary_visits,
        ),
    };
    Ok(GameRecord {
        board_size: size,
        komi: DEFAULT_KOMI,
        moves,
        policy_targets,
        result,
        utility,
        adversary_color,
        black_id,
        white_id,
        black_visits,
        white_visits,
        seed: game_seed,
    })
}

/// Maps an adversary-perspective utility to Black's perspective. Self-play
/// games have no adversary; a stalled game is worth 0 to both sides.
fn adversary_signed(adversary_utility: f64, adversary_color: Option<Color>) -> f64 {
    match adversary_color {
        Some(Color::Black) => adversary_utility,
        Some(Color::White) => -adversary_utility,
        None => 0.0,
    }
}

/// Converts a record to training rows, encoding each stored position into
/// the `max_board` feature frame. Which plies are stored depends on `mode`:
/// self-play keeps every ply; victim-play keeps only the adversary's; mixed
/// (defense) keeps the victim's plies from adversarial games and every ply
/// from self-play games. Value targets are the final utility from the
/// mover's perspective.
pub fn to_rows(record: &GameRecord, mode: &GenMode, max_board: usize) -> Vec<TrainingRow> {
    let keep = |mover: Color| match (mode, record.adversary_color) {
        (GenMode::SelfPlay, _) | (_, None) => true,
        (GenMode::VictimPlay, Some(adv)) => mover == adv,
        (GenMode::Mixed { .. }, Some(adv)) => mover != adv,
    };
    let mut rows = Vec::new();
    let mut state = BoardState::new(record.board_size, record.komi);
    for (mv, target) in record.moves.iter().zip(record.policy_targets.iter()) {
        let mover = state.to_move();
        if keep(mover) {
            let sign = match mover {
                Color::Black => 1.0,
                Color::White => -1.0,
            };
            rows.push(TrainingRow {
                features: encode(&state, max_board),
                policy_target: target.clone(),
                value_target: (sign * record.utility) as f32,
                weight: 1.0,
            });
        }
        state = state.apply_move(*mv).expect("record moves are legal");
    }
    rows
}

/// Low-discrepancy schedule for mixed-mode generation: game `index` is
/// adversarial exactly when the running count of adversarial games falls
/// behind `fraction`. Every prefix of the schedule is within one game of the
/// target fraction, and the schedule is a pure function of the index.
pub fn is_adversarial_slot(index: usize, fraction: f64) -> bool {
    let before = (index as f64 * fraction).floor();
    let after = ((index + 1) as f64 * fraction).floor();
    after - before >= 1.0
}

// ---------------------------------------------------------------------------
// Binary segments
// ---------------------------------------------------------------------------

const SEGMENT_MAGIC: &[u8; 8] = b"DESKGODT";
const SEGMENT_VERSION: u32 = 1;

fn segment_header(board_size: usize, max_board: usize) -> Vec<u8> {
    let mut buf = Vec::with_capacity(32);
    buf.extend_from_slice(SEGMENT_MAGIC);
    for value in [
        SEGMENT_VERSION,
        board_size as u32,
        max_board as u32,
        SPATIAL_PLANES as u32,
        GLOBAL_FEATURES as u32,
        (board_size * board_size + 1) as u32,
    ] {
        buf.extend_from_slice(&value.to_le_bytes());
    }
    buf
}

fn row_width(board_size: usize, max_board: usize) -> usize {
    4 * (max_board * max_board * SPATIAL_PLANES
        + GLOBAL_FEATURES
        + board_size * board_size
        + 1
        + 2)
}

fn encode_rows(rows: &[TrainingRow]) -> Result<(usize, usize, Vec<u8>), GenError> {
    let first = rows
        .first()
        .ok_or_else(|| GenError::Config("cannot write an empty segment".into()))?;
    let board_size = first.features.board_size;
    let max_board = first.features.max_board;
    let mut buf = Vec::with_capacity(rows.len() * row_width(board_size, max_board));
    for row in rows {
        if row.features.board_size != board_size || row.features.max_board != max_board {
            return Err(GenError::Config(
                "segments are fixed-width: all rows must share one board size".into(),
            ));
        }
        if row.policy_target.len() != board_size * board_size + 1 {
            return Err(GenError::Config("policy target length mismatch".into()));
        }
        for &x in &row.features.spatial {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        for &x in &row.features.globals {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        for &x in &row.policy_target {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        buf.extend_from_slice(&row.value_target.to_le_bytes());
        buf.extend_from_slice(&row.weight.to_le_bytes());
    }
    Ok((board_size, max_board, buf))
}

/// Writes rows as a fresh segment file (truncating any existing one). All
/// rows must share one board size and feature frame.
pub fn write_segment(path: &Path, rows: &[TrainingRow]) -> Result<(), GenError> {
    let (board_size, max_board, body) = encode_rows(rows)?;
    let mut bytes = segment_header(board_size, max_board);
    bytes.extend_from_slice(&body);
    std::fs::write(path, bytes)?;
    Ok(())
}

/// Appends rows to a segment, creating it when missing. The existing header
/// must match the rows' board size and feature frame.
pub fn append_segment(path: &Path, rows: &[TrainingRow]) -> Result<(), GenError> {
    if rows.is_empty() {
        return Ok(());
    }
    if !path.exists() {
        return write_segment(path, rows);
    }
    let (board_size, max_board, body) = encode_rows(rows)?;
    let existing = std::fs::File::open(path)?;
    use std::io::Read;
    let mut header = [0u8; 32];
    (&existing).read_exact(&mut header).map_err(|_| {
        GenError::CorruptSegment("file shorter than a segment header".into())
    })?;
    drop(existing);
    if header != segment_header(board_size, max_board)[..] {
        return Err(GenError::CorruptSegment(
            "appending rows with a different header".into(),
        ));
    }
    use std::io::Write;
    let mut file = std::fs::OpenOptions::new().append(true).open(path)?;
    file.write_all(&body)?;
    Ok(())
}

/// Reads a whole segment back into rows, validating the header and that the
/// body is a whole number of fixed-width rows.
pub fn read_segment(path: &Path) -> Result<Vec<TrainingRow>, GenError> {
    let bytes = std::fs::read(path)?;
    if bytes.len() < 32 {
        return Err(GenError::CorruptSegment(
            "file shorter than a segment header".into(),
        ));
    }
    if &bytes[..8] != SEGMENT_MAGIC {
        return Err(GenError::CorruptSegment("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(8);
    if version != SEGMENT_VERSION {
        return Err(GenError::CorruptSegment(format!(
            "unsupported segment version {version}"
        )));
    }
    let board_size = word(12) as usize;
    let max_board = word(16) as usize;
    let planes = word(20) as usize;
    let globals = word(24) as usize;
    let policy_len = word(28) as usize;
    if planes != SPATIAL_PLANES
        || globals != GLOBAL_FEATURES
        || policy_len != board_size * board_size + 1
        || board_size > max_board
    {
        return Err(GenError::CorruptSegment("inconsistent header".into()));
    }
    let width = row_width(board_size, max_board);
    let body = &bytes[32..];
    if body.len() % width != 0 {
        return Err(GenError::CorruptSegment(format!(
            "body length {} is not a multiple of the row width {width}",
            body.len()
        )));
    }
    let mut rows = Vec::with_capacity(body.len() / width);
    let mut cursor = body;
    let mut take = |n: usize| -> Vec<f32> {
        let (head, tail) = cursor.split_at(4 * n);
        cursor = tail;
        head.chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    for _ in 0..body.len() / width {
        let spatial = take(max_board * max_board * SPATIAL_PLANES);
        let globals_v = take(GLOBAL_FEATURES);
        let policy_target = take(policy_len);
        let tail = take(2);
        rows.push(TrainingRow {
            features: FeatureTensor {
                board_size,
                max_board,
                spatial,
                globals: globals_v.try_into().expect("exactly GLOBAL_FEATURES values"),
            },
            policy_target,
            value_target: tail[0],
            weight: tail[1],
        });
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Generation driver
// ---------------------------------------------------------------------------

/// One game's entry in the generation manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameSummary {
    pub index: usize,
    pub board_size: usize,
    /// `"selfplay"` or `"victimplay"` after resolving mixed slots.
    pub kind: String,
    pub game_seed: u64,
    pub adversary_color: Option<String>,
    pub result: GameOutcome,
    pub utility: f64,
    pub rows: usize,
    pub sgf: String,
    pub segment: String,
}

/// Reproducibility manifest for a generation run: the exact config, master
/// seed, and per-game provenance. Serialized as pretty JSON so reruns are
/// byte-comparable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub seed: u64,
    pub max_board: usize,
    pub total_rows: u64,
    pub config: GenConfig,
    pub games: Vec<GameSummary>,
}

impl Manifest {
    pub fn save(&self, path: &Path) -> Result<(), GenError> {
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Manifest, GenError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| GenError::CorruptSegment(format!("manifest: {e}")))
    }
}

/// Generates `games` games into `out_dir`: per-board-size row segments
/// (`rows_NN.bin`), one SGF sidecar per game under `games/`, and
/// `manifest.json`. In mixed mode `agent_a` is the frozen adversary and
/// `agent_b` the learning victim: slots resolved through
/// [`is_adversarial_slot`] pair them as victim-play, and the remaining
/// self-play slots use `agent_b` on both sides. Rows are extracted with the
/// run's mode semantics (see [`to_rows`]). Everything is a deterministic
/// function of `(config, seed)`.
pub fn generate_games(
    out_dir: &Path,
    agent_a: &dyn Evaluator,
    agent_b: &dyn Evaluator,
    config: &GenConfig,
    games: usize,
    seed: u64,
    max_board: usize,
) -> Result<Manifest, GenError> {
    config.validate()?;
    std::fs::create_dir_all(out_dir.join("games"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut manifest = Manifest {
        format_version: 1,
        seed,
        max_board,
        total_rows: 0,
        config: config.clone(),
        games: Vec::with_capacity(games),
    };
    for index in 0..games {
        let mixed = matches!(config.mode, GenMode::Mixed { .. });
        let game_config = GenConfig {
            mode: match config.mode {
                GenMode::Mixed { adversary_fraction } => {
                    if is_adversarial_slot(index, adversary_fraction) {
                        GenMode::VictimPlay
                    } else {
                        GenMode::SelfPlay
                    }
                }
                mode => mode,
            },
            ..config.clone()
        };
        // Mixed runs belong to the learner (agent_b): its self-play slots
        // must not be played by the frozen adversary.
        let first = if mixed && game_config.mode == GenMode::SelfPlay {
            agent_b
        } else {
            agent_a
        };
        let record = play_training_game(first, agent_b, &game_config, &mut rng)?;
        let rows = to_rows(&record, &config.mode, max_board);

        let segment = format!("rows_{:02}.bin", record.board_size);
        append_segment(&out_dir.join(&segment), &rows)?;
        let sgf = format!("games/game_{index:05}.sgf");
        std::fs::write(out_dir.join(&sgf), write_sgf(&record.to_sgf()))?;

        manifest.total_rows += rows.len() as u64;
        manifest.games.push(GameSummary {
            index,
            board_size: record.board_size,
            kind: match game_config.mode {
                GenMode::SelfPlay => "selfplay".to_string(),
                _ => "victimplay".to_string(),
            },
            game_seed: record.seed,
            adversary_color: record.adversary_color.map(|c| {
                match c {
                    Color::Black => "black",
                    Color::White => "white",
                }
                .to_string()
            }),
            result: record.result,
            utility: record.utility,
            rows: rows.len(),
            sgf,
            segment,
        });
    }
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{FnEvaluator, PolicyValue, UniformEvaluator};

    fn tagged_row(tag: f32) -> TrainingRow {
        let state = BoardState::new(5, DEFAULT_KOMI);
        TrainingRow {
            features: encode(&state, 5),
            policy_target: vec![1.0 / 26.0; 26],
            value_target: 0.0,
            weight: tag,
        }
    }

    #[test]
    fn window_formula_matches_published_points() {
        assert_eq!(window_size(250_000, 250_000).unwrap(), 250_000);

        let published = window_size(2_898_845_681, 250_000).unwrap();
        let target = 68_000_000.0;
        let deviation = (published as f64 - target).abs() / target;
        assert!(deviation < 0.02, "m = {published}, off by {deviation:.4}");

        for n in [1_000_000u64, 10_000_000, 100_000_000] {
            assert!(window_size(2 * n, 250_000).unwrap() > window_size(n, 250_000).unwrap());
        }

        assert!(matches!(
            window_size(100, 250_000),
            Err(GenError::Domain(_))
        ));
        assert!(matches!(window_size(10, 0), Err(GenError::Domain(_))));
    }

    #[test]
    fn window_capacity_tracks_formula_and_evicts_oldest_first() {
        let mut window = DataWindow::new(50);
        for i in 0..500u32 {
            window.push(tagged_row(i as f32));
            let n = window.total_rows();
            assert_eq!(n, (i + 1) as u64);
            let capacity = window_size(n.max(50), 50).unwrap();
            assert_eq!(window.capacity(), capacity);
            assert!(window.len() as u64 <= capacity);
            if n >= 50 {
                assert_eq!(window.len() as u64, capacity, "pool fills to capacity");
            }
            // Append order, oldest first: the front is the oldest survivor.
            let expected_front = (i + 1).saturating_sub(window.len() as u32) as f32;
            assert_eq!(window.rows().next().unwrap().weight, expected_front);
            assert_eq!(window.rows().last().unwrap().weight, i as f32);
        }
    }

    #[test]
    fn warm_start_preseeds_newest_history_up_to_capacity() {
        let mut untouched = DataWindow::new(1000);
        untouched.warm_start(Vec::new(), 0);
        assert_eq!(untouched.total_rows(), 0);
        assert_eq!(untouched.len(), 0);

        let mut window = DataWindow::new(1000);
        let history: Vec<TrainingRow> = (0..20_000).map(|i| tagged_row(i as f32)).collect();
        window.warm_start(history, 40_000);
        assert_eq!(window.total_rows(), 40_000);
        let capacity = window_size(40_000, 1000).unwrap() as usize;
        assert_eq!(window.len(), capacity, "pool holds exactly capacity rows");
        // The newest history rows survive: tags 20000-capacity .. 19999.
        let first_tag = (20_000 - capacity) as f32;
        assert_eq!(window.rows().next().unwrap().weight, first_tag);
        assert_eq!(window.rows().last().unwrap().weight, 19_999.0);
    }

    #[test]
    fn sampling_after_warm_start_sees_old_and_new_rows() {
        let mut window = DataWindow::new(1000);
        let history: Vec<TrainingRow> = (0..8000).map(|_| tagged_row(1.0)).collect();
        window.warm_start(history, 40_000);
        for _ in 0..3000 {
            window.push(tagged_row(2.0));
        }
        assert!(window.rows().any(|r| r.weight == 1.0), "old rows evicted");
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let batch = window.sample_batch(2000, &mut rng).unwrap();
        let old = batch.rows.iter().filter(|r| r.weight == 1.0).count();
        let new = batch.rows.iter().filter(|r| r.weight == 2.0).count();
        assert_eq!(old + new, 2000);
        assert!(old > 100, "old history absent from samples ({old})");
        assert!(new > 100, "new rows absent from samples ({new})");
    }

    #[test]
    fn batch_sampling_is_uniform_with_replacement() {
        let mut window = DataWindow::new(10);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(matches!(
            window.sample_batch(0, &mut rng),
            Err(GenError::EmptyWindow)
        ));
        for i in 0..10 {
            window.push(tagged_row(i as f32));
        }
        assert!(window.sample_batch(0, &mut rng).unwrap().rows.is_empty());

        let draws = 100_000usize;
        let mut counts = [0u64; 10];
        let batch = window.sample_batch(draws, &mut rng).unwrap();
        for row in &batch.rows {
            counts[row.weight as usize] += 1;
        }
        let expected = draws as f64 / 10.0;
        let chi_square: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // 99.9th percentile of chi-square with 9 degrees of freedom.
        assert!(chi_square < 27.877, "chi-square {chi_square}");

        let mut single = DataWindow::new(10);
        single.push(tagged_row(7.0));
        let batch = single.sample_batch(5, &mut rng).unwrap();
        assert!(batch.rows.iter().all(|r| r.weight == 7.0));
    }

    #[test]
    fn board_size_sampler_matches_the_full_scale_table() {
        let distribution = paper_board_size_distribution();
        let total: f64 = distribution.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
        validate_distribution(&distribution).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let draws = 1_000_000usize;
        let mut count19 = 0usize;
        for _ in 0..draws {
            let size = sample_board_size(&distribution, &mut rng);
            assert!(distribution.contains_key(&size), "size {size} off support");
            if size == 19 {
                count19 += 1;
            }
        }
        let freq = count19 as f64 / draws as f64;
        assert!((freq - 0.536).abs() <= 0.002, "19×19 frequency {freq}");

        let point = BTreeMap::from([(9usize, 1.0f64)]);
        for _ in 0..100 {
            assert_eq!(sample_board_size(&point, &mut rng), 9);
        }
    }

    #[test]
    fn desk_distribution_scales_the_table_shape() {
        let desk = desk_board_size_distribution(5, 9);
        assert_eq!(desk.keys().copied().collect::<Vec<_>>(), vec![5, 6, 7, 8, 9]);
        let total: f64 = desk.values().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let (&largest, _) = desk.iter().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert_eq!(largest, 9, "the biggest desk board dominates");
        assert!(desk[&9] > 0.5);

        let point = desk_board_size_distribution(7, 7);
        assert_eq!(point, BTreeMap::from([(7usize, 1.0f64)]));
    }

    fn quick_config(mode: GenMode) -> GenConfig {
        GenConfig {
            mode,
            selfplay_visits: 4,
            adversary_visits: 4,
            victim_visits: 2,
            board_size_distribution: BTreeMap::from([(5usize, 1.0f64)]),
            move_limit_factor: 400.0,
            move_limit_policy: MoveLimitPolicy::ScoreAsIs,
            pass_alive_defense: false,
        }
    }

    #[test]
    fn selfplay_rows_cover_every_ply_with_alternating_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let config = quick_config(GenMode::SelfPlay);
        let record = play_training_game(&UniformEvaluator, &UniformEvaluator, &config, &mut rng)
            .unwrap();
        assert!(record.adversary_color.is_none());
        assert_eq!(record.moves.len(), record.policy_targets.len());
        assert!(record.utility.abs() == 1.0, "scored game is decisive");

        let rows = to_rows(&record, &config.mode, 5);
        assert_eq!(rows.len(), record.moves.len(), "self-play keeps all plies");
        for pair in rows.windows(2) {
            assert_eq!(pair[0].value_target, -pair[1].value_target);
        }
        for row in &rows {
            let sum: f32 = row.policy_target.iter().sum();
            assert!((sum - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn victimplay_rows_are_adversary_positions_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let config = quick_config(GenMode::VictimPlay);
        let record = play_training_game(&UniformEvaluator, &UniformEvaluator, &config, &mut rng)
            .unwrap();
        let adversary = record.adversary_color.unwrap();
        let plies = record.moves.len();
        let rows = to_rows(&record, &config.mode, 5);
        assert!(rows.len() <= plies.div_ceil(2), "at most every other ply");
        // The encoded to-move flag must match the adversary's color in every
        // row: victim-to-move positions never become training data.
        for row in &rows {
            let to_move_is_black = row.features.globals[3] == 1.0;
            assert_eq!(to_move_is_black, adversary == Color::Black);
        }
        let adversary_plies = {
            let mut state = BoardState::new(5, DEFAULT_KOMI);
            let mut count = 0;
            for &mv in &record.moves {
                if state.to_move() == adversary {
                    count += 1;
                }
                state = state.apply_move(mv).unwrap();
            }
            count
        };
        assert_eq!(rows.len(), adversary_plies);

        // Mixed-mode extraction from the same adversarial record keeps the
        // other side (the defending victim's plies).
        let defense_rows = to_rows(
            &record,
            &GenMode::Mixed { adversary_fraction: 0.18 },
            5,
        );
        assert_eq!(defense_rows.len(), plies - adversary_plies);
    }

    #[test]
    fn move_limit_policies_set_result_and_utility() {
        // A factor of 30 gives round(30·25/361) = 2 plies on 5×5.
        for (policy, expect_result, expect_utility) in [
            (MoveLimitPolicy::ZeroScoreLoss, GameOutcome::MoveLimit, -1.0),
            (MoveLimitPolicy::Utility(-1.6), GameOutcome::MoveLimit, -1.6),
        ] {
            let mut rng = ChaCha8Rng::seed_from_u64(23);
            let config = GenConfig {
                move_limit_factor: 30.0,
                move_limit_policy: policy,
                ..quick_config(GenMode::VictimPlay)
            };
            assert_eq!(config.move_limit(5), 2);
            let record =
                play_training_game(&UniformEvaluator, &UniformEvaluator, &config, &mut rng)
                    .unwrap();
            assert_eq!(record.moves.len(), 2);
            assert_eq!(record.result, expect_result);
            assert_eq!(record.adversary_utility().unwrap(), expect_utility);
        }

        // Scoring as-is never reports a move-limit result.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let config = GenConfig {
            move_limit_factor: 30.0,
            ..quick_config(GenMode::SelfPlay)
        };
        let record =
            play_training_game(&UniformEvaluator, &UniformEvaluator, &config, &mut rng).unwrap();
        assert_ne!(record.result, GameOutcome::MoveLimit);
        assert_eq!(record.utility.abs(), 1.0);

        // Self-play stalls have no adversary to penalize.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let config = GenConfig {
            move_limit_factor: 30.0,
            move_limit_policy: MoveLimitPolicy::ZeroScoreLoss,
            ..quick_config(GenMode::SelfPlay)
        };
        let record =
            play_training_game(&UniformEvaluator, &UniformEvaluator, &config, &mut rng).unwrap();
        assert_eq!(record.result, GameOutcome::MoveLimit);
        assert_eq!(record.utility, 0.0);
        assert_eq!(record.adversary_utility(), None);
    }

    #[test]
    fn fixed_seeds_reproduce_records_exactly() {
        let config = quick_config(GenMode::VictimPlay);
        let mut a = ChaCha8Rng::seed_from_u64(31);
        let mut b = ChaCha8Rng::seed_from_u64(31);
        let first =
            play_training_game(&UniformEvaluator, &UniformEvaluator, &config, &mut a).unwrap();
        let second =
            play_training_game(&UniformEvaluator, &UniformEvaluator, &config, &mut b).unwrap();
        assert_eq!(first, second);

        let mut c = ChaCha8Rng::seed_from_u64(32);
        let third =
            play_training_game(&UniformEvaluator, &UniformEvaluator, &config, &mut c).unwrap();
        assert_ne!(first.seed, third.seed);
    }

    #[test]
    fn territory_settled_tracks_pass_alive_cover() {
        // Empty board: one big vacant region, nothing pass-alive.
        assert!(!territory_settled(&BoardState::new(5, DEFAULT_KOMI)));

        // Everything filled except scattered small regions: settled, no
        // pass-alive analysis needed (all regions are 4 points or fewer).
        let crowded = BoardState::from_diagram(
            ". x x o .\n\
             x x o o o\n\
             x o o . .\n\
             x x o o o\n\
             . x x o .",
            Color::Black,
            DEFAULT_KOMI,
        );
        assert!(territory_settled(&crowded));

        // A 6-point eye space enclosed by a pass-alive black chain counts as
        // settled even though the region is larger than 4 points.
        let fortress = BoardState::from_diagram(
            "x x x x x x x\n\
             x . . . x x x\n\
             x . . . x x x\n\
             x x x x x x x\n\
             x x x x x x x\n\
             x x x x x . x\n\
             x x x x x x x",
            Color::White,
            DEFAULT_KOMI,
        );
        assert!(territory_settled(&fortress));

        // Remove the enclosure and the same 6-point region is unsettled.
        let open = BoardState::from_diagram(
            "x x x x . . .\n\
             x . . . x . .\n\
             x . . . x . .\n\
             x x x x x . .\n\
             . . . . . . .\n\
             . . . . . . .\n\
             . . . . . . .",
            Color::White,
            DEFAULT_KOMI,
        );
        assert!(!territory_settled(&open));
    }

    #[test]
    fn pass_alive_defense_blocks_premature_adversary_passes() {
        // An evaluator that overwhelmingly wants to pass.
        let passer = FnEvaluator(|s: &BoardState| {
            let mut pv = PolicyValue::uniform(s.size());
            let n = pv.policy.len();
            pv.policy.iter_mut().for_each(|p| *p = 1e-6);
            pv.policy[n - 1] = 1.0;
            pv
        });

        // Without the defense the game ends immediately by two passes.
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let config = quick_config(GenMode::VictimPlay);
        let record = play_training_game(&passer, &passer, &config, &mut rng).unwrap();
        assert!(record.moves.len() <= 4);
        assert!(record.moves.contains(&Move::Pass));

        // With it, the adversary may never pass while territory is
        // unsettled; on these short games that means no adversary pass at
        // all, and the move limit ends the game instead.
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let config = GenConfig {
            pass_alive_defense: true,
            move_limit_factor: 300.0,
            move_limit_policy: MoveLimitPolicy::ZeroScoreLoss,
            ..quick_config(GenMode::VictimPlay)
        };
        let record = play_training_game(&passer, &passer, &config, &mut rng).unwrap();
        let adversary = record.adversary_color.unwrap();
        let mut state = BoardState::new(5, DEFAULT_KOMI);
        for &mv in &record.moves {
            if state.to_move() == adversary && mv == Move::Pass {
                assert!(
                    territory_settled(&state),
                    "adversary passed with unsettled territory"
                );
            }
            state = state.apply_move(mv).unwrap();
        }
    }

    #[test]
    fn mixed_schedule_is_low_discrepancy() {
        let fraction = 0.18;
        let mut running = 0usize;
        for i in 0..100 {
            if is_adversarial_slot(i, fraction) {
                running += 1;
            }
            let target = (i + 1) as f64 * fraction;
            assert!(
                (running as f64 - target).abs() < 1.0,
                "prefix {i}: {running} vs {target}"
            );
        }
        assert_eq!(running, 18, "exactly 18% of 100 games are adversarial");
        assert!((0..100).all(|i| !is_adversarial_slot(i, 0.0)));
        assert!((0..100).all(|i| is_adversarial_slot(i, 1.0)));
    }

    #[test]
    fn segments_round_trip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.bin");
        let rows: Vec<TrainingRow> = (0..4).map(|i| tagged_row(i as f32)).collect();
        write_segment(&path, &rows).unwrap();
        assert_eq!(read_segment(&path).unwrap(), rows);

        append_segment(&path, &rows[..2].to_vec()).unwrap();
        let reread = read_segment(&path).unwrap();
        assert_eq!(reread.len(), 6);
        assert_eq!(&reread[4..], &rows[..2]);

        // Truncation and corruption are detected.
        let bytes = std::fs::read(&path).unwrap();
        let cut = dir.path().join("cut.bin");
        std::fs::write(&cut, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(
            read_segment(&cut),
            Err(GenError::CorruptSegment(_))
        ));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        std::fs::write(&cut, &bad).unwrap();
        assert!(matches!(
            read_segment(&cut),
            Err(GenError::CorruptSegment(_))
        ));

        // Appending rows of another size is refused.
        let other = TrainingRow {
            features: encode(&BoardState::new(7, DEFAULT_KOMI), 7),
            policy_target: vec![1.0 / 50.0; 50],
            value_target: 0.0,
            weight: 0.0,
        };
        assert!(matches!(
            append_segment(&path, &[other]),
            Err(GenError::CorruptSegment(_))
        ));
    }

    #[test]
    fn generation_run_is_reproducible_on_disk() {
        let config = GenConfig {
            mode: GenMode::Mixed { adversary_fraction: 0.34 },
            ..quick_config(GenMode::SelfPlay)
        };
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        let mut manifests = Vec::new();
        for dir in &dirs {
            manifests.push(
                generate_games(dir.path(), &UniformEvaluator, &UniformEvaluator, &config, 6, 9, 5)
                    .unwrap(),
            );
        }
        assert_eq!(manifests[0], manifests[1]);
        assert_eq!(
            std::fs::read(dirs[0].path().join("manifest.json")).unwrap(),
            std::fs::read(dirs[1].path().join("manifest.json")).unwrap()
        );
        assert_eq!(
            std::fs::read(dirs[0].path().join("rows_05.bin")).unwrap(),
            std::fs::read(dirs[1].path().join("rows_05.bin")).unwrap()
        );

        let manifest = &manifests[0];
        assert_eq!(manifest.games.len(), 6);
        let adversarial = manifest
            .games
            .iter()
            .filter(|g| g.kind == "victimplay")
            .count();
        assert_eq!(adversarial, 2, "0.34 of 6 games, low-discrepancy");
        let loaded = Manifest::load(&dirs[0].path().join("manifest.json")).unwrap();
        assert_eq!(&loaded, manifest);

        // Sidecars parse, replay, and agree with the manifest row counts.
        let rows_on_disk = read_segment(&dirs[0].path().join("rows_05.bin")).unwrap();
        assert_eq!(rows_on_disk.len() as u64, manifest.total_rows);
        for game in &manifest.games {
            let text = std::fs::read_to_string(dirs[0].path().join(&game.sgf)).unwrap();
            let sgf = crate::analysis::parse_sgf(&text).unwrap();
            sgf.replay().unwrap();
            assert_eq!(sgf.board_size, game.board_size);
            if game.kind == "selfplay" {
                assert_eq!(sgf.black_player.as_deref(), Some("selfplay"));
            } else {
                assert!(game.adversary_color.is_some());
            }
        }
    }

    #[test]
    fn zero_adversary_fraction_degenerates_to_pure_selfplay() {
        let config = GenConfig {
            mode: GenMode::Mixed { adversary_fraction: 0.0 },
            ..quick_config(GenMode::SelfPlay)
        };
        let dir = tempfile::tempdir().unwrap();
        let manifest = generate_games(
            dir.path(),
            &UniformEvaluator,
            &UniformEvaluator,
            &config,
            4,
            5,
            5,
        )
        .unwrap();
        assert!(manifest.games.iter().all(|g| g.kind == "selfplay"));
        assert!(manifest.games.iter().all(|g| g.adversary_color.is_none()));
    }

    #[test]
    fn mixed_mode_rejects_direct_play_and_bad_configs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let config = quick_config(GenMode::Mixed { adversary_fraction: 0.5 });
        assert!(matches!(
            play_training_game(&UniformEvaluator, &UniformEvaluator, &config, &mut rng),
            Err(GenError::Config(_))
        ));

        let bad = GenConfig {
            board_size_distribution: BTreeMap::from([(5usize, 0.4f64)]),
            ..quick_config(GenMode::SelfPlay)
        };
        assert!(matches!(bad.validate(), Err(GenError::Config(_))));
        let bad = GenConfig {
            move_limit_factor: 0.0,
            ..quick_config(GenMode::SelfPlay)
        };
        assert!(matches!(bad.validate(), Err(GenError::Config(_))));
        let bad = GenConfig {
            mode: GenMode::Mixed { adversary_fraction: 1.5 },
            ..quick_config(GenMode::SelfPlay)
        };
        assert!(matches!(bad.validate(), Err(GenError::Config(_))));
    }
}

//! Tromp-Taylor rules engine with positional superko.
//!
//! The rules are the modern minimal set: area scoring, suicide illegal,
//! positional superko (a play may not recreate any earlier arrangement of
//! stones), and game end after two consecutive passes. Board sizes from 5x5
//! through 19x19 are supported.
//!
//! [`BoardState`] is an immutable value: [`BoardState::apply_move`] returns a
//! fresh state and never mutates the receiver, which makes search-tree
//! bookkeeping trivial. Grid hashes are incremental Zobrist hashes over stone
//! placement only (see [`zobrist`]), matching the positional-superko rule.

pub mod benson;
pub mod score;
pub mod zobrist;

pub use benson::pass_alive_vertices;
pub use score::{score_tromp_taylor, Score};

use std::fmt;

/// Smallest supported board edge length.
pub const MIN_BOARD: usize = 5;
/// Largest supported board edge length.
pub const MAX_BOARD: usize = 19;
/// Komi used when a configuration does not say otherwise. Non-integral, so
/// scores can never tie.
pub const DEFAULT_KOMI: f64 = 7.5;

/// Stone color. Black always moves first from the empty board.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Color {
    Black,
    White,
}

impl Color {
    pub fn opponent(self) -> Color {
        match self {
            Color::Black => Color::White,
            Color::White => Color::Black,
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Color::Black => write!(f, "black"),
            Color::White => write!(f, "white"),
        }
    }
}

/// Board intersection. `row` 0 is the top edge, `col` 0 the left edge, which
/// matches SGF coordinate order. Ordering is row-major, the canonical move
/// order used for deterministic tie-breaking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Vertex {
    pub row: u8,
    pub col: u8,
}

impl Vertex {
    pub fn new(row: usize, col: usize) -> Vertex {
        Vertex {
            row: row as u8,
            col: col as u8,
        }
    }

    /// Row-major flat index.
    pub fn index(self, size: usize) -> usize {
        self.row as usize * size + self.col as usize
    }

    pub fn from_index(index: usize, size: usize) -> Vertex {
        Vertex::new(index / size, index % size)
    }

    /// Orthogonal neighbors that lie on a `size`-sided board.
    pub fn neighbors(self, size: usize) -> impl Iterator<Item = Vertex> {
        let (r, c) = (self.row as usize, self.col as usize);
        [
            (r > 0).then(|| Vertex::new(r - 1, c)),
            (c > 0).then(|| Vertex::new(r, c - 1)),
            (c + 1 < size).then(|| Vertex::new(r, c + 1)),
            (r + 1 < size).then(|| Vertex::new(r + 1, c)),
        ]
        .into_iter()
        .flatten()
    }
}

/// A move: either a board play or a pass. Derived ordering puts plays first in
/// row-major vertex order and the pass last, which is the canonical move order
/// everywhere ordering matters (legal-move lists, policy indices, tie-breaks).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Move {
    Play(Vertex),
    Pass,
}

impl Move {
    /// Index into a policy vector of length `size*size + 1`: board vertices in
    /// row-major order, then the pass move.
    pub fn policy_index(self, size: usize) -> usize {
        match self {
            Move::Play(v) => v.index(size),
            Move::Pass => size * size,
        }
    }

    pub fn from_policy_index(index: usize, size: usize) -> Move {
        if index == size * size {
            Move::Pass
        } else {
            Move::Play(Vertex::from_index(index, size))
        }
    }
}

/// Everything that can go wrong when driving the rules engine.
#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
pub enum RulesError {
    #[error("vertex is outside the board")]
    OffBoard,
    #[error("vertex is already occupied")]
    OccupiedVertex,
    #[error("move would leave its own chain without liberties")]
    SuicideMove,
    #[error("move would recreate an earlier board position")]
    SuperkoViolation,
    #[error("game has already ended")]
    GameOver,
}

/// Immutable snapshot of a game in progress.
///
/// Invariants maintained by construction: every chain on the grid has at
/// least one liberty; `position_hashes` holds one hash per distinct grid seen
/// so far with the current grid's hash as its last element; `game_over()`
/// becomes true exactly when two consecutive passes have been played.
#[derive(Clone, Debug, PartialEq)]
pub struct BoardState {
    size: usize,
    grid: Vec<Option<Color>>,
    to_move: Color,
    komi: f64,
    consecutive_passes: u8,
    move_count: u32,
    hash: u64,
    position_hashes: Vec<u64>,
    last_move: Option<Move>,
    second_last_move: Option<Move>,
}

impl BoardState {
    /// Empty board with black to move.
    ///
    /// # Panics
    /// If `size` is outside `MIN_BOARD..=MAX_BOARD`.
    pub fn new(size: usize, komi: f64) -> BoardState {
        assert!(
            (MIN_BOARD..=MAX_BOARD).contains(&size),
            "board size {size} outside supported range {MIN_BOARD}..={MAX_BOARD}"
        );
        let hash = zobrist::empty_board_hash(size);
        BoardState {
            size,
            grid: vec![None; size * size],
            to_move: Color::Black,
            komi,
            consecutive_passes: 0,
            move_count: 0,
            hash,
            position_hashes: vec![hash],
            last_move: None,
            second_last_move: None,
        }
    }

    /// Builds a mid-game position from an ASCII diagram: one line per row,
    /// `x`/`X` black, `o`/`O` white, `.` empty, spaces ignored. The position's
    /// history starts at the diagram, so superko only tracks grids reached
    /// from here onward.
    pub fn from_diagram(diagram: &str, to_move: Color, komi: f64) -> BoardState {
        let rows: Vec<Vec<char>> = diagram
            .lines()
            .map(|l| l.chars().filter(|c| !c.is_whitespace()).collect())
            .filter(|r: &Vec<char>| !r.is_empty())
            .collect();
        let size = rows.len();
        assert!(
            (MIN_BOARD..=MAX_BOARD).contains(&size),
            "diagram has {size} rows, outside supported board range"
        );
        let mut state = BoardState::new(size, komi);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), size, "diagram row {r} is not {size} columns");
            for (c, ch) in row.iter().enumerate() {
                let color = match ch {
                    '.' => None,
                    'x' | 'X' => Some(Color::Black),
                    'o' | 'O' => Some(Color::White),
                    other => panic!("unexpected diagram character {other:?}"),
                };
                if let Some(color) = color {
                    let idx = Vertex::new(r, c).index(size);
                    state.grid[idx] = Some(color);
                    state.hash ^= zobrist::stone_hash(idx, color);
                }
            }
        }
        for idx in 0..size * size {
            if state.grid[idx].is_some() {
                let (_, libs) = chain_and_liberties(&state.grid, size, idx);
                assert!(libs > 0, "diagram contains a chain with no liberties");
            }
        }
        state.to_move = to_move;
        state.position_hashes = vec![state.hash];
        state
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn komi(&self) -> f64 {
        self.komi
    }

    /// Replaces the komi (used by the GTP `komi` command). Does not touch the
    /// grid or history.
    pub fn set_komi(&mut self, komi: f64) {
        self.komi = komi;
    }

    pub fn to_move(&self) -> Color {
        self.to_move
    }

    pub fn move_count(&self) -> u32 {
        self.move_count
    }

    pub fn consecutive_passes(&self) -> u8 {
        self.consecutive_passes
    }

    /// True once two consecutive passes have been played.
    pub fn game_over(&self) -> bool {
        self.consecutive_passes >= 2
    }

    /// Zobrist hash of the current grid (stones only).
    pub fn hash(&self) -> u64 {
        self.hash
    }

    /// Hashes of every distinct grid seen so far, oldest first; the last
    /// element is the current grid's hash.
    pub fn position_hashes(&self) -> &[u64] {
        &self.position_hashes
    }

    pub fn stone(&self, v: Vertex) -> Option<Color> {
        self.grid[v.index(self.size)]
    }

    pub fn last_move(&self) -> Option<Move> {
        self.last_move
    }

    pub fn second_last_move(&self) -> Option<Move> {
        self.second_last_move
    }

    /// Number of stones of `color` on the board.
    pub fn stone_count(&self, color: Color) -> usize {
        self.grid.iter().filter(|s| **s == Some(color)).count()
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        let size = self.size;
        (0..size * size).map(move |i| Vertex::from_index(i, size))
    }

    /// Plays a move for the side to move and returns the successor state.
    ///
    /// Captures are resolved before the suicide check (a play that takes the
    /// last liberty of an enemy chain while filling its own is a capture, not
    /// a suicide), and the superko check runs last on the post-capture grid.
    pub fn apply_move(&self, mv: Move) -> Result<BoardState, RulesError> {
        if self.game_over() {
            return Err(RulesError::GameOver);
        }
        match mv {
            Move::Pass => {
                let mut next = self.clone();
                next.to_move = self.to_move.opponent();
                next.consecutive_passes = self.consecutive_passes + 1;
                next.move_count = self.move_count + 1;
                next.second_last_move = self.last_move;
                next.last_move = Some(Move::Pass);
                Ok(next)
            }
            Move::Play(v) => {
                if v.row as usize >= self.size || v.col as usize >= self.size {
                    return Err(RulesError::OffBoard);
                }
                let idx = v.index(self.size);
                if self.grid[idx].is_some() {
                    return Err(RulesError::OccupiedVertex);
                }
                let color = self.to_move;
                let mut grid = self.grid.clone();
                let mut hash = self.hash;
                grid[idx] = Some(color);
                hash ^= zobrist::stone_hash(idx, color);
                for n in v.neighbors(self.size) {
                    let nidx = n.index(self.size);
                    if grid[nidx] == Some(color.opponent()) {
                        let (stones, libs) = chain_and_liberties(&grid, self.size, nidx);
                        if libs == 0 {
                            for s in stones {
                                grid[s] = None;
                                hash ^= zobrist::stone_hash(s, color.opponent());
                            }
                        }
                    }
                }
                let (_, own_libs) = chain_and_liberties(&grid, self.size, idx);
                if own_libs == 0 {
                    return Err(RulesError::SuicideMove);
                }
                if self.position_hashes.contains(&hash) {
                    return Err(RulesError::SuperkoViolation);
                }
                let mut position_hashes = self.position_hashes.clone();
                position_hashes.push(hash);
                Ok(BoardState {
                    size: self.size,
                    grid,
                    to_move: color.opponent(),
                    komi: self.komi,
                    consecutive_passes: 0,
                    move_count: self.move_count + 1,
                    hash,
                    position_hashes,
                    last_move: Some(mv),
                    second_last_move: self.last_move,
                })
            }
        }
    }

    /// True when `mv` would be accepted by [`BoardState::apply_move`].
    pub fn is_legal(&self, mv: Move) -> bool {
        self.apply_move(mv).is_ok()
    }

    /// All legal moves in canonical order: board plays row-major, then pass.
    /// Pass is always legal while the game is running.
    pub fn legal_moves(&self) -> Result<Vec<Move>, RulesError> {
        if self.game_over() {
            return Err(RulesError::GameOver);
        }
        let mut moves = Vec::with_capacity(self.size * self.size + 1);
        for v in self.vertices() {
            if self.grid[v.index(self.size)].is_none() && self.is_legal(Move::Play(v)) {
                moves.push(Move::Play(v));
            }
        }
        moves.push(Move::Pass);
        Ok(moves)
    }

    /// Empty vertices whose play would be rejected only because of positional
    /// superko (i.e. the move is otherwise legal).
    pub fn superko_illegal_vertices(&self) -> Vec<Vertex> {
        let mut out = Vec::new();
        if self.game_over() {
            return out;
        }
        for v in self.vertices() {
            if self.grid[v.index(self.size)].is_none()
                && self.apply_move(Move::Play(v)) == Err(RulesError::SuperkoViolation)
            {
                out.push(v);
            }
        }
        out
    }

    pub(crate) fn grid(&self) -> &[Option<Color>] {
        &self.grid
    }
}

impl fmt::Display for BoardState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // GTP-style column letters skip 'I'.
        write!(f, "  ")?;
        for c in 0..self.size {
            let letter = (b'A' + c as u8 + u8::from(c >= 8)) as char;
            write!(f, " {letter}")?;
        }
        writeln!(f)?;
        for r in 0..self.size {
            // GTP row numbers count from the bottom; internal row 0 is the top.
            write!(f, "{:2}", self.size - r)?;
            for c in 0..self.size {
                let ch = match self.grid[Vertex::new(r, c).index(self.size)] {
                    Some(Color::Black) => 'X',
                    Some(Color::White) => 'O',
                    None => '.',
                };
                write!(f, " {ch}")?;
            }
            writeln!(f)?;
        }
        write!(
            f,
            "{} to move, komi {}, move {}",
            self.to_move, self.komi, self.move_count
        )
    }
}

/// Flood-fills the chain containing `start` and counts its distinct liberties.
fn chain_and_liberties(
    grid: &[Option<Color>],
    size: usize,
    start: usize,
) -> (Vec<usize>, usize) {
    let color = grid[start].expect("chain start must hold a stone");
    let mut stones = vec![start];
    let mut on_chain = vec![false; size * size];
    let mut lib_seen = vec![false; size * size];
    on_chain[start] = true;
    let mut libs = 0;
    let mut cursor = 0;
    while cursor < stones.len() {
        let v = Vertex::from_index(stones[cursor], size);
        cursor += 1;
        for n in v.neighbors(size) {
            let nidx = n.index(size);
            match grid[nidx] {
                None => {
                    if !lib_seen[nidx] {
                        lib_seen[nidx] = true;
                        libs += 1;
                    }
                }
                Some(c) if c == color && !on_chain[nidx] => {
                    on_chain[nidx] = true;
                    stones.push(nidx);
                }
                _ => {}
            }
        }
    }
    (stones, libs)
}

//! SGF game records and the cyclic-attack analysis pipeline.
//!
//! The module has two halves. The first is a small, lossless SGF dialect:
//! enough of the format to store our own games (`GM`, `FF`, `SZ`, `KM`,
//! `RU`, `PB`, `PW`, `B`, `W`, `RE`, `C`) while carrying any properties it
//! does not understand through a parse/write round trip verbatim. The second
//! half turns replayable games into *cycle events*: it finds the move where
//! a large enclosing chain of victim stones is captured, records which
//! vertices were in the captured group, its interior, and both players'
//! stones one ply before the capture, cancels board symmetries with a
//! deterministic D4 normalization, and accumulates many events into
//! per-vertex frequency heatmaps emitted as CSV grids and a self-contained
//! SVG rendering.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::rules::{BoardState, Color, Move, RulesError, Vertex, MAX_BOARD, MIN_BOARD};

/// Everything that can go wrong while parsing, replaying, or aggregating.
#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    /// Malformed SGF text; positions are 1-based.
    #[error("sgf parse error at line {line}, column {col}: {message}")]
    Parse {
        line: usize,
        col: usize,
        message: String,
    },
    /// The move list is not playable under the rules engine.
    #[error("replay failed at move {move_index}: {message}")]
    Replay { move_index: usize, message: String },
    /// Heatmap accumulation across different board sizes.
    #[error("events mix board sizes {0} and {1}")]
    MixedSizes(usize, usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// SGF records
// ---------------------------------------------------------------------------

/// One move node: the stone played (or a pass) plus any annotations.
#[derive(Clone, Debug, PartialEq)]
pub struct SgfMove {
    pub color: Color,
    pub mv: Move,
    /// `C` property attached to the move node.
    pub comment: Option<String>,
    /// Unrecognized properties on the move node, preserved verbatim.
    pub extras: Vec<(String, Vec<String>)>,
}

impl SgfMove {
    pub fn new(color: Color, mv: Move) -> SgfMove {
        SgfMove {
            color,
            mv,
            comment: None,
            extras: Vec::new(),
        }
    }
}

/// A single-line game record: root metadata plus an alternating move list.
/// Variations are out of scope; a game is one principal line.
#[derive(Clone, Debug, PartialEq)]
pub struct SgfGame {
    pub board_size: usize,
    pub komi: f64,
    /// `RU` property; our writer tags games `Tromp-Taylor`.
    pub rules: Option<String>,
    pub black_player: Option<String>,
    pub white_player: Option<String>,
    /// `RE` property, e.g. `B+12.5` or `Void`.
    pub result: Option<String>,
    /// `C` property on the root node.
    pub comment: Option<String>,
    /// Unrecognized root properties, preserved verbatim in input order.
    pub extras: Vec<(String, Vec<String>)>,
    pub moves: Vec<SgfMove>,
}

impl SgfGame {
    pub fn new(board_size: usize, komi: f64) -> SgfGame {
        SgfGame {
            board_size,
            komi,
            rules: Some("Tromp-Taylor".to_string()),
            black_player: None,
            white_player: None,
            result: None,
            comment: None,
            extras: Vec::new(),
            moves: Vec::new(),
        }
    }

    pub fn push_move(&mut self, color: Color, mv: Move) {
        self.moves.push(SgfMove::new(color, mv));
    }

    /// Plays the move list under the rules engine and returns every position,
    /// from the empty board (`[0]`) through the final state (`[moves.len()]`).
    pub fn replay(&self) -> Result<Vec<BoardState>, AnalysisError> {
        let mut states = Vec::with_capacity(self.moves.len() + 1);
        states.push(BoardState::new(self.board_size, self.komi));
        for (i, m) in self.moves.iter().enumerate() {
            let current = states.last().unwrap();
            if current.to_move() != m.color {
                return Err(AnalysisError::Replay {
                    move_index: i,
                    message: format!(
                        "{:?} played out of turn ({:?} to move)",
                        m.color,
                        current.to_move()
                    ),
                });
            }
            let next = current.apply_move(m.mv).map_err(|e: RulesError| {
                AnalysisError::Replay {
                    move_index: i,
                    message: e.to_string(),
                }
            })?;
            states.push(next);
        }
        Ok(states)
    }
}

pub(crate) fn fmt_number(x: f64) -> String {
    if x == x.trunc() {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn escape_sgf(value: &str) -> String {
    let mut out = String::with_capacity(value.len());
    for ch in value.chars() {
        if ch == ']' || ch == '\\' {
            out.push('\\');
        }
        out.push(ch);
    }
    out
}

fn point_to_sgf(mv: Move, out: &mut String) {
    match mv {
        Move::Pass => {}
        Move::Play(v) => {
            out.push((b'a' + v.col) as char);
            out.push((b'a' + v.row) as char);
        }
    }
}

fn push_property(out: &mut String, ident: &str, values: &[String]) {
    out.push_str(ident);
    for v in values {
        out.push('[');
        out.push_str(&escape_sgf(v));
        out.push(']');
    }
}

/// Serializes a game in canonical form: known root properties in a fixed
/// order, preserved unknown properties after them, one node per line.
pub fn write_sgf(game: &SgfGame) -> String {
    let mut out = String::new();
    out.push_str("(;GM[1]FF[4]");
    push_property(&mut out, "SZ", &[format!("{}", game.board_size)]);
    push_property(&mut out, "KM", &[fmt_number(game.komi)]);
    if let Some(rules) = &game.rules {
        push_property(&mut out, "RU", std::slice::from_ref(rules));
    }
    if let Some(pb) = &game.black_player {
        push_property(&mut out, "PB", std::slice::from_ref(pb));
    }
    if let Some(pw) = &game.white_player {
        push_property(&mut out, "PW", std::slice::from_ref(pw));
    }
    if let Some(re) = &game.result {
        push_property(&mut out, "RE", std::slice::from_ref(re));
    }
    if let Some(c) = &game.comment {
        push_property(&mut out, "C", std::slice::from_ref(c));
    }
    for (ident, values) in &game.extras {
        push_property(&mut out, ident, values);
    }
    for m in &game.moves {
        out.push_str("\n;");
        let ident = match m.color {
            Color::Black => "B",
            Color::White => "W",
        };
        out.push_str(ident);
        out.push('[');
        point_to_sgf(m.mv, &mut out);
        out.push(']');
        if let Some(c) = &m.comment {
            push_property(&mut out, "C", std::slice::from_ref(c));
        }
        for (ident, values) in &m.extras {
            push_property(&mut out, ident, values);
        }
    }
    out.push_str(")\n");
    out
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Parser<'a> {
        Parser {
            src: src.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn error(&self, message: impl Into<String>) -> AnalysisError {
        AnalysisError::Parse {
            line: self.line,
            col: self.col,
            message: message.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let b = self.peek()?;
        self.pos += 1;
        if b == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(b)
    }

    fn skip_whitespace(&mut self) {
        while matches!(self.peek(), Some(b) if b.is_ascii_whitespace()) {
            self.bump();
        }
    }

    fn expect(&mut self, ch: u8) -> Result<(), AnalysisError> {
        match self.peek() {
            Some(b) if b == ch => {
                self.bump();
                Ok(())
            }
            Some(b) => Err(self.error(format!("expected '{}', found '{}'", ch as char, b as char))),
            None => Err(self.error(format!("expected '{}', found end of input", ch as char))),
        }
    }

    /// Property identifier: one or more uppercase ASCII letters.
    fn ident(&mut self) -> Result<String, AnalysisError> {
        let mut out = String::new();
        while matches!(self.peek(), Some(b) if b.is_ascii_uppercase()) {
            out.push(self.bump().unwrap() as char);
        }
        if out.is_empty() {
            Err(self.error("expected a property identifier"))
        } else {
            Ok(out)
        }
    }

    /// One `[...]` value with backslash escapes resolved.
    fn value(&mut self) -> Result<String, AnalysisError> {
        self.expect(b'[')?;
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(self.error("unterminated property value")),
                Some(b']') => return Ok(out),
                Some(b'\\') => match self.bump() {
                    None => return Err(self.error("dangling escape at end of input")),
                    Some(b) => out.push(b as char),
                },
                Some(b) => out.push(b as char),
            }
        }
    }

    /// All properties of one node, in input order.
    fn node(&mut self) -> Result<Vec<(String, Vec<String>)>, AnalysisError> {
        let mut props = Vec::new();
        loop {
            self.skip_whitespace();
            match self.peek() {
                Some(b) if b.is_ascii_uppercase() => {
                    let ident = self.ident()?;
                    let mut values = Vec::new();
                    self.skip_whitespace();
                    if self.peek() != Some(b'[') {
                        return Err(self.error(format!("property {ident} has no value")));
                    }
                    while self.peek() == Some(b'[') {
                        values.push(self.value()?);
                        self.skip_whitespace();
                    }
                    props.push((ident, values));
                }
                _ => return Ok(props),
            }
        }
    }
}

fn parse_point(value: &str, size: usize, parser: &Parser) -> Result<Move, AnalysisError> {
    if value.is_empty() || (value == "tt" && size <= 19) {
        return Ok(Move::Pass);
    }
    let bytes = value.as_bytes();
    if bytes.len() != 2 || !bytes.iter().all(|b| b.is_ascii_lowercase()) {
        return Err(parser.error(format!("malformed point '{value}'")));
    }
    let col = (bytes[0] - b'a') as usize;
    let row = (bytes[1] - b'a') as usize;
    if row >= size || col >= size {
        return Err(parser.error(format!("point '{value}' is off the {size}x{size} board")));
    }
    Ok(Move::Play(Vertex::new(row, col)))
}

/// Parses one game in the supported subset. The board size defaults to 19
/// when `SZ` is absent; sizes outside the engine's range are rejected.
pub fn parse_sgf(text: &str) -> Result<SgfGame, AnalysisError> {
    let mut p = Parser::new(text);
    p.skip_whitespace();
    p.expect(b'(')?;
    p.skip_whitespace();
    p.expect(b';')?;
    let root = p.node()?;

    let mut game = SgfGame {
        board_size: 19,
        komi: 7.5,
        rules: None,
        black_player: None,
        white_player: None,
        result: None,
        comment: None,
        extras: Vec::new(),
        moves: Vec::new(),
    };
    for (ident, values) in root {
        let first = values.first().cloned().unwrap_or_default();
        match ident.as_str() {
            "GM" => {
                if first != "1" {
                    return Err(p.error(format!("unsupported game type GM[{first}]")));
                }
            }
            "FF" => {}
            "SZ" => {
                let size: usize = first
                    .parse()
                    .map_err(|_| p.error(format!("malformed board size SZ[{first}]")))?;
                if !(MIN_BOARD..=MAX_BOARD).contains(&size) {
                    return Err(p.error(format!("unsupported board size {size}")));
                }
                game.board_size = size;
            }
            "KM" => {
                game.komi = first
                    .parse()
                    .map_err(|_| p.error(format!("malformed komi KM[{first}]")))?;
            }
            "RU" => game.rules = Some(first),
            "PB" => game.black_player = Some(first),
            "PW" => game.white_player = Some(first),
            "RE" => game.result = Some(first),
            "C" => game.comment = Some(first),
            "B" | "W" => return Err(p.error("move property in the root node")),
            _ => game.extras.push((ident, values)),
        }
    }

    loop {
        p.skip_whitespace();
        match p.peek() {
            Some(b';') => {
                p.bump();
                let props = p.node()?;
                let mut mv: Option<SgfMove> = None;
                let mut comment = None;
                let mut extras = Vec::new();
                for (ident, values) in props {
                    let first = values.first().cloned().unwrap_or_default();
                    match ident.as_str() {
                        "B" | "W" => {
                            if mv.is_some() {
                                return Err(p.error("two moves in one node"));
                            }
                            let color = if ident == "B" {
                                Color::Black
                            } else {
                                Color::White
                            };
                            mv = Some(SgfMove::new(
                                color,
                                parse_point(&first, game.board_size, &p)?,
                            ));
                        }
                        "C" => comment = Some(first),
                        _ => extras.push((ident, values)),
                    }
                }
                match mv {
                    Some(mut m) => {
                        m.comment = comment;
                        m.extras = extras;
                        game.moves.push(m);
                    }
                    None => return Err(p.error("node without a move property")),
                }
            }
            Some(b')') => {
                p.bump();
                break;
            }
            Some(b'(') => return Err(p.error("variations are not supported")),
            Some(b) => return Err(p.error(format!("unexpected character '{}'", b as char))),
            None => return Err(p.error("unterminated game tree")),
        }
    }
    p.skip_whitespace();
    if p.peek().is_some() {
        return Err(p.error("trailing content after the game tree"));
    }
    Ok(game)
}

// ---------------------------------------------------------------------------
// D4 symmetry
// ---------------------------------------------------------------------------

/// One of the eight board symmetries: `quarter_turns` clockwise rotations
/// followed by an optional flip across the main diagonal. The fixed
/// enumeration order of [`D4::ALL`] (rotations first, then their flipped
/// counterparts) is the tie-break order for normalization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct D4 {
    pub quarter_turns: u8,
    pub diagonal_flip: bool,
}

impl D4 {
    pub const IDENTITY: D4 = D4 {
        quarter_turns: 0,
        diagonal_flip: false,
    };

    pub const ALL: [D4; 8] = [
        D4 { quarter_turns: 0, diagonal_flip: false },
        D4 { quarter_turns: 1, diagonal_flip: false },
        D4 { quarter_turns: 2, diagonal_flip: false },
        D4 { quarter_turns: 3, diagonal_flip: false },
        D4 { quarter_turns: 0, diagonal_flip: true },
        D4 { quarter_turns: 1, diagonal_flip: true },
        D4 { quarter_turns: 2, diagonal_flip: true },
        D4 { quarter_turns: 3, diagonal_flip: true },
    ];

    /// Position in [`D4::ALL`].
    pub fn index(self) -> usize {
        self.quarter_turns as usize + if self.diagonal_flip { 4 } else { 0 }
    }

    pub fn apply(self, v: Vertex, size: usize) -> Vertex {
        let mut r = v.row as usize;
        let mut c = v.col as usize;
        for _ in 0..self.quarter_turns {
            let (nr, nc) = (c, size - 1 - r);
            r = nr;
            c = nc;
        }
        if self.diagonal_flip {
            std::mem::swap(&mut r, &mut c);
        }
        Vertex::new(r, c)
    }

    pub fn apply_set(self, set: &BTreeSet<Vertex>, size: usize) -> BTreeSet<Vertex> {
        set.iter().map(|&v| self.apply(v, size)).collect()
    }
}

// ---------------------------------------------------------------------------
// Cycle detection
// ---------------------------------------------------------------------------

/// Thresholds that operationalize "a large cyclic group": the captured chain
/// must have at least `min_group` stones and its interior must hold at least
/// `min_interior_adversary` adversary stones.
#[derive(Clone, Copy, Debug)]
pub struct CycleConfig {
    pub min_group: usize,
    pub min_interior_adversary: usize,
}

impl Default for CycleConfig {
    fn default() -> CycleConfig {
        CycleConfig {
            min_group: 6,
            min_interior_adversary: 1,
        }
    }
}

/// A detected cyclic capture. All vertex sets are snapshots of the position
/// one ply before the capture; `capture_move_index` indexes the capturing
/// move in the game's move list.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleEvent {
    /// Free-form provenance tag (file name, game index); empty by default.
    pub game_ref: String,
    pub board_size: usize,
    pub capture_move_index: usize,
    /// The captured victim chain.
    pub captured_group: BTreeSet<Vertex>,
    /// Vertices that cannot reach the board edge without crossing the chain.
    pub interior_region: BTreeSet<Vertex>,
    pub interior_adversary: BTreeSet<Vertex>,
    pub interior_victim: BTreeSet<Vertex>,
    /// Every adversary stone on the board at capture time.
    pub adversary_stones: BTreeSet<Vertex>,
    /// Victim stones outside the captured group.
    pub victim_other_stones: BTreeSet<Vertex>,
    /// Symmetry applied by [`normalize_symmetry`]; identity when raw.
    pub normalization: D4,
}

/// Vertices that cannot reach the board edge without passing through
/// `barrier`: flood from every non-barrier edge vertex and keep the rest.
fn enclosed_interior(size: usize, barrier: &BTreeSet<Vertex>) -> BTreeSet<Vertex> {
    let mut reachable = vec![false; size * size];
    let mut frontier = Vec::new();
    for i in 0..size {
        for v in [
            Vertex::new(0, i),
            Vertex::new(size - 1, i),
            Vertex::new(i, 0),
            Vertex::new(i, size - 1),
        ] {
            if !barrier.contains(&v) && !reachable[v.index(size)] {
                reachable[v.index(size)] = true;
                frontier.push(v);
            }
        }
    }
    while let Some(v) = frontier.pop() {
        for n in v.neighbors(size) {
            if !barrier.contains(&n) && !reachable[n.index(size)] {
                reachable[n.index(size)] = true;
                frontier.push(n);
            }
        }
    }
    (0..size * size)
        .map(|i| Vertex::from_index(i, size))
        .filter(|v| !barrier.contains(v) && !reachable[v.index(size)])
        .collect()
}

/// Splits `stones` into connected chains.
fn chains_of(stones: &BTreeSet<Vertex>, size: usize) -> Vec<BTreeSet<Vertex>> {
    let mut chains = Vec::new();
    let mut seen: BTreeSet<Vertex> = BTreeSet::new();
    for &start in stones {
        if seen.contains(&start) {
            continue;
        }
        let mut chain = BTreeSet::new();
        let mut frontier = vec![start];
        seen.insert(start);
        while let Some(v) = frontier.pop() {
            chain.insert(v);
            for n in v.neighbors(size) {
                if stones.contains(&n) && seen.insert(n) {
                    frontier.push(n);
                }
            }
        }
        chains.push(chain);
    }
    chains
}

fn stones_of(state: &BoardState, color: Color) -> BTreeSet<Vertex> {
    state
        .vertices()
        .filter(|&v| state.stone(v) == Some(color))
        .collect()
}

/// Scans a game for the largest single-chain capture of victim stones whose
/// removal exposes an interior holding adversary stones, with default
/// thresholds. Returns `None` when no capture qualifies.
pub fn detect_cycle_capture(
    game: &SgfGame,
    victim: Color,
) -> Result<Option<CycleEvent>, AnalysisError> {
    detect_cycle_capture_with(game, victim, &CycleConfig::default())
}

/// [`detect_cycle_capture`] with explicit thresholds. Candidates are ranked
/// by captured-chain size; ties keep the earliest capture.
pub fn detect_cycle_capture_with(
    game: &SgfGame,
    victim: Color,
    config: &CycleConfig,
) -> Result<Option<CycleEvent>, AnalysisError> {
    let states = game.replay()?;
    let size = game.board_size;
    let adversary = victim.opponent();
    let mut best: Option<CycleEvent> = None;
    for (i, m) in game.moves.iter().enumerate() {
        if m.color != adversary {
            continue;
        }
        let before = &states[i];
        let after = &states[i + 1];
        let captured: BTreeSet<Vertex> = stones_of(before, victim)
            .into_iter()
            .filter(|&v| after.stone(v) != Some(victim))
            .collect();
        if captured.len() < config.min_group {
            continue;
        }
        for chain in chains_of(&captured, size) {
            if chain.len() < config.min_group {
                continue;
            }
            let interior = enclosed_interior(size, &chain);
            let adversary_all = stones_of(before, adversary);
            let victim_all = stones_of(before, victim);
            let interior_adversary: BTreeSet<Vertex> =
                interior.intersection(&adversary_all).copied().collect();
            if interior_adversary.len() < config.min_interior_adversary {
                continue;
            }
            let event = CycleEvent {
                game_ref: String::new(),
                board_size: size,
                capture_move_index: i,
                interior_victim: interior.intersection(&victim_all).copied().collect(),
                victim_other_stones: victim_all.difference(&chain).copied().collect(),
                captured_group: chain,
                interior_region: interior,
                interior_adversary,
                adversary_stones: adversary_all,
                normalization: D4::IDENTITY,
            };
            let better = match &best {
                None => true,
                Some(b) => event.captured_group.len() > b.captured_group.len(),
            };
            if better {
                best = Some(event);
            }
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Symmetry normalization
// ---------------------------------------------------------------------------

fn centroid(set: &BTreeSet<Vertex>) -> (f64, f64) {
    let n = set.len().max(1) as f64;
    let (mut r, mut c) = (0.0, 0.0);
    for v in set {
        r += v.row as f64;
        c += v.col as f64;
    }
    (r / n, c / n)
}

/// Picks the first element of [`D4::ALL`] that puts the captured group's
/// centroid in the closed top-left quadrant and on or above the main
/// diagonal, and applies it to every vertex set of the event. Closed
/// inequalities make the choice total; the fixed enumeration order breaks
/// ties (a centroid exactly at the board center selects the identity).
pub fn normalize_symmetry(event: &CycleEvent, size: usize) -> CycleEvent {
    let center = (size as f64 - 1.0) / 2.0;
    let element = D4::ALL
        .into_iter()
        .find(|t| {
            let transformed = t.apply_set(&event.captured_group, size);
            let (r, c) = centroid(&transformed);
            r <= center && c <= center && r <= c
        })
        .expect("some D4 element always satisfies the closed predicate");
    CycleEvent {
        game_ref: event.game_ref.clone(),
        board_size: event.board_size,
        capture_move_index: event.capture_move_index,
        captured_group: element.apply_set(&event.captured_group, size),
        interior_region: element.apply_set(&event.interior_region, size),
        interior_adversary: element.apply_set(&event.interior_adversary, size),
        interior_victim: element.apply_set(&event.interior_victim, size),
        adversary_stones: element.apply_set(&event.adversary_stones, size),
        victim_other_stones: element.apply_set(&event.victim_other_stones, size),
        normalization: element,
    }
}

// ---------------------------------------------------------------------------
// Heatmaps
// ---------------------------------------------------------------------------

/// Per-vertex frequency grids over a set of cycle events. Each grid counts,
/// for every vertex, how many events had that vertex in the corresponding
/// category, so every cell lies in `[0, event_count]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Heatmap {
    pub size: usize,
    pub event_count: u64,
    pub cyclic: Vec<u64>,
    pub adversary: Vec<u64>,
    pub victim_other: Vec<u64>,
    pub interior_adversary: Vec<u64>,
    pub interior_victim: Vec<u64>,
}

impl Heatmap {
    pub fn zeros(size: usize) -> Heatmap {
        Heatmap {
            size,
            event_count: 0,
            cyclic: vec![0; size * size],
            adversary: vec![0; size * size],
            victim_other: vec![0; size * size],
            interior_adversary: vec![0; size * size],
            interior_victim: vec![0; size * size],
        }
    }

    fn categories(&self) -> [(&'static str, &Vec<u64>); 5] {
        [
            ("cyclic", &self.cyclic),
            ("adversary", &self.adversary),
            ("victim_other", &self.victim_other),
            ("interior_adversary", &self.interior_adversary),
            ("interior_victim", &self.interior_victim),
        ]
    }
}

/// Folds events into a heatmap. An empty slice yields a size-0 map with all
/// (zero) grids empty; mixed board sizes are an error.
pub fn accumulate_heatmaps(events: &[CycleEvent]) -> Result<Heatmap, AnalysisError> {
    let Some(first) = events.first() else {
        return Ok(Heatmap::zeros(0));
    };
    let size = first.board_size;
    let mut map = Heatmap::zeros(size);
    for event in events {
        if event.board_size != size {
            return Err(AnalysisError::MixedSizes(size, event.board_size));
        }
        map.event_count += 1;
        for (set, grid) in [
            (&event.captured_group, &mut map.cyclic),
            (&event.adversary_stones, &mut map.adversary),
            (&event.victim_other_stones, &mut map.victim_other),
            (&event.interior_adversary, &mut map.interior_adversary),
            (&event.interior_victim, &mut map.interior_victim),
        ] {
            for v in set {
                grid[v.index(size)] += 1;
            }
        }
    }
    Ok(map)
}

fn grid_csv(name: &str, size: usize, events: u64, cells: impl Iterator<Item = String>) -> String {
    let mut out = format!("# {name},size={size},events={events}\n");
    let mut cells = cells.peekable();
    for _ in 0..size {
        let row: Vec<String> = (0..size).map(|_| cells.next().unwrap()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

const SVG_CELL: usize = 16;
const SVG_TITLE: usize = 20;
const SVG_GAP: usize = 12;

fn svg_heatmap(map: &Heatmap) -> String {
    let size = map.size;
    let panel = size * SVG_CELL;
    let width = 5 * panel + 4 * SVG_GAP;
    let height = panel + SVG_TITLE;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">"
    );
    let _ = writeln!(out, "  <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>");
    for (panel_idx, (name, grid)) in map.categories().into_iter().enumerate() {
        let x0 = panel_idx * (panel + SVG_GAP);
        let _ = writeln!(
            out,
            "  <text x=\"{}\" y=\"14\" font-family=\"monospace\" font-size=\"12\">{}</text>",
            x0, name
        );
        for row in 0..size {
            for col in 0..size {
                let count = grid[row * size + col];
                // Darker cells are more frequent; an empty map stays white.
                let shade = 255 - (count * 255 / map.event_count.max(1)) as usize;
                let _ = writeln!(
                    out,
                    "  <rect x=\"{}\" y=\"{}\" width=\"{SVG_CELL}\" height=\"{SVG_CELL}\" \
                     fill=\"rgb({shade},{shade},{shade})\" stroke=\"rgb(200,200,200)\"/>",
                    x0 + col * SVG_CELL,
                    SVG_TITLE + row * SVG_CELL,
                );
            }
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Writes one CSV per category (`cyclic.csv`, `adversary.csv`,
/// `victim_other.csv`, `interior_adversary.csv`, `interior_victim.csv`) and
/// a combined `heatmap.svg` into `dir`.
pub fn emit_heatmap(map: &Heatmap, dir: &Path) -> Result<(), AnalysisError> {
    std::fs::create_dir_all(dir)?;
    for (name, grid) in map.categories() {
        let csv = grid_csv(
            name,
            map.size,
            map.event_count,
            grid.iter().map(|c| c.to_string()),
        );
        std::fs::write(dir.join(format!("{name}.csv")), csv)?;
    }
    std::fs::write(dir.join("heatmap.svg"), svg_heatmap(map))?;
    Ok(())
}

/// Writes per-category difference grids between two heatmaps: raw count
/// differences (`diff_raw_<name>.csv`) and event-count-normalized frequency
/// differences (`diff_normalized_<name>.csv`).
pub fn emit_heatmap_difference(a: &Heatmap, b: &Heatmap, dir: &Path) -> Result<(), AnalysisError> {
    if a.size != b.size {
        return Err(AnalysisError::MixedSizes(a.size, b.size));
    }
    std::fs::create_dir_all(dir)?;
    for ((name, ga), (_, gb)) in a.categories().into_iter().zip(b.categories()) {
        let raw = grid_csv(
            name,
            a.size,
            a.event_count,
            ga.iter()
                .zip(gb)
                .map(|(&x, &y)| (x as i64 - y as i64).to_string()),
        );
        std::fs::write(dir.join(format!("diff_raw_{name}.csv")), raw)?;
        let na = a.event_count.max(1) as f64;
        let nb = b.event_count.max(1) as f64;
        let norm = grid_csv(
            name,
            a.size,
            a.event_count,
            ga.iter()
                .zip(gb)
                .map(|(&x, &y)| format!("{:.6}", x as f64 / na - y as f64 / nb)),
        );
        std::fs::write(dir.join(format!("diff_normalized_{name}.csv")), norm)?;
    }
    Ok(())
}

//! A Go Text Protocol engine over arbitrary byte streams.
//!
//! [`GtpEngine`] speaks enough of GTP version 2 to sit behind any standard
//! controller: board setup, move play, search-backed move generation, and
//! diagnostics. Responses follow the protocol framing exactly — `=` for
//! success and `?` for failure, an optional echoed command id, and a blank
//! line terminating every response. Protocol errors (unknown commands,
//! malformed vertices, illegal moves) are reported in-band and never
//! terminate the engine.
//!
//! Vertex notation uses the traditional columns `A..T` skipping `I`, with
//! row 1 at the bottom — `A1` is the lower-left corner. One deliberate
//! liberty with the protocol: `play`/`genmove` for the side *not* to move
//! first passes for the side that is, keeping the engine's Tromp-Taylor
//! pass accounting honest instead of silently flipping whose turn it is.
//!
//! Move generation is deterministic: each `genmove` derives its search seed
//! from the engine seed and a move counter, so a scripted session replays
//! bit-identically.

use std::io::{BufRead, Write};

use crate::agent::Evaluator;
use crate::rules::{score_tromp_taylor, BoardState, Color, Move, Vertex, MAX_BOARD, MIN_BOARD};
use crate::search::{run_mcts, SearchConfig};

/// GTP column letters: `I` is skipped by convention.
pub const GTP_COLUMNS: &str = "ABCDEFGHJKLMNOPQRST";

const COMMANDS: [&str; 13] = [
    "protocol_version",
    "name",
    "version",
    "known_command",
    "list_commands",
    "boardsize",
    "clear_board",
    "komi",
    "play",
    "genmove",
    "showboard",
    "final_score",
    "quit",
];

/// Formats a move as a GTP vertex (`pass` or e.g. `C2`).
pub fn move_to_gtp(mv: Move, size: usize) -> String {
    match mv {
        Move::Pass => "pass".to_string(),
        Move::Play(v) => {
            let col = GTP_COLUMNS.as_bytes()[v.col as usize] as char;
            format!("{col}{}", size - v.row as usize)
        }
    }
}

/// Parses a GTP vertex (case-insensitive; `pass` allowed) on a board of
/// `size`.
pub fn gtp_to_move(token: &str, size: usize) -> Result<Move, String> {
    if token.eq_ignore_ascii_case("pass") {
        return Ok(Move::Pass);
    }
    let mut chars = token.chars();
    let col_char = chars
        .next()
        .ok_or_else(|| "empty vertex".to_string())?
        .to_ascii_uppercase();
    let col = GTP_COLUMNS
        .find(col_char)
        .ok_or_else(|| format!("bad column in `{token}`"))?;
    let row: usize = chars
        .as_str()
        .parse()
        .map_err(|_| format!("bad row in `{token}`"))?;
    if col >= size || row == 0 || row > size {
        return Err(format!("`{token}` is off the board"));
    }
    Ok(Move::Play(Vertex::new(size - row, col)))
}

fn parse_color(token: &str) -> Result<Color, String> {
    match token.to_ascii_lowercase().as_str() {
        "b" | "black" => Ok(Color::Black),
        "w" | "white" => Ok(Color::White),
        _ => Err(format!("bad color `{token}`")),
    }
}

/// The engine: a board, an evaluator, and a search budget.
pub struct GtpEngine {
    evaluator: Box<dyn Evaluator + Sync>,
    search: SearchConfig,
    state: BoardState,
    seed: u64,
    /// Counts `genmove` calls; folded into each search seed.
    moves_generated: u64,
    finished: bool,
}

impl GtpEngine {
    /// # Panics
    /// If `board_size` is outside the supported range.
    pub fn new(
        evaluator: Box<dyn Evaluator + Sync>,
        visits: u32,
        board_size: usize,
        komi: f64,
        seed: u64,
    ) -> GtpEngine {
        GtpEngine {
            evaluator,
            search: SearchConfig {
                visits,
                ..SearchConfig::default()
            },
            state: BoardState::new(board_size, komi),
            seed,
            moves_generated: 0,
            finished: false,
        }
    }

    pub fn state(&self) -> &BoardState {
        &self.state
    }

    /// True once `quit` has been handled.
    pub fn finished(&self) -> bool {
        self.finished
    }

    /// Passes for the side to move when `color` wants to act out of turn,
    /// then hands the turn to `color`.
    fn align_turn(&mut self, color: Color) -> Result<(), String> {
        if self.state.to_move() != color {
            self.state = self
                .state
                .apply_move(Move::Pass)
                .map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    fn board_diagram(&self) -> String {
        let size = self.state.size();
        let mut out = String::from("  ");
        for col in 0..size {
            out.push(' ');
            out.push(GTP_COLUMNS.as_bytes()[col] as char);
        }
        for row in 0..size {
            out.push('\n');
            out.push_str(&format!("{:2}", size - row));
            for col in 0..size {
                out.push(' ');
                out.push(match self.state.stone(Vertex::new(row, col)) {
                    Some(Color::Black) => 'X',
                    Some(Color::White) => 'O',
                    None => '.',
                });
            }
        }
        out
    }

    fn execute(&mut self, command: &str, args: &[&str]) -> Result<String, String> {
        match command {
            "protocol_version" => Ok("2".to_string()),
            "name" => Ok("deskgo".to_string()),
            "version" => Ok(env!("CARGO_PKG_VERSION").to_string()),
            "known_command" => {
                let name = args.first().copied().unwrap_or("");
                Ok(COMMANDS.contains(&name).to_string())
            }
            "list_commands" => Ok(COMMANDS.join("\n")),
            "boardsize" => {
                let size: usize = args
                    .first()
                    .and_then(|a| a.parse().ok())
                    .ok_or_else(|| "syntax: boardsize <int>".to_string())?;
                if !(MIN_BOARD..=MAX_BOARD).contains(&size) {
                    return Err("unacceptable size".to_string());
                }
                self.state = BoardState::new(size, self.state.komi());
                Ok(String::new())
            }
            "clear_board" => {
                self.state = BoardState::new(self.state.size(), self.state.komi());
                Ok(String::new())
            }
            "komi" => {
                let komi: f64 = args
                    .first()
                    .and_then(|a| a.parse().ok())
                    .ok_or_else(|| "syntax: komi <float>".to_string())?;
                self.state.set_komi(komi);
                Ok(String::new())
            }
            "play" => {
                let &[color, vertex] = args else {
                    return Err("syntax: play <color> <vertex>".to_string());
                };
                let color = parse_color(color)?;
                let mv = gtp_to_move(vertex, self.state.size())?;
                if self.state.game_over() {
                    return Err("illegal move".to_string());
                }
                self.align_turn(color)?;
                match self.state.apply_move(mv) {
                    Ok(next) => {
                        self.state = next;
                        Ok(String::new())
                    }
                    Err(_) => Err("illegal move".to_string()),
                }
            }
            "genmove" => {
                let color = parse_color(args.first().copied().unwrap_or(""))?;
                if self.state.game_over() {
                    return Ok("pass".to_string());
                }
                self.align_turn(color)?;
                let mut config = self.search.clone();
                config.deterministic_seed = self
                    .seed
                    .wrapping_add(self.moves_generated.wrapping_mul(0x9E3779B97F4A7C15));
                self.moves_generated += 1;
                let result = run_mcts(&self.state, self.evaluator.as_ref(), &config)
                    .map_err(|e| e.to_string())?;
                self.state = self
                    .state
                    .apply_move(result.chosen_move)
                    .map_err(|e| e.to_string())?;
                Ok(move_to_gtp(result.chosen_move, self.state.size()))
            }
            "showboard" => Ok(self.board_diagram()),
            "final_score" => {
                let score = score_tromp_taylor(&self.state);
                let winner = match score.winner {
                    Color::Black => 'B',
                    Color::White => 'W',
                };
                Ok(format!("{winner}+{}", crate::analysis::fmt_number(score.margin)))
            }
            "quit" => {
                self.finished = true;
                Ok(String::new())
            }
            _ => Err("unknown command".to_string()),
        }
    }

    /// Handles one raw input line and returns the framed response, or
    /// `None` for blank lines and comments (which GTP ignores).
    pub fn handle_line(&mut self, line: &str) -> Option<String> {
        let line = line.split('#').next().unwrap_or("");
        let mut tokens = line.split_whitespace().peekable();
        let id: Option<u64> = tokens
            .peek()
            .and_then(|t| t.parse().ok())
            .inspect(|_| {
                tokens.next();
            });
        let command = tokens.next()?;
        let args: Vec<&str> = tokens.collect();
        let id = id.map(|i| i.to_string()).unwrap_or_default();
        Some(match self.execute(command, &args) {
            Ok(msg) => format!("={id} {msg}\n\n"),
            Err(msg) => format!("?{id} {msg}\n\n"),
        })
    }

    /// Runs the protocol loop until `quit` or end of input.
    pub fn serve(&mut self, input: impl BufRead, mut output: impl Write) -> std::io::Result<()> {
        self.finished = false;
        for line in input.lines() {
            if let Some(response) = self.handle_line(&line?) {
                output.write_all(response.as_bytes())?;
                output.flush()?;
            }
            if self.finished {
                break;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::UniformEvaluator;
    use crate::rules::DEFAULT_KOMI;
    use std::io::Cursor;

    fn engine(size: usize) -> GtpEngine {
        GtpEngine::new(Box::new(UniformEvaluator), 8, size, DEFAULT_KOMI, 0)
    }

    fn session(engine: &mut GtpEngine, script: &str) -> String {
        let mut out = Vec::new();
        engine.serve(Cursor::new(script), &mut out).unwrap();
        String::from_utf8(out).unwrap()
    }

    #[test]
    fn identification_commands_use_exact_framing() {
        let out = session(&mut engine(5), "protocol_version\nname\n2 version\nquit\n");
        let version = env!("CARGO_PKG_VERSION");
        assert_eq!(out, format!("= 2\n\n= deskgo\n\n=2 {version}\n\n= \n\n"));
    }

    #[test]
    fn unknown_commands_fail_in_band() {
        let out = session(&mut engine(5), "7 tsumego\nname\n");
        assert_eq!(out, "?7 unknown command\n\n= deskgo\n\n");
    }

    #[test]
    fn known_and_listed_commands_agree() {
        let mut e = engine(5);
        assert_eq!(e.handle_line("known_command play").unwrap(), "= true\n\n");
        assert_eq!(e.handle_line("known_command recommend").unwrap(), "= false\n\n");
        let listing = e.handle_line("list_commands").unwrap();
        for name in COMMANDS {
            assert!(listing.contains(name), "{name} missing from list_commands");
        }
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let mut e = engine(5);
        assert_eq!(e.handle_line(""), None);
        assert_eq!(e.handle_line("   # setup phase"), None);
        assert_eq!(e.handle_line("name # engine?").unwrap(), "= deskgo\n\n");
    }

    #[test]
    fn vertex_notation_skips_i_and_counts_from_the_bottom() {
        assert_eq!(gtp_to_move("A1", 9).unwrap(), Move::Play(Vertex::new(8, 0)));
        assert_eq!(gtp_to_move("a1", 9).unwrap(), Move::Play(Vertex::new(8, 0)));
        assert_eq!(gtp_to_move("J9", 9).unwrap(), Move::Play(Vertex::new(0, 8)));
        assert_eq!(gtp_to_move("PASS", 9).unwrap(), Move::Pass);
        for bad in ["I5", "Z3", "A0", "A10", "K1", "", "5A"] {
            assert!(gtp_to_move(bad, 9).is_err(), "{bad} parsed");
        }
        for mv in [Move::Pass, Move::Play(Vertex::new(8, 0)), Move::Play(Vertex::new(0, 8))] {
            assert_eq!(gtp_to_move(&move_to_gtp(mv, 9), 9).unwrap(), mv);
        }
    }

    #[test]
    fn play_builds_the_expected_position() {
        let mut e = engine(5);
        e.handle_line("play b C3").unwrap();
        e.handle_line("play w C4").unwrap();
        assert_eq!(e.state().stone(Vertex::new(2, 2)), Some(Color::Black));
        assert_eq!(e.state().stone(Vertex::new(1, 2)), Some(Color::White));
        let board = e.handle_line("showboard").unwrap();
        assert!(board.contains("A B C D E"));
        assert!(board.contains(" 3 . . X . ."));
        assert!(board.contains(" 4 . . O . ."));
    }

    #[test]
    fn occupied_points_and_bad_sizes_are_errors() {
        let mut e = engine(5);
        assert_eq!(e.handle_line("play b A1").unwrap(), "= \n\n");
        assert_eq!(e.handle_line("play w A1").unwrap(), "? illegal move\n\n");
        assert_eq!(e.handle_line("boardsize 4").unwrap(), "? unacceptable size\n\n");
        assert_eq!(e.handle_line("boardsize 20").unwrap(), "? unacceptable size\n\n");
        assert_eq!(e.handle_line("boardsize nine").unwrap(), "? syntax: boardsize <int>\n\n");
        assert_eq!(e.handle_line("boardsize 9").unwrap(), "= \n\n");
        assert_eq!(e.state().size(), 9);
        assert_eq!(e.state().move_count(), 0);
    }

    #[test]
    fn out_of_turn_play_passes_for_the_side_to_move() {
        let mut e = engine(5);
        e.handle_line("play b A1").unwrap();
        // White is to move; a second black play injects a white pass.
        e.handle_line("play b B1").unwrap();
        let black = e.state().vertices().filter(|&v| e.state().stone(v) == Some(Color::Black));
        assert_eq!(black.count(), 2);
        assert_eq!(e.state().to_move(), Color::White);
        assert_eq!(e.state().consecutive_passes(), 0);
    }

    #[test]
    fn genmove_plays_a_legal_move_and_updates_state() {
        let mut e = engine(5);
        let response = e.handle_line("genmove b").unwrap();
        assert!(response.starts_with("= "));
        let vertex = response.trim_start_matches("= ").trim();
        let mv = gtp_to_move(vertex, 5).unwrap();
        assert_eq!(e.state().move_count(), 1);
        if let Move::Play(v) = mv {
            assert_eq!(e.state().stone(v), Some(Color::Black));
        }
    }

    #[test]
    fn genmove_sequences_are_deterministic() {
        let run = || {
            let mut e = engine(5);
            (0..6)
                .map(|i| {
                    let color = if i % 2 == 0 { "b" } else { "w" };
                    e.handle_line(&format!("genmove {color}")).unwrap()
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn final_score_on_the_empty_board_is_komi_for_white() {
        let mut e = engine(5);
        assert_eq!(e.handle_line("final_score").unwrap(), "= W+7.5\n\n");
        e.handle_line("komi 0").unwrap();
        assert_eq!(e.handle_line("final_score").unwrap(), "= W+0\n\n");
    }

    #[test]
    fn quit_stops_the_loop_and_later_input_is_unread() {
        let mut e = engine(5);
        let out = session(&mut e, "quit\nname\n");
        assert_eq!(out, "= \n\n");
        assert!(e.finished());
    }

    #[test]
    fn superko_recreation_is_rejected_in_band() {
        // Single-stone ko in the corner: the immediate recapture recreates
        // a previous whole-board position.
        let mut e = engine(5);
        for cmd in [
            "play b B1", "play w C1", "play b A2", "play w B2", "play b D1", "play w A1",
        ] {
            assert_eq!(e.handle_line(cmd).unwrap(), "= \n\n", "{cmd}");
        }
        // Black captures the ko stone at A1 by playing B1's neighbor... the
        // capture itself is legal:
        assert_eq!(e.handle_line("play b B1").unwrap(), "? illegal move\n\n");
    }
}

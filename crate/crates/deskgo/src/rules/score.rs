//! Tromp-Taylor area scoring.
//!
//! A color's score is its stone count plus the empty vertices that reach only
//! that color; empty regions touching both colors (or, on an empty board,
//! neither) count for nobody. White additionally receives komi.

use super::{BoardState, Color, Vertex};

/// Final score of a position. `black` and `white` are the full point totals
/// (komi already folded into white's), `winner` the larger side with exact
/// ties going to white, and `margin` the absolute difference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Score {
    pub black: f64,
    pub white: f64,
    pub winner: Color,
    pub margin: f64,
}

impl Score {
    /// Game outcome from the given player's perspective: +1 for a win, -1 for
    /// a loss.
    pub fn sign_for(&self, color: Color) -> f64 {
        if self.winner == color {
            1.0
        } else {
            -1.0
        }
    }
}

/// Scores the position as it stands. Works on any position, finished or not;
/// the self-play pipeline also scores unfinished games when a move limit hits.
pub fn score_tromp_taylor(state: &BoardState) -> Score {
    let size = state.size();
    let area = size * size;
    let grid = state.grid();
    let mut black = 0.0;
    let mut white = 0.0;
    // region_of[i]: 0 unvisited, else 1 + region id for empty vertices.
    let mut region_of = vec![usize::MAX; area];
    // Per-region flags: reaches black, reaches white.
    let mut reaches: Vec<(bool, bool)> = Vec::new();
    let mut region_sizes: Vec<f64> = Vec::new();
    for start in 0..area {
        match grid[start] {
            Some(Color::Black) => black += 1.0,
            Some(Color::White) => white += 1.0,
            None => {
                if region_of[start] != usize::MAX {
                    continue;
                }
                let id = reaches.len();
                reaches.push((false, false));
                let mut frontier = vec![start];
                region_of[start] = id;
                let mut count = 0.0;
                while let Some(idx) = frontier.pop() {
                    count += 1.0;
                    for n in Vertex::from_index(idx, size).neighbors(size) {
                        let nidx = n.index(size);
                        match grid[nidx] {
                            Some(Color::Black) => reaches[id].0 = true,
                            Some(Color::White) => reaches[id].1 = true,
                            None => {
                                if region_of[nidx] == usize::MAX {
                                    region_of[nidx] = id;
                                    frontier.push(nidx);
                                }
                            }
                        }
                    }
                }
                region_sizes.push(count);
            }
        }
    }
    for (id, (to_black, to_white)) in reaches.iter().enumerate() {
        match (to_black, to_white) {
            (true, false) => black += region_sizes[id],
            (false, true) => white += region_sizes[id],
            _ => {}
        }
    }
    white += state.komi();
    let winner = if black > white {
        Color::Black
    } else {
        Color::White
    };
    Score {
        black,
        white,
        winner,
        margin: (black - white).abs(),
    }
}

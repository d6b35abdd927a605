//! Benson's algorithm for unconditional (pass-alive) life.
//!
//! A chain is pass-alive when the opponent cannot capture it even if the
//! owner passes forever. Benson's characterization: take the chains of a
//! color and the regions (maximal connected sets of non-color vertices). A
//! region is *vital* to a chain when every empty vertex of the region is a
//! liberty of that chain. The pass-alive chains are the maximal set X such
//! that every chain in X has at least two vital regions whose bordering
//! chains all lie in X; the fixpoint below computes X by repeatedly removing
//! chains with fewer than two surviving vital regions and regions that border
//! a removed chain.

use std::collections::BTreeSet;

use super::{BoardState, Color, Vertex};

/// Returns the pass-alive vertices for `color`: the stones of every
/// pass-alive chain plus all vertices of the enclosed vital regions those
/// chains keep (including any doomed opponent stones inside them).
pub fn pass_alive_vertices(state: &BoardState, color: Color) -> BTreeSet<Vertex> {
    let size = state.size();
    let area = size * size;
    let grid = state.grid();

    // Label the chains of `color`.
    let mut chain_of = vec![usize::MAX; area];
    let mut chains: Vec<Vec<usize>> = Vec::new();
    for start in 0..area {
        if grid[start] != Some(color) || chain_of[start] != usize::MAX {
            continue;
        }
        let id = chains.len();
        let mut stones = vec![start];
        chain_of[start] = id;
        let mut cursor = 0;
        while cursor < stones.len() {
            let v = Vertex::from_index(stones[cursor], size);
            cursor += 1;
            for n in v.neighbors(size) {
                let nidx = n.index(size);
                if grid[nidx] == Some(color) && chain_of[nidx] == usize::MAX {
                    chain_of[nidx] = id;
                    stones.push(nidx);
                }
            }
        }
        chains.push(stones);
    }

    // Label the regions: connected components of non-`color` vertices (empty
    // vertices and opponent stones alike).
    let mut region_of = vec![usize::MAX; area];
    let mut regions: Vec<Vec<usize>> = Vec::new();
    for start in 0..area {
        if grid[start] == Some(color) || region_of[start] != usize::MAX {
            continue;
        }
        let id = regions.len();
        let mut cells = vec![start];
        region_of[start] = id;
        let mut cursor = 0;
        while cursor < cells.len() {
            let v = Vertex::from_index(cells[cursor], size);
            cursor += 1;
            for n in v.neighbors(size) {
                let nidx = n.index(size);
                if grid[nidx] != Some(color) && region_of[nidx] == usize::MAX {
                    region_of[nidx] = id;
                    cells.push(nidx);
                }
            }
        }
        regions.push(cells);
    }

    // For each region: which chains border it, and which of those it is
    // vital to (every empty vertex of the region is that chain's liberty).
    let mut borders: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); regions.len()];
    let mut vital: Vec<BTreeSet<usize>> = Vec::with_capacity(regions.len());
    for (rid, cells) in regions.iter().enumerate() {
        let mut vital_here: Option<BTreeSet<usize>> = None;
        for &idx in cells {
            let adjacent: BTreeSet<usize> = Vertex::from_index(idx, size)
                .neighbors(size)
                .filter(|n| grid[n.index(size)] == Some(color))
                .map(|n| chain_of[n.index(size)])
                .collect();
            borders[rid].extend(adjacent.iter().copied());
            if grid[idx].is_none() {
                vital_here = Some(match vital_here {
                    None => adjacent,
                    Some(prev) => prev.intersection(&adjacent).copied().collect(),
                });
            }
        }
        // A region with no empty vertices cannot occur on a legal board
        // (enclosed opponent chains would have no liberties); treat it as
        // vital to every bordering chain, which is the vacuous reading.
        vital.push(vital_here.unwrap_or_else(|| borders[rid].clone()));
    }

    // Fixpoint: drop chains with fewer than two vital regions, then drop
    // regions bordering a dropped chain, until stable.
    let mut chain_alive = vec![true; chains.len()];
    let mut region_alive = vec![true; regions.len()];
    loop {
        let mut changed = false;
        for cid in 0..chains.len() {
            if !chain_alive[cid] {
                continue;
            }
            let vital_count = (0..regions.len())
                .filter(|&rid| region_alive[rid] && vital[rid].contains(&cid))
                .count();
            if vital_count < 2 {
                chain_alive[cid] = false;
                changed = true;
            }
        }
        for rid in 0..regions.len() {
            if region_alive[rid] && borders[rid].iter().any(|&cid| !chain_alive[cid]) {
                region_alive[rid] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }

    let mut result = BTreeSet::new();
    for (cid, stones) in chains.iter().enumerate() {
        if chain_alive[cid] {
            result.extend(stones.iter().map(|&i| Vertex::from_index(i, size)));
        }
    }
    for (rid, cells) in regions.iter().enumerate() {
        if region_alive[rid] && vital[rid].iter().any(|&cid| chain_alive[cid]) {
            result.extend(cells.iter().map(|&i| Vertex::from_index(i, size)));
        }
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::DEFAULT_KOMI;

    fn verts(pairs: &[(usize, usize)]) -> BTreeSet<Vertex> {
        pairs.iter().map(|&(r, c)| Vertex::new(r, c)).collect()
    }

    #[test]
    fn empty_board_has_no_pass_alive_vertices() {
        let b = BoardState::new(5, DEFAULT_KOMI);
        assert!(pass_alive_vertices(&b, Color::Black).is_empty());
        assert!(pass_alive_vertices(&b, Color::White).is_empty());
    }

    #[test]
    fn lone_stone_is_not_pass_alive() {
        let b = BoardState::from_diagram(
            ". . . . .\n\
             . . x . .\n\
             . . . . .\n\
             . . . . .\n\
             . . . . .",
            Color::White,
            DEFAULT_KOMI,
        );
        assert!(pass_alive_vertices(&b, Color::Black).is_empty());
    }

    #[test]
    fn two_eyed_group_is_pass_alive_with_its_eyes() {
        let b = BoardState::from_diagram(
            ". x . x .\n\
             x x x x x\n\
             . . . . .\n\
             . . . . .\n\
             . . . . .",
            Color::White,
            DEFAULT_KOMI,
        );
        let alive = pass_alive_vertices(&b, Color::Black);
        let expected = verts(&[
            (0, 0),
            (0, 1),
            (0, 2),
            (0, 3),
            (0, 4),
            (1, 0),
            (1, 1),
            (1, 2),
            (1, 3),
            (1, 4),
        ]);
        assert_eq!(alive, expected);
        assert!(pass_alive_vertices(&b, Color::White).is_empty());
    }

    #[test]
    fn one_eyed_group_is_dead() {
        let b = BoardState::from_diagram(
            ". x . . .\n\
             x x . . .\n\
             . . . . .\n\
             . . . . .\n\
             . . . . .",
            Color::White,
            DEFAULT_KOMI,
        );
        assert!(pass_alive_vertices(&b, Color::Black).is_empty());
    }

    #[test]
    fn doomed_opponent_stone_inside_an_eye_counts_as_territory() {
        let b = BoardState::from_diagram(
            "o . x . x\n\
             x x x x x\n\
             . . . . .\n\
             . . . . .\n\
             . . . . .",
            Color::White,
            DEFAULT_KOMI,
        );
        let alive = pass_alive_vertices(&b, Color::Black);
        // The white stone sits inside black's left eye region and is counted
        // as black's pass-alive territory.
        assert!(alive.contains(&Vertex::new(0, 0)));
        assert!(alive.contains(&Vertex::new(0, 1)));
        assert!(alive.contains(&Vertex::new(0, 3)));
        assert_eq!(alive.len(), 10);
        assert!(pass_alive_vertices(&b, Color::White).is_empty());
    }

    #[test]
    fn big_open_region_is_not_vital() {
        // A group with one real eye and the whole open board as its second
        // region is dead: far empties are not its liberties.
        let b = BoardState::from_diagram(
            ". x . x .\n\
             x x x x .\n\
             . . . x .\n\
             x x x x .\n\
             . . . . .",
            Color::White,
            DEFAULT_KOMI,
        );
        // Region below-left {(2,0),(2,1),(2,2)} is a 1-wide corridor: every
        // empty touches the chain, so it is vital; together with the two top
        // eyes the chain is comfortably alive.
        let alive = pass_alive_vertices(&b, Color::Black);
        assert!(alive.contains(&Vertex::new(0, 0)));
        assert!(alive.contains(&Vertex::new(2, 1)));
        // The open right column is not part of the result.
        assert!(!alive.contains(&Vertex::new(0, 4)));
        assert!(!alive.contains(&Vertex::new(4, 4)));
    }

    #[test]
    fn shared_single_region_is_not_enough() {
        // Two parallel walls sharing one corridor: each chain has only one
        // vital region, so neither is pass-alive.
        let b = BoardState::from_diagram(
            "x x x x x\n\
             . . . . .\n\
             x x x x x\n\
             . . . . .\n\
             . . . . .",
            Color::White,
            DEFAULT_KOMI,
        );
        assert!(pass_alive_vertices(&b, Color::Black).is_empty());
    }
}

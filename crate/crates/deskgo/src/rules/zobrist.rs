//! Zobrist hashing of board grids.
//!
//! Positional superko compares grids only, so the hash covers stone placement
//! plus a per-size salt; side to move and pass counters are deliberately
//! excluded. Tables are generated at compile time from a fixed seed so that
//! hashes are stable across builds and platforms.

use super::Color;

/// Largest supported board area (19x19).
pub const MAX_AREA: usize = 19 * 19;

const SEED: u64 = 0x6F4A_9B3D_12C8_55E7;

/// One splitmix64 step: returns the advanced state and the output word.
const fn splitmix64(mut x: u64) -> (u64, u64) {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    (x, z ^ (z >> 31))
}

const fn build_tables() -> ([[u64; 2]; MAX_AREA], [u64; 20]) {
    let mut stones = [[0u64; 2]; MAX_AREA];
    let mut sizes = [0u64; 20];
    let mut state = SEED;
    let mut i = 0;
    while i < MAX_AREA {
        let (s, black) = splitmix64(state);
        let (s, white) = splitmix64(s);
        stones[i][0] = black;
        stones[i][1] = white;
        state = s;
        i += 1;
    }
    let mut n = 0;
    while n < sizes.len() {
        let (s, salt) = splitmix64(state);
        sizes[n] = salt;
        state = s;
        n += 1;
    }
    (stones, sizes)
}

const TABLES: ([[u64; 2]; MAX_AREA], [u64; 20]) = build_tables();

/// Hash contribution of a stone of `color` at flat `index` (row-major).
pub fn stone_hash(index: usize, color: Color) -> u64 {
    TABLES.0[index][color as usize]
}

/// Hash of the empty board of the given size.
pub fn empty_board_hash(size: usize) -> u64 {
    TABLES.1[size]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tables_have_no_obvious_collisions() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..MAX_AREA {
            assert!(seen.insert(stone_hash(i, Color::Black)));
            assert!(seen.insert(stone_hash(i, Color::White)));
        }
        for size in 5..=19 {
            assert!(seen.insert(empty_board_hash(size)));
        }
    }

    #[test]
    fn hashes_are_stable_across_calls() {
        assert_eq!(stone_hash(0, Color::Black), stone_hash(0, Color::Black));
        assert_ne!(stone_hash(0, Color::Black), stone_hash(0, Color::White));
    }
}

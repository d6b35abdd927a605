//! The self-play loop in miniature: generate games, pool the rows in a
//! sliding window, and take SGD steps on sampled batches.
//!
//! The window is the part with a story. Training data goes stale as the
//! network improves, so the pool keeps only the most recent rows — but how
//! many is "recent" grows sublinearly with lifetime output, following
//!
//!     m = (0.4·m0^0.35 / 0.65) · (N^0.65 − m0^0.65) + m0
//!
//! At desk scale that curve is invisible (the pool just holds everything);
//! this example first evaluates it at full scale so the numbers it encodes
//! are on the record, then runs the loop small.
//!
//!     cargo run --example train_selfplay

use deskgo::agent::UniformEvaluator;
use deskgo::nnet::{
    train_step, NetworkConfig, NetworkParameters, SgdOptimizer, DEFAULT_VALUE_WEIGHT,
};
use deskgo::selfplay::{generate_games, read_segment, window_size, DataWindow, GenConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

fn commas(n: u64) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

fn main() {
    // --- the window-size curve at full scale --------------------------------
    let m0 = 250_000;
    println!("sliding-window size for m0 = {}:", commas(m0));
    for total in [m0, 1_000_000, 50_000_000, 500_000_000, 2_898_845_681] {
        let m = window_size(total, m0).unwrap();
        let share = m as f64 / total as f64;
        println!(
            "  {:>13} rows generated -> window {:>10} ({:>5.1}% retained)",
            commas(total),
            commas(m),
            100.0 * share
        );
    }
    println!("  (the first line is the fixed point: the window starts at m0)\n");

    // --- a tiny generation run ---------------------------------------------
    let dir = tempfile::tempdir().expect("temp dir");
    // An even 5/6 split, rather than the desk default where the largest size
    // dominates, so both row segments appear and batches mix board sizes.
    let config = GenConfig {
        selfplay_visits: 16,
        board_size_distribution: BTreeMap::from([(5, 0.5), (6, 0.5)]),
        ..GenConfig::default()
    };
    let games = 6;
    let manifest = generate_games(
        dir.path(),
        &UniformEvaluator,
        &UniformEvaluator,
        &config,
        games,
        /* seed */ 11,
        /* max_board */ 6,
    )
    .expect("generation succeeds");
    println!(
        "generated {} self-play games, {} rows -> {}",
        manifest.games.len(),
        manifest.total_rows,
        dir.path().display()
    );
    for game in &manifest.games {
        println!(
            "  game {} on {size}x{size}: {:?}, {} rows -> {}",
            game.index,
            game.result,
            game.rows,
            game.segment,
            size = game.board_size
        );
    }

    // --- pool the rows in a window -----------------------------------------
    let mut window = DataWindow::new(32);
    for segment in ["rows_05.bin", "rows_06.bin"] {
        let path = dir.path().join(segment);
        if path.exists() {
            window.extend(read_segment(&path).expect("segment reads back"));
        }
    }
    println!(
        "\nwindow after pooling: {} of {} rows kept (capacity {})",
        window.len(),
        window.total_rows(),
        window.capacity()
    );

    // --- train a small net on sampled batches ------------------------------
    let mut params = NetworkParameters::init(NetworkConfig::cnn(1, 4, 6), 5);
    println!(
        "\ntraining a {}-parameter CNN on batches of 16:",
        commas(params.parameter_count() as u64)
    );
    let mut optimizer = SgdOptimizer::new(0.9);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for step in 1..=60 {
        let batch = window.sample_batch(16, &mut rng).expect("window is non-empty");
        let loss = train_step(
            &mut params,
            &batch,
            &mut optimizer,
            /* lr */ 0.05,
            DEFAULT_VALUE_WEIGHT,
        )
        .expect("loss stays finite");
        if step % 10 == 0 || step == 1 {
            println!("  step {step:>2}: loss {loss:.4}");
        }
    }
    println!(
        "\n{} SGD steps recorded on the checkpoint's step counter",
        params.step_count
    );
}

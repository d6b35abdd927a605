//! PUCT search and its adversarial variant, side by side.
//!
//! Plain MCTS models both players with the same network. Adversarial MCTS
//! (A-MCTS) is what an attacker runs: its own net guides the adversary's
//! moves, while opponent nodes are modeled by the frozen victim network and
//! answered with the victim's argmax policy move. The victim-query counter
//! shows the attack's real cost: one victim evaluation per victim node
//! expanded, not one per playout.
//!
//!     cargo run --example search_demo

use std::sync::Arc;

use deskgo::agent::{CountingEvaluator, NetEvaluator, UniformEvaluator};
use deskgo::gtp::move_to_gtp;
use deskgo::nnet::{NetworkConfig, NetworkParameters};
use deskgo::rules::{BoardState, DEFAULT_KOMI};
use deskgo::search::{run_amcts, run_mcts, SearchConfig};

fn main() {
    let board = BoardState::new(5, DEFAULT_KOMI);
    let config = SearchConfig {
        visits: 128,
        ..SearchConfig::default()
    };

    // Plain PUCT from the empty board with uniform priors: exploration
    // alone concentrates visits on the strong central openings.
    let result = run_mcts(&board, &UniformEvaluator, &config).unwrap();
    println!("plain MCTS, {} visits, uniform priors:", config.visits);
    let mut ranked: Vec<(usize, f64)> = result
        .visit_distribution
        .iter()
        .copied()
        .enumerate()
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    for &(i, fraction) in ranked.iter().take(5) {
        println!(
            "  {:>4}  visit share {:.3}",
            move_to_gtp(result.moves[i], board.size()),
            fraction
        );
    }
    println!(
        "  root value {:+.3}, chosen move {}",
        result.root_value,
        move_to_gtp(result.chosen_move, board.size())
    );

    // The same search is a pure function of (position, net, config):
    let again = run_mcts(&board, &UniformEvaluator, &config).unwrap();
    assert_eq!(again.chosen_move, result.chosen_move);
    assert_eq!(again.visit_counts, result.visit_counts);
    println!("  re-running the search reproduces it exactly\n");

    // A-MCTS: the adversary searches with its own (here: uniform) model
    // while a frozen victim network answers for the opponent.
    let victim_params = Arc::new(NetworkParameters::init(NetworkConfig::cnn(2, 8, 5), 7));
    let victim = NetEvaluator::new(victim_params);
    let counter = CountingEvaluator::new(&victim);
    let result = run_amcts(&board, &UniformEvaluator, &counter, &config).unwrap();
    println!("A-MCTS, {} visits against a frozen CNN victim:", config.visits);
    println!(
        "  chosen move {}, victim queries {} (counter agrees: {})",
        move_to_gtp(result.chosen_move, board.size()),
        result.victim_queries,
        counter.count()
    );
    println!(
        "  {} playouts needed only {} victim evaluations: victim nodes are\n  \
         expanded once and replied to with the victim's argmax move",
        config.visits, result.victim_queries
    );

    // The victim model only matters below the root, so the two searches can
    // disagree: plain search assumes the opponent plays like us, A-MCTS
    // assumes the opponent plays like the victim.
    let plain = run_mcts(&board, &UniformEvaluator, &config).unwrap();
    println!(
        "\nplain vs adversarial choice from the empty board: {} vs {}",
        move_to_gtp(plain.chosen_move, board.size()),
        move_to_gtp(result.chosen_move, board.size())
    );
}

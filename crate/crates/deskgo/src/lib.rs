//! deskgo is a self-contained laboratory for studying adversarial attacks on
//! Go-playing neural networks at desk scale: small boards, small nets, minutes
//! of CPU time instead of GPU-years, but the same moving parts end to end.
//!
//! The pipeline mirrors the full attack/defense loop: Tromp-Taylor rules with
//! positional superko, PUCT search plus an adversarial variant that models a
//! frozen victim inside the tree, policy-value networks (CNN and ViT) trained
//! with a built-in reverse-mode tape, self-play and victim-play data
//! generation feeding a sliding window, an iterated adversarial-training
//! curriculum, Bayesian Elo evaluation with exact binomial intervals, and SGF
//! analysis tooling that localizes cyclic-capture exploits as board heatmaps.
//!
//! The primary interface is the `examples/` directory: one runnable example
//! per major capability (`rules_tour`, `search_demo`, `train_selfplay`,
//! `victim_attack`, `defense_iteration`, `evaluate_agents`,
//! `robustness_report`, `cyclic_heatmap`). Each example is a small, readable
//! program that exercises the public API and prints what it is doing; start
//! with `cargo run --example rules_tour`. A thin `deskgo` binary exposes the
//! same entry points as subcommands for scripted use, including a GTP server
//! (`deskgo gtp`).
//!
//! Everything is deterministic: a run configuration plus a master seed yields
//! byte-identical game records, checkpoints, and reports on every rerun.

pub mod agent;
pub mod analysis;
pub mod cli;
pub mod config;
pub mod curriculum;
pub mod eval;
pub mod features;
pub mod gtp;
pub mod nnet;
pub mod rules;
pub mod search;
pub mod selfplay;

pub use rules::{BoardState, Color, Move, RulesError, Vertex};

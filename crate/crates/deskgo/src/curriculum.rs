//! Victim-play curricula and iterated adversarial training, run as an
//! explicit, resumable state machine.
//!
//! An attack iteration fine-tunes an adversary against a frozen victim with
//! victim-play games, climbing a doubling visit schedule: the victim starts
//! at 1 visit and doubles every time the adversary's rolling win rate clears
//! a threshold — 0.75 on low rungs, 0.90 once the victim's budget reaches
//! the high-visit cutoff. A defense iteration fine-tunes the victim on a
//! mixture of self-play games and games against a frozen copy of the
//! adversary, stopping when its win rate plateaus. [`run_iterated`]
//! alternates the two phases, warm-starting each net from its previous
//! selection, and [`select_checkpoint`] favors checkpoints from stable
//! stretches of training by smoothing evaluations with a three-point moving
//! average.
//!
//! Every round derives its randomness from the plan seed and round index
//! alone, so a run interrupted after any round resumes bit-identically from
//! serialized state.

use std::collections::VecDeque;
use std::path::Path;
use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::agent::NetEvaluator;
use crate::nnet::{load_checkpoint, save_checkpoint, train_step, NetworkParameters, NnetError, SgdOptimizer};
use crate::nnet::TrainingRow;
use crate::selfplay::{
    play_training_game, read_segment, to_rows, write_segment, DataWindow, GenConfig, GenError,
    GenMode, MoveLimitPolicy,
};
use crate::eval::EvalError;

#[derive(Debug, thiserror::Error)]
pub enum CurriculumError {
    /// Not enough evaluated games or checkpoints to decide.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    /// The visit schedule has no higher rung to advance to.
    #[error("the visit schedule is exhausted")]
    ScheduleExhausted,
    #[error("invalid plan: {0}")]
    Config(String),
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Nnet(#[from] NnetError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Curriculum state machine
// ---------------------------------------------------------------------------

/// Which side is currently training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Attack,
    Defend,
}

/// The advancement policy for an attack curriculum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CurriculumConfig {
    /// Victim visit budgets, visited in order; conventionally doubling.
    pub visit_schedule: Vec<u32>,
    /// Rungs at or above this budget demand the high threshold.
    pub high_visit_cutoff: u32,
    pub low_threshold: f64,
    pub high_threshold: f64,
    /// Rolling window of game outcomes backing advancement decisions.
    pub window: usize,
}

impl Default for CurriculumConfig {
    fn default() -> CurriculumConfig {
        CurriculumConfig {
            visit_schedule: vec![1, 2, 4, 8, 16, 32, 64, 128, 256],
            high_visit_cutoff: 256,
            low_threshold: 0.75,
            high_threshold: 0.90,
            window: 200,
        }
    }
}

impl CurriculumConfig {
    pub fn validate(&self) -> Result<(), CurriculumError> {
        if self.visit_schedule.is_empty() {
            return Err(CurriculumError::Config("empty visit schedule".into()));
        }
        if self.visit_schedule.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CurriculumError::Config(
                "visit schedule must be strictly increasing".into(),
            ));
        }
        if self.visit_schedule[0] == 0 {
            return Err(CurriculumError::Config("visits must be >= 1".into()));
        }
        for t in [self.low_threshold, self.high_threshold] {
            if !(0.0..=1.0).contains(&t) {
                return Err(CurriculumError::Config(format!("threshold {t} outside [0, 1]")));
            }
        }
        if self.window == 0 {
            return Err(CurriculumError::Config("window must be >= 1".into()));
        }
        Ok(())
    }

    /// The win-rate bar for a rung at `visits`.
    pub fn threshold_for(&self, visits: u32) -> f64 {
        if visits >= self.high_visit_cutoff {
            self.high_threshold
        } else {
            self.low_threshold
        }
    }
}

/// One logged rung advancement, with the tracker snapshot that justified it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvancementEvent {
    pub from_visits: u32,
    pub to_visits: u32,
    pub wins: usize,
    pub window: usize,
    pub games_played_at: u64,
}

/// Resumable curriculum position: current rung, the rolling outcome
/// tracker, compute spent so far, and the advancement log. Serializing and
/// restoring this struct (alongside the net and window) resumes a run
/// bit-identically.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub phase: Phase,
    pub iteration: u32,
    /// Index into the visit schedule.
    pub rung: usize,
    pub win_tracker: VecDeque<bool>,
    pub games_played: u64,
    pub steps_trained: u64,
    pub advancements: Vec<AdvancementEvent>,
}

impl CurriculumState {
    pub fn new(phase: Phase, iteration: u32) -> CurriculumState {
        CurriculumState {
            phase,
            iteration,
            rung: 0,
            win_tracker: VecDeque::new(),
            games_played: 0,
            steps_trained: 0,
            advancements: Vec::new(),
        }
    }

    /// The victim's current visit budget.
    pub fn victim_visits(&self, config: &CurriculumConfig) -> u32 {
        config.visit_schedule[self.rung]
    }

    pub fn threshold(&self, config: &CurriculumConfig) -> f64 {
        config.threshold_for(self.victim_visits(config))
    }

    pub fn wins_in_tracker(&self) -> usize {
        self.win_tracker.iter().filter(|&&w| w).count()
    }

    /// Records one game outcome at the current rung.
    pub fn record_outcome(&mut self, won: bool, config: &CurriculumConfig) {
        self.games_played += 1;
        self.win_tracker.push_back(won);
        while self.win_tracker.len() > config.window {
            self.win_tracker.pop_front();
        }
    }

    /// True when the rolling win rate over a full tracker reaches the
    /// current rung's threshold.
    pub fn should_advance(&self, config: &CurriculumConfig) -> Result<bool, CurriculumError> {
        if self.win_tracker.len() < config.window {
            return Err(CurriculumError::InsufficientData(format!(
                "{} of {} outcomes at the current rung",
                self.win_tracker.len(),
                config.window
            )));
        }
        let rate = self.wins_in_tracker() as f64 / self.win_tracker.len() as f64;
        Ok(rate >= self.threshold(config))
    }

    /// Moves to the next rung and clears the tracker, logging the snapshot
    /// that justified the move.
    pub fn advance(&mut self, config: &CurriculumConfig) -> Result<(), CurriculumError> {
        if self.rung + 1 >= config.visit_schedule.len() {
            return Err(CurriculumError::ScheduleExhausted);
        }
        self.advancements.push(AdvancementEvent {
            from_visits: config.visit_schedule[self.rung],
            to_visits: config.visit_schedule[self.rung + 1],
            wins: self.wins_in_tracker(),
            window: self.win_tracker.len(),
            games_played_at: self.games_played,
        });
        self.rung += 1;
        self.win_tracker.clear();
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Iteration plans
// ---------------------------------------------------------------------------

/// A defense phase: mixed-game fine-tuning of the victim against a frozen
/// adversary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DefensePlan {
    /// Fraction of games played against the frozen adversary; the rest are
    /// the victim's own self-play.
    pub adversary_fraction: f64,
    pub selfplay_visits: u32,
    /// Victim budget in the adversarial games.
    pub victim_visits: u32,
    /// Frozen adversary's budget in the adversarial games.
    pub adversary_visits: u32,
    pub board_size: usize,
    pub games_per_round: usize,
    pub train_steps_per_round: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub value_loss_weight: f64,
    /// Victim-play evaluation games per checkpoint.
    pub eval_games: usize,
    /// Stop after this many evaluations fail to improve on the best prior
    /// win rate by at least `plateau_epsilon`.
    pub plateau_window: usize,
    pub plateau_epsilon: f64,
    /// Round budget; hitting it is normal completion.
    pub max_rounds: usize,
    pub window_m0: u64,
    pub seed: u64,
}

impl Default for DefensePlan {
    fn default() -> DefensePlan {
        DefensePlan {
            adversary_fraction: 0.18,
            selfplay_visits: 16,
            victim_visits: 12,
            adversary_visits: 24,
            board_size: 5,
            games_per_round: 8,
            train_steps_per_round: 8,
            batch_size: 32,
            learning_rate: 0.01,
            value_loss_weight: 1.0,
            eval_games: 8,
            plateau_window: 3,
            plateau_epsilon: 0.01,
            max_rounds: 6,
            window_m0: 4096,
            seed: 0,
        }
    }
}

impl DefensePlan {
    /// The full-scale settings: 18% adversarial games, victim at 300 MCTS
    /// visits, adversary at 600 A-MCTS visits. Desk defaults keep the same
    /// mixture and the same 1:2 visit ratio at a fraction of the budget.
    pub fn full_scale() -> DefensePlan {
        DefensePlan {
            adversary_fraction: 0.18,
            victim_visits: 300,
            adversary_visits: 600,
            ..DefensePlan::default()
        }
    }

    pub fn validate(&self) -> Result<(), CurriculumError> {
        if !(0.0..=1.0).contains(&self.adversary_fraction) {
            return Err(CurriculumError::Config("adversary_fraction outside [0, 1]".into()));
        }
        if self.games_per_round == 0 || self.max_rounds == 0 || self.batch_size == 0 {
            return Err(CurriculumError::Config("budgets must be >= 1".into()));
        }
        if self.eval_games == 0 || self.plateau_window == 0 {
            return Err(CurriculumError::Config("evaluation settings must be >= 1".into()));
        }
        Ok(())
    }
}

/// An attack phase: victim-play fine-tuning of the adversary with the visit
/// curriculum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackPlan {
    pub curriculum: CurriculumConfig,
    /// Adversary's A-MCTS budget per move.
    pub adversary_visits: u32,
    pub board_size: usize,
    pub games_per_round: usize,
    pub train_steps_per_round: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub value_loss_weight: f64,
    /// Bar the adversary from passing while territory is unsettled (train
    /// against the pass-hardened victim behavior).
    pub pass_alive_defense: bool,
    pub move_limit_policy: MoveLimitPolicy,
    pub move_limit_factor: f64,
    /// Round budget; hitting it is normal completion.
    pub max_rounds: usize,
    pub window_m0: u64,
    pub seed: u64,
}

impl Default for AttackPlan {
    fn default() -> AttackPlan {
        AttackPlan {
            curriculum: CurriculumConfig::default(),
            adversary_visits: 24,
            board_size: 5,
            games_per_round: 8,
            train_steps_per_round: 8,
            batch_size: 32,
            learning_rate: 0.01,
            value_loss_weight: 1.0,
            pass_alive_defense: false,
            move_limit_policy: MoveLimitPolicy::ZeroScoreLoss,
            move_limit_factor: 800.0,
            max_rounds: 6,
            window_m0: 4096,
            seed: 0,
        }
    }
}

impl AttackPlan {
    pub fn validate(&self) -> Result<(), CurriculumError> {
        self.curriculum.validate()?;
        if self.adversary_visits == 0 {
            return Err(CurriculumError::Config("adversary_visits must be >= 1".into()));
        }
        if self.games_per_round == 0 || self.max_rounds == 0 || self.batch_size == 0 {
            return Err(CurriculumError::Config("budgets must be >= 1".into()));
        }
        Ok(())
    }
}

/// Both phases of one iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct IterationPlan {
    pub defend: DefensePlan,
    pub attack: AttackPlan,
}

// ---------------------------------------------------------------------------
// Phase drivers
// ---------------------------------------------------------------------------

/// Why a phase ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Defense: the evaluation series stopped improving.
    Plateau,
    /// The round budget ran out — normal completion.
    BudgetExhausted,
    /// Attack: the final rung's threshold was met.
    TargetReached,
}

/// One evaluated checkpoint in a phase.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseCheckpoint {
    pub round: usize,
    pub step_count: u64,
    /// The trained side's win rate at this evaluation.
    pub win_rate: f64,
    pub params: NetworkParameters,
}

/// A completed phase: its checkpoint series and why it stopped.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseOutcome {
    pub checkpoints: Vec<PhaseCheckpoint>,
    pub stop: StopReason,
    pub state: CurriculumState,
}

/// Mixes a per-round seed; rounds never share randomness, which is what
/// makes interrupted runs resumable.
fn round_seed(seed: u64, phase: Phase, round: usize) -> u64 {
    let tag = match phase {
        Phase::Attack => 0xA44C_u64,
        Phase::Defend => 0xDEF5_u64,
    };
    seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (round as u64).wrapping_mul(0x2545_F491_4F6C_DD1D)
}

fn point_mass(size: usize) -> std::collections::BTreeMap<usize, f64> {
    std::collections::BTreeMap::from([(size, 1.0)])
}

/// Plays `games` victim-play games and reports `(adversary wins, records)`.
fn victim_play_round(
    adversary: &NetworkParameters,
    victim: &NetworkParameters,
    config: &GenConfig,
    games: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(usize, Vec<crate::selfplay::GameRecord>), CurriculumError> {
    let adversary_eval = NetEvaluator::new(Arc::new(adversary.clone()));
    let victim_eval = NetEvaluator::new(Arc::new(victim.clone()));
    let mut wins = 0;
    let mut records = Vec::with_capacity(games);
    for _ in 0..games {
        let record = play_training_game(&adversary_eval, &victim_eval, config, rng)?;
        if record.adversary_utility().expect("victim-play game") > 0.0 {
            wins += 1;
        }
        records.push(record);
    }
    Ok((wins, records))
}

/// Fine-tunes the victim with mixed games against a frozen adversary.
///
/// Each round generates `games_per_round` games — `adversary_fraction` of
/// them against the frozen adversary, the rest self-play — pushes the
/// victim's rows into `window`, takes `train_steps_per_round` SGD steps,
/// and evaluates the victim with fresh victim-play games. Stops on plateau
/// (no evaluation in the last `plateau_window` improved the best prior win
/// rate by `plateau_epsilon`) or when the round budget runs out.
///
/// The frozen adversary is never mutated; checkpoints carry strictly
/// increasing step counts.
pub fn run_defense_iteration(
    victim: &mut NetworkParameters,
    frozen_adversary: &NetworkParameters,
    plan: &DefensePlan,
    window: &mut DataWindow,
    iteration: u32,
) -> Result<PhaseOutcome, CurriculumError> {
    plan.validate()?;
    let mut state = CurriculumState::new(Phase::Defend, iteration);
    let mut checkpoints: Vec<PhaseCheckpoint> = Vec::new();
    let gen_config = GenConfig {
        mode: GenMode::Mixed {
            adversary_fraction: plan.adversary_fraction,
        },
        selfplay_visits: plan.selfplay_visits,
        adversary_visits: plan.adversary_visits,
        victim_visits: plan.victim_visits,
        board_size_distribution: point_mass(plan.board_size),
        ..GenConfig::default()
    };
    let eval_config = GenConfig {
        mode: GenMode::VictimPlay,
        ..gen_config.clone()
    };
    let max_board = victim.config.max_board;

    let mut stop = StopReason::BudgetExhausted;
    for round in 0..plan.max_rounds {
        let mut rng = ChaCha8Rng::seed_from_u64(round_seed(plan.seed, Phase::Defend, round));
        // A fresh optimizer per round keeps rounds the atomic unit of
        // resumption: velocity buffers never have to be serialized.
        let mut optimizer = SgdOptimizer::new(0.9);
        let adversary_eval = NetEvaluator::new(Arc::new(frozen_adversary.clone()));
        let victim_eval = NetEvaluator::new(Arc::new(victim.clone()));
        for index in 0..plan.games_per_round {
            let adversarial =
                crate::selfplay::is_adversarial_slot(index, plan.adversary_fraction);
            let game_config = GenConfig {
                mode: if adversarial {
                    GenMode::VictimPlay
                } else {
                    GenMode::SelfPlay
                },
                ..gen_config.clone()
            };
            let record = if adversarial {
                play_training_game(&adversary_eval, &victim_eval, &game_config, &mut rng)?
            } else {
                play_training_game(&victim_eval, &victim_eval, &game_config, &mut rng)?
            };
            state.games_played += 1;
            window.extend(to_rows(&record, &gen_config.mode, max_board));
        }

        for _ in 0..plan.train_steps_per_round {
            if window.is_empty() {
                break;
            }
            let batch = window.sample_batch(plan.batch_size, &mut rng)?;
            train_step(
                victim,
                &batch,
                &mut optimizer,
                plan.learning_rate,
                plan.value_loss_weight,
            )?;
            state.steps_trained += 1;
        }

        // Evaluate: fresh victim-play games against the frozen adversary;
        // the victim's win rate is one minus the adversary's.
        let (adversary_wins, _) = victim_play_round(
            frozen_adversary,
            victim,
            &eval_config,
            plan.eval_games,
            &mut rng,
        )?;
        let win_rate = 1.0 - adversary_wins as f64 / plan.eval_games as f64;
        checkpoints.push(PhaseCheckpoint {
            round,
            step_count: victim.step_count,
            win_rate,
            params: victim.clone(),
        });

        let n = checkpoints.len();
        if n > plan.plateau_window {
            let best_before = checkpoints[..n - plan.plateau_window]
                .iter()
                .map(|c| c.win_rate)
                .fold(f64::NEG_INFINITY, f64::max);
            let best_recent = checkpoints[n - plan.plateau_window..]
                .iter()
                .map(|c| c.win_rate)
                .fold(f64::NEG_INFINITY, f64::max);
            if best_recent < best_before + plan.plateau_epsilon {
                stop = StopReason::Plateau;
                break;
            }
        }
    }
    Ok(PhaseOutcome {
        checkpoints,
        stop,
        state,
    })
}

/// Fine-tunes the adversary against a frozen victim with the visit
/// curriculum.
///
/// Each round plays `games_per_round` victim-play games at the current
/// rung's victim budget, feeding outcomes to the rolling tracker and rows
/// to `window`, then trains. After every round the curriculum advances
/// whenever a full tracker clears the rung's threshold; clearing the final
/// rung stops the phase with [`StopReason::TargetReached`]. Running out of
/// rounds is normal completion. `resume` continues a previously serialized
/// state instead of starting fresh.
pub fn run_attack_iteration(
    adversary: &mut NetworkParameters,
    frozen_victim: &NetworkParameters,
    plan: &AttackPlan,
    window: &mut DataWindow,
    iteration: u32,
    resume: Option<CurriculumState>,
) -> Result<PhaseOutcome, CurriculumError> {
    plan.validate()?;
    let mut state = resume.unwrap_or_else(|| CurriculumState::new(Phase::Attack, iteration));
    let mut checkpoints: Vec<PhaseCheckpoint> = Vec::new();
    let max_board = adversary.config.max_board;

    let start_round = (state.games_played as usize) / plan.games_per_round;
    let mut stop = StopReason::BudgetExhausted;
    for round in start_round..plan.max_rounds {
        let mut rng = ChaCha8Rng::seed_from_u64(round_seed(plan.seed, Phase::Attack, round));
        let mut optimizer = SgdOptimizer::new(0.9);
        let gen_config = GenConfig {
            mode: GenMode::VictimPlay,
            adversary_visits: plan.adversary_visits,
            victim_visits: state.victim_visits(&plan.curriculum),
            board_size_distribution: point_mass(plan.board_size),
            move_limit_policy: plan.move_limit_policy,
            move_limit_factor: plan.move_limit_factor,
            pass_alive_defense: plan.pass_alive_defense,
            ..GenConfig::default()
        };
        let (_, records) = victim_play_round(
            adversary,
            frozen_victim,
            &gen_config,
            plan.games_per_round,
            &mut rng,
        )?;
        for record in &records {
            let won = record.adversary_utility().expect("victim-play game") > 0.0;
            state.record_outcome(won, &plan.curriculum);
            window.extend(to_rows(record, &GenMode::VictimPlay, max_board));
        }

        for _ in 0..plan.train_steps_per_round {
            if window.is_empty() {
                break;
            }
            let batch = window.sample_batch(plan.batch_size, &mut rng)?;
            train_step(
                adversary,
                &batch,
                &mut optimizer,
                plan.learning_rate,
                plan.value_loss_weight,
            )?;
            state.steps_trained += 1;
        }

        let tracked = state.win_tracker.len();
        let win_rate = if tracked == 0 {
            0.0
        } else {
            state.wins_in_tracker() as f64 / tracked as f64
        };
        checkpoints.push(PhaseCheckpoint {
            round,
            step_count: adversary.step_count,
            win_rate,
            params: adversary.clone(),
        });

        if state.should_advance(&plan.curriculum).unwrap_or(false) {
            match state.advance(&plan.curriculum) {
                Ok(()) => {}
                Err(CurriculumError::ScheduleExhausted) => {
                    stop = StopReason::TargetReached;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(PhaseOutcome {
        checkpoints,
        stop,
        state,
    })
}

/// Picks the checkpoint with the best three-point moving average of
/// evaluated win rates (truncated to two points at the series edges),
/// breaking ties toward the earliest. Favors stable stretches over isolated
/// spikes.
pub fn select_checkpoint(win_rates: &[f64]) -> Result<usize, CurriculumError> {
    if win_rates.len() < 3 {
        return Err(CurriculumError::InsufficientData(format!(
            "{} evaluated checkpoints, need 3",
            win_rates.len()
        )));
    }
    let smoothed: Vec<f64> = (0..win_rates.len())
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(win_rates.len() - 1);
            win_rates[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();
    let mut best = 0;
    for (i, &s) in smoothed.iter().enumerate() {
        // The epsilon swallows averaging round-off so exact ties keep the
        // earliest checkpoint; real win-rate gaps are orders larger.
        if s > smoothed[best] + 1e-12 {
            best = i;
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Iterated adversarial training
// ---------------------------------------------------------------------------

/// Settings for a full iterated run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IteratedConfig {
    pub plan: IterationPlan,
    /// Attack/defense iteration pairs to run.
    pub iterations: u32,
}

/// One agent in the lineage, with its on-disk checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineageEntry {
    pub name: String,
    pub phase: Option<Phase>,
    pub iteration: u32,
    /// The agent this one was warm-started from.
    pub parent: Option<String>,
    pub checkpoint: String,
    pub step_count: u64,
    /// Win rate of the selected checkpoint at its evaluation.
    pub win_rate: Option<f64>,
    /// Which round of the phase was selected.
    pub selected_round: Option<usize>,
    /// Total rows ever generated into the agent's window when the phase
    /// ended (lineage accounting for warm starts).
    pub window_rows: u64,
}

/// The full lineage of an iterated run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineageReport {
    pub iterations: u32,
    pub entries: Vec<LineageEntry>,
}

impl LineageReport {
    pub fn save(&self, path: &Path) -> Result<(), CurriculumError> {
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(path, json + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<LineageReport, CurriculumError> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CurriculumError::Config(format!("lineage report: {e}")))
    }

    pub fn entry(&self, name: &str) -> Option<&LineageEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Selects a phase's checkpoint: the smoothed-best when at least three were
/// evaluated, otherwise the last.
fn select_from(outcome: &PhaseOutcome) -> (usize, &PhaseCheckpoint) {
    let rates: Vec<f64> = outcome.checkpoints.iter().map(|c| c.win_rate).collect();
    let index = select_checkpoint(&rates).unwrap_or(outcome.checkpoints.len() - 1);
    (index, &outcome.checkpoints[index])
}

/// Live state of an iterated run between iteration boundaries.
struct IteratedRun {
    report: LineageReport,
    victim: NetworkParameters,
    adversary: NetworkParameters,
    victim_name: String,
    adversary_name: String,
    victim_window: DataWindow,
    adversary_window: DataWindow,
}

impl IteratedRun {
    /// Writes both live window pools under `out_dir/windows/`, one segment
    /// per side, deleting segments whose pool is empty.
    fn persist_windows(&self, out_dir: &Path) -> Result<(), CurriculumError> {
        let dir = out_dir.join("windows");
        std::fs::create_dir_all(&dir)?;
        for (file, window) in [
            ("victim.bin", &self.victim_window),
            ("adversary.bin", &self.adversary_window),
        ] {
            let path = dir.join(file);
            let rows: Vec<TrainingRow> = window.rows().cloned().collect();
            if rows.is_empty() {
                if path.exists() {
                    std::fs::remove_file(&path)?;
                }
            } else {
                write_segment(&path, &rows)?;
            }
        }
        Ok(())
    }

    /// Runs iterations `start..=config.iterations`, checkpointing the
    /// lineage report and window segments at every iteration boundary so an
    /// interrupted run can pick up at the next one.
    fn run_from(
        mut self,
        out_dir: &Path,
        config: &IteratedConfig,
        start: u32,
    ) -> Result<LineageReport, CurriculumError> {
        for n in start..=config.iterations {
            // Attack phase: adversary n vs frozen victim n−1.
            let mut attack_plan = config.plan.attack.clone();
            attack_plan.seed = config.plan.attack.seed.wrapping_add(n as u64);
            let outcome = run_attack_iteration(
                &mut self.adversary,
                &self.victim,
                &attack_plan,
                &mut self.adversary_window,
                n,
                None,
            )?;
            let (round, selected) = select_from(&outcome);
            self.adversary = selected.params.clone();
            let name = format!("adversary_{n:03}");
            let file = format!("{name}.ckpt");
            save_checkpoint(&self.adversary, &out_dir.join(&file))?;
            self.report.entries.push(LineageEntry {
                name: name.clone(),
                phase: Some(Phase::Attack),
                iteration: n,
                parent: Some(self.adversary_name.clone()),
                checkpoint: file,
                step_count: self.adversary.step_count,
                win_rate: Some(selected.win_rate),
                selected_round: Some(round),
                window_rows: self.adversary_window.total_rows(),
            });
            self.adversary_name = name;

            // Defense phase: victim n vs the frozen adversary just selected.
            let mut defend_plan = config.plan.defend.clone();
            defend_plan.seed = config.plan.defend.seed.wrapping_add(n as u64);
            let outcome = run_defense_iteration(
                &mut self.victim,
                &self.adversary,
                &defend_plan,
                &mut self.victim_window,
                n,
            )?;
            let (round, selected) = select_from(&outcome);
            self.victim = selected.params.clone();
            let name = format!("victim_{n:03}");
            let file = format!("{name}.ckpt");
            save_checkpoint(&self.victim, &out_dir.join(&file))?;
            self.report.entries.push(LineageEntry {
                name: name.clone(),
                phase: Some(Phase::Defend),
                iteration: n,
                parent: Some(self.victim_name.clone()),
                checkpoint: file,
                step_count: self.victim.step_count,
                win_rate: Some(selected.win_rate),
                selected_round: Some(round),
                window_rows: self.victim_window.total_rows(),
            });
            self.victim_name = name;

            self.persist_windows(out_dir)?;
            self.report.save(&out_dir.join("lineage.json"))?;
        }
        self.report.save(&out_dir.join("lineage.json"))?;
        Ok(self.report)
    }
}

/// Runs iterated adversarial training: `iterations` alternating
/// attack-then-defense pairs, starting from seed victim and adversary
/// parameters.
///
/// Iteration `n` first fine-tunes the adversary against frozen victim
/// `n−1`, then fine-tunes the victim against the just-selected frozen
/// adversary. Each side warm-starts from its own previous selection and
/// keeps one persistent data window across iterations, so lineage row
/// counts accumulate monotonically. All checkpoints land in `out_dir`
/// together with a JSON lineage report naming each agent's parent; the
/// report and both window pools are rewritten at every iteration boundary,
/// which is what [`resume_iterated`] picks up from.
pub fn run_iterated(
    out_dir: &Path,
    seed_victim: &NetworkParameters,
    seed_adversary: &NetworkParameters,
    config: &IteratedConfig,
) -> Result<LineageReport, CurriculumError> {
    config.plan.attack.validate()?;
    config.plan.defend.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let mut report = LineageReport {
        iterations: config.iterations,
        entries: Vec::new(),
    };

    let victim_name = "victim_000".to_string();
    let adversary_name = "adversary_000".to_string();
    for (name, params) in [(&victim_name, seed_victim), (&adversary_name, seed_adversary)] {
        let file = format!("{name}.ckpt");
        save_checkpoint(params, &out_dir.join(&file))?;
        report.entries.push(LineageEntry {
            name: name.clone(),
            phase: None,
            iteration: 0,
            parent: None,
            checkpoint: file,
            step_count: params.step_count,
            win_rate: None,
            selected_round: None,
            window_rows: 0,
        });
    }

    let run = IteratedRun {
        report,
        victim: seed_victim.clone(),
        adversary: seed_adversary.clone(),
        victim_name,
        adversary_name,
        victim_window: DataWindow::new(config.plan.defend.window_m0),
        adversary_window: DataWindow::new(config.plan.attack.window_m0),
    };
    run.run_from(out_dir, config, 1)
}

/// Resumes an interrupted [`run_iterated`] from its output directory and
/// finishes the remaining iterations.
///
/// Iterations are the atomic unit: the lineage report, the checkpoints, and
/// the window segments saved at each boundary are everything the next
/// iteration reads, so the resumed run ends with the same checkpoints and
/// lineage as an uninterrupted one under the same config. A partially
/// complete iteration leaves no trace in the report and is re-run from
/// scratch. Asking for more iterations than the original run is how a
/// finished run gets extended.
pub fn resume_iterated(
    out_dir: &Path,
    config: &IteratedConfig,
) -> Result<LineageReport, CurriculumError> {
    config.plan.attack.validate()?;
    config.plan.defend.validate()?;
    let mut report = LineageReport::load(&out_dir.join("lineage.json"))?;
    if report.entries.len() < 2 || report.entries.len() % 2 != 0 {
        return Err(CurriculumError::Config(format!(
            "lineage has {} entries; expected two seeds plus two per iteration",
            report.entries.len()
        )));
    }
    let completed = (report.entries.len() as u32 - 2) / 2;
    report.iterations = config.iterations;

    let adversary_name = format!("adversary_{completed:03}");
    let victim_name = format!("victim_{completed:03}");
    let load = |name: &str| -> Result<(NetworkParameters, u64), CurriculumError> {
        let entry = report
            .entry(name)
            .ok_or_else(|| CurriculumError::Config(format!("lineage is missing `{name}`")))?;
        let params = load_checkpoint(&out_dir.join(&entry.checkpoint))?;
        Ok((params, entry.window_rows))
    };
    let (adversary, adversary_rows) = load(&adversary_name)?;
    let (victim, victim_rows) = load(&victim_name)?;

    let restore = |file: &str, m0: u64, total: u64| -> Result<DataWindow, CurriculumError> {
        let path = out_dir.join("windows").join(file);
        let rows = if path.exists() { read_segment(&path)? } else { Vec::new() };
        let mut window = DataWindow::new(m0);
        window.warm_start(rows, total);
        Ok(window)
    };
    let victim_window = restore("victim.bin", config.plan.defend.window_m0, victim_rows)?;
    let adversary_window = restore("adversary.bin", config.plan.attack.window_m0, adversary_rows)?;

    let run = IteratedRun {
        report,
        victim,
        adversary,
        victim_name,
        adversary_name,
        victim_window,
        adversary_window,
    };
    run.run_from(out_dir, config, completed + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::NetworkConfig;

    fn tiny_net(seed: u64) -> NetworkParameters {
        NetworkParameters::init(NetworkConfig::cnn(1, 4, 5), seed)
    }

    fn small_curriculum(window: usize) -> CurriculumConfig {
        CurriculumConfig {
            visit_schedule: vec![1, 2, 4],
            high_visit_cutoff: 4,
            window,
            ..CurriculumConfig::default()
        }
    }

    #[test]
    fn thresholds_follow_the_visit_cutoff() {
        let config = CurriculumConfig::default();
        assert_eq!(config.threshold_for(1), 0.75);
        assert_eq!(config.threshold_for(128), 0.75);
        assert_eq!(config.threshold_for(256), 0.90);

        let mut state = CurriculumState::new(Phase::Attack, 1);
        // 150/200 at the low rung clears 0.75.
        for i in 0..200 {
            state.record_outcome(i % 4 != 0, &config);
        }
        assert_eq!(state.wins_in_tracker(), 150);
        assert!(state.should_advance(&config).unwrap());

        // 170/200 at a high rung misses 0.90; exactly 180/200 meets it.
        let mut state = CurriculumState::new(Phase::Attack, 1);
        state.rung = config.visit_schedule.len() - 1;
        assert_eq!(state.victim_visits(&config), 256);
        for i in 0..200 {
            state.record_outcome(i < 170, &config);
        }
        assert!(!state.should_advance(&config).unwrap());
        let mut state = CurriculumState::new(Phase::Attack, 1);
        state.rung = config.visit_schedule.len() - 1;
        for i in 0..200 {
            state.record_outcome(i < 180, &config);
        }
        assert!(state.should_advance(&config).unwrap());
    }

    #[test]
    fn should_advance_needs_a_full_tracker() {
        let config = CurriculumConfig::default();
        let mut state = CurriculumState::new(Phase::Attack, 1);
        for _ in 0..199 {
            state.record_outcome(true, &config);
        }
        assert!(matches!(
            state.should_advance(&config),
            Err(CurriculumError::InsufficientData(_))
        ));
    }

    #[test]
    fn advance_moves_one_rung_and_clears_the_tracker() {
        let config = small_curriculum(4);
        let mut state = CurriculumState::new(Phase::Attack, 1);
        for _ in 0..4 {
            state.record_outcome(true, &config);
        }
        assert_eq!(state.victim_visits(&config), 1);
        state.advance(&config).unwrap();
        assert_eq!(state.victim_visits(&config), 2);
        assert!(state.win_tracker.is_empty());
        assert_eq!(state.advancements.len(), 1);
        let event = &state.advancements[0];
        assert_eq!((event.from_visits, event.to_visits), (1, 2));
        assert_eq!((event.wins, event.window), (4, 4));

        state.advance(&config).unwrap();
        assert!(matches!(
            state.advance(&config),
            Err(CurriculumError::ScheduleExhausted)
        ));
    }

    #[test]
    fn advancement_events_always_justify_themselves() {
        let config = small_curriculum(6);
        let mut state = CurriculumState::new(Phase::Attack, 1);
        // Feed a noisy outcome stream; advance whenever permitted.
        let mut x = 0x12345u64;
        for _ in 0..200 {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            state.record_outcome(x >> 60 != 0, &config);
            if state.should_advance(&config).unwrap_or(false)
                && state.rung + 1 < config.visit_schedule.len()
            {
                state.advance(&config).unwrap();
            }
        }
        for event in &state.advancements {
            let rate = event.wins as f64 / event.window as f64;
            assert!(rate >= config.threshold_for(event.from_visits));
            assert_eq!(event.window, config.window);
        }
    }

    #[test]
    fn state_round_trips_through_serde_with_identical_behavior() {
        let config = small_curriculum(5);
        let mut state = CurriculumState::new(Phase::Attack, 2);
        for i in 0..7 {
            state.record_outcome(i % 3 != 0, &config);
        }
        let json = serde_json::to_string(&state).unwrap();
        let mut restored: CurriculumState = serde_json::from_str(&json).unwrap();
        assert_eq!(restored, state);

        // Identical subsequent behavior for the same outcome stream.
        for i in 0..10 {
            state.record_outcome(i % 2 == 0, &config);
            restored.record_outcome(i % 2 == 0, &config);
            assert_eq!(
                state.should_advance(&config).ok(),
                restored.should_advance(&config).ok()
            );
        }
        assert_eq!(restored, state);
    }

    #[test]
    fn checkpoint_selection_smooths_over_spikes() {
        // The isolated 99 loses to the stable 94-95-96 plateau.
        let pick = select_checkpoint(&[0.90, 0.99, 0.91, 0.94, 0.95, 0.96]).unwrap();
        assert!(pick >= 3, "picked the spike at {pick}");

        // A dominant plateau: earliest smoothed maximum wins.
        assert_eq!(select_checkpoint(&[0.50, 0.50, 0.90, 0.90, 0.90]).unwrap(), 3);

        // All equal: the first checkpoint.
        assert_eq!(select_checkpoint(&[0.8, 0.8, 0.8, 0.8]).unwrap(), 0);

        assert!(matches!(
            select_checkpoint(&[0.9, 0.8]),
            Err(CurriculumError::InsufficientData(_))
        ));
    }

    fn quick_attack_plan(rounds: usize) -> AttackPlan {
        AttackPlan {
            curriculum: CurriculumConfig {
                visit_schedule: vec![1, 2],
                high_visit_cutoff: 2,
                window: 4,
                ..CurriculumConfig::default()
            },
            adversary_visits: 2,
            games_per_round: 4,
            train_steps_per_round: 2,
            batch_size: 8,
            max_rounds: rounds,
            move_limit_factor: 60.0,
            ..AttackPlan::default()
        }
    }

    fn quick_defense_plan(rounds: usize) -> DefensePlan {
        DefensePlan {
            selfplay_visits: 2,
            victim_visits: 2,
            adversary_visits: 2,
            games_per_round: 4,
            train_steps_per_round: 2,
            batch_size: 8,
            eval_games: 2,
            max_rounds: rounds,
            ..DefensePlan::default()
        }
    }

    #[test]
    fn attack_iteration_trains_without_touching_the_frozen_victim() {
        let mut adversary = tiny_net(1);
        let victim = tiny_net(2);
        let frozen_copy = victim.clone();
        let mut window = DataWindow::new(1024);
        let outcome = run_attack_iteration(
            &mut adversary,
            &victim,
            &quick_attack_plan(2),
            &mut window,
            1,
            None,
        )
        .unwrap();
        assert_eq!(victim, frozen_copy, "frozen victim was mutated");
        assert_eq!(outcome.checkpoints.len(), 2);
        assert!(adversary.step_count > 0);
        assert!(window.total_rows() > 0);
        assert_eq!(outcome.state.games_played, 8);
        assert!(matches!(
            outcome.stop,
            StopReason::BudgetExhausted | StopReason::TargetReached
        ));
        // The curriculum trace never steps down.
        let mut last = 0;
        for event in &outcome.state.advancements {
            assert!(event.to_visits > event.from_visits);
            assert!(event.from_visits >= last);
            last = event.to_visits;
        }
        // Checkpoint step counts strictly increase.
        for pair in outcome.checkpoints.windows(2) {
            assert!(pair[1].step_count > pair[0].step_count);
        }
    }

    #[test]
    fn attack_iteration_is_deterministic_and_resumable() {
        let plan = quick_attack_plan(2);
        let victim = tiny_net(2);

        let mut straight = tiny_net(1);
        let mut window = DataWindow::new(1024);
        let full = run_attack_iteration(&mut straight, &victim, &plan, &mut window, 1, None)
            .unwrap();

        // Same run split in two: one round, serialize, restore, finish.
        let mut resumed = tiny_net(1);
        let mut window2 = DataWindow::new(1024);
        let first = run_attack_iteration(
            &mut resumed,
            &victim,
            &AttackPlan { max_rounds: 1, ..plan.clone() },
            &mut window2,
            1,
            None,
        )
        .unwrap();
        let json = serde_json::to_string(&first.state).unwrap();
        let restored: CurriculumState = serde_json::from_str(&json).unwrap();
        let second = run_attack_iteration(
            &mut resumed,
            &victim,
            &plan,
            &mut window2,
            1,
            Some(restored),
        )
        .unwrap();

        assert_eq!(resumed, straight, "resumed run diverged");
        assert_eq!(second.state, full.state);
        assert_eq!(window2.total_rows(), window.total_rows());
    }

    #[test]
    fn defense_iteration_trains_without_touching_the_frozen_adversary() {
        let mut victim = tiny_net(3);
        let adversary = tiny_net(4);
        let frozen_copy = adversary.clone();
        let mut window = DataWindow::new(1024);
        let outcome = run_defense_iteration(
            &mut victim,
            &adversary,
            &quick_defense_plan(2),
            &mut window,
            1,
        )
        .unwrap();
        assert_eq!(adversary, frozen_copy, "frozen adversary was mutated");
        assert!(!outcome.checkpoints.is_empty());
        assert!(victim.step_count > 0);
        for pair in outcome.checkpoints.windows(2) {
            assert!(pair[1].step_count > pair[0].step_count);
        }
        for checkpoint in &outcome.checkpoints {
            assert!((0.0..=1.0).contains(&checkpoint.win_rate));
        }
    }

    #[test]
    fn zero_adversary_fraction_defense_is_pure_selfplay() {
        let mut victim = tiny_net(5);
        let adversary = tiny_net(6);
        let mut window = DataWindow::new(1024);
        let plan = DefensePlan {
            adversary_fraction: 0.0,
            ..quick_defense_plan(1)
        };
        run_defense_iteration(&mut victim, &adversary, &plan, &mut window, 1).unwrap();
        // Self-play rows carry the full move count of each game; with no
        // adversarial games every generated row came from the victim's own
        // games (all policy targets are proper distributions over 26 moves).
        assert!(window.total_rows() > 0);
        for row in window.rows() {
            assert_eq!(row.policy_target.len(), 26);
        }
    }

    #[test]
    fn iterated_run_builds_a_chained_lineage() {
        let dir = tempfile::tempdir().unwrap();
        let config = IteratedConfig {
            plan: IterationPlan {
                attack: quick_attack_plan(1),
                defend: quick_defense_plan(1),
            },
            iterations: 2,
        };
        let report =
            run_iterated(dir.path(), &tiny_net(7), &tiny_net(8), &config).unwrap();
        assert_eq!(report.entries.len(), 6);
        assert_eq!(report.entry("victim_000").unwrap().parent, None);
        assert_eq!(
            report.entry("adversary_001").unwrap().parent.as_deref(),
            Some("adversary_000")
        );
        assert_eq!(
            report.entry("adversary_002").unwrap().parent.as_deref(),
            Some("adversary_001")
        );
        assert_eq!(
            report.entry("victim_002").unwrap().parent.as_deref(),
            Some("victim_001")
        );
        // Window accounting is monotone along each lineage.
        let a1 = report.entry("adversary_001").unwrap().window_rows;
        let a2 = report.entry("adversary_002").unwrap().window_rows;
        assert!(a2 > a1);
        // Checkpoints all load back.
        for entry in &report.entries {
            let loaded =
                crate::nnet::load_checkpoint(&dir.path().join(&entry.checkpoint)).unwrap();
            assert_eq!(loaded.step_count, entry.step_count);
        }
        let loaded = LineageReport::load(&dir.path().join("lineage.json")).unwrap();
        assert_eq!(loaded, report);
    }

    #[test]
    fn zero_iterations_reports_only_the_seeds() {
        let dir = tempfile::tempdir().unwrap();
        let config = IteratedConfig {
            plan: IterationPlan {
                attack: quick_attack_plan(1),
                defend: quick_defense_plan(1),
            },
            iterations: 0,
        };
        let report =
            run_iterated(dir.path(), &tiny_net(9), &tiny_net(10), &config).unwrap();
        assert_eq!(report.entries.len(), 2);
        assert!(report.entries.iter().all(|e| e.iteration == 0));
        assert!(report.entries.iter().all(|e| e.parent.is_none()));
    }

    #[test]
    fn interrupted_iterated_run_resumes_bit_identically() {
        let plan = IterationPlan {
            attack: quick_attack_plan(1),
            defend: quick_defense_plan(1),
        };
        let two = IteratedConfig { plan: plan.clone(), iterations: 2 };
        let one = IteratedConfig { plan, iterations: 1 };

        let dir_a = tempfile::tempdir().unwrap();
        let straight = run_iterated(dir_a.path(), &tiny_net(21), &tiny_net(22), &two).unwrap();

        // An "interrupted" run: stop after one iteration, then resume with
        // the full config. Extension past the original budget is the same
        // code path.
        let dir_b = tempfile::tempdir().unwrap();
        run_iterated(dir_b.path(), &tiny_net(21), &tiny_net(22), &one).unwrap();
        let resumed = resume_iterated(dir_b.path(), &two).unwrap();
        assert_eq!(straight, resumed);

        for file in [
            "victim_002.ckpt",
            "adversary_002.ckpt",
            "lineage.json",
            "windows/victim.bin",
            "windows/adversary.bin",
        ] {
            let a = std::fs::read(dir_a.path().join(file)).unwrap();
            let b = std::fs::read(dir_b.path().join(file)).unwrap();
            assert_eq!(a, b, "{file} differs between straight and resumed runs");
        }

        // Resuming a finished run is a no-op that reports the same lineage.
        let again = resume_iterated(dir_b.path(), &two).unwrap();
        assert_eq!(again, resumed);
    }

    #[test]
    fn plans_reject_invalid_settings() {
        let bad = AttackPlan {
            curriculum: CurriculumConfig {
                visit_schedule: vec![4, 2],
                ..CurriculumConfig::default()
            },
            ..AttackPlan::default()
        };
        assert!(matches!(bad.validate(), Err(CurriculumError::Config(_))));
        let bad = DefensePlan {
            adversary_fraction: 1.2,
            ..DefensePlan::default()
        };
        assert!(matches!(bad.validate(), Err(CurriculumError::Config(_))));
        let full = DefensePlan::full_scale();
        assert_eq!(full.adversary_fraction, 0.18);
        assert_eq!((full.victim_visits, full.adversary_visits), (300, 600));
    }
}

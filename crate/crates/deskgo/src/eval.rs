//! Evaluation: match running, exact binomial confidence intervals, Bayesian
//! Elo fitting, robustness reports, and the training-compute estimator for
//! the victim's lineage.
//!
//! Matches are fully seeded — every game derives its own stream from the
//! match seed and game index, so results are independent of execution order
//! and games can run in parallel. Win rates carry exact Clopper-Pearson
//! intervals inverted from the regularized incomplete beta function by
//! bisection. Elo ratings come from a maximum-a-posteriori fit of the
//! base-10 logistic model with a weak Gaussian prior, solved by damped
//! Newton iteration and anchored so the first agent is exactly 0. The
//! compute estimator maps a row count in the victim's training lineage to
//! V100 GPU-days via a fixed piecewise-linear schedule.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::agent::Evaluator;
use crate::rules::{
    score_tromp_taylor, BoardState, Color, RulesError, DEFAULT_KOMI, MAX_BOARD, MIN_BOARD,
};
use crate::search::{run_mcts, SearchConfig, SearchError};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    /// Argument outside an operation's mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),
    /// The pairwise-game graph does not connect all agents, so relative
    /// ratings are undetermined.
    #[error("the game graph is disconnected; ratings are undetermined")]
    DisconnectedGraph,
    /// No attack run reached the requested win-rate level.
    #[error("no run achieved the requested win-rate level; the bound is unbounded")]
    NeverAchieved,
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Rules(#[from] RulesError),
}

// ---------------------------------------------------------------------------
// Match running
// ---------------------------------------------------------------------------

/// Configuration for a head-to-head match.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchConfig {
    pub games: usize,
    pub board_size: usize,
    pub komi: f64,
    /// Visits per move for agent A.
    pub visits_a: u32,
    /// Visits per move for agent B.
    pub visits_b: u32,
    /// Swap colors each game; A takes Black in even-indexed games, so A
    /// plays Black in exactly `ceil(games / 2)` of them.
    pub alternate_colors: bool,
    pub seed: u64,
    /// Ply cap as on a 19×19 board (scaled by area); games at the cap are
    /// scored as they stand.
    pub move_limit_factor: f64,
}

impl Default for MatchConfig {
    fn default() -> MatchConfig {
        MatchConfig {
            games: 100,
            board_size: 5,
            komi: DEFAULT_KOMI,
            visits_a: 16,
            visits_b: 16,
            alternate_colors: true,
            seed: 0,
            move_limit_factor: 800.0,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.games == 0 {
            return Err(EvalError::Domain("a match needs at least one game".into()));
        }
        if !(MIN_BOARD..=MAX_BOARD).contains(&self.board_size) {
            return Err(EvalError::Domain(format!(
                "board size {} out of range",
                self.board_size
            )));
        }
        if self.visits_a == 0 || self.visits_b == 0 {
            return Err(EvalError::Domain("visit budgets must be >= 1".into()));
        }
        if self.move_limit_factor <= 0.0 {
            return Err(EvalError::Domain("move_limit_factor must be > 0".into()));
        }
        Ok(())
    }

    fn move_limit(&self) -> usize {
        let area = (self.board_size * self.board_size) as f64;
        ((self.move_limit_factor * area / 361.0).round() as usize).max(2)
    }
}

/// One game of a match.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchGame {
    pub index: usize,
    pub a_is_black: bool,
    pub winner: Color,
    /// Winner's score margin.
    pub margin: f64,
    pub plies: usize,
    pub a_won: bool,
}

/// Aggregate outcome of a match.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchResult {
    pub games: Vec<MatchGame>,
    pub wins_a: usize,
    pub wins_b: usize,
}

impl MatchResult {
    pub fn win_rate_a(&self) -> f64 {
        self.wins_a as f64 / self.games.len() as f64
    }

    /// Exact interval on A's win rate.
    pub fn ci_a(&self, confidence: f64) -> Result<WinRateCI, EvalError> {
        clopper_pearson(self.wins_a as u64, self.games.len() as u64, confidence)
    }
}

/// Mixes a per-game seed so games are independent of play order.
fn game_seed(match_seed: u64, index: usize) -> u64 {
    (match_seed ^ 0xD6E8_FEB8_6659_FD93).wrapping_add((index as u64).wrapping_mul(0x2545_F491_4F6C_DD1D))
}

fn play_match_game(
    agent_a: &(dyn Evaluator + Sync),
    agent_b: &(dyn Evaluator + Sync),
    config: &MatchConfig,
    index: usize,
) -> Result<MatchGame, EvalError> {
    let a_is_black = !config.alternate_colors || index % 2 == 0;
    let seed = game_seed(config.seed, index);
    let mut state = BoardState::new(config.board_size, config.komi);
    let limit = config.move_limit();
    let mut plies = 0usize;
    while !state.game_over() && plies < limit {
        let a_to_move = (state.to_move() == Color::Black) == a_is_black;
        let mut search = SearchConfig::default();
        search.visits = if a_to_move { config.visits_a } else { config.visits_b };
        search.deterministic_seed =
            seed.wrapping_add((plies as u64).wrapping_mul(0xA24B_AED4_963E_E407));
        let result = if a_to_move {
            run_mcts(&state, agent_a, &search)?
        } else {
            run_mcts(&state, agent_b, &search)?
        };
        state = state.apply_move(result.chosen_move)?;
        plies += 1;
    }
    let score = score_tromp_taylor(&state);
    let a_won = (score.winner == Color::Black) == a_is_black;
    Ok(MatchGame {
        index,
        a_is_black,
        winner: score.winner,
        margin: score.margin,
        plies,
        a_won,
    })
}

/// Plays a seeded head-to-head match. Games are independent given the seed
/// and run in parallel; the result is identical regardless of scheduling.
pub fn run_match(
    agent_a: &(dyn Evaluator + Sync),
    agent_b: &(dyn Evaluator + Sync),
    config: &MatchConfig,
) -> Result<MatchResult, EvalError> {
    config.validate()?;
    let games: Result<Vec<MatchGame>, EvalError> = (0..config.games)
        .into_par_iter()
        .map(|index| play_match_game(agent_a, agent_b, config, index))
        .collect();
    let games = games?;
    let wins_a = games.iter().filter(|g| g.a_won).count();
    let wins_b = games.len() - wins_a;
    Ok(MatchResult {
        games,
        wins_a,
        wins_b,
    })
}

// ---------------------------------------------------------------------------
// Clopper-Pearson intervals
// ---------------------------------------------------------------------------

/// An exact binomial confidence interval on a win rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WinRateCI {
    pub wins: u64,
    pub losses: u64,
    pub point: f64,
    pub lower: f64,
    pub upper: f64,
    pub confidence: f64,
}

/// Natural log of the gamma function (Lanczos approximation, g = 7).
fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // Reflection keeps the approximation in its accurate range.
        std::f64::consts::PI.ln() - (std::f64::consts::PI * x).sin().ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = 0.99999999999980993;
        for (i, &c) in COEFFS.iter().enumerate() {
            acc += c / (x + i as f64 + 1.0);
        }
        let t = x + 7.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

/// Continued fraction for the incomplete beta function (Lentz's method).
fn beta_continued_fraction(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "beta parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front =
        ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    // The continued fraction converges fast only on one side of the mean;
    // use the symmetry I_x(a,b) = 1 − I_{1−x}(b,a) for the other.
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(x, a, b) / a
    } else {
        1.0 - front * beta_continued_fraction(1.0 - x, b, a) / b
    }
}

/// Inverts `I_x(a, b) = target` for x by bisection to within `tol`.
fn beta_quantile(target: f64, a: f64, b: f64, tol: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if regularized_incomplete_beta(mid, a, b) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact binomial confidence interval for `wins` successes in `n` trials,
/// by beta-quantile inversion (bisection on the regularized incomplete beta
/// function, tolerance 1e-10). The zero- and full-success edges are closed
/// form: `0` and `1` respectively.
pub fn clopper_pearson(wins: u64, n: u64, confidence: f64) -> Result<WinRateCI, EvalError> {
    if n == 0 {
        return Err(EvalError::Domain("n must be >= 1".into()));
    }
    if wins > n {
        return Err(EvalError::Domain(format!("wins {wins} exceeds n {n}")));
    }
    if !(0.0..1.0).contains(&confidence) || confidence <= 0.0 {
        return Err(EvalError::Domain(format!(
            "confidence {confidence} outside (0, 1)"
        )));
    }
    const TOL: f64 = 1e-10;
    let alpha = 1.0 - confidence;
    let (w, nf) = (wins as f64, n as f64);
    let lower = if wins == 0 {
        0.0
    } else {
        beta_quantile(alpha / 2.0, w, nf - w + 1.0, TOL)
    };
    let upper = if wins == n {
        1.0
    } else {
        beta_quantile(1.0 - alpha / 2.0, w + 1.0, nf - w, TOL)
    };
    Ok(WinRateCI {
        wins,
        losses: n - wins,
        point: w / nf,
        lower,
        upper,
        confidence,
    })
}

// ---------------------------------------------------------------------------
// Bayesian Elo
// ---------------------------------------------------------------------------

/// Elo scale: rating differences feed the base-10 logistic with this
/// divisor.
pub const ELO_SCALE: f64 = 400.0;

/// Standard deviation of the Gaussian prior on each rating.
pub const ELO_PRIOR_SIGMA: f64 = 1200.0;

/// Newton step damping factor.
pub const ELO_NEWTON_DAMPING: f64 = 0.5;

/// Expected score of a player rated `delta` Elo above the opponent.
pub fn expected_score(delta: f64) -> f64 {
    1.0 / (1.0 + 10.0f64.powf(-delta / ELO_SCALE))
}

/// Head-to-head tally between two named agents.
#[derive(Clone, Debug, PartialEq)]
pub struct PairTally {
    pub agent_a: String,
    pub agent_b: String,
    pub wins_a: u64,
    pub wins_b: u64,
}

impl PairTally {
    pub fn new(agent_a: &str, agent_b: &str, wins_a: u64, wins_b: u64) -> PairTally {
        PairTally {
            agent_a: agent_a.to_string(),
            agent_b: agent_b.to_string(),
            wins_a,
            wins_b,
        }
    }
}

/// Fitted ratings. The anchor agent's rating is exactly 0; everything else
/// is relative to it.
#[derive(Clone, Debug, PartialEq)]
pub struct EloModel {
    pub ratings: BTreeMap<String, f64>,
    pub anchor: String,
    /// `400 / ln 10`, the natural-logistic scale equivalent of the base-10
    /// model.
    pub scale: f64,
}

impl EloModel {
    pub fn rating(&self, agent: &str) -> Option<f64> {
        self.ratings.get(agent).copied()
    }

    /// Ratings as a CSV table, highest first.
    pub fn to_csv(&self) -> String {
        let mut rows: Vec<(&String, f64)> =
            self.ratings.iter().map(|(name, &r)| (name, r)).collect();
        rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let mut out = String::from("agent,elo\n");
        for (name, rating) in rows {
            out.push_str(&format!("{name},{rating:.2}\n"));
        }
        out
    }
}

/// Solves the dense symmetric positive-definite system `H x = g` by
/// Gaussian elimination with partial pivoting.
fn solve_linear(mut h: Vec<Vec<f64>>, mut g: Vec<f64>) -> Vec<f64> {
    let n = g.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| h[i][col].abs().total_cmp(&h[j][col].abs()))
            .expect("non-empty system");
        h.swap(col, pivot);
        g.swap(col, pivot);
        let diag = h[col][col];
        assert!(diag.abs() > 1e-300, "prior keeps the Hessian non-singular");
        for row in col + 1..n {
            let factor = h[row][col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                h[row][k] -= factor * h[col][k];
            }
            g[row] -= factor * g[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = g[row];
        for k in row + 1..n {
            acc -= h[row][k] * x[k];
        }
        x[row] = acc / h[row][row];
    }
    x
}

/// Fits maximum-a-posteriori Elo ratings from pairwise tallies under the
/// logistic model `P(a beats b) = 1/(1+10^(−(r_a−r_b)/400))` with a weak
/// Gaussian prior (σ = 1200) on each rating, solved by damped Newton
/// iteration to gradient norm < 1e-8. The first agent encountered is the
/// anchor and reports rating exactly 0.
pub fn fit_elo(tallies: &[PairTally]) -> Result<EloModel, EvalError> {
    let mut names: Vec<String> = Vec::new();
    let mut index = BTreeMap::new();
    let mut intern = |name: &str, names: &mut Vec<String>| -> usize {
        *index.entry(name.to_string()).or_insert_with(|| {
            names.push(name.to_string());
            names.len() - 1
        })
    };
    let mut edges = Vec::new();
    for tally in tallies {
        let a = intern(&tally.agent_a, &mut names);
        let b = intern(&tally.agent_b, &mut names);
        if a == b {
            return Err(EvalError::Domain(format!(
                "self-play tally for {}",
                tally.agent_a
            )));
        }
        if tally.wins_a + tally.wins_b > 0 {
            edges.push((a, b, tally.wins_a as f64, tally.wins_b as f64));
        }
    }
    let n = names.len();
    if n == 0 {
        return Err(EvalError::Domain("no tallies".into()));
    }

    // Connectivity via union-find over agents that share games.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        if parent[i] != i {
            let root = find(parent, parent[i]);
            parent[i] = root;
        }
        parent[i]
    }
    for &(a, b, _, _) in &edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra] = rb;
    }
    let root = find(&mut parent, 0);
    if (0..n).any(|i| find(&mut parent, i) != root) {
        return Err(EvalError::DisconnectedGraph);
    }

    let k = std::f64::consts::LN_10 / ELO_SCALE;
    let prior_precision = 1.0 / (ELO_PRIOR_SIGMA * ELO_PRIOR_SIGMA);
    let mut r = vec![0.0f64; n];
    for _ in 0..10_000 {
        let mut g = vec![0.0f64; n];
        let mut h = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            g[i] -= prior_precision * r[i];
            h[i][i] += prior_precision;
        }
        for &(a, b, wins_a, wins_b) in &edges {
            let games = wins_a + wins_b;
            let p = expected_score(r[a] - r[b]);
            let residual = k * (wins_a - games * p);
            g[a] += residual;
            g[b] -= residual;
            let info = k * k * games * p * (1.0 - p);
            h[a][a] += info;
            h[b][b] += info;
            h[a][b] -= info;
            h[b][a] -= info;
        }
        let grad_norm = g.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
        if grad_norm < 1e-8 {
            let anchor_rating = r[0];
            let ratings = names
                .iter()
                .zip(r.iter())
                .map(|(name, &rating)| (name.clone(), rating - anchor_rating))
                .collect();
            return Ok(EloModel {
                ratings,
                anchor: names[0].clone(),
                scale: ELO_SCALE / std::f64::consts::LN_10,
            });
        }
        let step = solve_linear(h, g);
        for i in 0..n {
            r[i] += ELO_NEWTON_DAMPING * step[i];
        }
    }
    unreachable!("damped Newton on a strictly concave objective converges");
}

// ---------------------------------------------------------------------------
// Robustness reports
// ---------------------------------------------------------------------------

/// One measured point of an attack run: cumulative training compute (in
/// whatever unit the run logs — games or steps) and the adversary's match
/// record against the victim at that point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComputePoint {
    pub compute: f64,
    pub wins: u64,
    pub games: u64,
}

/// A logged attack run: compute checkpoints with match results, in
/// ascending compute order.
#[derive(Clone, Debug, PartialEq)]
pub struct AttackRun {
    pub name: String,
    pub points: Vec<ComputePoint>,
}

/// Upper bound on the compute needed to exploit a victim at a given level.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingRobustness {
    /// The report certifies win rate ≥ 1 − p.
    pub p_level: f64,
    /// Training compute of the earliest qualifying checkpoint.
    pub compute_to_exploit: f64,
    /// The same bound divided by the victim's own training compute; below 1
    /// whenever exploiting is cheaper than training the victim was.
    pub relative_bound: f64,
    /// Which run achieved it.
    pub run: String,
}

/// Minimum over runs of the first compute point whose win rate reaches
/// `1 − p`. With `strict` on, the 95% CI lower bound must reach the level,
/// not just the point estimate.
pub fn training_compute_robustness(
    runs: &[AttackRun],
    p: f64,
    victim_compute: f64,
    strict: bool,
) -> Result<TrainingRobustness, EvalError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(EvalError::Domain(format!("p {p} outside [0, 1]")));
    }
    if victim_compute <= 0.0 {
        return Err(EvalError::Domain("victim compute must be > 0".into()));
    }
    let level = 1.0 - p;
    let mut best: Option<(f64, &str)> = None;
    for run in runs {
        for point in &run.points {
            if point.games == 0 {
                continue;
            }
            let achieved = if strict {
                clopper_pearson(point.wins, point.games, 0.95)?.lower >= level
            } else {
                point.wins as f64 / point.games as f64 >= level
            };
            if achieved {
                if best.map_or(true, |(c, _)| point.compute < c) {
                    best = Some((point.compute, &run.name));
                }
                break; // points are in ascending compute order
            }
        }
    }
    let (compute_to_exploit, run) = best.ok_or(EvalError::NeverAchieved)?;
    Ok(TrainingRobustness {
        p_level: p,
        compute_to_exploit,
        relative_bound: compute_to_exploit / victim_compute,
        run: run.to_string(),
    })
}

/// One grid point of a win-rate-vs-visits curve, from the victim's
/// perspective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub visits: u32,
    pub victim_wins: usize,
    pub games: usize,
    pub win_rate: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Victim win rate against the adversary and against a fixed-budget copy of
/// itself, across a victim-visit grid. The adversary "sits above the
/// baseline" at a grid point when the victim fares strictly worse against
/// it than against its own copy — the lack-of-robustness indicator.
#[derive(Clone, Debug, PartialEq)]
pub struct RobustnessReport {
    pub winrate_vs_visits: Vec<CurvePoint>,
    pub baseline_self_curve: Vec<CurvePoint>,
    pub above_baseline: Vec<bool>,
}

impl RobustnessReport {
    /// The report as a CSV table over the shared visit grid.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "visits,victim_vs_adversary,lower,upper,victim_vs_self,self_lower,self_upper,adversary_above_baseline\n",
        );
        for ((a, s), &above) in self
            .winrate_vs_visits
            .iter()
            .zip(&self.baseline_self_curve)
            .zip(&self.above_baseline)
        {
            out.push_str(&format!(
                "{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{}\n",
                a.visits, a.win_rate, a.lower, a.upper, s.win_rate, s.lower, s.upper, above
            ));
        }
        out
    }
}

/// Sweeps the victim's visit budget against a fixed-budget adversary and
/// against a fixed-budget copy of the victim itself (the baseline scaling
/// trend). Both sweeps reuse the same per-point seeds, so an adversary that
/// is literally the victim's copy yields two identical curves.
pub fn inference_compute_robustness(
    victim: &(dyn Evaluator + Sync),
    adversary: &(dyn Evaluator + Sync),
    visit_grid: &[u32],
    opponent_visits: u32,
    games_per_point: usize,
    board_size: usize,
    seed: u64,
) -> Result<RobustnessReport, EvalError> {
    let curve = |opponent: &(dyn Evaluator + Sync)| -> Result<Vec<CurvePoint>, EvalError> {
        visit_grid
            .iter()
            .map(|&visits| {
                let config = MatchConfig {
                    games: games_per_point,
                    board_size,
                    visits_a: visits,
                    visits_b: opponent_visits,
                    seed: seed ^ (visits as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                    ..MatchConfig::default()
                };
                let result = run_match(victim, opponent, &config)?;
                let ci = result.ci_a(0.95)?;
                Ok(CurvePoint {
                    visits,
                    victim_wins: result.wins_a,
                    games: result.games.len(),
                    win_rate: result.win_rate_a(),
                    lower: ci.lower,
                    upper: ci.upper,
                })
            })
            .collect()
    };
    let winrate_vs_visits = curve(adversary)?;
    let baseline_self_curve = curve(victim)?;
    let above_baseline = winrate_vs_visits
        .iter()
        .zip(&baseline_self_curve)
        .map(|(a, s)| a.win_rate < s.win_rate)
        .collect();
    Ok(RobustnessReport {
        winrate_vs_visits,
        baseline_self_curve,
        above_baseline,
    })
}

// ---------------------------------------------------------------------------
// Compute estimator
// ---------------------------------------------------------------------------

/// Rows generated by the victim lineage's original (non-distributed) run.
pub const KATAGO_BASE_ROWS: f64 = 1_229_425_124.0;
/// Cost of that original run in V100 GPU-days.
pub const KATAGO_BASE_COST: f64 = 6730.0;
/// Row count at which the distributed run raised its search budget.
pub const KATAGO_SEARCH_SWITCH_ROWS: f64 = 3_211_000_000.0;
/// GPU-days per row in the reference segment used for extrapolation:
/// 5451 GPU-days over 760,807,175 rows.
pub const KATAGO_REFERENCE_COST: f64 = 5451.0;
pub const KATAGO_REFERENCE_ROWS: f64 = 760_807_175.0;
/// Relative cost of a distributed-run row before/after the search switch.
pub const KATAGO_LOW_MULTIPLIER: f64 = 1.25;
pub const KATAGO_HIGH_MULTIPLIER: f64 = 1.75;

/// Estimated training compute, in V100 GPU-days, of a checkpoint in the
/// victim's lineage that has trained on `rows` data rows:
///
/// ```text
/// 6730 + ((min{D, 3.211e9} − 1,229,425,124)·1.25
///       + max{D − 3.211e9, 0}·1.75) · 5451/760,807,175
/// ```
///
/// Continuous and piecewise linear in `D`, with the slope rising by exactly
/// 1.75/1.25 at the search-switch breakpoint.
pub fn estimate_katago_compute(rows: f64) -> Result<f64, EvalError> {
    if rows < KATAGO_BASE_ROWS {
        return Err(EvalError::Domain(format!(
            "row count {rows} below the base run's {KATAGO_BASE_ROWS}"
        )));
    }
    let low = (rows.min(KATAGO_SEARCH_SWITCH_ROWS) - KATAGO_BASE_ROWS) * KATAGO_LOW_MULTIPLIER;
    let high = (rows - KATAGO_SEARCH_SWITCH_ROWS).max(0.0) * KATAGO_HIGH_MULTIPLIER;
    Ok(KATAGO_BASE_COST + (low + high) * (KATAGO_REFERENCE_COST / KATAGO_REFERENCE_ROWS))
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

/// A win-rate grid: rows are adversary labels, columns a visit grid, cells
/// win rates (for the row agent).
#[derive(Clone, Debug, PartialEq)]
pub struct WinRateGrid {
    pub visit_grid: Vec<u32>,
    pub rows: Vec<(String, Vec<WinRateCI>)>,
}

impl WinRateGrid {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("agent");
        for v in &self.visit_grid {
            out.push_str(&format!(",v{v},v{v}_lower,v{v}_upper"));
        }
        out.push('\n');
        for (name, cells) in &self.rows {
            out.push_str(name);
            for ci in cells {
                out.push_str(&format!(",{:.4},{:.4},{:.4}", ci.point, ci.lower, ci.upper));
            }
            out.push('\n');
        }
        out
    }
}

/// A cross-play matrix: cell (i, j) is row agent i's win rate against
/// column agent j.
#[derive(Clone, Debug, PartialEq)]
pub struct CrossPlayMatrix {
    pub agents: Vec<String>,
    pub win_rate: Vec<Vec<Option<f64>>>,
}

impl CrossPlayMatrix {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("agent");
        for name in &self.agents {
            out.push_str(&format!(",{name}"));
        }
        out.push('\n');
        for (name, row) in self.agents.iter().zip(&self.win_rate) {
            out.push_str(name);
            for cell in row {
                match cell {
                    Some(rate) => out.push_str(&format!(",{rate:.4}")),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Plays every ordered pair of distinct agents and tabulates row-agent win
/// rates; the diagonal is empty. Also returns the pairwise tallies in a
/// form [`fit_elo`] accepts.
pub fn cross_play(
    agents: &[(String, &(dyn Evaluator + Sync), u32)],
    games_per_pair: usize,
    board_size: usize,
    seed: u64,
) -> Result<(CrossPlayMatrix, Vec<PairTally>), EvalError> {
    let n = agents.len();
    let mut matrix = vec![vec![None; n]; n];
    let mut tallies = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let config = MatchConfig {
                games: games_per_pair,
                board_size,
                visits_a: agents[i].2,
                visits_b: agents[j].2,
                seed: seed
                    ^ ((i * n + j) as u64).wrapping_mul(0x2545_F491_4F6C_DD1D),
                ..MatchConfig::default()
            };
            let result = run_match(agents[i].1, agents[j].1, &config)?;
            matrix[i][j] = Some(result.win_rate_a());
            matrix[j][i] = Some(1.0 - result.win_rate_a());
            tallies.push(PairTally::new(
                &agents[i].0,
                &agents[j].0,
                result.wins_a as u64,
                result.wins_b as u64,
            ));
        }
    }
    Ok((
        CrossPlayMatrix {
            agents: agents.iter().map(|(name, _, _)| name.clone()).collect(),
            win_rate: matrix,
        },
        tallies,
    ))
}

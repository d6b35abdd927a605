//! The `deskgo` command-line driver.
//!
//! Every subcommand takes one TOML config file (see [`crate::config`]) and
//! reads only its own section plus `[run]` and `[agents]`. Commands that
//! write results drop a `resolved.toml` beside them so any output directory
//! records exactly the configuration that produced it.
//!
//! Exit codes are part of the contract: `0` on success, `2` for anything
//! wrong with the configuration or inputs (parse errors, unknown keys, bad
//! agent specs, missing checkpoints, domain violations), and `3` for I/O
//! failures while running. Usage errors from argument parsing also exit
//! with `2`, clap's default.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::analysis::{
    accumulate_heatmaps, detect_cycle_capture_with, emit_heatmap, emit_heatmap_difference,
    parse_sgf, AnalysisError, CycleConfig, CycleEvent,
};
use crate::config::{parse_agent, ConfigError, ParsedAgent, RunConfig, RunSection};
use crate::curriculum::{resume_iterated, run_iterated, CurriculumError};
use crate::eval::{
    cross_play, fit_elo, inference_compute_robustness, run_match, EvalError, WinRateCI,
    WinRateGrid,
};
use crate::gtp::GtpEngine;
use crate::rules::{Color, MIN_BOARD};
use crate::selfplay::{generate_games, GenConfig, GenError, GenMode};

/// Desk-scale laboratory for adversarial attacks on Go programs.
#[derive(Debug, Parser)]
#[command(name = "deskgo", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate self-play games and training rows.
    Selfplay { config: PathBuf },
    /// Generate victim-play games: an adversary attacking a frozen victim.
    Victimplay { config: PathBuf },
    /// Run iterated adversarial training (attack and defense phases).
    Iterate {
        config: PathBuf,
        /// Continue an interrupted run from its output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Play a head-to-head match between two agents.
    Match { config: PathBuf },
    /// Round-robin cross-play and a Bayesian Elo fit over the pool.
    Elo { config: PathBuf },
    /// Victim win rate across a visit grid, against the adversary and
    /// against itself.
    Robustness { config: PathBuf },
    /// Aggregate cyclic-capture heatmaps from a directory of SGF games.
    Heatmap {
        config: PathBuf,
        /// Override the configured SGF directory.
        #[arg(long)]
        sgf_dir: Option<PathBuf>,
    },
    /// Serve the agent over the Go Text Protocol on stdin/stdout.
    Gtp { config: PathBuf },
}

/// Command failures, partitioned by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Configuration or domain problems; exit 2.
    #[error("{0}")]
    Usage(String),
    /// I/O failures; exit 3.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> CliError {
        match e {
            ConfigError::Io(io) => CliError::Io(io),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> CliError {
        match e {
            GenError::Io(io) => CliError::Io(io),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<CurriculumError> for CliError {
    fn from(e: CurriculumError) -> CliError {
        match e {
            CurriculumError::Io(io) => CliError::Io(io),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> CliError {
        match e {
            AnalysisError::Io(io) => CliError::Io(io),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> CliError {
        CliError::Usage(e.to_string())
    }
}

/// Runs one parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Selfplay { config } => cmd_generate(config, GenMode::SelfPlay),
        Command::Victimplay { config } => cmd_generate(config, GenMode::VictimPlay),
        Command::Iterate { config, resume } => cmd_iterate(config, *resume),
        Command::Match { config } => cmd_match(config),
        Command::Elo { config } => cmd_elo(config),
        Command::Robustness { config } => cmd_robustness(config),
        Command::Heatmap { config, sgf_dir } => cmd_heatmap(config, sgf_dir.as_deref()),
        Command::Gtp { config } => cmd_gtp(config),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("deskgo: {e}");
            e.exit_code()
        }
    }
}

fn apply_workers(run: &RunSection) {
    if let Some(workers) = run.workers {
        // The global pool can only be configured once per process; later
        // runs in the same process keep the first setting.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global();
    }
}

/// The feature-frame size for generated rows: the explicit setting,
/// else the widest frame among the agents' networks, else the largest
/// board the distribution can draw.
fn resolve_max_board(run: &RunSection, agents: &[&ParsedAgent], gen: &GenConfig) -> usize {
    run.max_board
        .or_else(|| {
            agents
                .iter()
                .filter_map(|a| a.params.as_ref().map(|p| p.config.max_board))
                .max()
        })
        .unwrap_or_else(|| {
            gen.board_size_distribution
                .keys()
                .copied()
                .max()
                .unwrap_or(MIN_BOARD)
        })
}

/// `selfplay` and `victimplay`: both are one [`generate_games`] run; the
/// subcommand pins the mode unless the config asks for a mixed run.
fn cmd_generate(config_path: &Path, default_mode: GenMode) -> Result<(), CliError> {
    let config = RunConfig::load(config_path)?;
    apply_workers(&config.run);
    let mut gen = config.gen.clone().unwrap_or_default();
    if !matches!(gen.mode, GenMode::Mixed { .. }) {
        gen.mode = default_mode;
    }
    let agent_a = parse_agent(config.agents.adversary_spec())?;
    let agent_b = parse_agent(config.agents.victim_spec())?;
    let max_board = resolve_max_board(&config.run, &[&agent_a, &agent_b], &gen);

    let out_dir = config.out_dir()?;
    let mut resolved = config.clone();
    resolved.gen = Some(gen.clone());
    resolved.save_resolved(&out_dir)?;
    let manifest = generate_games(
        &out_dir,
        agent_a.evaluator.as_ref(),
        agent_b.evaluator.as_ref(),
        &gen,
        config.run.games,
        config.run.seed,
        max_board,
    )?;
    println!(
        "generated {} games, {} rows -> {}",
        manifest.games.len(),
        manifest.total_rows,
        out_dir.display()
    );
    Ok(())
}

fn cmd_iterate(config_path: &Path, resume: bool) -> Result<(), CliError> {
    let config = RunConfig::load(config_path)?;
    apply_workers(&config.run);
    let iterated = config.iterated_config();
    // Validate everything before touching the output directory, so a bad
    // config leaves no half-created run behind.
    let report = if resume {
        let lineage = Path::new(&config.run.out_dir).join("lineage.json");
        if !lineage.exists() {
            return Err(CliError::Usage(format!(
                "nothing to resume: {} not found",
                lineage.display()
            )));
        }
        let out_dir = config.out_dir()?;
        config.save_resolved(&out_dir)?;
        resume_iterated(&out_dir, &iterated)?
    } else {
        let victim = parse_agent(config.agents.victim_spec())?;
        let adversary = parse_agent(config.agents.adversary_spec())?;
        let victim_params = victim.require_params("the victim seed")?;
        let adversary_params = adversary.require_params("the adversary seed")?;
        let out_dir = config.out_dir()?;
        config.save_resolved(&out_dir)?;
        run_iterated(&out_dir, victim_params, adversary_params, &iterated)?
    };
    for entry in &report.entries {
        println!(
            "{} <- {} (steps {}, rows {})",
            entry.name,
            entry.parent.as_deref().unwrap_or("seed"),
            entry.step_count,
            entry.window_rows
        );
    }
    Ok(())
}

fn cmd_match(config_path: &Path) -> Result<(), CliError> {
    let config = RunConfig::load(config_path)?;
    apply_workers(&config.run);
    let section = config.match_.clone().unwrap_or_default();
    let match_config = section.to_match_config(config.run.seed);
    let agent_a = parse_agent(&config.agents.a)?;
    let agent_b = parse_agent(&config.agents.b)?;
    let result = run_match(agent_a.evaluator.as_ref(), agent_b.evaluator.as_ref(), &match_config)?;
    let ci = result.ci_a(0.95)?;

    let out_dir = config.out_dir()?;
    config.save_resolved(&out_dir)?;
    let mut games_csv = String::from("index,a_is_black,winner,margin,plies,a_won\n");
    for game in &result.games {
        games_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            game.index,
            game.a_is_black,
            match game.winner {
                Color::Black => 'B',
                Color::White => 'W',
            },
            game.margin,
            game.plies,
            game.a_won
        ));
    }
    std::fs::write(out_dir.join("match.csv"), games_csv)?;
    let summary = format!(
        "agent,wins,games,win_rate,lower,upper\na,{},{},{:.4},{:.4},{:.4}\nb,{},{},{:.4},{:.4},{:.4}\n",
        result.wins_a,
        result.games.len(),
        ci.point,
        ci.lower,
        ci.upper,
        result.wins_b,
        result.games.len(),
        1.0 - ci.point,
        1.0 - ci.upper,
        1.0 - ci.lower,
    );
    std::fs::write(out_dir.join("match_summary.csv"), summary)?;
    println!(
        "a {} - {} b over {} games (a win rate {:.3} [{:.3}, {:.3}])",
        result.wins_a,
        result.wins_b,
        result.games.len(),
        ci.point,
        ci.lower,
        ci.upper
    );
    Ok(())
}

fn cmd_elo(config_path: &Path) -> Result<(), CliError> {
    let config = RunConfig::load(config_path)?;
    apply_workers(&config.run);
    let section = config
        .elo
        .clone()
        .ok_or_else(|| CliError::Usage("missing [elo] section".into()))?;
    if section.agents.len() < 2 {
        return Err(CliError::Usage("[elo] needs at least two agents".into()));
    }
    let visits: Vec<u32> = match section.visits.len() {
        0 => vec![16; section.agents.len()],
        1 => vec![section.visits[0]; section.agents.len()],
        n if n == section.agents.len() => section.visits.clone(),
        _ => {
            return Err(CliError::Usage(
                "[elo] visits must be empty, one value, or one per agent".into(),
            ))
        }
    };

    // Duplicate specs get a #k suffix so ratings stay distinguishable.
    let mut spec_counts: HashMap<&str, usize> = HashMap::new();
    for spec in &section.agents {
        *spec_counts.entry(spec.as_str()).or_insert(0) += 1;
    }
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let mut names = Vec::new();
    let mut parsed = Vec::new();
    for spec in &section.agents {
        let occurrence = seen.entry(spec.as_str()).or_insert(0);
        *occurrence += 1;
        names.push(if spec_counts[spec.as_str()] == 1 {
            spec.clone()
        } else {
            format!("{spec}#{occurrence}")
        });
        parsed.push(parse_agent(spec)?);
    }
    let pool: Vec<(String, &(dyn crate::agent::Evaluator + Sync), u32)> = names
        .iter()
        .zip(&parsed)
        .zip(&visits)
        .map(|((name, agent), &v)| (name.clone(), &*agent.evaluator, v))
        .collect();

    let (matrix, tallies) = cross_play(
        &pool,
        section.games_per_pair,
        section.board_size,
        config.run.seed,
    )?;
    let model = fit_elo(&tallies)?;

    let out_dir = config.out_dir()?;
    config.save_resolved(&out_dir)?;
    std::fs::write(out_dir.join("cross_play.csv"), matrix.to_csv())?;
    std::fs::write(out_dir.join("elo.csv"), model.to_csv())?;
    for line in model.to_csv().lines().skip(1) {
        println!("{line}");
    }
    Ok(())
}

fn cmd_robustness(config_path: &Path) -> Result<(), CliError> {
    let config = RunConfig::load(config_path)?;
    apply_workers(&config.run);
    let section = config.robustness.clone().unwrap_or_default();
    let victim = parse_agent(config.agents.victim_spec())?;
    let adversary = parse_agent(config.agents.adversary_spec())?;
    let report = inference_compute_robustness(
        victim.evaluator.as_ref(),
        adversary.evaluator.as_ref(),
        &section.visit_grid,
        section.opponent_visits,
        section.games_per_point,
        section.board_size,
        config.run.seed,
    )?;

    let to_ci = |p: &crate::eval::CurvePoint| WinRateCI {
        wins: p.victim_wins as u64,
        losses: (p.games - p.victim_wins) as u64,
        point: p.win_rate,
        lower: p.lower,
        upper: p.upper,
        confidence: 0.95,
    };
    let grid = WinRateGrid {
        visit_grid: section.visit_grid.clone(),
        rows: vec![
            (
                "victim_vs_adversary".to_string(),
                report.winrate_vs_visits.iter().map(to_ci).collect(),
            ),
            (
                "victim_vs_self".to_string(),
                report.baseline_self_curve.iter().map(to_ci).collect(),
            ),
        ],
    };

    let out_dir = config.out_dir()?;
    config.save_resolved(&out_dir)?;
    std::fs::write(out_dir.join("robustness.csv"), report.to_csv())?;
    std::fs::write(out_dir.join("win_rate_grid.csv"), grid.to_csv())?;
    let above = report.above_baseline.iter().filter(|&&a| a).count();
    println!(
        "adversary above the self-play baseline at {above} of {} grid points",
        report.above_baseline.len()
    );
    Ok(())
}

fn parse_victim_color(name: &str) -> Result<Color, CliError> {
    match name.to_ascii_lowercase().as_str() {
        "b" | "black" => Ok(Color::Black),
        "w" | "white" => Ok(Color::White),
        _ => Err(CliError::Usage(format!("bad victim color `{name}`"))),
    }
}

/// Parses every `.sgf` under `dir` (sorted by name) and collects cyclic
/// capture events against `victim`.
fn scan_sgf_events(
    dir: &Path,
    victim: Color,
    cycle: &CycleConfig,
) -> Result<Vec<CycleEvent>, CliError> {
    if !dir.is_dir() {
        return Err(CliError::Usage(format!(
            "sgf directory {} does not exist",
            dir.display()
        )));
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|p| p.extension().is_some_and(|e| e == "sgf"))
        .collect();
    paths.sort();
    let mut events = Vec::new();
    for path in &paths {
        let text = std::fs::read_to_string(path)?;
        let game = parse_sgf(&text)
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        if let Some(event) = detect_cycle_capture_with(&game, victim, cycle)? {
            events.push(event);
        }
    }
    Ok(events)
}

fn cmd_heatmap(config_path: &Path, sgf_dir: Option<&Path>) -> Result<(), CliError> {
    let config = RunConfig::load(config_path)?;
    let section = config.heatmap.clone().unwrap_or_default();
    let dir = sgf_dir
        .map(Path::to_path_buf)
        .or_else(|| section.sgf_dir.as_ref().map(PathBuf::from))
        .ok_or_else(|| CliError::Usage("no SGF directory configured or given".into()))?;
    let victim = parse_victim_color(&section.victim)?;
    let cycle = CycleConfig {
        min_group: section.min_group,
        min_interior_adversary: section.min_interior,
    };

    let events = scan_sgf_events(&dir, victim, &cycle)?;
    let map = accumulate_heatmaps(&events)?;
    let out_dir = config.out_dir()?;
    config.save_resolved(&out_dir)?;
    emit_heatmap(&map, &out_dir.join("heatmap"))?;
    println!(
        "{} cyclic events over {} games -> {}",
        map.event_count,
        events.len().max(map.event_count as usize),
        out_dir.join("heatmap").display()
    );

    if let Some(baseline) = &section.baseline_dir {
        let baseline_events = scan_sgf_events(Path::new(baseline), victim, &cycle)?;
        let baseline_map = accumulate_heatmaps(&baseline_events)?;
        emit_heatmap_difference(&map, &baseline_map, &out_dir.join("heatmap_diff"))?;
        println!(
            "difference vs {} ({} events) -> {}",
            baseline,
            baseline_map.event_count,
            out_dir.join("heatmap_diff").display()
        );
    }
    Ok(())
}

/// Builds the GTP engine a config describes; the `gtp` command serves it on
/// stdin/stdout.
pub fn gtp_engine_from(config: &RunConfig) -> Result<GtpEngine, CliError> {
    let section = config.gtp.clone().unwrap_or_default();
    let spec = section.agent.as_deref().unwrap_or(&config.agents.a);
    let agent = parse_agent(spec)?;
    if !(crate::rules::MIN_BOARD..=crate::rules::MAX_BOARD).contains(&section.board_size) {
        return Err(CliError::Usage(format!(
            "gtp board size {} out of range",
            section.board_size
        )));
    }
    Ok(GtpEngine::new(
        agent.evaluator,
        section.visits,
        section.board_size,
        section.komi,
        config.run.seed,
    ))
}

fn cmd_gtp(config_path: &Path) -> Result<(), CliError> {
    let config = RunConfig::load(config_path)?;
    let mut engine = gtp_engine_from(&config)?;
    let stdin = std::io::stdin();
    let stdout = std::io::stdout();
    engine.serve(stdin.lock(), stdout.lock())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
        let path = dir.join(name);
        std::fs::write(&path, body).unwrap();
        path
    }

    fn run_args(args: &[&str]) -> i32 {
        run(Cli::parse_from(args))
    }

    #[test]
    fn selfplay_command_writes_manifest_rows_and_resolved_config() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let config = write_config(
            dir.path(),
            "run.toml",
            &format!(
                r#"
                [run]
                seed = 5
                games = 2
                out_dir = "{}"

                [gen]
                selfplay_visits = 2
                move_limit_factor = 60.0

                [gen.board_size_distribution]
                5 = 1.0
                "#,
                out.display()
            ),
        );
        assert_eq!(run_args(&["deskgo", "selfplay", config.to_str().unwrap()]), 0);
        assert!(out.join("manifest.json").exists());
        assert!(out.join("rows_05.bin").exists());
        assert!(out.join("resolved.toml").exists());
        let resolved = RunConfig::load(&out.join("resolved.toml")).unwrap();
        assert_eq!(resolved.gen.unwrap().mode, GenMode::SelfPlay);

        let manifest = crate::selfplay::Manifest::load(&out.join("manifest.json")).unwrap();
        assert_eq!(manifest.games.len(), 2);
        assert!(manifest.total_rows > 0);
    }

    #[test]
    fn victimplay_command_pins_the_mode() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let config = write_config(
            dir.path(),
            "run.toml",
            &format!(
                r#"
                [run]
                games = 1
                out_dir = "{}"

                [gen]
                adversary_visits = 2
                victim_visits = 1
                move_limit_factor = 60.0

                [gen.board_size_distribution]
                5 = 1.0
                "#,
                out.display()
            ),
        );
        assert_eq!(run_args(&["deskgo", "victimplay", config.to_str().unwrap()]), 0);
        let manifest = crate::selfplay::Manifest::load(&out.join("manifest.json")).unwrap();
        assert_eq!(manifest.config.mode, GenMode::VictimPlay);
    }

    #[test]
    fn match_command_emits_per_game_and_summary_tables() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let config = write_config(
            dir.path(),
            "run.toml",
            &format!(
                "[run]\nout_dir = \"{}\"\n\n[match]\ngames = 4\nvisits_a = 2\nvisits_b = 2\nmove_limit_factor = 60.0\n",
                out.display()
            ),
        );
        assert_eq!(run_args(&["deskgo", "match", config.to_str().unwrap()]), 0);
        let games = std::fs::read_to_string(out.join("match.csv")).unwrap();
        assert_eq!(games.lines().count(), 5);
        assert!(games.starts_with("index,a_is_black,winner,margin,plies,a_won\n"));
        let summary = std::fs::read_to_string(out.join("match_summary.csv")).unwrap();
        assert!(summary.starts_with("agent,wins,games,win_rate,lower,upper\n"));
        assert_eq!(summary.lines().count(), 3);
    }

    #[test]
    fn elo_command_rates_a_pool() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let config = write_config(
            dir.path(),
            "run.toml",
            &format!(
                r#"
                [run]
                out_dir = "{}"

                [elo]
                agents = ["uniform", "uniform", "fresh:cnn:1:4:5:3"]
                visits = [1, 4, 2]
                games_per_pair = 2
                board_size = 5
                "#,
                out.display()
            ),
        );
        assert_eq!(run_args(&["deskgo", "elo", config.to_str().unwrap()]), 0);
        let elo = std::fs::read_to_string(out.join("elo.csv")).unwrap();
        assert_eq!(elo.lines().count(), 4);
        assert!(elo.contains("uniform#1"));
        assert!(elo.contains("uniform#2"));
        let matrix = std::fs::read_to_string(out.join("cross_play.csv")).unwrap();
        assert!(matrix.starts_with("agent,"));
    }

    #[test]
    fn robustness_command_writes_curve_and_grid() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let config = write_config(
            dir.path(),
            "run.toml",
            &format!(
                r#"
                [run]
                out_dir = "{}"

                [robustness]
                visit_grid = [1, 2]
                opponent_visits = 2
                games_per_point = 2
                board_size = 5
                "#,
                out.display()
            ),
        );
        assert_eq!(run_args(&["deskgo", "robustness", config.to_str().unwrap()]), 0);
        let curve = std::fs::read_to_string(out.join("robustness.csv")).unwrap();
        assert_eq!(curve.lines().count(), 3);
        let grid = std::fs::read_to_string(out.join("win_rate_grid.csv")).unwrap();
        assert!(grid.starts_with("agent,v1,v1_lower,v1_upper,v2,v2_lower,v2_upper\n"));
        assert!(grid.contains("victim_vs_adversary"));
        assert!(grid.contains("victim_vs_self"));
    }

    #[test]
    fn heatmap_command_scans_generated_games() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("gen");
        let games_config = write_config(
            dir.path(),
            "gen.toml",
            &format!(
                r#"
                [run]
                seed = 11
                games = 2
                out_dir = "{}"

                [gen]
                selfplay_visits = 2
                move_limit_factor = 60.0

                [gen.board_size_distribution]
                5 = 1.0
                "#,
                out.display()
            ),
        );
        assert_eq!(run_args(&["deskgo", "selfplay", games_config.to_str().unwrap()]), 0);

        let heat_out = dir.path().join("heat");
        let heat_config = write_config(
            dir.path(),
            "heat.toml",
            &format!(
                "[run]\nout_dir = \"{}\"\n\n[heatmap]\nvictim = \"white\"\nmin_group = 1\nmin_interior = 0\n",
                heat_out.display()
            ),
        );
        let code = run_args(&[
            "deskgo",
            "heatmap",
            heat_config.to_str().unwrap(),
            "--sgf-dir",
            out.join("games").to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        assert!(heat_out.join("heatmap/cyclic.csv").exists());
        assert!(heat_out.join("heatmap/heatmap.svg").exists());
    }

    #[test]
    fn iterate_command_runs_and_resumes() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let body = format!(
            r#"
            [run]
            seed = 3
            out_dir = "{}"

            [agents]
            adversary = "fresh:cnn:1:4:5:2"
            victim = "fresh:cnn:1:4:5:1"

            [iterate]
            iterations = 1

            [attack]
            adversary_visits = 2
            games_per_round = 2
            train_steps_per_round = 1
            batch_size = 4
            max_rounds = 1
            move_limit_factor = 60.0

            [attack.curriculum]
            visit_schedule = [1, 2]
            high_visit_cutoff = 2
            window = 4

            [defend]
            selfplay_visits = 2
            victim_visits = 2
            adversary_visits = 2
            games_per_round = 2
            train_steps_per_round = 1
            batch_size = 4
            eval_games = 1
            max_rounds = 1
            "#,
            out.display()
        );
        let config = write_config(dir.path(), "iter.toml", &body);
        assert_eq!(run_args(&["deskgo", "iterate", config.to_str().unwrap()]), 0);
        assert!(out.join("lineage.json").exists());
        assert!(out.join("victim_001.ckpt").exists());
        assert!(out.join("adversary_001.ckpt").exists());

        // Resuming a finished run succeeds without redoing work.
        assert_eq!(
            run_args(&["deskgo", "iterate", config.to_str().unwrap(), "--resume"]),
            0
        );
    }

    #[test]
    fn missing_inputs_exit_2() {
        let dir = tempfile::tempdir().unwrap();
        // Missing config file.
        assert_eq!(run_args(&["deskgo", "match", "/no/such/config.toml"]), 2);
        // Unknown key.
        let bad = write_config(dir.path(), "bad.toml", "[run]\nbogus = 1\n");
        assert_eq!(run_args(&["deskgo", "match", bad.to_str().unwrap()]), 2);
        // Missing seed checkpoint for iterate.
        let missing = write_config(
            dir.path(),
            "missing.toml",
            "[agents]\nvictim = \"/no/such.ckpt\"\nadversary = \"uniform\"\n",
        );
        assert_eq!(run_args(&["deskgo", "iterate", missing.to_str().unwrap()]), 2);
        // Uniform agents cannot seed training.
        let uniform = write_config(dir.path(), "uniform.toml", "");
        assert_eq!(run_args(&["deskgo", "iterate", uniform.to_str().unwrap()]), 2);
        // Resume with no prior run.
        let fresh = write_config(
            dir.path(),
            "fresh.toml",
            &format!("[run]\nout_dir = \"{}\"\n", dir.path().join("empty").display()),
        );
        assert_eq!(
            run_args(&["deskgo", "iterate", fresh.to_str().unwrap(), "--resume"]),
            2
        );
        // Heatmap without any SGF directory.
        let no_dir = write_config(dir.path(), "nodir.toml", "");
        assert_eq!(run_args(&["deskgo", "heatmap", no_dir.to_str().unwrap()]), 2);
        // Elo needs a pool.
        let small = write_config(dir.path(), "small.toml", "[elo]\nagents = [\"uniform\"]\n");
        assert_eq!(run_args(&["deskgo", "elo", small.to_str().unwrap()]), 2);
    }

    #[test]
    fn error_kinds_map_to_the_documented_exit_codes() {
        assert_eq!(CliError::Usage("x".into()).exit_code(), 2);
        let io = CliError::Io(std::io::Error::new(std::io::ErrorKind::Other, "disk"));
        assert_eq!(io.exit_code(), 3);
        let from_config: CliError = ConfigError::Config("bad".into()).into();
        assert_eq!(from_config.exit_code(), 2);
        let from_config_io: CliError =
            ConfigError::Io(std::io::Error::new(std::io::ErrorKind::Other, "disk")).into();
        assert_eq!(from_config_io.exit_code(), 3);
        let from_gen: CliError = GenError::Config("bad".into()).into();
        assert_eq!(from_gen.exit_code(), 2);
        let from_eval: CliError = EvalError::Domain("bad".into()).into();
        assert_eq!(from_eval.exit_code(), 2);
    }

    #[test]
    fn gtp_engine_builds_from_config_and_plays() {
        let config = RunConfig::parse(
            "[agents]\na = \"fresh:cnn:1:4:5:4\"\n\n[gtp]\nvisits = 4\nboard_size = 5\n",
        )
        .unwrap();
        let mut engine = gtp_engine_from(&config).unwrap();
        let response = engine.handle_line("genmove b").unwrap();
        assert!(response.starts_with("= "));
        assert_eq!(engine.state().move_count(), 1);

        let bad = RunConfig::parse("[gtp]\nboard_size = 3\n").unwrap();
        assert!(matches!(gtp_engine_from(&bad), Err(CliError::Usage(_))));
    }
}

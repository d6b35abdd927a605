//! Run configuration: one TOML file per run, strict about unknown keys.
//!
//! A [`RunConfig`] collects every command's settings in named sections —
//! `[run]` and `[agents]` are shared, the rest belong to individual
//! subcommands and stay optional. Unknown keys anywhere are errors, so a
//! typo fails loudly instead of silently falling back to a default. Every
//! command that produces output writes the fully resolved configuration
//! next to its results as `resolved.toml`, making any output directory
//! self-describing and replayable.
//!
//! Agents are named by compact spec strings: `uniform` for the flat-prior
//! stub, `fresh:cnn:BLOCKS:CHANNELS:MAXBOARD:SEED` or
//! `fresh:vit:BLOCKS:EMBED:HEADS:MLP:PATCH:MAXBOARD:SEED` for freshly
//! initialized networks, and anything else is read as a checkpoint path.
//! Relative config paths that don't resolve from the working directory are
//! retried under `DESKGO_CONFIG_DIR` when that variable is set.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::agent::{Evaluator, NetEvaluator, UniformEvaluator};
use crate::curriculum::{AttackPlan, DefensePlan, IteratedConfig, IterationPlan};
use crate::nnet::{load_checkpoint, NetworkConfig, NetworkParameters};
use crate::rules::DEFAULT_KOMI;
use crate::selfplay::GenConfig;

/// Environment variable naming a directory to retry relative config paths
/// under.
pub const CONFIG_DIR_ENV: &str = "DESKGO_CONFIG_DIR";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    /// Anything wrong with the configuration itself: parse failures,
    /// unknown keys, bad agent specs, missing sections or checkpoints.
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

// ---------------------------------------------------------------------------
// Sections
// ---------------------------------------------------------------------------

/// Settings shared by every command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub out_dir: String,
    /// Worker threads for parallel matches; `None` uses every core.
    pub workers: Option<usize>,
    /// Games for the generation commands.
    pub games: usize,
    /// Feature-frame size for fresh nets and generated rows; `None` derives
    /// it from the agents in play.
    pub max_board: Option<usize>,
}

impl Default for RunSection {
    fn default() -> RunSection {
        RunSection {
            seed: 0,
            out_dir: "out".to_string(),
            workers: None,
            games: 4,
            max_board: None,
        }
    }
}

/// Agent spec strings by slot. Commands with adversary/victim roles prefer
/// the role keys and fall back to `a`/`b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentsSection {
    pub a: String,
    pub b: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adversary: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub victim: Option<String>,
}

impl Default for AgentsSection {
    fn default() -> AgentsSection {
        AgentsSection {
            a: "uniform".to_string(),
            b: "uniform".to_string(),
            adversary: None,
            victim: None,
        }
    }
}

impl AgentsSection {
    /// The adversary slot: `adversary` if set, else `a`.
    pub fn adversary_spec(&self) -> &str {
        self.adversary.as_deref().unwrap_or(&self.a)
    }

    /// The victim slot: `victim` if set, else `b`.
    pub fn victim_spec(&self) -> &str {
        self.victim.as_deref().unwrap_or(&self.b)
    }
}

/// `[iterate]`: how many attack/defense pairs to run on top of the
/// `[attack]` and `[defend]` plans.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IterateSection {
    pub iterations: u32,
}

impl Default for IterateSection {
    fn default() -> IterateSection {
        IterateSection { iterations: 1 }
    }
}

/// `[match]`: head-to-head settings; the run seed feeds the match schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchSection {
    pub games: usize,
    pub board_size: usize,
    pub komi: f64,
    pub visits_a: u32,
    pub visits_b: u32,
    pub alternate_colors: bool,
    pub move_limit_factor: f64,
}

impl Default for MatchSection {
    fn default() -> MatchSection {
        let config = crate::eval::MatchConfig::default();
        MatchSection {
            games: config.games,
            board_size: config.board_size,
            komi: config.komi,
            visits_a: config.visits_a,
            visits_b: config.visits_b,
            alternate_colors: config.alternate_colors,
            move_limit_factor: config.move_limit_factor,
        }
    }
}

impl MatchSection {
    pub fn to_match_config(&self, seed: u64) -> crate::eval::MatchConfig {
        crate::eval::MatchConfig {
            games: self.games,
            board_size: self.board_size,
            komi: self.komi,
            visits_a: self.visits_a,
            visits_b: self.visits_b,
            alternate_colors: self.alternate_colors,
            seed,
            move_limit_factor: self.move_limit_factor,
        }
    }
}

/// `[elo]`: a round-robin pool. `agents` and `visits` are parallel lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EloSection {
    pub agents: Vec<String>,
    pub visits: Vec<u32>,
    pub games_per_pair: usize,
    pub board_size: usize,
}

impl Default for EloSection {
    fn default() -> EloSection {
        EloSection {
            agents: Vec::new(),
            visits: Vec::new(),
            games_per_pair: 8,
            board_size: 5,
        }
    }
}

/// `[robustness]`: the victim-visit sweep against a fixed-budget adversary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobustnessSection {
    pub visit_grid: Vec<u32>,
    /// Adversary search budget, held fixed across the grid.
    pub opponent_visits: u32,
    pub games_per_point: usize,
    pub board_size: usize,
}

impl Default for RobustnessSection {
    fn default() -> RobustnessSection {
        RobustnessSection {
            visit_grid: vec![1, 2, 4, 8],
            opponent_visits: 4,
            games_per_point: 8,
            board_size: 5,
        }
    }
}

/// `[heatmap]`: cyclic-capture aggregation over a directory of SGF games.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatmapSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sgf_dir: Option<String>,
    /// Which color the victim played in the scanned games.
    pub victim: String,
    pub min_group: usize,
    pub min_interior: usize,
    /// A second SGF directory to difference against.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline_dir: Option<String>,
}

impl Default for HeatmapSection {
    fn default() -> HeatmapSection {
        HeatmapSection {
            sgf_dir: None,
            victim: "white".to_string(),
            min_group: 6,
            min_interior: 1,
            baseline_dir: None,
        }
    }
}

/// `[gtp]`: engine settings for the protocol server.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GtpSection {
    /// Agent spec; `None` plays with the `a` slot.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub agent: Option<String>,
    pub visits: u32,
    pub board_size: usize,
    pub komi: f64,
}

impl Default for GtpSection {
    fn default() -> GtpSection {
        GtpSection {
            agent: None,
            visits: 16,
            board_size: 9,
            komi: DEFAULT_KOMI,
        }
    }
}

// ---------------------------------------------------------------------------
// The whole file
// ---------------------------------------------------------------------------

/// A full run configuration. Only `[run]` and `[agents]` apply everywhere;
/// each command reads its own section and ignores the rest, so one file can
/// drive a whole experiment end to end.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub run: RunSection,
    pub agents: AgentsSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gen: Option<GenConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackPlan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub defend: Option<DefensePlan>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterate: Option<IterateSection>,
    #[serde(rename = "match", skip_serializing_if = "Option::is_none")]
    pub match_: Option<MatchSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elo: Option<EloSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub robustness: Option<RobustnessSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heatmap: Option<HeatmapSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gtp: Option<GtpSection>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Config(e.to_string()))
    }

    /// Reads a config file. A relative path that doesn't exist is retried
    /// under [`CONFIG_DIR_ENV`] before giving up.
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let resolved = resolve_config_path(path);
        let text = std::fs::read_to_string(&resolved).map_err(|e| {
            ConfigError::Config(format!("cannot read {}: {e}", resolved.display()))
        })?;
        RunConfig::parse(&text)
            .map_err(|e| ConfigError::Config(format!("{}: {e}", resolved.display())))
    }

    /// The output directory, created on first use.
    pub fn out_dir(&self) -> Result<PathBuf, ConfigError> {
        let dir = PathBuf::from(&self.run.out_dir);
        std::fs::create_dir_all(&dir)?;
        Ok(dir)
    }

    /// Writes the fully resolved config as `resolved.toml` in `dir`.
    pub fn save_resolved(&self, dir: &Path) -> Result<(), ConfigError> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| ConfigError::Config(format!("serialize: {e}")))?;
        std::fs::write(dir.join("resolved.toml"), text)?;
        Ok(())
    }

    /// The `[iterate]` command's settings assembled from three sections,
    /// with plan defaults where sections are absent.
    pub fn iterated_config(&self) -> IteratedConfig {
        IteratedConfig {
            plan: IterationPlan {
                attack: self.attack.clone().unwrap_or_default(),
                defend: self.defend.clone().unwrap_or_default(),
            },
            iterations: self.iterate.clone().unwrap_or_default().iterations,
        }
    }
}

fn resolve_config_path(path: &Path) -> PathBuf {
    if path.is_relative() && !path.exists() {
        if let Some(dir) = std::env::var_os(CONFIG_DIR_ENV) {
            let candidate = PathBuf::from(dir).join(path);
            if candidate.exists() {
                return candidate;
            }
        }
    }
    path.to_path_buf()
}

// ---------------------------------------------------------------------------
// Agent specs
// ---------------------------------------------------------------------------

/// A materialized agent: the evaluator to search with, plus the parameters
/// behind it when the spec named a network.
pub struct ParsedAgent {
    pub spec: String,
    pub params: Option<NetworkParameters>,
    pub evaluator: Box<dyn Evaluator + Sync>,
}

impl ParsedAgent {
    /// The network parameters, or a config error naming the slot for specs
    /// (like `uniform`) that don't have any.
    pub fn require_params(&self, slot: &str) -> Result<&NetworkParameters, ConfigError> {
        self.params.as_ref().ok_or_else(|| {
            ConfigError::Config(format!("agent `{}` for {slot} has no parameters", self.spec))
        })
    }
}

fn parse_fields<const N: usize>(spec: &str, parts: &[&str]) -> Result<[u64; N], ConfigError> {
    if parts.len() != N {
        return Err(ConfigError::Config(format!(
            "agent `{spec}`: expected {N} numeric fields, got {}",
            parts.len()
        )));
    }
    let mut out = [0u64; N];
    for (slot, raw) in out.iter_mut().zip(parts) {
        *slot = raw
            .parse()
            .map_err(|_| ConfigError::Config(format!("agent `{spec}`: bad number `{raw}`")))?;
    }
    Ok(out)
}

/// Materializes an agent spec string.
///
/// `uniform` needs no parameters; `fresh:...` initializes a network from
/// the architecture fields and seed; anything else is loaded as a
/// checkpoint path, with a missing file treated as a config error rather
/// than an I/O failure.
pub fn parse_agent(spec: &str) -> Result<ParsedAgent, ConfigError> {
    if spec == "uniform" {
        return Ok(ParsedAgent {
            spec: spec.to_string(),
            params: None,
            evaluator: Box::new(UniformEvaluator),
        });
    }
    let params = if let Some(rest) = spec.strip_prefix("fresh:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let (config, seed) = match parts.first().copied() {
            Some("cnn") => {
                let [blocks, channels, max_board, seed] = parse_fields(spec, &parts[1..])?;
                (
                    NetworkConfig::cnn(blocks as usize, channels as usize, max_board as usize),
                    seed,
                )
            }
            Some("vit") => {
                let [blocks, embed, heads, mlp, patch, max_board, seed] =
                    parse_fields(spec, &parts[1..])?;
                (
                    NetworkConfig::vit(
                        blocks as usize,
                        embed as usize,
                        heads as usize,
                        mlp as usize,
                        patch as usize,
                        max_board as usize,
                    ),
                    seed,
                )
            }
            _ => {
                return Err(ConfigError::Config(format!(
                    "agent `{spec}`: fresh backbone must be cnn or vit"
                )))
            }
        };
        config
            .validate()
            .map_err(|e| ConfigError::Config(format!("agent `{spec}`: {e}")))?;
        NetworkParameters::init(config, seed)
    } else {
        let path = Path::new(spec);
        if !path.exists() {
            return Err(ConfigError::Config(format!("checkpoint not found: {spec}")));
        }
        load_checkpoint(path).map_err(|e| ConfigError::Config(format!("checkpoint {spec}: {e}")))?
    };
    let evaluator = NetEvaluator::new(Arc::new(params.clone()));
    Ok(ParsedAgent {
        spec: spec.to_string(),
        params: Some(params),
        evaluator: Box::new(evaluator),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::save_checkpoint;
    use crate::rules::BoardState;
    use crate::selfplay::GenMode;

    #[test]
    fn empty_config_is_all_defaults() {
        let config = RunConfig::parse("").unwrap();
        assert_eq!(config, RunConfig::default());
        assert_eq!(config.run.games, 4);
        assert_eq!(config.agents.a, "uniform");
        assert!(config.gen.is_none());
    }

    #[test]
    fn sections_parse_and_round_trip() {
        let text = r#"
            [run]
            seed = 9
            out_dir = "results"

            [agents]
            a = "fresh:cnn:1:4:5:7"
            victim = "uniform"

            [gen]
            mode = "self_play"
            selfplay_visits = 8
            adversary_visits = 8
            victim_visits = 4
            move_limit_factor = 200.0
            move_limit_policy = "score_as_is"
            pass_alive_defense = false

            [gen.board_size_distribution]
            5 = 1.0

            [match]
            games = 10
            visits_a = 2

            [elo]
            agents = ["uniform", "uniform"]
            visits = [1, 2]

            [heatmap]
            victim = "black"
        "#;
        let config = RunConfig::parse(text).unwrap();
        assert_eq!(config.run.seed, 9);
        assert_eq!(config.agents.victim_spec(), "uniform");
        assert_eq!(config.agents.adversary_spec(), "fresh:cnn:1:4:5:7");
        let gen = config.gen.as_ref().unwrap();
        assert_eq!(gen.mode, GenMode::SelfPlay);
        assert_eq!(gen.board_size_distribution.get(&5), Some(&1.0));
        let m = config.match_.as_ref().unwrap();
        assert_eq!((m.games, m.visits_a, m.visits_b), (10, 2, 16));
        assert_eq!(m.to_match_config(9).seed, 9);

        let serialized = toml::to_string_pretty(&config).unwrap();
        let reparsed = RunConfig::parse(&serialized).unwrap();
        assert_eq!(reparsed, config);
    }

    #[test]
    fn unknown_keys_are_rejected_everywhere() {
        for text in [
            "[run]\nbogus = 1",
            "[agents]\nc = \"uniform\"",
            "[match]\ngames = 4\nvisit_a = 2",
            "[gtp]\nport = 5000",
            "top_level_stray = true",
        ] {
            let err = RunConfig::parse(text).unwrap_err();
            assert!(matches!(err, ConfigError::Config(_)), "{text} parsed");
        }
    }

    #[test]
    fn iterated_config_assembles_from_sections() {
        let text = "[iterate]\niterations = 3\n\n[attack]\nmax_rounds = 2\n";
        let config = RunConfig::parse(text).unwrap();
        let iterated = config.iterated_config();
        assert_eq!(iterated.iterations, 3);
        assert_eq!(iterated.plan.attack.max_rounds, 2);
        assert_eq!(iterated.plan.defend, DefensePlan::default());
    }

    #[test]
    fn agent_specs_materialize() {
        let uniform = parse_agent("uniform").unwrap();
        assert!(uniform.params.is_none());
        assert!(uniform.require_params("victim").is_err());

        let cnn = parse_agent("fresh:cnn:1:4:5:7").unwrap();
        let params = cnn.require_params("victim").unwrap();
        assert_eq!(params.config.max_board, 5);
        assert_eq!(
            cnn.evaluator.evaluate(&BoardState::new(5, DEFAULT_KOMI)).policy.len(),
            26
        );

        let vit = parse_agent("fresh:vit:1:8:2:16:3:9:1").unwrap();
        let params = vit.require_params("victim").unwrap();
        assert_eq!(params.config.heads, 2);
        assert_eq!(params.config.patch_size, 3);
    }

    #[test]
    fn bad_agent_specs_are_config_errors() {
        for spec in [
            "fresh:cnn:1:4:5",
            "fresh:cnn:1:4:5:7:9",
            "fresh:cnn:1:four:5:7",
            "fresh:mlp:1:4:5:7",
            "fresh:vit:1:7:2:16:3:9:1",
            "no/such/checkpoint.ckpt",
        ] {
            assert!(
                matches!(parse_agent(spec), Err(ConfigError::Config(_))),
                "{spec} parsed"
            );
        }
    }

    #[test]
    fn checkpoint_specs_load_saved_parameters() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        let params = NetworkParameters::init(NetworkConfig::cnn(1, 4, 5), 3);
        save_checkpoint(&params, &path).unwrap();
        let agent = parse_agent(path.to_str().unwrap()).unwrap();
        assert_eq!(agent.params.as_ref(), Some(&params));
    }

    #[test]
    fn resolved_config_is_reparseable() {
        let dir = tempfile::tempdir().unwrap();
        let config = RunConfig {
            gen: Some(GenConfig {
                mode: GenMode::Mixed { adversary_fraction: 0.25 },
                ..GenConfig::default()
            }),
            robustness: Some(RobustnessSection::default()),
            ..RunConfig::default()
        };
        config.save_resolved(dir.path()).unwrap();
        let reloaded = RunConfig::load(&dir.path().join("resolved.toml")).unwrap();
        assert_eq!(reloaded, config);
    }

    #[test]
    fn relative_paths_fall_back_to_the_config_dir() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("fallback.toml"), "[run]\nseed = 4\n").unwrap();
        std::env::set_var(CONFIG_DIR_ENV, dir.path());
        let config = RunConfig::load(Path::new("fallback.toml")).unwrap();
        std::env::remove_var(CONFIG_DIR_ENV);
        assert_eq!(config.run.seed, 4);

        let missing = RunConfig::load(Path::new("fallback.toml"));
        assert!(matches!(missing, Err(ConfigError::Config(_))));
    }
}

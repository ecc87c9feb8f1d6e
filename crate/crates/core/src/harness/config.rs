//! Experiment configuration files.
//!
//! A config is TOML. Paths are relative to the config file.
//!
//! ```toml
//! name = "maze5"
//! output = "../../runs/maze5"
//! seeds = [0, 1, 2, 3, 4]
//!
//! [env]
//! kind = "maze"            # maze | multimaze | letterenv | deliver | paintworld | chain
//! map = "../maps/maze5.map"
//! horizon = 30
//!
//! [machines]
//! pdrm = "../machines/maze.pdrm"
//!
//! [hyperparams]            # shared defaults, overridable per agent
//! episodes = 20000
//!
//! [[agent]]
//! name = "top-1"
//! algorithm = "q_learning" # q_learning | hierarchical
//! monitor = "pdrm"         # pdrm | cra | translated_cra | path_cra
//! abstraction = "top-1"    # full | top-<k>
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::cra::{translate_cra_to_pdrm, Cra};
use crate::env::{
    ChainMdp, DeliverConfig, DeliverWorld, EnvError, GridMap, LabeledMdp, LetterEnv, LetterEnvConfig, PaintWorld,
    TreasureMaze,
};
use crate::learn::Hyperparams;
use crate::pdrm::Pdrm;
use crate::product::AbstractionSpec;

use super::HarnessError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum EnvSpec {
    Maze {
        map: String,
        horizon: usize,
        #[serde(default = "one")]
        treasures: usize,
    },
    Multimaze {
        map: String,
        horizon: usize,
        treasures: usize,
    },
    Letterenv {
        map: Option<String>,
        horizon: usize,
    },
    Deliver {
        map: String,
        horizon: usize,
        n_types: usize,
        n_sequences: usize,
        train_sequences: Vec<usize>,
        eval_sequences: Vec<usize>,
    },
    Paintworld {},
    Chain {
        length: usize,
        horizon: usize,
    },
}

fn one() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    QLearning,
    Hierarchical,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MonitorKind {
    Pdrm,
    Cra,
    TranslatedCra,
    PathCra,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAgent {
    name: toml::Spanned<String>,
    algorithm: Algorithm,
    #[serde(default = "default_monitor")]
    monitor: MonitorKind,
    #[serde(default = "default_abstraction")]
    abstraction: toml::Spanned<String>,
    #[serde(default = "one")]
    option_k: usize,
    op_budget: Option<u64>,
    #[serde(default)]
    hyperparams: toml::Table,
}

fn default_monitor() -> MonitorKind {
    MonitorKind::Pdrm
}

fn default_abstraction() -> toml::Spanned<String> {
    toml::Spanned::new(0..0, "full".to_string())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMachines {
    pdrm: Option<String>,
    cra: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotSpec {
    pub title: Option<String>,
    pub x_label: Option<String>,
    pub y_label: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: String,
    output: String,
    seeds: toml::Spanned<Vec<u64>>,
    env: EnvSpec,
    #[serde(default)]
    machines: RawMachines,
    #[serde(default)]
    hyperparams: toml::Table,
    agent: Vec<RawAgent>,
    #[serde(default)]
    plot: PlotSpec,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentSpec {
    pub name: String,
    pub algorithm: Algorithm,
    pub monitor: MonitorKind,
    pub abstraction: AbstractionSpec,
    pub option_k: usize,
    pub op_budget: Option<u64>,
    /// Seed is replaced per run.
    pub hyperparams: Hyperparams,
}

/// A parsed config with every asset loaded and validated.
#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub name: String,
    pub path: PathBuf,
    pub output_dir: PathBuf,
    pub seeds: Vec<u64>,
    pub env: EnvSpec,
    /// Map file contents, when the environment uses one.
    pub map_text: Option<String>,
    pub pdrm: Option<Pdrm>,
    pub cra: Option<Cra>,
    pub translated: Option<Pdrm>,
    pub agents: Vec<AgentSpec>,
    pub plot: PlotSpec,
    /// Hex SHA-256 of the canonicalized config and asset contents.
    pub hash: String,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, col)
}

fn parse_abstraction(s: &str) -> Option<AbstractionSpec> {
    if s == "full" {
        return Some(AbstractionSpec::Full);
    }
    s.strip_prefix("top-")?.parse().ok().map(AbstractionSpec::TopK)
}

fn merge_hyperparams(base: &toml::Table, over: &toml::Table) -> Result<Hyperparams, toml::de::Error> {
    let mut table = base.clone();
    for (k, v) in over {
        table.insert(k.clone(), v.clone());
    }
    toml::Value::Table(table).try_into()
}

fn asset_err(asset: &Path, message: impl ToString) -> HarnessError {
    HarnessError::Asset {
        asset: asset.display().to_string(),
        message: message.to_string(),
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<ExperimentConfig, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_text(&text, path)
    }

    /// Parses `text` as if it were read from `path`.
    pub fn from_text(text: &str, path: &Path) -> Result<ExperimentConfig, HarnessError> {
        let parse_error = |offset: Option<usize>, message: String| {
            let (line, column) = offset.map_or((0, 0), |o| line_col(text, o));
            HarnessError::Parse {
                path: path.display().to_string(),
                line,
                column,
                message,
            }
        };
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let offset = e.span().map(|s| s.start);
            parse_error(offset, e.message().to_string())
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &str| base.join(p);

        if raw.seeds.get_ref().is_empty() {
            return Err(parse_error(Some(raw.seeds.span().start), "seeds must be non-empty".into()));
        }
        if raw.agent.is_empty() {
            return Err(parse_error(None, "at least one [[agent]] is required".into()));
        }

        let mut names = BTreeSet::new();
        let mut agents = Vec::new();
        for a in &raw.agent {
            let name = a.name.get_ref().clone();
            if !names.insert(name.clone()) {
                return Err(parse_error(Some(a.name.span().start), format!("duplicate agent name `{name}`")));
            }
            if name.is_empty() || name.contains(['/', '\\']) || name.starts_with('.') {
                return Err(parse_error(Some(a.name.span().start), format!("bad agent name `{name}`")));
            }
            let abstraction = parse_abstraction(a.abstraction.get_ref()).ok_or_else(|| {
                parse_error(
                    Some(a.abstraction.span().start),
                    format!("abstraction must be `full` or `top-<k>`, got `{}`", a.abstraction.get_ref()),
                )
            })?;
            let hyperparams = merge_hyperparams(&raw.hyperparams, &a.hyperparams)
                .map_err(|e| parse_error(Some(a.name.span().start), format!("agent `{name}`: {}", e.message())))?;
            hyperparams
                .validate()
                .map_err(|e| parse_error(Some(a.name.span().start), format!("agent `{name}`: {e}")))?;
            if a.algorithm == Algorithm::Hierarchical && a.monitor != MonitorKind::Pdrm {
                return Err(parse_error(
                    Some(a.name.span().start),
                    format!("agent `{name}`: hierarchical agents need a pdrm monitor"),
                ));
            }
            agents.push(AgentSpec {
                name,
                algorithm: a.algorithm,
                monitor: a.monitor,
                abstraction,
                option_k: a.option_k,
                op_budget: a.op_budget,
                hyperparams,
            });
        }

        let mut env = raw.env.clone();
        let map_path = match &mut env {
            EnvSpec::Maze { map, .. } | EnvSpec::Multimaze { map, .. } | EnvSpec::Deliver { map, .. } => {
                Some(resolve(map))
            }
            EnvSpec::Letterenv { map: Some(map), .. } => Some(resolve(map)),
            _ => None,
        };
        let map_text = match &map_path {
            Some(p) => Some(std::fs::read_to_string(p).map_err(|e| asset_err(p, e))?),
            None => None,
        };

        let load_pdrm = |p: &str| -> Result<Pdrm, HarnessError> {
            let p = resolve(p);
            let text = std::fs::read_to_string(&p).map_err(|e| asset_err(&p, e))?;
            Pdrm::from_text(&text).map_err(|e| asset_err(&p, e))
        };
        let pdrm = raw.machines.pdrm.as_deref().map(load_pdrm).transpose()?;
        let cra = match raw.machines.cra.as_deref() {
            Some(c) => {
                let p = resolve(c);
                let text = std::fs::read_to_string(&p).map_err(|e| asset_err(&p, e))?;
                Some(Cra::from_text(&text).map_err(|e| asset_err(&p, e))?)
            }
            None => None,
        };
        let translated = match &cra {
            Some(c) if agents.iter().any(|a| a.monitor == MonitorKind::TranslatedCra) => {
                let p = resolve(raw.machines.cra.as_deref().unwrap());
                Some(translate_cra_to_pdrm(c).map_err(|e| asset_err(&p, e))?)
            }
            _ => None,
        };
        for a in &agents {
            let missing = match a.monitor {
                MonitorKind::Pdrm => pdrm.is_none().then_some("machines.pdrm"),
                MonitorKind::Cra | MonitorKind::TranslatedCra => cra.is_none().then_some("machines.cra"),
                MonitorKind::PathCra => None,
            };
            if let Some(key) = missing {
                return Err(parse_error(None, format!("agent `{}` needs `{key}`", a.name)));
            }
        }

        let cfg = ExperimentConfig {
            name: raw.name,
            path: path.to_path_buf(),
            output_dir: resolve(&raw.output),
            seeds: raw.seeds.into_inner(),
            env,
            map_text,
            pdrm,
            cra,
            translated,
            agents,
            plot: raw.plot,
            hash: String::new(),
        };
        // building the environment checks map contents and reachability
        cfg.build_env().map_err(|e| match &map_path {
            Some(p) => asset_err(p, e),
            None => parse_error(None, e.to_string()),
        })?;
        let hash = cfg.compute_hash();
        Ok(ExperimentConfig { hash, ..cfg })
    }

    pub fn build_env(&self) -> Result<Box<dyn LabeledMdp>, EnvError> {
        let map = || GridMap::parse(self.map_text.as_deref().unwrap_or_default());
        Ok(match &self.env {
            EnvSpec::Maze { horizon, treasures, .. } => Box::new(TreasureMaze::new(map()?, *treasures, false, *horizon)?),
            EnvSpec::Multimaze { horizon, treasures, .. } => {
                Box::new(TreasureMaze::new(map()?, *treasures, true, *horizon)?)
            }
            EnvSpec::Letterenv { map: None, horizon } => Box::new(LetterEnv::new(&LetterEnvConfig {
                horizon: *horizon,
                ..LetterEnvConfig::default()
            })?),
            EnvSpec::Letterenv { map: Some(_), horizon } => Box::new(LetterEnv::from_map(map()?, *horizon)?),
            EnvSpec::Deliver {
                horizon,
                n_types,
                n_sequences,
                train_sequences,
                eval_sequences,
                ..
            } => Box::new(DeliverWorld::new(DeliverConfig {
                map: map()?,
                n_types: *n_types,
                n_sequences: *n_sequences,
                train_sequences: train_sequences.clone(),
                eval_sequences: eval_sequences.clone(),
                horizon: *horizon,
            })?),
            EnvSpec::Paintworld {} => Box::new(PaintWorld::new()),
            EnvSpec::Chain { length, horizon } => Box::new(ChainMdp::new(*length, *horizon)),
        })
    }

    pub fn agent(&self, name: &str) -> Option<&AgentSpec> {
        self.agents.iter().find(|a| a.name == name)
    }

    /// Hash over everything that affects results: environment parameters,
    /// asset contents, seeds and agent settings. Output location and file
    /// names are left out.
    fn compute_hash(&self) -> String {
        let mut env = serde_json::to_value(&self.env).expect("env spec serializes");
        if let Some(obj) = env.as_object_mut() {
            obj.remove("map");
        }
        let agents: Vec<_> = self
            .agents
            .iter()
            .map(|a| {
                json!({
                    "name": a.name,
                    "algorithm": a.algorithm,
                    "monitor": a.monitor,
                    "abstraction": a.abstraction.to_string(),
                    "option_k": a.option_k,
                    "op_budget": a.op_budget,
                    "hyperparams": a.hyperparams,
                })
            })
            .collect();
        let canonical = json!({
            "name": self.name,
            "seeds": self.seeds,
            "env": env,
            "map": self.map_text,
            "pdrm": self.pdrm.as_ref().map(Pdrm::to_text),
            "cra": self.cra.as_ref().map(Cra::to_text),
            "agents": agents,
        });
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

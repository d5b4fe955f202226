//! Scenario files: TOML with a header, an actor table and an ordered step list.
//!
//! ```toml
//! seed = 7
//! hops = 2               # provenance depth for deposit screening
//! delay_blocks = 0       # standby before a deposit's status is published
//! graph = "graph.txt"    # optional, relative to the scenario file
//! sanctions = "sanctions.txt"
//! sanctioned = ["0xdead"]  # inline additions to the sanctions list
//! treasury = "carol"     # actor whose key receives remediated funds
//!
//! [[actors]]
//! name = "alice"
//! address = "0xa11ce"    # defaults to the name
//! funds = 100            # external balance at genesis
//!
//! [[steps]]
//! label = "d1"
//! action = "deposit"
//! actor = "alice"
//! amount = 60
//! ```
//!
//! Actions: `deposit {actor, amount}`, `transfer {actor, to, amount}`,
//! `withdraw {actor, amount, to?}`, `flag {depositor}`,
//! `onboard {actor, to, amount}` (creates actor `to` from an invite),
//! `burn {actor, treasury?}`, `advance_block {blocks?}` and
//! `assert {ref?, outcome?, actor?, balance?, conserved?, audit?}`.
//! Outcomes are `ok` or the error kind, e.g. `TaintedLineage`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use shieldpool_protocol::authority::{ParseError, SanctionsList, TxGraph};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("scenario syntax: {0}")]
    Syntax(String),
    #[error("step {index} ({label}): {message}")]
    Step { index: usize, label: String, message: String },
    #[error("{file}: {source}")]
    Data { file: String, source: ParseError },
    #[error("scenario: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Actor {
    pub name: String,
    pub address: Option<String>,
    #[serde(default)]
    pub funds: u64,
}

impl Actor {
    pub fn address(&self) -> &str {
        self.address.as_deref().unwrap_or(&self.name)
    }
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    Deposit {
        actor: String,
        amount: u64,
    },
    Transfer {
        actor: String,
        to: String,
        amount: u64,
    },
    Withdraw {
        actor: String,
        amount: u64,
        to: Option<String>,
    },
    Flag {
        depositor: String,
    },
    Onboard {
        actor: String,
        to: String,
        amount: u64,
    },
    Burn {
        actor: String,
        #[serde(default)]
        treasury: bool,
    },
    AdvanceBlock {
        #[serde(default = "one")]
        blocks: u64,
    },
    Assert {
        #[serde(rename = "ref")]
        step: Option<String>,
        outcome: Option<String>,
        actor: Option<String>,
        balance: Option<u64>,
        #[serde(default)]
        conserved: bool,
        #[serde(default)]
        audit: bool,
    },
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Deposit { .. } => "deposit",
            Action::Transfer { .. } => "transfer",
            Action::Withdraw { .. } => "withdraw",
            Action::Flag { .. } => "flag",
            Action::Onboard { .. } => "onboard",
            Action::Burn { .. } => "burn",
            Action::AdvanceBlock { .. } => "advance_block",
            Action::Assert { .. } => "assert",
        }
    }

    /// Actor names this step requires to exist beforehand.
    fn actors(&self) -> Vec<&str> {
        match self {
            Action::Deposit { actor, .. } | Action::Withdraw { actor, .. } | Action::Burn { actor, .. } => vec![actor],
            Action::Transfer { actor, to, .. } => vec![actor, to],
            Action::Flag { depositor } => vec![depositor],
            Action::Onboard { actor, .. } => vec![actor],
            Action::Assert { actor, .. } => actor.iter().map(String::as_str).collect(),
            Action::AdvanceBlock { .. } => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub label: String,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub hops: usize,
    pub delay_blocks: u64,
    pub graph: TxGraph,
    pub sanctions: SanctionsList,
    pub treasury: Option<String>,
    pub actors: Vec<Actor>,
    pub steps: Vec<Step>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    seed: u64,
    #[serde(default = "default_hops")]
    hops: usize,
    #[serde(default)]
    delay_blocks: u64,
    graph: Option<String>,
    sanctions: Option<String>,
    #[serde(default)]
    sanctioned: Vec<String>,
    treasury: Option<String>,
    #[serde(default)]
    actors: Vec<Actor>,
    #[serde(default)]
    steps: Vec<toml::Table>,
}

fn default_hops() -> usize {
    2
}

fn read(path: &Path) -> Result<String, ScenarioError> {
    std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let base = path.parent().unwrap_or(Path::new("."));
        Scenario::parse(&read(path)?, base)
    }

    /// Parses scenario text; data files resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Scenario, ScenarioError> {
        let raw: Raw = toml::from_str(text).map_err(|e| ScenarioError::Syntax(e.message().to_string()))?;

        let graph = match &raw.graph {
            Some(f) => TxGraph::parse(&read(&base.join(f))?).map_err(|source| ScenarioError::Data {
                file: f.clone(),
                source,
            })?,
            None => TxGraph::new(),
        };
        let mut listed: Vec<String> = match &raw.sanctions {
            Some(f) => SanctionsList::parse(&read(&base.join(f))?, f)
                .map_err(|source| ScenarioError::Data {
                    file: f.clone(),
                    source,
                })?
                .iter()
                .map(str::to_string)
                .collect(),
            None => vec![],
        };
        listed.extend(raw.sanctioned.iter().cloned());
        let source = raw.sanctions.clone().unwrap_or_else(|| "inline".into());
        let sanctions = SanctionsList::from_addresses(listed.iter().map(String::as_str), &source);

        let mut names = BTreeSet::new();
        for a in &raw.actors {
            if !names.insert(a.name.clone()) {
                return Err(ScenarioError::Invalid(format!("duplicate actor {}", a.name)));
            }
        }
        if let Some(t) = &raw.treasury {
            if !names.contains(t) {
                return Err(ScenarioError::Invalid(format!("treasury {t} is not an actor")));
            }
        }

        let mut steps = Vec::with_capacity(raw.steps.len());
        let mut labels = BTreeSet::new();
        for (i, mut table) in raw.steps.into_iter().enumerate() {
            let index = i + 1;
            let label = match table.remove("label") {
                Some(toml::Value::String(s)) => s,
                Some(_) => return Err(step_err(index, "?", "label must be a string")),
                None => format!("#{index}"),
            };
            let action = Action::deserialize(toml::Value::Table(table))
                .map_err(|e| step_err(index, &label, e.message()))?;
            for name in action.actors() {
                if !names.contains(name) {
                    return Err(step_err(index, &label, &format!("unknown actor {name}")));
                }
            }
            if let Action::Onboard { to, .. } = &action {
                if !names.insert(to.clone()) {
                    return Err(step_err(index, &label, &format!("actor {to} already exists")));
                }
            }
            if let Action::Assert { step: Some(r), .. } = &action {
                if !labels.contains(r) {
                    return Err(step_err(index, &label, &format!("reference to unknown or later step {r}")));
                }
            }
            if !labels.insert(label.clone()) {
                return Err(step_err(index, &label, "duplicate label"));
            }
            steps.push(Step { label, action });
        }

        Ok(Scenario {
            seed: raw.seed,
            hops: raw.hops,
            delay_blocks: raw.delay_blocks,
            graph,
            sanctions,
            treasury: raw.treasury,
            actors: raw.actors,
            steps,
        })
    }
}

fn step_err(index: usize, label: &str, message: &str) -> ScenarioError {
    ScenarioError::Step {
        index,
        label: label.to_string(),
        message: message.to_string(),
    }
}

//! Executes a scenario against a fresh ledger and collects per-step metrics.

use std::collections::BTreeMap;
use std::fmt::Debug;

use serde::Serialize;

use shieldpool_core::bloom::fp_rate;
use shieldpool_core::crypto::sha256;
use shieldpool_protocol::authority::{AuditReport, Authority, AuthorityError, Direction, FlagTarget, Policy};
use shieldpool_protocol::ledger::{Ledger, LedgerConfig};
use shieldpool_protocol::wallet::{BurnTarget, Wallet, WalletError};

use crate::scenario::{Action, Scenario, Step};
use crate::shadow::Shadow;

/// Per-actor seed derived from the scenario seed.
pub fn derive_seed(seed: u64, role: &str) -> u64 {
    let d = sha256(&[&seed.to_be_bytes(), role.as_bytes()]);
    u64::from_be_bytes(d[..8].try_into().expect("8"))
}

/// Leading identifier of a `Debug` rendering, e.g. `TaintedLineage`.
fn variant(e: &impl Debug) -> String {
    format!("{e:?}").chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect()
}

pub fn wallet_error_kind(e: &WalletError) -> String {
    match e {
        WalletError::Ledger(l) => variant(l),
        WalletError::Proof(p) => variant(p),
        other => variant(other),
    }
}

fn authority_error_kind(e: &AuthorityError) -> String {
    match e {
        AuthorityError::Ledger(l) => variant(l),
        other => variant(other),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub index: usize,
    pub label: String,
    pub action: String,
    pub outcome: String,
    pub block: u64,
    pub pool: u128,
    pub shadow_pool: i128,
    pub delta: i128,
    pub flagged: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actor_balance: Option<u64>,
    /// Largest chain-state popcount among the actor's unspent notes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain_popcount: Option<u32>,
    /// Analytic false-positive rate at that chain state's estimated size.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain_fp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActorSummary {
    pub name: String,
    pub address: String,
    pub balance: u64,
    pub external: u128,
    /// `|N_n|` backward from the address for n = 0..=hops, when in the graph.
    pub neighborhood: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub seed: u64,
    pub steps: usize,
    pub failures: usize,
    pub pool: u128,
    pub shadow: Shadow,
    pub delta: i128,
    pub flagged: usize,
    pub events: usize,
    pub state_hash: String,
    pub audit_consistent: bool,
    pub actors: Vec<ActorSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub records: Vec<StepRecord>,
    pub failures: Vec<String>,
    pub summary: Summary,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub struct Runner {
    seed: u64,
    hops: usize,
    pub ledger: Ledger,
    pub authority: Authority,
    pub wallets: BTreeMap<String, Wallet>,
    pub shadow: Shadow,
    outcomes: BTreeMap<String, String>,
    records: Vec<StepRecord>,
    failures: Vec<String>,
}

impl Runner {
    pub fn new(s: &Scenario) -> Runner {
        let policy = Policy {
            sanctions: s.sanctions.clone(),
            graph: s.graph.clone(),
            hops: s.hops,
            delay_blocks: s.delay_blocks,
        };
        let mut authority = Authority::new(derive_seed(s.seed, "authority"), policy);
        let base = LedgerConfig::default();
        let mut wallets: BTreeMap<String, Wallet> = s
            .actors
            .iter()
            .map(|a| (a.name.clone(), Wallet::from_seed(derive_seed(s.seed, &a.name), a.address(), base.bloom)))
            .collect();
        let treasury_pk = s.treasury.as_ref().map(|t| wallets[t].spend_keys().pk);
        let mut ledger = Ledger::new(LedgerConfig {
            authority: Some(authority.account()),
            treasury_pk,
            ..base
        })
        .expect("default tree height is valid");
        ledger.set_hook(authority.hook());
        authority.register(&mut ledger).expect("fresh ledger accepts the authority");
        for a in &s.actors {
            let w = wallets.get_mut(&a.name).expect("created above");
            w.register(&mut ledger).expect("actor names are unique");
            ledger.fund_external(a.address(), a.funds as u128);
        }
        Runner {
            seed: s.seed,
            hops: s.hops,
            ledger,
            authority,
            wallets,
            shadow: Shadow::default(),
            outcomes: BTreeMap::new(),
            records: Vec::new(),
            failures: Vec::new(),
        }
    }

    fn wallet_op(&mut self, actor: &str, f: impl FnOnce(&mut Wallet, &mut Ledger, &mut Authority) -> Result<(), WalletError>) -> String {
        let mut w = self.wallets.remove(actor).expect("actors validated at parse time");
        let r = f(&mut w, &mut self.ledger, &mut self.authority);
        self.wallets.insert(actor.to_string(), w);
        match r {
            Ok(()) => {
                self.shadow.observe_last(&self.ledger);
                "ok".into()
            }
            Err(e) => wallet_error_kind(&e),
        }
    }

    fn execute(&mut self, index: usize, step: &Step) -> (String, Option<String>) {
        match &step.action {
            Action::Deposit { actor, amount } => {
                let amount = *amount;
                (self.wallet_op(actor, |w, l, a| w.deposit_flow(l, Some(a), amount).map(drop)), None)
            }
            Action::Transfer { actor, to, amount } => {
                let r = self.wallets[to].recipient();
                let amount = *amount;
                (self.wallet_op(actor, |w, l, _| w.transfer(l, &r, amount).map(drop)), None)
            }
            Action::Withdraw { actor, amount, to } => {
                let dest = to.clone().unwrap_or_else(|| self.wallets[actor].address().to_string());
                let amount = *amount;
                (self.wallet_op(actor, |w, l, _| w.withdraw(l, amount, &dest).map(drop)), None)
            }
            Action::Flag { depositor } => {
                let addr = self.wallets[depositor].address().to_string();
                match self.authority.flag_deposit(&mut self.ledger, &FlagTarget::Depositor(addr)) {
                    Ok(true) => ("ok".into(), None),
                    Ok(false) => ("AlreadyFlagged".into(), None),
                    Err(e) => (authority_error_kind(&e), None),
                }
            }
            Action::Onboard { actor, to, amount } => {
                let amount = *amount;
                let mut link = None;
                let out = self.wallet_op(actor, |w, l, _| {
                    link = Some(w.onboard_invite(l, amount)?);
                    Ok(())
                });
                let Some(link) = link else { return (out, None) };
                let seed = derive_seed(self.seed, to);
                match Wallet::redeem_invite(&link.encode(), &mut self.ledger, seed, to) {
                    Ok(w) => {
                        self.wallets.insert(to.clone(), w);
                        ("ok".into(), Some(format!("{to} redeemed {amount}")))
                    }
                    Err(e) => {
                        // keep later steps naming this actor runnable
                        let params = self.ledger.config().bloom;
                        self.wallets.insert(to.clone(), Wallet::from_seed(seed, to, params));
                        (wallet_error_kind(&e), None)
                    }
                }
            }
            Action::Burn { actor, treasury } => {
                let target = if *treasury { BurnTarget::Treasury } else { BurnTarget::Burn };
                let mut burned = 0u64;
                let out = self.wallet_op(actor, |w, l, _| {
                    w.scan(l);
                    let notes = w.remediable_notes(l);
                    if notes.is_empty() {
                        return Ok(());
                    }
                    for n in notes {
                        w.burn_illicit(l, n.leaf_index, target)?;
                        burned += n.amount();
                    }
                    Ok(())
                });
                (out, Some(format!("remediated {burned}")))
            }
            Action::AdvanceBlock { blocks } => {
                for _ in 0..*blocks {
                    self.ledger.advance_block();
                }
                ("ok".into(), None)
            }
            Action::Assert {
                step: reference,
                outcome,
                actor,
                balance,
                conserved,
                audit,
            } => {
                let mut problems = Vec::new();
                if let Some(r) = reference {
                    let got = &self.outcomes[r];
                    let want = outcome.as_deref().unwrap_or("ok");
                    if got != want {
                        problems.push(format!("step {r} outcome {got}, expected {want}"));
                    }
                }
                if let (Some(a), Some(b)) = (actor, balance) {
                    let got = self.wallets[a].balance();
                    if got != *b {
                        problems.push(format!("{a} balance {got}, expected {b}"));
                    }
                }
                if *conserved && self.shadow.delta(&self.ledger) != 0 {
                    problems.push(format!("pool off by {}", self.shadow.delta(&self.ledger)));
                }
                if *audit && !self.authority.audit(&self.ledger).is_consistent() {
                    problems.push("authority records disagree with the registry".into());
                }
                if problems.is_empty() {
                    ("pass".into(), None)
                } else {
                    let msg = problems.join("; ");
                    self.failures.push(format!("step {index} ({}): {msg}", step.label));
                    ("FAIL".into(), Some(msg))
                }
            }
        }
    }

    fn record(&mut self, index: usize, step: &Step, outcome: String, detail: Option<String>) {
        let params = self.ledger.config().bloom;
        let actor = match &step.action {
            Action::Deposit { actor, .. }
            | Action::Transfer { actor, .. }
            | Action::Withdraw { actor, .. }
            | Action::Onboard { actor, .. }
            | Action::Burn { actor, .. } => Some(actor.clone()),
            Action::Assert { actor, .. } => actor.clone(),
            _ => None,
        };
        let (actor_balance, chain_popcount, chain_fp) = match actor.and_then(|a| self.wallets.get(&a)) {
            Some(w) => {
                let widest = w.unspent().max_by_key(|n| n.utxo.chain_state.popcount());
                (
                    Some(w.balance()),
                    widest.map(|n| n.utxo.chain_state.popcount()),
                    widest.map(|n| fp_rate(n.utxo.chain_state.estimated_count(), &params)),
                )
            }
            None => (None, None, None),
        };
        self.records.push(StepRecord {
            index,
            label: step.label.clone(),
            action: step.action.name().into(),
            outcome: outcome.clone(),
            block: self.ledger.block_height(),
            pool: self.ledger.pool_balance(),
            shadow_pool: self.shadow.pool,
            delta: self.shadow.delta(&self.ledger),
            flagged: self.ledger.flagged().len(),
            actor_balance,
            chain_popcount,
            chain_fp,
            detail,
        });
        self.outcomes.insert(step.label.clone(), outcome);
    }

    pub fn step(&mut self, index: usize, step: &Step) {
        let (outcome, detail) = self.execute(index, step);
        for w in self.wallets.values_mut() {
            w.scan(&self.ledger);
        }
        self.record(index, step, outcome, detail);
    }

    pub fn audit(&self) -> AuditReport {
        self.authority.audit(&self.ledger)
    }

    pub fn finish(self) -> Report {
        let graph = self.authority.db().policy.graph.clone();
        let actors = self
            .wallets
            .iter()
            .map(|(name, w)| ActorSummary {
                name: name.clone(),
                address: w.address().to_string(),
                balance: w.balance(),
                external: self.ledger.external_balance(w.address()),
                neighborhood: graph
                    .hop_stats(w.address(), self.hops, Direction::Backward)
                    .map(|h| h.iter().map(|s| s.size).collect())
                    .unwrap_or_default(),
            })
            .collect();
        let summary = Summary {
            seed: self.seed,
            steps: self.records.len(),
            failures: self.failures.len(),
            pool: self.ledger.pool_balance(),
            shadow: self.shadow.clone(),
            delta: self.shadow.delta(&self.ledger),
            flagged: self.ledger.flagged().len(),
            events: self.ledger.events().len(),
            state_hash: hex(&self.ledger.state_hash()),
            audit_consistent: self.authority.audit(&self.ledger).is_consistent(),
            actors,
        };
        Report {
            records: self.records,
            failures: self.failures,
            summary,
        }
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs every step in order. Assertion failures are collected, not fatal.
pub fn run_scenario(s: &Scenario) -> Report {
    let mut r = Runner::new(s);
    for (i, step) in s.steps.iter().enumerate() {
        r.step(i + 1, step);
    }
    r.finish()
}

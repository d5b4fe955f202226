//! Deterministic in-process chain: mixer, flag registry, user registry,
//! blob store and event log behind a relayer entry point.

mod events;
mod ops;
mod snapshot;

pub use events::{Event, EventData, EventKind};
pub use ops::{AccountId, Call, Nonce, UserOp, NONCE_KEY_LEN};
pub use snapshot::SnapshotError;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use shieldpool_core::bloom::{encode_single, BloomParams};
use shieldpool_core::crypto::{sha256, EncPublicKey};
use shieldpool_core::merkle::{AppendTree, TreeError, DEFAULT_HEIGHT};
use shieldpool_core::smt::SparseTree;
use shieldpool_core::statements::{
    poi_leaf, smt_key, JoinSplitPublic, PoiStatus, Proof, ProofBackend, Statement, StatementId, TransparentBackend,
};
use shieldpool_core::utxo::{validate_joinsplit, Commitment, JoinSplitTx, Nullifier, Violation};
use shieldpool_core::FieldElement;

const BURN_DOMAIN: &[u8] = b"shieldpool/burn";

/// Spend key nobody holds a secret for: sha256 of a fixed label.
pub fn burn_public_key() -> FieldElement {
    FieldElement::from_be_bytes_reduced(&sha256(&[BURN_DOMAIN]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerConfig {
    pub tree_height: usize,
    pub bloom: BloomParams,
    pub epoch_blocks: u64,
    pub step_budget: u64,
    /// Account allowed to answer bootstraps and flag deposits.
    pub authority: Option<AccountId>,
    /// Spend key of the treasury account receiving seized funds.
    pub treasury_pk: Option<FieldElement>,
}

impl Default for LedgerConfig {
    fn default() -> Self {
        LedgerConfig {
            tree_height: DEFAULT_HEIGHT,
            bloom: BloomParams::default(),
            epoch_blocks: 100,
            step_budget: 1_000_000,
            authority: None,
            treasury_pk: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LedgerError {
    #[error("bad signature")]
    BadSignature,
    #[error("nonce replay: expected seq {expected}, got {got}")]
    NonceReplay { expected: u64, got: u64 },
    #[error("step budget exceeded: {needed} > {budget}")]
    StepBudgetExceeded { needed: u64, budget: u64 },
    #[error("unknown account")]
    UnknownAccount,
    #[error("account already registered")]
    AlreadyRegistered,
    #[error("depositor already bootstrapped")]
    RepeatBootstrap,
    #[error("depositor has not bootstrapped")]
    NotBootstrapped,
    #[error("first deposit must create the bootstrapped commitment")]
    BootstrapMismatch,
    #[error("unregistered masked-commitment hash")]
    UnknownEncHash,
    #[error("invalid {0:?} proof")]
    InvalidProof(StatementId),
    #[error("double spend of {0:?}")]
    DoubleSpend(Nullifier),
    #[error("merkle root not in recent history")]
    StaleRoot,
    #[error("transaction arity violation")]
    ArityViolation,
    #[error("tree is full")]
    TreeFull,
    #[error("transaction context mismatch")]
    ContextMismatch,
    #[error("no ancestral-compliance proof for flagged {0:?}")]
    MissingAccCoverage(FieldElement),
    #[error("withdrawal or transfer without proof of innocence")]
    MissingPoiProof,
    #[error("no compliance hook registered")]
    ComplianceHookUnavailable,
    #[error("epoch flag limit {0} reached")]
    EpochLimitExceeded(u64),
    #[error("masked commitment already flagged")]
    AlreadyFlagged,
    #[error("bloom hash does not encode the flagged commitment")]
    BloomHashMismatch,
    #[error("caller is not the authority")]
    NotAuthorized,
    #[error("output lock is neither burn nor treasury")]
    BadLock,
    #[error("public amount {0} not allowed for this call")]
    BadPublicAmount(i64),
    #[error("external balance {available} below {needed}")]
    InsufficientExternalBalance { available: u128, needed: u128 },
}

impl From<Violation> for LedgerError {
    fn from(v: Violation) -> Self {
        match v {
            Violation::StaleRoot => LedgerError::StaleRoot,
            Violation::DoubleSpend(n) => LedgerError::DoubleSpend(n),
            Violation::ArityViolation => LedgerError::ArityViolation,
            Violation::ContextMismatch => LedgerError::ContextMismatch,
        }
    }
}

/// Why a commitment entered the tree; the hook derives its POI status from it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum CommitmentOrigin {
    Deposit { address: String },
    /// Output of a spend whose inputs were all proven allowed.
    Inherited,
    Burn,
    Treasury,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HookDecision {
    Ready(PoiStatus),
    /// Status fixed now but published once the chain reaches `ready_at`.
    Delayed { status: PoiStatus, ready_at: u64 },
}

pub trait ComplianceHook: Send {
    fn decide(&mut self, commitment: &Commitment, leaf_index: u64, origin: &CommitmentOrigin, block: u64) -> HookDecision;
}

/// Replays a recorded decision sequence.
#[derive(Debug, Clone)]
pub struct TapeHook {
    tape: VecDeque<HookDecision>,
}

impl TapeHook {
    pub fn new(tape: &[HookDecision]) -> Self {
        TapeHook {
            tape: tape.iter().copied().collect(),
        }
    }
}

impl ComplianceHook for TapeHook {
    fn decide(&mut self, _: &Commitment, _: u64, _: &CommitmentOrigin, _: u64) -> HookDecision {
        self.tape.pop_front().expect("hook tape exhausted during replay")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BootstrapState {
    Requested(Commitment),
    Deposited,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub spend_pk: FieldElement,
    pub enc_pk: EncPublicKey,
    pub address: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub(crate) struct QueuedLeaf {
    leaf: FieldElement,
    ready_at: u64,
}

/// Everything that drives the state machine, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LedgerInput {
    Ops(Vec<UserOp>),
    AdvanceBlock,
    Fund { address: String, amount: u128 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Receipt {
    /// Indices into the event log.
    pub events: std::ops::Range<usize>,
}

pub type OpResult = Result<Receipt, LedgerError>;

const BASE_COST: u64 = 10;
const PROOF_COST: u64 = 200;
const ITEM_COST: u64 = 5;

pub struct Ledger {
    config: LedgerConfig,
    commitments: AppendTree,
    poi: AppendTree,
    poi_queue: VecDeque<QueuedLeaf>,
    bootstrap: AppendTree,
    nullifiers: BTreeSet<Nullifier>,
    bootstrap_states: BTreeMap<AccountId, BootstrapState>,
    enc_hashes: BTreeSet<[u8; 32]>,
    smt: SparseTree,
    /// (epoch, flags inserted in it)
    epoch_flags: (u64, u64),
    /// (epoch, transact and withdraw count in it)
    epoch_volume: (u64, u64),
    users: BTreeMap<AccountId, UserRecord>,
    blobs: Vec<(AccountId, shieldpool_core::crypto::Ciphertext)>,
    events: Vec<Event>,
    block: u64,
    nonces: BTreeMap<(AccountId, [u8; NONCE_KEY_LEN]), u64>,
    external: BTreeMap<String, u128>,
    pool_balance: u128,

    backend: Arc<dyn ProofBackend>,
    hook: Option<Box<dyn ComplianceHook>>,
    inputs: Vec<LedgerInput>,
    tape: Vec<HookDecision>,
}

impl std::fmt::Debug for Ledger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ledger")
            .field("block", &self.block)
            .field("commitments", &self.commitments.len())
            .field("nullifiers", &self.nullifiers.len())
            .field("flagged", &self.smt.len())
            .field("events", &self.events.len())
            .finish()
    }
}

impl Ledger {
    pub fn new(config: LedgerConfig) -> Result<Self, TreeError> {
        Ok(Ledger {
            commitments: AppendTree::new(config.tree_height)?,
            poi: AppendTree::new(config.tree_height)?,
            bootstrap: AppendTree::new(config.tree_height)?,
            config,
            poi_queue: VecDeque::new(),
            nullifiers: BTreeSet::new(),
            bootstrap_states: BTreeMap::new(),
            enc_hashes: BTreeSet::new(),
            smt: SparseTree::new(),
            epoch_flags: (0, 0),
            epoch_volume: (0, 0),
            users: BTreeMap::new(),
            blobs: Vec::new(),
            events: Vec::new(),
            block: 0,
            nonces: BTreeMap::new(),
            external: BTreeMap::new(),
            pool_balance: 0,
            backend: Arc::new(TransparentBackend),
            hook: None,
            inputs: Vec::new(),
            tape: Vec::new(),
        })
    }

    pub fn set_hook(&mut self, hook: Box<dyn ComplianceHook>) {
        self.hook = Some(hook);
    }

    pub fn set_backend(&mut self, backend: Arc<dyn ProofBackend>) {
        self.backend = backend;
    }

    pub fn backend(&self) -> Arc<dyn ProofBackend> {
        self.backend.clone()
    }

    /// Re-executes recorded inputs against recorded hook decisions.
    pub fn replay(config: LedgerConfig, inputs: &[LedgerInput], tape: &[HookDecision]) -> Result<Self, TreeError> {
        let mut ledger = Ledger::new(config)?;
        ledger.set_hook(Box::new(TapeHook::new(tape)));
        for input in inputs {
            match input {
                LedgerInput::Ops(ops) => {
                    ledger.handle_ops(ops.clone());
                }
                LedgerInput::AdvanceBlock => ledger.advance_block(),
                LedgerInput::Fund { address, amount } => ledger.fund_external(address, *amount),
            }
        }
        Ok(ledger)
    }

    pub fn inputs(&self) -> &[LedgerInput] {
        &self.inputs
    }

    pub fn hook_tape(&self) -> &[HookDecision] {
        &self.tape
    }

    // ---- read side ----

    pub fn config(&self) -> &LedgerConfig {
        &self.config
    }

    /// Stable identifier of this chain's genesis configuration.
    pub fn genesis_id(&self) -> [u8; 32] {
        sha256(&[b"shieldpool/genesis", &bincode::serialize(&self.config).expect("config serializes")])
    }

    pub fn block_height(&self) -> u64 {
        self.block
    }

    pub fn epoch(&self) -> u64 {
        self.block / self.config.epoch_blocks
    }

    pub fn commitment_tree(&self) -> &AppendTree {
        &self.commitments
    }

    pub fn poi_tree(&self) -> &AppendTree {
        &self.poi
    }

    pub fn poi_pending(&self) -> usize {
        self.poi_queue.len()
    }

    pub fn bootstrap_tree(&self) -> &AppendTree {
        &self.bootstrap
    }

    pub fn smt(&self) -> &SparseTree {
        &self.smt
    }

    /// Flagged masked commitments in key order.
    pub fn flagged(&self) -> Vec<FieldElement> {
        self.smt
            .entries()
            .map(|(k, _)| FieldElement::from_be_bytes(k).expect("keys are field encodings"))
            .collect()
    }

    pub fn is_spent(&self, n: &Nullifier) -> bool {
        self.nullifiers.contains(n)
    }

    pub fn nullifiers(&self) -> &BTreeSet<Nullifier> {
        &self.nullifiers
    }

    pub fn user(&self, account: &AccountId) -> Option<&UserRecord> {
        self.users.get(account)
    }

    pub fn users(&self) -> impl Iterator<Item = (&AccountId, &UserRecord)> {
        self.users.iter()
    }

    pub fn bootstrap_state(&self, account: &AccountId) -> Option<BootstrapState> {
        self.bootstrap_states.get(account).copied()
    }

    pub fn external_balance(&self, address: &str) -> u128 {
        self.external.get(address).copied().unwrap_or(0)
    }

    pub fn pool_balance(&self) -> u128 {
        self.pool_balance
    }

    pub fn flags_this_epoch(&self) -> u64 {
        if self.epoch_flags.0 == self.epoch() {
            self.epoch_flags.1
        } else {
            0
        }
    }

    /// Spends recorded in the current epoch window.
    pub fn volume(&self) -> u64 {
        if self.epoch_volume.0 == self.epoch() {
            self.epoch_volume.1
        } else {
            0
        }
    }

    pub fn next_nonce(&self, account: &AccountId, key: u64) -> Nonce {
        let n = Nonce::new(key, 0);
        Nonce {
            seq: self.nonces.get(&(*account, n.key)).copied().unwrap_or(0),
            ..n
        }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Events at or after `from_block`, optionally restricted to `kinds`.
    pub fn scan_events<'a>(&'a self, from_block: u64, kinds: Option<&'a [EventKind]>) -> impl Iterator<Item = &'a Event> + 'a {
        let start = self.events.partition_point(|e| e.block < from_block);
        self.events[start..]
            .iter()
            .filter(move |e| kinds.map_or(true, |k| k.contains(&e.kind)))
    }

    // ---- write side ----

    pub fn fund_external(&mut self, address: &str, amount: u128) {
        self.inputs.push(LedgerInput::Fund {
            address: address.to_string(),
            amount,
        });
        *self.external.entry(address.to_string()).or_insert(0) += amount;
    }

    pub fn advance_block(&mut self) {
        self.inputs.push(LedgerInput::AdvanceBlock);
        self.block += 1;
        self.flush_poi();
    }

    pub fn handle_ops(&mut self, ops: Vec<UserOp>) -> Vec<OpResult> {
        self.inputs.push(LedgerInput::Ops(ops.clone()));
        ops.into_iter().map(|op| self.handle_op(op)).collect()
    }

    fn handle_op(&mut self, op: UserOp) -> OpResult {
        if !op.verify_signature() {
            return Err(LedgerError::BadSignature);
        }
        match (&op.call, self.users.contains_key(&op.sender)) {
            (Call::RegisterUser { .. }, true) => return Err(LedgerError::AlreadyRegistered),
            (Call::RegisterUser { .. }, false) => {}
            (_, false) => return Err(LedgerError::UnknownAccount),
            (_, true) => {}
        }
        let slot = (op.sender, op.nonce.key);
        let expected = self.nonces.get(&slot).copied().unwrap_or(0);
        if op.nonce.seq != expected {
            return Err(LedgerError::NonceReplay {
                expected,
                got: op.nonce.seq,
            });
        }
        let needed = self.cost(&op.call);
        if needed > self.config.step_budget {
            return Err(LedgerError::StepBudgetExceeded {
                needed,
                budget: self.config.step_budget,
            });
        }
        let first_event = self.events.len();
        // every check in `execute` precedes its first mutation
        self.execute(op.sender, op.call)?;
        self.nonces.insert(slot, expected + 1);
        Ok(Receipt {
            events: first_event..self.events.len(),
        })
    }

    fn cost(&self, call: &Call) -> u64 {
        let items = |tx: &JoinSplitTx| (tx.input_nullifiers.len() + tx.output_commitments.len()) as u64 * ITEM_COST;
        BASE_COST
            + match call {
                Call::RegisterUser { .. } | Call::InsertEncryptedData { .. } => 0,
                Call::BootstrapInit { .. } | Call::BootstrapData { .. } | Call::SmtFlag { .. } => PROOF_COST,
                Call::Deposit { tx, .. } => 2 * PROOF_COST + items(tx),
                Call::Transact {
                    tx,
                    acc_proofs,
                    poi_proof,
                    ..
                } => (1 + acc_proofs.len() as u64 + poi_proof.is_some() as u64) * PROOF_COST + items(tx),
                Call::Withdraw { tx, acc_proofs, .. } => (2 + acc_proofs.len() as u64) * PROOF_COST + items(tx),
            }
    }

    fn emit(&mut self, data: EventData) {
        self.events.push(Event {
            kind: data.kind(),
            payload: data.encode(),
            block: self.block,
        });
    }

    fn verify(&self, proof: &Proof, expected: StatementId) -> Result<(), LedgerError> {
        if proof.id() == expected && self.backend.verify(proof) {
            Ok(())
        } else {
            Err(LedgerError::InvalidProof(expected))
        }
    }

    fn require_authority(&self, sender: &AccountId) -> Result<(), LedgerError> {
        if self.config.authority.as_ref() == Some(sender) {
            Ok(())
        } else {
            Err(LedgerError::NotAuthorized)
        }
    }

    fn execute(&mut self, sender: AccountId, call: Call) -> Result<(), LedgerError> {
        match call {
            Call::RegisterUser {
                spend_pk,
                enc_pk,
                address,
            } => {
                self.emit(EventData::UserRegistered {
                    account: sender,
                    spend_pk,
                    enc_pk,
                    address: address.clone(),
                });
                self.users.insert(
                    sender,
                    UserRecord {
                        spend_pk,
                        enc_pk,
                        address,
                    },
                );
            }
            Call::BootstrapInit {
                commitment_proof,
                depositor_enc,
            } => {
                if self.bootstrap_states.contains_key(&sender) {
                    return Err(LedgerError::RepeatBootstrap);
                }
                self.verify(&commitment_proof, StatementId::BootstrapDepositor)?;
                let Statement::BootstrapDepositor(p) = &commitment_proof.statement else {
                    unreachable!("id checked")
                };
                let commitment = p.commitment;
                self.bootstrap.append(commitment.0).map_err(|_| LedgerError::TreeFull)?;
                self.bootstrap_states.insert(sender, BootstrapState::Requested(commitment));
                self.emit(EventData::BootstrapInit {
                    commitment,
                    depositor_enc,
                });
            }
            Call::BootstrapData { authority_proof } => {
                self.require_authority(&sender)?;
                self.verify(&authority_proof, StatementId::BootstrapAuthority)?;
                let Statement::BootstrapAuthority(p) = &authority_proof.statement else {
                    unreachable!("id checked")
                };
                if !self.bootstrap.is_known_root(&p.bootstrap_root) {
                    return Err(LedgerError::StaleRoot);
                }
                let (masked_enc, hash) = (p.masked_enc.clone(), p.masked_enc_hash);
                self.enc_hashes.insert(hash);
                self.emit(EventData::BootstrappedData {
                    masked_enc,
                    masked_enc_hash: hash,
                });
            }
            Call::Deposit {
                tx,
                deposit_proof,
                joinsplit_proof,
            } => {
                let state = self.bootstrap_states.get(&sender).copied().ok_or(LedgerError::NotBootstrapped)?;
                if let BootstrapState::Requested(c) = state {
                    if tx.output_commitments.first() != Some(&c) {
                        return Err(LedgerError::BootstrapMismatch);
                    }
                }
                if tx.public_amount <= 0 {
                    return Err(LedgerError::BadPublicAmount(tx.public_amount));
                }
                let amount = tx.public_amount as u128;
                let address = self.users[&sender].address.clone();
                let available = self.external_balance(&address);
                if available < amount {
                    return Err(LedgerError::InsufficientExternalBalance {
                        available,
                        needed: amount,
                    });
                }
                self.check_joinsplit(&tx, &joinsplit_proof, None)?;
                self.verify(&deposit_proof, StatementId::DepositFinal)?;
                let Statement::DepositFinal(p) = &deposit_proof.statement else {
                    unreachable!("id checked")
                };
                if !self.enc_hashes.contains(&p.masked_enc_hash) {
                    return Err(LedgerError::UnknownEncHash);
                }
                if p.tx_context != tx.tx_context {
                    return Err(LedgerError::ContextMismatch);
                }
                self.require_hook()?;

                *self.external.get_mut(&address).expect("balance checked") -= amount;
                self.pool_balance += amount;
                self.bootstrap_states.insert(sender, BootstrapState::Deposited);
                self.apply_spend(&tx, CommitmentOrigin::Deposit { address });
            }
            Call::Transact {
                tx,
                acc_proofs,
                poi_proof,
                joinsplit_proof,
                output_lock,
            } => {
                if tx.public_amount != 0 {
                    return Err(LedgerError::BadPublicAmount(tx.public_amount));
                }
                let origin = match output_lock {
                    None => CommitmentOrigin::Inherited,
                    Some(pk) if pk == burn_public_key() => CommitmentOrigin::Burn,
                    Some(pk) if Some(pk) == self.config.treasury_pk => CommitmentOrigin::Treasury,
                    Some(_) => return Err(LedgerError::BadLock),
                };
                self.check_joinsplit(&tx, &joinsplit_proof, output_lock)?;
                if output_lock.is_none() {
                    self.check_poi(&tx, poi_proof.as_ref().ok_or(LedgerError::MissingPoiProof)?)?;
                    self.check_acc(&tx, &acc_proofs)?;
                }
                self.require_hook()?;
                self.bump_volume();
                self.apply_spend(&tx, origin);
            }
            Call::Withdraw {
                tx,
                acc_proofs,
                poi_proof,
                joinsplit_proof,
                recipient,
            } => {
                if tx.public_amount >= 0 {
                    return Err(LedgerError::BadPublicAmount(tx.public_amount));
                }
                self.check_joinsplit(&tx, &joinsplit_proof, None)?;
                self.check_poi(&tx, &poi_proof)?;
                self.check_acc(&tx, &acc_proofs)?;
                self.require_hook()?;
                let amount = tx.public_amount.unsigned_abs() as u128;
                // conservation inside the proof bounds this by the pool
                self.pool_balance -= amount;
                *self.external.entry(recipient).or_insert(0) += amount;
                self.bump_volume();
                self.apply_spend(&tx, CommitmentOrigin::Inherited);
            }
            Call::SmtFlag {
                masked,
                bloom_hash,
                mask_proof,
            } => {
                self.require_authority(&sender)?;
                let cap = self.config.bloom.epoch_cap();
                if self.flags_this_epoch() >= cap {
                    return Err(LedgerError::EpochLimitExceeded(cap));
                }
                let key = smt_key(&masked);
                if self.smt.get(&key).is_some() {
                    return Err(LedgerError::AlreadyFlagged);
                }
                let target = encode_single(&masked, &self.config.bloom);
                if target.field_hash() != bloom_hash {
                    return Err(LedgerError::BloomHashMismatch);
                }
                self.verify(&mask_proof, StatementId::Mask)?;
                let Statement::Mask(p) = &mask_proof.statement else {
                    unreachable!("id checked")
                };
                if p.masked != masked {
                    return Err(LedgerError::InvalidProof(StatementId::Mask));
                }
                if !self.commitments.is_known_root(&p.mixer_root) {
                    return Err(LedgerError::StaleRoot);
                }
                let smt_root = self.smt.insert(key, bloom_hash).map_err(|_| LedgerError::AlreadyFlagged)?;
                let epoch = self.epoch();
                self.epoch_flags = (epoch, self.flags_this_epoch() + 1);
                self.emit(EventData::StatusFlagged {
                    masked,
                    bloom_hash,
                    smt_root,
                });
            }
            Call::InsertEncryptedData { blob } => {
                self.blobs.push((sender, blob.clone()));
                self.emit(EventData::EncryptedBlob { account: sender, blob });
            }
        }
        Ok(())
    }

    fn require_hook(&self) -> Result<(), LedgerError> {
        if self.hook.is_some() {
            Ok(())
        } else {
            Err(LedgerError::ComplianceHookUnavailable)
        }
    }

    fn check_joinsplit(&self, tx: &JoinSplitTx, proof: &Proof, output_lock: Option<FieldElement>) -> Result<(), LedgerError> {
        validate_joinsplit(tx, |r| self.commitments.is_known_root(r), &self.nullifiers)
            .map_err(|mut v| LedgerError::from(v.remove(0)))?;
        if self.commitments.len() + tx.output_commitments.len() as u64 > self.commitments.capacity() {
            return Err(LedgerError::TreeFull);
        }
        let expected = Statement::JoinSplit(JoinSplitPublic {
            merkle_root: tx.merkle_root,
            nullifiers: tx.input_nullifiers.clone(),
            output_commitments: tx.output_commitments.clone(),
            public_amount: tx.public_amount,
            tx_context: tx.tx_context,
            output_lock,
        });
        if proof.statement != expected {
            return Err(LedgerError::InvalidProof(StatementId::JoinSplit));
        }
        self.verify(proof, StatementId::JoinSplit)
    }

    fn check_poi(&self, tx: &JoinSplitTx, proof: &Proof) -> Result<(), LedgerError> {
        self.verify(proof, StatementId::Poi)?;
        let Statement::Poi(p) = &proof.statement else {
            unreachable!("id checked")
        };
        if p.tx_context != tx.tx_context || p.nullifiers != tx.input_nullifiers {
            return Err(LedgerError::ContextMismatch);
        }
        if !self.poi.is_known_root(&p.poi_root) {
            return Err(LedgerError::StaleRoot);
        }
        Ok(())
    }

    /// One passing instance per flagged commitment, all over the current
    /// registry root and the same merged chain state.
    fn check_acc(&self, tx: &JoinSplitTx, proofs: &[Proof]) -> Result<(), LedgerError> {
        let flagged = self.flagged();
        let count = flagged.len() as u64;
        let root = self.smt.root();
        let mut covered = BTreeMap::new();
        let mut chain_hash = None;
        for proof in proofs {
            let Statement::Acc(p) = &proof.statement else {
                return Err(LedgerError::InvalidProof(StatementId::Acc));
            };
            if p.smt_root != root || p.flagged_count != count || *chain_hash.get_or_insert(p.chain_state_hash) != p.chain_state_hash {
                return Err(LedgerError::InvalidProof(StatementId::Acc));
            }
            if p.tx_context != tx.tx_context {
                return Err(LedgerError::ContextMismatch);
            }
            covered.insert(p.flagged, proof);
        }
        for f in &flagged {
            let proof = covered.remove(f).ok_or(LedgerError::MissingAccCoverage(*f))?;
            self.verify(proof, StatementId::Acc)?;
        }
        if !covered.is_empty() || proofs.len() as u64 != count {
            return Err(LedgerError::InvalidProof(StatementId::Acc));
        }
        Ok(())
    }

    fn bump_volume(&mut self) {
        let epoch = self.epoch();
        self.epoch_volume = (epoch, self.volume() + 1);
    }

    fn apply_spend(&mut self, tx: &JoinSplitTx, origin: CommitmentOrigin) {
        for n in &tx.input_nullifiers {
            self.nullifiers.insert(*n);
            self.emit(EventData::NewNullifier { nullifier: *n });
        }
        for (c, ct) in tx.output_commitments.iter().zip(&tx.encrypted_outputs) {
            let (leaf_index, _) = self.commitments.append(c.0).expect("capacity checked");
            self.emit(EventData::NewCommitment {
                commitment: *c,
                leaf_index,
                ciphertext: ct.clone(),
            });
            let block = self.block;
            let decision = self
                .hook
                .as_mut()
                .expect("hook checked")
                .decide(c, leaf_index, &origin, block);
            self.tape.push(decision);
            let (status, ready_at) = match decision {
                HookDecision::Ready(s) => (s, block),
                HookDecision::Delayed { status, ready_at } => (status, ready_at),
            };
            self.poi_queue.push_back(QueuedLeaf {
                leaf: poi_leaf(c, status),
                ready_at,
            });
        }
        self.flush_poi();
    }

    /// Publishes queued POI leaves in order; a delayed head holds back the
    /// rest so leaf positions match the commitment tree.
    fn flush_poi(&mut self) {
        while let Some(head) = self.poi_queue.front() {
            if head.ready_at > self.block {
                break;
            }
            self.poi.append(head.leaf).expect("poi tree mirrors commitment tree");
            self.poi_queue.pop_front();
        }
    }
}

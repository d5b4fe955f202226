//! Canonical snapshot encoding and the state hash derived from it.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use shieldpool_core::crypto::{sha256, Ciphertext};
use shieldpool_core::merkle::AppendTree;
use shieldpool_core::smt::SparseTree;
use shieldpool_core::utxo::Nullifier;

use super::{AccountId, BootstrapState, Event, Ledger, LedgerConfig, QueuedLeaf, UserRecord, NONCE_KEY_LEN};

const MAGIC: &[u8; 8] = b"SPLEDG01";

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("bad snapshot header")]
    BadHeader,
    #[error("snapshot decode: {0}")]
    Decode(String),
}

/// Field order is the canonical order.
#[derive(Serialize, Deserialize)]
struct Snapshot {
    config: LedgerConfig,
    block: u64,
    commitments: Vec<u8>,
    poi: Vec<u8>,
    poi_queue: Vec<QueuedLeaf>,
    bootstrap: Vec<u8>,
    nullifiers: Vec<Nullifier>,
    bootstrap_states: Vec<(AccountId, BootstrapState)>,
    enc_hashes: Vec<[u8; 32]>,
    smt: Vec<u8>,
    epoch_flags: (u64, u64),
    epoch_volume: (u64, u64),
    users: Vec<(AccountId, UserRecord)>,
    blobs: Vec<(AccountId, Ciphertext)>,
    events: Vec<Event>,
    nonces: Vec<((AccountId, [u8; NONCE_KEY_LEN]), u64)>,
    external: Vec<(String, u128)>,
    pool_balance: u128,
}

impl Ledger {
    /// `magic(8) ∥ bincode(state)`; hooks, backend and input log excluded.
    pub fn export_snapshot(&self) -> Vec<u8> {
        let snap = Snapshot {
            config: self.config.clone(),
            block: self.block,
            commitments: self.commitments.export(),
            poi: self.poi.export(),
            poi_queue: self.poi_queue.iter().copied().collect(),
            bootstrap: self.bootstrap.export(),
            nullifiers: self.nullifiers.iter().copied().collect(),
            bootstrap_states: self.bootstrap_states.iter().map(|(k, v)| (*k, *v)).collect(),
            enc_hashes: self.enc_hashes.iter().copied().collect(),
            smt: self.smt.export(),
            epoch_flags: self.epoch_flags,
            epoch_volume: self.epoch_volume,
            users: self.users.iter().map(|(k, v)| (*k, v.clone())).collect(),
            blobs: self.blobs.clone(),
            events: self.events.clone(),
            nonces: self.nonces.iter().map(|(k, v)| (*k, *v)).collect(),
            external: self.external.iter().map(|(k, v)| (k.clone(), *v)).collect(),
            pool_balance: self.pool_balance,
        };
        let mut out = MAGIC.to_vec();
        out.extend_from_slice(&bincode::serialize(&snap).expect("snapshot serializes"));
        out
    }

    pub fn state_hash(&self) -> [u8; 32] {
        sha256(&[&self.export_snapshot()])
    }

    /// Restores state without a hook; register one before submitting spends.
    pub fn import_snapshot(bytes: &[u8]) -> Result<Ledger, SnapshotError> {
        let body = bytes.strip_prefix(MAGIC.as_slice()).ok_or(SnapshotError::BadHeader)?;
        let snap: Snapshot = bincode::deserialize(body).map_err(|e| SnapshotError::Decode(e.to_string()))?;
        let tree = |b: &[u8]| AppendTree::import(b).map_err(|e| SnapshotError::Decode(e.to_string()));
        let mut ledger = Ledger::new(snap.config.clone()).map_err(|e| SnapshotError::Decode(e.to_string()))?;
        ledger.block = snap.block;
        ledger.commitments = tree(&snap.commitments)?;
        ledger.poi = tree(&snap.poi)?;
        ledger.poi_queue = VecDeque::from(snap.poi_queue);
        ledger.bootstrap = tree(&snap.bootstrap)?;
        ledger.nullifiers = BTreeSet::from_iter(snap.nullifiers);
        ledger.bootstrap_states = BTreeMap::from_iter(snap.bootstrap_states);
        ledger.enc_hashes = BTreeSet::from_iter(snap.enc_hashes);
        ledger.smt = SparseTree::import(&snap.smt).map_err(|e| SnapshotError::Decode(e.to_string()))?;
        ledger.epoch_flags = snap.epoch_flags;
        ledger.epoch_volume = snap.epoch_volume;
        ledger.users = BTreeMap::from_iter(snap.users);
        ledger.blobs = snap.blobs;
        ledger.events = snap.events;
        ledger.nonces = BTreeMap::from_iter(snap.nonces);
        ledger.external = BTreeMap::from_iter(snap.external);
        ledger.pool_balance = snap.pool_balance;
        Ok(ledger)
    }
}

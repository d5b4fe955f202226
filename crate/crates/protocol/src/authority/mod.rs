//! Compliance authority: screening, POI statuses, bootstrap masking and
//! flagging.

mod graph;
mod sanctions;

pub use graph::{Direction, HopStats, Transitivity, TxGraph, UnknownAddress};
pub use sanctions::{normalize, SanctionsList};

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, MutexGuard};

use ed25519_dalek::SigningKey;
use rand::SeedableRng;
use thiserror::Error;

use shieldpool_core::bloom::encode_single;
use shieldpool_core::codec::{put_prefixed, Reader};
use shieldpool_core::crypto::{
    encrypt_with, random_blinding, random_bytes, EncKeypair, EncPublicKey, EncRandomness, ProtocolRng, SpendKeypair,
};
use shieldpool_core::statements::{
    mask_commitment, masked_enc_hash, AuthorityPublic, AuthorityWitness, MaskPublic, MaskWitness, PoiStatus,
    ProofBackend, Statement, StatementError, TransparentBackend, Witness,
};
use shieldpool_core::utxo::Commitment;
use shieldpool_core::FieldElement;

use crate::ledger::{
    AccountId, Call, CommitmentOrigin, ComplianceHook, EventData, EventKind, HookDecision, Ledger, LedgerError,
    OpResult, UserOp,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Error)]
pub enum AuthorityError {
    #[error("no mask record for the requested deposit")]
    NoRecord,
    #[error("deposit commitment is not in the mixer tree yet")]
    NotDeposited,
    #[error(transparent)]
    Proof(#[from] StatementError),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComplianceStatus {
    Allowed,
    Illicit,
    Pending,
}

impl From<PoiStatus> for ComplianceStatus {
    fn from(s: PoiStatus) -> Self {
        match s {
            PoiStatus::Allowed => ComplianceStatus::Allowed,
            PoiStatus::Illicit => ComplianceStatus::Illicit,
        }
    }
}

/// Status of a new commitment: illicit on a direct sanctions hit, on a
/// sanctioned address within `hops` provenance hops, or on any illicit
/// parent.
pub fn poi_status(
    depositor: Option<&str>,
    graph: &TxGraph,
    sanctions: &SanctionsList,
    hops: usize,
    parents: &[PoiStatus],
) -> PoiStatus {
    if parents.contains(&PoiStatus::Illicit) {
        return PoiStatus::Illicit;
    }
    if let Some(addr) = depositor {
        if sanctions.contains(addr) {
            return PoiStatus::Illicit;
        }
        if let Ok(Transitivity::Flagged(_)) = graph.transitivity_check(sanctions, addr, hops) {
            return PoiStatus::Illicit;
        }
    }
    PoiStatus::Allowed
}

#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub sanctions: SanctionsList,
    pub graph: TxGraph,
    pub hops: usize,
    /// Blocks a deposit's status stays unpublished.
    pub delay_blocks: u64,
}

impl Default for Policy {
    fn default() -> Self {
        Policy {
            sanctions: SanctionsList::default(),
            graph: TxGraph::new(),
            hops: 2,
            delay_blocks: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskRecord {
    pub depositor: String,
    pub commitment: Commitment,
    pub blinding: FieldElement,
    pub masked: FieldElement,
    pub flagged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LeafStatus {
    pub commitment: Commitment,
    pub status: PoiStatus,
    pub ready_at: u64,
}

#[derive(Debug, Default)]
pub struct AuthorityDb {
    pub policy: Policy,
    records: BTreeMap<Commitment, MaskRecord>,
    leaves: BTreeMap<u64, LeafStatus>,
}

impl AuthorityDb {
    pub fn records(&self) -> impl Iterator<Item = &MaskRecord> {
        self.records.values()
    }

    pub fn record(&self, c: &Commitment) -> Option<&MaskRecord> {
        self.records.get(c)
    }

    pub fn leaf_status(&self, leaf_index: u64, block: u64) -> Option<ComplianceStatus> {
        self.leaves.get(&leaf_index).map(|l| {
            if l.ready_at > block {
                ComplianceStatus::Pending
            } else {
                l.status.into()
            }
        })
    }

    /// Records in commitment order:
    /// `len(4) ∥ depositor ∥ C(32) ∥ b(32) ∥ Ĉ(32) ∥ flagged(1)`.
    pub fn export(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for r in self.records.values() {
            put_prefixed(&mut out, r.depositor.as_bytes());
            out.extend_from_slice(&r.commitment.0.to_be_bytes());
            out.extend_from_slice(&r.blinding.to_be_bytes());
            out.extend_from_slice(&r.masked.to_be_bytes());
            out.push(r.flagged as u8);
        }
        out
    }

    pub fn parse_export(bytes: &[u8]) -> Result<Vec<MaskRecord>, String> {
        let mut r = Reader::new(bytes);
        let mut out = Vec::new();
        while r.remaining() > 0 {
            out.push(MaskRecord {
                depositor: String::from_utf8(r.prefixed()?.to_vec()).map_err(|e| e.to_string())?,
                commitment: Commitment(r.field()?),
                blinding: r.field()?,
                masked: r.field()?,
                flagged: match r.u8()? {
                    0 => false,
                    1 => true,
                    b => return Err(format!("bad flag byte {b}")),
                },
            });
        }
        Ok(out)
    }
}

/// Ledger-side view of the authority, sharing its database.
pub struct AuthorityHook {
    db: Arc<Mutex<AuthorityDb>>,
}

impl ComplianceHook for AuthorityHook {
    fn decide(&mut self, commitment: &Commitment, leaf_index: u64, origin: &CommitmentOrigin, block: u64) -> HookDecision {
        let mut db = self.db.lock().expect("authority db poisoned");
        let (status, ready_at) = match origin {
            CommitmentOrigin::Deposit { address } => {
                let p = &db.policy;
                let status = poi_status(Some(address), &p.graph, &p.sanctions, p.hops, &[]);
                (status, block + p.delay_blocks)
            }
            CommitmentOrigin::Inherited => (PoiStatus::Allowed, block),
            CommitmentOrigin::Treasury => (PoiStatus::Allowed, block),
            CommitmentOrigin::Burn => (PoiStatus::Illicit, block),
        };
        db.leaves.insert(
            leaf_index,
            LeafStatus {
                commitment: *commitment,
                status,
                ready_at,
            },
        );
        if ready_at > block {
            HookDecision::Delayed { status, ready_at }
        } else {
            HookDecision::Ready(status)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FlagTarget {
    Depositor(String),
    Commitment(Commitment),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AuditReport {
    pub records: usize,
    pub flagged_records: usize,
    pub smt_entries: usize,
    /// Registry keys with no flagged record behind them.
    pub orphan_keys: Vec<FieldElement>,
    /// Records whose masked value is not `H(C, b)`.
    pub bad_records: Vec<Commitment>,
    /// Flagged records missing from the registry.
    pub missing_keys: Vec<FieldElement>,
}

impl AuditReport {
    pub fn is_consistent(&self) -> bool {
        self.orphan_keys.is_empty() && self.bad_records.is_empty() && self.missing_keys.is_empty()
    }
}

pub struct Authority {
    signing: SigningKey,
    spend: SpendKeypair,
    enc: EncKeypair,
    rng: ProtocolRng,
    db: Arc<Mutex<AuthorityDb>>,
    backend: Arc<dyn ProofBackend>,
    cursor: usize,
    address: String,
}

impl Authority {
    pub fn new(seed: u64, policy: Policy) -> Self {
        let mut rng = ProtocolRng::seed_from_u64(seed);
        let signing = SigningKey::from_bytes(&random_bytes(&mut rng, 32).try_into().expect("32"));
        let spend = SpendKeypair::generate(&mut rng);
        let enc = EncKeypair::generate(&mut rng);
        Authority {
            signing,
            spend,
            enc,
            rng,
            db: Arc::new(Mutex::new(AuthorityDb {
                policy,
                ..AuthorityDb::default()
            })),
            backend: Arc::new(TransparentBackend),
            cursor: 0,
            address: "authority".into(),
        }
    }

    pub fn account(&self) -> AccountId {
        AccountId::of(&self.signing)
    }

    pub fn enc_public(&self) -> EncPublicKey {
        self.enc.public
    }

    pub fn hook(&self) -> Box<dyn ComplianceHook> {
        Box::new(AuthorityHook { db: self.db.clone() })
    }

    pub fn db(&self) -> MutexGuard<'_, AuthorityDb> {
        self.db.lock().expect("authority db poisoned")
    }

    pub fn register(&mut self, ledger: &mut Ledger) -> OpResult {
        let call = Call::RegisterUser {
            spend_pk: self.spend.pk,
            enc_pk: self.enc.public,
            address: self.address.clone(),
        };
        self.submit(ledger, call)
    }

    pub fn submit(&mut self, ledger: &mut Ledger, call: Call) -> OpResult {
        let nonce = ledger.next_nonce(&self.account(), 0);
        let op = UserOp::sign(&self.signing, nonce, call);
        ledger.handle_ops(vec![op]).remove(0)
    }

    /// Answers every unanswered bootstrap request: draws the blinding,
    /// stores the record, encrypts `Ĉ` to the depositor and attests it.
    pub fn serve_bootstrap(&mut self, ledger: &mut Ledger) -> Vec<Result<Commitment, AuthorityError>> {
        let pending: Vec<(Commitment, EncPublicKey)> = ledger.events()[self.cursor..]
            .iter()
            .filter(|e| e.kind == EventKind::BootstrapInit)
            .map(|e| match e.data() {
                EventData::BootstrapInit {
                    commitment,
                    depositor_enc,
                } => (commitment, depositor_enc),
                _ => unreachable!("filtered by kind"),
            })
            .collect();
        self.cursor = ledger.events().len();
        pending
            .into_iter()
            .map(|(c, enc_pk)| self.answer_bootstrap(ledger, c, enc_pk))
            .collect()
    }

    fn answer_bootstrap(&mut self, ledger: &mut Ledger, c: Commitment, enc_pk: EncPublicKey) -> Result<Commitment, AuthorityError> {
        let depositor = ledger
            .users()
            .find(|(_, u)| u.enc_pk == enc_pk)
            .map(|(_, u)| normalize(&u.address))
            .unwrap_or_default();
        let blinding = random_blinding(&mut self.rng);
        let masked = mask_commitment(&c, &blinding);
        let randomness = EncRandomness::generate(&mut self.rng);
        let masked_enc = encrypt_with(&enc_pk, &masked.to_be_bytes(), &randomness);
        let tree = ledger.bootstrap_tree();
        let idx = tree.position(&c.0).ok_or(AuthorityError::NoRecord)?;
        let statement = Statement::BootstrapAuthority(AuthorityPublic {
            bootstrap_root: tree.root(),
            recipient: enc_pk,
            masked_enc_hash: masked_enc_hash(&masked_enc, &masked),
            masked_enc,
        });
        let witness = Witness::BootstrapAuthority(AuthorityWitness {
            commitment: c,
            path: tree.prove(idx).expect("position found"),
            blinding,
            masked,
            randomness,
        });
        let proof = self.backend.prove(&statement, &witness)?;
        self.submit(ledger, Call::BootstrapData { authority_proof: proof })?;
        self.db().records.insert(
            c,
            MaskRecord {
                depositor,
                commitment: c,
                blinding,
                masked,
                flagged: false,
            },
        );
        Ok(c)
    }

    /// Puts a deposit's masked commitment into the flag registry. Flagging
    /// an already flagged deposit is a no-op returning `Ok(false)`.
    pub fn flag_deposit(&mut self, ledger: &mut Ledger, target: &FlagTarget) -> Result<bool, AuthorityError> {
        let record = {
            let db = self.db();
            match target {
                FlagTarget::Commitment(c) => db.records.get(c).cloned(),
                FlagTarget::Depositor(a) => db.records.values().find(|r| r.depositor == normalize(a)).cloned(),
            }
        }
        .ok_or(AuthorityError::NoRecord)?;
        if record.flagged {
            return Ok(false);
        }
        self.flag_masked(ledger, record.commitment, record.blinding)?;
        self.db().records.get_mut(&record.commitment).expect("present").flagged = true;
        Ok(true)
    }

    /// Submits a flag for `H(C, b)` with a fresh mask proof.
    pub fn flag_masked(&mut self, ledger: &mut Ledger, c: Commitment, blinding: FieldElement) -> Result<(), AuthorityError> {
        let masked = mask_commitment(&c, &blinding);
        let tree = ledger.commitment_tree();
        let idx = tree.position(&c.0).ok_or(AuthorityError::NotDeposited)?;
        let statement = Statement::Mask(MaskPublic {
            masked,
            mixer_root: tree.root(),
        });
        let witness = Witness::Mask(MaskWitness {
            commitment: c,
            blinding,
            leaf_index: idx,
            path: tree.prove(idx).expect("position found"),
        });
        let proof = self.backend.prove(&statement, &witness)?;
        let bloom_hash = encode_single(&masked, &ledger.config().bloom).field_hash();
        self.submit(
            ledger,
            Call::SmtFlag {
                masked,
                bloom_hash,
                mask_proof: proof,
            },
        )?;
        Ok(())
    }

    /// Cross-checks the registry against the local records.
    pub fn audit(&self, ledger: &Ledger) -> AuditReport {
        let db = self.db();
        let on_chain = ledger.flagged();
        let flagged: BTreeMap<FieldElement, &MaskRecord> =
            db.records.values().filter(|r| r.flagged).map(|r| (r.masked, r)).collect();
        AuditReport {
            records: db.records.len(),
            flagged_records: flagged.len(),
            smt_entries: on_chain.len(),
            orphan_keys: on_chain.iter().filter(|k| !flagged.contains_key(k)).copied().collect(),
            bad_records: db
                .records
                .values()
                .filter(|r| mask_commitment(&r.commitment, &r.blinding) != r.masked)
                .map(|r| r.commitment)
                .collect(),
            missing_keys: flagged.keys().filter(|k| !on_chain.contains(k)).copied().collect(),
        }
    }
}

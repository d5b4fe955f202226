//! Client side: keys, scanning, deposits, compliant spends, onboarding,
//! contacts and remediation.

mod contacts;
mod export;
mod invite;

pub use contacts::Contact;
pub use export::ExportError;
pub use invite::InviteLink;

use std::sync::Arc;

use ed25519_dalek::SigningKey;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use shieldpool_core::bloom::{
    encode_single, exclusion_check, merge_capacity_check, BloomFilter, BloomParams, Capacity, Exclusion,
    RateLimitConfig,
};
use shieldpool_core::crypto::{random_bytes, Ciphertext, EncKeypair, EncPublicKey, ProtocolRng, SpendKeypair};
use shieldpool_core::smt::SparseTree;
use shieldpool_core::statements::{
    masked_enc_hash, poi_leaf, smt_key, AccPublic, AccWitness, DepositFinalPublic, DepositFinalWitness,
    DepositorPublic, DepositorWitness, JoinSplitPublic, PoiPublic, PoiStatus, PoiWitness, Proof, ProofBackend,
    Statement, StatementError, TransparentBackend, Witness,
};
use shieldpool_core::utxo::{
    arity_for, build_joinsplit, commit, nullifier_for, pad_inputs, Commitment, InputWitness, JoinSplitTx, Nullifier,
    SpendInput, Utxo, UtxoError,
};
use shieldpool_core::FieldElement;

use crate::authority::{Authority, ComplianceStatus};
use crate::ledger::{
    burn_public_key, AccountId, BootstrapState, Call, EventData, EventKind, Ledger, LedgerError, OpResult, Receipt,
    UserOp,
};

#[derive(Debug, Error)]
pub enum WalletError {
    #[error("insufficient funds: {available} < {needed}")]
    InsufficientFunds { available: u64, needed: u64 },
    #[error("lineage contains flagged deposit {0:?}")]
    TaintedLineage(FieldElement),
    #[error("an input is marked illicit")]
    IllicitInput,
    #[error("an input is still in its compliance standby period")]
    PendingCompliance,
    #[error("amount needs more than 16 inputs")]
    TooManyInputs,
    #[error("merged chain state holds ~{count} deposits, limit {max:.0}")]
    RateLimited { count: u64, max: f64 },
    #[error("no bootstrap answer from the authority yet")]
    AwaitingBootstrap,
    #[error("first deposit must be for the bootstrapped amount {0}")]
    BootstrapAmountMismatch(u64),
    #[error("amount must be positive")]
    ZeroAmount,
    #[error("invalid invite link: {0}")]
    InvalidLink(String),
    #[error("invite already redeemed")]
    LinkAlreadyRedeemed,
    #[error("unknown recipient")]
    UnknownRecipient,
    #[error("no treasury configured")]
    NoTreasury,
    #[error("note {0} not owned or already spent")]
    UnknownNote(u64),
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error(transparent)]
    Proof(#[from] StatementError),
    #[error(transparent)]
    Utxo(#[from] UtxoError),
    #[error(transparent)]
    Export(#[from] ExportError),
}

pub type WalletResult<T> = Result<T, WalletError>;

/// Public keys needed to pay someone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Recipient {
    pub spend_pk: FieldElement,
    pub enc_pk: EncPublicKey,
}

impl Recipient {
    /// Looks the account up in the registration event stream.
    pub fn lookup(ledger: &Ledger, account: &AccountId) -> Option<Recipient> {
        ledger
            .scan_events(0, Some(&[EventKind::UserRegistered]))
            .find_map(|e| match e.data() {
                EventData::UserRegistered {
                    account: a,
                    spend_pk,
                    enc_pk,
                    ..
                } if a == *account => Some(Recipient { spend_pk, enc_pk }),
                _ => None,
            })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OwnedNote {
    pub utxo: Utxo,
    pub commitment: Commitment,
    pub leaf_index: u64,
    pub nullifier: Nullifier,
    pub spent: bool,
    pub sk: FieldElement,
}

impl OwnedNote {
    pub fn amount(&self) -> u64 {
        self.utxo.amount()
    }

    pub fn status(&self, ledger: &Ledger) -> ComplianceStatus {
        match ledger.poi_tree().leaf(self.leaf_index) {
            None => ComplianceStatus::Pending,
            Some(leaf) if leaf == poi_leaf(&self.commitment, PoiStatus::Allowed) => ComplianceStatus::Allowed,
            Some(_) => ComplianceStatus::Illicit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlaggedEntry {
    pub masked: FieldElement,
    pub bloom_hash: FieldElement,
    pub smt_root: FieldElement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BurnTarget {
    Burn,
    Treasury,
}

/// Notes decryptable under `(spend, enc)` among the ledger's commitments.
pub fn find_notes(ledger: &Ledger, spend: &SpendKeypair, enc: &EncKeypair) -> Vec<OwnedNote> {
    ledger
        .scan_events(0, Some(&[EventKind::NewCommitment]))
        .filter_map(|e| match e.data() {
            EventData::NewCommitment {
                commitment,
                leaf_index,
                ciphertext,
            } => try_open(spend, enc, &commitment, leaf_index, &ciphertext).map(|mut n| {
                n.spent = ledger.is_spent(&n.nullifier);
                n
            }),
            _ => None,
        })
        .collect()
}

fn try_open(
    spend: &SpendKeypair,
    enc: &EncKeypair,
    commitment: &Commitment,
    leaf_index: u64,
    ct: &Ciphertext,
) -> Option<OwnedNote> {
    let plain = enc.decrypt(ct).ok()?;
    let mut utxo = Utxo::from_plaintext(&plain, spend.pk).ok()?;
    if commit(&utxo) != *commitment {
        return None;
    }
    utxo.leaf_index = Some(leaf_index);
    Some(OwnedNote {
        utxo,
        commitment: *commitment,
        leaf_index,
        nullifier: nullifier_for(commitment, leaf_index, &spend.sk),
        spent: false,
        sk: spend.sk,
    })
}

/// Proofs and transaction for one spend.
struct SpendBundle {
    tx: JoinSplitTx,
    joinsplit: Proof,
    poi: Option<Proof>,
    acc: Vec<Proof>,
}

pub struct Wallet {
    spend: SpendKeypair,
    enc: EncKeypair,
    signing: SigningKey,
    address: String,
    params: BloomParams,
    rate: RateLimitConfig,
    notes: Vec<OwnedNote>,
    cursor: usize,
    contacts: Vec<Contact>,
    flagged: Vec<FlaggedEntry>,
    smt: SparseTree,
    masked: Option<FieldElement>,
    masked_enc: Option<Ciphertext>,
    bootstrap_note: Option<Utxo>,
    rng: ProtocolRng,
    backend: Arc<dyn ProofBackend>,
}

impl std::fmt::Debug for Wallet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Wallet")
            .field("address", &self.address)
            .field("account", &self.account())
            .field("notes", &self.notes.len())
            .field("cursor", &self.cursor)
            .finish()
    }
}

impl Wallet {
    /// Keys are a pure function of the seed.
    pub fn from_seed(seed: u64, address: &str, params: BloomParams) -> Self {
        Self::from_rng(ProtocolRng::seed_from_u64(seed), address, params)
    }

    fn from_rng(mut rng: ProtocolRng, address: &str, params: BloomParams) -> Self {
        let signing = SigningKey::from_bytes(&random_bytes(&mut rng, 32).try_into().expect("32"));
        let spend = SpendKeypair::generate(&mut rng);
        let enc = EncKeypair::generate(&mut rng);
        Wallet {
            spend,
            enc,
            signing,
            address: address.to_string(),
            params,
            rate: RateLimitConfig::default(),
            notes: Vec::new(),
            cursor: 0,
            contacts: Vec::new(),
            flagged: Vec::new(),
            smt: SparseTree::new(),
            masked: None,
            masked_enc: None,
            bootstrap_note: None,
            rng,
            backend: Arc::new(TransparentBackend),
        }
    }

    /// Fresh wallet registered on the ledger.
    pub fn create(seed: u64, address: &str, ledger: &mut Ledger) -> WalletResult<Self> {
        let mut w = Wallet::from_seed(seed, address, ledger.config().bloom);
        w.register(ledger)?;
        Ok(w)
    }

    pub fn register(&mut self, ledger: &mut Ledger) -> WalletResult<Receipt> {
        let call = Call::RegisterUser {
            spend_pk: self.spend.pk,
            enc_pk: self.enc.public,
            address: self.address.clone(),
        };
        Ok(self.submit(ledger, call)?)
    }

    pub fn set_rate_limit(&mut self, rate: RateLimitConfig) {
        self.rate = rate;
    }

    pub fn account(&self) -> AccountId {
        AccountId::of(&self.signing)
    }

    pub fn address(&self) -> &str {
        &self.address
    }

    pub fn recipient(&self) -> Recipient {
        Recipient {
            spend_pk: self.spend.pk,
            enc_pk: self.enc.public,
        }
    }

    pub fn spend_keys(&self) -> &SpendKeypair {
        &self.spend
    }

    pub fn notes(&self) -> &[OwnedNote] {
        &self.notes
    }

    pub fn unspent(&self) -> impl Iterator<Item = &OwnedNote> {
        self.notes.iter().filter(|n| !n.spent)
    }

    pub fn balance(&self) -> u64 {
        self.unspent().map(OwnedNote::amount).sum()
    }

    pub fn contacts(&self) -> &[Contact] {
        &self.contacts
    }

    pub fn flagged(&self) -> &[FlaggedEntry] {
        &self.flagged
    }

    pub fn masked_commitment(&self) -> Option<FieldElement> {
        self.masked
    }

    fn submit(&mut self, ledger: &mut Ledger, call: Call) -> OpResult {
        let nonce = ledger.next_nonce(&self.account(), 0);
        let op = UserOp::sign(&self.signing, nonce, call);
        ledger.handle_ops(vec![op]).remove(0)
    }

    /// Processes events since the last scan. Idempotent.
    pub fn scan(&mut self, ledger: &Ledger) {
        let events = &ledger.events()[self.cursor..];
        for e in events {
            match e.data() {
                EventData::NewCommitment {
                    commitment,
                    leaf_index,
                    ciphertext,
                } => {
                    if let Some(note) = try_open(&self.spend, &self.enc, &commitment, leaf_index, &ciphertext) {
                        self.notes.push(note);
                    }
                }
                EventData::NewNullifier { nullifier } => {
                    for n in self.notes.iter_mut().filter(|n| n.nullifier == nullifier) {
                        n.spent = true;
                    }
                }
                EventData::StatusFlagged {
                    masked,
                    bloom_hash,
                    smt_root,
                } => {
                    self.flagged.push(FlaggedEntry {
                        masked,
                        bloom_hash,
                        smt_root,
                    });
                    let root = self.smt.insert(smt_key(&masked), bloom_hash).ok();
                    debug_assert_eq!(root, Some(smt_root));
                }
                EventData::BootstrappedData {
                    masked_enc,
                    masked_enc_hash: hash,
                } if self.masked.is_none() => {
                    let opened = self
                        .enc
                        .decrypt(&masked_enc)
                        .ok()
                        .and_then(|b| FieldElement::from_be_slice(&b).ok())
                        .filter(|m| masked_enc_hash(&masked_enc, m) == hash);
                    if let Some(m) = opened {
                        self.masked = Some(m);
                        self.masked_enc = Some(masked_enc);
                    }
                }
                EventData::EncryptedBlob { blob, .. } => {
                    if let Some(c) = self.enc.decrypt(&blob).ok().and_then(|b| Contact::decode(&b).ok()) {
                        self.contacts.push(c);
                    }
                }
                _ => {}
            }
        }
        self.cursor = ledger.events().len();
    }

    // ---- deposits ----

    /// Sends the bootstrap request for a first deposit of `amount`.
    pub fn begin_bootstrap(&mut self, ledger: &mut Ledger, amount: u64) -> WalletResult<Commitment> {
        let note = Utxo::fresh(amount, self.spend.pk, BloomFilter::new(self.params), &mut self.rng);
        let c = commit(&note);
        let proof = self.backend.prove(
            &Statement::BootstrapDepositor(DepositorPublic { commitment: c }),
            &Witness::BootstrapDepositor(DepositorWitness {
                note: note.note,
                sk: self.spend.sk,
            }),
        )?;
        self.submit(
            ledger,
            Call::BootstrapInit {
                commitment_proof: proof,
                depositor_enc: self.enc.public,
            },
        )?;
        self.bootstrap_note = Some(note);
        Ok(c)
    }

    /// Full deposit. The first call bootstraps, asking `authority` (when
    /// given) to answer in-process; later calls reuse the stored `Ĉ`.
    pub fn deposit_flow(&mut self, ledger: &mut Ledger, authority: Option<&mut Authority>, amount: u64) -> WalletResult<Receipt> {
        if amount == 0 {
            return Err(WalletError::ZeroAmount);
        }
        self.scan(ledger);
        if self.masked.is_none() {
            if ledger.bootstrap_state(&self.account()).is_none() {
                self.begin_bootstrap(ledger, amount)?;
            }
            if let Some(a) = authority {
                a.serve_bootstrap(ledger);
            }
            self.scan(ledger);
        }
        self.finish_deposit(ledger, amount)
    }

    pub fn finish_deposit(&mut self, ledger: &mut Ledger, amount: u64) -> WalletResult<Receipt> {
        self.scan(ledger);
        let (Some(masked), Some(masked_enc)) = (self.masked, self.masked_enc.clone()) else {
            return Err(WalletError::AwaitingBootstrap);
        };
        let chain = encode_single(&masked, &self.params);
        let first = match ledger.bootstrap_state(&self.account()) {
            Some(BootstrapState::Requested(_)) => {
                let note = self.bootstrap_note.clone().ok_or(WalletError::AwaitingBootstrap)?;
                if note.amount() != amount {
                    return Err(WalletError::BootstrapAmountMismatch(note.amount()));
                }
                Utxo {
                    chain_state: chain.clone(),
                    ..note
                }
            }
            _ => Utxo::fresh(amount, self.spend.pk, chain.clone(), &mut self.rng),
        };
        let pad = Utxo::fresh(0, self.spend.pk, chain.clone(), &mut self.rng);
        let inputs = pad_inputs(vec![], self.spend.sk, self.params, &mut self.rng)?;
        let me = self.enc.public;
        let root = ledger.commitment_tree().root();
        let (tx, witness, _) = build_joinsplit(&inputs, [first, pad], amount as i64, [&me, &me], root, &mut self.rng)?;
        let joinsplit = self.prove_joinsplit(&tx, witness, None)?;
        let deposit_proof = self.backend.prove(
            &Statement::DepositFinal(DepositFinalPublic {
                masked_enc_hash: masked_enc_hash(&masked_enc, &masked),
                chain_state_hash: chain.field_hash(),
                tx_context: tx.tx_context,
            }),
            &Witness::DepositFinal(DepositFinalWitness {
                masked_enc,
                masked,
                chain_state: chain,
            }),
        )?;
        let receipt = self.submit(
            ledger,
            Call::Deposit {
                tx,
                deposit_proof,
                joinsplit_proof: joinsplit,
            },
        )?;
        self.bootstrap_note = None;
        self.scan(ledger);
        Ok(receipt)
    }

    // ---- spending ----

    /// Largest-first over allowed notes, ties by leaf index. Reports why
    /// when only pending or illicit notes would cover the amount.
    pub fn select_inputs(&self, ledger: &Ledger, amount: u64) -> WalletResult<Vec<OwnedNote>> {
        let mut allowed = Vec::new();
        let (mut pending, mut illicit) = (0u64, 0u64);
        for n in self.unspent().filter(|n| n.amount() > 0) {
            match n.status(ledger) {
                ComplianceStatus::Allowed => allowed.push(n.clone()),
                ComplianceStatus::Pending => pending += n.amount(),
                ComplianceStatus::Illicit => illicit += n.amount(),
            }
        }
        allowed.sort_by(|a, b| b.amount().cmp(&a.amount()).then(a.leaf_index.cmp(&b.leaf_index)));
        let mut picked = Vec::new();
        let mut sum = 0u64;
        for n in allowed {
            if sum >= amount {
                break;
            }
            sum += n.amount();
            picked.push(n);
        }
        if sum < amount {
            return Err(if sum + pending >= amount {
                WalletError::PendingCompliance
            } else if sum + pending + illicit >= amount {
                WalletError::IllicitInput
            } else {
                WalletError::InsufficientFunds {
                    available: sum,
                    needed: amount,
                }
            });
        }
        if arity_for(picked.len()).is_none() {
            return Err(WalletError::TooManyInputs);
        }
        Ok(picked)
    }

    fn prove_joinsplit(
        &self,
        tx: &JoinSplitTx,
        witness: shieldpool_core::utxo::JoinSplitWitness,
        output_lock: Option<FieldElement>,
    ) -> WalletResult<Proof> {
        let statement = Statement::JoinSplit(JoinSplitPublic {
            merkle_root: tx.merkle_root,
            nullifiers: tx.input_nullifiers.clone(),
            output_commitments: tx.output_commitments.clone(),
            public_amount: tx.public_amount,
            tx_context: tx.tx_context,
            output_lock,
        });
        Ok(self.backend.prove(&statement, &Witness::JoinSplit(witness))?)
    }

    /// Builds the JoinSplit and, unless `output_lock` is set, the innocence
    /// and ancestral-compliance proofs over the wallet's flagged cache.
    fn build_spend(
        &mut self,
        ledger: &Ledger,
        notes: &[OwnedNote],
        outputs: [Utxo; 2],
        recipients: [EncPublicKey; 2],
        public_amount: i64,
        output_lock: Option<FieldElement>,
    ) -> WalletResult<SpendBundle> {
        let tree = ledger.commitment_tree();
        let real: Vec<SpendInput> = notes
            .iter()
            .map(|n| SpendInput {
                utxo: n.utxo.clone(),
                path: Some(tree.prove(n.leaf_index).expect("note is in the tree")),
                sk: n.sk,
            })
            .collect();
        let inputs = pad_inputs(real, self.spend.sk, self.params, &mut self.rng)?;
        let (tx, witness, outs) =
            build_joinsplit(&inputs, outputs, public_amount, [&recipients[0], &recipients[1]], tree.root(), &mut self.rng)?;

        let mut poi = None;
        let mut acc = Vec::new();
        if output_lock.is_none() {
            for n in notes {
                match n.status(ledger) {
                    ComplianceStatus::Allowed => {}
                    ComplianceStatus::Pending => return Err(WalletError::PendingCompliance),
                    ComplianceStatus::Illicit => return Err(WalletError::IllicitInput),
                }
            }
            let merged = &outs[0].chain_state;
            for f in &self.flagged {
                let target = encode_single(&f.masked, &self.params);
                if exclusion_check(merged, &target).map_err(UtxoError::from)? != Exclusion::CertainlyExcluded {
                    return Err(WalletError::TaintedLineage(f.masked));
                }
            }
            let volume = ledger.volume();
            if merge_capacity_check(merged, &self.params, &self.rate, volume) == Capacity::OverLimit {
                return Err(WalletError::RateLimited {
                    count: merged.estimated_count(),
                    max: shieldpool_core::bloom::rate_limit_max(&self.params, &self.rate, volume),
                });
            }

            let poi_tree = ledger.poi_tree();
            let poi_inputs = witness
                .inputs
                .iter()
                .map(|i| InputWitness {
                    path: i.path.as_ref().map(|_| poi_tree.prove(i.leaf_index).expect("status checked")),
                    ..i.clone()
                })
                .collect();
            poi = Some(self.backend.prove(
                &Statement::Poi(PoiPublic {
                    poi_root: poi_tree.root(),
                    nullifiers: tx.input_nullifiers.clone(),
                    tx_context: tx.tx_context,
                }),
                &Witness::Poi(PoiWitness { inputs: poi_inputs }),
            )?);

            let parents: Vec<BloomFilter> = notes.iter().map(|n| n.utxo.chain_state.clone()).collect();
            for f in &self.flagged {
                let statement = Statement::Acc(AccPublic {
                    smt_root: self.smt.root(),
                    flagged: f.masked,
                    chain_state_hash: merged.field_hash(),
                    tx_context: tx.tx_context,
                    flagged_count: self.flagged.len() as u64,
                });
                let witness = Witness::Acc(AccWitness {
                    parents: parents.clone(),
                    merged: merged.clone(),
                    target: encode_single(&f.masked, &self.params),
                    smt_proof: self.smt.prove(&smt_key(&f.masked)),
                });
                acc.push(self.backend.prove(&statement, &witness)?);
            }
        }
        let joinsplit = self.prove_joinsplit(&tx, witness, output_lock)?;
        Ok(SpendBundle { tx, joinsplit, poi, acc })
    }

    fn mark_spent(&mut self, notes: &[OwnedNote]) {
        for n in self.notes.iter_mut() {
            if notes.iter().any(|s| s.nullifier == n.nullifier) {
                n.spent = true;
            }
        }
    }

    /// Pays `amount` to `to`, change back to self.
    pub fn transfer(&mut self, ledger: &mut Ledger, to: &Recipient, amount: u64) -> WalletResult<Receipt> {
        if amount == 0 {
            return Err(WalletError::ZeroAmount);
        }
        self.scan(ledger);
        let notes = self.select_inputs(ledger, amount)?;
        let total: u64 = notes.iter().map(OwnedNote::amount).sum();
        let outputs = [
            Utxo::fresh(amount, to.spend_pk, BloomFilter::new(self.params), &mut self.rng),
            Utxo::fresh(total - amount, self.spend.pk, BloomFilter::new(self.params), &mut self.rng),
        ];
        let bundle = self.build_spend(ledger, &notes, outputs, [to.enc_pk, self.enc.public], 0, None)?;
        let receipt = self.submit(
            ledger,
            Call::Transact {
                tx: bundle.tx,
                acc_proofs: bundle.acc,
                poi_proof: bundle.poi,
                joinsplit_proof: bundle.joinsplit,
                output_lock: None,
            },
        )?;
        self.mark_spent(&notes);
        Ok(receipt)
    }

    /// Transfer to a registered account.
    pub fn transfer_to_account(&mut self, ledger: &mut Ledger, account: &AccountId, amount: u64) -> WalletResult<Receipt> {
        let to = Recipient::lookup(ledger, account).ok_or(WalletError::UnknownRecipient)?;
        self.transfer(ledger, &to, amount)
    }

    /// Leaves the pool to an external address.
    pub fn withdraw(&mut self, ledger: &mut Ledger, amount: u64, external: &str) -> WalletResult<Receipt> {
        if amount == 0 {
            return Err(WalletError::ZeroAmount);
        }
        self.scan(ledger);
        let notes = self.select_inputs(ledger, amount)?;
        let total: u64 = notes.iter().map(OwnedNote::amount).sum();
        let outputs = [
            Utxo::fresh(total - amount, self.spend.pk, BloomFilter::new(self.params), &mut self.rng),
            Utxo::fresh(0, self.spend.pk, BloomFilter::new(self.params), &mut self.rng),
        ];
        let me = self.enc.public;
        let bundle = self.build_spend(ledger, &notes, outputs, [me, me], -(amount as i64), None)?;
        let receipt = self.submit(
            ledger,
            Call::Withdraw {
                tx: bundle.tx,
                acc_proofs: bundle.acc,
                poi_proof: bundle.poi.expect("compliance proofs built"),
                joinsplit_proof: bundle.joinsplit,
                recipient: external.to_string(),
            },
        )?;
        self.mark_spent(&notes);
        Ok(receipt)
    }

    /// Spends exactly `notes` (any owner keys) into a fresh note for self.
    /// Does not consult the ledger's nullifier set first.
    pub fn sweep_notes(&mut self, ledger: &mut Ledger, notes: &[OwnedNote]) -> WalletResult<Receipt> {
        if arity_for(notes.len()).is_none() {
            return Err(WalletError::TooManyInputs);
        }
        let total: u64 = notes.iter().map(OwnedNote::amount).sum();
        let outputs = [
            Utxo::fresh(total, self.spend.pk, BloomFilter::new(self.params), &mut self.rng),
            Utxo::fresh(0, self.spend.pk, BloomFilter::new(self.params), &mut self.rng),
        ];
        let me = self.enc.public;
        let bundle = self.build_spend(ledger, notes, outputs, [me, me], 0, None)?;
        Ok(self.submit(
            ledger,
            Call::Transact {
                tx: bundle.tx,
                acc_proofs: bundle.acc,
                poi_proof: bundle.poi,
                joinsplit_proof: bundle.joinsplit,
                output_lock: None,
            },
        )?)
    }

    /// Unspent valued notes that cannot leave through a compliant spend:
    /// illicit on the POI tree, or carrying a flagged deposit in lineage.
    pub fn remediable_notes(&self, ledger: &Ledger) -> Vec<OwnedNote> {
        self.unspent()
            .filter(|n| n.amount() > 0)
            .filter(|n| {
                n.status(ledger) == ComplianceStatus::Illicit
                    || self.flagged.iter().any(|f| {
                        let target = encode_single(&f.masked, &self.params);
                        exclusion_check(&n.utxo.chain_state, &target) != Ok(Exclusion::CertainlyExcluded)
                    })
            })
            .cloned()
            .collect()
    }

    /// Sends one note to the burn key or the treasury. Compliance proofs are
    /// waived for locked outputs; the event trace matches a transfer.
    pub fn burn_illicit(&mut self, ledger: &mut Ledger, leaf_index: u64, target: BurnTarget) -> WalletResult<Receipt> {
        self.scan(ledger);
        let note = self
            .unspent()
            .find(|n| n.leaf_index == leaf_index)
            .cloned()
            .ok_or(WalletError::UnknownNote(leaf_index))?;
        let (lock, enc_pk) = match target {
            BurnTarget::Burn => (burn_public_key(), EncKeypair::generate(&mut self.rng).public),
            BurnTarget::Treasury => {
                let pk = ledger.config().treasury_pk.ok_or(WalletError::NoTreasury)?;
                let enc = ledger
                    .users()
                    .find(|(_, u)| u.spend_pk == pk)
                    .map(|(_, u)| u.enc_pk)
                    .ok_or(WalletError::NoTreasury)?;
                (pk, enc)
            }
        };
        let outputs = [
            Utxo::fresh(note.amount(), lock, BloomFilter::new(self.params), &mut self.rng),
            Utxo::fresh(0, lock, BloomFilter::new(self.params), &mut self.rng),
        ];
        let notes = [note];
        let bundle = self.build_spend(ledger, &notes, outputs, [enc_pk, enc_pk], 0, Some(lock))?;
        let receipt = self.submit(
            ledger,
            Call::Transact {
                tx: bundle.tx,
                acc_proofs: vec![],
                poi_proof: None,
                joinsplit_proof: bundle.joinsplit,
                output_lock: Some(lock),
            },
        )?;
        self.mark_spent(&notes);
        Ok(receipt)
    }
}

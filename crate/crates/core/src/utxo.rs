//! Notes, commitments, nullifiers and JoinSplit transactions.

use std::collections::BTreeSet;

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bloom::{self, BloomError, BloomFilter, BloomParams};
use crate::crypto::{derive_public_key, encrypt, hash_n, hash_sequence, random_blinding, Ciphertext, EncPublicKey};
use crate::field::FieldElement;
use crate::merkle::MerklePath;

pub const SMALL_ARITY: usize = 2;
pub const LARGE_ARITY: usize = 16;
pub const OUTPUT_ARITY: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UtxoError {
    #[error("amount {0} does not fit in 64 bits")]
    AmountOutOfRange(u128),
    #[error("spend key does not match the note owner")]
    KeyMismatch,
    #[error("inputs {inputs} + public {public} != outputs {outputs}")]
    ValueImbalance { inputs: i128, public: i64, outputs: i128 },
    #[error("arity violation: {inputs} inputs, {outputs} outputs")]
    ArityViolation { inputs: usize, outputs: usize },
    #[error("input {0} has value but no membership path")]
    DummyWithValue(usize),
    #[error("malformed note plaintext: {0}")]
    MalformedPlaintext(String),
    #[error(transparent)]
    Bloom(#[from] BloomError),
}

/// Commitment preimage: `C = H(amount, owner_pk, blinding)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Note {
    pub amount: u64,
    pub owner_pk: FieldElement,
    pub blinding: FieldElement,
}

impl Note {
    pub fn commitment(&self) -> Commitment {
        Commitment(hash_n([FieldElement::from_u64(self.amount), self.owner_pk, self.blinding]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Commitment(pub FieldElement);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Nullifier(pub FieldElement);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Utxo {
    pub note: Note,
    pub chain_state: BloomFilter,
    pub leaf_index: Option<u64>,
}

impl Utxo {
    pub fn new(amount: u128, owner_pk: FieldElement, blinding: FieldElement, chain_state: BloomFilter) -> Result<Self, UtxoError> {
        let amount = u64::try_from(amount).map_err(|_| UtxoError::AmountOutOfRange(amount))?;
        Ok(Utxo {
            note: Note {
                amount,
                owner_pk,
                blinding,
            },
            chain_state,
            leaf_index: None,
        })
    }

    pub fn fresh<R: RngCore + ?Sized>(amount: u64, owner_pk: FieldElement, chain_state: BloomFilter, rng: &mut R) -> Self {
        Utxo {
            note: Note {
                amount,
                owner_pk,
                blinding: random_blinding(rng),
            },
            chain_state,
            leaf_index: None,
        }
    }

    pub fn amount(&self) -> u64 {
        self.note.amount
    }

    /// `amount(8) ∥ blinding(32) ∥ bloom serialization`.
    pub fn to_plaintext(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + BloomFilter::encoded_len(self.chain_state.params()));
        out.extend_from_slice(&self.note.amount.to_be_bytes());
        out.extend_from_slice(&self.note.blinding.to_be_bytes());
        out.extend_from_slice(&self.chain_state.to_bytes());
        out
    }

    /// The owner key is not part of the payload; the recipient supplies its own.
    pub fn from_plaintext(bytes: &[u8], owner_pk: FieldElement) -> Result<Self, UtxoError> {
        if bytes.len() < 40 {
            return Err(UtxoError::MalformedPlaintext("short payload".into()));
        }
        let amount = u64::from_be_bytes(bytes[..8].try_into().expect("8"));
        let blinding = FieldElement::from_be_slice(&bytes[8..40])
            .map_err(|e| UtxoError::MalformedPlaintext(e.to_string()))?;
        let chain_state = BloomFilter::from_bytes(&bytes[40..])?;
        Ok(Utxo {
            note: Note {
                amount,
                owner_pk,
                blinding,
            },
            chain_state,
            leaf_index: None,
        })
    }
}

pub fn commit(utxo: &Utxo) -> Commitment {
    utxo.note.commitment()
}

/// `N = H(C, idx, H(sk, C, idx))`; the inner keyed hash stands in for the
/// spend signature.
pub fn nullifier_for(commitment: &Commitment, leaf_index: u64, sk: &FieldElement) -> Nullifier {
    let idx = FieldElement::from_u64(leaf_index);
    let auth = hash_n([*sk, commitment.0, idx]);
    Nullifier(hash_n([commitment.0, idx, auth]))
}

pub fn derive_nullifier(utxo: &Utxo, leaf_index: u64, sk: &FieldElement) -> Result<Nullifier, UtxoError> {
    if derive_public_key(sk) != utxo.note.owner_pk {
        return Err(UtxoError::KeyMismatch);
    }
    Ok(nullifier_for(&commit(utxo), leaf_index, sk))
}

/// `H(root ∥ inputNullifiers ∥ outputCommitments ∥ publicAmount)`.
pub fn tx_context_hash(
    merkle_root: &FieldElement,
    input_nullifiers: &[Nullifier],
    output_commitments: &[Commitment],
    public_amount: i64,
) -> FieldElement {
    let mut items = Vec::with_capacity(2 + input_nullifiers.len() + output_commitments.len());
    items.push(*merkle_root);
    items.extend(input_nullifiers.iter().map(|n| n.0));
    items.extend(output_commitments.iter().map(|c| c.0));
    items.push(FieldElement::from_i64(public_amount));
    hash_sequence(&items)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinSplitTx {
    pub input_nullifiers: Vec<Nullifier>,
    pub output_commitments: Vec<Commitment>,
    pub public_amount: i64,
    pub merkle_root: FieldElement,
    pub encrypted_outputs: Vec<Ciphertext>,
    pub tx_context: FieldElement,
}

impl JoinSplitTx {
    pub fn expected_context(&self) -> FieldElement {
        tx_context_hash(
            &self.merkle_root,
            &self.input_nullifiers,
            &self.output_commitments,
            self.public_amount,
        )
    }

    /// `root ∥ n_in(4) ∥ nullifiers ∥ n_out(4) ∥ commitments ∥ public(8) ∥
    /// n_ct(4) ∥ (len(4) ∥ ct)* ∥ tx_context`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&self.merkle_root.to_be_bytes());
        out.extend_from_slice(&(self.input_nullifiers.len() as u32).to_be_bytes());
        for n in &self.input_nullifiers {
            out.extend_from_slice(&n.0.to_be_bytes());
        }
        out.extend_from_slice(&(self.output_commitments.len() as u32).to_be_bytes());
        for c in &self.output_commitments {
            out.extend_from_slice(&c.0.to_be_bytes());
        }
        out.extend_from_slice(&self.public_amount.to_be_bytes());
        out.extend_from_slice(&(self.encrypted_outputs.len() as u32).to_be_bytes());
        for ct in &self.encrypted_outputs {
            out.extend_from_slice(&ct.to_length_prefixed());
        }
        out.extend_from_slice(&self.tx_context.to_be_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, String> {
        let mut r = crate::codec::Reader::new(bytes);
        let merkle_root = r.field()?;
        let n_in = r.u32()? as usize;
        let input_nullifiers = (0..n_in).map(|_| r.field().map(Nullifier)).collect::<Result<_, _>>()?;
        let n_out = r.u32()? as usize;
        let output_commitments = (0..n_out).map(|_| r.field().map(Commitment)).collect::<Result<_, _>>()?;
        let public_amount = i64::from_be_bytes(r.array::<8>()?);
        let n_ct = r.u32()? as usize;
        let encrypted_outputs = (0..n_ct).map(|_| r.prefixed().map(|b| Ciphertext(b.to_vec()))).collect::<Result<_, _>>()?;
        let tx_context = r.field()?;
        r.finish()?;
        Ok(JoinSplitTx {
            input_nullifiers,
            output_commitments,
            public_amount,
            merkle_root,
            encrypted_outputs,
            tx_context,
        })
    }
}

/// One spent note as the prover sees it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputWitness {
    pub note: Note,
    pub sk: FieldElement,
    pub leaf_index: u64,
    /// `None` for zero-value padding inputs.
    pub path: Option<MerklePath>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinSplitWitness {
    pub inputs: Vec<InputWitness>,
    pub outputs: Vec<Note>,
}

/// A note to spend: the UTXO, its membership path and the owner's key.
#[derive(Debug, Clone)]
pub struct SpendInput {
    pub utxo: Utxo,
    pub path: Option<MerklePath>,
    pub sk: FieldElement,
}

impl SpendInput {
    pub fn dummy<R: RngCore + ?Sized>(sk: FieldElement, params: BloomParams, rng: &mut R) -> Self {
        SpendInput {
            utxo: Utxo::fresh(0, derive_public_key(&sk), BloomFilter::new(params), rng),
            path: None,
            sk,
        }
    }

    fn is_real(&self) -> bool {
        self.path.is_some()
    }
}

/// Smallest admissible arity for `n` real inputs.
pub fn arity_for(n: usize) -> Option<usize> {
    match n {
        0..=SMALL_ARITY => Some(SMALL_ARITY),
        3..=LARGE_ARITY => Some(LARGE_ARITY),
        _ => None,
    }
}

/// Pads real inputs with dummies owned by `sk` up to arity 2 or 16.
pub fn pad_inputs<R: RngCore + ?Sized>(
    mut real: Vec<SpendInput>,
    sk: FieldElement,
    params: BloomParams,
    rng: &mut R,
) -> Result<Vec<SpendInput>, UtxoError> {
    let target = arity_for(real.len()).ok_or(UtxoError::ArityViolation {
        inputs: real.len(),
        outputs: OUTPUT_ARITY,
    })?;
    while real.len() < target {
        real.push(SpendInput::dummy(sk, params, rng));
    }
    Ok(real)
}

/// Assembles the transaction and its witness.
///
/// When any real input is present both outputs receive the union of the real
/// inputs' chain states; otherwise (deposits) the outputs keep the chain
/// state the caller set.
pub fn build_joinsplit<R: RngCore + CryptoRng + ?Sized>(
    inputs: &[SpendInput],
    mut outputs: [Utxo; 2],
    public_amount: i64,
    recipients: [&EncPublicKey; 2],
    merkle_root: FieldElement,
    rng: &mut R,
) -> Result<(JoinSplitTx, JoinSplitWitness, [Utxo; 2]), UtxoError> {
    if inputs.len() != SMALL_ARITY && inputs.len() != LARGE_ARITY {
        return Err(UtxoError::ArityViolation {
            inputs: inputs.len(),
            outputs: OUTPUT_ARITY,
        });
    }
    for (i, input) in inputs.iter().enumerate() {
        if !input.is_real() && input.utxo.amount() != 0 {
            return Err(UtxoError::DummyWithValue(i));
        }
        if derive_public_key(&input.sk) != input.utxo.note.owner_pk {
            return Err(UtxoError::KeyMismatch);
        }
    }
    let in_sum: i128 = inputs.iter().map(|i| i.utxo.amount() as i128).sum();
    let out_sum: i128 = outputs.iter().map(|o| o.amount() as i128).sum();
    if in_sum + public_amount as i128 != out_sum {
        return Err(UtxoError::ValueImbalance {
            inputs: in_sum,
            public: public_amount,
            outputs: out_sum,
        });
    }

    let real: Vec<&BloomFilter> = inputs.iter().filter(|i| i.is_real()).map(|i| &i.utxo.chain_state).collect();
    if !real.is_empty() {
        let merged = bloom::union(&real)?;
        for o in outputs.iter_mut() {
            o.chain_state = merged.clone();
        }
    }

    let mut nullifiers = Vec::with_capacity(inputs.len());
    let mut input_witnesses = Vec::with_capacity(inputs.len());
    for input in inputs {
        let leaf_index = input.path.as_ref().map(|p| p.leaf_index).unwrap_or(0);
        nullifiers.push(nullifier_for(&commit(&input.utxo), leaf_index, &input.sk));
        input_witnesses.push(InputWitness {
            note: input.utxo.note,
            sk: input.sk,
            leaf_index,
            path: input.path.clone(),
        });
    }
    let output_commitments: Vec<Commitment> = outputs.iter().map(commit).collect();
    let encrypted_outputs = outputs
        .iter()
        .zip(recipients)
        .map(|(o, pk)| encrypt(pk, &o.to_plaintext(), rng))
        .collect();
    let tx_context = tx_context_hash(&merkle_root, &nullifiers, &output_commitments, public_amount);
    let tx = JoinSplitTx {
        input_nullifiers: nullifiers,
        output_commitments,
        public_amount,
        merkle_root,
        encrypted_outputs,
        tx_context,
    };
    let witness = JoinSplitWitness {
        inputs: input_witnesses,
        outputs: outputs.iter().map(|o| o.note).collect(),
    };
    Ok((tx, witness, outputs))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    StaleRoot,
    DoubleSpend(Nullifier),
    ArityViolation,
    ContextMismatch,
}

/// Structural checks only; proofs and compliance are checked elsewhere.
pub fn validate_joinsplit(
    tx: &JoinSplitTx,
    is_known_root: impl Fn(&FieldElement) -> bool,
    nullifier_set: &BTreeSet<Nullifier>,
) -> Result<(), Vec<Violation>> {
    let mut violations = Vec::new();
    let n_in = tx.input_nullifiers.len();
    if (n_in != SMALL_ARITY && n_in != LARGE_ARITY)
        || tx.output_commitments.len() != OUTPUT_ARITY
        || tx.encrypted_outputs.len() != OUTPUT_ARITY
    {
        violations.push(Violation::ArityViolation);
    }
    if !is_known_root(&tx.merkle_root) {
        violations.push(Violation::StaleRoot);
    }
    let mut seen = BTreeSet::new();
    for n in &tx.input_nullifiers {
        if nullifier_set.contains(n) || !seen.insert(*n) {
            violations.push(Violation::DoubleSpend(*n));
        }
    }
    if tx.expected_context() != tx.tx_context {
        violations.push(Violation::ContextMismatch);
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

//! Statements, their public-input vectors and the proof backend interface.

mod backend;
mod predicates;

pub use backend::{ProofBackend, TransparentBackend};
pub use predicates::*;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{put_prefixed, Reader};
use crate::crypto::{Ciphertext, EncPublicKey};
use crate::field::FieldElement;
use crate::utxo::{Commitment, JoinSplitWitness, Nullifier};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatementError {
    #[error("witness does not satisfy the {0:?} predicate")]
    WitnessUnsatisfied(StatementId),
    #[error("witness kind does not match statement {0:?}")]
    WitnessKindMismatch(StatementId),
    #[error("malformed proof: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum StatementId {
    JoinSplit = 0,
    BootstrapDepositor = 1,
    BootstrapAuthority = 2,
    DepositFinal = 3,
    Poi = 4,
    Acc = 5,
    Mask = 6,
}

impl StatementId {
    pub const ALL: [StatementId; 7] = [
        StatementId::JoinSplit,
        StatementId::BootstrapDepositor,
        StatementId::BootstrapAuthority,
        StatementId::DepositFinal,
        StatementId::Poi,
        StatementId::Acc,
        StatementId::Mask,
    ];

    pub fn from_byte(b: u8) -> Option<Self> {
        Self::ALL.get(b as usize).copied()
    }
}

/// A statement is its identifier plus its public inputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statement {
    JoinSplit(JoinSplitPublic),
    BootstrapDepositor(DepositorPublic),
    BootstrapAuthority(AuthorityPublic),
    DepositFinal(DepositFinalPublic),
    Poi(PoiPublic),
    Acc(AccPublic),
    Mask(MaskPublic),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Witness {
    JoinSplit(JoinSplitWitness),
    BootstrapDepositor(DepositorWitness),
    BootstrapAuthority(AuthorityWitness),
    DepositFinal(DepositFinalWitness),
    Poi(PoiWitness),
    Acc(AccWitness),
    Mask(MaskWitness),
}

fn concat_fields<'a>(items: impl Iterator<Item = &'a FieldElement>) -> Vec<u8> {
    items.flat_map(|f| f.to_be_bytes()).collect()
}

fn split_fields(bytes: &[u8]) -> Result<Vec<FieldElement>, String> {
    if bytes.len() % 32 != 0 {
        return Err("field list length not a multiple of 32".into());
    }
    bytes
        .chunks(32)
        .map(|c| FieldElement::from_be_slice(c).map_err(|e| e.to_string()))
        .collect()
}

fn one_field(bytes: &[u8]) -> Result<FieldElement, String> {
    FieldElement::from_be_slice(bytes).map_err(|e| e.to_string())
}

fn fixed<const N: usize>(bytes: &[u8]) -> Result<[u8; N], String> {
    bytes.try_into().map_err(|_| format!("expected {N} bytes, got {}", bytes.len()))
}

impl Statement {
    pub fn id(&self) -> StatementId {
        match self {
            Statement::JoinSplit(_) => StatementId::JoinSplit,
            Statement::BootstrapDepositor(_) => StatementId::BootstrapDepositor,
            Statement::BootstrapAuthority(_) => StatementId::BootstrapAuthority,
            Statement::DepositFinal(_) => StatementId::DepositFinal,
            Statement::Poi(_) => StatementId::Poi,
            Statement::Acc(_) => StatementId::Acc,
            Statement::Mask(_) => StatementId::Mask,
        }
    }

    /// The transaction context this statement is bound to, if any.
    pub fn tx_context(&self) -> Option<FieldElement> {
        match self {
            Statement::JoinSplit(p) => Some(p.tx_context),
            Statement::DepositFinal(p) => Some(p.tx_context),
            Statement::Poi(p) => Some(p.tx_context),
            Statement::Acc(p) => Some(p.tx_context),
            _ => None,
        }
    }

    pub fn evaluate(&self, witness: &Witness) -> Result<bool, StatementError> {
        Ok(match (self, witness) {
            (Statement::JoinSplit(p), Witness::JoinSplit(w)) => eval_joinsplit(p, w),
            (Statement::BootstrapDepositor(p), Witness::BootstrapDepositor(w)) => eval_bootstrap_depositor(p, w),
            (Statement::BootstrapAuthority(p), Witness::BootstrapAuthority(w)) => eval_bootstrap_authority(p, w),
            (Statement::DepositFinal(p), Witness::DepositFinal(w)) => eval_deposit_final(p, w),
            (Statement::Poi(p), Witness::Poi(w)) => eval_poi(p, w),
            (Statement::Acc(p), Witness::Acc(w)) => eval_acc(p, w),
            (Statement::Mask(p), Witness::Mask(w)) => eval_mask(p, w),
            _ => return Err(StatementError::WitnessKindMismatch(self.id())),
        })
    }

    /// Canonical encodings, one entry per public input. Lists of field
    /// elements are a single entry of concatenated 32-byte words.
    pub fn public_inputs(&self) -> Vec<Vec<u8>> {
        let f = |x: &FieldElement| x.to_be_bytes().to_vec();
        match self {
            Statement::JoinSplit(p) => vec![
                f(&p.merkle_root),
                concat_fields(p.nullifiers.iter().map(|n| &n.0)),
                concat_fields(p.output_commitments.iter().map(|c| &c.0)),
                p.public_amount.to_be_bytes().to_vec(),
                f(&p.tx_context),
                p.output_lock.map(|l| l.to_be_bytes().to_vec()).unwrap_or_default(),
            ],
            Statement::BootstrapDepositor(p) => vec![f(&p.commitment.0)],
            Statement::BootstrapAuthority(p) => vec![
                f(&p.bootstrap_root),
                p.recipient.0.to_vec(),
                p.masked_enc.0.clone(),
                p.masked_enc_hash.to_vec(),
            ],
            Statement::DepositFinal(p) => vec![
                p.masked_enc_hash.to_vec(),
                f(&p.chain_state_hash),
                f(&p.tx_context),
            ],
            Statement::Poi(p) => vec![
                f(&p.poi_root),
                concat_fields(p.nullifiers.iter().map(|n| &n.0)),
                f(&p.tx_context),
            ],
            Statement::Acc(p) => vec![
                f(&p.smt_root),
                f(&p.flagged),
                f(&p.chain_state_hash),
                f(&p.tx_context),
                p.flagged_count.to_be_bytes().to_vec(),
            ],
            Statement::Mask(p) => vec![f(&p.masked), f(&p.mixer_root)],
        }
    }

    pub fn from_public_inputs(id: StatementId, inputs: &[Vec<u8>]) -> Result<Self, String> {
        let expect = |n: usize| {
            if inputs.len() == n {
                Ok(())
            } else {
                Err(format!("{id:?} takes {n} public inputs, got {}", inputs.len()))
            }
        };
        Ok(match id {
            StatementId::JoinSplit => {
                expect(6)?;
                Statement::JoinSplit(JoinSplitPublic {
                    merkle_root: one_field(&inputs[0])?,
                    nullifiers: split_fields(&inputs[1])?.into_iter().map(Nullifier).collect(),
                    output_commitments: split_fields(&inputs[2])?.into_iter().map(Commitment).collect(),
                    public_amount: i64::from_be_bytes(fixed(&inputs[3])?),
                    tx_context: one_field(&inputs[4])?,
                    output_lock: if inputs[5].is_empty() {
                        None
                    } else {
                        Some(one_field(&inputs[5])?)
                    },
                })
            }
            StatementId::BootstrapDepositor => {
                expect(1)?;
                Statement::BootstrapDepositor(DepositorPublic {
                    commitment: Commitment(one_field(&inputs[0])?),
                })
            }
            StatementId::BootstrapAuthority => {
                expect(4)?;
                Statement::BootstrapAuthority(AuthorityPublic {
                    bootstrap_root: one_field(&inputs[0])?,
                    recipient: EncPublicKey(fixed(&inputs[1])?),
                    masked_enc: Ciphertext(inputs[2].clone()),
                    masked_enc_hash: fixed(&inputs[3])?,
                })
            }
            StatementId::DepositFinal => {
                expect(3)?;
                Statement::DepositFinal(DepositFinalPublic {
                    masked_enc_hash: fixed(&inputs[0])?,
                    chain_state_hash: one_field(&inputs[1])?,
                    tx_context: one_field(&inputs[2])?,
                })
            }
            StatementId::Poi => {
                expect(3)?;
                Statement::Poi(PoiPublic {
                    poi_root: one_field(&inputs[0])?,
                    nullifiers: split_fields(&inputs[1])?.into_iter().map(Nullifier).collect(),
                    tx_context: one_field(&inputs[2])?,
                })
            }
            StatementId::Acc => {
                expect(5)?;
                Statement::Acc(AccPublic {
                    smt_root: one_field(&inputs[0])?,
                    flagged: one_field(&inputs[1])?,
                    chain_state_hash: one_field(&inputs[2])?,
                    tx_context: one_field(&inputs[3])?,
                    flagged_count: u64::from_be_bytes(fixed(&inputs[4])?),
                })
            }
            StatementId::Mask => {
                expect(2)?;
                Statement::Mask(MaskPublic {
                    masked: one_field(&inputs[0])?,
                    mixer_root: one_field(&inputs[1])?,
                })
            }
        })
    }

    /// `n(4) ∥ (len(4) ∥ input)*`.
    pub fn encode_public_inputs(&self) -> Vec<u8> {
        let inputs = self.public_inputs();
        let mut out = Vec::new();
        out.extend_from_slice(&(inputs.len() as u32).to_be_bytes());
        for i in &inputs {
            put_prefixed(&mut out, i);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proof {
    pub statement: Statement,
    pub attestation: Vec<u8>,
}

impl Proof {
    pub fn id(&self) -> StatementId {
        self.statement.id()
    }

    /// Transaction context bound by this proof; zero for statements that
    /// carry none.
    pub fn context(&self) -> FieldElement {
        self.statement.tx_context().unwrap_or(FieldElement::ZERO)
    }

    /// `id(1) ∥ public inputs ∥ attestation`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![self.id() as u8];
        out.extend_from_slice(&self.statement.encode_public_inputs());
        out.extend_from_slice(&self.attestation);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StatementError> {
        let bad = StatementError::Malformed;
        let mut r = Reader::new(bytes);
        let id = StatementId::from_byte(r.u8().map_err(bad)?).ok_or(bad("unknown statement id".into()))?;
        let n = r.u32().map_err(bad)? as usize;
        let inputs = (0..n)
            .map(|_| r.prefixed().map(<[u8]>::to_vec))
            .collect::<Result<Vec<_>, _>>()
            .map_err(bad)?;
        let statement = Statement::from_public_inputs(id, &inputs).map_err(bad)?;
        let attestation = r.take(r.remaining()).map_err(bad)?.to_vec();
        Ok(Proof { statement, attestation })
    }
}

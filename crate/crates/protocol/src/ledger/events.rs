//! Event kinds and their fixed payload layouts.

use serde::{Deserialize, Serialize};

use shieldpool_core::codec::{put_prefixed, Reader};
use shieldpool_core::crypto::{Ciphertext, EncPublicKey};
use shieldpool_core::utxo::{Commitment, Nullifier};
use shieldpool_core::FieldElement;

use super::AccountId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EventKind {
    BootstrapInit,
    BootstrappedData,
    NewCommitment,
    NewNullifier,
    StatusFlagged,
    UserRegistered,
    EncryptedBlob,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub kind: EventKind,
    pub payload: Vec<u8>,
    pub block: u64,
}

/// Decoded payloads.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventData {
    /// `C(32) ∥ pk_D(32)`
    BootstrapInit { commitment: Commitment, depositor_enc: EncPublicKey },
    /// `len(4) ∥ Ĉ_enc ∥ Ĉ_enc_hash(32)`
    BootstrappedData { masked_enc: Ciphertext, masked_enc_hash: [u8; 32] },
    /// `commitment(32) ∥ leaf_index(8) ∥ len(4) ∥ ct`
    NewCommitment { commitment: Commitment, leaf_index: u64, ciphertext: Ciphertext },
    /// `nullifier(32)`
    NewNullifier { nullifier: Nullifier },
    /// `Ĉ(32) ∥ bloom_hash(32) ∥ smt_root(32)`
    StatusFlagged { masked: FieldElement, bloom_hash: FieldElement, smt_root: FieldElement },
    /// `account(32) ∥ spend_pk(32) ∥ enc_pk(32) ∥ len(4) ∥ address`
    UserRegistered { account: AccountId, spend_pk: FieldElement, enc_pk: EncPublicKey, address: String },
    /// `account(32) ∥ len(4) ∥ ct`
    EncryptedBlob { account: AccountId, blob: Ciphertext },
}

impl EventData {
    pub fn kind(&self) -> EventKind {
        match self {
            EventData::BootstrapInit { .. } => EventKind::BootstrapInit,
            EventData::BootstrappedData { .. } => EventKind::BootstrappedData,
            EventData::NewCommitment { .. } => EventKind::NewCommitment,
            EventData::NewNullifier { .. } => EventKind::NewNullifier,
            EventData::StatusFlagged { .. } => EventKind::StatusFlagged,
            EventData::UserRegistered { .. } => EventKind::UserRegistered,
            EventData::EncryptedBlob { .. } => EventKind::EncryptedBlob,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            EventData::BootstrapInit { commitment, depositor_enc } => {
                out.extend_from_slice(&commitment.0.to_be_bytes());
                out.extend_from_slice(&depositor_enc.0);
            }
            EventData::BootstrappedData { masked_enc, masked_enc_hash } => {
                put_prefixed(&mut out, masked_enc.as_bytes());
                out.extend_from_slice(masked_enc_hash);
            }
            EventData::NewCommitment { commitment, leaf_index, ciphertext } => {
                out.extend_from_slice(&commitment.0.to_be_bytes());
                out.extend_from_slice(&leaf_index.to_be_bytes());
                put_prefixed(&mut out, ciphertext.as_bytes());
            }
            EventData::NewNullifier { nullifier } => out.extend_from_slice(&nullifier.0.to_be_bytes()),
            EventData::StatusFlagged { masked, bloom_hash, smt_root } => {
                out.extend_from_slice(&masked.to_be_bytes());
                out.extend_from_slice(&bloom_hash.to_be_bytes());
                out.extend_from_slice(&smt_root.to_be_bytes());
            }
            EventData::UserRegistered { account, spend_pk, enc_pk, address } => {
                out.extend_from_slice(&account.0);
                out.extend_from_slice(&spend_pk.to_be_bytes());
                out.extend_from_slice(&enc_pk.0);
                put_prefixed(&mut out, address.as_bytes());
            }
            EventData::EncryptedBlob { account, blob } => {
                out.extend_from_slice(&account.0);
                put_prefixed(&mut out, blob.as_bytes());
            }
        }
        out
    }

    pub fn decode(kind: EventKind, payload: &[u8]) -> Result<Self, String> {
        let mut r = Reader::new(payload);
        let data = match kind {
            EventKind::BootstrapInit => EventData::BootstrapInit {
                commitment: Commitment(r.field()?),
                depositor_enc: EncPublicKey(r.array()?),
            },
            EventKind::BootstrappedData => EventData::BootstrappedData {
                masked_enc: Ciphertext(r.prefixed()?.to_vec()),
                masked_enc_hash: r.array()?,
            },
            EventKind::NewCommitment => EventData::NewCommitment {
                commitment: Commitment(r.field()?),
                leaf_index: r.u64()?,
                ciphertext: Ciphertext(r.prefixed()?.to_vec()),
            },
            EventKind::NewNullifier => EventData::NewNullifier {
                nullifier: Nullifier(r.field()?),
            },
            EventKind::StatusFlagged => EventData::StatusFlagged {
                masked: r.field()?,
                bloom_hash: r.field()?,
                smt_root: r.field()?,
            },
            EventKind::UserRegistered => EventData::UserRegistered {
                account: AccountId(r.array()?),
                spend_pk: r.field()?,
                enc_pk: EncPublicKey(r.array()?),
                address: String::from_utf8(r.prefixed()?.to_vec()).map_err(|e| e.to_string())?,
            },
            EventKind::EncryptedBlob => EventData::EncryptedBlob {
                account: AccountId(r.array()?),
                blob: Ciphertext(r.prefixed()?.to_vec()),
            },
        };
        r.finish()?;
        Ok(data)
    }
}

impl Event {
    pub fn data(&self) -> EventData {
        EventData::decode(self.kind, &self.payload).expect("ledger only emits well-formed payloads")
    }
}

//! Pure predicates over (public inputs, witness).

use serde::{Deserialize, Serialize};

use crate::bloom::{encode_single, exclusion_check, union, BloomFilter, Exclusion};
use crate::crypto::{derive_public_key, encrypt_with, hash_n, sha256, Ciphertext, EncPublicKey, EncRandomness};
use crate::field::FieldElement;
use crate::merkle::{verify_path, MerklePath};
use crate::smt::{smt_verify, SmtProof};
use crate::utxo::{nullifier_for, tx_context_hash, Commitment, InputWitness, JoinSplitWitness, Note, Nullifier};

/// Leaf status inside the proof-of-innocence tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PoiStatus {
    Illicit = 0,
    Allowed = 1,
}

pub fn poi_leaf(commitment: &Commitment, status: PoiStatus) -> FieldElement {
    hash_n([commitment.0, FieldElement::from_u64(status as u64)])
}

/// `Ĉ = H(C, b)`.
pub fn mask_commitment(commitment: &Commitment, blinding: &FieldElement) -> FieldElement {
    hash_n([commitment.0, *blinding])
}

/// Byte-level binding of the encrypted masked commitment to its plaintext.
pub fn masked_enc_hash(masked_enc: &Ciphertext, masked: &FieldElement) -> [u8; 32] {
    sha256(&[masked_enc.as_bytes(), &masked.to_be_bytes()])
}

pub fn smt_key(masked: &FieldElement) -> [u8; 32] {
    masked.to_be_bytes()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JoinSplitPublic {
    pub merkle_root: FieldElement,
    pub nullifiers: Vec<Nullifier>,
    pub output_commitments: Vec<Commitment>,
    pub public_amount: i64,
    pub tx_context: FieldElement,
    /// When set, every output must be owned by this key (burn or treasury).
    pub output_lock: Option<FieldElement>,
}

pub fn eval_joinsplit(public: &JoinSplitPublic, witness: &JoinSplitWitness) -> bool {
    if public.nullifiers.len() != witness.inputs.len() || public.output_commitments.len() != witness.outputs.len() {
        return false;
    }
    let mut in_sum: i128 = 0;
    for (input, nullifier) in witness.inputs.iter().zip(&public.nullifiers) {
        if derive_public_key(&input.sk) != input.note.owner_pk {
            return false;
        }
        let c = input.note.commitment();
        match &input.path {
            Some(path) => {
                if path.leaf_index != input.leaf_index || !verify_path(&public.merkle_root, &c.0, path) {
                    return false;
                }
            }
            None => {
                if input.note.amount != 0 {
                    return false;
                }
            }
        }
        if nullifier_for(&c, input.leaf_index, &input.sk) != *nullifier {
            return false;
        }
        in_sum += input.note.amount as i128;
    }
    // value enters through the public amount only when every input is empty
    if public.public_amount > 0 && in_sum != 0 {
        return false;
    }
    let mut out_sum: i128 = 0;
    for (note, commitment) in witness.outputs.iter().zip(&public.output_commitments) {
        if note.commitment() != *commitment {
            return false;
        }
        if let Some(lock) = &public.output_lock {
            if note.owner_pk != *lock {
                return false;
            }
        }
        out_sum += note.amount as i128;
    }
    in_sum + public.public_amount as i128 == out_sum
        && tx_context_hash(
            &public.merkle_root,
            &public.nullifiers,
            &public.output_commitments,
            public.public_amount,
        ) == public.tx_context
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepositorPublic {
    pub commitment: Commitment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepositorWitness {
    pub note: Note,
    pub sk: FieldElement,
}

/// The depositor knows the opening of `C` and owns it.
pub fn eval_bootstrap_depositor(public: &DepositorPublic, witness: &DepositorWitness) -> bool {
    witness.note.commitment() == public.commitment && derive_public_key(&witness.sk) == witness.note.owner_pk
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorityPublic {
    pub bootstrap_root: FieldElement,
    pub recipient: EncPublicKey,
    pub masked_enc: Ciphertext,
    pub masked_enc_hash: [u8; 32],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuthorityWitness {
    pub commitment: Commitment,
    pub path: MerklePath,
    pub blinding: FieldElement,
    pub masked: FieldElement,
    pub randomness: EncRandomness,
}

/// `C` is in the bootstrap tree, `Ĉ = H(C, b)`, `Ĉ_enc` is the encryption of
/// `Ĉ` under the witnessed randomness and the hash binds both.
pub fn eval_bootstrap_authority(public: &AuthorityPublic, witness: &AuthorityWitness) -> bool {
    verify_path(&public.bootstrap_root, &witness.commitment.0, &witness.path)
        && mask_commitment(&witness.commitment, &witness.blinding) == witness.masked
        && encrypt_with(&public.recipient, &witness.masked.to_be_bytes(), &witness.randomness) == public.masked_enc
        && masked_enc_hash(&public.masked_enc, &witness.masked) == public.masked_enc_hash
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepositFinalPublic {
    pub masked_enc_hash: [u8; 32],
    /// Field hash of the deposit's chain-state filter.
    pub chain_state_hash: FieldElement,
    pub tx_context: FieldElement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DepositFinalWitness {
    pub masked_enc: Ciphertext,
    pub masked: FieldElement,
    pub chain_state: BloomFilter,
}

pub fn eval_deposit_final(public: &DepositFinalPublic, witness: &DepositFinalWitness) -> bool {
    masked_enc_hash(&witness.masked_enc, &witness.masked) == public.masked_enc_hash
        && witness.chain_state.field_hash() == public.chain_state_hash
        && witness.chain_state == encode_single(&witness.masked, witness.chain_state.params())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoiPublic {
    pub poi_root: FieldElement,
    pub nullifiers: Vec<Nullifier>,
    pub tx_context: FieldElement,
}

/// Inputs with POI-tree paths in place of commitment-tree paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoiWitness {
    pub inputs: Vec<InputWitness>,
}

/// Every valued input is marked allowed in the POI tree at the index its
/// nullifier commits to. Zero-value inputs are exempt.
pub fn eval_poi(public: &PoiPublic, witness: &PoiWitness) -> bool {
    if public.nullifiers.len() != witness.inputs.len() {
        return false;
    }
    witness.inputs.iter().zip(&public.nullifiers).all(|(input, nullifier)| {
        if input.note.amount == 0 {
            return true;
        }
        let c = input.note.commitment();
        let Some(path) = &input.path else {
            return false;
        };
        derive_public_key(&input.sk) == input.note.owner_pk
            && nullifier_for(&c, input.leaf_index, &input.sk) == *nullifier
            && path.leaf_index == input.leaf_index
            && verify_path(&public.poi_root, &poi_leaf(&c, PoiStatus::Allowed), path)
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccPublic {
    pub smt_root: FieldElement,
    pub flagged: FieldElement,
    /// Field hash of the merged lineage filter carried by the outputs.
    pub chain_state_hash: FieldElement,
    pub tx_context: FieldElement,
    pub flagged_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccWitness {
    pub parents: Vec<BloomFilter>,
    pub merged: BloomFilter,
    pub target: BloomFilter,
    pub smt_proof: SmtProof,
}

/// One flagged masked commitment is certainly absent from the merged
/// lineage of the spent inputs.
pub fn eval_acc(public: &AccPublic, witness: &AccWitness) -> bool {
    let parents: Vec<&BloomFilter> = witness.parents.iter().collect();
    let Ok(expected) = union(&parents) else {
        return false;
    };
    if expected != witness.merged || witness.merged.field_hash() != public.chain_state_hash {
        return false;
    }
    if witness.target != encode_single(&public.flagged, witness.merged.params()) {
        return false;
    }
    let proof = &witness.smt_proof;
    if !proof.membership
        || proof.key != smt_key(&public.flagged)
        || proof.value != witness.target.field_hash()
        || !smt_verify(&public.smt_root, proof)
    {
        return false;
    }
    matches!(exclusion_check(&witness.merged, &witness.target), Ok(Exclusion::CertainlyExcluded))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskPublic {
    pub masked: FieldElement,
    pub mixer_root: FieldElement,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskWitness {
    pub commitment: Commitment,
    pub blinding: FieldElement,
    pub leaf_index: u64,
    pub path: MerklePath,
}

pub fn eval_mask(public: &MaskPublic, witness: &MaskWitness) -> bool {
    mask_commitment(&witness.commitment, &witness.blinding) == public.masked
        && witness.path.leaf_index == witness.leaf_index
        && verify_path(&public.mixer_root, &witness.commitment.0, &witness.path)
}

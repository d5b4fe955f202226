//! Test-side relations for the seven statements, written against primitives
//! only (Poseidon, SHA-256, the box cipher and filter serialization).

use std::collections::BTreeSet;

use shieldpool_core::bloom::{BloomFilter, BloomParams};
use shieldpool_core::crypto::{encrypt_with, hash_n, hash_sequence, sha256};
use shieldpool_core::merkle::MerklePath;
use shieldpool_core::smt::SmtProof;
use shieldpool_core::statements::{Statement, Witness};
use shieldpool_core::utxo::Note;
use shieldpool_core::FieldElement;

fn fe(v: u64) -> FieldElement {
    FieldElement::from_u64(v)
}

pub fn public_key(sk: &FieldElement) -> FieldElement {
    hash_n([*sk])
}

pub fn commitment(n: &Note) -> FieldElement {
    hash_n([fe(n.amount), n.owner_pk, n.blinding])
}

pub fn nullifier(c: &FieldElement, idx: u64, sk: &FieldElement) -> FieldElement {
    let auth = hash_n([*sk, *c, fe(idx)]);
    hash_n([*c, fe(idx), auth])
}

pub fn allowed_leaf(c: &FieldElement) -> FieldElement {
    hash_n([*c, fe(1)])
}

pub fn masked(c: &FieldElement, blinding: &FieldElement) -> FieldElement {
    hash_n([*c, *blinding])
}

/// Root implied by a path whose direction bits are read off the leaf index.
pub fn path_root(leaf: &FieldElement, path: &MerklePath) -> Option<FieldElement> {
    let h = path.siblings.len();
    if path.indices.len() != h || h > 63 || path.leaf_index >> h != 0 {
        return None;
    }
    let mut node = *leaf;
    for (i, sib) in path.siblings.iter().enumerate() {
        let right = (path.leaf_index >> i) & 1 == 1;
        if path.indices[i] != right {
            return None;
        }
        node = if right { hash_n([*sib, node]) } else { hash_n([node, *sib]) };
    }
    Some(node)
}

fn key_bit(key: &[u8; 32], i: usize) -> bool {
    key[i / 8] & (0x80 >> (i % 8)) != 0
}

fn smt_leaf(key: &[u8; 32], value: &FieldElement) -> FieldElement {
    let hi = FieldElement::from_be_bytes_reduced(&key[..16]);
    let lo = FieldElement::from_be_bytes_reduced(&key[16..]);
    hash_n([hi, lo, *value])
}

pub fn smt_accepts(root: &FieldElement, p: &SmtProof) -> bool {
    let depth = p.siblings.len();
    if depth > 256 {
        return false;
    }
    let terminal = match (p.membership, &p.other_leaf) {
        (true, None) => smt_leaf(&p.key, &p.value),
        (true, Some(_)) => return false,
        (false, _) if p.value != FieldElement::ZERO => return false,
        (false, None) => FieldElement::ZERO,
        (false, Some((other, v))) => {
            if *other == p.key || (0..depth).any(|i| key_bit(other, i) != key_bit(&p.key, i)) {
                return false;
            }
            smt_leaf(other, v)
        }
    };
    let mut node = terminal;
    for (i, sib) in p.siblings.iter().enumerate() {
        node = if key_bit(&p.key, depth - 1 - i) {
            hash_n([*sib, node])
        } else {
            hash_n([node, *sib])
        };
    }
    node == *root
}

pub fn indices(element: &FieldElement, params: &BloomParams) -> BTreeSet<u32> {
    (0..params.k())
        .map(|i| (hash_n([*element, fe(i as u64)]).low_u64() % params.m() as u64) as u32)
        .collect()
}

pub fn bits(f: &BloomFilter) -> BTreeSet<u32> {
    (0..f.params().m()).filter(|&i| f.bit(i)).collect()
}

fn enc_binding(ct: &[u8], masked: &FieldElement) -> [u8; 32] {
    sha256(&[ct, &masked.to_be_bytes()])
}

pub fn holds(statement: &Statement, witness: &Witness) -> bool {
    match (statement, witness) {
        (Statement::JoinSplit(p), Witness::JoinSplit(w)) => {
            if p.nullifiers.len() != w.inputs.len() || p.output_commitments.len() != w.outputs.len() {
                return false;
            }
            let mut value_in: i128 = 0;
            for (input, n) in w.inputs.iter().zip(&p.nullifiers) {
                let c = commitment(&input.note);
                let member = match &input.path {
                    Some(path) => path.leaf_index == input.leaf_index && path_root(&c, path) == Some(p.merkle_root),
                    None => input.note.amount == 0,
                };
                if !member || public_key(&input.sk) != input.note.owner_pk || nullifier(&c, input.leaf_index, &input.sk) != n.0 {
                    return false;
                }
                value_in += input.note.amount as i128;
            }
            if p.public_amount > 0 && value_in != 0 {
                return false;
            }
            let mut value_out: i128 = 0;
            for (note, c) in w.outputs.iter().zip(&p.output_commitments) {
                if commitment(note) != c.0 || p.output_lock.is_some_and(|lock| lock != note.owner_pk) {
                    return false;
                }
                value_out += note.amount as i128;
            }
            let mut items = vec![p.merkle_root];
            items.extend(p.nullifiers.iter().map(|n| n.0));
            items.extend(p.output_commitments.iter().map(|c| c.0));
            items.push(FieldElement::from_i64(p.public_amount));
            value_in + p.public_amount as i128 == value_out && hash_sequence(&items) == p.tx_context
        }
        (Statement::BootstrapDepositor(p), Witness::BootstrapDepositor(w)) => {
            commitment(&w.note) == p.commitment.0 && public_key(&w.sk) == w.note.owner_pk
        }
        (Statement::BootstrapAuthority(p), Witness::BootstrapAuthority(w)) => {
            path_root(&w.commitment.0, &w.path) == Some(p.bootstrap_root)
                && masked(&w.commitment.0, &w.blinding) == w.masked
                && encrypt_with(&p.recipient, &w.masked.to_be_bytes(), &w.randomness) == p.masked_enc
                && enc_binding(&p.masked_enc.0, &w.masked) == p.masked_enc_hash
        }
        (Statement::DepositFinal(p), Witness::DepositFinal(w)) => {
            enc_binding(&w.masked_enc.0, &w.masked) == p.masked_enc_hash
                && w.chain_state.field_hash() == p.chain_state_hash
                && bits(&w.chain_state) == indices(&w.masked, w.chain_state.params())
        }
        (Statement::Poi(p), Witness::Poi(w)) => {
            p.nullifiers.len() == w.inputs.len()
                && w.inputs.iter().zip(&p.nullifiers).all(|(input, n)| {
                    if input.note.amount == 0 {
                        return true;
                    }
                    let c = commitment(&input.note);
                    let Some(path) = &input.path else {
                        return false;
                    };
                    public_key(&input.sk) == input.note.owner_pk
                        && nullifier(&c, input.leaf_index, &input.sk) == n.0
                        && path.leaf_index == input.leaf_index
                        && path_root(&allowed_leaf(&c), path) == Some(p.poi_root)
                })
        }
        (Statement::Acc(p), Witness::Acc(w)) => {
            let params = *w.merged.params();
            if w.parents.is_empty() || w.parents.iter().any(|f| *f.params() != params) {
                return false;
            }
            let lineage: BTreeSet<u32> = w.parents.iter().flat_map(bits).collect();
            let target = indices(&p.flagged, &params);
            bits(&w.merged) == lineage
                && w.merged.field_hash() == p.chain_state_hash
                && *w.target.params() == params
                && bits(&w.target) == target
                && w.smt_proof.membership
                && w.smt_proof.key == p.flagged.to_be_bytes()
                && w.smt_proof.value == w.target.field_hash()
                && smt_accepts(&p.smt_root, &w.smt_proof)
                && !target.is_subset(&lineage)
        }
        (Statement::Mask(p), Witness::Mask(w)) => {
            masked(&w.commitment.0, &w.blinding) == p.masked
                && w.path.leaf_index == w.leaf_index
                && path_root(&w.commitment.0, &w.path) == Some(p.mixer_root)
        }
        _ => false,
    }
}

//! Sparse Merkle tree keyed by 32-byte strings, traversed most significant
//! bit first over a logical depth of 256.
//!
//! Subtrees are compressed: an empty subtree hashes to zero and a subtree
//! holding a single entry is represented directly by that entry's leaf hash,
//! so proofs are only as long as the shortest prefix that isolates a key.
//! Leaf hashes use a wider Poseidon instance than internal nodes, which keeps
//! the two node kinds domain separated.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::hash_n;
use crate::field::{FieldElement, FieldError};
use crate::merkle::hash_nodes;

pub type SmtKey = [u8; 32];
pub const SMT_DEPTH: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmtError {
    #[error("key already present with a different value")]
    KeyConflict,
    #[error("malformed tree encoding: {0}")]
    Malformed(String),
}

impl From<FieldError> for SmtError {
    fn from(e: FieldError) -> Self {
        SmtError::Malformed(e.to_string())
    }
}

fn key_bit(key: &SmtKey, depth: usize) -> bool {
    (key[depth / 8] >> (7 - depth % 8)) & 1 == 1
}

fn set_bit(key: &mut SmtKey, depth: usize) {
    key[depth / 8] |= 0x80 >> (depth % 8);
}

/// Bits at positions `>= depth` cleared (lo) or set (hi).
fn prefix_bounds(key: &SmtKey, depth: usize) -> (SmtKey, SmtKey) {
    let mut lo = *key;
    let mut hi = *key;
    for i in depth..SMT_DEPTH {
        let mask = 0x80u8 >> (i % 8);
        lo[i / 8] &= !mask;
        hi[i / 8] |= mask;
    }
    (lo, hi)
}

fn shares_prefix(a: &SmtKey, b: &SmtKey, depth: usize) -> bool {
    (0..depth).all(|i| key_bit(a, i) == key_bit(b, i))
}

pub fn leaf_hash(key: &SmtKey, value: &FieldElement) -> FieldElement {
    let hi = FieldElement::from_be_bytes_reduced(&key[..16]);
    let lo = FieldElement::from_be_bytes_reduced(&key[16..]);
    hash_n([hi, lo, *value])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmtProof {
    pub key: SmtKey,
    /// Value bound to `key` for membership proofs; zero otherwise.
    pub value: FieldElement,
    /// Bottom-up siblings along the key path.
    pub siblings: Vec<FieldElement>,
    pub membership: bool,
    /// Non-membership witnessed by a different key occupying the slot.
    pub other_leaf: Option<(SmtKey, FieldElement)>,
}

pub fn smt_verify(root: &FieldElement, proof: &SmtProof) -> bool {
    let depth = proof.siblings.len();
    if depth > SMT_DEPTH {
        return false;
    }
    let terminal = if proof.membership {
        if proof.other_leaf.is_some() {
            return false;
        }
        leaf_hash(&proof.key, &proof.value)
    } else {
        if !proof.value.is_zero() {
            return false;
        }
        match &proof.other_leaf {
            Some((other, v)) => {
                if other == &proof.key || !shares_prefix(other, &proof.key, depth) {
                    return false;
                }
                leaf_hash(other, v)
            }
            None => FieldElement::ZERO,
        }
    };
    let computed = proof
        .siblings
        .iter()
        .enumerate()
        .fold(terminal, |node, (i, sib)| {
            let level = depth - 1 - i;
            if key_bit(&proof.key, level) {
                hash_nodes(sib, &node)
            } else {
                hash_nodes(&node, sib)
            }
        });
    computed == *root
}

#[derive(Debug, Clone, Default)]
pub struct SparseTree {
    entries: BTreeMap<SmtKey, (FieldElement, FieldElement)>,
    // Hashes of subtrees holding two or more entries, keyed by (depth, prefix).
    cache: HashMap<(u16, SmtKey), FieldElement>,
    root: FieldElement,
}

impl SparseTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn root(&self) -> FieldElement {
        self.root
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &SmtKey) -> Option<FieldElement> {
        self.entries.get(key).map(|(v, _)| *v)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&SmtKey, &FieldElement)> {
        self.entries.iter().map(|(k, (v, _))| (k, v))
    }

    /// Inserting an existing `(key, value)` pair is a no-op.
    pub fn insert(&mut self, key: SmtKey, value: FieldElement) -> Result<FieldElement, SmtError> {
        if let Some((existing, _)) = self.entries.get(&key) {
            return if *existing == value {
                Ok(self.root)
            } else {
                Err(SmtError::KeyConflict)
            };
        }
        self.entries.insert(key, (value, leaf_hash(&key, &value)));
        for depth in 0..SMT_DEPTH {
            let (lo, _) = prefix_bounds(&key, depth);
            self.cache.remove(&(depth as u16, lo));
        }
        self.root = self.subtree_cached(0, [0u8; 32]);
        Ok(self.root)
    }

    fn occupancy(&self, depth: usize, prefix: &SmtKey) -> Occupancy<'_> {
        let (lo, hi) = prefix_bounds(prefix, depth);
        let mut it = self.entries.range(lo..=hi);
        match (it.next(), it.next()) {
            (None, _) => Occupancy::Empty,
            (Some((k, (v, h))), None) => Occupancy::Single(k, v, *h),
            _ => Occupancy::Many,
        }
    }

    fn child_prefix(prefix: &SmtKey, depth: usize, right: bool) -> SmtKey {
        let (mut p, _) = prefix_bounds(prefix, depth);
        if right {
            set_bit(&mut p, depth);
        }
        p
    }

    fn subtree_cached(&mut self, depth: usize, prefix: SmtKey) -> FieldElement {
        match self.occupancy(depth, &prefix) {
            Occupancy::Empty => FieldElement::ZERO,
            Occupancy::Single(_, _, h) => h,
            Occupancy::Many => {
                let (lo, _) = prefix_bounds(&prefix, depth);
                if let Some(h) = self.cache.get(&(depth as u16, lo)) {
                    return *h;
                }
                let left = self.subtree_cached(depth + 1, Self::child_prefix(&prefix, depth, false));
                let right = self.subtree_cached(depth + 1, Self::child_prefix(&prefix, depth, true));
                let h = hash_nodes(&left, &right);
                self.cache.insert((depth as u16, lo), h);
                h
            }
        }
    }

    fn subtree(&self, depth: usize, prefix: &SmtKey) -> FieldElement {
        match self.occupancy(depth, prefix) {
            Occupancy::Empty => FieldElement::ZERO,
            Occupancy::Single(_, _, h) => h,
            Occupancy::Many => {
                let (lo, _) = prefix_bounds(prefix, depth);
                if let Some(h) = self.cache.get(&(depth as u16, lo)) {
                    return *h;
                }
                let left = self.subtree(depth + 1, &Self::child_prefix(prefix, depth, false));
                let right = self.subtree(depth + 1, &Self::child_prefix(prefix, depth, true));
                hash_nodes(&left, &right)
            }
        }
    }

    pub fn prove(&self, key: &SmtKey) -> SmtProof {
        let mut top_down = Vec::new();
        let mut depth = 0usize;
        loop {
            match self.occupancy(depth, key) {
                Occupancy::Empty => {
                    return self.finish_proof(key, top_down, None);
                }
                Occupancy::Single(k, v, _) => {
                    return self.finish_proof(key, top_down, Some((*k, *v)));
                }
                Occupancy::Many => {
                    let go_right = key_bit(key, depth);
                    let sibling_prefix = Self::child_prefix(key, depth, !go_right);
                    top_down.push(self.subtree(depth + 1, &sibling_prefix));
                    depth += 1;
                }
            }
        }
    }

    fn finish_proof(
        &self,
        key: &SmtKey,
        mut siblings: Vec<FieldElement>,
        terminal: Option<(SmtKey, FieldElement)>,
    ) -> SmtProof {
        siblings.reverse();
        match terminal {
            Some((k, v)) if &k == key => SmtProof {
                key: *key,
                value: v,
                siblings,
                membership: true,
                other_leaf: None,
            },
            other => SmtProof {
                key: *key,
                value: FieldElement::ZERO,
                siblings,
                membership: false,
                other_leaf: other,
            },
        }
    }

    /// `count(8) ∥ (key(32) ∥ value(32))*` in key order.
    pub fn export(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 64 * self.entries.len());
        out.extend_from_slice(&(self.entries.len() as u64).to_be_bytes());
        for (k, (v, _)) in &self.entries {
            out.extend_from_slice(k);
            out.extend_from_slice(&v.to_be_bytes());
        }
        out
    }

    pub fn import(bytes: &[u8]) -> Result<Self, SmtError> {
        if bytes.len() < 8 {
            return Err(SmtError::Malformed("short header".into()));
        }
        let count = u64::from_be_bytes(bytes[..8].try_into().expect("8"));
        let body = &bytes[8..];
        if body.len() as u64 != count.saturating_mul(64) {
            return Err(SmtError::Malformed(format!("expected {count} entries")));
        }
        let mut tree = SparseTree::new();
        for chunk in body.chunks(64) {
            let key: SmtKey = chunk[..32].try_into().expect("32");
            tree.insert(key, FieldElement::from_be_slice(&chunk[32..])?)?;
        }
        Ok(tree)
    }
}

enum Occupancy<'a> {
    Empty,
    Single(&'a SmtKey, &'a FieldElement, FieldElement),
    Many,
}

/// Root recomputed from an entry set with no caching; test oracle and audit aid.
pub fn root_from_entries(entries: &BTreeMap<SmtKey, FieldElement>) -> FieldElement {
    fn rec(entries: &[(SmtKey, FieldElement)], depth: usize) -> FieldElement {
        match entries {
            [] => FieldElement::ZERO,
            [(k, v)] => leaf_hash(k, v),
            _ => {
                let split = entries.partition_point(|(k, _)| !key_bit(k, depth));
                let (l, r) = entries.split_at(split);
                hash_nodes(&rec(l, depth + 1), &rec(r, depth + 1))
            }
        }
    }
    let sorted: Vec<_> = entries.iter().map(|(k, v)| (*k, *v)).collect();
    rec(&sorted, 0)
}

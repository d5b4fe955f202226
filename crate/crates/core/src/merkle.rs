//! Append-only Merkle tree used for the commitment pool, the proof-of-innocence
//! tree and the bootstrap registry.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::hash_n;
use crate::field::{FieldElement, FieldError};

pub const DEFAULT_HEIGHT: usize = 20;
pub const ROOT_HISTORY: usize = 100;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("tree of height {0} is full")]
    TreeFull(usize),
    #[error("leaf index {index} out of range ({len} leaves)")]
    IndexOutOfRange { index: u64, len: u64 },
    #[error("unsupported tree height {0}")]
    BadHeight(usize),
    #[error("malformed tree encoding: {0}")]
    Malformed(String),
}

impl From<FieldError> for TreeError {
    fn from(e: FieldError) -> Self {
        TreeError::Malformed(e.to_string())
    }
}

pub fn hash_nodes(left: &FieldElement, right: &FieldElement) -> FieldElement {
    hash_n([*left, *right])
}

/// `zero_hashes[0] = 0`, `zero_hashes[i+1] = H(z_i, z_i)`.
pub fn zero_hashes(height: usize) -> Vec<FieldElement> {
    let mut out = Vec::with_capacity(height + 1);
    out.push(FieldElement::ZERO);
    for i in 0..height {
        out.push(hash_nodes(&out[i], &out[i]));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MerklePath {
    /// Bottom-up.
    pub siblings: Vec<FieldElement>,
    /// Bottom-up; `true` means the running node is the right child.
    pub indices: Vec<bool>,
    pub leaf_index: u64,
}

impl MerklePath {
    pub fn root_for(&self, leaf: &FieldElement) -> FieldElement {
        self.siblings
            .iter()
            .zip(&self.indices)
            .fold(*leaf, |node, (sib, is_right)| {
                if *is_right {
                    hash_nodes(sib, &node)
                } else {
                    hash_nodes(&node, sib)
                }
            })
    }

    /// The index bits must agree with `leaf_index`.
    pub fn is_consistent(&self) -> bool {
        let h = self.siblings.len();
        if self.indices.len() != h || h > 63 {
            return false;
        }
        if self.leaf_index >> h != 0 {
            return false;
        }
        self.indices
            .iter()
            .enumerate()
            .all(|(i, bit)| ((self.leaf_index >> i) & 1 == 1) == *bit)
    }
}

pub fn verify_path(root: &FieldElement, leaf: &FieldElement, path: &MerklePath) -> bool {
    path.is_consistent() && path.root_for(leaf) == *root
}

#[derive(Debug, Clone)]
pub struct AppendTree {
    height: usize,
    /// `levels[0]` holds the leaves; `levels[i]` the filled nodes at height i.
    levels: Vec<Vec<FieldElement>>,
    zeros: Vec<FieldElement>,
    root: FieldElement,
    history: VecDeque<FieldElement>,
}

impl AppendTree {
    pub fn new(height: usize) -> Result<Self, TreeError> {
        if height == 0 || height > 32 {
            return Err(TreeError::BadHeight(height));
        }
        let zeros = zero_hashes(height);
        let root = zeros[height];
        let mut history = VecDeque::with_capacity(ROOT_HISTORY);
        history.push_back(root);
        Ok(AppendTree {
            height,
            levels: vec![Vec::new(); height + 1],
            zeros,
            root,
            history,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn capacity(&self) -> u64 {
        1u64 << self.height
    }

    pub fn len(&self) -> u64 {
        self.levels[0].len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.levels[0].is_empty()
    }

    pub fn root(&self) -> FieldElement {
        self.root
    }

    pub fn leaves(&self) -> &[FieldElement] {
        &self.levels[0]
    }

    pub fn leaf(&self, index: u64) -> Option<FieldElement> {
        self.levels[0].get(index as usize).copied()
    }

    pub fn position(&self, leaf: &FieldElement) -> Option<u64> {
        self.levels[0].iter().position(|l| l == leaf).map(|i| i as u64)
    }

    pub fn zero_hashes(&self) -> &[FieldElement] {
        &self.zeros
    }

    /// Recent roots, oldest first; the last entry is the current root.
    pub fn root_history(&self) -> impl Iterator<Item = &FieldElement> {
        self.history.iter()
    }

    pub fn is_known_root(&self, root: &FieldElement) -> bool {
        self.history.iter().any(|r| r == root)
    }

    pub fn append(&mut self, leaf: FieldElement) -> Result<(u64, FieldElement), TreeError> {
        let index = self.len();
        if index >= self.capacity() {
            return Err(TreeError::TreeFull(self.height));
        }
        self.levels[0].push(leaf);
        let mut idx = index as usize;
        let mut node = leaf;
        for level in 0..self.height {
            let sibling_idx = idx ^ 1;
            let sibling = self.levels[level].get(sibling_idx).copied().unwrap_or(self.zeros[level]);
            node = if idx & 1 == 1 {
                hash_nodes(&sibling, &node)
            } else {
                hash_nodes(&node, &sibling)
            };
            idx >>= 1;
            let parent_level = &mut self.levels[level + 1];
            if idx < parent_level.len() {
                parent_level[idx] = node;
            } else {
                parent_level.push(node);
            }
        }
        self.root = node;
        if self.history.len() == ROOT_HISTORY {
            self.history.pop_front();
        }
        self.history.push_back(node);
        Ok((index, node))
    }

    pub fn prove(&self, index: u64) -> Result<MerklePath, TreeError> {
        if index >= self.len() {
            return Err(TreeError::IndexOutOfRange { index, len: self.len() });
        }
        let mut siblings = Vec::with_capacity(self.height);
        let mut indices = Vec::with_capacity(self.height);
        let mut idx = index as usize;
        for level in 0..self.height {
            siblings.push(self.levels[level].get(idx ^ 1).copied().unwrap_or(self.zeros[level]));
            indices.push(idx & 1 == 1);
            idx >>= 1;
        }
        Ok(MerklePath {
            siblings,
            indices,
            leaf_index: index,
        })
    }

    /// `height(4) ∥ leaf_count(8) ∥ leaves(32 each)`, big-endian.
    pub fn export(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 32 * self.levels[0].len());
        out.extend_from_slice(&(self.height as u32).to_be_bytes());
        out.extend_from_slice(&self.len().to_be_bytes());
        for leaf in &self.levels[0] {
            out.extend_from_slice(&leaf.to_be_bytes());
        }
        out
    }

    /// Rebuilds by re-appending, so the root history is reconstructed too.
    pub fn import(bytes: &[u8]) -> Result<Self, TreeError> {
        if bytes.len() < 12 {
            return Err(TreeError::Malformed("short header".into()));
        }
        let height = u32::from_be_bytes(bytes[..4].try_into().expect("4")) as usize;
        let count = u64::from_be_bytes(bytes[4..12].try_into().expect("8"));
        let body = &bytes[12..];
        if body.len() as u64 != count.saturating_mul(32) {
            return Err(TreeError::Malformed(format!("expected {count} leaves")));
        }
        let mut tree = AppendTree::new(height)?;
        for chunk in body.chunks(32) {
            tree.append(FieldElement::from_be_slice(chunk)?)?;
        }
        Ok(tree)
    }
}

/// Root computed from scratch over a full leaf list.
pub fn root_from_leaves(height: usize, leaves: &[FieldElement]) -> FieldElement {
    let zeros = zero_hashes(height);
    let mut level: Vec<FieldElement> = leaves.to_vec();
    for z in zeros.iter().take(height) {
        if level.is_empty() {
            return zeros[height];
        }
        level = level
            .chunks(2)
            .map(|pair| hash_nodes(&pair[0], pair.get(1).unwrap_or(z)))
            .collect();
    }
    level.first().copied().unwrap_or(zeros[height])
}

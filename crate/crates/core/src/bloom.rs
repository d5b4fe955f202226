//! Bloom-filter chain states.
//!
//! Every UTXO carries a filter holding the masked commitments of all deposits
//! in its ancestry. Filters only ever grow: transfers OR their inputs
//! together, so once a flagged masked commitment is in a lineage every
//! descendant still answers "possibly included" for it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crypto::{hash_bytes_to_field, hash_n};
use crate::field::FieldElement;

pub const DEFAULT_M: u32 = 1 << 14;
pub const DEFAULT_K: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BloomError {
    #[error("invalid bloom parameters m={m} k={k}")]
    InvalidParams { m: u32, k: u32 },
    #[error("bloom parameter mismatch")]
    ParamMismatch,
    #[error("union of zero filters")]
    EmptyUnion,
    #[error("exclusion target does not encode a single element (popcount {0})")]
    MalformedTarget(u32),
    #[error("malformed bloom encoding: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct BloomParams {
    m: u32,
    k: u32,
}

#[derive(Deserialize)]
struct RawParams {
    m: u32,
    k: u32,
}

impl TryFrom<RawParams> for BloomParams {
    type Error = BloomError;
    fn try_from(raw: RawParams) -> Result<Self, BloomError> {
        BloomParams::new(raw.m, raw.k)
    }
}

impl BloomParams {
    pub fn new(m: u32, k: u32) -> Result<Self, BloomError> {
        if m < 8 || !m.is_power_of_two() || !(1..=8).contains(&k) {
            return Err(BloomError::InvalidParams { m, k });
        }
        Ok(BloomParams { m, k })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Per-epoch cap on flagged insertions, `m / (2k)`.
    pub fn epoch_cap(&self) -> u64 {
        (self.m / (2 * self.k)) as u64
    }
}

impl Default for BloomParams {
    fn default() -> Self {
        BloomParams {
            m: DEFAULT_M,
            k: DEFAULT_K,
        }
    }
}

/// `index_i = H(element, i) mod m`.
pub fn bloom_indices(element: &FieldElement, params: &BloomParams) -> Vec<u32> {
    (0..params.k)
        .map(|i| {
            let h = hash_n([*element, FieldElement::from_u64(i as u64)]);
            (h.low_u64() & (params.m as u64 - 1)) as u32
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Membership {
    DefinitelyAbsent,
    ProbablyPresent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exclusion {
    CertainlyExcluded,
    PossiblyIncluded,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawFilter")]
pub struct BloomFilter {
    params: BloomParams,
    words: Vec<u64>,
    inserted_count: u64,
}

#[derive(Deserialize)]
struct RawFilter {
    params: BloomParams,
    words: Vec<u64>,
    inserted_count: u64,
}

// Decoded filters come from untrusted attestations; the word vector must fit m exactly.
impl TryFrom<RawFilter> for BloomFilter {
    type Error = BloomError;
    fn try_from(raw: RawFilter) -> Result<Self, BloomError> {
        let m = raw.params.m as usize;
        if raw.words.len() != m.div_ceil(64) {
            return Err(BloomError::Malformed(format!("{} words for m={m}", raw.words.len())));
        }
        if m % 64 != 0 && raw.words[m / 64] >> (m % 64) != 0 {
            return Err(BloomError::Malformed("bits set beyond m".into()));
        }
        Ok(BloomFilter {
            params: raw.params,
            words: raw.words,
            inserted_count: raw.inserted_count,
        })
    }
}

// Accounting is local; two filters are the same chain state when their bits are.
impl PartialEq for BloomFilter {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params && self.words == other.words
    }
}

impl Eq for BloomFilter {}

impl BloomFilter {
    pub fn new(params: BloomParams) -> Self {
        BloomFilter {
            params,
            words: vec![0; (params.m as usize).div_ceil(64)],
            inserted_count: 0,
        }
    }

    pub fn params(&self) -> &BloomParams {
        &self.params
    }

    pub fn inserted_count(&self) -> u64 {
        self.inserted_count
    }

    pub fn bit(&self, i: u32) -> bool {
        (self.words[(i / 64) as usize] >> (i % 64)) & 1 == 1
    }

    pub fn set_bit(&mut self, i: u32) {
        self.words[(i / 64) as usize] |= 1 << (i % 64);
    }

    pub fn popcount(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn insert(&mut self, element: &FieldElement) {
        for i in bloom_indices(element, &self.params) {
            self.set_bit(i);
        }
        self.inserted_count += 1;
    }

    pub fn contains(&self, element: &FieldElement) -> Membership {
        self.contains_indices(&bloom_indices(element, &self.params))
    }

    /// Membership test against precomputed indices.
    pub fn contains_indices(&self, indices: &[u32]) -> Membership {
        if indices.iter().all(|i| self.bit(*i)) {
            Membership::ProbablyPresent
        } else {
            Membership::DefinitelyAbsent
        }
    }

    pub fn set_bits(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.params.m).filter(|i| self.bit(*i))
    }

    /// Inserted-element estimate from the fill ratio, used when the exact
    /// count is not available (decoded filters).
    pub fn estimated_count(&self) -> u64 {
        let m = self.params.m as f64;
        let x = self.popcount() as f64;
        if x >= m {
            return self.params.m as u64;
        }
        (-(m / self.params.k as f64) * (1.0 - x / m).ln()).round() as u64
    }

    /// `m(4, BE) ∥ k(4, BE) ∥ bits`, bit `i` at byte `i/8`, position `i%8`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let n_bytes = (self.params.m as usize) / 8;
        let mut out = Vec::with_capacity(8 + n_bytes);
        out.extend_from_slice(&self.params.m.to_be_bytes());
        out.extend_from_slice(&self.params.k.to_be_bytes());
        for w in &self.words {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.truncate(8 + n_bytes);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, BloomError> {
        if bytes.len() < 8 {
            return Err(BloomError::Malformed("short header".into()));
        }
        let m = u32::from_be_bytes(bytes[..4].try_into().expect("4"));
        let k = u32::from_be_bytes(bytes[4..8].try_into().expect("4"));
        let params = BloomParams::new(m, k)?;
        let body = &bytes[8..];
        if body.len() != m as usize / 8 {
            return Err(BloomError::Malformed(format!(
                "expected {} bit bytes, got {}",
                m / 8,
                body.len()
            )));
        }
        let mut f = BloomFilter::new(params);
        for (w, chunk) in f.words.iter_mut().zip(body.chunks(8)) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            *w = u64::from_le_bytes(buf);
        }
        f.inserted_count = f.estimated_count();
        Ok(f)
    }

    /// Number of the canonical serialization's bytes for `params`.
    pub fn encoded_len(params: &BloomParams) -> usize {
        8 + params.m as usize / 8
    }

    /// Field hash of the canonical serialization (the SMT value for a
    /// flagged masked commitment).
    pub fn field_hash(&self) -> FieldElement {
        hash_bytes_to_field(&self.to_bytes())
    }
}

/// Empty filter with exactly the element's `k` indices set.
pub fn encode_single(element: &FieldElement, params: &BloomParams) -> BloomFilter {
    let mut f = BloomFilter::new(*params);
    f.insert(element);
    f
}

/// Bitwise OR; inserted counts add up as an upper bound.
pub fn union(filters: &[&BloomFilter]) -> Result<BloomFilter, BloomError> {
    let first = filters.first().ok_or(BloomError::EmptyUnion)?;
    let mut out = BloomFilter::new(first.params);
    for f in filters {
        if f.params != first.params {
            return Err(BloomError::ParamMismatch);
        }
        for (o, w) in out.words.iter_mut().zip(&f.words) {
            *o |= *w;
        }
        out.inserted_count = out.inserted_count.saturating_add(f.inserted_count);
    }
    Ok(out)
}

/// Certain exclusion iff `Σ B1[i]·B2[i] ≠ popcount(B2)`.
///
/// Comparing against `popcount(B2)` rather than `k` keeps elements whose
/// indices collide detectable; both agree whenever the indices are distinct.
pub fn exclusion_check(chain: &BloomFilter, target: &BloomFilter) -> Result<Exclusion, BloomError> {
    if chain.params != target.params {
        return Err(BloomError::ParamMismatch);
    }
    let target_bits = target.popcount();
    if target_bits == 0 || target_bits > target.params.k {
        return Err(BloomError::MalformedTarget(target_bits));
    }
    let overlap: u32 = chain
        .words
        .iter()
        .zip(&target.words)
        .map(|(a, b)| (a & b).count_ones())
        .sum();
    Ok(if overlap != target_bits {
        Exclusion::CertainlyExcluded
    } else {
        Exclusion::PossiblyIncluded
    })
}

/// `(1 - e^{-kn/(m-1)})^k`.
pub fn fp_rate(n: u64, params: &BloomParams) -> f64 {
    let k = params.k as f64;
    let m = params.m as f64;
    (1.0 - (-k * n as f64 / (m - 1.0)).exp()).powf(k)
}

/// `ln 2 · m / n`.
pub fn optimal_k(m: u32, n: u64) -> f64 {
    std::f64::consts::LN_2 * m as f64 / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateLimitConfig {
    pub tau_base: f64,
    pub alpha: f64,
    /// Volume window in blocks.
    pub window: u64,
}

impl Default for RateLimitConfig {
    fn default() -> Self {
        RateLimitConfig {
            tau_base: 0.05,
            alpha: 0.001,
            window: 100,
        }
    }
}

/// `τ(V) = τ_base · e^{-αV}`.
pub fn adaptive_tau(config: &RateLimitConfig, volume: u64) -> f64 {
    config.tau_base * (-config.alpha * volume as f64).exp()
}

/// `R_max = (m/k) · ln(1/τ(V))`.
pub fn rate_limit_max(params: &BloomParams, config: &RateLimitConfig, volume: u64) -> f64 {
    let tau = adaptive_tau(config, volume);
    (params.m as f64 / params.k as f64) * (1.0 / tau).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capacity {
    Ok,
    OverLimit,
}

pub fn merge_capacity_check(
    filter: &BloomFilter,
    params: &BloomParams,
    config: &RateLimitConfig,
    volume: u64,
) -> Capacity {
    let count = filter.inserted_count.max(filter.estimated_count());
    if count as f64 > rate_limit_max(params, config, volume) {
        Capacity::OverLimit
    } else {
        Capacity::Ok
    }
}

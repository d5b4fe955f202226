//! False-positive and neighborhood-growth measurements.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use shieldpool_core::bloom::{bloom_indices, fp_rate, BloomFilter, BloomParams, Membership};
use shieldpool_core::crypto::random_field_element;
use shieldpool_protocol::authority::{Direction, TxGraph, UnknownAddress};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BloomRow {
    pub n: u64,
    pub analytic: f64,
    pub empirical: f64,
    pub false_positives: u64,
    pub queries: u64,
}

/// Inserts random elements up to each point in `points` and probes the
/// filter with `queries` fresh random elements (the same probe set at every
/// point).
pub fn bench_bloom(params: BloomParams, points: &[u64], queries: u64, seed: u64) -> Vec<BloomRow> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let probes: Vec<Vec<u32>> = (0..queries)
        .map(|_| bloom_indices(&random_field_element(&mut rng), &params))
        .collect();
    let mut sorted = points.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut filter = BloomFilter::new(params);
    let mut inserted = 0u64;
    let mut rows = Vec::with_capacity(sorted.len());
    for n in sorted {
        while inserted < n {
            filter.insert(&random_field_element(&mut rng));
            inserted += 1;
        }
        let hits = probes
            .iter()
            .filter(|p| filter.contains_indices(p) == Membership::ProbablyPresent)
            .count() as u64;
        rows.push(BloomRow {
            n,
            analytic: fp_rate(n, &params),
            empirical: if queries == 0 { 0.0 } else { hits as f64 / queries as f64 },
            false_positives: hits,
            queries,
        });
    }
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HopRow {
    pub hop: usize,
    /// `|N_hop|`, cumulative.
    pub size: usize,
    /// Addresses first reached at this hop.
    pub frontier: usize,
    pub visited_edges: u64,
    /// `frontier / previous frontier`.
    pub ratio: Option<f64>,
}

pub fn bench_transitivity(graph: &TxGraph, root: &str, n_max: usize, dir: Direction) -> Result<Vec<HopRow>, UnknownAddress> {
    let stats = graph.hop_stats(root, n_max, dir)?;
    let mut rows: Vec<HopRow> = Vec::with_capacity(stats.len());
    for s in stats {
        let prev = rows.last();
        let frontier = s.size - prev.map_or(0, |p| p.size);
        let ratio = prev.filter(|p| p.frontier > 0).map(|p| frontier as f64 / p.frontier as f64);
        rows.push(HopRow {
            hop: s.hop,
            size: s.size,
            frontier,
            visited_edges: s.visited_edges,
            ratio,
        });
    }
    Ok(rows)
}

//! External transaction graph and hop-bounded reachability.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::sanctions::{normalize, SanctionsList};
use super::ParseError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown address {0}")]
pub struct UnknownAddress(pub String);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Along fund flow.
    Forward,
    /// Against fund flow (provenance).
    Backward,
}

/// Directed edge list with multiplicities.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TxGraph {
    out: BTreeMap<String, BTreeMap<String, u64>>,
    inc: BTreeMap<String, BTreeMap<String, u64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HopStats {
    pub hop: usize,
    /// `|N_hop(v)|`, cumulative.
    pub size: usize,
    /// Edges examined up to and including this hop.
    pub visited_edges: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Transitivity {
    Clean,
    /// From the checked address to a sanctioned one.
    Flagged(Vec<String>),
}

impl TxGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, v: &str) {
        let v = normalize(v);
        self.out.entry(v.clone()).or_default();
        self.inc.entry(v).or_default();
    }

    pub fn add_edge(&mut self, from: &str, to: &str, count: u64) {
        let (from, to) = (normalize(from), normalize(to));
        self.add_node(&from);
        self.add_node(&to);
        *self.out.get_mut(&from).expect("added").entry(to.clone()).or_insert(0) += count;
        *self.inc.get_mut(&to).expect("added").entry(from).or_insert(0) += count;
    }

    /// `from to [count]` per line; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut g = TxGraph::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| ParseError {
                line: i + 1,
                message: msg.to_string(),
            };
            let parts: Vec<&str> = line.split_whitespace().collect();
            let count = match parts.len() {
                2 => 1,
                3 => parts[2].parse::<u64>().map_err(|_| err("edge count is not an integer"))?,
                _ => return Err(err("expected `from to [count]`")),
            };
            g.add_edge(parts[0], parts[1], count);
        }
        Ok(g)
    }

    pub fn contains(&self, v: &str) -> bool {
        self.out.contains_key(&normalize(v))
    }

    pub fn node_count(&self) -> usize {
        self.out.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out.values().map(BTreeMap::len).sum()
    }

    pub fn average_out_degree(&self) -> f64 {
        if self.out.is_empty() {
            0.0
        } else {
            self.edge_count() as f64 / self.node_count() as f64
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.out.keys().map(String::as_str)
    }

    /// Sorted neighbors in the given direction.
    pub fn neighbors(&self, v: &str, dir: Direction) -> impl Iterator<Item = &str> {
        let adj = match dir {
            Direction::Forward => &self.out,
            Direction::Backward => &self.inc,
        };
        adj.get(v).into_iter().flat_map(|m| m.keys().map(String::as_str))
    }

    fn distances(&self, v: &str, n: usize, dir: Direction) -> (BTreeMap<String, usize>, Vec<HopStats>) {
        let mut dist = BTreeMap::from([(v.to_string(), 0usize)]);
        let mut frontier = VecDeque::from([v.to_string()]);
        let mut stats = vec![HopStats {
            hop: 0,
            size: 1,
            visited_edges: 0,
        }];
        let mut edges = 0u64;
        for hop in 1..=n {
            let mut next = VecDeque::new();
            while let Some(u) = frontier.pop_front() {
                for w in self.neighbors(&u, dir) {
                    edges += 1;
                    if !dist.contains_key(w) {
                        dist.insert(w.to_string(), hop);
                        next.push_back(w.to_string());
                    }
                }
            }
            stats.push(HopStats {
                hop,
                size: dist.len(),
                visited_edges: edges,
            });
            frontier = next;
        }
        (dist, stats)
    }

    /// Addresses reachable from `v` in at most `n` forward hops, `v` included.
    pub fn neighborhood(&self, v: &str, n: usize) -> Result<BTreeSet<String>, UnknownAddress> {
        self.neighborhood_in(v, n, Direction::Forward)
    }

    pub fn neighborhood_in(&self, v: &str, n: usize, dir: Direction) -> Result<BTreeSet<String>, UnknownAddress> {
        let v = self.known(v)?;
        Ok(self.distances(&v, n, dir).0.into_keys().collect())
    }

    /// Per-hop cumulative neighborhood sizes for hops `0..=n_max`.
    pub fn hop_stats(&self, v: &str, n_max: usize, dir: Direction) -> Result<Vec<HopStats>, UnknownAddress> {
        let v = self.known(v)?;
        Ok(self.distances(&v, n_max, dir).1)
    }

    fn known(&self, v: &str) -> Result<String, UnknownAddress> {
        let v = normalize(v);
        if self.out.contains_key(&v) {
            Ok(v)
        } else {
            Err(UnknownAddress(v))
        }
    }

    /// Walks provenance edges from `v` looking for a sanctioned address within
    /// `n` hops. The witness is a shortest path, lexicographically smallest
    /// among those.
    pub fn transitivity_check(&self, sanctions: &SanctionsList, v: &str, n: usize) -> Result<Transitivity, UnknownAddress> {
        let v = self.known(v)?;
        let (dist, _) = self.distances(&v, n, Direction::Backward);
        let Some(best) = dist.iter().filter(|(a, _)| sanctions.contains(a)).map(|(_, d)| *d).min() else {
            return Ok(Transitivity::Clean);
        };
        // hops remaining to a nearest sanctioned target, searched forward from the targets
        let mut to_target: BTreeMap<&str, usize> = BTreeMap::new();
        let mut queue = VecDeque::new();
        for (a, d) in &dist {
            if *d == best && sanctions.contains(a) {
                to_target.insert(a, 0);
                queue.push_back(a.as_str());
            }
        }
        while let Some(u) = queue.pop_front() {
            let du = to_target[u];
            if du == best {
                continue;
            }
            for w in self.neighbors(u, Direction::Forward) {
                if dist.get(w) == Some(&(best - du - 1)) && !to_target.contains_key(w) {
                    to_target.insert(w, du + 1);
                    queue.push_back(w);
                }
            }
        }
        let mut path = vec![v.clone()];
        let mut cur = v.as_str();
        for step in 1..=best {
            cur = self
                .neighbors(cur, Direction::Backward)
                .find(|w| dist.get(*w) == Some(&step) && to_target.get(w) == Some(&(best - step)))
                .expect("a shortest path continues through some predecessor");
            path.push(cur.to_string());
        }
        Ok(Transitivity::Flagged(path))
    }

    /// Complete `d`-ary tree of the given depth with root `r` and edges
    /// pointing away from the root.
    pub fn uniform_tree(degree: usize, depth: usize) -> Self {
        let mut g = TxGraph::new();
        g.add_node("r");
        let mut level = vec!["r".to_string()];
        for _ in 0..depth {
            let mut next = Vec::with_capacity(level.len() * degree);
            for parent in &level {
                for c in 0..degree {
                    let child = format!("{parent}.{c}");
                    g.add_edge(parent, &child, 1);
                    next.push(child);
                }
            }
            level = next;
        }
        g
    }
}

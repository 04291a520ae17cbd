//! Simple undirected graphs, node relabelings and neighborhood extraction.
//!
//! A [`Graph`] is immutable once built. Self-loops and parallel edges are
//! rejected at construction, so `degrees[i] == adjacency[i].len()` always holds
//! and the self term of a message-passing layer is added by the layer itself.

mod iso;
mod wl;

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use iso::{automorphisms, for_each_permutation, is_isomorphic_bruteforce, BRUTE_FORCE_LIMIT};
pub use wl::{wl_refine, WlColoring};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    degrees: Vec<usize>,
}

impl Graph {
    /// Builds a graph, rejecting out-of-range endpoints, self-loops and
    /// duplicate edges (in either orientation).
    pub fn new(node_count: usize, edge_list: &[(usize, usize)]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &(a, b) in edge_list {
            if a >= node_count || b >= node_count {
                return Err(Error::NodeOutOfRange(a, b, node_count));
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::DuplicateEdge(a, b));
            }
        }
        Ok(Self::from_canonical(node_count, seen))
    }

    /// Builds a graph after collapsing duplicate undirected pairs. Self-loops
    /// and out-of-range endpoints are still errors.
    pub fn from_edges_dedup(node_count: usize, edge_list: &[(usize, usize)]) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &(a, b) in edge_list {
            if a >= node_count || b >= node_count {
                return Err(Error::NodeOutOfRange(a, b, node_count));
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            seen.insert((a.min(b), a.max(b)));
        }
        Ok(Self::from_canonical(node_count, seen))
    }

    fn from_canonical(node_count: usize, edges: BTreeSet<(usize, usize)>) -> Self {
        let mut adjacency = vec![Vec::new(); node_count];
        for &(a, b) in &edges {
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let degrees = adjacency.iter().map(Vec::len).collect();
        Graph {
            node_count,
            edges: edges.into_iter().collect(),
            adjacency,
            degrees,
        }
    }

    pub fn empty(node_count: usize) -> Self {
        Self::from_canonical(node_count, BTreeSet::new())
    }

    /// Path graph `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Self {
        let edges: BTreeSet<_> = (1..n).map(|i| (i - 1, i)).collect();
        Self::from_canonical(n, edges)
    }

    pub fn complete(n: usize) -> Self {
        let edges: BTreeSet<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        Self::from_canonical(n, edges)
    }

    /// Erdős–Rényi G(n, p).
    pub fn random<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Self {
        let mut edges = BTreeSet::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random::<f64>() < p {
                    edges.insert((i, j));
                }
            }
        }
        Self::from_canonical(n, edges)
    }

    /// Disjoint union; node indices of `graphs[k]` are shifted by the total
    /// node count of the graphs before it. Returns the offsets as well.
    pub fn disjoint_union(graphs: &[Graph]) -> (Graph, Vec<usize>) {
        let mut offsets = Vec::with_capacity(graphs.len());
        let mut edges = BTreeSet::new();
        let mut total = 0;
        for g in graphs {
            offsets.push(total);
            edges.extend(g.edges.iter().map(|&(a, b)| (a + total, b + total)));
            total += g.node_count;
        }
        (Self::from_canonical(total, edges), offsets)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges as `(min, max)` pairs in ascending order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn degree(&self, node: usize) -> usize {
        self.degrees[node]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.node_count && self.adjacency[a].binary_search(&b).is_ok()
    }

    /// Relabels node `i` as `p[i]`.
    pub fn permute(&self, p: &Permutation) -> Result<Graph> {
        if p.len() != self.node_count {
            return Err(Error::SizeMismatch {
                expected: self.node_count,
                actual: p.len(),
            });
        }
        let edges = self
            .edges
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (p.apply(a), p.apply(b));
                (x.min(y), x.max(y))
            })
            .collect();
        Ok(Self::from_canonical(self.node_count, edges))
    }

    /// Subgraph induced on every node within distance `k` of a seed.
    ///
    /// Returns the subgraph and, for each new index, the original node index
    /// (ascending).
    pub fn k_hop_subgraph(&self, seeds: &[usize], k: usize) -> Result<(Graph, Vec<usize>)> {
        if seeds.is_empty() {
            return Err(Error::EmptySeeds);
        }
        let mut dist = vec![usize::MAX; self.node_count];
        let mut queue = VecDeque::new();
        for &s in seeds {
            if s >= self.node_count {
                return Err(Error::NodeOutOfRange(s, s, self.node_count));
            }
            if dist[s] != 0 {
                dist[s] = 0;
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            if dist[u] == k {
                continue;
            }
            for &v in &self.adjacency[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        let kept: Vec<usize> = (0..self.node_count)
            .filter(|&i| dist[i] != usize::MAX)
            .collect();
        let mut new_index = vec![usize::MAX; self.node_count];
        for (new, &old) in kept.iter().enumerate() {
            new_index[old] = new;
        }
        let edges = self
            .edges
            .iter()
            .filter(|&&(a, b)| new_index[a] != usize::MAX && new_index[b] != usize::MAX)
            .map(|&(a, b)| (new_index[a], new_index[b]))
            .collect();
        Ok((Self::from_canonical(kept.len(), edges), kept))
    }

    /// Shortest-path distances from `source`; `None` for unreachable nodes.
    pub fn bfs_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.node_count];
        let mut queue = VecDeque::from([source]);
        dist[source] = Some(0);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            for &v in &self.adjacency[u] {
                if dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

/// Free-function alias of [`Graph::new`].
pub fn build_graph(node_count: usize, edge_list: &[(usize, usize)]) -> Result<Graph> {
    Graph::new(node_count, edge_list)
}

pub fn permute_graph(g: &Graph, p: &Permutation) -> Result<Graph> {
    g.permute(p)
}

pub fn k_hop_subgraph(g: &Graph, seeds: &[usize], k: usize) -> Result<(Graph, Vec<usize>)> {
    g.k_hop_subgraph(seeds, k)
}

/// A bijection on `0..n`; node `i` is sent to `mapping[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; mapping.len()];
        for &m in &mapping {
            if m >= mapping.len() || seen[m] {
                return Err(Error::InvalidPermutation(format!(
                    "{mapping:?} is not a bijection on 0..{}",
                    mapping.len()
                )));
            }
            seen[m] = true;
        }
        Ok(Permutation { mapping })
    }

    pub fn identity(n: usize) -> Self {
        Permutation {
            mapping: (0..n).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut mapping: Vec<usize> = (0..n).collect();
        mapping.shuffle(rng);
        Permutation { mapping }
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.mapping[i]
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.mapping.len()];
        for (i, &m) in self.mapping.iter().enumerate() {
            inv[m] = i;
        }
        Permutation { mapping: inv }
    }
}

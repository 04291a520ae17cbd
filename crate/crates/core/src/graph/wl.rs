use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};

/// Node colors after 1-WL color refinement.
///
/// Color ids are canonical: contiguous from 0 and assigned in order of first
/// occurrence when scanning nodes by index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WlColoring {
    pub colors: Vec<usize>,
    pub rounds: usize,
}

impl WlColoring {
    pub fn class_count(&self) -> usize {
        self.colors.iter().max().map_or(0, |&m| m + 1)
    }

    /// Color classes, each sorted ascending, ordered by color id.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.class_count()];
        for (node, &c) in self.colors.iter().enumerate() {
            out[c].push(node);
        }
        out
    }

    pub fn same_color(&self, u: usize, v: usize) -> bool {
        self.colors[u] == self.colors[v]
    }

    /// True when every class of `self` lies inside a class of `coarser`.
    pub fn refines(&self, coarser: &WlColoring) -> bool {
        if self.colors.len() != coarser.colors.len() {
            return false;
        }
        let mut parent = vec![usize::MAX; self.class_count()];
        for (&fine, &coarse) in self.colors.iter().zip(&coarser.colors) {
            if parent[fine] == usize::MAX {
                parent[fine] = coarse;
            } else if parent[fine] != coarse {
                return false;
            }
        }
        true
    }
}

fn canonicalize<K: std::hash::Hash + Eq>(keys: impl Iterator<Item = K>) -> Vec<usize> {
    let mut ids: HashMap<K, usize> = HashMap::new();
    keys.map(|k| {
        let next = ids.len();
        *ids.entry(k).or_insert(next)
    })
    .collect()
}

/// Runs `rounds` iterations of 1-WL refinement starting from `initial_colors`.
///
/// Each round recolors node `i` by the pair (own color, sorted multiset of
/// neighbor colors). Signatures are compared exactly, so there are no hash
/// collisions.
pub fn wl_refine(g: &Graph, initial_colors: &[usize], rounds: usize) -> Result<WlColoring> {
    if initial_colors.len() != g.node_count() {
        return Err(Error::SizeMismatch {
            expected: g.node_count(),
            actual: initial_colors.len(),
        });
    }
    let mut colors = canonicalize(initial_colors.iter().copied());
    let mut neigh = Vec::new();
    for _ in 0..rounds {
        let signatures = (0..g.node_count()).map(|i| {
            neigh.clear();
            neigh.extend(g.neighbors(i).iter().map(|&j| colors[j]));
            neigh.sort_unstable();
            (colors[i], neigh.clone())
        });
        colors = canonicalize(signatures);
    }
    Ok(WlColoring { colors, rounds })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(n: usize) -> Vec<usize> {
        vec![0; n]
    }

    #[test]
    fn path5_round_one_groups_by_degree() {
        let p5 = Graph::path(5);
        let c = wl_refine(&p5, &uniform(5), 1).unwrap();
        assert_eq!(c.classes(), vec![vec![0, 4], vec![1, 2, 3]]);
    }

    #[test]
    fn path5_round_two_separates_center() {
        let p5 = Graph::path(5);
        let c = wl_refine(&p5, &uniform(5), 2).unwrap();
        assert_eq!(c.classes(), vec![vec![0, 4], vec![1, 3], vec![2]]);
        let c1 = wl_refine(&p5, &uniform(5), 1).unwrap();
        assert!(c1.same_color(1, 2));
        assert!(!c.same_color(1, 2));
    }

    #[test]
    fn triangle_stays_uniform() {
        let t = Graph::complete(3);
        let c = wl_refine(&t, &uniform(3), 5).unwrap();
        assert_eq!(c.class_count(), 1);
    }

    #[test]
    fn zero_rounds_canonicalizes() {
        let g = Graph::path(4);
        let c = wl_refine(&g, &[7, 3, 7, 9], 0).unwrap();
        assert_eq!(c.colors, vec![0, 1, 0, 2]);
        assert_eq!(c.rounds, 0);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(
            wl_refine(&Graph::path(3), &[0, 0], 1),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn refines_relation() {
        let p5 = Graph::path(5);
        let c1 = wl_refine(&p5, &uniform(5), 1).unwrap();
        let c2 = wl_refine(&p5, &uniform(5), 2).unwrap();
        assert!(c2.refines(&c1));
        assert!(!c1.refines(&c2));
    }
}

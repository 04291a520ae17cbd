use super::{Graph, Permutation};
use crate::error::{Error, Result};

/// Largest node count accepted by the exhaustive searches (8! = 40320).
pub const BRUTE_FORCE_LIMIT: usize = 8;

/// Calls `f` on every permutation of `0..n` (Heap's algorithm). Stops early
/// when `f` returns `true`; returns whether it did.
pub fn for_each_permutation(n: usize, mut f: impl FnMut(&[usize]) -> bool) -> bool {
    let mut perm: Vec<usize> = (0..n).collect();
    if f(&perm) {
        return true;
    }
    let mut c = vec![0usize; n];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(c[i], i);
            }
            if f(&perm) {
                return true;
            }
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    false
}

fn maps_edges(g1: &Graph, g2: &Graph, perm: &[usize]) -> bool {
    g1.edges()
        .iter()
        .all(|&(a, b)| g2.has_edge(perm[a], perm[b]))
}

/// Exhaustive isomorphism test for graphs with at most
/// [`BRUTE_FORCE_LIMIT`] nodes. Graphs of different sizes are never
/// isomorphic.
pub fn is_isomorphic_bruteforce(g1: &Graph, g2: &Graph) -> Result<bool> {
    let n = g1.node_count().max(g2.node_count());
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::IsomorphismGuard {
            nodes: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    if g1.node_count() != g2.node_count() || g1.edge_count() != g2.edge_count() {
        return Ok(false);
    }
    // equal edge counts + every edge mapped onto an edge = edge-set bijection
    Ok(for_each_permutation(n, |perm| maps_edges(g1, g2, perm)))
}

/// All automorphisms of `g` (at most [`BRUTE_FORCE_LIMIT`] nodes).
pub fn automorphisms(g: &Graph) -> Result<Vec<Permutation>> {
    let n = g.node_count();
    if n > BRUTE_FORCE_LIMIT {
        return Err(Error::IsomorphismGuard {
            nodes: n,
            limit: BRUTE_FORCE_LIMIT,
        });
    }
    let mut out = Vec::new();
    for_each_permutation(n, |perm| {
        if maps_edges(g, g, perm) {
            out.push(Permutation::new(perm.to_vec()).expect("generated permutation"));
        }
        false
    });
    Ok(out)
}

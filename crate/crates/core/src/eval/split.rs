use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Fractions assigned to train, validation and test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ratios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Ratios {
    pub const LINK: Ratios = Ratios {
        train: 0.85,
        val: 0.05,
        test: 0.10,
    };
    pub const GRAPH: Ratios = Ratios {
        train: 0.5,
        val: 0.2,
        test: 0.3,
    };
    pub const NODE_FALLBACK: Ratios = Ratios {
        train: 0.6,
        val: 0.2,
        test: 0.2,
    };

    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = Ratios { train, val, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(0.0..=1.0).contains(p)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "split ratios must be in [0, 1] and sum to 1, got {}/{}/{}",
                self.train, self.val, self.test
            )));
        }
        Ok(())
    }

    /// Partition sizes of `total` items: floor each share, then hand the
    /// remaining items to the largest fractional parts (earlier partition
    /// first on ties).
    pub fn counts(&self, total: usize) -> [usize; 3] {
        let exact = [self.train, self.val, self.test].map(|r| r * total as f64);
        let mut counts = exact.map(|x| x.floor() as usize);
        let mut left = total.saturating_sub(counts.iter().sum());
        let mut order = [0, 1, 2];
        order.sort_by(|&a, &b| {
            let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
            fb.partial_cmp(&fa).expect("finite").then(a.cmp(&b))
        });
        for &k in order.iter().cycle() {
            if left == 0 {
                break;
            }
            counts[k] += 1;
            left -= 1;
        }
        counts
    }
}

/// Node indices per partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    /// Generated here rather than shipped with the dataset.
    pub fallback: bool,
}

/// Graph indices per partition.
pub type GraphSplit = NodeSplit;

fn partition(items: &[usize], ratios: &Ratios) -> [Vec<usize>; 3] {
    let [a, b, _] = ratios.counts(items.len());
    [items[..a].to_vec(), items[a..a + b].to_vec(), items[a + b..].to_vec()]
}

/// Seeded split stratified by label: each class is shuffled and divided by
/// [`Ratios::counts`]. Partitions are returned sorted.
pub fn stratified_split(labels: &[usize], ratios: &Ratios, seed: u64) -> Result<NodeSplit> {
    ratios.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut out: [Vec<usize>; 3] = Default::default();
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        for (dst, part) in out.iter_mut().zip(partition(&members, ratios)) {
            dst.extend(part);
        }
    }
    for p in &mut out {
        p.sort_unstable();
    }
    let [train, val, test] = out;
    Ok(NodeSplit {
        train,
        val,
        test,
        fallback: true,
    })
}

/// Seeded uniform split of `count` graphs.
pub fn make_graph_split(count: usize, ratios: &Ratios, seed: u64) -> Result<GraphSplit> {
    ratios.validate()?;
    let mut idx: Vec<usize> = (0..count).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let [mut train, mut val, mut test] = partition(&idx, ratios);
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(GraphSplit {
        train,
        val,
        test,
        fallback: true,
    })
}

/// Positive edges and an equal number of sampled non-edges per partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkSplit {
    pub train_pos: Vec<(usize, usize)>,
    pub val_pos: Vec<(usize, usize)>,
    pub test_pos: Vec<(usize, usize)>,
    pub train_neg: Vec<(usize, usize)>,
    pub val_neg: Vec<(usize, usize)>,
    pub test_neg: Vec<(usize, usize)>,
    pub seed: u64,
}

fn sample_non_edges<R: Rng>(g: &Graph, count: usize, rng: &mut R) -> Result<Vec<(usize, usize)>> {
    let n = g.node_count();
    let available = n * n.saturating_sub(1) / 2 - g.edge_count();
    if count > available {
        return Err(Error::NegativeSampling {
            requested: count,
            available,
        });
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    if 2 * count > available {
        let mut all: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter(|&(i, j)| !g.has_edge(i, j))
            .collect();
        all.shuffle(rng);
        all.truncate(count);
        return Ok(all);
    }
    let mut chosen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a == b {
            continue;
        }
        let pair = (a.min(b), a.max(b));
        if g.has_edge(pair.0, pair.1) || !chosen.insert(pair) {
            continue;
        }
        out.push(pair);
    }
    Ok(out)
}

/// Splits the edges of `g` and samples one negative per positive without
/// replacement from the non-edges of `g`. Returns the split and the graph
/// holding only the training positives.
pub fn make_link_split(g: &Graph, ratios: &Ratios, seed: u64) -> Result<(LinkSplit, Graph)> {
    ratios.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = g.edges().to_vec();
    edges.shuffle(&mut rng);
    let [a, b, _] = ratios.counts(edges.len());
    let (train_pos, rest) = edges.split_at(a);
    let (val_pos, test_pos) = rest.split_at(b);
    let neg = sample_non_edges(g, edges.len(), &mut rng)?;
    let (train_neg, rest) = neg.split_at(a);
    let (val_neg, test_neg) = rest.split_at(b);
    let train_graph = Graph::new(g.node_count(), train_pos)?;
    Ok((
        LinkSplit {
            train_pos: train_pos.to_vec(),
            val_pos: val_pos.to_vec(),
            test_pos: test_pos.to_vec(),
            train_neg: train_neg.to_vec(),
            val_neg: val_neg.to_vec(),
            test_neg: test_neg.to_vec(),
            seed,
        },
        train_graph,
    ))
}

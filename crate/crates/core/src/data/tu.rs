use std::collections::BTreeSet;
use std::path::Path;

use super::text::{column, data_error, field, lines, parse_error, read};
use crate::diff::Tensor;
use crate::error::Result;
use crate::graph::Graph;

/// Graph collection in the TU flat-file layout. Edge labels are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct TuDataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    /// Graph labels remapped to `0..class_count` in ascending order of the
    /// raw values.
    pub labels: Vec<usize>,
    pub class_count: usize,
    /// One-hot node labels per graph, when a node-label file exists.
    pub node_features: Option<Vec<Tensor>>,
}

impl TuDataset {
    pub fn featureless(&self) -> bool {
        self.node_features.is_none()
    }
}

fn remap<T: Ord + Copy>(values: &[T]) -> (Vec<usize>, usize) {
    let distinct: Vec<T> = values.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let idx = values
        .iter()
        .map(|v| distinct.binary_search(v).expect("value present"))
        .collect();
    (idx, distinct.len())
}

/// Reads `NAME_A.txt`, `NAME_graph_indicator.txt`, `NAME_graph_labels.txt`
/// and, when present, `NAME_node_labels.txt` from `dir`.
pub fn load_tu_dataset(dir: &Path, name: &str) -> Result<TuDataset> {
    let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));

    let ind_path = file("graph_indicator");
    let indicator: Vec<usize> = column(&ind_path)?;
    let mut starts = Vec::new();
    for (k, &gid) in indicator.iter().enumerate() {
        let expected_new = starts.len() + 1;
        if gid == expected_new {
            starts.push(k);
        } else if gid != starts.len() || starts.is_empty() {
            return Err(parse_error(
                &ind_path,
                k + 1,
                format!("graph id {gid} breaks the contiguous 1-based ordering"),
            ));
        }
    }
    let graph_count = starts.len();
    let total = indicator.len();
    let end_of = |g: usize| starts.get(g + 1).copied().unwrap_or(total);

    let label_path = file("graph_labels");
    let raw_labels: Vec<i64> = column(&label_path)?;
    if raw_labels.len() != graph_count {
        return Err(data_error(
            &label_path,
            format!("{} labels for {graph_count} graphs", raw_labels.len()),
        ));
    }
    let (labels, class_count) = remap(&raw_labels);

    let a_path = file("A");
    let text = read(&a_path)?;
    let mut per_graph: Vec<Vec<(usize, usize)>> = vec![Vec::new(); graph_count];
    for r in lines(&a_path, &text) {
        let (line, l) = r?;
        let toks: Vec<&str> = l.split(',').collect();
        if toks.len() != 2 {
            return Err(parse_error(&a_path, line, "expected `a, b`"));
        }
        let (a, b): (usize, usize) = (field(&a_path, line, toks[0])?, field(&a_path, line, toks[1])?);
        if a == 0 || b == 0 || a > total || b > total {
            return Err(parse_error(&a_path, line, format!("node id outside 1..={total}")));
        }
        let (ga, gb) = (indicator[a - 1], indicator[b - 1]);
        if ga != gb {
            return Err(parse_error(
                &a_path,
                line,
                format!("edge ({a}, {b}) joins graphs {ga} and {gb}"),
            ));
        }
        let off = starts[ga - 1];
        per_graph[ga - 1].push((a - 1 - off, b - 1 - off));
    }
    let mut graphs = Vec::with_capacity(graph_count);
    for (g, edges) in per_graph.iter().enumerate() {
        let n = end_of(g) - starts[g];
        graphs.push(Graph::from_edges_dedup(n, edges).map_err(|e| data_error(&a_path, format!("graph {}: {e}", g + 1)))?);
    }

    let nl_path = file("node_labels");
    let node_features = if nl_path.exists() {
        let raw: Vec<i64> = column(&nl_path)?;
        if raw.len() != total {
            return Err(data_error(&nl_path, format!("{} node labels for {total} nodes", raw.len())));
        }
        let (idx, width) = remap(&raw);
        let feats = (0..graph_count)
            .map(|g| {
                let (s, e) = (starts[g], end_of(g));
                let mut x = Tensor::zeros(e - s, width);
                for (row, &c) in idx[s..e].iter().enumerate() {
                    x.set(row, c, 1.0);
                }
                x
            })
            .collect();
        Some(feats)
    } else {
        None
    };

    Ok(TuDataset {
        name: name.to_string(),
        graphs,
        labels,
        class_count,
        node_features,
    })
}

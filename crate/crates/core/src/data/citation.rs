use std::path::{Path, PathBuf};

use super::text::{column, data_error, field, lines, parse_error, read};
use crate::diff::Tensor;
use crate::error::Result;
use crate::eval::NodeSplit;
use crate::graph::Graph;

/// Single graph with node features and node labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CitationDataset {
    pub name: String,
    pub graph: Graph,
    pub features: Tensor,
    pub labels: Vec<usize>,
    pub class_count: usize,
    /// Split shipped with the dataset, if any.
    pub split: Option<NodeSplit>,
}

/// Node-index lists for train, validation and test.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFiles {
    pub train: PathBuf,
    pub val: PathBuf,
    pub test: PathBuf,
}

fn read_indices(path: &Path, n: usize) -> Result<Vec<usize>> {
    let idx: Vec<usize> = column(path)?;
    if let Some(pos) = idx.iter().position(|&i| i >= n) {
        return Err(parse_error(path, pos + 1, format!("node index {} outside 0..{n}", idx[pos])));
    }
    Ok(idx)
}

/// Loads an edge list (two 0-based indices per line), a feature file (one
/// row per node) and a label file (one integer per node). The node count is
/// the number of labels.
pub fn load_edgelist_dataset(
    name: &str,
    edges: &Path,
    features: &Path,
    labels: &Path,
    splits: Option<&SplitFiles>,
) -> Result<CitationDataset> {
    let labels_v: Vec<usize> = column(labels)?;
    let n = labels_v.len();
    if n == 0 {
        return Err(data_error(labels, "no labels"));
    }
    let class_count = labels_v.iter().max().map_or(0, |&m| m + 1);

    let text = read(features)?;
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for r in lines(features, &text) {
        let (line, l) = r?;
        let before = data.len();
        for tok in l.split_whitespace() {
            data.push(field::<f64>(features, line, tok)?);
        }
        let w = data.len() - before;
        match width {
            None => width = Some(w),
            Some(prev) if prev != w => {
                return Err(parse_error(features, line, format!("row has {w} values, expected {prev}")));
            }
            _ => {}
        }
        rows += 1;
    }
    if rows != n {
        return Err(data_error(features, format!("{rows} feature rows for {n} labeled nodes")));
    }
    let features_t = Tensor::from_vec(n, width.unwrap_or(0), data)?;

    let text = read(edges)?;
    let mut pairs = Vec::new();
    for r in lines(edges, &text) {
        let (line, l) = r?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(parse_error(edges, line, format!("expected two indices, got {}", toks.len())));
        }
        let (a, b): (usize, usize) = (field(edges, line, toks[0])?, field(edges, line, toks[1])?);
        if a >= n || b >= n {
            return Err(parse_error(edges, line, format!("node index outside 0..{n}")));
        }
        if a == b {
            return Err(parse_error(edges, line, format!("self-loop on node {a}")));
        }
        pairs.push((a, b));
    }
    let graph = Graph::from_edges_dedup(n, &pairs)?;

    let split = match splits {
        None => None,
        Some(s) => Some(NodeSplit {
            train: read_indices(&s.train, n)?,
            val: read_indices(&s.val, n)?,
            test: read_indices(&s.test, n)?,
            fallback: false,
        }),
    };

    Ok(CitationDataset {
        name: name.to_string(),
        graph,
        features: features_t,
        labels: labels_v,
        class_count,
        split,
    })
}

#[cfg(test)]
mod tests {
    use std::fs;

    use super::*;
    use crate::error::Error;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn triangle() {
        let d = tempfile::tempdir().unwrap();
        let e = write(d.path(), "e", "0 1\n1 2\n2 0\n");
        let f = write(d.path(), "f", "1 0\n0 1\n0.5 0.5\n");
        let l = write(d.path(), "l", "0\n1\n1\n");
        let ds = load_edgelist_dataset("tri", &e, &f, &l, None).unwrap();
        assert_eq!(ds.graph.degrees(), &[2, 2, 2]);
        assert_eq!(ds.features.shape(), (3, 2));
        assert_eq!(ds.class_count, 2);
        assert_eq!(ds, load_edgelist_dataset("tri", &e, &f, &l, None).unwrap());
    }

    #[test]
    fn reversed_duplicate_collapses() {
        let d = tempfile::tempdir().unwrap();
        let e = write(d.path(), "e", "0 1\n1 0\n");
        let f = write(d.path(), "f", "1\n1\n");
        let l = write(d.path(), "l", "0\n0\n");
        let ds = load_edgelist_dataset("x", &e, &f, &l, None).unwrap();
        assert_eq!(ds.graph.edge_count(), 1);
    }

    #[test]
    fn row_count_mismatch() {
        let d = tempfile::tempdir().unwrap();
        let e = write(d.path(), "e", "0 1\n");
        let f = write(d.path(), "f", "1\n1\n");
        let l = write(d.path(), "l", "0\n0\n0\n");
        assert!(matches!(load_edgelist_dataset("x", &e, &f, &l, None), Err(Error::Data { .. })));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let d = tempfile::tempdir().unwrap();
        let f = write(d.path(), "f", "1\n1\n");
        let l = write(d.path(), "l", "0\n0\n");
        let bad = write(d.path(), "e", "0 1\n0 x\n");
        match load_edgelist_dataset("x", &bad, &f, &l, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let overflow = write(d.path(), "e2", "0 5\n");
        match load_edgelist_dataset("x", &overflow, &f, &l, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        let ragged = write(d.path(), "f2", "1 2\n1\n");
        let e = write(d.path(), "e3", "0 1\n");
        assert!(matches!(load_edgelist_dataset("x", &e, &ragged, &l, None), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn split_files() {
        let d = tempfile::tempdir().unwrap();
        let e = write(d.path(), "e", "0 1\n");
        let f = write(d.path(), "f", "1\n1\n1\n");
        let l = write(d.path(), "l", "0\n1\n0\n");
        let s = SplitFiles {
            train: write(d.path(), "tr", "0\n"),
            val: write(d.path(), "va", "1\n"),
            test: write(d.path(), "te", "2\n"),
        };
        let ds = load_edgelist_dataset("x", &e, &f, &l, Some(&s)).unwrap();
        let split = ds.split.unwrap();
        assert_eq!((split.train, split.val, split.test), (vec![0], vec![1], vec![2]));
        assert!(!split.fallback);
        let bad = SplitFiles {
            test: write(d.path(), "te2", "3\n"),
            ..s
        };
        assert!(load_edgelist_dataset("x", &e, &f, &l, Some(&bad)).is_err());
    }
}

use std::fmt::Write as _;
use std::path::Path;

use super::text::{field, parse_error, read};
use crate::diff::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmbeddingHeader {
    pub dataset: String,
    pub layer: usize,
    pub dim: usize,
}

/// Writes `# dataset=<name> layer=<l> dim=<d>` followed by one row per node.
/// Values use the shortest representation that parses back to the same
/// `f64`.
pub fn write_embeddings(path: &Path, dataset: &str, layer: usize, h: &Tensor) -> Result<()> {
    if dataset.chars().any(char::is_whitespace) {
        return Err(Error::InvalidInput(format!("dataset name `{dataset}` contains whitespace")));
    }
    let mut out = String::new();
    writeln!(out, "# dataset={dataset} layer={layer} dim={}", h.cols()).expect("string write");
    for i in 0..h.rows() {
        let row: Vec<String> = h.row(i).iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_embeddings(path: &Path) -> Result<(EmbeddingHeader, Tensor)> {
    let text = read(path)?;
    let mut lines = text.lines();
    let head = lines.next().ok_or_else(|| parse_error(path, 1, "missing header"))?;
    let rest = head
        .strip_prefix("# ")
        .ok_or_else(|| parse_error(path, 1, "header must start with `# `"))?;
    let (mut dataset, mut layer, mut dim) = (None, None, None);
    for kv in rest.split_whitespace() {
        match kv.split_once('=') {
            Some(("dataset", v)) => dataset = Some(v.to_string()),
            Some(("layer", v)) => layer = Some(field::<usize>(path, 1, v)?),
            Some(("dim", v)) => dim = Some(field::<usize>(path, 1, v)?),
            _ => return Err(parse_error(path, 1, format!("unexpected header entry `{kv}`"))),
        }
    }
    let header = match (dataset, layer, dim) {
        (Some(dataset), Some(layer), Some(dim)) => EmbeddingHeader { dataset, layer, dim },
        _ => return Err(parse_error(path, 1, "header needs dataset, layer and dim")),
    };
    let mut data = Vec::new();
    let mut rows = 0;
    for (k, l) in lines.enumerate() {
        let before = data.len();
        for tok in l.split_whitespace() {
            data.push(field::<f64>(path, k + 2, tok)?);
        }
        if data.len() - before != header.dim {
            return Err(parse_error(path, k + 2, format!("expected {} values", header.dim)));
        }
        rows += 1;
    }
    let t = Tensor::from_vec(rows, header.dim, data)?;
    Ok((header, t))
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn round_trip() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("emb.txt");
        let h = Tensor::uniform(5, 3, 10.0, &mut ChaCha8Rng::seed_from_u64(0));
        write_embeddings(&p, "cora", 2, &h).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("# dataset=cora layer=2 dim=3\n"));
        assert_eq!(text.lines().count(), 6);
        let (header, back) = read_embeddings(&p).unwrap();
        assert_eq!(
            header,
            EmbeddingHeader {
                dataset: "cora".into(),
                layer: 2,
                dim: 3
            }
        );
        assert_eq!(back, h);
    }

    #[test]
    fn rejects_short_rows() {
        let d = tempfile::tempdir().unwrap();
        let p = d.path().join("emb.txt");
        std::fs::write(&p, "# dataset=x layer=1 dim=2\n1 2\n3\n").unwrap();
        assert!(matches!(read_embeddings(&p), Err(Error::Parse { line: 3, .. })));
    }
}

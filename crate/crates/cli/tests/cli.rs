use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use isoc_vgae::data::{load_checkpoint, read_embeddings, MANIFEST_FILE, PAYLOAD_FILE};

const BIN: &str = env!("CARGO_BIN_EXE_isoc-vgae");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

/// Two 15-node communities with community-dependent features.
fn write_citation(dir: &Path) {
    let n = 30;
    let mut edges = String::new();
    for i in 0..n {
        for j in i + 1..n {
            let same = (i < 15) == (j < 15);
            if same && (j == i + 1 || (i * 7 + j * 3) % 5 == 0) {
                edges.push_str(&format!("{i} {j}\n"));
            }
        }
    }
    edges.push_str("0 29\n");
    let mut features = String::new();
    let mut labels = String::new();
    for i in 0..n {
        let c = usize::from(i >= 15);
        let row: Vec<String> = (0..4).map(|k| if k % 2 == c || (i + k) % 3 == 0 { "1" } else { "0" }.into()).collect();
        features.push_str(&row.join(" "));
        features.push('\n');
        labels.push_str(&format!("{c}\n"));
    }
    fs::write(dir.join("toy.edges"), edges).unwrap();
    fs::write(dir.join("toy.features"), features).unwrap();
    fs::write(dir.join("toy.labels"), labels).unwrap();
}

const SMALL: &str = r#"
[model]
dims = [6, 6]
decoder_hidden = 8

[train]
max_epochs = 5
learning_rate = 0.01

[head]
hidden = 8
layers = 2
max_epochs = 20
"#;

fn citation_config(dir: &Path, task: &str) -> PathBuf {
    write_citation(dir);
    let text = format!(
        "task = \"{task}\"\n[data]\nformat = \"edgelist\"\nname = \"toy\"\nedges = \"toy.edges\"\nfeatures = \"toy.features\"\nlabels = \"toy.labels\"\n{SMALL}"
    );
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p
}

/// Six small graphs: paths are class 0, cycles class 1.
fn tu_config(dir: &Path) -> PathBuf {
    let tu = dir.join("TOY");
    fs::create_dir(&tu).unwrap();
    let (mut a, mut ind, mut gl) = (String::new(), String::new(), String::new());
    let mut offset = 1;
    for g in 0..10 {
        let size = 4 + g % 3;
        let cycle = g % 2 == 1;
        for k in 0..size {
            ind.push_str(&format!("{}\n", g + 1));
            let next = if k + 1 < size { Some(k + 1) } else if cycle { Some(0) } else { None };
            if let Some(m) = next {
                a.push_str(&format!("{}, {}\n{}, {}\n", offset + k, offset + m, offset + m, offset + k));
            }
        }
        gl.push_str(if cycle { "1\n" } else { "-1\n" });
        offset += size;
    }
    fs::write(tu.join("TOY_A.txt"), a).unwrap();
    fs::write(tu.join("TOY_graph_indicator.txt"), ind).unwrap();
    fs::write(tu.join("TOY_graph_labels.txt"), gl).unwrap();
    let text = format!("task = \"graph\"\n[data]\nformat = \"tu\"\nname = \"TOY\"\ndir = \"TOY\"\n{SMALL}\n[eval]\nseeds = 2\n");
    let p = dir.join("graph.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn gradcheck_default_passes() {
    let o = run(&["gradcheck"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS"));
}

#[test]
fn gradcheck_single_layer_and_gin() {
    assert_eq!(code(&run(&["gradcheck", "--layers", "1"])), 0);
    assert_eq!(code(&run(&["gradcheck", "--layer-kind", "gin"])), 0);
}

#[test]
fn gradcheck_corrupted_gradient_fails() {
    let o = run(&["gradcheck", "--corrupt", "enc.0.w"]);
    assert_eq!(code(&o), 4);
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn gradcheck_rejects_large_instances() {
    assert_eq!(code(&run(&["gradcheck", "--nodes", "40"])), 2);
}

#[test]
fn train_one_epoch_logs_one_row() {
    let d = tempfile::tempdir().unwrap();
    let cfg = citation_config(d.path(), "node");
    let out = d.path().join("run");
    let o = run(&["train", "-c", cfg.to_str().unwrap(), "--max-epochs", "1", "-o", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let log = fs::read_to_string(out.join("loss.tsv")).unwrap();
    let rows: Vec<&str> = log.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "epoch\tl_self\tl_nei\tl_deg\ttotal");
    assert_eq!(rows.len(), 2);
    assert!(rows[1].starts_with("1\t"));
    assert!(log.lines().next().unwrap().contains("\"max_epochs\":1"));
    assert!(stdout(&o).contains("total "));
    let ckpt = load_checkpoint(&out.join("checkpoint")).unwrap();
    assert_eq!(ckpt.config["train"]["max_epochs"], 1);
}

#[test]
fn same_seed_gives_identical_checkpoints() {
    let d = tempfile::tempdir().unwrap();
    let cfg = citation_config(d.path(), "node");
    let mut bytes = Vec::new();
    for name in ["a", "b"] {
        let out = d.path().join(name);
        let o = run(&["train", "-c", cfg.to_str().unwrap(), "--seed", "7", "-o", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        let ck = out.join("checkpoint");
        bytes.push((fs::read(ck.join(PAYLOAD_FILE)).unwrap(), fs::read(ck.join(MANIFEST_FILE)).unwrap()));
    }
    assert_eq!(bytes[0], bytes[1]);
}

#[test]
fn missing_dataset_is_config_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = citation_config(d.path(), "node");
    fs::remove_file(d.path().join("toy.edges")).unwrap();
    let o = run(&["train", "-c", cfg.to_str().unwrap(), "-o", d.path().join("x").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("toy.edges"));
    assert!(!d.path().join("x").exists(), "nothing written before validation");
}

#[test]
fn unknown_key_is_config_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = citation_config(d.path(), "node");
    let text = fs::read_to_string(&cfg).unwrap().replace("[train]", "[train]\nlearning_rat = 1");
    fs::write(&cfg, text).unwrap();
    let o = run(&["train", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("learning_rat"));
}

#[test]
fn malformed_data_is_data_error() {
    let d = tempfile::tempdir().unwrap();
    let cfg = citation_config(d.path(), "node");
    fs::write(d.path().join("toy.labels"), "0\n1\nx\n").unwrap();
    let o = run(&["train", "-c", cfg.to_str().unwrap(), "-o", d.path().join("x").to_str().unwrap()]);
    assert_eq!(code(&o), 3);
}

#[test]
fn link_ratios_must_sum_to_one() {
    let d = tempfile::tempdir().unwrap();
    let cfg = citation_config(d.path(), "link");
    let o = run(&["eval", "-c", cfg.to_str().unwrap(), "--checkpoint", "none", "--split", "0.8,0.05,0.05"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn eval_reports_mean_and_std_over_seeds() {
    let d = tempfile::tempdir().unwrap();
    let cfg = citation_config(d.path(), "node");
    let out = d.path().join("run");
    assert_eq!(code(&run(&["train", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()])), 0);
    let ck = out.join("checkpoint");
    let table = d.path().join("eval.tsv");
    let o = run(&[
        "eval",
        "-c",
        cfg.to_str().unwrap(),
        "--checkpoint",
        ck.to_str().unwrap(),
        "--seeds",
        "5",
        "-o",
        table.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(table).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 2);
    let fields: Vec<&str> = rows[1].split('\t').collect();
    assert_eq!(&fields[1..3], ["toy", "accuracy"]);
    assert_eq!(fields[5], "5");
    let acc: f64 = fields[3].parse().unwrap();
    assert!((0.0..=1.0).contains(&acc));
}

#[test]
fn eval_rejects_incompatible_checkpoint() {
    let d = tempfile::tempdir().unwrap();
    let cfg = citation_config(d.path(), "node");
    let out = d.path().join("run");
    assert_eq!(code(&run(&["train", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()])), 0);
    let ck = out.join("checkpoint");
    let o = run(&["eval", "-c", cfg.to_str().unwrap(), "--checkpoint", ck.to_str().unwrap(), "--dims", "5,5"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("shape"));
}

#[test]
fn export_embeddings_round_trip() {
    let d = tempfile::tempdir().unwrap();
    let cfg = citation_config(d.path(), "link");
    let out = d.path().join("run");
    assert_eq!(code(&run(&["train", "-c", cfg.to_str().unwrap(), "-o", out.to_str().unwrap()])), 0);
    let ck = out.join("checkpoint");
    let emb = d.path().join("h.txt");
    let o = run(&[
        "export-embeddings",
        "-c",
        cfg.to_str().unwrap(),
        "--checkpoint",
        ck.to_str().unwrap(),
        "-o",
        emb.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, h) = read_embeddings(&emb).unwrap();
    assert_eq!((header.dataset.as_str(), header.layer, header.dim), ("toy", 2, 6));
    assert_eq!(h.shape(), (30, 6));
    assert!(d.path().join("h.txt.config.toml").exists());
    let bad = run(&[
        "export-embeddings",
        "-c",
        cfg.to_str().unwrap(),
        "--checkpoint",
        ck.to_str().unwrap(),
        "--layer",
        "3",
        "-o",
        emb.to_str().unwrap(),
    ]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn ablate_graph_task_table() {
    let d = tempfile::tempdir().unwrap();
    let cfg = tu_config(d.path());
    let o = run(&["ablate", "-c", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows[1].starts_with("full\tTOY\taccuracy\t"));
    assert!(rows.iter().skip(1).all(|r| r.ends_with("\t2")));

    let sweep = run(&["ablate", "-c", cfg.to_str().unwrap(), "--sweep", "lambda_deg", "--values", "0.01,1", "--parallel"]);
    assert_eq!(code(&sweep), 0);
    assert!(stdout(&sweep).contains("lambda_deg=0.01\tTOY"));
}

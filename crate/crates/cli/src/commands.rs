use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use isoc_vgae::config::RunConfig;
use isoc_vgae::data::{load_checkpoint, save_checkpoint, write_embeddings};
use isoc_vgae::diff::Tensor;
use isoc_vgae::encoder::{EmbeddingStack, EncoderConfig};
use isoc_vgae::eval::{MetricRow, MetricTable};
use isoc_vgae::model::{gradcheck_instance, gradient_check_with, ModelConfig};
use isoc_vgae::pipeline::{embed, lambda_sweep, run_ablation, run_seeds, Dataset, Prepared, Task, TaskSpec};
use isoc_vgae::{Error, Result};

use crate::{AblateArgs, EvalArgs, ExportArgs, GradcheckArgs, TrainArgs};

const MAX_GRADCHECK_NODES: usize = 16;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(path, text).map_err(io_err(path))
}

/// Writes to stdout, tolerating a closed pipe (e.g. output piped to `head`).
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

/// One-line JSON form of the effective configuration, for artifact headers.
fn echo(cfg: &RunConfig) -> String {
    serde_json::to_string(cfg).expect("config serializes")
}

fn table_text(cfg: &RunConfig, table: &MetricTable) -> String {
    format!("# config {}\n{}", echo(cfg), table.to_delimited('\t'))
}

struct Loaded {
    cfg: RunConfig,
    ds: Dataset,
    spec: TaskSpec,
}

fn load(run: &crate::ConfigArgs) -> Result<Loaded> {
    let cfg = run.resolve()?;
    let ds = cfg.load_dataset()?;
    let spec = cfg.task_spec(&ds)?;
    Ok(Loaded { cfg, ds, spec })
}

/// Embeddings of the training graphs under a saved checkpoint.
fn checkpoint_embeddings(l: &Loaded, checkpoint: &Path) -> Result<(Prepared, Vec<EmbeddingStack>)> {
    let ckpt = load_checkpoint(checkpoint)?;
    l.spec.train.model().check_params(&ckpt.params)?;
    let prepared = l.spec.prepare(&l.ds, l.cfg.train.seed)?;
    let stacks = embed(&prepared, &ckpt.params, &l.spec.train.encoder)?;
    Ok((prepared, stacks))
}

pub fn train(a: &TrainArgs) -> Result<bool> {
    let l = load(&a.run)?;
    let seed = l.cfg.train.seed;
    let prepared = l.spec.prepare(&l.ds, seed)?;

    fs::create_dir_all(&a.out).map_err(io_err(&a.out))?;
    let log_path = a.out.join("loss.tsv");
    let mut log = BufWriter::new(File::create(&log_path).map_err(io_err(&log_path))?);
    let mut write_failure = None;
    let mut line = |text: String| {
        if write_failure.is_none() {
            if let Err(e) = writeln!(log, "{text}") {
                write_failure = Some(e);
            }
        }
    };
    line(format!("# config {}", echo(&l.cfg)));
    line("epoch\tl_self\tl_nei\tl_deg\ttotal".into());
    let out = l.spec.train(&prepared, seed, |r| {
        log::info!("epoch {} total {:.6}", r.epoch, r.total);
        line(format!("{}\t{}\t{}\t{}\t{}", r.epoch, r.l_self, r.l_nei, r.l_deg, r.total));
    })?;
    if let Some(e) = write_failure {
        return Err(io_err(&log_path)(e));
    }
    log.flush().map_err(io_err(&log_path))?;

    save_checkpoint(&out.params, &l.cfg, &out.rng, &a.out.join("checkpoint"))?;
    write_text(&a.out.join("config.toml"), &l.cfg.to_toml_string()?)?;

    let last = out.report.history.last().expect("at least one epoch");
    emit(&format!(
        "epochs {} ({:?})\nl_self {}\nl_nei {}\nl_deg {}\ntotal {}\n",
        out.report.epochs, out.report.stop_reason, last.l_self, last.l_nei, last.l_deg, last.total
    ));
    Ok(true)
}

pub fn eval(a: &EvalArgs) -> Result<bool> {
    let l = load(&a.run)?;
    let (prepared, stacks) = checkpoint_embeddings(&l, &a.checkpoint)?;
    let split_seed = l.cfg.train.seed;
    let seeds = if l.spec.task == Task::Link {
        if l.cfg.eval.seeds > 1 {
            log::warn!("link scores come from inner products alone; reporting a single value");
        }
        vec![split_seed]
    } else {
        l.cfg.seeds()
    };
    let values = run_seeds(&seeds, a.parallel, |s| {
        l.spec.evaluate(&l.ds, &prepared, &stacks, split_seed, s)
    })?;
    let row = MetricRow::new("checkpoint", l.ds.name(), l.spec.metric_name(), values);
    emit(&format!("{}: {:.4} ± {:.4} over {} seed(s)\n", row.metric, row.mean, row.std, row.seeds));
    let table = MetricTable { rows: vec![row] };
    let text = table_text(&l.cfg, &table);
    emit(&text);
    if let Some(out) = &a.out {
        write_text(out, &text)?;
    }
    Ok(true)
}

pub fn gradcheck(a: &GradcheckArgs) -> Result<bool> {
    if a.nodes == 0 || a.nodes > MAX_GRADCHECK_NODES {
        return Err(Error::Config(format!(
            "gradcheck needs 1..={MAX_GRADCHECK_NODES} nodes, got {}",
            a.nodes
        )));
    }
    if a.layers == 0 {
        return Err(Error::Config("gradcheck needs at least one layer".into()));
    }
    if !(a.step > 0.0 && a.tolerance > 0.0) {
        return Err(Error::Config("step and tolerance must be positive".into()));
    }
    let model = ModelConfig {
        encoder: EncoderConfig::new(a.layer_kind, vec![a.dim; a.layers + 1])?,
        decoder_hidden: a.decoder_hidden,
    };
    model.validate()?;
    let (input, params, noise) = gradcheck_instance(a.nodes, a.edge_prob, &model, a.seed)?;
    if let Some(name) = &a.corrupt {
        if !params.contains(name) {
            return Err(Error::Config(format!("no parameter named `{name}`")));
        }
    }
    let report = gradient_check_with(
        &model,
        &input,
        &params,
        &noise,
        (a.lambda_nei, a.lambda_deg),
        a.step,
        a.tolerance,
        |g| {
            if let Some(t) = a.corrupt.as_deref().and_then(|n| g.get_mut(n)) {
                if let Some(v) = t.data_mut().first_mut() {
                    *v += 1.0;
                }
            }
        },
    )?;
    emit(&format!("{report}\n"));
    Ok(report.passed())
}

pub fn ablate(a: &AblateArgs) -> Result<bool> {
    let l = load(&a.run)?;
    let seeds = l.cfg.seeds();
    let table = match a.sweep {
        None => run_ablation(&l.ds, &l.spec, &a.variants, &seeds, a.parallel)?,
        Some(target) => {
            if a.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Config("sweep values must be finite and non-negative".into()));
            }
            lambda_sweep(&l.ds, &l.spec, target, &a.values, &seeds, a.parallel)?
        }
    };
    let text = table_text(&l.cfg, &table);
    emit(&text);
    if let Some(out) = &a.out {
        write_text(out, &text)?;
    }
    Ok(true)
}

/// The embedding file keeps its one-line header; the effective configuration
/// goes next to it as `<out>.config.toml`.
pub fn export(a: &ExportArgs) -> Result<bool> {
    let l = load(&a.run)?;
    let depth = l.spec.train.encoder.num_layers();
    let layer = a.layer.unwrap_or(depth);
    if layer > depth {
        return Err(Error::Config(format!("layer {layer} outside 0..={depth}")));
    }
    let (_, stacks) = checkpoint_embeddings(&l, &a.checkpoint)?;
    let blocks: Vec<Tensor> = stacks.iter().map(|s| s.layer(layer).clone()).collect();
    let h = Tensor::vstack(&blocks)?;
    write_embeddings(&a.out, l.ds.name(), layer, &h)?;
    let mut sidecar = a.out.clone().into_os_string();
    sidecar.push(".config.toml");
    write_text(&PathBuf::from(sidecar), &l.cfg.to_toml_string()?)?;
    emit(&format!("wrote {} rows of width {} to {}\n", h.rows(), h.cols(), a.out.display()));
    Ok(true)
}

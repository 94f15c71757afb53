use std::fs;
use std::path::{Path, PathBuf};

use super::config::{ensure_writable, RunConfig};
use super::plots::plot_rows;
use crate::error::{Error, Result};
use crate::fem::io::{read_dataset, write_dataset, Manifest, MANIFEST_FILE};
use crate::fem::{generate_dataset, generate_mesh, DatasetOptions};
use crate::metrics::{
    read_rows_csv, run_benchmark, write_report_json, write_rows_csv, BenchOptions, BenchmarkReport, BenchmarkRow,
    Method,
};
use crate::model::{load_checkpoint, save_checkpoint, standard_normal, Gcvae, ModelConfig};
use crate::rng::{derive_indexed, derive_seed};
use crate::sparse::{build_mask, matrix_market, SparsityMask};
use crate::training::{train, TrainConfig, TrainOutputs, TrainRecord};

pub const MODEL_FILE: &str = "model.ckpt";
pub const TRAIN_LOG_FILE: &str = "train_log.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";
pub const BENCH_CSV_FILE: &str = "bench.csv";
pub const BENCH_JSON_FILE: &str = "bench.json";

/// Seeds of the independent random streams of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedPlan {
    pub mesh: u64,
    pub data: u64,
    pub model: u64,
    pub train: u64,
    pub bench: u64,
}

impl SeedPlan {
    pub fn new(master: u64) -> Self {
        Self {
            mesh: derive_seed(master, "mesh"),
            data: derive_seed(master, "data"),
            model: derive_seed(master, "model"),
            train: derive_seed(master, "train"),
            bench: derive_seed(master, "bench"),
        }
    }
}

fn sibling(dir: &Path, suffix: &str) -> PathBuf {
    let mut name = dir
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_else(|| "data".into());
    name.push(suffix);
    dir.with_file_name(name)
}

fn remove_dir_if_exists(dir: &Path) -> Result<()> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

/// Generates the dataset into `paths.data_dir` and returns the manifest path.
///
/// Files are written to a staging directory that is renamed into place only
/// after the manifest has been written and validated. On failure the staging
/// directory is moved to `<data_dir>.failed`, so `data_dir` never holds a
/// half-written dataset.
pub fn cmd_gen_data(cfg: &RunConfig) -> Result<PathBuf> {
    cfg.validate()?;
    let dir = &cfg.paths.data_dir;
    let parent = dir
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    ensure_writable(parent)?;
    let seeds = SeedPlan::new(cfg.seed);
    publish_staged(dir, |staging| {
        let mesh = generate_mesh(cfg.family.mesh_nodes_for(cfg.target_n), seeds.mesh)?;
        let split = generate_dataset(
            cfg.family,
            &mesh,
            cfg.n_samples,
            cfg.extra_fraction(),
            seeds.data,
            &DatasetOptions::default(),
        )?;
        log::info!(
            "generated {} train / {} test samples with n = {}",
            split.train.len(),
            split.test.len(),
            split.dim().unwrap_or(0)
        );
        write_dataset(staging, &split)?;
        Manifest::read(staging)?.validate(staging)?;
        cfg.save_resolved(staging)?;
        Ok(())
    })?;
    Ok(dir.join(MANIFEST_FILE))
}

/// Runs `build` on `<dir>.partial` and renames the result to `dir` on
/// success. On failure the staging directory loses its manifest and is moved
/// to `<dir>.failed`; `dir` is left untouched.
fn publish_staged(dir: &Path, build: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let staging = sibling(dir, ".partial");
    let quarantine = sibling(dir, ".failed");
    remove_dir_if_exists(&staging)?;
    if let Err(e) = build(&staging) {
        if staging.exists() {
            let _ = fs::remove_file(staging.join(MANIFEST_FILE));
            let _ = remove_dir_if_exists(&quarantine);
            if let Err(mv) = fs::rename(&staging, &quarantine) {
                log::warn!("could not quarantine {}: {mv}", staging.display());
            }
        }
        return Err(e);
    }
    remove_dir_if_exists(dir)?;
    fs::rename(&staging, dir).map_err(|e| Error::io(dir, e))
}

pub fn train_config(cfg: &RunConfig) -> TrainConfig {
    let mut t = TrainConfig::for_profile(cfg.train_profile, SeedPlan::new(cfg.seed).train);
    let o = &cfg.train;
    if let Some(v) = o.epochs {
        t.epochs = v;
    }
    if let Some(v) = o.learning_rate {
        t.learning_rate = v;
    }
    if let Some(v) = o.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = o.early_stop_window {
        t.early_stop_window = v;
    }
    t
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub log: PathBuf,
    pub records: Vec<TrainRecord>,
}

/// Trains on the dataset in `paths.data_dir` and writes the final model,
/// the CSV log and periodic checkpoints to `paths.model_dir`.
pub fn cmd_train(cfg: &RunConfig) -> Result<TrainSummary> {
    cfg.validate()?;
    let out = &cfg.paths.model_dir;
    ensure_writable(out)?;
    let split = read_dataset(&cfg.paths.data_dir, true)?;
    let n = split
        .dim()
        .ok_or_else(|| Error::InvalidInput("dataset is empty".into()))?;
    let model_cfg = ModelConfig::for_profile(cfg.model_profile, n, SeedPlan::new(cfg.seed).model);
    let train_cfg = train_config(cfg);
    let log = out.join(TRAIN_LOG_FILE);
    let ckpt_dir = out.join(CHECKPOINT_DIR);
    remove_dir_if_exists(&ckpt_dir)?;
    let outcome = train(
        &split,
        &model_cfg,
        &train_cfg,
        &TrainOutputs {
            log: Some(log.clone()),
            checkpoint_dir: Some(ckpt_dir),
        },
    )?;
    let checkpoint = out.join(MODEL_FILE);
    save_checkpoint(&checkpoint, &outcome.model)?;
    cfg.save_resolved(out)?;
    Ok(TrainSummary {
        checkpoint,
        log,
        records: outcome.records,
    })
}

/// Sparsity pattern used for inference.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskPolicy {
    /// Matrix Market pattern file.
    File(PathBuf),
    /// `pattern(A)` extended by this fraction of `nnz(A)` entries from `pattern(A²)`.
    Extend(f64),
}

/// Draws `count` preconditioners for the matrix in `matrix` and writes them as
/// `R_000.mtx`, `R_001.mtx`, ... to `out_dir`.
pub fn cmd_infer(
    checkpoint: &Path,
    matrix: &Path,
    mask: &MaskPolicy,
    count: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if count == 0 {
        return Err(Error::Config("count must be >= 1".into()));
    }
    ensure_writable(out_dir)?;
    let model = load_checkpoint(checkpoint)?;
    let a = matrix_market::read_matrix(matrix)?;
    let expected = model.config().matrix_dim;
    if a.n_rows() != expected || !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "checkpoint expects a {expected}x{expected} matrix, got {}x{}",
            a.n_rows(),
            a.n_cols()
        )));
    }
    let mask: SparsityMask = match mask {
        MaskPolicy::File(p) => matrix_market::read_mask(p)?,
        MaskPolicy::Extend(f) => build_mask(&a, *f)?,
    };
    let z_seed = derive_seed(seed, "infer");
    (0..count)
        .map(|k| {
            let z = standard_normal(model.config().latent_dim, derive_indexed(z_seed, &[k as u64]));
            let r = model.infer(&a, &mask, &z)?;
            let path = out_dir.join(format!("R_{k:03}.mtx"));
            matrix_market::write_matrix(&path, &r)?;
            Ok(path)
        })
        .collect()
}

/// Loads the model checkpoint only when a method needs it.
pub fn load_model_for(methods: &[Method], checkpoint: &Path) -> Result<Option<Gcvae>> {
    if !methods.iter().any(|m| matches!(m, Method::Gcvae | Method::IcMatched)) {
        return Ok(None);
    }
    if !checkpoint.exists() {
        return Err(Error::Config(format!(
            "methods gcvae and ic_matched require a trained checkpoint; {} does not exist",
            checkpoint.display()
        )));
    }
    load_checkpoint(checkpoint).map(Some)
}

#[derive(Debug, Clone)]
pub struct BenchSummary {
    pub report: BenchmarkReport,
    pub csv: PathBuf,
    pub json: PathBuf,
    pub plots: Vec<PathBuf>,
}

/// Benchmarks the test split of `paths.data_dir` and writes `bench.csv`,
/// `bench.json` and the three plots to `paths.bench_dir`.
pub fn cmd_bench(cfg: &RunConfig) -> Result<BenchSummary> {
    cfg.validate()?;
    let out = &cfg.paths.bench_dir;
    ensure_writable(out)?;
    let methods = cfg.methods()?;
    let model = load_model_for(&methods, &cfg.paths.model_dir.join(MODEL_FILE))?;
    let split = read_dataset(&cfg.paths.data_dir, false)?;
    let opts = BenchOptions {
        tol: cfg.bench.tol,
        max_iter: cfg.bench.max_iter,
        z_seed: SeedPlan::new(cfg.seed).bench,
        ..BenchOptions::default()
    };
    let report = run_benchmark(&split.test, &methods, model.as_ref(), &opts)?;
    let csv = out.join(BENCH_CSV_FILE);
    let json = out.join(BENCH_JSON_FILE);
    write_rows_csv(&csv, &report.rows)?;
    write_report_json(&json, &report)?;
    let plots = plot_rows(&report.rows, out)?;
    cfg.save_resolved(out)?;
    Ok(BenchSummary {
        report,
        csv,
        json,
        plots,
    })
}

/// Merges benchmark CSVs (typically one per `n`) and plots them together.
pub fn cmd_plot(csvs: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>> {
    if csvs.is_empty() {
        return Err(Error::Config("plot needs at least one benchmark CSV".into()));
    }
    let mut rows: Vec<BenchmarkRow> = Vec::new();
    for p in csvs {
        rows.extend(read_rows_csv(p)?);
    }
    plot_rows(&rows, out_dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failed_build_is_quarantined_without_manifest() {
        let root = tempfile::tempdir().unwrap();
        let dir = root.path().join("data");
        publish_staged(&dir, |s| {
            fs::create_dir_all(s).unwrap();
            fs::write(s.join(MANIFEST_FILE), "{}").unwrap();
            Ok(())
        })
        .unwrap();
        let err = publish_staged(&dir, |s| {
            fs::create_dir_all(s).unwrap();
            fs::write(s.join("half.bin"), "x").unwrap();
            fs::write(s.join(MANIFEST_FILE), "{}").unwrap();
            Err(Error::NonFinite("simulated".into()))
        })
        .unwrap_err();
        assert_eq!(err.category(), "non-finite");
        let q = root.path().join("data.failed");
        assert!(q.join("half.bin").exists());
        assert!(!q.join(MANIFEST_FILE).exists());
        assert!(!root.path().join("data.partial").exists());
        assert_eq!(fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap(), "{}");
    }

    #[test]
    fn seed_streams_are_distinct() {
        let s = SeedPlan::new(7);
        let all = [s.mesh, s.data, s.model, s.train, s.bench];
        for i in 0..all.len() {
            for j in 0..i {
                assert_ne!(all[i], all[j]);
            }
        }
        assert_eq!(SeedPlan::new(7), s);
    }
}

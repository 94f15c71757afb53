use std::fmt;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::loss::{kl_divergence, kl_gradient, DEFAULT_ALPHA};
use crate::error::{Error, Result};
use crate::fem::{DatasetSplit, ProblemSample};
use crate::model::{save_checkpoint, standard_normal, Gcvae, Gradients, ModelConfig};
use crate::rng::{derive_indexed, derive_seed, rng_from_seed};
use crate::sparse::{squared_residual_with_grad, CsrMatrix, SparsityMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainProfile {
    Poisson,
    Biharmonic,
    Small,
    Smoke,
}

impl fmt::Display for TrainProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainProfile::Poisson => "poisson",
            TrainProfile::Biharmonic => "biharmonic",
            TrainProfile::Small => "small",
            TrainProfile::Smoke => "smoke",
        })
    }
}

impl FromStr for TrainProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(Self::Poisson),
            "biharmonic" => Ok(Self::Biharmonic),
            "small" => Ok(Self::Small),
            "smoke" => Ok(Self::Smoke),
            other => Err(Error::Config(format!("unknown train profile '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub alpha: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// 0 disables periodic checkpoints.
    pub checkpoint_every: usize,
    /// Early stop when mean reconstruction improves by less than
    /// `early_stop_tolerance` (relative) over this many epochs; 0 disables.
    pub early_stop_window: usize,
    pub early_stop_tolerance: f64,
}

impl TrainConfig {
    pub fn for_profile(profile: TrainProfile, seed: u64) -> Self {
        let (epochs, batch_size, learning_rate) = match profile {
            TrainProfile::Poisson => (200, 16, 1e-3),
            TrainProfile::Biharmonic => (260, 16, 1e-3),
            TrainProfile::Small => (60, 16, 2e-3),
            TrainProfile::Smoke => (10, 4, 2e-3),
        };
        Self {
            alpha: DEFAULT_ALPHA,
            epochs,
            batch_size,
            learning_rate,
            seed,
            checkpoint_every: if profile == TrainProfile::Smoke { 5 } else { 20 },
            early_stop_window: 10,
            early_stop_tolerance: 1e-3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Epoch averages over the training samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epoch: usize,
    pub mean_recon: f64,
    pub mean_kl: f64,
    pub mean_total: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub recon: f64,
    pub kl: f64,
    pub total: f64,
}

/// Loss of one sample for a fixed noise draw and its gradient.
pub fn loss_and_gradient(
    model: &Gcvae,
    a: &CsrMatrix,
    a_inv: &DMatrix<f64>,
    mask: &SparsityMask,
    eps: &[f64],
    alpha: f64,
) -> Result<(LossParts, Gradients)> {
    let (out, cache) = model.forward_cached(a, a_inv, mask, eps)?;
    let (recon, dr) = squared_residual_with_grad(a, &out.r)?;
    let lat = &out.latent;
    let kl = kl_divergence(&lat.mu, &lat.log_var)?;
    let (mut dmu, mut dlv) = kl_gradient(&lat.mu, &lat.log_var);
    dmu.iter_mut().chain(dlv.iter_mut()).for_each(|v| *v *= alpha);
    let grads = model.backward(&cache, &dr, &dmu, &dlv);
    Ok((
        LossParts {
            recon,
            kl,
            total: recon + alpha * kl,
        },
        grads,
    ))
}

/// Noise draw for `sample_id` in `epoch`.
pub fn epoch_noise(seed: u64, epoch: usize, sample_id: usize, latent_dim: usize) -> Vec<f64> {
    let stream = derive_seed(seed, "eps");
    standard_normal(latent_dim, derive_indexed(stream, &[epoch as u64, sample_id as u64]))
}

/// Append-only CSV of [`TrainRecord`]s.
pub struct TrainLog {
    writer: csv::Writer<File>,
    path: PathBuf,
}

impl TrainLog {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            writer: csv::Writer::from_writer(file),
            path: path.to_path_buf(),
        })
    }

    pub fn append(&mut self, record: &TrainRecord) -> Result<()> {
        let io = |e: csv::Error| Error::io(&self.path, std::io::Error::other(e));
        self.writer.serialize(record).map_err(io)?;
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub fn read_train_log(path: &Path) -> Result<Vec<TrainRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e| Error::parse(path, e.to_string())))
        .collect()
}

/// Where training writes its artifacts.
#[derive(Debug, Clone, Default)]
pub struct TrainOutputs {
    pub log: Option<PathBuf>,
    pub checkpoint_dir: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Gcvae,
    pub records: Vec<TrainRecord>,
}

const MAX_RESTARTS: usize = 3;

/// Samples must share `n` and the pattern of `A`. Masks may differ once
/// extras are ranked by per-sample `|A²|` values; each sample trains on its own.
fn check_split(split: &DatasetSplit) -> Result<usize> {
    let first = split
        .train
        .first()
        .ok_or_else(|| Error::InvalidInput("training split is empty".into()))?;
    let n = first.dim();
    for s in &split.train {
        if s.dim() != n || s.a.row_ptr() != first.a.row_ptr() || s.a.col_idx() != first.a.col_idx() {
            return Err(Error::InvalidInput(format!(
                "sample {} does not share the dimension and sparsity pattern of sample {}",
                s.id, first.id
            )));
        }
        if s.a_inv.is_none() {
            return Err(Error::InvalidInput(format!("sample {} has no inverse", s.id)));
        }
    }
    Ok(n)
}

/// Minibatch Adam on the mean total loss with one noise draw per sample and
/// epoch. `model_cfg` is recalibrated to the training matrices.
pub fn train(
    split: &DatasetSplit,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    outputs: &TrainOutputs,
) -> Result<TrainOutcome> {
    train_cfg.validate()?;
    let n = check_split(split)?;
    if n != model_cfg.matrix_dim {
        return Err(Error::DimensionMismatch(format!(
            "model configured for n = {}, dataset has n = {n}",
            model_cfg.matrix_dim
        )));
    }
    let mut cfg = model_cfg.clone();
    cfg.calibrate(split.train.iter().map(|s| &s.a));
    let mut model = Gcvae::new(cfg)?;
    let mut opt = Adam::new(model.params(), train_cfg.learning_rate);
    let mut log = outputs.log.as_deref().map(TrainLog::create).transpose()?;
    if let Some(dir) = &outputs.checkpoint_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let latent_dim = model.config().latent_dim;
    let shuffle_seed = derive_seed(train_cfg.seed, "shuffle");
    let start = Instant::now();
    let mut records: Vec<TrainRecord> = Vec::with_capacity(train_cfg.epochs);

    for epoch in 1..=train_cfg.epochs {
        let mut order: Vec<usize> = (0..split.train.len()).collect();
        order.shuffle(&mut rng_from_seed(derive_indexed(shuffle_seed, &[epoch as u64])));
        let mut restarts = 0;
        let (sums, count) = loop {
            let snapshot = (model.params().clone(), opt.clone());
            match run_epoch(&mut model, &mut opt, &split.train, &order, epoch, train_cfg, latent_dim) {
                Ok(r) => break r,
                Err(Error::NonFinite(msg)) if restarts < MAX_RESTARTS => {
                    restarts += 1;
                    *model.params_mut() = snapshot.0;
                    opt = snapshot.1;
                    opt.lr /= 2.0;
                    log::warn!("epoch {epoch}: {msg}; restarting with learning rate {}", opt.lr);
                }
                Err(e) => return Err(e),
            }
        };
        let m = count as f64;
        let record = TrainRecord {
            epoch,
            mean_recon: sums.recon / m,
            mean_kl: sums.kl / m,
            mean_total: sums.total / m,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: recon {:.6e} kl {:.4e} total {:.6e}",
            record.mean_recon,
            record.mean_kl,
            record.mean_total
        );
        if let Some(log) = &mut log {
            log.append(&record)?;
        }
        records.push(record);
        if let Some(dir) = &outputs.checkpoint_dir {
            if train_cfg.checkpoint_every > 0 && epoch % train_cfg.checkpoint_every == 0 {
                save_checkpoint(dir.join(format!("epoch_{epoch:04}.ckpt")), &model)?;
            }
        }
        let w = train_cfg.early_stop_window;
        if w > 0 && records.len() > w {
            let before = records[records.len() - 1 - w].mean_recon;
            let now = records[records.len() - 1].mean_recon;
            if before - now < train_cfg.early_stop_tolerance * before {
                log::info!("early stop at epoch {epoch}: recon {before:.6e} -> {now:.6e} over {w} epochs");
                break;
            }
        }
    }
    Ok(TrainOutcome { model, records })
}

fn run_epoch(
    model: &mut Gcvae,
    opt: &mut Adam,
    samples: &[ProblemSample],
    order: &[usize],
    epoch: usize,
    cfg: &TrainConfig,
    latent_dim: usize,
) -> Result<(LossParts, usize)> {
    let mut sums = LossParts {
        recon: 0.0,
        kl: 0.0,
        total: 0.0,
    };
    for batch in order.chunks(cfg.batch_size) {
        let mut acc: Option<Gradients> = None;
        for &idx in batch {
            let s = &samples[idx];
            let eps = epoch_noise(cfg.seed, epoch, s.id, latent_dim);
            let a_inv = s.a_inv.as_ref().expect("checked by check_split");
            let (parts, grads) = loss_and_gradient(model, &s.a, a_inv, &s.mask, &eps, cfg.alpha)?;
            if !parts.total.is_finite() || !grads.is_finite() {
                return Err(Error::NonFinite(format!("loss of sample {} is {}", s.id, parts.total)));
            }
            sums.recon += parts.recon;
            sums.kl += parts.kl;
            sums.total += parts.total;
            match &mut acc {
                Some(g) => g.add_assign(&grads),
                None => acc = Some(grads),
            }
        }
        let mut g = acc.expect("batches are non-empty");
        g.scale(1.0 / batch.len() as f64);
        opt.step(model.params_mut(), &g);
        if !model.params().is_finite() {
            return Err(Error::NonFinite("parameters after optimizer step".into()));
        }
    }
    Ok((sums, order.len()))
}

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::Family;
use crate::metrics::{parse_methods, Method};
use crate::model::ModelProfile;
use crate::solvers::DEFAULT_TOL;
use crate::training::TrainProfile;

/// File name of the resolved configuration written next to every output.
pub const RESOLVED_CONFIG_FILE: &str = "run_config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    pub data_dir: PathBuf,
    pub model_dir: PathBuf,
    pub bench_dir: PathBuf,
}

impl Paths {
    pub fn under(root: &Path) -> Self {
        Self {
            data_dir: root.join("data"),
            model_dir: root.join("model"),
            bench_dir: root.join("bench"),
        }
    }
}

/// Optional overrides of the training profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub early_stop_window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSettings {
    pub methods: String,
    pub tol: f64,
    pub max_iter: usize,
}

impl BenchSettings {
    pub fn for_family(family: Family) -> Self {
        // At 1.2e-4 incomplete Cholesky often breaks down on biharmonic
        // matrices, so a coarser tolerance that factors reliably is listed too.
        let ic = match family {
            Family::Poisson => "ic(0.12)",
            Family::Biharmonic => "ic(1.2e-4),ic(1e-3)",
        };
        Self {
            methods: format!("jacobi,{ic},gcvae,ic_matched"),
            tol: DEFAULT_TOL,
            max_iter: 10_000,
        }
    }
}

/// Everything a pipeline run needs; loaded from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: Family,
    pub target_n: usize,
    pub n_samples: usize,
    /// Family default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_fraction: Option<f64>,
    pub model_profile: ModelProfile,
    pub train_profile: TrainProfile,
    pub seed: u64,
    pub paths: Paths,
    #[serde(default)]
    pub train: TrainOverrides,
    pub bench: BenchSettings,
}

impl RunConfig {
    /// Full-size defaults for `family`.
    pub fn for_family(family: Family, root: &Path) -> Self {
        let (target_n, profile_m, profile_t) = match family {
            Family::Poisson => (225, ModelProfile::Poisson, TrainProfile::Poisson),
            Family::Biharmonic => (1089, ModelProfile::Biharmonic, TrainProfile::Biharmonic),
        };
        Self {
            family,
            target_n,
            n_samples: 2000,
            extra_fraction: None,
            model_profile: profile_m,
            train_profile: profile_t,
            seed: 0,
            paths: Paths::under(root),
            train: TrainOverrides::default(),
            bench: BenchSettings::for_family(family),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: RunConfig = toml::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        // Relative paths are resolved against the config file's directory.
        if let Some(base) = path.parent() {
            for p in [
                &mut cfg.paths.data_dir,
                &mut cfg.paths.model_dir,
                &mut cfg.paths.bench_dir,
            ] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn extra_fraction(&self) -> f64 {
        self.extra_fraction
            .unwrap_or_else(|| self.family.default_extra_fraction())
    }

    pub fn methods(&self) -> Result<Vec<Method>> {
        parse_methods(&self.bench.methods)
    }

    pub fn validate(&self) -> Result<()> {
        if self.target_n == 0 {
            return Err(Error::Config("target_n must be >= 1".into()));
        }
        if self.n_samples < 5 {
            return Err(Error::Config("n_samples must be >= 5".into()));
        }
        let f = self.extra_fraction();
        if !(f >= 0.0 && f.is_finite()) {
            return Err(Error::Config(format!("extra_fraction must be >= 0, got {f}")));
        }
        if !(self.bench.tol > 0.0) || self.bench.max_iter == 0 {
            return Err(Error::Config(
                "bench.tol must be positive and bench.max_iter >= 1".into(),
            ));
        }
        if self.train.epochs == Some(0) || self.train.batch_size == Some(0) {
            return Err(Error::Config("train overrides must be >= 1".into()));
        }
        if let Some(lr) = self.train.learning_rate {
            if !(lr > 0.0) {
                return Err(Error::Config("train.learning_rate must be positive".into()));
            }
        }
        self.methods()?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("run config serializes")
    }

    /// Writes the resolved configuration into `dir`.
    pub fn save_resolved(&self, dir: &Path) -> Result<PathBuf> {
        let mut resolved = self.clone();
        resolved.extra_fraction = Some(self.extra_fraction());
        let path = dir.join(RESOLVED_CONFIG_FILE);
        fs::write(&path, resolved.to_toml()).map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}

/// Creates `dir` if needed and checks that files can be written in it.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"").map_err(|e| Error::io(&probe, e))?;
    fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))
}

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Named architecture presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelProfile {
    Poisson,
    Biharmonic,
    Small,
    Smoke,
}

impl fmt::Display for ModelProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelProfile::Poisson => "poisson",
            ModelProfile::Biharmonic => "biharmonic",
            ModelProfile::Small => "small",
            ModelProfile::Smoke => "smoke",
        })
    }
}

impl FromStr for ModelProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(Self::Poisson),
            "biharmonic" => Ok(Self::Biharmonic),
            "small" => Ok(Self::Small),
            "smoke" => Ok(Self::Smoke),
            other => Err(Error::Config(format!("unknown model profile '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub gnn_layers: usize,
    pub gnn_hidden: usize,
    pub cnn_layers: usize,
    pub cnn_channels: Vec<usize>,
    pub latent_dim: usize,
    /// Side of the decoder's first feature map; `ceil(n / 2^cnn_layers)`.
    pub decoder_base_resolution: usize,
    pub matrix_dim: usize,
    pub seed: u64,
    pub head_hidden: usize,
    pub decoder_hidden: usize,
    /// Divides node features and edge weights before the graph encoder.
    pub input_scale: f64,
    /// Multiplies the decoder output, so `R ≈ output_scale · I` at initialization.
    pub output_scale: f64,
}

impl ModelConfig {
    pub fn for_profile(profile: ModelProfile, n: usize, seed: u64) -> Self {
        let (gnn_layers, gnn_hidden, cnn_channels, latent_dim, hidden) = match profile {
            ModelProfile::Poisson => (3, 32, vec![16, 32, 64], 64, 128),
            ModelProfile::Biharmonic => (3, 32, vec![16, 32, 64, 128], 64, 128),
            ModelProfile::Small => (3, 16, vec![4, 8, 8], 16, 32),
            ModelProfile::Smoke => (2, 8, vec![2, 4, 4], 4, 16),
        };
        let cnn_layers = cnn_channels.len();
        Self {
            gnn_layers,
            gnn_hidden,
            cnn_layers,
            cnn_channels,
            latent_dim,
            decoder_base_resolution: n.div_ceil(1 << cnn_layers).max(1),
            matrix_dim: n,
            seed,
            head_hidden: hidden,
            decoder_hidden: hidden,
            input_scale: 1.0,
            output_scale: 1.0,
        }
    }

    /// Side of the zero-padded square image seen by the convolutions.
    pub fn padded_dim(&self) -> usize {
        self.decoder_base_resolution << self.cnn_layers
    }

    pub fn cnn_feature_dim(&self) -> usize {
        self.cnn_channels.last().copied().unwrap_or(0) * self.decoder_base_resolution.pow(2)
    }

    pub fn validate(&self) -> Result<()> {
        let widths = [
            ("gnn_layers", self.gnn_layers),
            ("gnn_hidden", self.gnn_hidden),
            ("cnn_layers", self.cnn_layers),
            ("latent_dim", self.latent_dim),
            ("decoder_base_resolution", self.decoder_base_resolution),
            ("matrix_dim", self.matrix_dim),
            ("head_hidden", self.head_hidden),
            ("decoder_hidden", self.decoder_hidden),
        ];
        for (name, v) in widths {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if self.cnn_channels.len() != self.cnn_layers || self.cnn_channels.contains(&0) {
            return Err(Error::Config(format!(
                "cnn_channels {:?} must list {} positive widths",
                self.cnn_channels, self.cnn_layers
            )));
        }
        if self.padded_dim() < self.matrix_dim {
            return Err(Error::Config(format!(
                "decoder_base_resolution {} too small for n = {} with {} layers",
                self.decoder_base_resolution, self.matrix_dim, self.cnn_layers
            )));
        }
        if !(self.input_scale > 0.0 && self.input_scale.is_finite())
            || !(self.output_scale > 0.0 && self.output_scale.is_finite())
        {
            return Err(Error::Config("input_scale and output_scale must be positive".into()));
        }
        Ok(())
    }

    /// Sets `input_scale = mean(diag A)` and `output_scale = 1/√input_scale`
    /// over the given training matrices.
    pub fn calibrate<'a>(&mut self, matrices: impl IntoIterator<Item = &'a CsrMatrix>) {
        let (mut sum, mut count) = (0.0, 0usize);
        for a in matrices {
            let d = a.diagonal();
            sum += d.iter().map(|v| v.abs()).sum::<f64>();
            count += d.len();
        }
        if count > 0 && sum > 0.0 {
            self.input_scale = sum / count as f64;
            self.output_scale = 1.0 / self.input_scale.sqrt();
        }
    }
}

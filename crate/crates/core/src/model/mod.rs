//! Graph-conditioned variational autoencoder.
//!
//! A graph attention encoder summarises `A` into a condition vector `g`; a
//! convolutional encoder reads `A⁻¹` (training only); a latent head yields
//! `(μ, log σ²)`; the decoder maps `z ⊕ g` to an `n × n` image restricted to
//! the sparsity mask.

mod checkpoint;
mod config;
mod layers;
mod network;
mod params;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use config::{ModelConfig, ModelProfile};
pub use network::{ForwardCache, ForwardOutput, Gcvae};
pub use params::{Gradients, ParameterSet, Tensor};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    pub mu: Vec<f64>,
    pub log_var: Vec<f64>,
    pub eps: Vec<f64>,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionEmbedding {
    /// Mean of the rows of `per_node`.
    pub g: Vec<f64>,
    pub per_node: DMatrix<f64>,
}

/// `z = μ + exp(φ/2) ⊙ ε`.
pub fn reparameterize(mu: &[f64], log_var: &[f64], eps: &[f64]) -> Result<Vec<f64>> {
    if mu.len() != log_var.len() || mu.len() != eps.len() {
        return Err(Error::DimensionMismatch(format!(
            "reparameterize: lengths {}, {}, {}",
            mu.len(),
            log_var.len(),
            eps.len()
        )));
    }
    Ok(mu
        .iter()
        .zip(log_var)
        .zip(eps)
        .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
        .collect())
}

/// `len` independent standard normal draws from a seeded stream.
pub fn standard_normal(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = rng_from_seed(seed);
    (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
}

use nalgebra::DMatrix;

use super::config::ModelConfig;
use super::layers::{silu_backward, silu_vec, Conv2d, ConvTranspose2d, GatCache, GatLayer, Linear};
use super::params::{Gradients, ParamBuilder, ParameterSet};
use super::{reparameterize, ConditionEmbedding, LatentSample};
use crate::error::{Error, Result};
use crate::fem::ProblemSample;
use crate::rng::rng_from_seed;
use crate::sparse::{to_graph, CsrMatrix, GraphForm, SparsityMask};

#[derive(Debug, Clone)]
struct Layout {
    gat: Vec<GatLayer>,
    convs: Vec<Conv2d>,
    head_hidden: Linear,
    head_mu: Linear,
    head_log_var: Linear,
    dec_input: Linear,
    dec_map: Linear,
    deconvs: Vec<ConvTranspose2d>,
    output_bias: usize,
}

impl Layout {
    fn build(cfg: &ModelConfig) -> (Self, ParameterSet) {
        let mut pb = ParamBuilder::new(rng_from_seed(cfg.seed));
        let mut gat = Vec::with_capacity(cfg.gnn_layers);
        for l in 0..cfg.gnn_layers {
            let h_in = if l == 0 { 1 } else { cfg.gnn_hidden };
            gat.push(GatLayer::new(&mut pb, &format!("graph.{l}"), h_in, cfg.gnn_hidden));
        }
        let mut convs = Vec::with_capacity(cfg.cnn_layers);
        let mut c_in = 1;
        for (l, &c) in cfg.cnn_channels.iter().enumerate() {
            convs.push(Conv2d::new(&mut pb, &format!("cnn.{l}"), c_in, c));
            c_in = c;
        }
        let feat = cfg.cnn_feature_dim();
        let head_hidden = Linear::new(&mut pb, "head.hidden", cfg.gnn_hidden + feat, cfg.head_hidden, 1.0);
        let head_mu = Linear::new(&mut pb, "head.mu", cfg.head_hidden, cfg.latent_dim, 1.0);
        // Posterior variance starts at e⁻¹.
        let head_log_var = Linear::with_bias(&mut pb, "head.log_var", cfg.head_hidden, cfg.latent_dim, 0.1, -1.0);
        let dec_input = Linear::new(
            &mut pb,
            "decoder.input",
            cfg.latent_dim + cfg.gnn_hidden,
            cfg.decoder_hidden,
            1.0,
        );
        let dec_map = Linear::new(&mut pb, "decoder.map", cfg.decoder_hidden, feat, 1.0);
        let mut deconvs = Vec::with_capacity(cfg.cnn_layers);
        for l in (0..cfg.cnn_layers).rev() {
            let c_in = cfg.cnn_channels[l];
            let (c_out, gain) = if l == 0 {
                (1, 0.1)
            } else {
                (cfg.cnn_channels[l - 1], 1.0)
            };
            deconvs.push(ConvTranspose2d::new(
                &mut pb,
                &format!("decoder.up.{}", cfg.cnn_layers - 1 - l),
                c_in,
                c_out,
                gain,
            ));
        }
        let n = cfg.matrix_dim;
        let mut eye = vec![0.0; n * n];
        for i in 0..n {
            eye[i * n + i] = 1.0;
        }
        let output_bias = pb.with_data("decoder.output_bias", vec![n, n], eye);
        (
            Self {
                gat,
                convs,
                head_hidden,
                head_mu,
                head_log_var,
                dec_input,
                dec_map,
                deconvs,
                output_bias,
            },
            pb.params,
        )
    }
}

/// Graph-conditioned variational autoencoder producing masked factors `R`.
#[derive(Debug, Clone)]
pub struct Gcvae {
    config: ModelConfig,
    params: ParameterSet,
    layout: Layout,
}

#[derive(Debug, Clone)]
struct GraphCache {
    adj: CsrMatrix,
    edges: Vec<f64>,
    layers: Vec<(GatCache, Vec<f64>)>,
}

#[derive(Debug, Clone)]
struct DecoderCache {
    zg: Vec<f64>,
    pre_input: Vec<f64>,
    hidden: Vec<f64>,
    pre_map: Vec<f64>,
    /// Input and pre-activation output of each transposed convolution.
    ups: Vec<(Vec<f64>, Vec<f64>)>,
    positions: Vec<(usize, usize)>,
}

/// Intermediate values of a training forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    graph: GraphCache,
    cnn: Vec<(Vec<f64>, Vec<f64>)>,
    head_in: Vec<f64>,
    head_pre: Vec<f64>,
    head_hidden: Vec<f64>,
    latent: LatentSample,
    decoder: DecoderCache,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOutput {
    pub r: CsrMatrix,
    pub latent: LatentSample,
}

fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("{what}: entry {i} is {}", values[i]))),
        None => Ok(()),
    }
}

impl Gcvae {
    /// Freshly initialized model; all randomness comes from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (layout, params) = Layout::build(&config);
        Ok(Self { config, params, layout })
    }

    /// Model with given parameters; names and shapes must match `config`.
    pub fn from_parts(config: ModelConfig, params: ParameterSet) -> Result<Self> {
        config.validate()?;
        let (layout, expected) = Layout::build(&config);
        if expected.len() != params.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} tensors for this configuration, found {}",
                expected.len(),
                params.len()
            )));
        }
        for (e, p) in expected.tensors().iter().zip(params.tensors()) {
            if e.name != p.name || e.shape != p.shape || p.data.len() != e.data.len() {
                return Err(Error::Checkpoint(format!(
                    "tensor mismatch: expected {} {:?}, found {} {:?}",
                    e.name, e.shape, p.name, p.shape
                )));
            }
        }
        if !params.is_finite() {
            return Err(Error::Checkpoint("parameters contain non-finite values".into()));
        }
        Ok(Self { config, params, layout })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParameterSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet {
        &mut self.params
    }

    fn check_dim(&self, n: usize, what: &str) -> Result<()> {
        if n != self.config.matrix_dim {
            return Err(Error::DimensionMismatch(format!(
                "{what} has dimension {n}, model expects n = {}",
                self.config.matrix_dim
            )));
        }
        Ok(())
    }

    fn graph_forward(&self, graph: &GraphForm) -> Result<(ConditionEmbedding, GraphCache)> {
        let n = graph.num_nodes();
        if n == 0 || graph.adjacency.n_rows() != n {
            return Err(Error::InvalidInput("graph must have at least one node".into()));
        }
        let s = self.config.input_scale;
        let edges: Vec<f64> = graph.adjacency.values().iter().map(|v| v / s).collect();
        let mut h: Vec<f64> = graph.node_features.iter().map(|v| v / s).collect();
        ensure_finite(&h, "node features")?;
        ensure_finite(&edges, "edge weights")?;
        let last = self.layout.gat.len() - 1;
        let mut layers = Vec::with_capacity(self.layout.gat.len());
        for (l, gat) in self.layout.gat.iter().enumerate() {
            let (pre, cache) = gat.forward(&self.params, &graph.adjacency, &edges, &h);
            h = if l < last { silu_vec(&pre) } else { pre.clone() };
            layers.push((cache, pre));
        }
        ensure_finite(&h, "graph encoder activations")?;
        let d = self.config.gnn_hidden;
        let per_node = DMatrix::from_row_slice(n, d, &h);
        let mut g = vec![0.0; d];
        for row in h.chunks(d) {
            for (a, b) in g.iter_mut().zip(row) {
                *a += b;
            }
        }
        g.iter_mut().for_each(|v| *v /= n as f64);
        Ok((
            ConditionEmbedding { g, per_node },
            GraphCache {
                adj: graph.adjacency.clone(),
                edges,
                layers,
            },
        ))
    }

    fn graph_backward(&self, cache: &GraphCache, dg: &[f64], grads: &mut Gradients) {
        let n = cache.adj.n_rows();
        let mut dh: Vec<f64> = (0..n).flat_map(|_| dg.iter().map(|v| v / n as f64)).collect();
        let last = self.layout.gat.len() - 1;
        for (l, gat) in self.layout.gat.iter().enumerate().rev() {
            let (gc, pre) = &cache.layers[l];
            let dpre = if l < last { silu_backward(pre, &dh) } else { dh };
            dh = gat.backward(&self.params, &cache.adj, &cache.edges, gc, &dpre, grads, l > 0);
        }
    }

    /// Attention message passing over the weighted graph, mean-pooled into `g`.
    pub fn graph_encode(&self, graph: &GraphForm) -> Result<ConditionEmbedding> {
        Ok(self.graph_forward(graph)?.0)
    }

    fn cnn_forward(&self, a_inv: &DMatrix<f64>) -> Result<(Vec<f64>, Vec<(Vec<f64>, Vec<f64>)>)> {
        let n = a_inv.nrows();
        self.check_dim(n, "inverse")?;
        if a_inv.ncols() != n {
            return Err(Error::DimensionMismatch("inverse must be square".into()));
        }
        ensure_finite(a_inv.as_slice(), "inverse")?;
        let scale = a_inv.amax();
        let inv_scale = if scale > 0.0 { 1.0 / scale } else { 0.0 };
        let p = self.config.padded_dim();
        let mut x = vec![0.0; p * p];
        for i in 0..n {
            for j in 0..n {
                x[i * p + j] = a_inv[(i, j)] * inv_scale;
            }
        }
        let mut side = p;
        let mut cache = Vec::with_capacity(self.layout.convs.len());
        for conv in &self.layout.convs {
            let pre = conv.forward(&self.params, &x, side);
            let next = silu_vec(&pre);
            cache.push((x, pre));
            x = next;
            side /= 2;
        }
        ensure_finite(&x, "convolutional encoder activations")?;
        Ok((x, cache))
    }

    fn cnn_backward(&self, cache: &[(Vec<f64>, Vec<f64>)], dc: &[f64], grads: &mut Gradients) {
        let mut dx = dc.to_vec();
        let mut side = self.config.decoder_base_resolution;
        for (l, conv) in self.layout.convs.iter().enumerate().rev() {
            side *= 2;
            let (input, pre) = &cache[l];
            let dpre = silu_backward(pre, &dx);
            dx = conv.backward(&self.params, input, side, &dpre, grads, l > 0);
        }
    }

    /// Strided convolutions over the max-abs normalized, zero-padded inverse.
    pub fn cnn_encode(&self, a_inv: &DMatrix<f64>) -> Result<Vec<f64>> {
        Ok(self.cnn_forward(a_inv)?.0)
    }

    fn head_forward(&self, g: &[f64], c: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
        if g.len() != self.config.gnn_hidden || c.len() != self.config.cnn_feature_dim() {
            return Err(Error::DimensionMismatch(format!(
                "latent head expects {} + {} inputs, got {} + {}",
                self.config.gnn_hidden,
                self.config.cnn_feature_dim(),
                g.len(),
                c.len()
            )));
        }
        let input: Vec<f64> = g.iter().chain(c).copied().collect();
        let pre = self.layout.head_hidden.forward(&self.params, &input);
        let hidden = silu_vec(&pre);
        let mu = self.layout.head_mu.forward(&self.params, &hidden);
        let log_var = self.layout.head_log_var.forward(&self.params, &hidden);
        ensure_finite(&mu, "mu")?;
        ensure_finite(&log_var, "log_var")?;
        Ok((mu, log_var, input, pre, hidden))
    }

    /// `(mu, log_var)` from the concatenation `g ⊕ c`.
    pub fn latent_head(&self, g: &[f64], c: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (mu, log_var, ..) = self.head_forward(g, c)?;
        Ok((mu, log_var))
    }

    fn decoder_forward(&self, z: &[f64], g: &[f64], mask: &SparsityMask) -> Result<(CsrMatrix, DecoderCache)> {
        let cfg = &self.config;
        if z.len() != cfg.latent_dim || g.len() != cfg.gnn_hidden {
            return Err(Error::DimensionMismatch(format!(
                "decoder expects z of length {} and g of length {}, got {} and {}",
                cfg.latent_dim,
                cfg.gnn_hidden,
                z.len(),
                g.len()
            )));
        }
        self.check_dim(mask.dim(), "mask")?;
        let zg: Vec<f64> = z.iter().chain(g).copied().collect();
        let pre_input = self.layout.dec_input.forward(&self.params, &zg);
        let hidden = silu_vec(&pre_input);
        let pre_map = self.layout.dec_map.forward(&self.params, &hidden);
        let mut x = silu_vec(&pre_map);
        let mut side = cfg.decoder_base_resolution;
        let last = self.layout.deconvs.len() - 1;
        let mut ups = Vec::with_capacity(self.layout.deconvs.len());
        for (l, up) in self.layout.deconvs.iter().enumerate() {
            let pre = up.forward(&self.params, &x, side);
            let next = if l < last { silu_vec(&pre) } else { pre.clone() };
            ups.push((x, pre));
            x = next;
            side *= 2;
        }
        let (n, p) = (cfg.matrix_dim, side);
        let bias = self.params.data(self.layout.output_bias);
        let positions: Vec<(usize, usize)> = mask.positions().collect();
        let values: Vec<f64> = positions
            .iter()
            .map(|&(i, j)| cfg.output_scale * (x[i * p + j] + bias[i * n + j]))
            .collect();
        ensure_finite(&values, "decoded factor")?;
        let r = mask.to_csr().with_values(values)?;
        Ok((
            r,
            DecoderCache {
                zg,
                pre_input,
                hidden,
                pre_map,
                ups,
                positions,
            },
        ))
    }

    /// Returns `(dz, dg)`.
    fn decoder_backward(&self, cache: &DecoderCache, dr: &[f64], grads: &mut Gradients) -> (Vec<f64>, Vec<f64>) {
        let cfg = &self.config;
        let (n, p) = (cfg.matrix_dim, cfg.padded_dim());
        let mut dx = vec![0.0; p * p];
        {
            let dbias = grads.tensor_mut(self.layout.output_bias);
            for (&(i, j), &d) in cache.positions.iter().zip(dr) {
                dx[i * p + j] += cfg.output_scale * d;
                dbias[i * n + j] += cfg.output_scale * d;
            }
        }
        let mut side = p;
        let last = self.layout.deconvs.len() - 1;
        for (l, up) in self.layout.deconvs.iter().enumerate().rev() {
            side /= 2;
            let (input, pre) = &cache.ups[l];
            let dpre = if l < last { silu_backward(pre, &dx) } else { dx };
            dx = up.backward(&self.params, input, side, &dpre, grads, true);
        }
        let dpre_map = silu_backward(&cache.pre_map, &dx);
        let dhidden = self
            .layout
            .dec_map
            .backward(&self.params, &cache.hidden, &dpre_map, grads, true);
        let dpre_input = silu_backward(&cache.pre_input, &dhidden);
        let dzg = self
            .layout
            .dec_input
            .backward(&self.params, &cache.zg, &dpre_input, grads, true);
        let (dz, dg) = dzg.split_at(cfg.latent_dim);
        (dz.to_vec(), dg.to_vec())
    }

    /// Maps `z ⊕ g` to an image, upsamples it to `n × n`, and keeps exactly
    /// the positions of `mask`.
    pub fn decode(&self, z: &[f64], g: &[f64], mask: &SparsityMask) -> Result<CsrMatrix> {
        Ok(self.decoder_forward(z, g, mask)?.0)
    }

    /// Full training pass with a given noise draw; keeps what `backward` needs.
    pub fn forward_cached(
        &self,
        a: &CsrMatrix,
        a_inv: &DMatrix<f64>,
        mask: &SparsityMask,
        eps: &[f64],
    ) -> Result<(ForwardOutput, ForwardCache)> {
        self.check_dim(a.n_rows(), "matrix")?;
        if eps.len() != self.config.latent_dim {
            return Err(Error::DimensionMismatch(format!(
                "eps has length {}, latent_dim is {}",
                eps.len(),
                self.config.latent_dim
            )));
        }
        let (cond, graph) = self.graph_forward(&to_graph(a)?)?;
        let (c, cnn) = self.cnn_forward(a_inv)?;
        let (mu, log_var, head_in, head_pre, head_hidden) = self.head_forward(&cond.g, &c)?;
        let z = reparameterize(&mu, &log_var, eps)?;
        ensure_finite(&z, "latent sample")?;
        let (r, decoder) = self.decoder_forward(&z, &cond.g, mask)?;
        let latent = LatentSample {
            mu,
            log_var,
            eps: eps.to_vec(),
            z,
        };
        Ok((
            ForwardOutput {
                r,
                latent: latent.clone(),
            },
            ForwardCache {
                graph,
                cnn,
                head_in,
                head_pre,
                head_hidden,
                latent,
                decoder,
            },
        ))
    }

    /// Composition graph encoder → CNN encoder → latent head →
    /// reparameterization → decoder with the sample's mask.
    pub fn forward_train(&self, sample: &ProblemSample, eps: &[f64]) -> Result<ForwardOutput> {
        let a_inv = sample
            .a_inv
            .as_ref()
            .ok_or_else(|| Error::InvalidInput(format!("sample {} has no inverse", sample.id)))?;
        Ok(self.forward_cached(&sample.a, a_inv, &sample.mask, eps)?.0)
    }

    /// Gradients of a loss given its partials with respect to the stored values
    /// of `R` and the direct partials with respect to `mu` and `log_var`.
    pub fn backward(&self, cache: &ForwardCache, dr: &[f64], dmu: &[f64], dlog_var: &[f64]) -> Gradients {
        let mut grads = self.params.zero_gradients();
        let (dz, mut dg) = self.decoder_backward(&cache.decoder, dr, &mut grads);
        let lat = &cache.latent;
        let mut dmu_total = dmu.to_vec();
        let mut dlv_total = dlog_var.to_vec();
        for k in 0..dz.len() {
            dmu_total[k] += dz[k];
            dlv_total[k] += dz[k] * lat.eps[k] * 0.5 * (0.5 * lat.log_var[k]).exp();
        }
        let mut dhidden = self
            .layout
            .head_mu
            .backward(&self.params, &cache.head_hidden, &dmu_total, &mut grads, true);
        let dh2 = self
            .layout
            .head_log_var
            .backward(&self.params, &cache.head_hidden, &dlv_total, &mut grads, true);
        for (a, b) in dhidden.iter_mut().zip(&dh2) {
            *a += b;
        }
        let dpre = silu_backward(&cache.head_pre, &dhidden);
        let din = self
            .layout
            .head_hidden
            .backward(&self.params, &cache.head_in, &dpre, &mut grads, true);
        let (dg_head, dc) = din.split_at(self.config.gnn_hidden);
        for (a, b) in dg.iter_mut().zip(dg_head) {
            *a += b;
        }
        self.cnn_backward(&cache.cnn, dc, &mut grads);
        self.graph_backward(&cache.graph, &dg, &mut grads);
        grads
    }

    /// Generates `R` for a new matrix from a latent draw; never needs `A⁻¹`.
    pub fn infer(&self, a: &CsrMatrix, mask: &SparsityMask, z: &[f64]) -> Result<CsrMatrix> {
        self.check_dim(a.n_rows(), "matrix")?;
        self.check_dim(mask.dim(), "mask")?;
        let cond = self.graph_encode(&to_graph(a)?)?;
        self.decode(z, &cond.g, mask)
    }
}

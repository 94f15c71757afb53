use rand::seq::index::sample as sample_indices;

use super::loss::{total_loss, DEFAULT_ALPHA};
use super::train::loss_and_gradient;
use crate::error::{Error, Result};
use crate::fem::ProblemSample;
use crate::model::{standard_normal, Gcvae, Gradients, ModelConfig, ParameterSet};
use crate::rng::{derive_seed, rng_from_seed};

/// Number of parameters compared by [`gradient_check`].
pub const GRADIENT_CHECK_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Flat index of the parameter with the largest error.
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
}

/// Central differences of `loss` at `indices` against `grads`; the relative
/// error uses the denominator `max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_difference_check(
    params: &mut ParameterSet,
    grads: &Gradients,
    indices: &[usize],
    step: f64,
    mut loss: impl FnMut(&ParameterSet) -> Result<f64>,
) -> Result<GradientCheckReport> {
    if !(step > 0.0) {
        return Err(Error::InvalidInput(format!("step must be positive, got {step}")));
    }
    let mut report = GradientCheckReport {
        max_rel_error: 0.0,
        checked: 0,
        worst_index: 0,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
    };
    for &k in indices {
        let v = params.get_flat(k);
        params.set_flat(k, v + step);
        let up = loss(params);
        params.set_flat(k, v - step);
        let down = loss(params);
        params.set_flat(k, v);
        let numeric = (up? - down?) / (2.0 * step);
        let analytic = grads.get_flat(k);
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
        if rel > report.max_rel_error || report.checked == 0 {
            report.max_rel_error = rel;
            report.worst_index = k;
            report.worst_analytic = analytic;
            report.worst_numeric = numeric;
        }
        report.checked += 1;
    }
    Ok(report)
}

/// Checks the analytic gradient of the total loss on one sample with a fixed
/// noise draw, over a random subset of parameters.
pub fn gradient_check(model_cfg: &ModelConfig, sample: &ProblemSample, step: f64) -> Result<GradientCheckReport> {
    let mut cfg = model_cfg.clone();
    cfg.calibrate([&sample.a]);
    let mut model = Gcvae::new(cfg)?;
    let eps = standard_normal(
        model.config().latent_dim,
        derive_seed(model.config().seed, "gradient-check-eps"),
    );
    let count = GRADIENT_CHECK_SAMPLES.min(model.params().num_scalars());
    let mut rng = rng_from_seed(derive_seed(model.config().seed, "gradient-check-indices"));
    let mut indices = sample_indices(&mut rng, model.params().num_scalars(), count).into_vec();
    indices.sort_unstable();
    gradient_check_model(&mut model, sample, &eps, &indices, step)
}

pub fn gradient_check_model(
    model: &mut Gcvae,
    sample: &ProblemSample,
    eps: &[f64],
    indices: &[usize],
    step: f64,
) -> Result<GradientCheckReport> {
    let a_inv = sample
        .a_inv
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("gradient check needs the inverse".into()))?;
    let (_, grads) = loss_and_gradient(model, &sample.a, a_inv, &sample.mask, eps, DEFAULT_ALPHA)?;
    let mut scratch = model.clone();
    let mut params = model.params().clone();
    let report = finite_difference_check(&mut params, &grads, indices, step, |p| {
        scratch.params_mut().clone_from(p);
        let (out, _) = scratch.forward_cached(&sample.a, a_inv, &sample.mask, eps)?;
        total_loss(&sample.a, &out.r, &out.latent.mu, &out.latent.log_var, DEFAULT_ALPHA)
    })?;
    *model.params_mut() = params;
    Ok(report)
}

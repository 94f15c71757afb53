use crate::error::{Error, Result};
use crate::sparse::{frobenius_residual, CsrMatrix};

/// KL weight.
pub const DEFAULT_ALPHA: f64 = 0.1;

/// `KL(N(μ, e^φ) ‖ N(0, 1)) = -½ Σ (1 + φ - μ² - e^φ)`.
pub fn kl_divergence(mu: &[f64], log_var: &[f64]) -> Result<f64> {
    if mu.len() != log_var.len() {
        return Err(Error::DimensionMismatch(format!(
            "kl_divergence: mu has {} entries, log_var {}",
            mu.len(),
            log_var.len()
        )));
    }
    Ok(-0.5
        * mu.iter()
            .zip(log_var)
            .map(|(m, lv)| 1.0 + lv - m * m - lv.exp())
            .sum::<f64>())
}

/// `(∂KL/∂μ, ∂KL/∂φ)`.
pub(crate) fn kl_gradient(mu: &[f64], log_var: &[f64]) -> (Vec<f64>, Vec<f64>) {
    (mu.to_vec(), log_var.iter().map(|lv| 0.5 * (lv.exp() - 1.0)).collect())
}

/// `‖I - RᵀAR‖_F² + α · KL`.
pub fn total_loss(a: &CsrMatrix, r: &CsrMatrix, mu: &[f64], log_var: &[f64], alpha: f64) -> Result<f64> {
    let recon = frobenius_residual(a, r)?.powi(2);
    Ok(recon + alpha * kl_divergence(mu, log_var)?)
}

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bivariate polynomial of total degree ≤ 2:
/// `c₀ + c₁x + c₂y + c₃xy + c₄x² + c₅y²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    pub coeffs: [f64; 6],
}

/// Minimum accepted value of a sampled coefficient on the check grid.
pub const POSITIVITY_MARGIN: f64 = 0.05;
const CHECK_GRID: usize = 10;
const MAX_REJECTIONS: usize = 1000;

impl CoefficientField {
    pub fn new(coeffs: [f64; 6]) -> Self {
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self::new([c, 0.0, 0.0, 0.0, 0.0, 0.0])
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let c = &self.coeffs;
        c[0] + c[1] * x + c[2] * y + c[3] * x * y + c[4] * x * x + c[5] * y * y
    }

    /// Minimum over the 10×10 grid `{i/9}²` of the unit square (corners included).
    pub fn grid_min(&self) -> f64 {
        let step = 1.0 / (CHECK_GRID - 1) as f64;
        (0..CHECK_GRID)
            .flat_map(|i| (0..CHECK_GRID).map(move |j| (i as f64 * step, j as f64 * step)))
            .map(|(x, y)| self.eval(x, y))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_admissible(&self) -> bool {
        self.grid_min() > POSITIVITY_MARGIN
    }
}

/// Draws `c₀ ~ U[1,2]`, `c₁..c₅ ~ U[-0.5,0.5]`, rejecting draws whose grid
/// minimum does not exceed the positivity margin.
pub fn sample_coefficient(rng: &mut impl Rng) -> Result<CoefficientField> {
    for _ in 0..MAX_REJECTIONS {
        let mut coeffs = [0.0; 6];
        coeffs[0] = rng.random_range(1.0..=2.0);
        for c in &mut coeffs[1..] {
            *c = rng.random_range(-0.5..=0.5);
        }
        let f = CoefficientField::new(coeffs);
        if f.is_admissible() {
            return Ok(f);
        }
    }
    Err(Error::RejectedCoefficient(format!(
        "no admissible coefficient after {MAX_REJECTIONS} draws"
    )))
}

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{
    assemble_rhs, compute_inverse, penalty_min, sample_coefficient, CoefficientField, Family, RhsSpec, TriMesh,
};
use crate::error::{Error, Result};
use crate::rng::{derive_indexed, derive_seed, rng_from_seed};
use crate::sparse::{build_mask, CsrMatrix, SparsityMask};

/// One dataset element.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSample {
    pub id: usize,
    pub a: CsrMatrix,
    /// Dense exact inverse; only needed for training.
    pub a_inv: Option<DMatrix<f64>>,
    pub b: Vec<f64>,
    pub family: Family,
    pub coefficient: CoefficientField,
    pub mask: SparsityMask,
}

impl ProblemSample {
    pub fn dim(&self) -> usize {
        self.a.n_rows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<ProblemSample>,
    pub test: Vec<ProblemSample>,
    pub seed: u64,
    pub mesh_id: String,
    pub family: Family,
    pub extra_fraction: f64,
    /// Interior-penalty parameter (biharmonic only).
    pub penalty: Option<f64>,
    /// Samples dropped because assembly or inversion failed.
    pub discarded: usize,
}

impl DatasetSplit {
    pub fn dim(&self) -> Option<usize> {
        self.train.first().or(self.test.first()).map(ProblemSample::dim)
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetOptions {
    /// Interior penalty as a multiple of the mesh's admissible minimum.
    pub penalty_factor: f64,
    pub rhs: RhsSpec,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        Self {
            penalty_factor: 2.0,
            rhs: RhsSpec::default(),
        }
    }
}

/// `n_samples` matrices on one shared mesh with independent coefficients,
/// split 80/20 by a seeded shuffle.
pub fn generate_dataset(
    family: Family,
    mesh: &TriMesh,
    n_samples: usize,
    extra_fraction: f64,
    seed: u64,
    options: &DatasetOptions,
) -> Result<DatasetSplit> {
    if n_samples < 5 {
        return Err(Error::InvalidInput(format!(
            "a dataset needs at least 5 samples, got {n_samples}"
        )));
    }
    let penalty = (family == Family::Biharmonic).then(|| options.penalty_factor * penalty_min(mesh));
    let b = assemble_rhs(mesh, family, options.rhs);
    let coeff_seed = derive_seed(seed, "coefficients");

    let mut samples = Vec::with_capacity(n_samples);
    let mut discarded = 0;
    for id in 0..n_samples {
        let mut rng = rng_from_seed(derive_indexed(coeff_seed, &[id as u64]));
        let built = sample_coefficient(&mut rng).and_then(|coefficient| {
            let a = family.assemble(mesh, &coefficient, penalty.unwrap_or(0.0))?;
            let a_inv = compute_inverse(&a)?;
            let mask = build_mask(&a, extra_fraction)?;
            Ok(ProblemSample {
                id,
                a,
                a_inv: Some(a_inv),
                b: b.clone(),
                family,
                coefficient,
                mask,
            })
        });
        match built {
            Ok(s) => samples.push(s),
            Err(e) => {
                log::warn!("discarding sample {id}: {e}");
                discarded += 1;
            }
        }
    }
    if samples.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "only {} of {n_samples} samples could be generated",
            samples.len()
        )));
    }

    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut rng_from_seed(derive_seed(seed, "split")));
    let n_train = ((samples.len() as f64) * 0.8).round() as usize;
    let mut slots: Vec<Option<ProblemSample>> = samples.into_iter().map(Some).collect();
    let mut take = |idx: &[usize]| -> Vec<ProblemSample> {
        let mut v: Vec<ProblemSample> = idx.iter().map(|&i| slots[i].take().unwrap()).collect();
        v.sort_by_key(|s| s.id);
        v
    };
    let train = take(&order[..n_train]);
    let test = take(&order[n_train..]);
    Ok(DatasetSplit {
        train,
        test,
        seed,
        mesh_id: mesh.mesh_id(),
        family,
        extra_fraction,
        penalty,
        discarded,
    })
}

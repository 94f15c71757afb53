use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

/// A named dense parameter tensor, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// All learnable weights of a model, in a fixed construction order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterSet {
    tensors: Vec<Tensor>,
}

impl ParameterSet {
    pub fn from_tensors(tensors: Vec<Tensor>) -> Self {
        Self { tensors }
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.tensors.iter().position(|t| t.name == name)
    }

    pub fn data(&self, idx: usize) -> &[f64] {
        &self.tensors[idx].data
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|x| x.is_finite()))
    }

    /// Scalar `k` in the concatenation of all tensors.
    pub fn get_flat(&self, k: usize) -> f64 {
        let (t, i) = self.locate(k);
        self.tensors[t].data[i]
    }

    pub fn set_flat(&mut self, k: usize, v: f64) {
        let (t, i) = self.locate(k);
        self.tensors[t].data[i] = v;
    }

    fn locate(&self, mut k: usize) -> (usize, usize) {
        for (t, tensor) in self.tensors.iter().enumerate() {
            if k < tensor.data.len() {
                return (t, k);
            }
            k -= tensor.data.len();
        }
        panic!("flat parameter index out of range");
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients {
            tensors: self.tensors.iter().map(|t| vec![0.0; t.data.len()]).collect(),
        }
    }

    pub(crate) fn push(&mut self, name: String, shape: Vec<usize>, data: Vec<f64>) -> usize {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        self.tensors.push(Tensor { name, shape, data });
        self.tensors.len() - 1
    }
}

/// Gradients laid out like a [`ParameterSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.tensors.iter_mut().flatten().for_each(|x| *x *= s);
    }

    pub fn get_flat(&self, mut k: usize) -> f64 {
        for t in &self.tensors {
            if k < t.len() {
                return t[k];
            }
            k -= t.len();
        }
        panic!("flat gradient index out of range");
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flatten().all(|x| x.is_finite())
    }

    pub(crate) fn tensor_mut(&mut self, idx: usize) -> &mut [f64] {
        &mut self.tensors[idx]
    }
}

/// Allocates tensors with seeded initial values.
pub(crate) struct ParamBuilder {
    pub params: ParameterSet,
    rng: Rng,
}

impl ParamBuilder {
    pub fn new(rng: Rng) -> Self {
        Self {
            params: ParameterSet::default(),
            rng,
        }
    }

    pub fn uniform(&mut self, name: &str, shape: Vec<usize>, bound: f64) -> usize {
        let len = shape.iter().product();
        let data = (0..len).map(|_| self.rng.random_range(-bound..=bound)).collect();
        self.params.push(name.to_string(), shape, data)
    }

    pub fn constant(&mut self, name: &str, shape: Vec<usize>, value: f64) -> usize {
        let len = shape.iter().product();
        self.params.push(name.to_string(), shape, vec![value; len])
    }

    pub fn with_data(&mut self, name: &str, shape: Vec<usize>, data: Vec<f64>) -> usize {
        self.params.push(name.to_string(), shape, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn flat_indexing_spans_tensors() {
        let mut b = ParamBuilder::new(rng_from_seed(0));
        b.constant("a", vec![2], 1.0);
        b.constant("b", vec![3, 1], 2.0);
        let mut p = b.params;
        assert_eq!(p.num_scalars(), 5);
        assert_eq!(p.get_flat(1), 1.0);
        assert_eq!(p.get_flat(2), 2.0);
        p.set_flat(4, -1.0);
        assert_eq!(p.data(1), &[2.0, 2.0, -1.0]);
        assert_eq!(p.index_of("b"), Some(1));
        let mut g = p.zero_gradients();
        g.tensor_mut(0)[1] = 3.0;
        let h = g.clone();
        g.add_assign(&h);
        assert_eq!(g.get_flat(1), 6.0);
    }
}

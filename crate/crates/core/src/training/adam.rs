use crate::model::{Gradients, ParameterSet};

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(params: &ParameterSet, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.data.len()]).collect();
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut ParameterSet, grads: &Gradients) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (k, tensor) in params.tensors_mut().iter_mut().enumerate() {
            let (m, v, g) = (&mut self.m[k], &mut self.v[k], &grads.tensors[k]);
            for i in 0..tensor.data.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let mh = m[i] / c1;
                let vh = v[i] / c2;
                tensor.data[i] -= self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Tensor;

    #[test]
    fn minimizes_a_quadratic() {
        let mut params = ParameterSet::from_tensors(vec![Tensor {
            name: "x".into(),
            shape: vec![2],
            data: vec![3.0, -2.0],
        }]);
        let mut opt = Adam::new(&params, 0.1);
        for _ in 0..500 {
            let mut g = params.zero_gradients();
            g.tensors[0] = params.data(0).iter().map(|x| 2.0 * x).collect();
            opt.step(&mut params, &g);
        }
        assert!(params.data(0).iter().all(|x| x.abs() < 1e-2));
        assert_eq!(opt.steps(), 500);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut params = ParameterSet::from_tensors(vec![Tensor {
            name: "x".into(),
            shape: vec![1],
            data: vec![1.0],
        }]);
        let mut opt = Adam::new(&params, 0.01);
        let mut g = params.zero_gradients();
        g.tensors[0][0] = 123.0;
        opt.step(&mut params, &g);
        assert!((params.data(0)[0] - 0.99).abs() < 1e-9);
    }
}

//! Layers with explicit forward and backward passes. Activations are row-major;
//! images are `(channels, height, width)`.

use super::params::{Gradients, ParamBuilder, ParameterSet};
use crate::sparse::CsrMatrix;

pub(crate) fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

pub(crate) fn silu_grad(x: f64) -> f64 {
    let s = 1.0 / (1.0 + (-x).exp());
    s * (1.0 + x * (1.0 - s))
}

pub(crate) fn silu_vec(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| silu(v)).collect()
}

/// `dx = dy ⊙ silu'(pre)`.
pub(crate) fn silu_backward(pre: &[f64], dy: &[f64]) -> Vec<f64> {
    pre.iter().zip(dy).map(|(&p, &d)| d * silu_grad(p)).collect()
}

/// `y = W x + b` applied to each of `m` rows.
#[derive(Debug, Clone)]
pub(crate) struct Linear {
    w: usize,
    b: usize,
    pub n_in: usize,
    pub n_out: usize,
}

impl Linear {
    pub fn new(pb: &mut ParamBuilder, name: &str, n_in: usize, n_out: usize, gain: f64) -> Self {
        Self::with_bias(pb, name, n_in, n_out, gain, 0.0)
    }

    pub fn with_bias(pb: &mut ParamBuilder, name: &str, n_in: usize, n_out: usize, gain: f64, bias: f64) -> Self {
        let bound = gain / (n_in as f64).sqrt();
        let w = pb.uniform(&format!("{name}.weight"), vec![n_out, n_in], bound);
        let b = pb.constant(&format!("{name}.bias"), vec![n_out], bias);
        Self { w, b, n_in, n_out }
    }

    pub fn forward(&self, p: &ParameterSet, x: &[f64]) -> Vec<f64> {
        let m = x.len() / self.n_in;
        let (w, b) = (p.data(self.w), p.data(self.b));
        let mut y = Vec::with_capacity(m * self.n_out);
        for r in 0..m {
            let xr = &x[r * self.n_in..(r + 1) * self.n_in];
            for o in 0..self.n_out {
                let wr = &w[o * self.n_in..(o + 1) * self.n_in];
                y.push(b[o] + wr.iter().zip(xr).map(|(a, c)| a * c).sum::<f64>());
            }
        }
        y
    }

    /// Accumulates weight gradients and returns `dx` when requested.
    pub fn backward(&self, p: &ParameterSet, x: &[f64], dy: &[f64], grads: &mut Gradients, need_dx: bool) -> Vec<f64> {
        let m = x.len() / self.n_in;
        {
            let gw = grads.tensor_mut(self.w);
            for r in 0..m {
                let xr = &x[r * self.n_in..(r + 1) * self.n_in];
                for o in 0..self.n_out {
                    let d = dy[r * self.n_out + o];
                    if d != 0.0 {
                        for (g, &xv) in gw[o * self.n_in..(o + 1) * self.n_in].iter_mut().zip(xr) {
                            *g += d * xv;
                        }
                    }
                }
            }
        }
        {
            let gb = grads.tensor_mut(self.b);
            for r in 0..m {
                for o in 0..self.n_out {
                    gb[o] += dy[r * self.n_out + o];
                }
            }
        }
        if !need_dx {
            return Vec::new();
        }
        let w = p.data(self.w);
        let mut dx = vec![0.0; m * self.n_in];
        for r in 0..m {
            let dxr = &mut dx[r * self.n_in..(r + 1) * self.n_in];
            for o in 0..self.n_out {
                let d = dy[r * self.n_out + o];
                if d != 0.0 {
                    for (g, &wv) in dxr.iter_mut().zip(&w[o * self.n_in..(o + 1) * self.n_in]) {
                        *g += d * wv;
                    }
                }
            }
        }
        dx
    }
}

const K: usize = 4;

/// Strided convolution, kernel 4, stride 2, padding 1: side `s` becomes `s/2`.
#[derive(Debug, Clone)]
pub(crate) struct Conv2d {
    w: usize,
    b: usize,
    pub c_in: usize,
    pub c_out: usize,
}

impl Conv2d {
    pub fn new(pb: &mut ParamBuilder, name: &str, c_in: usize, c_out: usize) -> Self {
        let bound = 1.0 / ((c_in * K * K) as f64).sqrt();
        let w = pb.uniform(&format!("{name}.weight"), vec![c_out, c_in, K, K], bound);
        let b = pb.constant(&format!("{name}.bias"), vec![c_out], 0.0);
        Self { w, b, c_in, c_out }
    }

    pub fn forward(&self, p: &ParameterSet, x: &[f64], side: usize) -> Vec<f64> {
        let so = side / 2;
        let (w, b) = (p.data(self.w), p.data(self.b));
        let mut y = vec![0.0; self.c_out * so * so];
        for co in 0..self.c_out {
            let out = &mut y[co * so * so..(co + 1) * so * so];
            out.iter_mut().for_each(|v| *v = b[co]);
            for ci in 0..self.c_in {
                let img = &x[ci * side * side..(ci + 1) * side * side];
                let ker = &w[(co * self.c_in + ci) * K * K..(co * self.c_in + ci + 1) * K * K];
                for oy in 0..so {
                    for ky in 0..K {
                        let iy = (2 * oy + ky) as isize - 1;
                        if iy < 0 || iy >= side as isize {
                            continue;
                        }
                        let row = &img[iy as usize * side..(iy as usize + 1) * side];
                        for ox in 0..so {
                            let mut acc = 0.0;
                            for kx in 0..K {
                                let ix = (2 * ox + kx) as isize - 1;
                                if ix >= 0 && ix < side as isize {
                                    acc += ker[ky * K + kx] * row[ix as usize];
                                }
                            }
                            out[oy * so + ox] += acc;
                        }
                    }
                }
            }
        }
        y
    }

    pub fn backward(
        &self,
        p: &ParameterSet,
        x: &[f64],
        side: usize,
        dy: &[f64],
        grads: &mut Gradients,
        need_dx: bool,
    ) -> Vec<f64> {
        let so = side / 2;
        {
            let gb = grads.tensor_mut(self.b);
            for co in 0..self.c_out {
                gb[co] += dy[co * so * so..(co + 1) * so * so].iter().sum::<f64>();
            }
        }
        let w = p.data(self.w).to_vec();
        let mut dx = if need_dx { vec![0.0; x.len()] } else { Vec::new() };
        let gw = grads.tensor_mut(self.w);
        for co in 0..self.c_out {
            let d = &dy[co * so * so..(co + 1) * so * so];
            for ci in 0..self.c_in {
                let base = (co * self.c_in + ci) * K * K;
                let img = &x[ci * side * side..(ci + 1) * side * side];
                for oy in 0..so {
                    for ky in 0..K {
                        let iy = (2 * oy + ky) as isize - 1;
                        if iy < 0 || iy >= side as isize {
                            continue;
                        }
                        let iy = iy as usize;
                        for ox in 0..so {
                            let g = d[oy * so + ox];
                            if g == 0.0 {
                                continue;
                            }
                            for kx in 0..K {
                                let ix = (2 * ox + kx) as isize - 1;
                                if ix < 0 || ix >= side as isize {
                                    continue;
                                }
                                let pos = iy * side + ix as usize;
                                gw[base + ky * K + kx] += g * img[pos];
                                if need_dx {
                                    dx[ci * side * side + pos] += g * w[base + ky * K + kx];
                                }
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

/// Transposed convolution, kernel 4, stride 2, padding 1: side `s` becomes `2s`.
#[derive(Debug, Clone)]
pub(crate) struct ConvTranspose2d {
    w: usize,
    b: usize,
    pub c_in: usize,
    pub c_out: usize,
}

impl ConvTranspose2d {
    pub fn new(pb: &mut ParamBuilder, name: &str, c_in: usize, c_out: usize, gain: f64) -> Self {
        // Each output pixel receives c_in * 4 contributions.
        let bound = gain / ((c_in * 4) as f64).sqrt();
        let w = pb.uniform(&format!("{name}.weight"), vec![c_in, c_out, K, K], bound);
        let b = pb.constant(&format!("{name}.bias"), vec![c_out], 0.0);
        Self { w, b, c_in, c_out }
    }

    pub fn forward(&self, p: &ParameterSet, x: &[f64], side: usize) -> Vec<f64> {
        let so = 2 * side;
        let (w, b) = (p.data(self.w), p.data(self.b));
        let mut y = vec![0.0; self.c_out * so * so];
        for co in 0..self.c_out {
            y[co * so * so..(co + 1) * so * so].iter_mut().for_each(|v| *v = b[co]);
        }
        for ci in 0..self.c_in {
            for co in 0..self.c_out {
                let ker = &w[(ci * self.c_out + co) * K * K..(ci * self.c_out + co + 1) * K * K];
                let out = &mut y[co * so * so..(co + 1) * so * so];
                for iy in 0..side {
                    for ky in 0..K {
                        let oy = (2 * iy + ky) as isize - 1;
                        if oy < 0 || oy >= so as isize {
                            continue;
                        }
                        let orow = &mut out[oy as usize * so..(oy as usize + 1) * so];
                        for ix in 0..side {
                            let v = x[(ci * side + iy) * side + ix];
                            for kx in 0..K {
                                let ox = (2 * ix + kx) as isize - 1;
                                if ox >= 0 && ox < so as isize {
                                    orow[ox as usize] += ker[ky * K + kx] * v;
                                }
                            }
                        }
                    }
                }
            }
        }
        y
    }

    pub fn backward(
        &self,
        p: &ParameterSet,
        x: &[f64],
        side: usize,
        dy: &[f64],
        grads: &mut Gradients,
        need_dx: bool,
    ) -> Vec<f64> {
        let so = 2 * side;
        {
            let gb = grads.tensor_mut(self.b);
            for co in 0..self.c_out {
                gb[co] += dy[co * so * so..(co + 1) * so * so].iter().sum::<f64>();
            }
        }
        let w = p.data(self.w).to_vec();
        let mut dx = if need_dx { vec![0.0; x.len()] } else { Vec::new() };
        let gw = grads.tensor_mut(self.w);
        for ci in 0..self.c_in {
            for co in 0..self.c_out {
                let base = (ci * self.c_out + co) * K * K;
                let d = &dy[co * so * so..(co + 1) * so * so];
                for iy in 0..side {
                    for ky in 0..K {
                        let oy = (2 * iy + ky) as isize - 1;
                        if oy < 0 || oy >= so as isize {
                            continue;
                        }
                        let drow = &d[oy as usize * so..(oy as usize + 1) * so];
                        for ix in 0..side {
                            let xi = (ci * side + iy) * side + ix;
                            let v = x[xi];
                            let mut acc = 0.0;
                            for kx in 0..K {
                                let ox = (2 * ix + kx) as isize - 1;
                                if ox >= 0 && ox < so as isize {
                                    let g = drow[ox as usize];
                                    gw[base + ky * K + kx] += g * v;
                                    acc += g * w[base + ky * K + kx];
                                }
                            }
                            if need_dx {
                                dx[xi] += acc;
                            }
                        }
                    }
                }
            }
        }
        dx
    }
}

/// Single-head GATv2 layer on a weighted directed graph:
///
/// `u_ij = W_s h_i + W_t h_j + w_e a_ij`, `e_ij = attᵀ silu(u_ij)`,
/// `α = softmax_j(e_ij)`, `out_i = Σ_j α_ij (W_t h_j)`.
#[derive(Debug, Clone)]
pub(crate) struct GatLayer {
    ws: Linear,
    wt: Linear,
    we: usize,
    att: usize,
    h_out: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct GatCache {
    h: Vec<f64>,
    t: Vec<f64>,
    u: Vec<f64>,
    alpha: Vec<f64>,
}

impl GatLayer {
    pub fn new(pb: &mut ParamBuilder, name: &str, h_in: usize, h_out: usize) -> Self {
        let ws = Linear::new(pb, &format!("{name}.source"), h_in, h_out, 1.0);
        let wt = Linear::new(pb, &format!("{name}.target"), h_in, h_out, 1.0);
        let we = pb.uniform(&format!("{name}.edge"), vec![h_out], 1.0);
        let att = pb.uniform(&format!("{name}.attention"), vec![h_out], 1.0 / (h_out as f64).sqrt());
        Self { ws, wt, we, att, h_out }
    }

    /// `edges` holds the scaled edge weights aligned with `adj`'s stored entries.
    pub fn forward(&self, p: &ParameterSet, adj: &CsrMatrix, edges: &[f64], h: &[f64]) -> (Vec<f64>, GatCache) {
        let n = adj.n_rows();
        let d = self.h_out;
        let s = self.ws.forward(p, h);
        let t = self.wt.forward(p, h);
        let (we, att) = (p.data(self.we), p.data(self.att));
        let mut u = vec![0.0; adj.nnz() * d];
        let mut alpha = vec![0.0; adj.nnz()];
        let mut out = vec![0.0; n * d];
        let ptr = adj.row_ptr();
        let cols = adj.col_idx();
        for i in 0..n {
            let (lo, hi) = (ptr[i], ptr[i + 1]);
            let si = &s[i * d..(i + 1) * d];
            let mut emax = f64::NEG_INFINITY;
            for k in lo..hi {
                let tj = &t[cols[k] * d..(cols[k] + 1) * d];
                let uk = &mut u[k * d..(k + 1) * d];
                let mut e = 0.0;
                for c in 0..d {
                    uk[c] = si[c] + tj[c] + we[c] * edges[k];
                    e += att[c] * silu(uk[c]);
                }
                alpha[k] = e;
                emax = emax.max(e);
            }
            let mut z = 0.0;
            for a in &mut alpha[lo..hi] {
                *a = (*a - emax).exp();
                z += *a;
            }
            let oi = &mut out[i * d..(i + 1) * d];
            for k in lo..hi {
                alpha[k] /= z;
                let tj = &t[cols[k] * d..(cols[k] + 1) * d];
                for c in 0..d {
                    oi[c] += alpha[k] * tj[c];
                }
            }
        }
        (
            out,
            GatCache {
                h: h.to_vec(),
                t,
                u,
                alpha,
            },
        )
    }

    pub fn backward(
        &self,
        p: &ParameterSet,
        adj: &CsrMatrix,
        edges: &[f64],
        cache: &GatCache,
        dout: &[f64],
        grads: &mut Gradients,
        need_dx: bool,
    ) -> Vec<f64> {
        let n = adj.n_rows();
        let d = self.h_out;
        let att = p.data(self.att);
        let mut ds = vec![0.0; n * d];
        let mut dt = vec![0.0; n * d];
        let mut dwe = vec![0.0; d];
        let mut datt = vec![0.0; d];
        let ptr = adj.row_ptr();
        let cols = adj.col_idx();
        let mut dalpha = Vec::new();
        for i in 0..n {
            let (lo, hi) = (ptr[i], ptr[i + 1]);
            let doi = &dout[i * d..(i + 1) * d];
            dalpha.clear();
            let mut weighted = 0.0;
            for k in lo..hi {
                let j = cols[k];
                let tj = &cache.t[j * d..(j + 1) * d];
                let da: f64 = doi.iter().zip(tj).map(|(a, b)| a * b).sum();
                for c in 0..d {
                    dt[j * d + c] += cache.alpha[k] * doi[c];
                }
                weighted += cache.alpha[k] * da;
                dalpha.push(da);
            }
            for k in lo..hi {
                let j = cols[k];
                let de = cache.alpha[k] * (dalpha[k - lo] - weighted);
                let uk = &cache.u[k * d..(k + 1) * d];
                for c in 0..d {
                    datt[c] += de * silu(uk[c]);
                    let du = de * att[c] * silu_grad(uk[c]);
                    ds[i * d + c] += du;
                    dt[j * d + c] += du;
                    dwe[c] += du * edges[k];
                }
            }
        }
        for (g, v) in grads.tensor_mut(self.we).iter_mut().zip(&dwe) {
            *g += v;
        }
        for (g, v) in grads.tensor_mut(self.att).iter_mut().zip(&datt) {
            *g += v;
        }
        let mut dh = self.ws.backward(p, &cache.h, &ds, grads, need_dx);
        let dh_t = self.wt.backward(p, &cache.h, &dt, grads, need_dx);
        for (a, b) in dh.iter_mut().zip(&dh_t) {
            *a += b;
        }
        dh
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn randv(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = rng_from_seed(seed);
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Checks analytic gradients of `L = Σ c ⊙ f(x; θ)` for all parameters and inputs.
    fn check<F>(
        params: &mut ParameterSet,
        x: &[f64],
        forward: F,
        backward: &dyn Fn(&ParameterSet, &[f64], &[f64], &mut Gradients) -> Vec<f64>,
    ) where
        F: Fn(&ParameterSet, &[f64]) -> Vec<f64>,
    {
        let y = forward(params, x);
        let c = randv(y.len(), 99);
        let loss = |p: &ParameterSet, x: &[f64]| -> f64 { forward(p, x).iter().zip(&c).map(|(a, b)| a * b).sum() };
        let mut g = params.zero_gradients();
        let dx = backward(params, x, &c, &mut g);
        let h = 1e-6;
        for k in 0..params.num_scalars() {
            let v = params.get_flat(k);
            params.set_flat(k, v + h);
            let lp = loss(params, x);
            params.set_flat(k, v - h);
            let lm = loss(params, x);
            params.set_flat(k, v);
            let num = (lp - lm) / (2.0 * h);
            let ana = g.get_flat(k);
            assert!(
                (num - ana).abs() < 1e-6 * num.abs().max(1.0),
                "param {k}: {num} vs {ana}"
            );
        }
        for i in 0..x.len() {
            let mut xp = x.to_vec();
            xp[i] += h;
            let lp = loss(params, &xp);
            xp[i] -= 2.0 * h;
            let lm = loss(params, &xp);
            let num = (lp - lm) / (2.0 * h);
            assert!(
                (num - dx[i]).abs() < 1e-6 * num.abs().max(1.0),
                "input {i}: {num} vs {}",
                dx[i]
            );
        }
    }

    #[test]
    fn silu_derivative() {
        for &x in &[-3.0, -0.5, 0.0, 0.7, 4.0] {
            let num = (silu(x + 1e-6) - silu(x - 1e-6)) / 2e-6;
            assert!((num - silu_grad(x)).abs() < 1e-8);
        }
        assert_eq!(silu(0.0), 0.0);
    }

    #[test]
    fn linear_gradients() {
        let mut pb = ParamBuilder::new(rng_from_seed(1));
        let lin = Linear::new(&mut pb, "l", 3, 4, 1.0);
        let mut p = pb.params;
        p.tensors_mut()[1].data = randv(4, 5);
        let x = randv(6, 2);
        check(&mut p, &x, |p, x| lin.forward(p, x), &|p, x, dy, g| {
            lin.backward(p, x, dy, g, true)
        });
    }

    #[test]
    fn conv_shapes_and_gradients() {
        let mut pb = ParamBuilder::new(rng_from_seed(2));
        let conv = Conv2d::new(&mut pb, "c", 2, 3);
        let mut p = pb.params;
        p.tensors_mut()[1].data = randv(3, 6);
        let x = randv(2 * 8 * 8, 3);
        assert_eq!(conv.forward(&p, &x, 8).len(), 3 * 4 * 4);
        check(&mut p, &x, |p, x| conv.forward(p, x, 8), &|p, x, dy, g| {
            conv.backward(p, x, 8, dy, g, true)
        });
    }

    #[test]
    fn conv_transpose_shapes_and_gradients() {
        let mut pb = ParamBuilder::new(rng_from_seed(3));
        let conv = ConvTranspose2d::new(&mut pb, "t", 3, 2, 1.0);
        let mut p = pb.params;
        p.tensors_mut()[1].data = randv(2, 7);
        let x = randv(3 * 3 * 3, 4);
        assert_eq!(conv.forward(&p, &x, 3).len(), 2 * 6 * 6);
        check(&mut p, &x, |p, x| conv.forward(p, x, 3), &|p, x, dy, g| {
            conv.backward(p, x, 3, dy, g, true)
        });
    }

    #[test]
    fn transpose_is_adjoint_of_conv() {
        // With zero bias, ⟨conv(x), y⟩ = ⟨x, convT(y)⟩ for the shared kernel.
        let mut pb = ParamBuilder::new(rng_from_seed(4));
        let conv = Conv2d::new(&mut pb, "c", 1, 1);
        let tconv = ConvTranspose2d::new(&mut pb, "t", 1, 1, 1.0);
        let mut p = pb.params;
        let kernel = p.tensors()[0].data.clone();
        p.tensors_mut()[2].data = kernel;
        let x = randv(64, 5);
        let y = randv(16, 6);
        let lhs: f64 = conv.forward(&p, &x, 8).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = tconv.forward(&p, &y, 4).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn gat_gradients() {
        let a = crate::sparse::tests_support::tridiag(5);
        let edges: Vec<f64> = a.values().iter().map(|v| v / 2.0).collect();
        let mut pb = ParamBuilder::new(rng_from_seed(5));
        let gat = GatLayer::new(&mut pb, "g", 2, 3);
        let mut p = pb.params;
        let x = randv(10, 8);
        check(&mut p, &x, |p, x| gat.forward(p, &a, &edges, x).0, &|p, x, dy, g| {
            let (_, cache) = gat.forward(p, &a, &edges, x);
            gat.backward(p, &a, &edges, &cache, dy, g, true)
        });
    }
}

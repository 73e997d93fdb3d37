//! Fully connected layers over flat parameter slices, with recorded
//! activations for reverse mode.
//!
//! Layer `k` stores its weights row-major (`out x in`) followed by its bias.
//! The caller owns the first layer's bias: it passes the initial
//! pre-activation (bias plus any precomputed input contribution) to
//! [`Mlp::forward`] and receives the first layer's pre-activation gradient
//! from [`Mlp::backward`]. This lets a color head fold the per-ray direction
//! term into one vector instead of recomputing it per sample.

use super::config::{mlp_param_count, Activation};

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Mlp {
    /// Offset of the first weight inside the parameter slice handed to the
    /// methods below.
    pub offset: usize,
    pub sizes: Vec<usize>,
    weight_offsets: Vec<usize>,
    tape_offsets: Vec<usize>,
    tape_len: usize,
}

#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Softplus => softplus(z),
        }
    }

    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus => sigmoid(z),
        }
    }
}

impl Mlp {
    pub fn new(offset: usize, sizes: Vec<usize>) -> Self {
        let mut weight_offsets = Vec::new();
        let mut tape_offsets = Vec::new();
        let mut w = offset;
        let mut t = 0;
        let layers = sizes.len() - 1;
        for k in 0..layers {
            weight_offsets.push(w);
            w += sizes[k] * sizes[k + 1] + sizes[k + 1];
            tape_offsets.push(t);
            t += if k + 1 < layers {
                2 * sizes[k + 1]
            } else {
                sizes[k + 1]
            };
        }
        Self {
            offset,
            sizes,
            weight_offsets,
            tape_offsets,
            tape_len: t,
        }
    }

    pub fn layers(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        mlp_param_count(&self.sizes)
    }

    pub fn tape_len(&self) -> usize {
        self.tape_len
    }

    pub fn width(&self) -> usize {
        self.sizes.iter().copied().max().unwrap_or(0)
    }

    pub fn first_hidden(&self) -> usize {
        self.sizes[1]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn weights<'a>(&self, p: &'a [f64], k: usize) -> &'a [f64] {
        let o = self.weight_offsets[k];
        &p[o..o + self.sizes[k] * self.sizes[k + 1]]
    }

    pub fn bias<'a>(&self, p: &'a [f64], k: usize) -> &'a [f64] {
        let o = self.weight_offsets[k] + self.sizes[k] * self.sizes[k + 1];
        &p[o..o + self.sizes[k + 1]]
    }

    pub fn bias_offset(&self, k: usize) -> usize {
        self.weight_offsets[k] + self.sizes[k] * self.sizes[k + 1]
    }

    pub fn weight_offset(&self, k: usize) -> usize {
        self.weight_offsets[k]
    }

    /// Adds `W0[:, cols] . x` to `out` for the input columns starting at `col0`.
    pub fn first_layer_partial(&self, p: &[f64], col0: usize, x: &[f64], out: &mut [f64]) {
        let w = self.weights(p, 0);
        let n_in = self.sizes[0];
        for (o, acc) in out.iter_mut().enumerate() {
            let row = &w[o * n_in + col0..o * n_in + col0 + x.len()];
            *acc += dot(row, x);
        }
    }

    /// Forward pass. `input` feeds the first `input.len()` columns of layer 0.
    pub fn forward(
        &self,
        p: &[f64],
        input: &[f64],
        first_pre: &[f64],
        act: Activation,
        tape: &mut [f64],
    ) {
        let layers = self.layers();
        for k in 0..layers {
            let (n_in, n_out) = (self.sizes[k], self.sizes[k + 1]);
            let w = self.weights(p, k);
            let t = self.tape_offsets[k];
            let (before, rest) = tape.split_at_mut(t);
            let x: &[f64] = if k == 0 {
                input
            } else {
                let pt = self.tape_offsets[k - 1];
                &before[pt + self.sizes[k]..pt + 2 * self.sizes[k]]
            };
            let width = x.len();
            if k == 0 {
                for o in 0..n_out {
                    rest[o] = first_pre[o] + dot(&w[o * n_in..o * n_in + width], x);
                }
            } else {
                let b = self.bias(p, k);
                for o in 0..n_out {
                    rest[o] = b[o] + dot(&w[o * n_in..o * n_in + width], x);
                }
            }
            if k + 1 < layers {
                let (pre, post) = rest.split_at_mut(n_out);
                for o in 0..n_out {
                    post[o] = act.apply(pre[o]);
                }
            }
        }
    }

    pub fn output<'a>(&self, tape: &'a [f64]) -> &'a [f64] {
        let t = self.tape_offsets[self.layers() - 1];
        &tape[t..t + self.output_dim()]
    }

    /// Reverse pass. `d_out` is the gradient with respect to the final
    /// pre-activations. Weight gradients (and biases of layers past the
    /// first) accumulate into `grad`, indexed like `p`. The first layer's
    /// pre-activation gradient is written to `d_first_pre`; the input
    /// gradient, when requested, to `d_input`.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        p: &[f64],
        input: &[f64],
        tape: &[f64],
        d_out: &[f64],
        act: Activation,
        grad: &mut [f64],
        d_first_pre: &mut [f64],
        mut d_input: Option<&mut [f64]>,
        scratch: &mut [f64],
    ) {
        let layers = self.layers();
        let width = self.width();
        let (delta, next) = scratch.split_at_mut(width);
        delta[..d_out.len()].copy_from_slice(d_out);
        for k in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[k], self.sizes[k + 1]);
            let wo = self.weight_offsets[k];
            let x: &[f64] = if k == 0 {
                input
            } else {
                let pt = self.tape_offsets[k - 1];
                &tape[pt + n_in..pt + 2 * n_in]
            };
            let cols = x.len();
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                let g = &mut grad[wo + o * n_in..wo + o * n_in + cols];
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi += d * xi;
                }
            }
            if k > 0 {
                let bo = self.bias_offset(k);
                for o in 0..n_out {
                    grad[bo + o] += delta[o];
                }
                let w = self.weights(p, k);
                let pre = &tape[self.tape_offsets[k - 1]..self.tape_offsets[k - 1] + n_in];
                for i in 0..n_in {
                    next[i] = 0.0;
                }
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    for (ni, wi) in next[..n_in].iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                        *ni += d * wi;
                    }
                }
                for i in 0..n_in {
                    delta[i] = next[i] * act.derivative(pre[i]);
                }
            } else {
                d_first_pre[..n_out].copy_from_slice(&delta[..n_out]);
                if let Some(d_in) = d_input.as_deref_mut() {
                    let w = self.weights(p, 0);
                    for v in d_in.iter_mut() {
                        *v = 0.0;
                    }
                    for o in 0..n_out {
                        let d = delta[o];
                        for (di, wi) in d_in.iter_mut().zip(&w[o * n_in..o * n_in + cols]) {
                            *di += d * wi;
                        }
                    }
                }
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        for l in 0..4 {
            s[l] += a[4 * c + l] * b[4 * c + l];
        }
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

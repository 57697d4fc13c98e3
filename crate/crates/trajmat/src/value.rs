//! Small feedforward value approximators with hand-written gradient rules.
//! Parameters live in one flat vector (layer weights row-major, then the
//! layer bias), which keeps the optimizer, checkpoints, and finite
//! difference checks straightforward.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Feedforward network with tanh hidden layers and a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
    /// (weight offset, bias offset) per layer.
    offsets: Vec<(usize, usize)>,
}

/// Reusable forward cache: activations per layer (the input at index 0).
#[derive(Debug, Default, Clone)]
pub struct MlpCache {
    acts: Vec<Vec<f64>>,
}

impl Mlp {
    /// Xavier-uniform hidden initialization, biases zero. With
    /// `zero_output`, the final layer starts at exactly zero so the initial
    /// function is identically zero.
    pub fn new(sizes: &[usize], rng: &mut ChaCha8Rng, zero_output: bool) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let mut offsets = Vec::new();
        let mut total = 0;
        for l in 0..sizes.len() - 1 {
            offsets.push((total, total + sizes[l] * sizes[l + 1]));
            total += sizes[l] * sizes[l + 1] + sizes[l + 1];
        }
        let mut params = vec![0.0; total];
        let layers = sizes.len() - 1;
        for l in 0..layers {
            if zero_output && l == layers - 1 {
                continue;
            }
            let (w_off, b_off) = offsets[l];
            let scale = (6.0 / (sizes[l] + sizes[l + 1]) as f64).sqrt();
            for w in params[w_off..b_off].iter_mut() {
                *w = rng.random_range(-scale..scale);
            }
        }
        Self { sizes: sizes.to_vec(), params, offsets }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn load_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.params.len() {
            return Err(Error::DimMismatch {
                context: "Mlp::load_params",
                expected: self.params.len(),
                got: flat.len(),
            });
        }
        self.params.copy_from_slice(flat);
        Ok(())
    }

    fn layer_count(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Fold an input standardization `x -> (x - mean) / std` into the first
    /// layer, so the network afterwards consumes raw inputs while computing
    /// exactly what it computed on standardized ones. Zero-variance
    /// coordinates (std == 0) are dropped from the weights.
    pub fn fold_input_standardization(&mut self, mean: &[f64], std: &[f64]) -> Result<()> {
        let n_in = self.sizes[0];
        if mean.len() != n_in || std.len() != n_in {
            return Err(Error::DimMismatch {
                context: "fold_input_standardization",
                expected: n_in,
                got: mean.len(),
            });
        }
        let (w_off, b_off) = self.offsets[0];
        let n_out = self.sizes[1];
        for o in 0..n_out {
            let row = w_off + o * n_in;
            let mut shift = 0.0;
            for i in 0..n_in {
                if std[i] > 0.0 {
                    let w_std = self.params[row + i];
                    self.params[row + i] = w_std / std[i];
                    shift += w_std * mean[i] / std[i];
                } else {
                    self.params[row + i] = 0.0;
                }
            }
            self.params[b_off + o] -= shift;
        }
        Ok(())
    }

    /// Forward pass caching every activation; returns the scalar output
    /// (the output layer must have width 1).
    pub fn forward_cached(&self, x: &[f64], cache: &mut MlpCache) -> f64 {
        debug_assert_eq!(x.len(), self.sizes[0]);
        debug_assert_eq!(*self.sizes.last().unwrap(), 1);
        let layers = self.layer_count();
        cache.acts.resize(layers + 1, Vec::new());
        cache.acts[0].clear();
        cache.acts[0].extend_from_slice(x);
        for l in 0..layers {
            let (w_off, b_off) = self.offsets[l];
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (prev, rest) = cache.acts.split_at_mut(l + 1);
            let input = &prev[l];
            let out = &mut rest[0];
            out.clear();
            out.resize(n_out, 0.0);
            for (o, slot) in out.iter_mut().enumerate() {
                let row = &self.params[w_off + o * n_in..w_off + (o + 1) * n_in];
                let mut acc = self.params[b_off + o];
                for (w, v) in row.iter().zip(input.iter()) {
                    acc += w * v;
                }
                *slot = if l + 1 < layers { acc.tanh() } else { acc };
            }
        }
        cache.acts[layers][0]
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        let mut cache = MlpCache::default();
        self.forward_cached(x, &mut cache)
    }

    /// Backprop a scalar output gradient through the cached pass,
    /// accumulating into `grads` (flat, same layout as `params`).
    /// Optionally produces the gradient with respect to the input.
    pub fn backward(
        &self,
        cache: &MlpCache,
        dout: f64,
        grads: &mut [f64],
        mut dx: Option<&mut [f64]>,
    ) {
        debug_assert_eq!(grads.len(), self.params.len());
        let layers = self.layer_count();
        let mut delta = vec![dout];
        for l in (0..layers).rev() {
            let (w_off, b_off) = self.offsets[l];
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let input = &cache.acts[l];
            let mut dprev = vec![0.0; n_in];
            for o in 0..n_out {
                let d = delta[o];
                grads[b_off + o] += d;
                let row_off = w_off + o * n_in;
                for i in 0..n_in {
                    grads[row_off + i] += d * input[i];
                    dprev[i] += d * self.params[row_off + i];
                }
            }
            if l > 0 {
                // Through the tanh of the previous layer's output.
                for (dp, a) in dprev.iter_mut().zip(cache.acts[l].iter()) {
                    *dp *= 1.0 - a * a;
                }
            }
            if l == 0 {
                if let Some(dx) = dx.as_deref_mut() {
                    dx.copy_from_slice(&dprev);
                }
            }
            delta = dprev;
        }
    }
}

/// Adam over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(lr: f64, n_params: usize) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![0.0; n_params], v: vec![0.0; n_params] }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        debug_assert_eq!(params.len(), self.m.len());
        debug_assert_eq!(params.len(), grads.len());
        self.t += 1;
        let b1t = 1.0 - self.beta1.powi(self.t as i32);
        let b2t = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mhat = self.m[i] / b1t;
            let vhat = self.v[i] / b2t;
            params[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
        }
    }
}

/// Max relative error between analytic and central-difference gradients of
/// the scalar output, probed at `n_probe` random parameter indices.
pub fn gradient_check(mlp: &mut Mlp, x: &[f64], n_probe: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mut cache = MlpCache::default();
    mlp.forward_cached(x, &mut cache);
    let mut grads = vec![0.0; mlp.param_count()];
    mlp.backward(&cache, 1.0, &mut grads, None);

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..n_probe {
        let i = rng.random_range(0..mlp.param_count());
        let orig = mlp.params()[i];
        mlp.params_mut()[i] = orig + h;
        let up = mlp.forward(x);
        mlp.params_mut()[i] = orig - h;
        let down = mlp.forward(x);
        mlp.params_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * h);
        let denom = 1.0 + numeric.abs().max(grads[i].abs());
        worst = worst.max((grads[i] - numeric).abs() / denom);
    }
    worst
}

/// Spearman rank correlation; `None` when either side has zero rank
/// variance (ties everywhere).
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let rx = ranks(xs);
    let ry = ranks(ys);
    pearson(&rx, &ry)
}

fn ranks(vals: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
    let mut out = vec![0.0; vals.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && vals[idx[j + 1]] == vals[idx[i]] {
            j += 1;
        }
        // Average rank over the tie group.
        let rank = (i + j) as f64 / 2.0;
        for k in i..=j {
            out[idx[k]] = rank;
        }
        i = j + 1;
    }
    out
}

fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys.iter()) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

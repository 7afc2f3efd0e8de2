//! Fully connected ReLU network with a two-logit softmax head.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Rows per gradient work unit. Chunk gradients are summed in chunk order,
/// so results do not depend on the number of worker threads.
pub const CHUNK_ROWS: usize = 512;

/// Parameters are stored flat: for each layer its `out x in` weight matrix
/// (row-major) followed by its `out` biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

impl Mlp {
    pub fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) || *sizes.last().unwrap() != 2 {
            return Err(Error::InvalidParameter(format!("layer sizes must be >= 1 each and end in 2, got {sizes:?}")));
        }
        Ok(Mlp { sizes: sizes.to_vec(), params: vec![0.0; Self::param_count(sizes)] })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(sizes: &[usize], seed: u64) -> Result<Self> {
        let mut m = Self::zeros(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut off = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut m.params[off..off + fan_in * fan_out] {
                *p = rng.random_range(-a..a);
            }
            off += fan_in * fan_out + fan_out;
        }
        Ok(m)
    }

    pub fn d_in(&self) -> usize {
        self.sizes[0]
    }

    /// Offsets of (weights, biases) for layer `l`.
    fn layer(&self, l: usize) -> (usize, usize) {
        let mut off = 0;
        for w in self.sizes.windows(2).take(l) {
            off += w[0] * w[1] + w[1];
        }
        (off, off + self.sizes[l] * self.sizes[l + 1])
    }

    /// Rounds every parameter to the nearest `f32`, the checkpoint precision.
    pub fn round_to_f32(&mut self) {
        for p in &mut self.params {
            *p = *p as f32 as f64;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Activations of every layer for `b` rows; `acts[0]` is the input and
    /// the last entry holds logits.
    fn forward_chunk(&self, x: &[f64], b: usize) -> Vec<Vec<f64>> {
        let n_layers = self.sizes.len() - 1;
        let mut acts = vec![x.to_vec()];
        for l in 0..n_layers {
            let (fi, fo) = (self.sizes[l], self.sizes[l + 1]);
            let (wo, bo) = self.layer(l);
            let w = &self.params[wo..wo + fi * fo];
            let bias = &self.params[bo..bo + fo];
            let input = &acts[l];
            let mut out = vec![0.0; b * fo];
            for r in 0..b {
                let xi = &input[r * fi..(r + 1) * fi];
                for o in 0..fo {
                    let wr = &w[o * fi..(o + 1) * fi];
                    let mut s = bias[o];
                    for k in 0..fi {
                        s += wr[k] * xi[k];
                    }
                    out[r * fo + o] = if l + 1 < n_layers { s.max(0.0) } else { s };
                }
            }
            acts.push(out);
        }
        acts
    }

    /// Logits for `rows` input rows.
    pub fn logits(&self, x: &[f64], rows: usize) -> Result<Vec<[f64; 2]>> {
        let d = self.d_in();
        if x.len() != rows * d {
            return Err(Error::DimensionMismatch { expected: d, found: if rows == 0 { 0 } else { x.len() / rows } });
        }
        let chunks: Vec<Vec<[f64; 2]>> = x
            .par_chunks(CHUNK_ROWS * d.max(1))
            .map(|c| {
                let b = c.len() / d;
                let acts = self.forward_chunk(c, b);
                acts.last().unwrap().chunks(2).map(|z| [z[0], z[1]]).collect()
            })
            .collect();
        Ok(chunks.concat())
    }

    /// Summed weighted cross-entropy `sum_i w[y_i] * -ln p(y_i)` and its
    /// gradient over one chunk; `y` holds class indices 0/1.
    fn chunk_loss_grad(&self, x: &[f64], y: &[u8], w: [f64; 2]) -> (f64, f64, Vec<f64>) {
        let b = y.len();
        let acts = self.forward_chunk(x, b);
        let n_layers = self.sizes.len() - 1;
        let mut grad = vec![0.0; self.params.len()];
        let logits = acts.last().unwrap();
        let mut delta = vec![0.0; b * 2];
        let (mut loss, mut wsum) = (0.0, 0.0);
        for r in 0..b {
            let (z0, z1) = (logits[2 * r], logits[2 * r + 1]);
            let m = z0.max(z1);
            let lse = m + ((z0 - m).exp() + (z1 - m).exp()).ln();
            let p = [(z0 - lse).exp(), (z1 - lse).exp()];
            let c = y[r] as usize;
            let wc = w[c];
            loss += wc * (lse - logits[2 * r + c]);
            wsum += wc;
            delta[2 * r] = wc * (p[0] - if c == 0 { 1.0 } else { 0.0 });
            delta[2 * r + 1] = wc * (p[1] - if c == 1 { 1.0 } else { 0.0 });
        }
        for l in (0..n_layers).rev() {
            let (fi, fo) = (self.sizes[l], self.sizes[l + 1]);
            let (wo, bo) = self.layer(l);
            let input = &acts[l];
            {
                let (gw, gb) = grad[wo..bo + fo].split_at_mut(fi * fo);
                for r in 0..b {
                    let xi = &input[r * fi..(r + 1) * fi];
                    for o in 0..fo {
                        let d = delta[r * fo + o];
                        if d == 0.0 {
                            continue;
                        }
                        gb[o] += d;
                        let g = &mut gw[o * fi..(o + 1) * fi];
                        for k in 0..fi {
                            g[k] += d * xi[k];
                        }
                    }
                }
            }
            if l > 0 {
                let wm = &self.params[wo..wo + fi * fo];
                let mut prev = vec![0.0; b * fi];
                for r in 0..b {
                    let pr = &mut prev[r * fi..(r + 1) * fi];
                    for o in 0..fo {
                        let d = delta[r * fo + o];
                        if d == 0.0 {
                            continue;
                        }
                        let wr = &wm[o * fi..(o + 1) * fi];
                        for k in 0..fi {
                            pr[k] += d * wr[k];
                        }
                    }
                    for k in 0..fi {
                        if input[r * fi + k] <= 0.0 {
                            pr[k] = 0.0;
                        }
                    }
                }
                delta = prev;
            }
        }
        (loss, wsum, grad)
    }

    /// Weighted-mean cross-entropy over all rows and its gradient with
    /// respect to `params`. The mean divides by the summed sample weights.
    pub fn loss_and_grad(&self, x: &[f64], y: &[u8], w: [f64; 2]) -> Result<(f64, Vec<f64>)> {
        let d = self.d_in();
        if x.len() != y.len() * d {
            return Err(Error::DimensionMismatch { expected: d, found: if y.is_empty() { 0 } else { x.len() / y.len() } });
        }
        if y.is_empty() {
            return Err(Error::EmptyInput("empty batch".into()));
        }
        let parts: Vec<(f64, f64, Vec<f64>)> = x
            .par_chunks(CHUNK_ROWS * d)
            .zip(y.par_chunks(CHUNK_ROWS))
            .map(|(xc, yc)| self.chunk_loss_grad(xc, yc, w))
            .collect();
        let mut grad = vec![0.0; self.params.len()];
        let (mut loss, mut wsum) = (0.0, 0.0);
        for (l, ws, g) in parts {
            loss += l;
            wsum += ws;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        for g in &mut grad {
            *g /= wsum;
        }
        Ok((loss / wsum, grad))
    }

    pub fn loss(&self, x: &[f64], y: &[u8], w: [f64; 2]) -> Result<f64> {
        Ok(self.loss_and_grad(x, y, w)?.0)
    }
}

/// Numerically stable two-class softmax.
pub fn softmax2(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e0 = (z[0] - m).exp();
    let e1 = (z[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

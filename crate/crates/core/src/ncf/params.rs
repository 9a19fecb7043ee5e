use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NcfConfig;
use crate::linalg::dot;

/// One training example in dense-index space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example {
    pub user: usize,
    pub item: usize,
    /// Target in [0, 1].
    pub target: f64,
}

/// All trainable tensors, row-major.
///
/// Layer `l` of the MLP tower has weights `widths[l] × fan_in(l)`; the first
/// layer's fan-in is `2 · latent_dim` (user then item MLP embedding).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NcfParameters {
    pub n_users: usize,
    pub n_items: usize,
    pub latent_dim: usize,
    pub widths: Vec<usize>,
    pub gmf_user_embeddings: Vec<f64>,
    pub gmf_item_embeddings: Vec<f64>,
    pub mlp_user_embeddings: Vec<f64>,
    pub mlp_item_embeddings: Vec<f64>,
    pub mlp_weights: Vec<Vec<f64>>,
    pub mlp_biases: Vec<Vec<f64>>,
    /// Over `[gmf (latent_dim) ‖ mlp top (last width)]`.
    pub neumf_weights: Vec<f64>,
    pub output_bias: f64,
}

impl NcfParameters {
    pub fn zeros(n_users: usize, n_items: usize, cfg: &NcfConfig) -> Self {
        let d = cfg.latent_dim;
        let widths = cfg.mlp_layers.clone();
        let mut fan_in = 2 * d;
        let mut mlp_weights = Vec::with_capacity(widths.len());
        let mut mlp_biases = Vec::with_capacity(widths.len());
        for &w in &widths {
            mlp_weights.push(vec![0.0; w * fan_in]);
            mlp_biases.push(vec![0.0; w]);
            fan_in = w;
        }
        NcfParameters {
            n_users,
            n_items,
            latent_dim: d,
            gmf_user_embeddings: vec![0.0; n_users * d],
            gmf_item_embeddings: vec![0.0; n_items * d],
            mlp_user_embeddings: vec![0.0; n_users * d],
            mlp_item_embeddings: vec![0.0; n_items * d],
            mlp_weights,
            mlp_biases,
            neumf_weights: vec![0.0; d + fan_in],
            output_bias: 0.0,
            widths,
        }
    }

    /// Every entry drawn from uniform(−scale, scale), tensors in declaration
    /// order.
    pub fn init_uniform(n_users: usize, n_items: usize, cfg: &NcfConfig, scale: f64, rng: &mut impl Rng) -> Self {
        let mut p = Self::zeros(n_users, n_items, cfg);
        p.for_each_mut(|x| *x = rng.gen_range(-scale..scale));
        p
    }

    pub fn tensors(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![
            ("gmf_user_embeddings".into(), &self.gmf_user_embeddings),
            ("gmf_item_embeddings".into(), &self.gmf_item_embeddings),
            ("mlp_user_embeddings".into(), &self.mlp_user_embeddings),
            ("mlp_item_embeddings".into(), &self.mlp_item_embeddings),
        ];
        for (l, (w, b)) in self.mlp_weights.iter().zip(&self.mlp_biases).enumerate() {
            out.push((format!("mlp_weights[{l}]"), w));
            out.push((format!("mlp_biases[{l}]"), b));
        }
        out.push(("neumf_weights".into(), &self.neumf_weights));
        out.push(("output_bias".into(), std::slice::from_ref(&self.output_bias)));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out: Vec<(String, &mut [f64])> = vec![
            ("gmf_user_embeddings".into(), &mut self.gmf_user_embeddings),
            ("gmf_item_embeddings".into(), &mut self.gmf_item_embeddings),
            ("mlp_user_embeddings".into(), &mut self.mlp_user_embeddings),
            ("mlp_item_embeddings".into(), &mut self.mlp_item_embeddings),
        ];
        for (l, (w, b)) in self.mlp_weights.iter_mut().zip(self.mlp_biases.iter_mut()).enumerate() {
            out.push((format!("mlp_weights[{l}]"), w));
            out.push((format!("mlp_biases[{l}]"), b));
        }
        out.push(("neumf_weights".into(), &mut self.neumf_weights));
        out.push(("output_bias".into(), std::slice::from_mut(&mut self.output_bias)));
        out
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(&mut f);
        }
    }

    pub fn len(&self) -> usize {
        self.tensors().iter().map(|t| t.1.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }

    fn fan_in(&self, l: usize) -> usize {
        if l == 0 {
            2 * self.latent_dim
        } else {
            self.widths[l - 1]
        }
    }

    /// `W₀[:, :d] · m_u` (user half of the first layer's pre-activation).
    pub(crate) fn user_projection(&self, u: usize) -> Vec<f64> {
        self.first_layer_half(&self.mlp_user_embeddings, u, 0)
    }

    /// `W₀[:, d:] · m_i`.
    pub(crate) fn item_projection(&self, i: usize) -> Vec<f64> {
        self.first_layer_half(&self.mlp_item_embeddings, i, self.latent_dim)
    }

    fn first_layer_half(&self, table: &[f64], row: usize, offset: usize) -> Vec<f64> {
        let d = self.latent_dim;
        let emb = &table[row * d..(row + 1) * d];
        let fan_in = self.fan_in(0);
        (0..self.widths[0])
            .map(|o| dot(&self.mlp_weights[0][o * fan_in + offset..o * fan_in + offset + d], emb))
            .collect()
    }

    /// Pre-sigmoid output given the first-layer projections.
    pub(crate) fn logit_with(&self, u: usize, i: usize, user_proj: &[f64], item_proj: &[f64]) -> f64 {
        let d = self.latent_dim;
        let gu = &self.gmf_user_embeddings[u * d..(u + 1) * d];
        let gi = &self.gmf_item_embeddings[i * d..(i + 1) * d];
        let mut z = self.output_bias;
        for k in 0..d {
            z += self.neumf_weights[k] * (gu[k] * gi[k]);
        }
        let mut h: Vec<f64> = (0..self.widths[0])
            .map(|o| (user_proj[o] + item_proj[o] + self.mlp_biases[0][o]).max(0.0))
            .collect();
        for l in 1..self.widths.len() {
            let fan_in = self.widths[l - 1];
            h = (0..self.widths[l])
                .map(|o| (dot(&self.mlp_weights[l][o * fan_in..(o + 1) * fan_in], &h) + self.mlp_biases[l][o]).max(0.0))
                .collect();
        }
        z + dot(&self.neumf_weights[d..], &h)
    }

    pub fn logit(&self, u: usize, i: usize) -> f64 {
        self.logit_with(u, i, &self.user_projection(u), &self.item_projection(i))
    }

    /// Model output in (0, 1).
    pub fn forward(&self, u: usize, i: usize) -> f64 {
        sigmoid(self.logit(u, i))
    }

    /// Mean binary cross-entropy over the batch.
    pub fn loss(&self, batch: &[Example]) -> f64 {
        batch.iter().map(|e| bce_with_logit(self.logit(e.user, e.item), e.target)).sum::<f64>() / batch.len() as f64
    }

    /// Mean loss and its gradient over `batch`, as a dense parameter-shaped
    /// tensor set.
    pub fn gradient(&self, batch: &[Example]) -> (f64, NcfParameters) {
        let mut grad = self.zeroed_like();
        let mut scratch = Scratch::new(self);
        let loss = self.accumulate(batch, &mut grad, &mut scratch);
        (loss, grad)
    }

    pub(crate) fn zeroed_like(&self) -> NcfParameters {
        let mut g = self.clone();
        g.for_each_mut(|x| *x = 0.0);
        g
    }

    /// Adds the batch-mean gradient into `grad` and returns the batch-mean
    /// loss.
    pub(crate) fn accumulate(&self, batch: &[Example], grad: &mut NcfParameters, s: &mut Scratch) -> f64 {
        let d = self.latent_dim;
        let n_layers = self.widths.len();
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;
        for e in batch {
            let (u, i) = (e.user, e.item);
            // forward, keeping activations
            s.input[..d].copy_from_slice(&self.mlp_user_embeddings[u * d..(u + 1) * d]);
            s.input[d..].copy_from_slice(&self.mlp_item_embeddings[i * d..(i + 1) * d]);
            for l in 0..n_layers {
                let fan_in = self.fan_in(l);
                let (prev, rest) = s.acts.split_at_mut(l);
                let x: &[f64] = if l == 0 { &s.input } else { &prev[l - 1] };
                for o in 0..self.widths[l] {
                    let pre = dot(&self.mlp_weights[l][o * fan_in..(o + 1) * fan_in], x) + self.mlp_biases[l][o];
                    rest[0][o] = pre.max(0.0);
                }
            }
            let gu = &self.gmf_user_embeddings[u * d..(u + 1) * d];
            let gi = &self.gmf_item_embeddings[i * d..(i + 1) * d];
            let mut z = self.output_bias;
            for k in 0..d {
                z += self.neumf_weights[k] * (gu[k] * gi[k]);
            }
            let top = &s.acts[n_layers - 1];
            z += dot(&self.neumf_weights[d..], top);
            loss += bce_with_logit(z, e.target);

            // backward
            let dz = (sigmoid(z) - e.target) * scale;
            grad.output_bias += dz;
            for k in 0..d {
                grad.neumf_weights[k] += dz * gu[k] * gi[k];
                let dg = dz * self.neumf_weights[k];
                grad.gmf_user_embeddings[u * d + k] += dg * gi[k];
                grad.gmf_item_embeddings[i * d + k] += dg * gu[k];
            }
            for (o, &h) in top.iter().enumerate() {
                grad.neumf_weights[d + o] += dz * h;
                s.delta[n_layers - 1][o] = dz * self.neumf_weights[d + o];
            }
            for l in (0..n_layers).rev() {
                let fan_in = self.fan_in(l);
                // through the ReLU
                for o in 0..self.widths[l] {
                    if s.acts[l][o] <= 0.0 {
                        s.delta[l][o] = 0.0;
                    }
                }
                let x: &[f64] = if l == 0 { &s.input } else { &s.acts[l - 1] };
                let back = &mut s.back[..fan_in];
                back.iter_mut().for_each(|b| *b = 0.0);
                for o in 0..self.widths[l] {
                    let g = s.delta[l][o];
                    if g == 0.0 {
                        continue;
                    }
                    grad.mlp_biases[l][o] += g;
                    let row = &self.mlp_weights[l][o * fan_in..(o + 1) * fan_in];
                    let grow = &mut grad.mlp_weights[l][o * fan_in..(o + 1) * fan_in];
                    for c in 0..fan_in {
                        grow[c] += g * x[c];
                        back[c] += g * row[c];
                    }
                }
                if l > 0 {
                    s.delta[l - 1].copy_from_slice(&s.back[..fan_in]);
                }
            }
            for k in 0..d {
                grad.mlp_user_embeddings[u * d + k] += s.back[k];
                grad.mlp_item_embeddings[i * d + k] += s.back[d + k];
            }
        }
        loss * scale
    }
}

/// Reusable per-example buffers for [`NcfParameters::accumulate`].
pub(crate) struct Scratch {
    input: Vec<f64>,
    acts: Vec<Vec<f64>>,
    delta: Vec<Vec<f64>>,
    back: Vec<f64>,
}

impl Scratch {
    pub(crate) fn new(p: &NcfParameters) -> Self {
        let widest = p.widths.iter().copied().chain([2 * p.latent_dim]).max().unwrap_or(0);
        Scratch {
            input: vec![0.0; 2 * p.latent_dim],
            acts: p.widths.iter().map(|&w| vec![0.0; w]).collect(),
            delta: p.widths.iter().map(|&w| vec![0.0; w]).collect(),
            back: vec![0.0; widest],
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `−y·ln σ(z) − (1−y)·ln(1−σ(z))`, evaluated without overflow.
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + (-z.abs()).exp().ln_1p()
}

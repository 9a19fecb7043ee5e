use rand::seq::SliceRandom;

use super::params::{NcfParameters, Scratch};
use super::{NcfModel, Optimizer, TargetMode, INIT_SCALE};
use crate::error::{Error, Result};
use crate::ingest::{Dataset, DatasetKind};
use crate::seeding::{self, Stream};

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

pub(super) fn fit(model: &mut NcfModel, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Empty);
    }
    match (model.config.target, data.kind()) {
        (TargetMode::Binary, DatasetKind::Implicit) if !data.has_negatives() => {
            return Err(Error::Validation("implicit training data has no negatives; sample them first".into()));
        }
        (TargetMode::Binary, DatasetKind::Explicit) => {
            return Err(Error::Validation(
                "binary target needs implicit data with sampled negatives".into(),
            ));
        }
        (TargetMode::ScaledRating, DatasetKind::Implicit) => {
            return Err(Error::Validation("scaled-rating target needs explicit ratings".into()));
        }
        _ => {}
    }
    model.rating_scale = data.rating_scale();
    let cfg = model.config.clone();
    let mut init_rng = seeding::rng(cfg.seed, Stream::Init, &[]);
    model.params = NcfParameters::init_uniform(model.users.len(), model.items.len(), &cfg, INIT_SCALE, &mut init_rng);
    let examples = model.examples(data.interactions())?;

    let mut grad = model.params.zeroed_like();
    let mut scratch = Scratch::new(&model.params);
    let mut adam = match cfg.optimizer {
        Optimizer::Adam => Some(AdamState::new(&model.params)),
        Optimizer::Sgd => None,
    };
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    let mut user_seen = vec![false; model.users.len()];
    let mut item_seen = vec![false; model.items.len()];
    model.loss_history.clear();

    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        order.shuffle(&mut seeding::rng(cfg.seed, Stream::Shuffle, &[epoch as u64]));
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&k| examples[k]));
            let loss = model.params.accumulate(&batch, &mut grad, &mut scratch);
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch: epoch + 1, loss });
            }
            total += loss * batch.len() as f64;
            match adam.as_mut() {
                Some(state) => {
                    state.step(&mut model.params, &grad, cfg.learning_rate);
                    grad.for_each_mut(|x| *x = 0.0);
                }
                None => {
                    let users = touched(&batch, |e| e.user, &mut user_seen);
                    let items = touched(&batch, |e| e.item, &mut item_seen);
                    sgd_step(&mut model.params, &mut grad, &users, &items, cfg.learning_rate);
                }
            }
        }
        let epoch_loss = total / examples.len() as f64;
        if !epoch_loss.is_finite() || !model.params.all_finite() {
            return Err(Error::Divergence { epoch: epoch + 1, loss: epoch_loss });
        }
        model.loss_history.push(epoch_loss);
    }
    model.trained = true;
    Ok(())
}

/// Distinct indices in first-appearance order.
fn touched(batch: &[super::Example], key: impl Fn(&super::Example) -> usize, seen: &mut [bool]) -> Vec<usize> {
    let mut out = Vec::new();
    for e in batch {
        let k = key(e);
        if !seen[k] {
            seen[k] = true;
            out.push(k);
        }
    }
    for &k in &out {
        seen[k] = false;
    }
    out
}

/// Plain SGD. Embedding rows outside the batch have zero gradient, so only
/// the touched rows are visited; the gradient buffer is left zeroed.
fn sgd_step(p: &mut NcfParameters, g: &mut NcfParameters, users: &[usize], items: &[usize], lr: f64) {
    let d = p.latent_dim;
    for &u in users {
        for k in u * d..(u + 1) * d {
            p.gmf_user_embeddings[k] -= lr * g.gmf_user_embeddings[k];
            p.mlp_user_embeddings[k] -= lr * g.mlp_user_embeddings[k];
            g.gmf_user_embeddings[k] = 0.0;
            g.mlp_user_embeddings[k] = 0.0;
        }
    }
    for &i in items {
        for k in i * d..(i + 1) * d {
            p.gmf_item_embeddings[k] -= lr * g.gmf_item_embeddings[k];
            p.mlp_item_embeddings[k] -= lr * g.mlp_item_embeddings[k];
            g.gmf_item_embeddings[k] = 0.0;
            g.mlp_item_embeddings[k] = 0.0;
        }
    }
    let dense_p = p.mlp_weights.iter_mut().chain(p.mlp_biases.iter_mut()).chain(std::iter::once(&mut p.neumf_weights));
    let dense_g = g.mlp_weights.iter_mut().chain(g.mlp_biases.iter_mut()).chain(std::iter::once(&mut g.neumf_weights));
    for (pt, gt) in dense_p.zip(dense_g) {
        for (x, dx) in pt.iter_mut().zip(gt.iter_mut()) {
            *x -= lr * *dx;
            *dx = 0.0;
        }
    }
    p.output_bias -= lr * g.output_bias;
    g.output_bias = 0.0;
}

struct AdamState {
    m: NcfParameters,
    v: NcfParameters,
    t: i32,
}

impl AdamState {
    fn new(p: &NcfParameters) -> Self {
        AdamState {
            m: p.zeroed_like(),
            v: p.zeroed_like(),
            t: 0,
        }
    }

    fn step(&mut self, p: &mut NcfParameters, g: &NcfParameters, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        let grads = g.tensors();
        for (((_, pt), (_, mt)), ((_, vt), (_, gt))) in p
            .tensors_mut()
            .into_iter()
            .zip(self.m.tensors_mut())
            .zip(self.v.tensors_mut().into_iter().zip(grads))
        {
            for k in 0..pt.len() {
                let gk = gt[k];
                mt[k] = ADAM_BETA1 * mt[k] + (1.0 - ADAM_BETA1) * gk;
                vt[k] = ADAM_BETA2 * vt[k] + (1.0 - ADAM_BETA2) * gk * gk;
                pt[k] -= lr * (mt[k] / c1) / ((vt[k] / c2).sqrt() + ADAM_EPS);
            }
        }
    }
}

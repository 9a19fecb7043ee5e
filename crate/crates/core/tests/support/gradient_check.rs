//! Analytic NCF gradients against central finite differences.
//!
//! The network is piecewise smooth: a difference stencil that straddles a
//! ReLU kink measures a different piece than the analytic gradient. A
//! reference forward pass written here records the activation pattern, and
//! each coordinate's step is shrunk until no stencil point changes it.

use rand::Rng;
use recinfluence::ncf::{Example, NcfConfig, NcfParameters};
use recinfluence::seeding::{rng, Stream};

pub const N_USERS: usize = 3;
pub const N_ITEMS: usize = 4;

/// Coordinates whose gradient is below this in magnitude on both sides are
/// compared absolutely against it, since the difference quotient cannot
/// resolve them relatively.
const FLOOR: f64 = 1e-7;
const STEPS: [f64; 5] = [1e-4, 1e-5, 1e-6, 1e-7, 1e-8];

/// Toy parameters for draw `draw`: the default architecture, weights
/// uniform in ±0.5.
pub fn toy_parameters(draw: u64) -> NcfParameters {
    let cfg = NcfConfig::default();
    let mut r = rng(draw, Stream::Init, &[0x6763]);
    NcfParameters::init_uniform(N_USERS, N_ITEMS, &cfg, 0.5, &mut r)
}

pub fn toy_batch(draw: u64) -> Vec<Example> {
    let mut r = rng(draw, Stream::Shuffle, &[0x6763]);
    (0..8)
        .map(|_| Example {
            user: r.gen_range(0..N_USERS),
            item: r.gen_range(0..N_ITEMS),
            target: if r.gen_bool(0.2) { r.gen_range(0.0..1.0) } else { f64::from(u8::from(r.gen_bool(0.5))) },
        })
        .collect()
}

/// Logit of one pair, pushing each hidden unit's `pre-activation > 0` onto
/// `pattern`.
pub fn reference_logit(p: &NcfParameters, u: usize, i: usize, pattern: &mut Vec<bool>) -> f64 {
    let d = p.latent_dim;
    let mut z = p.output_bias;
    for k in 0..d {
        z += p.neumf_weights[k] * p.gmf_user_embeddings[u * d + k] * p.gmf_item_embeddings[i * d + k];
    }
    let mut h: Vec<f64> = p.mlp_user_embeddings[u * d..(u + 1) * d]
        .iter()
        .chain(&p.mlp_item_embeddings[i * d..(i + 1) * d])
        .copied()
        .collect();
    for (l, &width) in p.widths.iter().enumerate() {
        let fan_in = h.len();
        h = (0..width)
            .map(|o| {
                let pre: f64 = p.mlp_biases[l][o]
                    + (0..fan_in).map(|c| p.mlp_weights[l][o * fan_in + c] * h[c]).sum::<f64>();
                pattern.push(pre > 0.0);
                pre.max(0.0)
            })
            .collect();
    }
    z + h.iter().enumerate().map(|(j, v)| p.neumf_weights[d + j] * v).sum::<f64>()
}

/// Mean stable binary cross-entropy and the batch's activation pattern.
fn reference_loss(p: &NcfParameters, batch: &[Example]) -> (f64, Vec<bool>) {
    let mut pattern = Vec::new();
    let total: f64 = batch
        .iter()
        .map(|e| {
            let z = reference_logit(p, e.user, e.item, &mut pattern);
            z.max(0.0) - z * e.target + (-z.abs()).exp().ln_1p()
        })
        .sum();
    (total / batch.len() as f64, pattern)
}

/// Fourth-order central difference at the largest step whose stencil stays
/// on one smooth piece; `None` if even the smallest step crosses a kink.
fn numeric(params: &NcfParameters, batch: &[Example], tensor: usize, idx: usize) -> Option<f64> {
    let (_, base) = reference_loss(params, batch);
    'step: for h in STEPS {
        let mut at = [0.0; 4];
        for (slot, delta) in [h, -h, 2.0 * h, -2.0 * h].into_iter().enumerate() {
            let mut p = params.clone();
            p.tensors_mut()[tensor].1[idx] += delta;
            let (loss, pattern) = reference_loss(&p, batch);
            if pattern != base {
                continue 'step;
            }
            at[slot] = loss;
        }
        return Some((8.0 * (at[0] - at[1]) - (at[2] - at[3])) / (12.0 * h));
    }
    None
}

#[derive(Debug, Default, Clone)]
pub struct GradientCheck {
    /// Worst `|a − n| / max(|a|, |n|, FLOOR)`.
    pub max_relative_error: f64,
    pub worst: String,
    pub coordinates: usize,
    /// Coordinates sitting on a kink at every step (not comparable).
    pub on_kink: usize,
    /// Worst gap between the library loss and the reference loss.
    pub max_loss_gap: f64,
}

impl GradientCheck {
    fn merge(mut self, other: GradientCheck) -> GradientCheck {
        if other.max_relative_error > self.max_relative_error {
            self.max_relative_error = other.max_relative_error;
            self.worst = other.worst;
        }
        self.coordinates += other.coordinates;
        self.on_kink += other.on_kink;
        self.max_loss_gap = self.max_loss_gap.max(other.max_loss_gap);
        self
    }
}

pub fn check_draw(draw: u64) -> GradientCheck {
    let params = toy_parameters(draw);
    let batch = toy_batch(draw);
    let (loss, grad) = params.gradient(&batch);
    let mut out = GradientCheck {
        max_loss_gap: (loss - reference_loss(&params, &batch).0).abs(),
        ..GradientCheck::default()
    };
    for (t, (name, analytic)) in grad.tensors().iter().enumerate() {
        for (idx, &a) in analytic.iter().enumerate() {
            out.coordinates += 1;
            let Some(n) = numeric(&params, &batch, t, idx) else {
                out.on_kink += 1;
                continue;
            };
            let err = (a - n).abs() / a.abs().max(n.abs()).max(FLOOR);
            if err > out.max_relative_error {
                out.max_relative_error = err;
                out.worst = format!("draw {draw} {name}[{idx}]: analytic {a:e}, numeric {n:e}");
            }
        }
    }
    out
}

/// Merged result over `draws` parameter draws.
pub fn run(draws: u64) -> GradientCheck {
    (0..draws).map(check_draw).fold(GradientCheck::default(), GradientCheck::merge)
}

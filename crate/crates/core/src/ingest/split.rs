use serde::{Deserialize, Serialize};

use super::{Dataset, SplitDataset};
use crate::error::{Error, Result};
use crate::seeding::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitStrategy {
    /// One uniform partition over all interactions.
    #[default]
    Global,
    /// The train fraction is applied within each user's interactions.
    PerUser,
}

/// Random train/test partition.
///
/// Each interaction gets a pseudo-random key hashed from (seed, user, item);
/// the `round(train_fraction * n)` smallest keys go to train. The ordering is
/// a uniform random permutation for a fixed seed, and it is stable under
/// deletion: removing an entity's rows leaves every other row's key
/// unchanged, so only rows near the cut can change side.
pub fn split(
    data: &Dataset,
    train_fraction: f64,
    seed: u64,
    strategy: SplitStrategy,
) -> Result<SplitDataset> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    if data.len() < 2 {
        return Err(Error::invalid(format!(
            "cannot split a dataset with {} interaction(s)",
            data.len()
        )));
    }
    let key = |pos: usize| {
        let it = &data.interactions()[pos];
        (seeding::derive(seed, Stream::Split, &[it.user_id, it.item_id]), pos)
    };
    let mut in_train = vec![false; data.len()];
    match strategy {
        SplitStrategy::Global => {
            let mut order: Vec<(u64, usize)> = (0..data.len()).map(key).collect();
            order.sort_unstable();
            let n = data.len();
            let n_train = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
            for &(_, pos) in &order[..n_train] {
                in_train[pos] = true;
            }
        }
        SplitStrategy::PerUser => {
            for user in data.users() {
                let mut order: Vec<(u64, usize)> =
                    data.user_positions(user).iter().map(|&p| key(p)).collect();
                order.sort_unstable();
                let n_train = (train_fraction * order.len() as f64).round() as usize;
                for &(_, pos) in &order[..n_train.min(order.len())] {
                    in_train[pos] = true;
                }
            }
            if in_train.iter().all(|&t| t) || in_train.iter().all(|&t| !t) {
                return Err(Error::invalid("per-user split left one side empty"));
            }
        }
    }
    let mut flags = in_train.iter();
    let train = data.filter(|_| *flags.next().unwrap());
    let mut flags = in_train.iter();
    let test = data.filter(|_| !*flags.next().unwrap());
    Ok(SplitDataset {
        train,
        test,
        split_seed: seed,
        train_fraction,
    })
}

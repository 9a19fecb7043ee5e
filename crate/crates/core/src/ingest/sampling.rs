use std::collections::HashSet;

use rand::seq::index;

use super::{Dataset, DatasetKind, Interaction};
use crate::error::{Error, Result};
use crate::seeding::{self, Stream};

/// Adds `ratio` unobserved (user, item) pairs per positive, drawn from the
/// dataset's own item catalog. See [`negative_sample_with_catalog`].
pub fn negative_sample(data: &Dataset, ratio: usize, seed: u64) -> Result<Dataset> {
    let catalog: Vec<u64> = data.items().collect();
    negative_sample_with_catalog(data, &catalog, ratio, seed)
}

/// Returns all positives followed by sampled negatives (rating 0.0).
///
/// Each user draws uniformly without replacement from the catalog items they
/// have no positive for. A user whose pool is smaller than the request gets
/// the whole pool. Each user's draw uses its own seeded stream, so removing
/// one user leaves everyone else's negatives unchanged.
pub fn negative_sample_with_catalog(
    data: &Dataset,
    catalog: &[u64],
    ratio: usize,
    seed: u64,
) -> Result<Dataset> {
    if data.kind() != DatasetKind::Implicit {
        return Err(Error::invalid("negative sampling requires implicit data"));
    }
    if ratio == 0 {
        return Err(Error::invalid("negative ratio must be a positive integer"));
    }
    if data.has_negatives() {
        return Err(Error::invalid("dataset already contains negatives"));
    }
    let mut catalog = catalog.to_vec();
    catalog.sort_unstable();
    catalog.dedup();

    let mut out: Vec<Interaction> = data.interactions().to_vec();
    for user in data.users() {
        let observed: HashSet<u64> = data.user_interactions(user).map(|it| it.item_id).collect();
        let pool: Vec<u64> = catalog
            .iter()
            .copied()
            .filter(|i| !observed.contains(i))
            .collect();
        let wanted = ratio * observed.len();
        let mut picked: Vec<u64> = if pool.len() <= wanted {
            pool
        } else {
            let mut rng = seeding::rng(seed, Stream::Negatives, &[user]);
            index::sample(&mut rng, pool.len(), wanted)
                .into_iter()
                .map(|k| pool[k])
                .collect()
        };
        picked.sort_unstable();
        out.extend(picked.into_iter().map(|item| Interaction::new(user, item, 0.0)));
    }
    Dataset::new(out, DatasetKind::Implicit, data.rating_scale())
}

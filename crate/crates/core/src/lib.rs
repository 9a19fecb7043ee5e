//! Deletion diagnostics for recommender systems.
//!
//! Trains neural collaborative filtering and truncated-SVD recommenders,
//! evaluates them with seven ranking and accuracy measures, and scores every
//! user or item by how much the evaluation changes when the model is
//! retrained without it.

pub mod diagnostics;
pub mod error;
pub mod ingest;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod ncf;
pub mod seeding;
pub mod svd_model;

pub use error::{Error, Result};

/// Serializes NaN as JSON `null` and reads `null` back as NaN, so reports
/// with undefined measures round-trip.
pub(crate) mod serde_nan {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// Hex SHA-256 of a value's JSON encoding; used to stamp reports with the
/// configuration that produced them.
pub fn json_digest<T: serde::Serialize>(value: &T) -> Result<String> {
    use sha2::{Digest, Sha256};
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(value)?)))
}

//! Identification of venous thromboembolism (VTE) findings in free-text
//! radiology reports.
//!
//! The crate covers the whole path from raw reports to a decision:
//!
//! - [`corpus`]: report records, label schemes, stratified splits and a
//!   seeded synthetic report generator.
//! - [`tokenizer`]: sentence segmentation and word tokenization with a leading
//!   classification token, side-specific truncation and padding.
//! - [`augment`]: minority-class augmentation by synonym replacement or random
//!   swapping.
//! - [`embed`]: per-token embedding providers (feature-hashed, precomputed).
//! - [`classifier`]: Bi-LSTM, LSTM and two-layer linear classifiers with
//!   hand-written backpropagation and a deterministic trainer.
//! - [`rules`]: the expert keyword/negation rule scorer.
//! - [`hybrid`]: the DL + rule override policy.
//! - [`metrics`]: confusion-matrix metrics, ROC curves and AUC.
//! - [`apms`]: selection among embedding × classifier candidates by summed
//!   validation metrics.
//! - [`pipeline`]: end-to-end runs driven by a TOML configuration, with a
//!   reproducibility manifest.
//!
//! Every randomized step takes an explicit seed; identical inputs and seeds
//! give bit-identical outputs.

pub mod apms;
pub mod augment;
pub mod classifier;
pub mod corpus;
pub mod embed;
mod error;
pub mod hybrid;
pub mod metrics;
pub mod pipeline;
pub mod rules;
pub mod tokenizer;

pub use error::{Error, Result};

/// Independent sub-seed for stream `index` of a seeded computation
/// (SplitMix64 finalizer).
pub(crate) fn sub_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn rng_from_seed(seed: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
}

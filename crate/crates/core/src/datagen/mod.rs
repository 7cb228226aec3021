//! Desk-scale data: a parametric wind generator, a synthetic desired-signal
//! generator, and dataset assembly with exactly additive stems.

mod dataset;
mod desired;
mod wind;

pub use dataset::{
    build_dataset, build_examples, make_example, synth_corpus, toy_examples, DatasetConfig,
    DatasetManifest, Example, ManifestEntry, Split, ToySplits, MANIFEST_NAME, TOY_EVAL_SNRS,
    TOY_TRAIN_SNRS,
};
pub use desired::{gen_desired, DesiredGenParams};
pub use wind::{gen_wind, hf_energy_fraction, WindGenParams};

/// Derives an independent stream seed from a base seed and an index.
pub(crate) fn sub_seed(base: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = base ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

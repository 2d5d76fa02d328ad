//! Frechet Music Distance for symbolic music corpora.

pub mod midi;
pub mod mtf;
pub mod abc;
pub mod embed;
pub mod stats;
pub mod frechet;
pub mod augment;
pub mod pipeline;
pub mod synth;

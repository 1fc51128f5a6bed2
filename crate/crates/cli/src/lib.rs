//! Command-line pipeline around `coughep-core`: synthetic corpora, feature
//! extraction, training, scoring, endpointing, evaluation, and clip export.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod synth;

//! Extractors, expanders and samplers.

pub mod expander;
pub mod extractor;
pub mod gf2;
pub mod sampler;

pub use expander::{cheapest_expander, lambda_measure, mgg_rot, Expander};
pub use extractor::{extractor_tv_oracle, ExtractorParams, ExtractorSpec};
pub use sampler::SamplerSpec;

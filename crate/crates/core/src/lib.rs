#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod claims;
pub mod classifier;
pub mod corpus;
pub mod evaluation;
pub mod features;
pub mod genpipeline;
pub mod prompts;
pub mod providers;
pub mod scalar;

pub type FeatureVector = features::FeatureVector<f64>;
pub type GbdtModel = classifier::GbdtModel<f64>;
pub type Prediction = classifier::Prediction<f64>;
pub type ClaimSet = claims::ClaimSet<f64>;
pub type EmbeddingVector = providers::EmbeddingVector<f64>;
pub type TokenScore = providers::TokenScore<f64>;

//! Structured sentiment analysis as partially observed projective
//! dependency parsing.
//!
//! Sentiment tuples are converted into constraint masks over
//! second-order trees with headed-span scores; a tree CRF is trained by
//! marginalizing over all trees the masks admit, and decoding runs in two
//! stages (expressions, then holders and targets per expression).
//!
//! The numeric core is generic over the scalar type; the aliases below fix
//! it to `f32` or `f64`.

pub mod charts;
pub mod config;
pub mod constraints;
pub mod data;
pub mod labels;
pub mod metrics;
pub mod num;
pub mod pipeline;
pub mod scoring;
pub mod synthetic;
pub mod training;
pub mod verify;

pub type ScoreSet32 = charts::ScoreSet<f32>;
pub type ScoreSet64 = charts::ScoreSet<f64>;
pub type ChartArena32 = charts::ChartArena<f32>;
pub type ChartArena64 = charts::ChartArena<f64>;
pub type ParamStore32 = scoring::ParamStore<f32>;
pub type ParamStore64 = scoring::ParamStore<f64>;
pub type Model32 = scoring::Model<f32>;
pub type Model64 = scoring::Model<f64>;

pub use charts::{ConstraintMask, DepTree, ScoreSet};
pub use config::TrainConfig;
pub use constraints::{SentimentTuple, Span};
pub use labels::{ArcLabel, Polarity};
pub use scoring::{Model, ModelConfig};

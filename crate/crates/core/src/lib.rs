//! Semantic type detection for table columns.
//!
//! Columns are described by 1,588 features in four families (global
//! statistics, character distributions, word embeddings and paragraph
//! vectors) and classified into 78 semantic types by a multi-input neural
//! network. Decision-tree, random-forest, dictionary and regular-expression
//! baselines share the same evaluation code.

pub mod container;
pub mod corpus;
pub mod detector;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod features;
mod moments;
pub mod matching;
pub mod nn;
pub mod pipeline;
pub mod synthetic;
pub mod trees;
pub mod types;

pub use error::{Error, Result};
pub use types::{Prediction, SemanticType, NUM_TYPES};

//! Cost-sensitive online decision-tree learning.
//!
//! A stream of points arrives one at a time. For each point the learner
//! samples a class-conditional feature table from its Beta posterior, buys
//! feature values greedily by a surrogate objective (EC2, information gain,
//! uncertainty sampling or random order) until the label is pinned down,
//! predicts, and only then sees the true label and updates its posterior.

pub mod acquisition;
pub mod belief;
pub mod continuous;
pub mod datastream;
pub mod error;
pub mod experiment;
pub mod hypotheses;
pub mod learner;
pub mod seed;
pub mod session;

pub use error::{Error, Result};

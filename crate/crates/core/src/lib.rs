//! One-vs-all named-entity tagging trained by direct AUC maximization.
//!
//! K-way BIO tagging is decomposed into K binary token classifiers that share
//! a small windowed-MLP encoder. Heads can be trained with the usual
//! cross-entropy baselines or by stochastic primal-dual optimization of a
//! margin-based AUC surrogate, which is what keeps the rare-entity regime
//! workable when almost every token is "O". Two scheduling strategies amortize
//! the cost of the K-head decomposition: grouped passes over the B-*/I-*/O
//! label prefixes, and random sampling of a few heads per epoch.
//!
//! Modules follow the pipeline: [`corpus`] ingestion, [`sampling`] of
//! low-resource subsets, [`model`] forward/backward, [`losses`],
//! [`optimizer`], [`training`] strategies, [`evaluation`] metrics, and the
//! [`experiment`] grid runner with confidence-band summaries.

pub mod corpus;
pub mod evaluation;
pub mod experiment;
pub mod losses;
pub mod model;
pub mod optimizer;
pub mod sampling;
pub mod training;

mod error;
pub use error::{Error, Result};

//! Core library for the clickcascade pipeline.
//!
//! The pipeline has two halves. The data-driven half turns headline A/B test
//! records into a linear click decision model: [`textfeat`] extracts formal
//! and lexicon features, [`topics`] adds LDA topic proportions, and [`lasso`]
//! fits the model weights with cross-validated shrinkage. The simulation half
//! replays content selection on synthetic social networks: [`netgen`] builds
//! the graphs, [`bayes_ab`] provides the Bayesian (and frequentist) A/B
//! decision machinery, and [`cascade`] runs click-and-share rounds under
//! either a pure social selector or an A/B-testing-led one. [`analysis`]
//! summarizes replica results (feature-frequency dynamics, entropy/Gini
//! concentration, trend fits) and [`io`] holds the file formats.
//!
//! Everything randomized is keyed by explicit seeds through [`rng`] and is
//! reproducible bit-for-bit regardless of thread count. The `parallel`
//! feature (default) runs replicas, CV folds, and Monte Carlo batches on
//! rayon; without it the same code paths run sequentially.

pub mod analysis;
pub mod bayes_ab;
pub mod cascade;
pub mod error;
pub mod io;
pub mod lasso;
pub mod netgen;
pub mod rng;
pub mod textfeat;
pub mod topics;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

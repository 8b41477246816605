//! Measurement of media slant from parallel text corpora, and estimation of
//! its response to instrumented cable-news exposure.
//!
//! The pipeline has three legs:
//!
//! 1. **Text**: segment documents into ~80-word snippets ([`corpus`]),
//!    normalize/stem/bigram them ([`textprep`]), select χ²-ranked bigram
//!    features ([`features`]), and train an L2-penalized logistic classifier
//!    distinguishing two labeled source corpora ([`classifier`]).
//! 2. **Scoring**: apply the classifier to an unlabeled corpus and aggregate
//!    predicted probabilities into outlet- and county-level slant
//!    ([`scoring`]), with LDA topic shares for framing controls and
//!    local/non-local splits ([`topics`]).
//! 3. **Econometrics**: weighted 2SLS/OLS with absorbed fixed effects,
//!    two-way cluster-robust covariance, and first-stage diagnostics
//!    ([`econ`]), validated end to end against a synthetic-data oracle with
//!    known ground truth ([`synth`]).

pub mod classifier;
pub mod corpus;
pub mod econ;
pub mod error;
pub mod features;
pub mod manifest;
pub mod math;
pub mod report;
pub mod rng;
pub mod scoring;
pub mod synth;
pub mod topics;
pub mod textprep;

pub use error::{Error, Result};

//! Community value extraction for threaded discussion corpora.
//!
//! The crate is organised as a batch pipeline:
//!
//! * [`corpus`] loads comment dumps, filters ineligible comments and masks usernames.
//! * [`labeling`] assigns per-community score labels and draws seeded samples.
//! * [`extraction`] prompts a language-model provider for value keywords with a shared value bank.
//! * [`canonicalize`] embeds and clusters keywords into canonical values.
//! * [`scales`] builds the value x community matrix and macro/meso/micro scales.
//! * [`prosocial`] runs the prosociality statistics (VIF, PCA, logistic regression, recall).
//! * [`reliability`] computes Krippendorff's alpha and label accuracy for annotations.
//! * [`pipeline`] wires the stages together behind a run manifest.

pub mod canonicalize;
pub mod corpus;
pub mod digest;
pub mod extraction;
pub mod labeling;
pub mod metadata;
pub mod pipeline;
pub mod prosocial;
pub mod reliability;
pub mod sampling;
pub mod scales;
pub mod table;

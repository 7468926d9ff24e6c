//! Static-feature Android malware classification with genetically selected
//! ensembles.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! 1. [`apk`] opens APK containers and pulls out requested permissions,
//!    intent-filter actions and referenced methods.
//! 2. [`vectorize`] freezes a vocabulary over a training corpus and turns
//!    records into binary feature vectors.
//! 3. [`learner`] trains component classifiers, and [`ensemble`] builds a
//!    bootstrap pool of them with majority voting over a 0/1 weight vector.
//! 4. [`ga`] searches weight vectors with an accuracy times diversity fitness.
//! 5. [`eval`] splits data, injects label noise and runs repeated experiments.

pub mod apk;
pub mod ensemble;
pub mod eval;
pub mod ga;
pub mod label;
pub mod learner;
pub mod seed;
pub mod vectorize;

#[cfg(any(test, feature = "fixtures"))]
pub mod fixtures;

pub use label::Label;

//! Binary manipulation motion codes, FOON motion statistics, and
//! force-data validation of motion clusters with Gaussian mixtures.
//!
//! The crate is organised bottom-up:
//!
//! - [`taxonomy`]: 8-bit manipulation codes, legality rules, weighted code
//!   distance, and the label/alias lexicon.
//! - [`foon`]: functional-unit graph parsing and motion frequency statistics.
//! - [`ftdata`]: force/torque trial CSV ingestion, sample pooling,
//!   standardization and synthetic sample generation.
//! - [`gmm`]: expectation-maximization fitting, closed-form Gaussian KL,
//!   variational and Monte Carlo KL between mixtures.
//! - [`analysis`]: pairwise divergence matrices, cluster-consistency
//!   reports and CSV/PGM export.
//! - [`cli`]: the `manipcode` command-line front end.

pub mod analysis;
pub mod cli;
pub mod foon;
pub mod ftdata;
pub mod gmm;
pub mod taxonomy;

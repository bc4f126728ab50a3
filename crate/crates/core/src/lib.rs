//! Unsupervised anomaly detection by interleaving a weighted one-class density
//! model with a weakly-supervised multiple-instance scorer.
//!
//! The two models label data for each other: the density model ranks snippets
//! and the top `T_ws` become positive bags for the scorer; the scorer's
//! probabilities become soft per-object weights for the next density fit.
//! Training modules are repeated from scratch while `T_ws` shrinks to the
//! size of the consensus set of all density snapshots, until its rate of
//! change flattens out.
//!
//! The crate is `no_std` (with `alloc`). File formats, reporting and the CLI
//! live in the `uvad` crate.
#![no_std]

extern crate alloc;

pub mod config;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod exchange;
pub mod linalg;
pub mod orchestrator;
pub mod rng;
pub mod sampling;
pub mod synthgen;
pub mod wocc;
pub mod ws;

pub use config::{DensityFamily, LabelMode, RunConfig};
pub use dataset::{Dataset, GroundTruth, HardLabelMap, ObjectRecord, SnippetRecord, SoftLabelMap, TrainingData};
pub use error::{Error, Result};
pub use rng::{derive_rng, derive_substream, StreamTag};

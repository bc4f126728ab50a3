//! Weakly-supervised multiple-instance scorer.
//!
//! A small two-headed network maps a snippet feature to an embedding (whose
//! norm is the feature magnitude) and to an anomaly probability. Training
//! draws a positive and a negative bag of `C` snippets from the current hard
//! pseudo-labels and minimizes a top-k magnitude hinge plus top-k binary
//! cross-entropy on both bags.

mod adam;
mod bags;
mod loss;
mod model;
mod train;

pub use adam::AdamState;
pub use bags::{sample_bags, Bag};
pub use loss::{bag_stats, rtfm_loss, BagStats, LossConfig, LossOutput, PROB_CLAMP};
pub use model::{ScorerModel, SnippetOutput};
pub use train::train_ws_epoch;

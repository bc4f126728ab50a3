use rand::Rng;

use super::adam::AdamState;
use super::bags::sample_bags;
use super::loss::{rtfm_loss, LossConfig};
use super::model::ScorerModel;
use crate::dataset::{HardLabelMap, TrainingData};
use crate::error::{Error, Result};

/// `bags_per_epoch` iterations of sample → loss → Adam step.
///
/// Returns the mean loss, or `None` for an empty epoch (model untouched).
#[allow(clippy::too_many_arguments)]
pub fn train_ws_epoch<R: Rng + ?Sized>(
    model: &mut ScorerModel,
    state: &mut AdamState,
    data: &TrainingData,
    labels: &HardLabelMap,
    bags_per_epoch: usize,
    bag_size: usize,
    loss_cfg: &LossConfig,
    rng: &mut R,
) -> Result<Option<f64>> {
    if labels.n_positive() == 0 {
        return Err(Error::EmptyPool("positive"));
    }
    if labels.n_positive() == labels.len() {
        return Err(Error::EmptyPool("negative"));
    }
    if bags_per_epoch == 0 {
        return Ok(None);
    }
    let mut total = 0.0;
    for _ in 0..bags_per_epoch {
        let (pos, neg) = sample_bags(labels, bag_size, rng)?;
        let out = rtfm_loss(model, data, &pos, &neg, loss_cfg)?;
        state.step(model.params_mut(), &out.grad)?;
        total += out.loss;
    }
    Ok(Some(total / bags_per_epoch as f64))
}

//! Pseudo-labels in both directions.
//!
//! Density → scorer: rank snippets by score and mark the top `T_ws` as 1.
//! Scorer → density: each object takes its snippet's probability as its
//! soft weight.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::dataset::{HardLabelMap, SoftLabelMap, TrainingData};
use crate::error::{Error, Result};
use crate::sampling;
use crate::ws::ScorerModel;

/// Prior on initial soft labels: `Beta(1, 5)`, mean 1/6.
pub const INIT_ALPHA: f64 = 1.0;
pub const INIT_BETA: f64 = 5.0;

/// Snippet ids sorted by score descending, ties by ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedScores(Vec<(usize, f64)>);

impl RankedScores {
    /// `scores[i]` is the score of snippet `i`.
    pub fn new(scores: &[f64]) -> Self {
        let mut v: Vec<(usize, f64)> = scores.iter().copied().enumerate().collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Self(v)
    }

    pub fn as_slice(&self) -> &[(usize, f64)] {
        &self.0
    }

    /// Ids of the `count` highest-ranked snippets, ascending.
    pub fn top(&self, count: usize) -> Vec<usize> {
        let mut ids: Vec<usize> = self.0.iter().take(count).map(|&(i, _)| i).collect();
        ids.sort_unstable();
        ids
    }
}

/// One `Beta(1, 5)` draw per object.
pub fn init_soft_labels<R: Rng + ?Sized>(n_objects: usize, rng: &mut R) -> SoftLabelMap {
    let w = (0..n_objects).map(|_| sampling::beta(rng, INIT_ALPHA, INIT_BETA)).collect();
    SoftLabelMap::new(w).expect("beta draws lie in [0, 1]")
}

/// Labels the `t_ws` highest-scoring snippets 1 (0-based rank `< t_ws`).
pub fn pseudo_hard_labels(scores: &[f64], t_ws: usize) -> Result<HardLabelMap> {
    if t_ws > scores.len() {
        return Err(Error::ThresholdOutOfRange { t: t_ws, n: scores.len() });
    }
    let mut labels = vec![0u8; scores.len()];
    for &(id, _) in RankedScores::new(scores).as_slice().iter().take(t_ws) {
        labels[id] = 1;
    }
    Ok(HardLabelMap::from_labels(labels))
}

/// Broadcasts per-snippet probabilities to their objects.
pub fn soft_labels_from_snippets(data: &TrainingData, snippet_probs: &[f64]) -> SoftLabelMap {
    let mut w = vec![0.0; data.n_objects()];
    for o in data.objects() {
        w[o.object_id] = snippet_probs[o.snippet_id];
    }
    SoftLabelMap::new(w).expect("probabilities lie in (0, 1)")
}

/// Soft labels from a trained scorer: object weight = its snippet's
/// probability.
pub fn pseudo_soft_labels(model: &ScorerModel, data: &TrainingData) -> Result<SoftLabelMap> {
    Ok(soft_labels_from_snippets(data, &model.probabilities(data)?))
}

/// Hard-label ablation: rank snippets by the scorer's probability, mark the
/// top `t_ws` abnormal, and give their objects weight 1 (everything else 0),
/// so the weighted fit reduces to a plain fit on the 0-labelled objects.
pub fn hard_soft_labels(data: &TrainingData, snippet_probs: &[f64], t_ws: usize) -> Result<SoftLabelMap> {
    let labels = pseudo_hard_labels(snippet_probs, t_ws)?;
    let probs: Vec<f64> = labels.as_slice().iter().map(|&l| f64::from(l)).collect();
    Ok(soft_labels_from_snippets(data, &probs))
}

/// Binarizes initial soft labels at 0.5 for the hard-label ablation.
pub fn binarize(w: &SoftLabelMap) -> SoftLabelMap {
    SoftLabelMap::new(w.as_slice().iter().map(|&x| if x > 0.5 { 1.0 } else { 0.0 }).collect()).expect("binary weights")
}

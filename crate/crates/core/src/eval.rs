//! Ground-truth evaluation. The only consumer of [`GroundTruth`].

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, GroundTruth};
use crate::error::{Error, Result};
use crate::orchestrator::{LoopEvent, LoopMetrics, LoopObserver, RunRecord};
use crate::wocc;

/// ROC-AUC as the Mann-Whitney statistic: the probability that a random
/// positive outscores a random negative, ties counted one half.
///
/// Sorts once and credits each tie group with its average rank.
pub fn roc_auc(scores: &[f64], gt: &[u8]) -> Result<f64> {
    if scores.len() != gt.len() {
        return Err(Error::LengthMismatch(format!("{} scores for {} labels", scores.len(), gt.len())));
    }
    let positives = gt.iter().filter(|&&g| g == 1).count();
    let negatives = gt.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::UndefinedAuc { positives, negatives });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // sum of 1-based average ranks of the positives
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = order[i..j].iter().filter(|&&k| gt[k] == 1).count();
        rank_sum += avg_rank * pos_in_group as f64;
        i = j;
    }
    let p = positives as f64;
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Ok(u / (p * negatives as f64))
}

/// Per-loop evaluator handed to the pipeline as an observer.
#[derive(Debug, Clone, Copy)]
pub struct GroundTruthEvaluator<'a> {
    truth: &'a GroundTruth,
}

impl<'a> GroundTruthEvaluator<'a> {
    pub fn new(truth: &'a GroundTruth) -> Self {
        Self { truth }
    }
}

impl LoopObserver for GroundTruthEvaluator<'_> {
    fn on_loop(&mut self, event: &LoopEvent<'_>) -> LoopMetrics {
        LoopMetrics {
            auc_wocc: roc_auc(event.wocc_scores, self.truth.labels()).ok(),
            auc_ws: roc_auc(event.ws_probabilities, self.truth.labels()).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleMetrics {
    pub module: usize,
    pub t_ws: usize,
    pub auc_wocc: f64,
    pub auc_ws: f64,
    pub wocc_losses: Vec<f64>,
    pub ws_losses: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub modules: Vec<ModuleMetrics>,
}

impl MetricSeries {
    pub fn last(&self) -> Option<&ModuleMetrics> {
        self.modules.last()
    }
}

/// AUC of each module's final density scores and final scorer probabilities.
pub fn evaluate_run(record: &RunRecord, dataset: &Dataset) -> Result<MetricSeries> {
    let gt = dataset.ground_truth().labels();
    let data = dataset.training();
    let modules = record
        .modules
        .iter()
        .map(|m| {
            let wocc_scores = wocc::score_snippets(&m.final_wocc, data)?;
            let ws_probs = m.final_ws.probabilities(data)?;
            Ok(ModuleMetrics {
                module: m.module,
                t_ws: m.t_ws,
                auc_wocc: roc_auc(&wocc_scores, gt)?,
                auc_ws: roc_auc(&ws_probs, gt)?,
                wocc_losses: m.loops.iter().map(|l| l.wocc_loss).collect(),
                ws_losses: m.loops.iter().map(|l| l.ws_loss).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricSeries { modules })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example() {
        let auc = roc_auc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap();
        assert_eq!(auc, 0.75);
    }

    #[test]
    fn perfect_and_tied() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.9, 0.95], &[0, 0, 1, 1]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.5; 6], &[0, 1, 0, 1, 1, 0]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_is_undefined() {
        assert_eq!(roc_auc(&[0.1, 0.2], &[0, 0]), Err(Error::UndefinedAuc { positives: 0, negatives: 2 }));
        assert!(roc_auc(&[0.1], &[0, 1]).is_err());
    }
}

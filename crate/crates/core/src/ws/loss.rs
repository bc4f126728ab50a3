use alloc::vec;
use alloc::vec::Vec;

use super::bags::Bag;
use super::model::{Activations, ScorerModel};
use crate::dataset::TrainingData;
use crate::error::Result;

/// Bag probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside
/// the logs.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub top_k: usize,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub hinge: f64,
    pub bce_pos: f64,
    pub bce_neg: f64,
    pub grad: Vec<f64>,
}

/// Top-k bag statistics: mean of the `k` largest magnitudes and mean of the
/// `k` largest probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BagStats {
    pub magnitude: f64,
    pub probability: f64,
}

fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

struct BagPass {
    acts: Vec<Activations>,
    top_mag: Vec<usize>,
    top_prob: Vec<usize>,
    stats: BagStats,
}

fn bag_pass(model: &ScorerModel, data: &TrainingData, bag: &Bag, k: usize) -> Result<BagPass> {
    let acts = bag.snippet_ids.iter().map(|&s| model.forward(data.snippet_feature(s))).collect::<Result<Vec<_>>>()?;
    let mags: Vec<f64> = acts.iter().map(|a| a.out.magnitude).collect();
    let probs: Vec<f64> = acts.iter().map(|a| a.out.probability).collect();
    let top_mag = top_k_indices(&mags, k);
    let top_prob = top_k_indices(&probs, k);
    let kf = top_mag.len() as f64;
    let stats = BagStats {
        magnitude: top_mag.iter().map(|&i| mags[i]).sum::<f64>() / kf,
        probability: top_prob.iter().map(|&i| probs[i]).sum::<f64>() / kf,
    };
    Ok(BagPass { acts, top_mag, top_prob, stats })
}

pub fn bag_stats(model: &ScorerModel, data: &TrainingData, bag: &Bag, k: usize) -> Result<BagStats> {
    Ok(bag_pass(model, data, bag, k)?.stats)
}

/// Returns `(clamped probability, ∂clamp/∂f)`.
fn clamp_prob(f: f64) -> (f64, f64) {
    if f < PROB_CLAMP {
        (PROB_CLAMP, 0.0)
    } else if f > 1.0 - PROB_CLAMP {
        (1.0 - PROB_CLAMP, 0.0)
    } else {
        (f, 1.0)
    }
}

/// `max(0, m - d(B⁺) + d(B⁻)) + BCE(f(B⁺), 1) + BCE(f(B⁻), 0)` and its exact
/// gradient. The hinge contributes a zero subgradient at its kink and the
/// clamped regions of the probabilities contribute none.
pub fn rtfm_loss(
    model: &ScorerModel,
    data: &TrainingData,
    positive: &Bag,
    negative: &Bag,
    cfg: &LossConfig,
) -> Result<LossOutput> {
    let pos = bag_pass(model, data, positive, cfg.top_k)?;
    let neg = bag_pass(model, data, negative, cfg.top_k)?;

    let gap = cfg.margin - pos.stats.magnitude + neg.stats.magnitude;
    let (hinge, g_dpos, g_dneg) = if gap > 0.0 { (gap, -1.0, 1.0) } else { (0.0, 0.0, 0.0) };

    let (fp, dfp) = clamp_prob(pos.stats.probability);
    let (fn_, dfn) = clamp_prob(neg.stats.probability);
    let bce_pos = -libm::log(fp);
    let bce_neg = -libm::log(1.0 - fn_);
    let g_fpos = -dfp / fp;
    let g_fneg = dfn / (1.0 - fn_);

    let mut grad = vec![0.0; model.params().len()];
    for (pass, bag, g_d, g_f) in [(&pos, positive, g_dpos, g_fpos), (&neg, negative, g_dneg, g_fneg)] {
        let kf = pass.top_mag.len() as f64;
        let mut g_mag = vec![0.0; bag.snippet_ids.len()];
        let mut g_prob = vec![0.0; bag.snippet_ids.len()];
        for &i in &pass.top_mag {
            g_mag[i] += g_d / kf;
        }
        for &i in &pass.top_prob {
            g_prob[i] += g_f / kf;
        }
        for (i, &s) in bag.snippet_ids.iter().enumerate() {
            if g_mag[i] != 0.0 || g_prob[i] != 0.0 {
                model.backward(data.snippet_feature(s), &pass.acts[i], g_mag[i], g_prob[i], &mut grad);
            }
        }
    }

    Ok(LossOutput { loss: hinge + bce_pos + bce_neg, hinge, bce_pos, bce_neg, grad })
}

//! Helpers and independent oracles shared by the integration tests.
#![allow(dead_code)]

pub mod gradient;
pub mod mle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uvad_core::{Dataset, ObjectRecord, SnippetRecord};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    // Irwin-Hall approximation is plenty for test inputs.
    (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0
}

/// One object per snippet, all in video 0, labels as given.
pub fn dataset_from(features: &[Vec<f64>], labels: &[u8]) -> Dataset {
    let d = features[0].len();
    let snippets = (0..features.len())
        .map(|i| SnippetRecord { snippet_id: i, video_id: 0, object_ids: vec![i], gt_label: labels[i] })
        .collect();
    let objects = features
        .iter()
        .enumerate()
        .map(|(i, f)| ObjectRecord { object_id: i, snippet_id: i, features: f.clone() })
        .collect();
    Dataset::new(d, snippets, objects).unwrap()
}

pub fn objects_from(features: &[Vec<f64>]) -> Vec<ObjectRecord> {
    features
        .iter()
        .enumerate()
        .map(|(i, f)| ObjectRecord { object_id: i, snippet_id: i, features: f.clone() })
        .collect()
}

/// Exhaustive Mann-Whitney pair count.
pub fn pair_count_auc(scores: &[f64], gt: &[u8]) -> f64 {
    let mut num = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if gt[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if gt[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                num += 1.0;
            } else if si == sj {
                num += 0.5;
            }
        }
    }
    num / pairs
}

/// Scorer forward pass written directly against the flat parameter layout
/// `W1 (h×d) | b1 | WA (h×h) | bA | wB | bB`. Returns (magnitude, probability).
pub fn scorer_forward(params: &[f64], d: usize, h: usize, x: &[f64]) -> (f64, f64) {
    let w1 = &params[0..h * d];
    let b1 = &params[h * d..h * d + h];
    let wa = &params[h * d + h..h * d + h + h * h];
    let ba = &params[h * d + h + h * h..h * d + 2 * h + h * h];
    let wb = &params[h * d + 2 * h + h * h..h * d + 3 * h + h * h];
    let bb = params[h * d + 3 * h + h * h];
    let mut hidden = vec![0.0; h];
    for i in 0..h {
        let mut z = b1[i];
        for j in 0..d {
            z += w1[i * d + j] * x[j];
        }
        hidden[i] = if z > 0.0 { z } else { 0.0 };
    }
    let mut sq = 0.0;
    for i in 0..h {
        let mut e = ba[i];
        for j in 0..h {
            e += wa[i * h + j] * hidden[j];
        }
        sq += e * e;
    }
    let mut logit = bb;
    for j in 0..h {
        logit += wb[j] * hidden[j];
    }
    (sq.sqrt(), 1.0 / (1.0 + (-logit).exp()))
}

fn mean_top_k(mut v: Vec<f64>, k: usize) -> f64 {
    v.sort_by(|a, b| b.partial_cmp(a).unwrap());
    v[..k].iter().sum::<f64>() / k as f64
}

/// Hinge plus two clamped BCE terms, evaluated from scratch.
pub fn oracle_loss(
    params: &[f64],
    d: usize,
    h: usize,
    pos: &[Vec<f64>],
    neg: &[Vec<f64>],
    k: usize,
    margin: f64,
) -> f64 {
    let stats = |bag: &[Vec<f64>]| {
        let outs: Vec<(f64, f64)> = bag.iter().map(|x| scorer_forward(params, d, h, x)).collect();
        (mean_top_k(outs.iter().map(|o| o.0).collect(), k), mean_top_k(outs.iter().map(|o| o.1).collect(), k))
    };
    let (dp, fp) = stats(pos);
    let (dn, fn_) = stats(neg);
    let clamp = |f: f64| f.clamp(1e-7, 1.0 - 1e-7);
    (margin - dp + dn).max(0.0) - clamp(fp).ln() - (1.0 - clamp(fn_)).ln()
}

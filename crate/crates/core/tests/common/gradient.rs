//! Finite-difference check of the scorer loss gradient.

use rand::Rng;
use uvad_core::ws::{rtfm_loss, Bag, LossConfig, ScorerModel};

use super::{dataset_from, normal, oracle_loss};

pub fn bags(c: usize) -> (Bag, Bag) {
    (Bag { snippet_ids: (0..c).collect(), label: 1 }, Bag { snippet_ids: (c..2 * c).collect(), label: 0 })
}

pub struct Instance {
    pub d: usize,
    pub h: usize,
    pub k: usize,
    pub margin: f64,
    pub feats: Vec<Vec<f64>>,
    pub params: Vec<f64>,
}

pub fn random_instance(r: &mut impl Rng, d: usize, h: usize, c: usize, k: usize) -> Instance {
    let feats: Vec<Vec<f64>> = (0..2 * c).map(|_| (0..d).map(|_| 1.5 * normal(r)).collect()).collect();
    let params = (0..ScorerModel::param_count(d, h)).map(|_| normal(r)).collect();
    Instance { d, h, k, margin: r.gen_range(0.5..5.0), feats, params }
}

/// Largest relative deviation between the analytic gradient and central
/// differences of the independently written loss.
pub fn fd_relative_error(inst: &Instance, step: f64) -> f64 {
    let c = inst.feats.len() / 2;
    let ds = dataset_from(&inst.feats, &vec![0; 2 * c]);
    let model = ScorerModel::from_params(inst.d, inst.h, inst.params.clone()).unwrap();
    let (pos, neg) = bags(c);
    let out = rtfm_loss(&model, ds.training(), &pos, &neg, &LossConfig { top_k: inst.k, margin: inst.margin }).unwrap();
    let f = |p: &[f64]| oracle_loss(p, inst.d, inst.h, &inst.feats[..c], &inst.feats[c..], inst.k, inst.margin);
    assert!((f(&inst.params) - out.loss).abs() < 1e-12 * out.loss.abs().max(1.0));

    let mut worst: f64 = 0.0;
    let mut p = inst.params.clone();
    for i in 0..p.len() {
        let orig = p[i];
        p[i] = orig + step;
        let up = f(&p);
        p[i] = orig - step;
        let down = f(&p);
        p[i] = orig;
        let numeric = (up - down) / (2.0 * step);
        let analytic = out.grad[i];
        let denom = analytic.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max((analytic - numeric).abs() / denom);
    }
    worst
}

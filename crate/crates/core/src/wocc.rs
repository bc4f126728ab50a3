//! Weighted one-class density model.
//!
//! Every object contributes to the fit with weight `a_i = 1 - w_i`, where
//! `w_i` is its soft anomaly label, so the fit minimizes the weighted
//! negative log-likelihood `-Σ a_i log p(x_i)`. Anomaly score of an object is
//! its negative log-density; a snippet scores the mean over its objects.

use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{ObjectRecord, SoftLabelMap, TrainingData};
use crate::error::{Error, Result};
use crate::linalg::Cholesky;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Full-covariance Gaussian. The Cholesky factor is rebuilt on load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianParams", into = "GaussianParams")]
pub struct GaussianDensity {
    mean: Vec<f64>,
    cov: Vec<f64>,
    chol: Cholesky,
}

#[derive(Serialize, Deserialize)]
struct GaussianParams {
    mean: Vec<f64>,
    cov: Vec<f64>,
}

impl TryFrom<GaussianParams> for GaussianDensity {
    type Error = Error;
    fn try_from(p: GaussianParams) -> Result<Self> {
        GaussianDensity::new(p.mean, p.cov)
    }
}

impl From<GaussianDensity> for GaussianParams {
    fn from(g: GaussianDensity) -> Self {
        Self { mean: g.mean, cov: g.cov }
    }
}

impl GaussianDensity {
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, got: cov.len() });
        }
        let chol = Cholesky::new(&cov, d)
            .ok_or_else(|| Error::InvalidDataset("covariance is not positive definite".into()))?;
        Ok(Self { mean, cov, chol })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Row-major `d x d` covariance.
    pub fn cov(&self) -> &[f64] {
        &self.cov
    }

    fn nll(&self, x: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        0.5 * (self.mean.len() as f64 * LN_2PI + self.chol.log_det() + self.chol.mahalanobis_sq(&diff))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl DiagComponent {
    fn log_density(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((xi, m), v) in x.iter().zip(&self.mean).zip(&self.var) {
            let z = xi - m;
            acc += LN_2PI + libm::log(*v) + z * z / v;
        }
        -0.5 * acc
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureDensity {
    pub components: Vec<DiagComponent>,
}

impl MixtureDensity {
    fn nll(&self, x: &[f64]) -> f64 {
        let logs: Vec<f64> = self.components.iter().map(|c| libm::log(c.weight) + c.log_density(x)).collect();
        -log_sum_exp(&logs)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + libm::log(v.iter().map(|x| libm::exp(x - max)).sum::<f64>())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DensityModel {
    Gaussian(GaussianDensity),
    Mixture(MixtureDensity),
}

impl DensityModel {
    pub fn dim(&self) -> usize {
        match self {
            Self::Gaussian(g) => g.mean.len(),
            Self::Mixture(m) => m.components[0].mean.len(),
        }
    }

    /// Negative log-density of a raw feature vector.
    pub fn nll(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.len() });
        }
        Ok(match self {
            Self::Gaussian(g) => g.nll(x),
            Self::Mixture(m) => m.nll(x),
        })
    }
}

/// Anomaly score of one object: `-log p(features)`.
pub fn score_object(model: &DensityModel, object: &ObjectRecord) -> Result<f64> {
    model.nll(&object.features)
}

/// Mean object score per snippet, indexed by snippet id.
pub fn score_snippets(model: &DensityModel, data: &TrainingData) -> Result<Vec<f64>> {
    let object_scores = data.objects().iter().map(|o| score_object(model, o)).collect::<Result<Vec<_>>>()?;
    Ok(data
        .snippets()
        .iter()
        .map(|s| s.object_ids.iter().map(|&i| object_scores[i]).sum::<f64>() / s.object_ids.len() as f64)
        .collect())
}

/// `Σ (1 - w_i) · (-log p(x_i))`.
pub fn weighted_nll(model: &DensityModel, objects: &[ObjectRecord], w: &SoftLabelMap) -> Result<f64> {
    let mut acc = 0.0;
    for o in objects {
        let a = 1.0 - w.get(o.object_id);
        if a > 0.0 {
            acc += a * score_object(model, o)?;
        }
    }
    Ok(acc)
}

/// Weighted NLL divided by the total effective weight.
pub fn mean_weighted_nll(model: &DensityModel, objects: &[ObjectRecord], w: &SoftLabelMap) -> Result<f64> {
    let total: f64 = objects.iter().map(|o| 1.0 - w.get(o.object_id)).sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    Ok(weighted_nll(model, objects, w)? / total)
}

fn effective_weights(objects: &[ObjectRecord], w: &SoftLabelMap) -> Result<(Vec<f64>, f64, usize)> {
    let d = objects.first().map(|o| o.features.len()).ok_or(Error::DegenerateWeights)?;
    let mut a = Vec::with_capacity(objects.len());
    for o in objects {
        if o.features.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: o.features.len() });
        }
        a.push(1.0 - w.get(o.object_id));
    }
    let total: f64 = a.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    Ok((a, total, d))
}

/// Closed-form minimizer of the weighted NLL over full-covariance Gaussians:
/// weighted mean and weighted (biased) covariance, plus `epsilon_reg · I`.
pub fn fit_weighted_gaussian(objects: &[ObjectRecord], w: &SoftLabelMap, epsilon_reg: f64) -> Result<DensityModel> {
    let (a, total, d) = effective_weights(objects, w)?;
    let mut mean = vec![0.0; d];
    for (o, &ai) in objects.iter().zip(&a) {
        if ai > 0.0 {
            for (m, x) in mean.iter_mut().zip(&o.features) {
                *m += ai * x;
            }
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);

    let mut cov = vec![0.0; d * d];
    let mut diff = vec![0.0; d];
    for (o, &ai) in objects.iter().zip(&a) {
        if ai <= 0.0 {
            continue;
        }
        for ((z, x), m) in diff.iter_mut().zip(&o.features).zip(&mean) {
            *z = x - m;
        }
        for i in 0..d {
            for j in 0..=i {
                cov[i * d + j] += ai * diff[i] * diff[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let v = cov[i * d + j] / total;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
        cov[i * d + i] += epsilon_reg;
    }
    Ok(DensityModel::Gaussian(GaussianDensity::new(mean, cov)?))
}

/// Weighted EM over diagonal-covariance mixtures.
///
/// Each M-step sets `σ²_cj = (S_cj · N_c + λ) / N_c` with `λ = ε · Σ a_i`,
/// which is the exact maximizer of the EM bound on the penalized objective
/// `Σ a_i NLL_i + Σ_c Σ_j λ / (2 σ²_cj)`. The objective is therefore
/// non-increasing, and a single component reduces to the diagonal of
/// [`fit_weighted_gaussian`].
#[derive(Debug, Clone)]
pub struct WeightedEm<'a> {
    objects: &'a [ObjectRecord],
    a: Vec<f64>,
    total: f64,
    ridge: f64,
    model: MixtureDensity,
    resp: Vec<f64>,
    reseeds: usize,
}

impl<'a> WeightedEm<'a> {
    /// Starts from `k` centers picked by weighted k-means++ seeding.
    pub fn new<R: Rng + ?Sized>(
        objects: &'a [ObjectRecord],
        w: &SoftLabelMap,
        k: usize,
        epsilon_reg: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let (a, total, d) = effective_weights(objects, w)?;
        let k = k.max(1);
        let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
        let mut dist = vec![f64::INFINITY; objects.len()];
        for _ in 0..k {
            let scores: Vec<f64> =
                if centers.is_empty() { a.clone() } else { a.iter().zip(&dist).map(|(ai, di)| ai * di).collect() };
            let idx = pick_weighted(&scores, rng).unwrap_or_else(|| pick_weighted(&a, rng).unwrap_or(0));
            let c = objects[idx].features.clone();
            for (o, di) in objects.iter().zip(dist.iter_mut()) {
                *di = di.min(sq_dist(&o.features, &c));
            }
            centers.push(c);
        }
        let var = weighted_diag_var(objects, &a, total, d, epsilon_reg);
        let model = MixtureDensity {
            components: centers
                .into_iter()
                .map(|mean| DiagComponent { weight: 1.0 / k as f64, mean, var: var.clone() })
                .collect(),
        };
        Ok(Self::with_init(objects, a, total, epsilon_reg, model))
    }

    /// Starts from explicit component parameters.
    pub fn from_components(
        objects: &'a [ObjectRecord],
        w: &SoftLabelMap,
        epsilon_reg: f64,
        init: MixtureDensity,
    ) -> Result<Self> {
        let (a, total, _) = effective_weights(objects, w)?;
        Ok(Self::with_init(objects, a, total, epsilon_reg, init))
    }

    fn with_init(
        objects: &'a [ObjectRecord],
        a: Vec<f64>,
        total: f64,
        epsilon_reg: f64,
        model: MixtureDensity,
    ) -> Self {
        let k = model.components.len();
        Self { objects, a, total, ridge: epsilon_reg * total, model, resp: vec![0.0; objects.len() * k], reseeds: 0 }
    }

    pub fn model(&self) -> &MixtureDensity {
        &self.model
    }

    pub fn reseeds(&self) -> usize {
        self.reseeds
    }

    /// Penalized weighted NLL at the current parameters.
    pub fn objective(&self) -> f64 {
        let nll: f64 = self
            .objects
            .iter()
            .zip(&self.a)
            .filter(|(_, &ai)| ai > 0.0)
            .map(|(o, ai)| ai * self.model.nll(&o.features))
            .sum();
        let penalty: f64 =
            self.model.components.iter().flat_map(|c| c.var.iter()).map(|v| self.ridge / (2.0 * v)).sum();
        nll + penalty
    }

    /// One E-step + M-step; returns the objective after the update.
    pub fn step(&mut self) -> f64 {
        let k = self.model.components.len();
        let d = self.model.components[0].mean.len();
        let mut logs = vec![0.0; k];
        for (i, o) in self.objects.iter().enumerate() {
            for (l, c) in logs.iter_mut().zip(&self.model.components) {
                *l = libm::log(c.weight) + c.log_density(&o.features);
            }
            let lse = log_sum_exp(&logs);
            for (c, l) in logs.iter().enumerate() {
                self.resp[i * k + c] = libm::exp(l - lse);
            }
        }

        let collapse_floor = 1e-10 * self.total;
        let mut collapsed = Vec::new();
        for c in 0..k {
            let nc: f64 = (0..self.objects.len()).map(|i| self.a[i] * self.resp[i * k + c]).sum();
            if nc.is_nan() || nc <= collapse_floor {
                collapsed.push(c);
                continue;
            }
            let mut mean = vec![0.0; d];
            for (i, o) in self.objects.iter().enumerate() {
                let r = self.a[i] * self.resp[i * k + c];
                for (m, x) in mean.iter_mut().zip(&o.features) {
                    *m += r * x;
                }
            }
            mean.iter_mut().for_each(|m| *m /= nc);
            let mut var = vec![0.0; d];
            for (i, o) in self.objects.iter().enumerate() {
                let r = self.a[i] * self.resp[i * k + c];
                for ((v, x), m) in var.iter_mut().zip(&o.features).zip(&mean) {
                    *v += r * (x - m) * (x - m);
                }
            }
            var.iter_mut().for_each(|v| *v = (*v + self.ridge) / nc);
            let comp = &mut self.model.components[c];
            comp.weight = nc / self.total;
            comp.mean = mean;
            comp.var = var;
        }
        if !collapsed.is_empty() {
            self.reseed(&collapsed);
        }
        self.objective()
    }

    /// Moves collapsed components onto the worst-explained points.
    fn reseed(&mut self, collapsed: &[usize]) {
        let d = self.model.components[0].mean.len();
        let base_var = weighted_diag_var(self.objects, &self.a, self.total, d, self.ridge / self.total);
        let mut residual: Vec<(f64, usize)> = self
            .objects
            .iter()
            .enumerate()
            .filter(|(i, _)| self.a[*i] > 0.0)
            .map(|(i, o)| (self.model.nll(&o.features), i))
            .collect();
        residual.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
        let k = self.model.components.len() as f64;
        for (slot, &c) in collapsed.iter().enumerate() {
            let idx = residual[slot % residual.len()].1;
            let comp = &mut self.model.components[c];
            comp.mean = self.objects[idx].features.clone();
            comp.var = base_var.clone();
            comp.weight = 1.0 / k;
        }
        let sum: f64 = self.model.components.iter().map(|c| c.weight).sum();
        self.model.components.iter_mut().for_each(|c| c.weight /= sum);
        self.reseeds += 1;
    }
}

fn weighted_diag_var(objects: &[ObjectRecord], a: &[f64], total: f64, d: usize, eps: f64) -> Vec<f64> {
    let mut mean = vec![0.0; d];
    for (o, ai) in objects.iter().zip(a) {
        for (m, x) in mean.iter_mut().zip(&o.features) {
            *m += ai * x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    let mut var = vec![0.0; d];
    for (o, ai) in objects.iter().zip(a) {
        for ((v, x), m) in var.iter_mut().zip(&o.features).zip(&mean) {
            *v += ai * (x - m) * (x - m);
        }
    }
    var.iter_mut().for_each(|v| *v = *v / total + eps);
    var
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn pick_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().filter(|w| w.is_finite()).sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let mut target = rng.gen::<f64>() * total;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 && w.is_finite() {
            last = Some(i);
            if target < w {
                return Some(i);
            }
            target -= w;
        }
    }
    last
}

/// Result of [`fit_weighted_mixture`].
#[derive(Debug, Clone)]
pub struct MixtureFit {
    pub model: DensityModel,
    /// Penalized objective after each EM iteration.
    pub trace: Vec<f64>,
    pub converged: bool,
}

/// Weighted EM to relative objective change below `tol`, or `max_iters`.
pub fn fit_weighted_mixture<R: Rng + ?Sized>(
    objects: &[ObjectRecord],
    w: &SoftLabelMap,
    n_components: usize,
    epsilon_reg: f64,
    rng: &mut R,
    max_iters: usize,
    tol: f64,
) -> Result<MixtureFit> {
    let mut em = WeightedEm::new(objects, w, n_components, epsilon_reg, rng)?;
    let mut prev = em.objective();
    let mut trace = Vec::new();
    let mut converged = false;
    for _ in 0..max_iters {
        let reseeds = em.reseeds();
        let cur = em.step();
        trace.push(cur);
        if em.reseeds() == reseeds && libm::fabs(prev - cur) <= tol * libm::fabs(prev).max(1e-300) {
            converged = true;
            break;
        }
        prev = cur;
    }
    Ok(MixtureFit { model: DensityModel::Mixture(em.model.clone()), trace, converged })
}

/// `½ ln(2π)`, the standard-normal NLL at its mean.
pub const HALF_LN_2PI: f64 = 0.5 * LN_2PI;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng, StreamTag};
    use alloc::vec;
    use core::f64::consts::PI;

    fn objs_1d(xs: &[f64]) -> Vec<ObjectRecord> {
        xs.iter().enumerate().map(|(i, &x)| ObjectRecord { object_id: i, snippet_id: 0, features: vec![x] }).collect()
    }

    fn gauss(m: &DensityModel) -> &GaussianDensity {
        match m {
            DensityModel::Gaussian(g) => g,
            _ => panic!("expected gaussian"),
        }
    }

    #[test]
    fn ln_2pi_constant() {
        assert!((LN_2PI - libm::log(2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn symmetric_pair() {
        let eps = 1e-6;
        let m = fit_weighted_gaussian(&objs_1d(&[-1.0, 1.0]), &SoftLabelMap::zeros(2), eps).unwrap();
        let g = gauss(&m);
        assert_eq!(g.mean(), &[0.0]);
        assert!((g.cov()[0] - (1.0 + eps)).abs() < 1e-15);
    }

    #[test]
    fn fully_abnormal_object_is_excluded() {
        let eps = 1e-6;
        let w = SoftLabelMap::new(vec![0.0, 1.0]).unwrap();
        let m = fit_weighted_gaussian(&objs_1d(&[0.0, 100.0]), &w, eps).unwrap();
        let g = gauss(&m);
        assert_eq!(g.mean(), &[0.0]);
        assert!((g.cov()[0] - eps).abs() < 1e-18);
    }

    #[test]
    fn all_weights_one_is_degenerate() {
        let w = SoftLabelMap::new(vec![1.0, 1.0]).unwrap();
        assert_eq!(fit_weighted_gaussian(&objs_1d(&[0.0, 1.0]), &w, 1e-6), Err(Error::DegenerateWeights));
    }

    #[test]
    fn standard_normal_score_at_mean() {
        let m = DensityModel::Gaussian(GaussianDensity::new(vec![0.0], vec![1.0]).unwrap());
        let s = score_object(&m, &objs_1d(&[0.0])[0]).unwrap();
        assert!((s - 0.918_938_533_204_672_7).abs() < 1e-12);
        assert!((s - HALF_LN_2PI).abs() < 1e-15);
    }

    #[test]
    fn score_symmetry_and_ray_monotonicity() {
        let m = DensityModel::Gaussian(GaussianDensity::new(vec![0.0, 0.0], vec![2.0, 0.5, 0.5, 1.0]).unwrap());
        let dir = [0.3, -0.8];
        let mut prev = f64::NEG_INFINITY;
        for step in 0..50 {
            let t = step as f64 * 0.2;
            let x = [dir[0] * t, dir[1] * t];
            let s = m.nll(&x).unwrap();
            assert_eq!(s, m.nll(&[-x[0], -x[1]]).unwrap());
            assert!(s > prev || step == 0);
            prev = s;
        }
    }

    #[test]
    fn dimension_mismatch() {
        let m = DensityModel::Gaussian(GaussianDensity::new(vec![0.0], vec![1.0]).unwrap());
        assert!(matches!(m.nll(&[0.0, 1.0]), Err(Error::DimensionMismatch { expected: 1, got: 2 })));
    }

    #[test]
    fn single_component_em_is_diagonal_gaussian() {
        let mut rng = derive_rng(5, StreamTag::Init);
        let objects: Vec<ObjectRecord> = (0..40)
            .map(|i| ObjectRecord {
                object_id: i,
                snippet_id: 0,
                features: vec![
                    crate::sampling::standard_normal(&mut rng),
                    2.0 + 3.0 * crate::sampling::standard_normal(&mut rng),
                ],
            })
            .collect();
        let w = SoftLabelMap::new((0..40).map(|i| (i % 7) as f64 / 7.0).collect()).unwrap();
        let g = fit_weighted_gaussian(&objects, &w, 1e-6).unwrap();
        let fit = fit_weighted_mixture(&objects, &w, 1, 1e-6, &mut rng, 50, 1e-12).unwrap();
        let DensityModel::Mixture(mix) = &fit.model else { panic!() };
        let c = &mix.components[0];
        let g = gauss(&g);
        for j in 0..2 {
            assert!((c.mean[j] - g.mean()[j]).abs() < 1e-6);
            assert!((c.var[j] - g.cov()[j * 2 + j]).abs() < 1e-6);
        }
        assert!((c.weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn serde_rebuilds_factor() {
        let m = DensityModel::Gaussian(GaussianDensity::new(vec![1.0, 2.0], vec![2.0, 0.1, 0.1, 1.0]).unwrap());
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"family\":\"gaussian\""));
        let back: DensityModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<DensityModel>(r#"{"family":"gaussian","mean":[0.0],"cov":[-1.0]}"#).is_err());
    }
}

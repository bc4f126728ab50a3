use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::TrainingData;
use crate::error::{Error, Result};

/// Magnitude and probability for one snippet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnippetOutput {
    pub magnitude: f64,
    pub probability: f64,
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct Activations {
    pub z1: Vec<f64>,
    pub a1: Vec<f64>,
    pub e: Vec<f64>,
    pub out: SnippetOutput,
}

/// `x -> relu(W1 x + b1) = a`, magnitude `|WA a + bA|`, probability
/// `σ(wB · a + bB)`. Parameters live in one flat vector laid out as
/// `W1 (h×d) | b1 (h) | WA (h×h) | bA (h) | wB (h) | bB (1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScorerModel {
    d: usize,
    h: usize,
    params: Vec<f64>,
}

impl ScorerModel {
    pub fn param_count(d: usize, h: usize) -> usize {
        h * d + h + h * h + h + h + 1
    }

    pub fn zeros(d: usize, h: usize) -> Self {
        Self { d, h, params: vec![0.0; Self::param_count(d, h)] }
    }

    /// Uniform `±1/sqrt(fan_in)` initialization for every weight and bias.
    pub fn init<R: Rng + ?Sized>(d: usize, h: usize, rng: &mut R) -> Self {
        let mut m = Self::zeros(d, h);
        let first_layer_end = m.off_wa();
        for (i, p) in m.params.iter_mut().enumerate() {
            let fan_in = if i < first_layer_end { d } else { h };
            let bound = 1.0 / libm::sqrt(fan_in as f64);
            *p = rng.gen_range(-bound..bound);
        }
        m
    }

    pub fn from_params(d: usize, h: usize, params: Vec<f64>) -> Result<Self> {
        let expected = Self::param_count(d, h);
        if params.len() != expected {
            return Err(Error::DimensionMismatch { expected, got: params.len() });
        }
        Ok(Self { d, h, params })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn hidden(&self) -> usize {
        self.h
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn off_b1(&self) -> usize {
        self.h * self.d
    }
    fn off_wa(&self) -> usize {
        self.off_b1() + self.h
    }
    fn off_ba(&self) -> usize {
        self.off_wa() + self.h * self.h
    }
    fn off_wb(&self) -> usize {
        self.off_ba() + self.h
    }
    fn off_bb(&self) -> usize {
        self.off_wb() + self.h
    }

    pub(crate) fn forward(&self, x: &[f64]) -> Result<Activations> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: x.len() });
        }
        let (d, h, p) = (self.d, self.h, &self.params);
        let mut z1 = vec![0.0; h];
        for (i, z) in z1.iter_mut().enumerate() {
            let row = &p[i * d..(i + 1) * d];
            *z = p[self.off_b1() + i] + row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>();
        }
        let a1: Vec<f64> = z1.iter().map(|&z| z.max(0.0)).collect();
        let wa = &p[self.off_wa()..self.off_ba()];
        let ba = &p[self.off_ba()..self.off_wb()];
        let e: Vec<f64> =
            (0..h).map(|i| ba[i] + wa[i * h..(i + 1) * h].iter().zip(&a1).map(|(w, a)| w * a).sum::<f64>()).collect();
        let magnitude = libm::sqrt(e.iter().map(|v| v * v).sum());
        let logit = p[self.off_bb()] + p[self.off_wb()..self.off_bb()].iter().zip(&a1).map(|(w, a)| w * a).sum::<f64>();
        let probability = sigmoid(logit);
        Ok(Activations { z1, a1, e, out: SnippetOutput { magnitude, probability } })
    }

    /// Accumulates `∂L/∂θ` into `grad` given `∂L/∂magnitude` and
    /// `∂L/∂probability` for one snippet.
    pub(crate) fn backward(&self, x: &[f64], act: &Activations, g_mag: f64, g_prob: f64, grad: &mut [f64]) {
        let (d, h) = (self.d, self.h);
        let p = &self.params;
        let mag = act.out.magnitude;
        let de: Vec<f64> =
            if g_mag != 0.0 && mag > 0.0 { act.e.iter().map(|e| g_mag * e / mag).collect() } else { vec![0.0; h] };
        let prob = act.out.probability;
        let g_logit = g_prob * prob * (1.0 - prob);

        let (off_wa, off_ba, off_wb, off_bb) = (self.off_wa(), self.off_ba(), self.off_wb(), self.off_bb());
        let mut da1 = vec![0.0; h];
        for i in 0..h {
            if de[i] != 0.0 {
                for j in 0..h {
                    grad[off_wa + i * h + j] += de[i] * act.a1[j];
                    da1[j] += p[off_wa + i * h + j] * de[i];
                }
                grad[off_ba + i] += de[i];
            }
        }
        if g_logit != 0.0 {
            for j in 0..h {
                grad[off_wb + j] += g_logit * act.a1[j];
                da1[j] += g_logit * p[off_wb + j];
            }
            grad[off_bb] += g_logit;
        }
        let off_b1 = self.off_b1();
        for i in 0..h {
            if act.z1[i] > 0.0 && da1[i] != 0.0 {
                for j in 0..d {
                    grad[i * d + j] += da1[i] * x[j];
                }
                grad[off_b1 + i] += da1[i];
            }
        }
    }

    pub fn score_snippet(&self, features: &[f64]) -> Result<SnippetOutput> {
        Ok(self.forward(features)?.out)
    }

    /// Outputs for every snippet, indexed by snippet id.
    pub fn score_all(&self, data: &TrainingData) -> Result<Vec<SnippetOutput>> {
        (0..data.n_snippets()).map(|i| self.score_snippet(data.snippet_feature(i))).collect()
    }

    pub fn probabilities(&self, data: &TrainingData) -> Result<Vec<f64>> {
        Ok(self.score_all(data)?.into_iter().map(|o| o.probability).collect())
    }
}

/// Logistic function kept strictly inside (0, 1).
fn sigmoid(x: f64) -> f64 {
    let p = if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_rng, StreamTag};

    #[test]
    fn zero_model_outputs() {
        let m = ScorerModel::zeros(3, 4);
        let out = m.score_snippet(&[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(out.probability, 0.5);
        assert_eq!(out.magnitude, 0.0);
    }

    #[test]
    fn probability_strictly_inside_unit_interval() {
        let mut rng = derive_rng(3, StreamTag::Init);
        let mut m = ScorerModel::init(4, 8, &mut rng);
        m.params_mut().iter_mut().for_each(|p| *p *= 50.0);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-100.0..100.0)).collect();
            let out = m.score_snippet(&x).unwrap();
            assert!(out.probability > 0.0 && out.probability < 1.0, "{}", out.probability);
            assert!(out.magnitude >= 0.0);
        }
    }

    #[test]
    fn deterministic_scoring() {
        let m = ScorerModel::init(2, 3, &mut derive_rng(9, StreamTag::Init));
        let a = m.score_snippet(&[0.3, 0.7]).unwrap();
        let b = m.score_snippet(&[0.3, 0.7]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn param_count_and_mismatch() {
        assert_eq!(ScorerModel::param_count(2, 3), 6 + 3 + 9 + 3 + 3 + 1);
        let m = ScorerModel::zeros(2, 3);
        assert_eq!(m.params().len(), 25);
        assert!(m.score_snippet(&[1.0]).is_err());
        assert!(ScorerModel::from_params(2, 3, vec![0.0; 24]).is_err());
    }
}

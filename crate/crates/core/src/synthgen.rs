//! Synthetic labelled datasets with video-like anomaly structure.
//!
//! Each video is a sequence of snippets; abnormal snippets come in
//! contiguous bursts. Every object's feature vector is drawn from the
//! normal or abnormal diagonal Gaussian mixture according to its snippet's
//! label.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::dataset::{Dataset, ObjectRecord, SnippetRecord};
use crate::error::{Error, Result};
use crate::rng::{derive_rng, StreamTag};
use crate::sampling::standard_normal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub mean: Vec<f64>,
    /// Per-dimension standard deviation before `overlap_sigma` scaling.
    pub scale: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_videos: usize,
    pub snippets_per_video: usize,
    /// Inclusive range of objects per snippet.
    pub objects_per_snippet: (usize, usize),
    pub d: usize,
    pub contamination_rho: f64,
    /// Inclusive range of abnormal burst lengths.
    pub burst_length: (usize, usize),
    pub normal_mixture: Vec<MixtureComponent>,
    pub abnormal_mixture: Vec<MixtureComponent>,
    /// Multiplies every component scale; small values separate the classes.
    pub overlap_sigma: f64,
}

fn unit(d: usize, axis: usize, value: f64) -> Vec<f64> {
    let mut v = vec![0.0; d];
    v[axis % d] = value;
    v
}

impl GeneratorSpec {
    /// The default two-class layout for dimension `d`: normal data is a
    /// two-mode mixture split along axis 0, abnormal data a single mode
    /// displaced along axis 1 (axis 0 when `d == 1`).
    pub fn standard(
        d: usize,
        n_videos: usize,
        snippets_per_video: usize,
        contamination_rho: f64,
        overlap_sigma: f64,
    ) -> Self {
        let normal_mixture = vec![
            MixtureComponent { mean: unit(d, 0, -2.0), scale: vec![1.0; d], weight: 0.6 },
            MixtureComponent { mean: unit(d, 0, 2.0), scale: vec![1.0; d], weight: 0.4 },
        ];
        let abnormal_mean = if d == 1 { vec![7.0] } else { unit(d, 1, 4.0) };
        let abnormal_mixture = vec![MixtureComponent { mean: abnormal_mean, scale: vec![1.0; d], weight: 1.0 }];
        Self {
            n_videos,
            snippets_per_video,
            objects_per_snippet: (1, 4),
            d,
            contamination_rho,
            burst_length: (5, 15),
            normal_mixture,
            abnormal_mixture,
            overlap_sigma,
        }
    }

    pub fn from_config(cfg: &RunConfig) -> Self {
        let mut spec =
            Self::standard(cfg.d, cfg.n_videos, cfg.snippets_per_video, cfg.contamination_rho, cfg.overlap_sigma);
        spec.objects_per_snippet = (cfg.objects_min, cfg.objects_max);
        spec.burst_length = (cfg.burst_min, cfg.burst_max);
        spec
    }

    pub fn n_snippets(&self) -> usize {
        self.n_videos * self.snippets_per_video
    }

    /// Number of abnormal snippets the generator places.
    pub fn target_abnormal(&self) -> usize {
        libm::round(self.contamination_rho * self.n_snippets() as f64) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: alloc::string::String| Err(Error::InfeasibleSpec(m));
        if self.n_videos == 0 || self.snippets_per_video == 0 || self.d == 0 {
            return bad("n_videos, snippets_per_video and d must be positive".into());
        }
        let (omin, omax) = self.objects_per_snippet;
        if omin == 0 || omin > omax {
            return bad(format!("objects_per_snippet range [{omin}, {omax}] invalid"));
        }
        if !(0.0..0.5).contains(&self.contamination_rho) {
            return bad(format!("contamination_rho {} outside [0, 0.5)", self.contamination_rho));
        }
        let (bmin, bmax) = self.burst_length;
        if bmin == 0 || bmin > bmax {
            return bad(format!("burst_length range [{bmin}, {bmax}] invalid"));
        }
        if bmax > self.snippets_per_video {
            return bad(format!("burst length {bmax} longer than video ({} snippets)", self.snippets_per_video));
        }
        if !(self.overlap_sigma > 0.0 && self.overlap_sigma.is_finite()) {
            return bad("overlap_sigma must be positive".into());
        }
        for (name, mix) in [("normal", &self.normal_mixture), ("abnormal", &self.abnormal_mixture)] {
            if mix.is_empty() {
                return bad(format!("{name} mixture is empty"));
            }
            let total: f64 = mix.iter().map(|c| c.weight).sum();
            if (total - 1.0).abs() > 1e-9 || mix.iter().any(|c| c.weight.is_nan() || c.weight < 0.0) {
                return bad(format!("{name} mixture weights sum to {total}, expected 1"));
            }
            for c in mix {
                if c.mean.len() != self.d || c.scale.len() != self.d {
                    return bad(format!("{name} component dimension differs from d={}", self.d));
                }
                if c.scale.iter().any(|s| s.is_nan() || *s <= 0.0) {
                    return bad(format!("{name} component has a non-positive scale"));
                }
            }
        }
        Ok(())
    }
}

fn draw_from_mixture<R: Rng + ?Sized>(mix: &[MixtureComponent], sigma: f64, rng: &mut R) -> Vec<f64> {
    let mut u = rng.gen::<f64>();
    let comp = mix
        .iter()
        .find(|c| {
            if u < c.weight {
                true
            } else {
                u -= c.weight;
                false
            }
        })
        .unwrap_or(&mix[mix.len() - 1]);
    comp.mean.iter().zip(&comp.scale).map(|(m, s)| m + sigma * s * standard_normal(rng)).collect()
}

/// Places abnormal bursts; returns one label per snippet in video order.
fn place_bursts<R: Rng + ?Sized>(spec: &GeneratorSpec, rng: &mut R) -> Result<Vec<u8>> {
    let spv = spec.snippets_per_video;
    let mut labels = vec![0u8; spec.n_snippets()];
    let mut remaining = spec.target_abnormal();
    let (bmin, bmax) = spec.burst_length;
    let max_attempts = 1000 + 100 * spec.n_snippets();
    let mut attempts = 0;
    while remaining > 0 {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::InfeasibleSpec(format!(
                "could not place {remaining} more abnormal snippets in non-adjacent bursts"
            )));
        }
        let video = rng.gen_range(0..spec.n_videos);
        let len = rng.gen_range(bmin..=bmax).min(remaining);
        let start = rng.gen_range(0..=spv - len);
        let base = video * spv;
        // bursts may not touch each other
        let lo = start.saturating_sub(1);
        let hi = (start + len + 1).min(spv);
        if labels[base + lo..base + hi].contains(&1) {
            continue;
        }
        labels[base + start..base + start + len].iter_mut().for_each(|l| *l = 1);
        remaining -= len;
    }
    Ok(labels)
}

/// Generates a dataset. Burst placement uses the `shuffle` stream and
/// features the `generator` stream, both derived from `seed`.
pub fn generate(spec: &GeneratorSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let labels = place_bursts(spec, &mut derive_rng(seed, StreamTag::Shuffle))?;
    let mut rng = derive_rng(seed, StreamTag::Generator);
    let mut snippets = Vec::with_capacity(labels.len());
    let mut objects = Vec::new();
    let (omin, omax) = spec.objects_per_snippet;
    for (sid, &label) in labels.iter().enumerate() {
        let n_obj = rng.gen_range(omin..=omax);
        let mix = if label == 1 { &spec.abnormal_mixture } else { &spec.normal_mixture };
        let mut object_ids = Vec::with_capacity(n_obj);
        for _ in 0..n_obj {
            let oid = objects.len();
            objects.push(ObjectRecord {
                object_id: oid,
                snippet_id: sid,
                features: draw_from_mixture(mix, spec.overlap_sigma, &mut rng),
            });
            object_ids.push(oid);
        }
        snippets.push(SnippetRecord {
            snippet_id: sid,
            video_id: sid / spec.snippets_per_video,
            object_ids,
            gt_label: label,
        });
    }
    Dataset::new(spec.d, snippets, objects)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_contamination_is_all_normal() {
        let spec = GeneratorSpec::standard(3, 4, 20, 0.0, 1.0);
        let ds = generate(&spec, 1).unwrap();
        assert_eq!(ds.ground_truth().n_abnormal(), 0);
    }

    #[test]
    fn counts_and_bursts() {
        let spec = GeneratorSpec::standard(4, 10, 50, 0.1, 1.0);
        let ds = generate(&spec, 11).unwrap();
        assert_eq!(ds.n_snippets(), 500);
        let n_abn = ds.ground_truth().n_abnormal();
        assert!(n_abn.abs_diff(50) <= spec.burst_length.1, "{n_abn}");
        // every run of 1s lies inside a single video
        let labels = ds.ground_truth().labels();
        for v in 0..10 {
            let video = &labels[v * 50..(v + 1) * 50];
            let runs = video.windows(2).filter(|w| w[0] == 0 && w[1] == 1).count() + usize::from(video[0] == 1);
            let ones = video.iter().filter(|&&l| l == 1).count();
            assert!(ones == 0 || runs >= 1);
        }
    }

    #[test]
    fn same_seed_same_dataset() {
        let spec = GeneratorSpec::standard(2, 3, 30, 0.2, 0.5);
        assert_eq!(generate(&spec, 5).unwrap(), generate(&spec, 5).unwrap());
        assert_ne!(generate(&spec, 5).unwrap(), generate(&spec, 6).unwrap());
    }

    #[test]
    fn burst_longer_than_video_is_infeasible() {
        let mut spec = GeneratorSpec::standard(2, 3, 10, 0.2, 1.0);
        spec.burst_length = (5, 12);
        assert!(matches!(generate(&spec, 1), Err(Error::InfeasibleSpec(_))));
    }

    #[test]
    fn majority_normal_enforced() {
        let spec = GeneratorSpec::standard(2, 3, 10, 0.6, 1.0);
        assert!(matches!(spec.validate(), Err(Error::InfeasibleSpec(_))));
    }

    #[test]
    fn bad_mixture_weights() {
        let mut spec = GeneratorSpec::standard(2, 3, 10, 0.1, 1.0);
        spec.normal_mixture[0].weight = 0.9;
        assert!(spec.validate().is_err());
    }
}

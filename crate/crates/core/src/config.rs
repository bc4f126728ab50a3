//! Run configuration shared by generation, training and evaluation.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Density family used by the weighted one-class model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityFamily {
    Gaussian,
    Mixture,
}

/// How the one-class model consumes the scorer's output.
///
/// `Soft` is the weighted one-class model. `Hard` is the ablation baseline:
/// the scorer's probabilities are rank-thresholded with the module's `T_ws`
/// and the density is fit on the 0-labelled objects only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    Soft,
    Hard,
}

impl FromStr for DensityFamily {
    type Err = String;
    fn from_str(s: &str) -> core::result::Result<Self, String> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "mixture" => Ok(Self::Mixture),
            other => Err(format!("expected gaussian|mixture, got `{other}`")),
        }
    }
}

impl FromStr for LabelMode {
    type Err = String;
    fn from_str(s: &str) -> core::result::Result<Self, String> {
        match s {
            "soft" => Ok(Self::Soft),
            "hard" => Ok(Self::Hard),
            other => Err(format!("expected soft|hard, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Initial threshold ratio: `T1 = round(R% * N)`, also the size of every
    /// selected top set.
    pub r_percent: f64,
    /// Stop once a threshold change falls to `Q%` of the first change.
    pub q_percent: f64,
    /// Bag size `C`.
    pub bag_size: usize,
    /// Top-k used by both bag statistics.
    pub top_k: usize,
    /// Hinge margin `m` on feature magnitudes.
    pub margin: f64,
    pub loops_per_module: usize,
    pub max_modules: usize,
    /// Hidden width of the scorer.
    pub hidden_width: usize,
    /// Bags per scorer epoch; 0 means `ceil(N / C)`.
    pub bags_per_epoch: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    /// Absolute ridge added to every fitted covariance.
    pub epsilon_reg: f64,
    pub density_family: DensityFamily,
    pub mixture_components: usize,
    pub em_max_iters: usize,
    pub em_tol: f64,
    pub label_mode: LabelMode,
    pub master_seed: u64,
    // synthetic generation
    pub d: usize,
    pub n_videos: usize,
    pub snippets_per_video: usize,
    pub contamination_rho: f64,
    pub objects_min: usize,
    pub objects_max: usize,
    pub burst_min: usize,
    pub burst_max: usize,
    pub overlap_sigma: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            r_percent: 30.0,
            q_percent: 10.0,
            bag_size: 16,
            top_k: 3,
            margin: 100.0,
            loops_per_module: 5,
            max_modules: 15,
            hidden_width: 32,
            bags_per_epoch: 0,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 5e-4,
            epsilon_reg: 1e-6,
            density_family: DensityFamily::Gaussian,
            mixture_components: 2,
            em_max_iters: 100,
            em_tol: 1e-8,
            label_mode: LabelMode::Soft,
            master_seed: 42,
            d: 8,
            n_videos: 40,
            snippets_per_video: 50,
            contamination_rho: 0.1,
            objects_min: 1,
            objects_max: 4,
            burst_min: 5,
            burst_max: 15,
            overlap_sigma: 1.0,
        }
    }
}

/// Every key accepted by [`RunConfig::set`], in declaration order.
pub const CONFIG_KEYS: &[&str] = &[
    "r_percent",
    "q_percent",
    "bag_size",
    "top_k",
    "margin",
    "loops_per_module",
    "max_modules",
    "hidden_width",
    "bags_per_epoch",
    "learning_rate",
    "adam_beta1",
    "adam_beta2",
    "adam_eps",
    "weight_decay",
    "epsilon_reg",
    "density_family",
    "mixture_components",
    "em_max_iters",
    "em_tol",
    "label_mode",
    "master_seed",
    "d",
    "n_videos",
    "snippets_per_video",
    "contamination_rho",
    "objects_min",
    "objects_max",
    "burst_min",
    "burst_max",
    "overlap_sigma",
];

fn parse<T: FromStr>(key: &str, value: &str) -> core::result::Result<T, String>
where
    T::Err: core::fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| format!("{key}: cannot parse `{value}`: {e}"))
}

impl RunConfig {
    /// Sets one field from its textual form. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> core::result::Result<(), String> {
        match key {
            "r_percent" => self.r_percent = parse(key, value)?,
            "q_percent" => self.q_percent = parse(key, value)?,
            "bag_size" => self.bag_size = parse(key, value)?,
            "top_k" => self.top_k = parse(key, value)?,
            "margin" => self.margin = parse(key, value)?,
            "loops_per_module" => self.loops_per_module = parse(key, value)?,
            "max_modules" => self.max_modules = parse(key, value)?,
            "hidden_width" => self.hidden_width = parse(key, value)?,
            "bags_per_epoch" => self.bags_per_epoch = parse(key, value)?,
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "adam_beta1" => self.adam_beta1 = parse(key, value)?,
            "adam_beta2" => self.adam_beta2 = parse(key, value)?,
            "adam_eps" => self.adam_eps = parse(key, value)?,
            "weight_decay" => self.weight_decay = parse(key, value)?,
            "epsilon_reg" => self.epsilon_reg = parse(key, value)?,
            "density_family" => self.density_family = parse(key, value)?,
            "mixture_components" => self.mixture_components = parse(key, value)?,
            "em_max_iters" => self.em_max_iters = parse(key, value)?,
            "em_tol" => self.em_tol = parse(key, value)?,
            "label_mode" => self.label_mode = parse(key, value)?,
            "master_seed" => self.master_seed = parse(key, value)?,
            "d" => self.d = parse(key, value)?,
            "n_videos" => self.n_videos = parse(key, value)?,
            "snippets_per_video" => self.snippets_per_video = parse(key, value)?,
            "contamination_rho" => self.contamination_rho = parse(key, value)?,
            "objects_min" => self.objects_min = parse(key, value)?,
            "objects_max" => self.objects_max = parse(key, value)?,
            "burst_min" => self.burst_min = parse(key, value)?,
            "burst_max" => self.burst_max = parse(key, value)?,
            "overlap_sigma" => self.overlap_sigma = parse(key, value)?,
            other => return Err(format!("unknown config key `{other}`")),
        }
        Ok(())
    }

    /// Bags per scorer epoch for a dataset with `n_snippets` snippets.
    pub fn effective_bags_per_epoch(&self, n_snippets: usize) -> usize {
        if self.bags_per_epoch > 0 {
            self.bags_per_epoch
        } else {
            n_snippets.div_ceil(self.bag_size.max(1))
        }
    }

    /// Checks every field and reports all violations at once.
    pub fn validate(&self) -> Result<()> {
        let mut errs: Vec<String> = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                errs.push(msg);
            }
        };
        let pct = |x: f64| x.is_finite() && x > 0.0 && x <= 100.0;
        let pos = |x: f64| x.is_finite() && x > 0.0;
        let unit = |x: f64| x.is_finite() && (0.0..1.0).contains(&x);

        check(pct(self.r_percent), format!("r_percent in (0,100], got {}", self.r_percent));
        check(pct(self.q_percent), format!("q_percent in (0,100], got {}", self.q_percent));
        check(self.bag_size >= 1, "bag_size must be positive".to_string());
        check(self.top_k >= 1, "top_k must be positive".to_string());
        check(
            self.bag_size >= self.top_k,
            format!("C >= k violated: bag_size={} < top_k={}", self.bag_size, self.top_k),
        );
        check(pos(self.margin), format!("margin must be positive, got {}", self.margin));
        check(self.loops_per_module >= 1, "loops_per_module must be positive".to_string());
        check(self.max_modules >= 1, "max_modules must be positive".to_string());
        check(self.hidden_width >= 1, "hidden_width must be positive".to_string());
        check(pos(self.learning_rate), format!("learning_rate must be positive, got {}", self.learning_rate));
        check(unit(self.adam_beta1), format!("adam_beta1 in [0,1), got {}", self.adam_beta1));
        check(unit(self.adam_beta2), format!("adam_beta2 in [0,1), got {}", self.adam_beta2));
        check(pos(self.adam_eps), format!("adam_eps must be positive, got {}", self.adam_eps));
        check(
            self.weight_decay.is_finite() && self.weight_decay >= 0.0,
            format!("weight_decay must be >= 0, got {}", self.weight_decay),
        );
        check(pos(self.epsilon_reg), format!("epsilon_reg must be positive, got {}", self.epsilon_reg));
        check(self.mixture_components >= 1, "mixture_components must be positive".to_string());
        check(self.em_max_iters >= 1, "em_max_iters must be positive".to_string());
        check(pos(self.em_tol), format!("em_tol must be positive, got {}", self.em_tol));
        check(self.d >= 1, "d must be positive".to_string());
        check(self.n_videos >= 1, "n_videos must be positive".to_string());
        check(self.snippets_per_video >= 1, "snippets_per_video must be positive".to_string());
        check(
            self.contamination_rho.is_finite() && (0.0..0.5).contains(&self.contamination_rho),
            format!("contamination_rho in [0,0.5), got {}", self.contamination_rho),
        );
        check(
            self.objects_min >= 1 && self.objects_min <= self.objects_max,
            format!("objects range must satisfy 1 <= min <= max, got [{}, {}]", self.objects_min, self.objects_max),
        );
        check(
            self.burst_min >= 1 && self.burst_min <= self.burst_max,
            format!("burst range must satisfy 1 <= min <= max, got [{}, {}]", self.burst_min, self.burst_max),
        );
        check(pos(self.overlap_sigma), format!("overlap_sigma must be positive, got {}", self.overlap_sigma));

        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(errs))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn violations(cfg: &RunConfig) -> Vec<String> {
        match cfg.validate() {
            Err(Error::InvalidConfig(v)) => v,
            other => panic!("expected InvalidConfig, got {other:?}"),
        }
    }

    #[test]
    fn default_is_valid() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.r_percent, 30.0);
        assert_eq!(cfg.q_percent, 10.0);
        assert_eq!(cfg.bag_size, 16);
        assert_eq!(cfg.top_k, 3);
        assert_eq!(cfg.margin, 100.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn bag_smaller_than_top_k() {
        let cfg = RunConfig { bag_size: 2, top_k: 3, ..Default::default() };
        let v = violations(&cfg);
        assert_eq!(v.len(), 1);
        assert!(v[0].contains("C >= k violated"), "{v:?}");
    }

    #[test]
    fn zero_r_percent() {
        let cfg = RunConfig { r_percent: 0.0, ..Default::default() };
        let v = violations(&cfg);
        assert!(v[0].contains("r_percent in (0,100]"), "{v:?}");
    }

    #[test]
    fn every_violation_is_reported() {
        let cfg =
            RunConfig { r_percent: 150.0, q_percent: -1.0, margin: 0.0, contamination_rho: 0.6, ..Default::default() };
        let v = violations(&cfg);
        assert_eq!(v.len(), 4, "{v:?}");
    }

    #[test]
    fn set_roundtrips_every_key() {
        let mut cfg = RunConfig::default();
        for key in CONFIG_KEYS {
            let value = match *key {
                "density_family" => "mixture",
                "label_mode" => "hard",
                "r_percent" | "q_percent" | "margin" | "learning_rate" | "adam_beta1" | "adam_beta2" | "adam_eps"
                | "weight_decay" | "epsilon_reg" | "em_tol" | "contamination_rho" | "overlap_sigma" => "0.25",
                _ => "7",
            };
            cfg.set(key, value).unwrap();
        }
        assert_eq!(cfg.density_family, DensityFamily::Mixture);
        assert_eq!(cfg.label_mode, LabelMode::Hard);
        assert_eq!(cfg.bag_size, 7);
        assert_eq!(cfg.r_percent, 0.25);
        assert!(cfg.set("nonsense", "1").unwrap_err().contains("unknown config key"));
        assert!(cfg.set("top_k", "x").is_err());
    }
}

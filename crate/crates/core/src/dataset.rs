//! Videos, snippets and objects, with the ground truth split off.
//!
//! A [`Dataset`] is two halves: [`TrainingData`], which the training path
//! consumes and which has no label accessor at all, and [`GroundTruth`],
//! which only evaluation code receives. Ids are dense: snippet `i` is at
//! position `i`, object `j` at position `j`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub object_id: usize,
    pub snippet_id: usize,
    pub features: Vec<f64>,
}

/// Full snippet record as stored on disk, including the evaluation label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetRecord {
    pub snippet_id: usize,
    pub video_id: usize,
    pub object_ids: Vec<usize>,
    pub gt_label: u8,
}

/// Training-facing snippet: everything but the label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Snippet {
    pub snippet_id: usize,
    pub video_id: usize,
    pub object_ids: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    d: usize,
    snippets: Vec<Snippet>,
    objects: Vec<ObjectRecord>,
    /// Row-major `N x d`: per-snippet mean of member object features.
    snippet_features: Vec<f64>,
}

impl TrainingData {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_snippets(&self) -> usize {
        self.snippets.len()
    }

    pub fn n_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn snippets(&self) -> &[Snippet] {
        &self.snippets
    }

    pub fn objects(&self) -> &[ObjectRecord] {
        &self.objects
    }

    pub fn object_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.objects.iter().map(|o| o.object_id)
    }

    /// Mean feature vector of snippet `id`'s objects.
    pub fn snippet_feature(&self, id: usize) -> &[f64] {
        &self.snippet_features[id * self.d..(id + 1) * self.d]
    }
}

/// Per-snippet ground-truth labels, readable only by evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    labels: Vec<u8>,
}

impl GroundTruth {
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn n_abnormal(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    training: TrainingData,
    truth: GroundTruth,
}

impl Dataset {
    /// Builds and validates a dataset.
    pub fn new(d: usize, snippets: Vec<SnippetRecord>, objects: Vec<ObjectRecord>) -> Result<Self> {
        let bad = |msg: alloc::string::String| Err(Error::InvalidDataset(msg));
        if d == 0 {
            return bad("feature dimension must be positive".into());
        }
        if snippets.is_empty() {
            return bad("dataset has no snippets".into());
        }
        for (i, o) in objects.iter().enumerate() {
            if o.object_id != i {
                return bad(format!("object at position {i} has id {} (ids must be dense)", o.object_id));
            }
            if o.features.len() != d {
                return bad(format!("object {i} has {} features, expected {d}", o.features.len()));
            }
            if let Some(x) = o.features.iter().find(|x| !x.is_finite()) {
                return bad(format!("object {i} has non-finite feature {x}"));
            }
            if o.snippet_id >= snippets.len() {
                return bad(format!("object {i} references missing snippet {}", o.snippet_id));
            }
        }
        let mut claimed = vec![false; objects.len()];
        for (i, s) in snippets.iter().enumerate() {
            if s.snippet_id != i {
                return bad(format!("snippet at position {i} has id {} (ids must be dense)", s.snippet_id));
            }
            if s.object_ids.is_empty() {
                return bad(format!("snippet {i} has no objects"));
            }
            if s.gt_label > 1 {
                return bad(format!("snippet {i} has label {}", s.gt_label));
            }
            for &oid in &s.object_ids {
                let Some(o) = objects.get(oid) else {
                    return bad(format!("snippet {i} references missing object {oid}"));
                };
                if o.snippet_id != i {
                    return bad(format!("object {oid} listed by snippet {i} but belongs to {}", o.snippet_id));
                }
                if core::mem::replace(&mut claimed[oid], true) {
                    return bad(format!("object {oid} listed twice"));
                }
            }
        }
        if let Some(orphan) = claimed.iter().position(|c| !c) {
            return bad(format!("object {orphan} is not listed by its snippet"));
        }

        let mut snippet_features = vec![0.0; snippets.len() * d];
        for s in &snippets {
            let row = &mut snippet_features[s.snippet_id * d..(s.snippet_id + 1) * d];
            for &oid in &s.object_ids {
                for (r, x) in row.iter_mut().zip(&objects[oid].features) {
                    *r += x;
                }
            }
            let n = s.object_ids.len() as f64;
            row.iter_mut().for_each(|r| *r /= n);
        }

        let labels = snippets.iter().map(|s| s.gt_label).collect();
        let snippets = snippets
            .into_iter()
            .map(|s| Snippet { snippet_id: s.snippet_id, video_id: s.video_id, object_ids: s.object_ids })
            .collect();
        Ok(Self { training: TrainingData { d, snippets, objects, snippet_features }, truth: GroundTruth { labels } })
    }

    pub fn training(&self) -> &TrainingData {
        &self.training
    }

    pub fn ground_truth(&self) -> &GroundTruth {
        &self.truth
    }

    pub fn d(&self) -> usize {
        self.training.d
    }

    pub fn n_snippets(&self) -> usize {
        self.training.n_snippets()
    }

    /// Reassembles the on-disk snippet records.
    pub fn snippet_records(&self) -> Vec<SnippetRecord> {
        self.training
            .snippets
            .iter()
            .zip(&self.truth.labels)
            .map(|(s, &gt_label)| SnippetRecord {
                snippet_id: s.snippet_id,
                video_id: s.video_id,
                object_ids: s.object_ids.clone(),
                gt_label,
            })
            .collect()
    }
}

/// Per-object soft anomaly weight `w` in `[0, 1]`, indexed by object id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftLabelMap(Vec<f64>);

impl SoftLabelMap {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(0.0..=1.0).contains(*w)) {
            return Err(Error::InvalidDataset(format!("soft label {w} of object {i} outside [0,1]")));
        }
        Ok(Self(weights))
    }

    /// All-zero weights: every object counts fully (plain one-class fit).
    pub fn zeros(n_objects: usize) -> Self {
        Self(vec![0.0; n_objects])
    }

    pub fn get(&self, object_id: usize) -> f64 {
        self.0[object_id]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-snippet binary pseudo-label, indexed by snippet id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HardLabelMap(Vec<u8>);

impl HardLabelMap {
    pub fn from_labels(labels: Vec<u8>) -> Self {
        debug_assert!(labels.iter().all(|&l| l <= 1));
        Self(labels)
    }

    pub fn get(&self, snippet_id: usize) -> u8 {
        self.0[snippet_id]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn n_positive(&self) -> usize {
        self.0.iter().filter(|&&l| l == 1).count()
    }

    /// Snippet ids labelled `label`, ascending.
    pub fn pool(&self, label: u8) -> Vec<usize> {
        self.0.iter().enumerate().filter(|(_, &l)| l == label).map(|(i, _)| i).collect()
    }
}

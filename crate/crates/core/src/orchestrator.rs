//! Interleaved training modules, adaptive thresholding and stopping.
//!
//! A module trains a fresh density model and a fresh scorer in alternation
//! for `loops_per_module` loops at a fixed threshold `T_ws`. Every density
//! snapshot contributes its top `R%` snippets as a selected set; the next
//! module's threshold is the size of the intersection of all sets seen so
//! far, which can only shrink.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::{DensityFamily, LabelMode, RunConfig};
use crate::dataset::{SoftLabelMap, TrainingData};
use crate::error::{Error, Result};
use crate::exchange::{self, RankedScores};
use crate::rng::{derive_substream, StreamRng, StreamTag};
use crate::wocc::{self, DensityModel};
use crate::ws::{self, AdamState, LossConfig, ScorerModel};

/// Version of the serialized run record layout.
pub const RUN_RECORD_VERSION: u32 = 1;

/// Snippet ids (ascending) one density snapshot ranks in its top `R%`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedSet(pub Vec<usize>);

impl SelectedSet {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopRecord {
    pub loop_index: usize,
    /// Weighted NLL per unit effective weight of the density snapshot.
    pub wocc_loss: f64,
    /// Mean scorer loss over the epoch.
    pub ws_loss: Option<f64>,
    pub auc_wocc: Option<f64>,
    pub auc_ws: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleResult {
    /// 1-based.
    pub module: usize,
    pub t_ws: usize,
    pub selected_sets: Vec<SelectedSet>,
    pub loops: Vec<LoopRecord>,
    pub final_wocc: DensityModel,
    pub final_ws: ScorerModel,
    /// A pseudo-label pool went empty and the module ended early.
    pub collapsed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    CriterionMet,
    ThresholdCollapsed,
    MaxModules,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::CriterionMet => "criterion_met",
            Self::ThresholdCollapsed => "threshold_collapsed",
            Self::MaxModules => "max_modules",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub format_version: u32,
    pub config: RunConfig,
    pub modules: Vec<ModuleResult>,
    /// `T¹, T², ...`; one more entry than completed modules once the first
    /// module has finished.
    pub thresholds: Vec<usize>,
    pub stop_reason: Option<StopReason>,
}

impl RunRecord {
    pub fn final_threshold(&self) -> Option<usize> {
        self.thresholds.last().copied()
    }

    /// Module whose models are reported as the final ones (the last).
    pub fn final_module(&self) -> Option<&ModuleResult> {
        self.modules.last()
    }

    pub fn is_complete(&self) -> bool {
        self.stop_reason.is_some()
    }

    /// The first `n` modules as an unfinished record, i.e. the checkpoint
    /// written right after module `n`.
    pub fn truncated(&self, n: usize) -> Self {
        let n = n.min(self.modules.len());
        Self {
            format_version: self.format_version,
            config: self.config.clone(),
            modules: self.modules[..n].to_vec(),
            thresholds: self.thresholds[..(n + 1).min(self.thresholds.len())].to_vec(),
            stop_reason: None,
        }
    }
}

/// What the pipeline shows an observer after every loop.
#[derive(Debug)]
pub struct LoopEvent<'a> {
    pub module: usize,
    pub loop_index: usize,
    pub t_ws: usize,
    pub wocc_loss: f64,
    pub ws_loss: Option<f64>,
    /// Density snippet scores, indexed by snippet id.
    pub wocc_scores: &'a [f64],
    /// Scorer probabilities after this loop's epoch.
    pub ws_probabilities: &'a [f64],
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LoopMetrics {
    pub auc_wocc: Option<f64>,
    pub auc_ws: Option<f64>,
}

/// Hook for progress output and optional per-loop evaluation. Observers
/// cannot influence training.
pub trait LoopObserver {
    fn on_loop(&mut self, event: &LoopEvent<'_>) -> LoopMetrics;
}

impl LoopObserver for () {
    fn on_loop(&mut self, _: &LoopEvent<'_>) -> LoopMetrics {
        LoopMetrics::default()
    }
}

/// `round(R% · N)`.
pub fn selection_size(r_percent: f64, n: usize) -> usize {
    (libm::round(r_percent / 100.0 * n as f64) as usize).min(n)
}

/// `T¹ = round(R% · N)` clamped to `[1, N]`.
pub fn initial_threshold(r_percent: f64, n: usize) -> usize {
    selection_size(r_percent, n).clamp(1, n.max(1))
}

/// Top `round(R% · N)` snippets under `model`.
pub fn select_top_r(model: &DensityModel, data: &TrainingData, r_percent: f64) -> Result<SelectedSet> {
    let scores = wocc::score_snippets(model, data)?;
    Ok(SelectedSet(RankedScores::new(&scores).top(selection_size(r_percent, data.n_snippets()))))
}

/// Ascending intersection of two ascending id lists.
fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            core::cmp::Ordering::Less => i += 1,
            core::cmp::Ordering::Greater => j += 1,
            core::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn intersection_of<'s>(sets: impl IntoIterator<Item = &'s SelectedSet>) -> Option<Vec<usize>> {
    let mut iter = sets.into_iter();
    let first = iter.next()?.0.clone();
    Some(iter.fold(first, |acc, s| intersect(&acc, &s.0)))
}

/// `|A₁ ∩ A₂ ∩ ... ∩ A_M|`; zero for an empty list.
pub fn adaptive_threshold(sets: &[SelectedSet]) -> usize {
    intersection_of(sets).map_or(0, |v| v.len())
}

/// Stopping rule over the threshold history `T¹, T², ...`.
///
/// Stops when the latest change is at most `Q%` of the first change (needs
/// three thresholds), when the first change is zero, or when the threshold
/// reached zero. The module cap is handled by the pipeline.
pub fn should_stop(history: &[usize], q_percent: f64) -> bool {
    match history {
        [] => false,
        [.., 0] => true,
        [_] => false,
        [t1, t2, rest @ ..] => {
            let first = t1.saturating_sub(*t2);
            if first == 0 {
                return true;
            }
            match rest {
                [] => false,
                _ => {
                    let n = history.len();
                    let latest = history[n - 2].saturating_sub(history[n - 1]);
                    latest as f64 <= q_percent / 100.0 * first as f64
                }
            }
        }
    }
}

/// Independent random streams for module `module` (1-based).
#[derive(Debug, Clone)]
pub struct ModuleRngs {
    pub ws_init: StreamRng,
    pub density_init: StreamRng,
    pub bags: StreamRng,
}

impl ModuleRngs {
    pub fn for_module(master_seed: u64, module: usize) -> Self {
        let m = module as u64;
        Self {
            ws_init: derive_substream(master_seed, StreamTag::Init, 2 * m),
            density_init: derive_substream(master_seed, StreamTag::Init, 2 * m + 1),
            bags: derive_substream(master_seed, StreamTag::Bags, m),
        }
    }
}

/// Soft labels that start module 1: `Beta(1, 5)` draws (binarized at 0.5
/// in hard-label mode).
pub fn initial_soft_labels(cfg: &RunConfig, data: &TrainingData) -> SoftLabelMap {
    let mut rng = derive_substream(cfg.master_seed, StreamTag::Init, 0);
    let w = exchange::init_soft_labels(data.n_objects(), &mut rng);
    match cfg.label_mode {
        LabelMode::Soft => w,
        LabelMode::Hard => exchange::binarize(&w),
    }
}

fn fit_density(cfg: &RunConfig, data: &TrainingData, w: &SoftLabelMap, rng: &mut StreamRng) -> Result<DensityModel> {
    match cfg.density_family {
        DensityFamily::Gaussian => wocc::fit_weighted_gaussian(data.objects(), w, cfg.epsilon_reg),
        DensityFamily::Mixture => Ok(wocc::fit_weighted_mixture(
            data.objects(),
            w,
            cfg.mixture_components,
            cfg.epsilon_reg,
            rng,
            cfg.em_max_iters,
            cfg.em_tol,
        )?
        .model),
    }
}

/// Labels the next density fit consumes, from the scorer's probabilities.
fn labels_from_scorer(cfg: &RunConfig, data: &TrainingData, probs: &[f64], t_ws: usize) -> Result<SoftLabelMap> {
    match cfg.label_mode {
        LabelMode::Soft => Ok(exchange::soft_labels_from_snippets(data, probs)),
        LabelMode::Hard => exchange::hard_soft_labels(data, probs, t_ws),
    }
}

/// One interleaving module with freshly initialized models.
///
/// Each loop: fit the density on the current weights, record its top-`R%`
/// set, hard-label the top `t_ws` snippets, train the scorer one epoch,
/// and turn its probabilities into the next weights.
pub fn run_module(
    cfg: &RunConfig,
    data: &TrainingData,
    w_init: SoftLabelMap,
    t_ws: usize,
    module: usize,
    rngs: ModuleRngs,
    observer: &mut dyn LoopObserver,
) -> Result<ModuleResult> {
    let ModuleRngs { mut ws_init, mut density_init, mut bags } = rngs;
    let n = data.n_snippets();
    let n_select = selection_size(cfg.r_percent, n);
    let bags_per_epoch = cfg.effective_bags_per_epoch(n);
    let loss_cfg = LossConfig { top_k: cfg.top_k, margin: cfg.margin };

    let mut scorer = ScorerModel::init(data.d(), cfg.hidden_width, &mut ws_init);
    let mut adam = AdamState::from_config(scorer.params().len(), cfg);
    let mut w = w_init;
    let mut selected_sets = Vec::with_capacity(cfg.loops_per_module);
    let mut loops = Vec::with_capacity(cfg.loops_per_module);
    let mut final_wocc = None;
    let mut collapsed = false;

    for loop_index in 1..=cfg.loops_per_module {
        let density = fit_density(cfg, data, &w, &mut density_init)?;
        let wocc_loss = wocc::mean_weighted_nll(&density, data.objects(), &w)?;
        let scores = wocc::score_snippets(&density, data)?;
        selected_sets.push(SelectedSet(RankedScores::new(&scores).top(n_select)));
        final_wocc = Some(density);

        let labels = exchange::pseudo_hard_labels(&scores, t_ws)?;
        let ws_loss = match ws::train_ws_epoch(
            &mut scorer,
            &mut adam,
            data,
            &labels,
            bags_per_epoch,
            cfg.bag_size,
            &loss_cfg,
            &mut bags,
        ) {
            Ok(loss) => loss,
            Err(Error::EmptyPool(_)) => {
                collapsed = true;
                loops.push(LoopRecord { loop_index, wocc_loss, ws_loss: None, auc_wocc: None, auc_ws: None });
                break;
            }
            Err(e) => return Err(e),
        };

        let probs = scorer.probabilities(data)?;
        w = labels_from_scorer(cfg, data, &probs, t_ws)?;
        let metrics = observer.on_loop(&LoopEvent {
            module,
            loop_index,
            t_ws,
            wocc_loss,
            ws_loss,
            wocc_scores: &scores,
            ws_probabilities: &probs,
        });
        loops.push(LoopRecord { loop_index, wocc_loss, ws_loss, auc_wocc: metrics.auc_wocc, auc_ws: metrics.auc_ws });
    }

    Ok(ModuleResult {
        module,
        t_ws,
        selected_sets,
        loops,
        final_wocc: final_wocc.expect("loops_per_module >= 1"),
        final_ws: scorer,
        collapsed,
    })
}

/// The repeating procedure, one module at a time.
#[derive(Debug)]
pub struct Pipeline<'a> {
    data: &'a TrainingData,
    record: RunRecord,
    consensus: Option<Vec<usize>>,
}

impl<'a> Pipeline<'a> {
    pub fn new(cfg: RunConfig, data: &'a TrainingData) -> Result<Self> {
        cfg.validate()?;
        let t1 = initial_threshold(cfg.r_percent, data.n_snippets());
        let record = RunRecord {
            format_version: RUN_RECORD_VERSION,
            config: cfg,
            modules: Vec::new(),
            thresholds: alloc::vec![t1],
            stop_reason: None,
        };
        Ok(Self { data, record, consensus: None })
    }

    /// Continues from a checkpoint written at a module boundary.
    pub fn resume(record: RunRecord, data: &'a TrainingData) -> Result<Self> {
        record.config.validate()?;
        if record.format_version != RUN_RECORD_VERSION {
            return Err(Error::InvalidResume(alloc::format!(
                "run record version {} unsupported (expected {RUN_RECORD_VERSION})",
                record.format_version
            )));
        }
        if record.thresholds.len() != record.modules.len() + 1 {
            return Err(Error::InvalidResume(alloc::format!(
                "{} thresholds for {} modules",
                record.thresholds.len(),
                record.modules.len()
            )));
        }
        let consensus = intersection_of(record.modules.iter().flat_map(|m| m.selected_sets.iter()));
        if let Some(c) = &consensus {
            if c.len() != *record.thresholds.last().unwrap() {
                return Err(Error::InvalidResume("threshold history disagrees with selected sets".into()));
            }
        }
        Ok(Self { data, record, consensus })
    }

    pub fn record(&self) -> &RunRecord {
        &self.record
    }

    pub fn into_record(self) -> RunRecord {
        self.record
    }

    pub fn is_finished(&self) -> bool {
        self.record.stop_reason.is_some()
    }

    /// Runs the next module; returns the stop reason once the run ends.
    pub fn step_module(&mut self, observer: &mut dyn LoopObserver) -> Result<Option<StopReason>> {
        if let Some(reason) = self.record.stop_reason {
            return Ok(Some(reason));
        }
        let cfg = &self.record.config;
        let module = self.record.modules.len() + 1;
        let t_ws = *self.record.thresholds.last().expect("non-empty history");
        let w = match self.record.modules.last() {
            None => initial_soft_labels(cfg, self.data),
            Some(prev) => {
                let probs = prev.final_ws.probabilities(self.data)?;
                labels_from_scorer(cfg, self.data, &probs, t_ws)?
            }
        };
        let result =
            run_module(cfg, self.data, w, t_ws, module, ModuleRngs::for_module(cfg.master_seed, module), observer)?;

        let consensus = result
            .selected_sets
            .iter()
            .fold(self.consensus.take(), |acc, s| {
                Some(match acc {
                    None => s.0.clone(),
                    Some(a) => intersect(&a, &s.0),
                })
            })
            .unwrap_or_default();
        let next = consensus.len();
        self.consensus = Some(consensus);
        let collapsed = result.collapsed;
        self.record.modules.push(result);
        self.record.thresholds.push(next);

        let history = &self.record.thresholds;
        let reason = if collapsed || next == 0 {
            Some(StopReason::ThresholdCollapsed)
        } else if history.len() >= 3 && should_stop(history, cfg.q_percent) {
            Some(StopReason::CriterionMet)
        } else if module >= cfg.max_modules {
            Some(StopReason::MaxModules)
        } else if should_stop(history, cfg.q_percent) {
            Some(StopReason::CriterionMet)
        } else {
            None
        };
        self.record.stop_reason = reason;
        Ok(reason)
    }

    pub fn run(mut self, observer: &mut dyn LoopObserver) -> Result<RunRecord> {
        while self.step_module(observer)?.is_none() {}
        Ok(self.record)
    }
}

/// Full pipeline without an observer.
pub fn run_pipeline(cfg: &RunConfig, data: &TrainingData) -> Result<RunRecord> {
    Pipeline::new(cfg.clone(), data)?.run(&mut ())
}

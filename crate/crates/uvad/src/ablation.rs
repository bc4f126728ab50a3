//! Paired soft-label / hard-label runs over the first modules.

use anyhow::Result;
use uvad_core::config::{LabelMode, RunConfig};
use uvad_core::dataset::Dataset;
use uvad_core::eval::GroundTruthEvaluator;
use uvad_core::orchestrator::{Pipeline, RunRecord};

use crate::report::{ablation_rows, std_dev, AblationRow};

/// Modules compared by the ablation.
pub const ABLATION_MODULES: usize = 2;

#[derive(Debug, Clone)]
pub struct AblationOutcome {
    pub soft: RunRecord,
    pub hard: RunRecord,
    pub rows: Vec<AblationRow>,
    /// Std of per-loop scorer AUC, soft-label run.
    pub soft_ws_std: Option<f64>,
    pub hard_ws_std: Option<f64>,
}

fn per_loop_ws_auc(record: &RunRecord) -> Vec<f64> {
    record.modules.iter().flat_map(|m| m.loops.iter().filter_map(|l| l.auc_ws)).collect()
}

/// Runs both label modes with per-loop evaluation. `max_modules` is capped at
/// [`ABLATION_MODULES`]; everything else comes from `cfg`.
pub fn run_ablation(cfg: &RunConfig, dataset: &Dataset) -> Result<AblationOutcome> {
    let run = |mode: LabelMode| -> Result<RunRecord> {
        let mut c = cfg.clone();
        c.label_mode = mode;
        c.max_modules = c.max_modules.min(ABLATION_MODULES);
        let mut eval = GroundTruthEvaluator::new(dataset.ground_truth());
        Ok(Pipeline::new(c, dataset.training())?.run(&mut eval)?)
    };
    let soft = run(LabelMode::Soft)?;
    let hard = run(LabelMode::Hard)?;
    let mut rows = ablation_rows("soft", &soft);
    rows.extend(ablation_rows("hard", &hard));
    Ok(AblationOutcome {
        soft_ws_std: std_dev(&per_loop_ws_auc(&soft)),
        hard_ws_std: std_dev(&per_loop_ws_auc(&hard)),
        soft,
        hard,
        rows,
    })
}

//! On-disk layout of a training run.
//!
//! ```text
//! <run>/run_record.json          thresholds, selected sets, loop metrics
//! <run>/config.cfg               effective configuration
//! <run>/modules/module_01_wocc.json
//! <run>/modules/module_01_ws.json
//! <run>/metrics.csv              written by `eval`
//! <run>/ablation.csv             written by `ablate`
//! <run>/*.svg                    written by `report`
//! ```
//!
//! The record is rewritten after every module, so a run can be resumed from
//! any module boundary.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use uvad_core::orchestrator::{LoopRecord, ModuleResult, RunRecord, SelectedSet, StopReason};
use uvad_core::wocc::DensityModel;
use uvad_core::ws::ScorerModel;
use uvad_core::RunConfig;

pub const RECORD_FILE: &str = "run_record.json";
pub const CONFIG_FILE: &str = "config.cfg";
pub const MODULE_DIR: &str = "modules";
pub const METRICS_FILE: &str = "metrics.csv";
pub const ABLATION_FILE: &str = "ablation.csv";

#[derive(Serialize, Deserialize)]
struct ModuleEntry {
    module: usize,
    t_ws: usize,
    collapsed: bool,
    wocc_model: String,
    ws_model: String,
    loops: Vec<LoopRecord>,
    selected_sets: Vec<SelectedSet>,
}

#[derive(Serialize, Deserialize)]
struct RecordFile {
    format_version: u32,
    stop_reason: Option<StopReason>,
    thresholds: Vec<usize>,
    config: RunConfig,
    modules: Vec<ModuleEntry>,
}

fn model_names(module: usize) -> (String, String) {
    (format!("{MODULE_DIR}/module_{module:02}_wocc.json"), format!("{MODULE_DIR}/module_{module:02}_ws.json"))
}

/// Writes via a temporary file and a rename so readers never see a partial
/// file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))
}

fn to_json<T: Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializable");
    s.push(b'\n');
    s
}

pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let dir = Self::new(root);
        std::fs::create_dir_all(dir.root.join(MODULE_DIR))
            .with_context(|| format!("creating {}", dir.root.display()))?;
        Ok(dir)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn has_record(&self) -> bool {
        self.path(RECORD_FILE).is_file()
    }

    /// Writes model files for modules not yet on disk, then the record.
    pub fn save(&self, record: &RunRecord) -> Result<()> {
        std::fs::create_dir_all(self.root.join(MODULE_DIR))?;
        let mut entries = Vec::with_capacity(record.modules.len());
        for m in &record.modules {
            let (wocc, ws) = model_names(m.module);
            write_atomic(&self.path(&wocc), &to_json(&m.final_wocc))?;
            write_atomic(&self.path(&ws), &to_json(&m.final_ws))?;
            entries.push(ModuleEntry {
                module: m.module,
                t_ws: m.t_ws,
                collapsed: m.collapsed,
                wocc_model: wocc,
                ws_model: ws,
                loops: m.loops.clone(),
                selected_sets: m.selected_sets.clone(),
            });
        }
        let file = RecordFile {
            format_version: record.format_version,
            stop_reason: record.stop_reason,
            thresholds: record.thresholds.clone(),
            config: record.config.clone(),
            modules: entries,
        };
        write_atomic(&self.path(CONFIG_FILE), crate::config_file::render(&record.config).as_bytes())?;
        write_atomic(&self.path(RECORD_FILE), &to_json(&file))
    }

    pub fn load(&self) -> Result<RunRecord> {
        let path = self.path(RECORD_FILE);
        if !path.is_file() {
            bail!("{} not found: run `uvad train` first", path.display());
        }
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let file: RecordFile = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let mut modules = Vec::with_capacity(file.modules.len());
        for e in file.modules {
            let read = |name: &str| -> Result<String> {
                std::fs::read_to_string(self.path(name)).with_context(|| format!("reading model file {name}"))
            };
            let final_wocc: DensityModel =
                serde_json::from_str(&read(&e.wocc_model)?).with_context(|| format!("parsing {}", e.wocc_model))?;
            let final_ws: ScorerModel =
                serde_json::from_str(&read(&e.ws_model)?).with_context(|| format!("parsing {}", e.ws_model))?;
            modules.push(ModuleResult {
                module: e.module,
                t_ws: e.t_ws,
                selected_sets: e.selected_sets,
                loops: e.loops,
                final_wocc,
                final_ws,
                collapsed: e.collapsed,
            });
        }
        Ok(RunRecord {
            format_version: file.format_version,
            config: file.config,
            modules,
            thresholds: file.thresholds,
            stop_reason: file.stop_reason,
        })
    }
}

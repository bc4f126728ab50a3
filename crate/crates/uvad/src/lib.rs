//! File formats, run directories, reports and the `uvad` command line on top
//! of `uvad-core`.

pub mod ablation;
pub mod cli;
pub mod config_file;
pub mod dataset_io;
pub mod report;
pub mod run_dir;
pub mod svg;

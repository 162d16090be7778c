//! Experiment orchestration: configuration, cell execution, CSV and
//! manifest output, and the comparison, lower-bound and verification
//! drivers behind the command-line tool.

mod compare;
mod config;
mod lower_bound;
mod run;
mod suite;

pub use compare::{compare, tabulate, CompareRow, CompareTable};
pub use config::{ExperimentConfig, MethodSpec, KEYS};
pub use lower_bound::{
    lower_bound_experiment, AdamwOutcome, BaselineOutcome, BaselineRun, LowerBoundConfig, LowerBoundReport, LowerFamily,
};
pub use run::{
    cell_csv, cells, csv_file_name, execute, fmt_f64, manifest, par_map, resolve_out_dir, run_cell, run_experiment,
    run_options, write_atomic, write_outputs, Cell, CellResult, CSV_COLUMNS, DEFAULT_OUT_DIR, OUT_DIR_ENV,
};
pub use suite::{verify_suite, VerifyOptions, VerifyOutcome, SUITE};

use crate::error::Result;

/// One point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: String,
    pub config: ExperimentConfig,
    pub table: CompareTable,
    pub results: Vec<CellResult>,
}

/// Rerun `base` once per value of `key`.
pub fn sweep(base: &ExperimentConfig, key: &str, values: &[String]) -> Result<Vec<SweepPoint>> {
    let mut out = Vec::new();
    for v in values {
        let mut cfg = base.clone();
        cfg.set(key, v, 0)?;
        let (table, results) = compare(&cfg)?;
        out.push(SweepPoint { value: v.clone(), config: cfg, table, results });
    }
    Ok(out)
}

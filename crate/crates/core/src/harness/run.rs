use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::config::{ExperimentConfig, MethodSpec};
use crate::error::{Error, Result};
use crate::framework::{
    run_conversion, run_conversion_quasar, LearnerSpec, RunOptions, RunRecord, Schedule, ScheduleKind,
};
use crate::optimizers::{run_optimizer, OptimizerSpec};
use crate::problems::{parse_problem, Problem, QuasarOracle, StochOracle};

/// Environment variable that overrides the configured output directory.
pub const OUT_DIR_ENV: &str = "GENLIP_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "genlip-out";

pub const CSV_COLUMNS: [&str; 9] = [
    "run_id",
    "seed",
    "k",
    "f_gap",
    "f_gap_avg_iterate",
    "step_norm",
    "effective_stepsize",
    "regret_running",
    "wall_ns",
];

/// One `(method, seed)` pair. `run_id` is the position in the cell list and
/// keys the random stream together with the seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub run_id: u64,
    pub method: MethodSpec,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub record: RunRecord,
}

/// Method-major list of cells.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for m in &cfg.methods {
        for &seed in &cfg.seeds {
            out.push(Cell { run_id: out.len() as u64, method: *m, seed });
        }
    }
    out
}

pub fn run_options(cfg: &ExperimentConfig, cell: &Cell) -> RunOptions {
    RunOptions {
        trace: cfg.trace,
        keep_vectors: false,
        target_eps: Some(cfg.target()),
        k_override: cfg.k,
        k_cap: cfg.k_max,
        wall_clock: cfg.wall_clock,
        seed: cell.seed,
        run_id: cell.run_id,
    }
}

/// Run a single cell on an already-parsed problem.
pub fn run_cell(cfg: &ExperimentConfig, problem: &Problem, cell: &Cell) -> Result<RunRecord> {
    let opts = run_options(cfg, cell);
    match cell.method {
        MethodSpec::Optimizer { kind, schedule } => {
            let spec = OptimizerSpec {
                kind,
                eps: cfg.eps,
                eta: cfg.eta,
                schedule: schedule.or(cfg.schedule.filter(|_| kind.uses_schedule())),
                c_hat: cfg.c_hat,
                delta: cfg.delta,
            };
            let oracle = StochOracle::new(problem.clone(), cfg.noise);
            run_optimizer(&spec, &oracle, &opts)
        }
        MethodSpec::Framework { learner, schedule } => {
            let oracle = StochOracle::new(problem.clone(), cfg.noise);
            let sched = Schedule::new(schedule, oracle.constants(), cfg.eps, cfg.c_hat, None)?;
            let spec = LearnerSpec { kind: learner, delta: cfg.delta };
            run_conversion(&oracle, spec, &sched, &opts)
        }
        MethodSpec::Quasar { learner } => {
            let oracle = QuasarOracle::new(problem.clone(), cfg.noise);
            let sched = Schedule::new(ScheduleKind::QuasarTwoStage, oracle.constants(), cfg.eps, cfg.c_hat, cfg.gamma)?;
            let spec = LearnerSpec { kind: learner, delta: cfg.delta };
            run_conversion_quasar(&oracle, spec, &sched, cfg.zeta, &opts)
        }
    }
}

/// Apply `f` to every item on up to `jobs` threads. Results come back in
/// input order whatever the interleaving.
pub fn par_map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });
    slots.into_inner().expect("workers finished").into_iter().map(|r| r.expect("every slot filled")).collect()
}

/// Run every cell. Fails on the first error in cell order; nothing is
/// written here.
pub fn execute(cfg: &ExperimentConfig) -> Result<Vec<CellResult>> {
    let problem = parse_problem(&cfg.problem)?;
    let cells = cells(cfg);
    let records = par_map(&cells, cfg.jobs, |c| run_cell(cfg, &problem, c));
    cells.into_iter().zip(records).map(|(cell, r)| r.map(|record| CellResult { cell, record })).collect()
}

/// Output directory: explicit flag, then the environment override, then the
/// config, then the default.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Shortest round-trip text, so identical values give identical bytes.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v:?}")
    }
}

fn sanitize(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect()
}

pub fn csv_file_name(cell: &Cell) -> String {
    format!("run{:03}_{}_seed{}.csv", cell.run_id, sanitize(&cell.method.id()), cell.seed)
}

fn record_lines(rec: &RunRecord) -> Vec<(String, String)> {
    let mut out = vec![
        ("steps".to_string(), rec.steps.to_string()),
        ("first_hit".to_string(), rec.first_hit.map_or("none".into(), |k| k.to_string())),
        ("final_gap".to_string(), fmt_f64(rec.final_gap)),
        ("min_gap".to_string(), fmt_f64(rec.min_gap)),
    ];
    if let Some(g) = rec.avg_gap {
        out.push(("avg_gap".into(), fmt_f64(g)));
    }
    if let Some(r) = rec.regret {
        out.push(("regret".into(), fmt_f64(r)));
    }
    if let Some(l) = rec.log_pi_final {
        out.push(("log_pi_final".into(), fmt_f64(l)));
    }
    for (name, v) in &rec.params {
        out.push((format!("param.{name}"), fmt_f64(*v)));
        if let Some(which) = name.strip_prefix("inv_alpha") {
            out.push((format!("param.alpha{which}"), fmt_f64(1.0 / v)));
        }
    }
    if !rec.rescale_events.is_empty() {
        out.push(("rescale_events".into(), rec.rescale_events.len().to_string()));
    }
    out
}

/// CSV text of one cell: `# key = value` header lines, the column row, then
/// one row per traced iteration.
pub fn cell_csv(cfg: &ExperimentConfig, res: &CellResult) -> String {
    let mut s = String::new();
    for (k, v) in cfg.echo() {
        let _ = writeln!(s, "# {k} = {v}");
    }
    let _ = writeln!(s, "# method = {}", res.cell.method.id());
    let _ = writeln!(s, "# run_id = {}", res.cell.run_id);
    let _ = writeln!(s, "# seed = {}", res.cell.seed);
    for (k, v) in record_lines(&res.record) {
        let _ = writeln!(s, "# {k} = {v}");
    }
    s.push_str(&CSV_COLUMNS.join(","));
    s.push('\n');
    for r in &res.record.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            res.cell.run_id,
            res.cell.seed,
            r.k,
            fmt_f64(r.f_gap),
            fmt_f64(r.f_gap_avg_iterate),
            fmt_f64(r.step_norm),
            fmt_f64(r.effective_stepsize),
            fmt_f64(r.regret_running),
            r.wall_ns
        );
    }
    s
}

/// Flat `key = value` manifest from which every run can be reconstructed.
pub fn manifest(cfg: &ExperimentConfig, results: &[CellResult]) -> String {
    let mut s = String::new();
    for (k, v) in cfg.echo() {
        let _ = writeln!(s, "{k} = {v}");
    }
    let _ = writeln!(s, "cells = {}", results.len());
    for res in results {
        let p = format!("cell.{}", res.cell.run_id);
        let _ = writeln!(s, "{p}.method = {}", res.cell.method.id());
        let _ = writeln!(s, "{p}.seed = {}", res.cell.seed);
        let _ = writeln!(s, "{p}.file = {}", csv_file_name(&res.cell));
        for (k, v) in record_lines(&res.record) {
            let _ = writeln!(s, "{p}.{k} = {v}");
        }
    }
    s
}

/// Write `contents` to `path` through a temporary file in the same
/// directory, so readers never see a half-written file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::invalid(format!("`{}` is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Write one CSV per cell plus `manifest.txt`. Returns the paths written.
pub fn write_outputs(cfg: &ExperimentConfig, results: &[CellResult], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for res in results {
        let path = dir.join(csv_file_name(&res.cell));
        write_atomic(&path, &cell_csv(cfg, res))?;
        written.push(path);
    }
    let path = dir.join("manifest.txt");
    write_atomic(&path, &manifest(cfg, results))?;
    written.push(path);
    Ok(written)
}

/// `run`: execute everything, then write. Errors leave `dir` untouched.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<(Vec<CellResult>, Vec<PathBuf>)> {
    let results = execute(cfg)?;
    let files = write_outputs(cfg, &results, dir)?;
    Ok((results, files))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text).unwrap()
    }

    #[test]
    fn par_map_keeps_order() {
        let v: Vec<u64> = (0..50).collect();
        let out = par_map(&v, 4, |x| x * x);
        assert_eq!(out, v.iter().map(|x| x * x).collect::<Vec<_>>());
    }

    #[test]
    fn csv_rows_increase_and_jobs_do_not_matter() {
        let base =
            "problem = exp_inf{d=2}\nmethods = adamw_exp, sgd_const\nseeds = 0..2\nnoise = u-additive:0.5\nk = 300\n";
        let a = execute(&cfg(base)).unwrap();
        let b = execute(&cfg(&format!("{base}jobs = 3\n"))).unwrap();
        assert_eq!(a.len(), 6);
        for (x, y) in a.iter().zip(&b) {
            assert!(x.record.rows.windows(2).all(|w| w[0].k < w[1].k));
            assert_eq!(cell_csv(&cfg(base), x), cell_csv(&cfg(&format!("{base}jobs = 3\n")), y));
        }
    }

    #[test]
    fn failed_run_writes_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("out");
        let err = run_experiment(&cfg("problem = exp_inf\neps = 0\n"), &out).unwrap_err();
        assert!(matches!(err, Error::Regime(_)), "{err}");
        assert!(!out.exists());
    }

    #[test]
    fn manifest_lists_derived_constants() {
        let c = cfg("problem = lower:sgd_I\nmethods = adamw_exp:two_stage, sgd_const\nk = 50\n");
        let res = execute(&c).unwrap();
        let m = manifest(&c, &res);
        for key in [
            "cell.0.param.T",
            "cell.0.param.S",
            "cell.0.param.K",
            "cell.0.param.alpha1",
            "cell.0.param.alpha2",
            "cell.0.param.F",
            "cell.0.param.C_hat",
            "cell.1.param.eta",
        ] {
            assert!(m.contains(&format!("{key} = ")), "{key} missing:\n{m}");
        }
    }
}

use std::fmt::Write as _;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::run::{execute, CellResult};
use crate::error::Result;

/// One method's line in a comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub method: String,
    /// Iteration count the method's own theory derives for `eps`.
    pub k_theory: f64,
    /// Iterations actually run (after overrides and caps).
    pub k_run: u64,
    /// Median over seeds of the first iteration with gap `<= target`;
    /// `None` when at least half of the seeds never got there.
    pub median_hit: Option<u64>,
    pub hits: Vec<Option<u64>>,
    pub median_final_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareTable {
    pub problem: String,
    pub target: f64,
    /// Sorted by median iterations-to-target, misses last.
    pub rows: Vec<CompareRow>,
}

fn median_f64(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Lower median with misses ranked above every hit.
fn median_hit(hits: &[Option<u64>]) -> Option<u64> {
    let mut v: Vec<u64> = hits.iter().map(|h| h.unwrap_or(u64::MAX)).collect();
    v.sort_unstable();
    v.get((v.len().max(1) - 1) / 2).copied().filter(|&k| k != u64::MAX)
}

pub fn tabulate(cfg: &ExperimentConfig, results: &[CellResult]) -> CompareTable {
    let mut rows = Vec::new();
    for m in &cfg.methods {
        let cells: Vec<&CellResult> = results.iter().filter(|r| r.cell.method == *m).collect();
        let hits: Vec<Option<u64>> = cells.iter().map(|r| r.record.first_hit).collect();
        let first = cells.first().map(|r| &r.record);
        rows.push(CompareRow {
            method: m.id(),
            k_theory: first.and_then(|r| r.param("K")).unwrap_or(f64::NAN),
            k_run: first.map_or(0, |r| r.steps),
            median_hit: median_hit(&hits),
            hits,
            median_final_gap: median_f64(cells.iter().map(|r| r.record.final_gap).collect()),
        });
    }
    rows.sort_by_key(|r| r.median_hit.unwrap_or(u64::MAX));
    CompareTable { problem: cfg.problem.clone(), target: cfg.target(), rows }
}

/// `compare`: run every cell and rank methods by iterations-to-target.
pub fn compare(cfg: &ExperimentConfig) -> Result<(CompareTable, Vec<CellResult>)> {
    let results = execute(cfg)?;
    Ok((tabulate(cfg, &results), results))
}

impl CompareTable {
    pub fn row(&self, method: &str) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "problem {}  target {}", self.problem, self.target);
        let _ = writeln!(
            s,
            "{:<28} {:>14} {:>12} {:>12} {:>14}",
            "method", "median_iters", "K_theory", "K_run", "median_gap"
        );
        for r in &self.rows {
            let hit = r.median_hit.map_or("not reached".to_string(), |k| k.to_string());
            let _ = writeln!(
                s,
                "{:<28} {:>14} {:>12} {:>12} {:>14.4e}",
                r.method, hit, r.k_theory, r.k_run, r.median_final_gap
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median_hit(&[Some(5), None, Some(3)]), Some(5));
        assert_eq!(median_hit(&[None, None, Some(3)]), None);
        assert_eq!(median_hit(&[Some(4), Some(2)]), Some(2));
        assert_eq!(median_f64(vec![3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn single_method_gives_one_row() {
        let cfg = ExperimentConfig::parse("problem = exp_inf\nmethods = adamw_exp\nseeds = 0..2\n").unwrap();
        let (t, _) = compare(&cfg).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0].hits.len(), 3);
        assert!(t.to_text().contains("adamw_exp"));
    }
}

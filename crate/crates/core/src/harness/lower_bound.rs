use std::fmt::Write as _;

use serde::Serialize;

use super::run::par_map;
use crate::error::{Error, Result};
use crate::framework::{RunOptions, RunRecord, ScheduleKind, TracePolicy};
use crate::optimizers::{run_optimizer, OptimizerKind, OptimizerSpec};
use crate::problems::{ada_case_thresholds, make_lower_bound, sgd_case_threshold, LowerKind, NoiseModel, StochOracle};

/// Which lower-bound construction supplies the instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LowerFamily {
    /// `sgd_I`, `sgd_II`; needs `R G1 >= 8`.
    Sgd,
    /// `ada_I`, `ada_II`, `ada_III`; needs `R G1 >= 32`.
    AdaGrad,
}

impl LowerFamily {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sgd" => Some(LowerFamily::Sgd),
            "adagrad" => Some(LowerFamily::AdaGrad),
            _ => None,
        }
    }

    pub fn instances(self) -> &'static [LowerKind] {
        match self {
            LowerFamily::Sgd => &[LowerKind::SgdI, LowerKind::SgdII],
            LowerFamily::AdaGrad => &[LowerKind::AdaI, LowerKind::AdaII, LowerKind::AdaIII],
        }
    }

    /// Stepsize boundaries between the construction's cases.
    pub fn thresholds(self, radius: f64, g0: f64, g1: f64) -> (f64, f64) {
        match self {
            LowerFamily::Sgd => {
                let t = sgd_case_threshold(radius, g0, g1);
                (t, t)
            }
            LowerFamily::AdaGrad => ada_case_thresholds(radius, g1),
        }
    }

    /// Case of the construction that a given `eta` falls in.
    pub fn case(self, eta: f64, radius: f64, g0: f64, g1: f64) -> &'static str {
        let (lo, hi) = self.thresholds(radius, g0, g1);
        match self {
            LowerFamily::Sgd if eta > lo => "I",
            LowerFamily::Sgd => "II",
            LowerFamily::AdaGrad if eta >= hi => "I",
            LowerFamily::AdaGrad if eta >= lo => "II",
            LowerFamily::AdaGrad => "III",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundConfig {
    pub family: LowerFamily,
    pub radius: f64,
    pub g0: f64,
    pub g1: f64,
    pub eps: f64,
    pub seeds: Vec<u64>,
    /// Constant-stepsize methods swept over the `eta` grid.
    pub baselines: Vec<OptimizerKind>,
    pub grid_points: usize,
    /// The grid spans the case thresholds widened by this many decades on
    /// each side.
    pub grid_decades: f64,
    /// Baselines get `budget_factor` times the AdamW `K` of the instance.
    pub budget_factor: u64,
    /// Hard cap on any baseline run.
    pub k_max: Option<u64>,
    pub noise: NoiseModel,
    pub c_hat: f64,
    pub trace: TracePolicy,
    pub jobs: usize,
}

impl LowerBoundConfig {
    pub fn new(family: LowerFamily, radius: f64, g0: f64, g1: f64, eps: f64) -> Self {
        Self {
            family,
            radius,
            g0,
            g1,
            eps,
            seeds: (0..20).collect(),
            baselines: match family {
                LowerFamily::Sgd => vec![OptimizerKind::SgdConst],
                LowerFamily::AdaGrad => vec![OptimizerKind::AdagradNorm],
            },
            grid_points: 10,
            grid_decades: 2.0,
            budget_factor: 10,
            k_max: None,
            noise: NoiseModel::Deterministic,
            c_hat: 1.0,
            trace: TracePolicy::LogSpaced(20),
            jobs: 1,
        }
    }

    /// Log-spaced `eta` values over `[lo 10^-w, hi 10^w]`.
    pub fn eta_grid(&self) -> Vec<f64> {
        let (lo, hi) = self.family.thresholds(self.radius, self.g0, self.g1);
        let (a, b) = ((lo.ln() - self.grid_decades * 10f64.ln()), (hi.ln() + self.grid_decades * 10f64.ln()));
        let n = self.grid_points.max(1);
        if n == 1 {
            return vec![(0.5 * (a + b)).exp()];
        }
        (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
    }
}

/// Clipped AdamW on one instance, all seeds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdamwOutcome {
    pub instance: String,
    pub k: u64,
    pub mean_final_gap: f64,
    pub hits: Vec<Option<u64>>,
    /// `mean_final_gap <= eps`.
    pub reached: bool,
}

/// One baseline at one `eta` on one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineRun {
    pub instance: String,
    pub budget: u64,
    /// First hit of any seed.
    pub first_hit: Option<u64>,
    pub min_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineOutcome {
    pub method: String,
    pub eta: f64,
    pub case: String,
    pub runs: Vec<BaselineRun>,
    /// Some instance of the family defeats this `eta` within its budget.
    pub fails: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerBoundReport {
    pub family: LowerFamily,
    pub radius: f64,
    pub g0: f64,
    pub g1: f64,
    pub eps: f64,
    pub thresholds: (f64, f64),
    pub adamw: Vec<AdamwOutcome>,
    pub baselines: Vec<BaselineOutcome>,
    /// `(label, record)` for every run, AdamW first.
    #[serde(skip)]
    pub records: Vec<(String, RunRecord)>,
}

impl LowerBoundReport {
    pub fn adamw_reaches_everywhere(&self) -> bool {
        self.adamw.iter().all(|a| a.reached)
    }

    /// Every `eta` of `method` is defeated by some instance.
    pub fn baseline_always_fails(&self, method: &str) -> bool {
        self.baselines.iter().filter(|b| b.method == method).all(|b| b.fails)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "family {:?}  R {}  G0 {}  G1 {}  eps {}  case thresholds {:.4e} / {:.4e}",
            self.family, self.radius, self.g0, self.g1, self.eps, self.thresholds.0, self.thresholds.1
        );
        for a in &self.adamw {
            let hits: Vec<String> = a.hits.iter().map(|h| h.map_or("-".into(), |k| k.to_string())).collect();
            let _ = writeln!(
                s,
                "adamw_exp:two_stage on {}: K {}  mean final gap {:.4e}  reached {}  first hits [{}]",
                a.instance,
                a.k,
                a.mean_final_gap,
                a.reached,
                hits.join(" ")
            );
        }
        for b in &self.baselines {
            let runs: Vec<String> = b
                .runs
                .iter()
                .map(|r| {
                    format!(
                        "{}: {} (budget {}, min gap {:.3e})",
                        r.instance,
                        r.first_hit.map_or("not reached".into(), |k| format!("hit at {k}")),
                        r.budget,
                        r.min_gap
                    )
                })
                .collect();
            let _ = writeln!(
                s,
                "{} eta {:.4e} case {}: {}  -> {}",
                b.method,
                b.eta,
                b.case,
                runs.join("; "),
                if b.fails { "fails" } else { "reaches eps" }
            );
        }
        s
    }
}

struct Job {
    label: String,
    instance: usize,
    spec: OptimizerSpec,
    seed: u64,
    run_id: u64,
    k: Option<u64>,
}

/// Run clipped AdamW (two-stage schedule) and the baselines on every
/// instance of the family and report who reaches `eps`.
pub fn lower_bound_experiment(cfg: &LowerBoundConfig) -> Result<LowerBoundReport> {
    if cfg.seeds.is_empty() {
        return Err(Error::invalid("lower-bound experiment needs at least one seed"));
    }
    let oracles = cfg
        .family
        .instances()
        .iter()
        .map(|&kind| {
            make_lower_bound(kind, cfg.radius, cfg.g0, cfg.g1, cfg.eps).map(|p| StochOracle::new(p, cfg.noise))
        })
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<&str> = cfg.family.instances().iter().map(|k| k.id()).collect();
    let opts = |job: &Job| RunOptions {
        trace: cfg.trace,
        keep_vectors: false,
        target_eps: Some(cfg.eps),
        k_override: job.k,
        k_cap: None,
        wall_clock: false,
        seed: job.seed,
        run_id: job.run_id,
    };

    let mut adamw_spec = OptimizerSpec::new(OptimizerKind::AdamwExp, cfg.eps).with_schedule(ScheduleKind::TwoStage);
    adamw_spec.c_hat = cfg.c_hat;
    let mut jobs = Vec::new();
    for (i, name) in names.iter().enumerate() {
        for &seed in &cfg.seeds {
            jobs.push(Job {
                label: format!("adamw_exp:two_stage/{name}"),
                instance: i,
                spec: adamw_spec.clone(),
                seed,
                run_id: jobs.len() as u64,
                k: None,
            });
        }
    }
    let adamw_records = par_map(&jobs, cfg.jobs, |j| run_optimizer(&j.spec, &oracles[j.instance], &opts(j)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut adamw = Vec::new();
    let mut k_adamw = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let recs: Vec<&RunRecord> =
            adamw_records.iter().zip(&jobs).filter(|(_, j)| j.instance == i).map(|(r, _)| r).collect();
        let mean = recs.iter().map(|r| r.final_gap).sum::<f64>() / recs.len() as f64;
        let k = recs[0].steps;
        k_adamw.push(k);
        adamw.push(AdamwOutcome {
            instance: name.to_string(),
            k,
            mean_final_gap: mean,
            hits: recs.iter().map(|r| r.first_hit).collect(),
            reached: mean <= cfg.eps,
        });
    }
    let mut records: Vec<(String, RunRecord)> = jobs.iter().map(|j| j.label.clone()).zip(adamw_records).collect();

    let grid = cfg.eta_grid();
    let budget = |i: usize| {
        let b = k_adamw[i].saturating_mul(cfg.budget_factor);
        cfg.k_max.map_or(b, |c| b.min(c))
    };
    let first_id = records.len() as u64;
    let mut bjobs = Vec::new();
    for &kind in &cfg.baselines {
        for &eta in &grid {
            for (i, name) in names.iter().enumerate() {
                for &seed in &cfg.seeds {
                    bjobs.push(Job {
                        label: format!("{}:eta={eta:e}/{name}", kind.id()),
                        instance: i,
                        spec: OptimizerSpec::new(kind, cfg.eps).with_eta(eta),
                        seed,
                        run_id: first_id + bjobs.len() as u64,
                        k: Some(budget(i)),
                    });
                }
            }
        }
    }
    let brecords = par_map(&bjobs, cfg.jobs, |j| run_optimizer(&j.spec, &oracles[j.instance], &opts(j)))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut baselines = Vec::new();
    let mut it = bjobs.iter().zip(brecords.iter());
    for &kind in &cfg.baselines {
        for &eta in &grid {
            let mut runs = Vec::new();
            for (i, name) in names.iter().enumerate() {
                let mut first_hit: Option<u64> = None;
                let mut min_gap = f64::INFINITY;
                for _ in &cfg.seeds {
                    let (_, r) = it.next().expect("one record per job");
                    if let Some(h) = r.first_hit {
                        first_hit = Some(first_hit.map_or(h, |f| f.min(h)));
                    }
                    min_gap = min_gap.min(r.min_gap);
                }
                runs.push(BaselineRun { instance: name.to_string(), budget: budget(i), first_hit, min_gap });
            }
            baselines.push(BaselineOutcome {
                method: kind.id().into(),
                eta,
                case: cfg.family.case(eta, cfg.radius, cfg.g0, cfg.g1).into(),
                fails: runs.iter().any(|r| r.first_hit.is_none()),
                runs,
            });
        }
    }
    records.extend(bjobs.iter().map(|j| j.label.clone()).zip(brecords));

    Ok(LowerBoundReport {
        family: cfg.family,
        radius: cfg.radius,
        g0: cfg.g0,
        g1: cfg.g1,
        eps: cfg.eps,
        thresholds: cfg.family.thresholds(cfg.radius, cfg.g0, cfg.g1),
        adamw,
        baselines,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_brackets_the_threshold() {
        let cfg = LowerBoundConfig::new(LowerFamily::Sgd, 1.0, 1.0, 8.0, 0.1);
        let g = cfg.eta_grid();
        let t = sgd_case_threshold(1.0, 1.0, 8.0);
        assert_eq!(g.len(), 10);
        assert!((g[0] / (t / 100.0) - 1.0).abs() < 1e-12);
        assert!((g[9] / (t * 100.0) - 1.0).abs() < 1e-12);
        assert_eq!(g.iter().filter(|&&e| cfg.family.case(e, 1.0, 1.0, 8.0) == "I").count(), 5);
    }

    #[test]
    fn regime_violation_surfaces() {
        let cfg = LowerBoundConfig::new(LowerFamily::AdaGrad, 1.0, 1.0, 8.0, 0.1);
        assert!(matches!(lower_bound_experiment(&cfg), Err(Error::Regime(_))));
    }

    #[test]
    fn small_run_reports_every_cell() {
        let mut cfg = LowerBoundConfig::new(LowerFamily::Sgd, 1.0, 1.0, 8.0, 0.1);
        cfg.seeds = vec![0, 1];
        cfg.grid_points = 3;
        cfg.budget_factor = 1;
        cfg.trace = TracePolicy::Last;
        let rep = lower_bound_experiment(&cfg).unwrap();
        assert_eq!(rep.adamw.len(), 2);
        assert_eq!(rep.baselines.len(), 3);
        assert_eq!(rep.records.len(), 2 * 2 + 3 * 2 * 2);
        assert!(rep.adamw_reaches_everywhere());
        // the largest eta is deep in Case I: SGD oscillates on sgd_I
        let top = rep.baselines.last().unwrap();
        assert_eq!(top.case, "I");
        assert!(top.fails && top.runs[0].first_hit.is_none());
    }
}

//! Direct implementations of the baselines and of the clipped AdamW / LeonW
//! pseudocode. Every method starts at `x_0 = 0` and produces a [`RunRecord`]
//! of the same shape as the conversion framework.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::framework::{Clock, RunOptions, RunRecord, Schedule, ScheduleKind, TraceRow};
use crate::numerics::{
    all_finite, clip_euclid, dist, mix, norm, norm_sq, project_ball_unchecked, ratio, scaled, SymMat,
};
use crate::online::{matrix_precond, DEFAULT_DELTA_PRECOND};
use crate::problems::StochOracle;
use crate::rng::RunRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OptimizerKind {
    GdConst,
    GdNormalized,
    GdPolyak,
    SgdConst,
    AdagradNorm,
    AdamwAvg,
    AdamwExp,
    AdamwDiag,
    LeonwDiag,
    LeonwMatrix,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 10] = [
        OptimizerKind::GdConst,
        OptimizerKind::GdNormalized,
        OptimizerKind::GdPolyak,
        OptimizerKind::SgdConst,
        OptimizerKind::AdagradNorm,
        OptimizerKind::AdamwAvg,
        OptimizerKind::AdamwExp,
        OptimizerKind::AdamwDiag,
        OptimizerKind::LeonwDiag,
        OptimizerKind::LeonwMatrix,
    ];

    pub fn id(self) -> &'static str {
        match self {
            OptimizerKind::GdConst => "gd_const",
            OptimizerKind::GdNormalized => "gd_normalized",
            OptimizerKind::GdPolyak => "gd_polyak",
            OptimizerKind::SgdConst => "sgd_const",
            OptimizerKind::AdagradNorm => "adagrad_norm",
            OptimizerKind::AdamwAvg => "adamw_avg",
            OptimizerKind::AdamwExp => "adamw_exp",
            OptimizerKind::AdamwDiag => "adamw_diag",
            OptimizerKind::LeonwDiag => "leonw_diag",
            OptimizerKind::LeonwMatrix => "leonw_matrix",
        }
    }

    pub fn from_id(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.id() == s)
    }

    /// Uses the exact subgradient instead of the stochastic oracle.
    pub fn is_deterministic(self) -> bool {
        matches!(self, OptimizerKind::GdConst | OptimizerKind::GdNormalized | OptimizerKind::GdPolyak)
    }

    /// Member of the AdamW/LeonW family driven by an `alpha` schedule.
    pub fn uses_schedule(self) -> bool {
        self.default_schedule().is_some()
    }

    pub fn default_schedule(self) -> Option<ScheduleKind> {
        match self {
            OptimizerKind::AdamwAvg => Some(ScheduleKind::Avg),
            OptimizerKind::AdamwExp => Some(ScheduleKind::ExpConst),
            OptimizerKind::AdamwDiag | OptimizerKind::LeonwDiag | OptimizerKind::LeonwMatrix => {
                Some(ScheduleKind::TwoStage)
            }
            _ => None,
        }
    }

    /// Reports the running average `(1/(k+1)) sum x_i`.
    fn averages(self) -> bool {
        matches!(self, OptimizerKind::GdConst | OptimizerKind::SgdConst | OptimizerKind::AdagradNorm)
    }
}

/// A method and its parameter overrides. Anything left `None` is derived
/// from the problem constants.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizerSpec {
    pub kind: OptimizerKind,
    /// Target accuracy used to derive `K` (and the schedule).
    pub eps: f64,
    /// Constant stepsize for `gd_const`/`sgd_const`; the numerator of the
    /// AdaGrad-Norm stepsize `eta / sqrt(sum |g_i|^2)`.
    pub eta: Option<f64>,
    pub schedule: Option<ScheduleKind>,
    pub c_hat: f64,
    /// Initial second moment of the preconditioned variants.
    pub delta: Option<f64>,
}

impl OptimizerSpec {
    pub fn new(kind: OptimizerKind, eps: f64) -> Self {
        Self { kind, eps, eta: None, schedule: None, c_hat: 1.0, delta: None }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = Some(eta);
        self
    }

    pub fn with_schedule(mut self, schedule: ScheduleKind) -> Self {
        self.schedule = Some(schedule);
        self
    }

    /// The schedule an AdamW-family run would use.
    pub fn make_schedule(&self, oracle: &StochOracle) -> Result<Option<Schedule>> {
        match self.schedule.or(self.kind.default_schedule()) {
            Some(kind) if self.kind.uses_schedule() => {
                if kind == ScheduleKind::QuasarTwoStage {
                    return Err(Error::invalid(format!(
                        "{} cannot use the quasar schedule; use the quasar conversion",
                        self.kind.id()
                    )));
                }
                Schedule::new(kind, oracle.constants(), self.eps, self.c_hat, None).map(Some)
            }
            _ => Ok(None),
        }
    }
}

/// Run `spec` on the oracle's problem.
pub fn run_optimizer(spec: &OptimizerSpec, oracle: &StochOracle, opts: &RunOptions) -> Result<RunRecord> {
    if !(spec.eps > 0.0) || !spec.eps.is_finite() {
        return Err(Error::regime(format!("eps > 0 fails (eps = {})", spec.eps)));
    }
    if let Some(eta) = spec.eta {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::invalid(format!("eta must be > 0, got {eta}")));
        }
    }
    match spec.make_schedule(oracle)? {
        Some(schedule) => run_adamw(spec, oracle, schedule, opts),
        None => run_projected(spec, oracle, opts),
    }
}

fn count(name: &str, v: f64) -> Result<u64> {
    if !v.is_finite() || !(0.0..=9.0e15).contains(&v) {
        return Err(Error::invalid(format!("{name} = {v:e} is not a usable iteration count")));
    }
    Ok(v.ceil() as u64)
}

fn diverged(step: u64, g: &[f64], reason: &str) -> Error {
    Error::Diverged { step: step as usize, grad_norm: norm(g), reason: reason.into() }
}

/// GD, its normalized and Polyak variants, SGD and AdaGrad-Norm: projected
/// (sub)gradient steps `x_{k+1} = P(x_k - eta_k g_k)`.
fn run_projected(spec: &OptimizerSpec, oracle: &StochOracle, opts: &RunOptions) -> Result<RunRecord> {
    let kind = spec.kind;
    let problem = oracle.problem();
    let c = problem.constants();
    let (r, eps, f) = (c.radius, spec.eps, c.max_gap);
    let (a0, a1, n0, n1) = if kind.is_deterministic() { (c.m0, c.m1, "M0", "M1") } else { (c.g0, c.g1, "G0", "G1") };
    let mut rec = RunRecord::new(kind.id(), opts.seed, opts.run_id, opts.target_eps);
    let log = |rec: &mut RunRecord, name: &str, v: f64| rec.params.push((name.to_string(), v));
    for (name, v) in [("R", r), (n0, a0), (n1, a1), ("F", f), ("eps", eps)] {
        log(&mut rec, name, v);
    }

    let k_theory = match kind {
        OptimizerKind::GdNormalized | OptimizerKind::GdPolyak => {
            4 * count("K", (r * a1).powi(2) + (r * a0 / eps).powi(2))?
        }
        // the stochastic theorems only give K up to constants; the
        // deterministic formula is the explicit instance
        _ => count("K", (r * a1).powi(2) * f / eps + (r * a0 / eps).powi(2))?,
    };
    log(&mut rec, "K", k_theory as f64);
    let k_max = opts.k_run(k_theory);
    log(&mut rec, "K_run", k_max as f64);

    let eta = match kind {
        OptimizerKind::GdConst | OptimizerKind::SgdConst => {
            let eta = match spec.eta {
                Some(e) => e,
                None => {
                    let inv = (2.0 * a1 * a1 * f).max(a0 * ((k_max + 1) as f64).sqrt() / r);
                    if !(inv > 0.0) || !inv.is_finite() {
                        return Err(Error::invalid(format!("derived 1/eta = {inv} is unusable")));
                    }
                    1.0 / inv
                }
            };
            log(&mut rec, "eta", eta);
            eta
        }
        OptimizerKind::AdagradNorm => {
            let eta = spec.eta.unwrap_or(r / 2f64.sqrt());
            log(&mut rec, "eta", eta);
            eta
        }
        _ => f64::NAN,
    };

    let d = problem.dim();
    let mut rng = RunRng::new(opts.seed, opts.run_id);
    let clock = Clock::start(opts.wall_clock);
    let mut x = vec![0.0; d];
    let mut x_sum = x.clone();
    let mut grad_sq = 0.0;
    let averaging = kind.averages();

    let gap0 = problem.gap(&x);
    rec.observe(0, gap0);
    if opts.trace.wants(0, k_max) {
        rec.rows.push(TraceRow {
            k: 0,
            f_gap: gap0,
            f_gap_avg_iterate: if averaging { gap0 } else { f64::NAN },
            step_norm: 0.0,
            effective_stepsize: f64::NAN,
            regret_running: f64::NAN,
            wall_ns: clock.ns(),
        });
    }
    if opts.keep_vectors {
        rec.x_history.push(x.clone());
    }
    let mut avg_gap = gap0;
    for k in 0..k_max {
        rng.start_iteration(k);
        let gap = problem.gap(&x);
        let g = if kind.is_deterministic() { problem.subgrad(&x) } else { oracle.sample(&x, &mut rng).grad };
        if !all_finite(&g) {
            return Err(diverged(k, &g, "non-finite gradient"));
        }
        let gn2 = norm_sq(&g);
        let step = match kind {
            OptimizerKind::GdNormalized => ratio(r, gn2.sqrt() * ((k_max + 1) as f64).sqrt()),
            OptimizerKind::GdPolyak => {
                if gn2 == 0.0 && gap > 0.0 {
                    return Err(diverged(k, &g, "zero subgradient at a point with positive gap"));
                }
                ratio(gap, gn2)
            }
            OptimizerKind::AdagradNorm => {
                grad_sq += gn2;
                ratio(eta, grad_sq.sqrt())
            }
            _ => eta,
        };
        let y: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - step * gi).collect();
        let x_new = project_ball_unchecked(&y, r);
        if !all_finite(&x_new) {
            return Err(diverged(k + 1, &g, "non-finite iterate"));
        }
        for (s, v) in x_sum.iter_mut().zip(&x_new) {
            *s += v;
        }
        let new_gap = problem.gap(&x_new);
        let reported = if averaging {
            let avg = scaled(&x_sum, 1.0 / (k + 2) as f64);
            avg_gap = problem.gap(&avg);
            new_gap.min(avg_gap)
        } else {
            new_gap
        };
        rec.observe(k + 1, reported);
        if opts.trace.wants(k + 1, k_max) {
            rec.rows.push(TraceRow {
                k: k + 1,
                f_gap: new_gap,
                f_gap_avg_iterate: if averaging { avg_gap } else { f64::NAN },
                step_norm: dist(&x_new, &x),
                effective_stepsize: step,
                regret_running: f64::NAN,
                wall_ns: clock.ns(),
            });
        }
        if opts.keep_vectors {
            rec.x_history.push(x_new.clone());
            rec.g_history.push(g);
        }
        x = x_new;
    }
    rec.steps = k_max;
    rec.final_gap = problem.gap(&x);
    rec.final_x = x;
    if averaging {
        rec.avg_x = Some(scaled(&x_sum, 1.0 / (k_max + 1) as f64));
        rec.avg_gap = Some(avg_gap);
    }
    Ok(rec)
}

/// First and second moments of the AdamW/LeonW family, normalized as in the
/// method definition (`m_k`, `v_k` rather than the conversion's sums).
enum Moments {
    /// Plain running sums of clipped AdamW.
    Sums {
        m: Vec<f64>,
        v: f64,
    },
    Scalar {
        m: Vec<f64>,
        v: f64,
    },
    Diag {
        m: Vec<f64>,
        v: Vec<f64>,
        leon: bool,
    },
    Matrix {
        m: Vec<f64>,
        v: SymMat,
    },
}

impl Moments {
    fn new(kind: OptimizerKind, d: usize, delta: f64) -> Self {
        match kind {
            OptimizerKind::AdamwAvg => Moments::Sums { m: vec![0.0; d], v: 0.0 },
            OptimizerKind::AdamwExp => Moments::Scalar { m: vec![0.0; d], v: 0.0 },
            OptimizerKind::AdamwDiag | OptimizerKind::LeonwDiag => {
                Moments::Diag { m: vec![0.0; d], v: vec![delta; d], leon: kind == OptimizerKind::LeonwDiag }
            }
            _ => Moments::Matrix { m: vec![0.0; d], v: SymMat::scaled_identity(d, delta) },
        }
    }

    /// The update direction `u` in `x_{k+1} = (1 - alpha) x_k - alpha R u`.
    fn direction(&self) -> Result<Vec<f64>> {
        match self {
            Moments::Sums { m, v } | Moments::Scalar { m, v } => {
                let sv = v.sqrt();
                clip_euclid(&m.iter().map(|mi| ratio(*mi, sv)).collect::<Vec<_>>())
            }
            Moments::Diag { m, v, leon } => Ok(m
                .iter()
                .zip(v)
                .map(
                    |(mi, vi)| {
                        if *leon {
                            ratio(*mi, (mi * mi + vi).sqrt())
                        } else {
                            ratio(*mi, vi.sqrt()).clamp(-1.0, 1.0)
                        }
                    },
                )
                .collect()),
            Moments::Matrix { m, v } => {
                let mut s = v.clone();
                s.add_outer(m, 1.0);
                Ok(matrix_precond(&s)?.mul_vec(m))
            }
        }
    }

    fn update(&mut self, g: &[f64], alpha: f64) {
        let b = 1.0 - alpha;
        match self {
            Moments::Sums { m, v } => {
                for (mi, gi) in m.iter_mut().zip(g) {
                    *mi += gi;
                }
                *v += norm_sq(g);
            }
            Moments::Scalar { m, v } => {
                for (mi, gi) in m.iter_mut().zip(g) {
                    *mi = b * *mi + alpha * gi;
                }
                *v = b * b * *v + alpha * alpha * norm_sq(g);
            }
            Moments::Diag { m, v, .. } => {
                for ((mi, vi), gi) in m.iter_mut().zip(v.iter_mut()).zip(g) {
                    *mi = b * *mi + alpha * gi;
                    *vi = b * b * *vi + alpha * alpha * gi * gi;
                }
            }
            Moments::Matrix { m, v } => {
                for (mi, gi) in m.iter_mut().zip(g) {
                    *mi = b * *mi + alpha * gi;
                }
                v.scale_in_place(b * b);
                v.add_outer(g, alpha * alpha);
            }
        }
    }

    /// `R alpha_k / sqrt(v_k)` for the scalar variants.
    fn effective_stepsize(&self, r: f64, alpha: f64, k: u64) -> f64 {
        match self {
            // v_k is a running sum; the normalized moment is v/k^2
            Moments::Sums { v, .. } => ratio(r * alpha * k as f64, v.sqrt()),
            Moments::Scalar { v, .. } => ratio(r * alpha, v.sqrt()),
            _ => f64::NAN,
        }
    }
}

/// Algorithms 1-4: `x_k = (1 - alpha_k) x_{k-1} - alpha_k R u(m_{k-1}, v_{k-1})`,
/// gradient drawn at `x_k`, moments decayed with `alpha_k`.
fn run_adamw(spec: &OptimizerSpec, oracle: &StochOracle, schedule: Schedule, opts: &RunOptions) -> Result<RunRecord> {
    let problem = oracle.problem();
    let r = problem.constants().radius;
    let d = problem.dim();
    let delta = spec.delta.unwrap_or(DEFAULT_DELTA_PRECOND);
    if !(delta >= 0.0) || !delta.is_finite() {
        return Err(Error::invalid(format!("delta must be >= 0, got {delta}")));
    }
    let k_max = opts.k_run(schedule.k);
    let mut rec = RunRecord::new(spec.kind.id(), opts.seed, opts.run_id, opts.target_eps);
    rec.params = schedule.derived.clone();
    rec.params.push(("K_run".into(), k_max as f64));
    if !matches!(spec.kind, OptimizerKind::AdamwAvg | OptimizerKind::AdamwExp) {
        rec.params.push(("delta".into(), delta));
    }

    let mut rng = RunRng::new(opts.seed, opts.run_id);
    let clock = Clock::start(opts.wall_clock);
    let mut moments = Moments::new(spec.kind, d, delta);
    let mut x = vec![0.0; d];
    let gap0 = problem.gap(&x);
    rec.observe(0, gap0);
    if opts.trace.wants(0, k_max) {
        rec.rows.push(TraceRow {
            k: 0,
            f_gap: gap0,
            f_gap_avg_iterate: f64::NAN,
            step_norm: 0.0,
            effective_stepsize: f64::NAN,
            regret_running: f64::NAN,
            wall_ns: clock.ns(),
        });
    }
    if opts.keep_vectors {
        rec.x_history.push(x.clone());
    }
    for k in 1..=k_max {
        rng.start_iteration(k);
        let alpha = schedule.alpha_at(k);
        let u = moments.direction()?;
        let x_new = mix(&x, &scaled(&u, -r), alpha);
        let g = oracle.sample(&x_new, &mut rng).grad;
        if !all_finite(&x_new) || !all_finite(&g) {
            return Err(diverged(k, &g, "non-finite iterate or gradient"));
        }
        moments.update(&g, alpha);
        let gap = problem.gap(&x_new);
        rec.observe(k, gap);
        if opts.trace.wants(k, k_max) {
            rec.rows.push(TraceRow {
                k,
                f_gap: gap,
                f_gap_avg_iterate: f64::NAN,
                step_norm: dist(&x_new, &x),
                effective_stepsize: moments.effective_stepsize(r, alpha, k),
                regret_running: f64::NAN,
                wall_ns: clock.ns(),
            });
        }
        if opts.keep_vectors {
            rec.x_history.push(x_new.clone());
            rec.g_history.push(g);
        }
        x = x_new;
    }
    rec.steps = k_max;
    rec.final_gap = problem.gap(&x);
    rec.final_x = x;
    rec.log_pi_final = Some(schedule.log_pi_at(k_max));
    rec.schedule = Some(schedule);
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::{run_conversion, LearnerSpec, TracePolicy};
    use crate::online::LearnerKind;
    use crate::problems::{make_exp_inf, make_lower_bound, make_norm_inf, DenseMatrix, LowerKind, NoiseModel};
    use crate::problems::{Objective, Problem};
    use proptest::prelude::*;
    use std::sync::Arc;

    #[derive(Debug)]
    struct Scaled(Problem, f64);

    impl Objective for Scaled {
        fn dim(&self) -> usize {
            self.0.dim()
        }

        fn value(&self, x: &[f64]) -> f64 {
            self.1 * self.0.value(x)
        }

        fn subgrad(&self, x: &[f64]) -> Vec<f64> {
            scaled(&self.0.subgrad(x), self.1)
        }
    }

    fn opts(k: u64, seed: u64) -> RunOptions {
        RunOptions { trace: TracePolicy::All, keep_vectors: true, k_override: Some(k), seed, ..Default::default() }
    }

    fn exp_oracle(noise: NoiseModel) -> StochOracle {
        let a = DenseMatrix::new(2, 2, vec![1.0, 0.5, -0.5, 1.0]).unwrap();
        let p = make_exp_inf(a, vec![0.3, -0.2], 1.5).unwrap();
        StochOracle::new(p, noise)
    }

    #[test]
    fn polyak_solves_shifted_abs_in_one_step() {
        let p = make_norm_inf(vec![0.5], 1.0, 0.0).unwrap();
        let o = StochOracle::new(p, NoiseModel::Deterministic);
        let rec = run_optimizer(&OptimizerSpec::new(OptimizerKind::GdPolyak, 0.1), &o, &opts(3, 0)).unwrap();
        assert_eq!(rec.x_history[1], vec![0.5]);
        assert_eq!(rec.rows[1].f_gap, 0.0);
        assert_eq!(rec.rows[1].effective_stepsize, 0.5);
        assert_eq!(rec.first_hit, None);
        assert_eq!(rec.min_gap, 0.0);
    }

    #[test]
    fn adagrad_first_step() {
        let o = exp_oracle(NoiseModel::Deterministic);
        let r = o.constants().radius;
        let rec = run_optimizer(&OptimizerSpec::new(OptimizerKind::AdagradNorm, 0.1), &o, &opts(2, 0)).unwrap();
        let g0 = o.problem().subgrad(&[0.0, 0.0]);
        let want = project_ball_unchecked(&scaled(&g0, -r / (2f64.sqrt() * norm(&g0))), r);
        assert!(dist(&rec.x_history[1], &want) < 1e-15);
        assert!((rec.rows[1].effective_stepsize - r / (2f64.sqrt() * norm(&g0))).abs() < 1e-15);
    }

    #[test]
    fn adamw_exp_first_step() {
        let o = exp_oracle(NoiseModel::Deterministic);
        let r = o.constants().radius;
        let spec = OptimizerSpec::new(OptimizerKind::AdamwExp, 0.1);
        let s = spec.make_schedule(&o).unwrap().unwrap();
        let a = s.alpha_at(2);
        let rec = run_optimizer(&spec, &o, &opts(2, 0)).unwrap();
        assert_eq!(rec.x_history[1], vec![0.0, 0.0]);
        let g1 = o.problem().subgrad(&[0.0, 0.0]);
        let want = scaled(&g1, -a * r / norm(&g1));
        assert!(dist(&rec.x_history[2], &want) < 1e-15);
    }

    #[test]
    fn sgd_oscillates_on_case_one_instance() {
        let p = make_lower_bound(LowerKind::SgdI, 1.0, 1.0, 8.0, 0.1).unwrap();
        let o = StochOracle::new(p, NoiseModel::Deterministic);
        let eta = 1.5 * crate::problems::sgd_case_threshold(1.0, 1.0, 8.0);
        let spec = OptimizerSpec::new(OptimizerKind::SgdConst, 0.1).with_eta(eta);
        let rec = run_optimizer(&spec, &o, &opts(1001, 0)).unwrap();
        let floor = (2f64).exp_m1() / 8.0;
        for (k, x) in rec.x_history.iter().enumerate().skip(1) {
            assert_eq!(x[0], if k % 2 == 1 { 1.0 } else { -1.0 });
        }
        assert!(rec.rows.iter().all(|r| r.f_gap.min(r.f_gap_avg_iterate) >= floor * (1.0 - 1e-9)));
    }

    #[test]
    fn polyak_rejects_flat_point_with_gap() {
        // x_0 = 0 is the minimizer but the declared f* is too low
        let p = make_norm_inf(vec![0.0], 1.0, 0.0).unwrap();
        let mut c = p.constants().clone();
        c.f_star = -1.0;
        let p = p.with_constants(c).unwrap();
        let o = StochOracle::new(p, NoiseModel::Deterministic);
        let err = run_optimizer(&OptimizerSpec::new(OptimizerKind::GdPolyak, 0.1), &o, &opts(3, 0)).unwrap_err();
        assert!(matches!(err, Error::Diverged { step: 0, .. }), "{err}");
    }

    #[test]
    fn normalized_steps_are_bounded() {
        let o = exp_oracle(NoiseModel::Deterministic);
        let r = o.constants().radius;
        let k = 400;
        let rec = run_optimizer(&OptimizerSpec::new(OptimizerKind::GdNormalized, 0.1), &o, &opts(k, 0)).unwrap();
        let bound = r / ((k + 1) as f64).sqrt();
        assert!(rec.rows.iter().all(|row| row.step_norm <= bound * (1.0 + 1e-12)));
    }

    #[test]
    fn gd_const_uses_theorem_stepsize() {
        let o = exp_oracle(NoiseModel::Deterministic);
        let c = o.constants().clone();
        let rec = run_optimizer(&OptimizerSpec::new(OptimizerKind::GdConst, 0.1), &o, &opts(50, 0)).unwrap();
        let inv = (2.0 * c.m1 * c.m1 * c.max_gap).max(c.m0 * 51f64.sqrt() / c.radius);
        assert_eq!(rec.param("eta"), Some(1.0 / inv));
        assert!(rec.avg_gap.is_some());
    }

    fn assert_same_iterates(a: &RunRecord, b: &RunRecord) {
        assert_eq!(a.x_history.len(), b.x_history.len());
        for (k, (xa, xb)) in a.x_history.iter().zip(&b.x_history).enumerate() {
            let scale = norm(xa).max(1e-12);
            assert!(dist(xa, xb) <= 1e-9 * scale, "k = {k}: {xa:?} vs {xb:?}");
        }
    }

    #[test]
    fn direct_loops_match_the_conversion() {
        let o = exp_oracle(NoiseModel::UAdditive { scale: 0.5 });
        let cases = [
            (OptimizerKind::AdamwAvg, LearnerKind::SoloScalar),
            (OptimizerKind::AdamwExp, LearnerKind::SoloScalar),
            (OptimizerKind::AdamwDiag, LearnerKind::SoloDiag),
            (OptimizerKind::LeonwDiag, LearnerKind::LeonDiag),
            (OptimizerKind::LeonwMatrix, LearnerKind::LeonMatrix),
        ];
        for (kind, learner) in cases {
            let spec = OptimizerSpec::new(kind, 0.1);
            let s = spec.make_schedule(&o).unwrap().unwrap();
            let o_run = opts(600, 11);
            let direct = run_optimizer(&spec, &o, &o_run).unwrap();
            let conv = run_conversion(&o, LearnerSpec::new(learner), &s, &o_run).unwrap();
            assert_same_iterates(&direct, &conv);
        }
    }

    #[test]
    fn adagrad_stepsizes_never_increase() {
        let o = exp_oracle(NoiseModel::VBernoulli);
        let rec = run_optimizer(&OptimizerSpec::new(OptimizerKind::AdagradNorm, 0.1), &o, &opts(500, 4)).unwrap();
        let steps: Vec<f64> = rec.rows.iter().skip(1).map(|r| r.effective_stepsize).collect();
        assert!(steps.windows(2).all(|w| w[1] <= w[0]));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn projected_iterates_stay_feasible(seed in 0u64..1000, kind in 0usize..5, eta in 1e-3f64..10.0) {
            let kind = OptimizerKind::ALL[kind];
            let o = exp_oracle(NoiseModel::UAdditive { scale: 1.0 });
            let r = o.constants().radius;
            let spec = OptimizerSpec::new(kind, 0.1).with_eta(eta);
            let rec = run_optimizer(&spec, &o, &opts(60, seed)).unwrap();
            prop_assert!(rec.x_history.iter().all(|x| norm(x) <= r + 1e-12));
        }

        #[test]
        fn adamw_exp_ignores_power_of_two_gradient_scale(seed in 0u64..1000, p in -20i32..20) {
            let base = exp_oracle(NoiseModel::Deterministic).problem().clone();
            let lam = 2f64.powi(p);
            // lam * f has gradients scaled by lam and the same minimizer
            let mut c = base.constants().clone();
            c.f_star *= lam;
            let scaled_p = Problem::new("scaled", Arc::new(Scaled(base.clone(), lam)), c).unwrap();
            let o1 = StochOracle::new(base, NoiseModel::Deterministic);
            let o2 = StochOracle::new(scaled_p, NoiseModel::Deterministic);
            let spec = OptimizerSpec::new(OptimizerKind::AdamwExp, 0.1);
            let s = spec.make_schedule(&o1).unwrap().unwrap();
            let run = opts(200, seed);
            let a1 = run_adamw(&spec, &o1, s.clone(), &run).unwrap();
            let a2 = run_adamw(&spec, &o2, s, &run).unwrap();
            prop_assert_eq!(a1.x_history, a2.x_history);
        }
    }
}

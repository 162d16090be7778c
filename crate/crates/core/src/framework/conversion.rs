use super::{Clock, RunOptions, RunRecord, Schedule, ScheduleKind, TraceRow};
use crate::error::{Error, Result};
use crate::numerics::{all_finite, dist, mix, norm, scaled};
use crate::online::{regret_eval, LearnerKind, LearnerState, RegretRecord};
use crate::problems::{Problem, QuasarOracle, StochOracle};
use crate::rng::RunRng;

/// Accumulator size that triggers renormalization of the gradient stream.
pub const RESCALE_THRESHOLD: f64 = 1e100;

/// How the point on the segment `[x_{k-1}, x_k]` is chosen in the quasar
/// conversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZetaMode {
    Uniform,
    Fixed(f64),
}

/// Learner choice for a conversion run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    /// `None` uses the learner's default.
    pub delta: Option<f64>,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind) -> Self {
        Self { kind, delta: None }
    }
}

/// Online-to-batch conversion with a standard `pi` recursion:
/// `x_k = (1 - alpha_k) x_{k-1} + alpha_k z_k`, learner fed
/// `alpha_k pi_k grad_xi f(x_k)`.
pub fn run_conversion(
    oracle: &StochOracle,
    learner: LearnerSpec,
    schedule: &Schedule,
    opts: &RunOptions,
) -> Result<RunRecord> {
    if schedule.kind == ScheduleKind::QuasarTwoStage {
        return Err(Error::invalid("quasar schedules run through run_conversion_quasar"));
    }
    let name = format!("framework:{}:{}", learner.kind.id(), schedule.kind.id());
    convert(oracle.problem(), learner, schedule, opts, name, |_, _, x, rng| Ok(oracle.sample(x, rng).grad))
}

/// Conversion for quasar-convex problems: the generalized gradient is taken at
/// a point drawn on the segment `[x_{k-1}, x_k]` in the direction
/// `x_k - x_{k-1}`.
pub fn run_conversion_quasar(
    oracle: &QuasarOracle,
    learner: LearnerSpec,
    schedule: &Schedule,
    zeta: ZetaMode,
    opts: &RunOptions,
) -> Result<RunRecord> {
    if schedule.kind != ScheduleKind::QuasarTwoStage {
        return Err(Error::invalid("run_conversion_quasar needs a quasar_two_stage schedule"));
    }
    let name = format!("framework:{}:{}", learner.kind.id(), schedule.kind.id());
    convert(oracle.problem(), learner, schedule, opts, name, |_, x_prev, x, rng| {
        let t = match zeta {
            ZetaMode::Uniform => rng.uniform(),
            ZetaMode::Fixed(t) => t,
        };
        let x_bar = mix(x_prev, x, t);
        let w: Vec<f64> = x.iter().zip(x_prev).map(|(a, b)| a - b).collect();
        Ok(oracle.sample_generalized_grad(&x_bar, &w, rng).grad)
    })
}

fn convert<G>(
    problem: &Problem,
    spec: LearnerSpec,
    schedule: &Schedule,
    opts: &RunOptions,
    method: String,
    mut grad: G,
) -> Result<RunRecord>
where
    G: FnMut(u64, &[f64], &[f64], &mut RunRng) -> Result<Vec<f64>>,
{
    let d = problem.dim();
    let radius = problem.constants().radius;
    let delta = spec.delta.unwrap_or(spec.kind.default_delta());
    let mut learner = LearnerState::with_delta(spec.kind, d, radius, delta)?;
    let mut regret = RegretRecord::new(d, false);
    let mut rng = RunRng::new(opts.seed, opts.run_id);
    let k_max = opts.k_run(schedule.k);

    let mut rec = RunRecord::new(method, opts.seed, opts.run_id, opts.target_eps);
    rec.params = schedule.derived.clone();
    rec.params.push(("K_run".into(), k_max as f64));
    rec.params.push(("delta".into(), delta));
    rec.schedule = Some(schedule.clone());

    let clock = Clock::start(opts.wall_clock);
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
            regret_running: 0.0,
            wall_ns: clock.ns(),
        });
    }
    if opts.keep_vectors {
        rec.x_history.push(x.clone());
    }
    let scalar_learner = matches!(spec.kind, LearnerKind::SoloScalar | LearnerKind::OgdAdaGrad);
    // gradients reach the learner as exp(ln(alpha_k pi_k) - offset) * g_hat
    let mut offset = 0.0;
    for k in 1..=k_max {
        rng.start_iteration(k);
        let alpha = schedule.alpha_at(k);
        let z = learner.z().to_vec();
        let x_new = mix(&x, &z, alpha);
        let g_hat = grad(k, &x, &x_new, &mut rng)?;
        let w = (schedule.log_weight_at(k) - offset).exp();
        let g = scaled(&g_hat, w);
        if !all_finite(&x_new) || !all_finite(&g) {
            return Err(Error::Diverged {
                step: k as usize,
                grad_norm: norm(&g_hat),
                reason: "non-finite iterate or scaled gradient".into(),
            });
        }
        regret.push(&z, &g);
        learner.step(&g)?;
        if learner.magnitude() > RESCALE_THRESHOLD {
            let shift = schedule.log_pi_at(k) - offset;
            if shift > 0.0 {
                let factor = (-shift).exp();
                learner.rescale(factor);
                regret.rescale(factor);
                offset += shift;
                rec.rescale_events.push((k, offset));
            }
        }
        let gap = problem.gap(&x_new);
        rec.observe(k, gap);
        if opts.trace.wants(k, k_max) {
            let v = learner.grad_sq_total();
            let eff = if scalar_learner && v > 0.0 { w * radius / v.sqrt() } else { f64::NAN };
            rec.rows.push(TraceRow {
                k,
                f_gap: gap,
                f_gap_avg_iterate: f64::NAN,
                step_norm: dist(&x_new, &x),
                effective_stepsize: eff,
                regret_running: regret_eval(&regret, radius, spec.kind.geometry()) * offset.exp(),
                wall_ns: clock.ns(),
            });
        }
        if opts.keep_vectors {
            rec.x_history.push(x_new.clone());
            rec.z_history.push(z);
            rec.g_history.push(g);
        }
        x = x_new;
    }
    rec.steps = k_max;
    rec.final_gap = problem.gap(&x);
    rec.final_x = x;
    rec.regret = Some(regret_eval(&regret, radius, spec.kind.geometry()) * offset.exp());
    rec.log_pi_final = Some(schedule.log_pi_at(k_max));
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::TracePolicy;
    use crate::problems::{make_abs_power, make_exp_inf, make_power_inf, DenseMatrix, NoiseModel};

    fn exp_oracle() -> StochOracle {
        let p = make_exp_inf(DenseMatrix::scaled_identity(1, 1.0), vec![0.5], 2.0).unwrap();
        StochOracle::new(p, NoiseModel::Deterministic)
    }

    fn full(seed: u64) -> RunOptions {
        RunOptions { trace: TracePolicy::All, keep_vectors: true, seed, ..Default::default() }
    }

    #[test]
    fn iterates_replay_the_mixing_rule() {
        let o = exp_oracle();
        let s = Schedule::new(ScheduleKind::TwoStage, o.constants(), 0.1, 1.0, None).unwrap();
        let mut opts = full(1);
        opts.k_override = Some(300);
        let rec = run_conversion(&o, LearnerSpec::new(LearnerKind::SoloScalar), &s, &opts).unwrap();
        assert_eq!(rec.x_history.len(), 301);
        for k in 1..=300usize {
            let a = s.alpha_at(k as u64);
            let want = mix(&rec.x_history[k - 1], &rec.z_history[k - 1], a);
            assert!(dist(&want, &rec.x_history[k]) <= 1e-12);
        }
        assert!(rec.rows.iter().all(|r| r.f_gap >= 0.0));
    }

    #[test]
    fn zero_gradient_oracle_stays_at_origin() {
        // minimizer at the origin and x_0 = 0: every gradient is 0
        let p = make_power_inf(DenseMatrix::scaled_identity(2, 1.0), vec![0.0, 0.0], 2.0, 1.0, 1.0).unwrap();
        let o = StochOracle::new(p, NoiseModel::Deterministic);
        let s = Schedule::new(ScheduleKind::ExpConst, o.constants(), 0.1, 1.0, None).unwrap();
        let mut opts = full(0);
        opts.k_override = Some(50);
        for kind in LearnerKind::ALL {
            let rec = run_conversion(&o, LearnerSpec::new(kind), &s, &opts).unwrap();
            assert!(rec.x_history.iter().all(|x| x.iter().all(|v| *v == 0.0)), "{kind:?}");
        }
    }

    #[test]
    fn lemma_wd_holds_on_deterministic_runs() {
        let o = exp_oracle();
        for kind in [ScheduleKind::Avg, ScheduleKind::ExpConst, ScheduleKind::TwoStage] {
            let s = Schedule::new(kind, o.constants(), 0.05, 1.0, None).unwrap();
            let mut opts = full(0);
            opts.k_override = Some(2000);
            let rec = run_conversion(&o, LearnerSpec::new(LearnerKind::SoloScalar), &s, &opts).unwrap();
            let pi_k = rec.log_pi_final.unwrap().exp();
            let lhs = pi_k * rec.final_gap;
            let rhs = s.pi0 * o.problem().gap(&[0.0]) + rec.regret.unwrap();
            assert!(lhs <= rhs + 1e-8 * rhs.abs().max(1.0), "{kind:?}: {lhs} > {rhs}");
        }
    }

    #[test]
    fn rescaling_keeps_solo_trajectory() {
        // alpha = 1/16 over 3200 steps: pi_k = (16/15)^k passes 1e50, so the
        // accumulators cross the threshold and get renormalized
        let o = exp_oracle();
        let s = Schedule::new(ScheduleKind::ExpConst, o.constants(), 0.5, 1.0, None).unwrap();
        assert_eq!(s.inv_alpha1, 16.0);
        let k = 3200;
        let opts = RunOptions { trace: TracePolicy::Last, k_override: Some(k), ..Default::default() };
        let rec = run_conversion(&o, LearnerSpec::new(LearnerKind::SoloScalar), &s, &opts).unwrap();
        assert!(!rec.rescale_events.is_empty());
        // oracle: the exponentially decayed moment recursion, which never
        // forms pi_k
        let (a, r) = (1.0 / 16.0, 2.0);
        let (mut m, mut v, mut x) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 1..k {
            let g = o.problem().subgrad(&[x])[0];
            m = (1.0 - a) * m + a * g;
            v = (1.0 - a) * (1.0 - a) * v + a * a * g * g;
            x = (1.0 - a) * x - a * r * (m / v.sqrt()).clamp(-1.0, 1.0);
        }
        assert!((rec.final_x[0] - x).abs() <= 1e-9 * x.abs().max(1e-3), "{} vs {x}", rec.final_x[0]);
    }

    #[test]
    fn quasar_with_gamma_one_and_right_endpoint_matches_standard() {
        let o = exp_oracle();
        let q = QuasarOracle::new(o.problem().clone(), NoiseModel::Deterministic);
        let s2 = Schedule::new(ScheduleKind::TwoStage, o.constants(), 0.1, 1.0, None).unwrap();
        let sq = Schedule::new(ScheduleKind::QuasarTwoStage, o.constants(), 0.1, 1.0, Some(1.0)).unwrap();
        let mut opts = full(3);
        opts.k_override = Some(1000);
        let a = run_conversion(&o, LearnerSpec::new(LearnerKind::SoloScalar), &s2, &opts).unwrap();
        let b = run_conversion_quasar(&q, LearnerSpec::new(LearnerKind::SoloScalar), &sq, ZetaMode::Fixed(1.0), &opts)
            .unwrap();
        for (xa, xb) in a.x_history.iter().zip(&b.x_history) {
            assert!(dist(xa, xb) <= 1e-9 * norm(xa).max(1e-300));
        }
    }

    #[test]
    fn segment_sampling_averages_the_slope() {
        // f = |x| with x_{k-1} = -0.25, x_k = 0.75: E[f'(x_bar)] = (0.75 - 0.25) / 1
        let p = make_abs_power(1, 1.0, 1.0).unwrap();
        let q = QuasarOracle::new(p, NoiseModel::Deterministic);
        let mut rng = RunRng::new(9, 0);
        let n = 200_000u64;
        let mut sum = 0.0;
        for i in 0..n {
            rng.start_iteration(i);
            let t = rng.uniform();
            let xb = mix(&[-0.25], &[0.75], t);
            sum += q.sample_generalized_grad(&xb, &[1.0], &mut rng).grad[0];
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 4.0 * (0.75 / n as f64).sqrt(), "{mean}");
    }

    #[test]
    fn zero_step_uses_gradient_at_point() {
        let p = make_abs_power(1, 1.0, 1.0).unwrap();
        let q = QuasarOracle::new(p, NoiseModel::Deterministic);
        let mut rng = RunRng::new(0, 0);
        // w = 0 at the kink: the subgradient selection (0) is returned
        assert_eq!(q.sample_generalized_grad(&[0.0], &[0.0], &mut rng).grad, vec![0.0]);
        assert_eq!(q.sample_generalized_grad(&[0.3], &[0.0], &mut rng).grad, vec![1.0]);
    }
}

//! Numeric checkers for the structural lemmas and assumptions. Each one
//! samples or constructs the sharpest desk-scale probe it can and reports the
//! worst case it saw, so a checker can also be run with falsified constants
//! to prove it is able to fail.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{dist, dot, mix, norm, sub};
use crate::online::{regret_eval, LearnerKind, LearnerState, RegretRecord};
use crate::problems::{make_abs_power, make_exp_inf, make_holder, DenseMatrix, NoiseModel, Problem, QuasarOracle};
use crate::rng::RunRng;

/// Where the worst case of a check was attained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub x: Vec<f64>,
    /// Second point of a pair, or checker-specific parameters.
    pub y: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub checker: String,
    pub subject: String,
    pub passed: bool,
    pub checks: u64,
    pub violations: u64,
    /// Largest normalized `lhs - rhs` seen; negative means slack everywhere.
    pub worst_margin: f64,
    pub witness: Option<Witness>,
    /// Headline statistic (max empirical constant, certified gamma, ...).
    pub stat: Option<f64>,
    pub notes: Vec<String>,
}

impl CheckReport {
    fn new(checker: &str, subject: impl Into<String>) -> Self {
        Self {
            checker: checker.into(),
            subject: subject.into(),
            passed: true,
            checks: 0,
            violations: 0,
            worst_margin: f64::NEG_INFINITY,
            witness: None,
            stat: None,
            notes: Vec::new(),
        }
    }

    /// Record `lhs <= rhs` with absolute allowance `tol`.
    fn record(&mut self, lhs: f64, rhs: f64, tol: f64, witness: impl FnOnce() -> (Vec<f64>, Vec<f64>)) {
        self.checks += 1;
        let margin = if lhs.is_nan() || rhs.is_nan() {
            f64::INFINITY
        } else if lhs <= rhs {
            // avoids inf - inf when both sides overflow
            (lhs - rhs).max(f64::MIN) / tol.max(f64::MIN_POSITIVE)
        } else {
            (lhs - rhs) / tol.max(f64::MIN_POSITIVE)
        };
        if margin > 1.0 {
            self.violations += 1;
            self.passed = false;
        }
        if margin > self.worst_margin || self.witness.is_none() {
            self.worst_margin = margin;
            let (x, y) = witness();
            self.witness = Some(Witness { x, y, lhs, rhs });
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Uniform point in the centered ball of radius `r`.
fn ball_point(d: usize, r: f64, rng: &mut RunRng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
    let n = norm(&v);
    if n == 0.0 {
        return vec![0.0; d];
    }
    let s = r * rng.uniform().powf(1.0 / d as f64) / n;
    v.iter_mut().for_each(|x| *x *= s);
    v
}

/// Pairs in `Q_{2R}`; every eighth pair anchors its first point at `x*`,
/// where the bounds are tightest.
fn sample_pair(p: &Problem, i: u64, rng: &mut RunRng) -> (Vec<f64>, Vec<f64>) {
    rng.start_iteration(i);
    let c = p.constants();
    let x = if i.is_multiple_of(8) { c.x_star.clone() } else { ball_point(p.dim(), 2.0 * c.radius, rng) };
    let y = ball_point(p.dim(), 2.0 * c.radius, rng);
    (x, y)
}

/// Both lines of the `(M0, M1)` characterization on `n_pairs` pairs.
/// `tol` is relative to the magnitude of the function values involved.
pub fn check_lemma_m01(problem: &Problem, n_pairs: u64, tol: f64, seed: u64) -> CheckReport {
    let c = problem.constants();
    let mut rep = CheckReport::new("lemma_m01", problem.id());
    if !c.m0.is_finite() {
        rep.notes.push("M0 is infinite: the inequality is vacuous".into());
        return rep;
    }
    let (m0, m1) = (c.m0, c.m1);
    let mut rng = RunRng::new(seed, 0x4d01);
    for i in 0..n_pairs {
        let (x, y) = sample_pair(problem, i, &mut rng);
        let (fx, fy) = (problem.value(&x), problem.value(&y));
        let gap = fx - c.f_star;
        let d = dist(&x, &y);
        let lhs = (fy - fx).abs();
        let (line1, line2) = if m1 == 0.0 {
            (m0 * d, m0 * d)
        } else {
            ((m0 / m1 + gap) * (m1 * d).exp_m1(), (m0 + m1 * gap) * (m1 * d).exp() * d)
        };
        let scale = tol * fx.abs().max(fy.abs()).max(1.0);
        rep.record(lhs, line1, scale, || (x.clone(), y.clone()));
        rep.record(line1, line2, scale, || (x, y));
    }
    rep
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TechVariant {
    /// Standard recursion `pi_k (1 - alpha_k) = pi_{k-1}`.
    Tech,
    /// Quasar recursion `(1 - gamma alpha_k) pi_k = pi_{k-1}`.
    Tech2,
}

impl TechVariant {
    pub fn id(self) -> &'static str {
        match self {
            TechVariant::Tech => "tech",
            TechVariant::Tech2 => "tech2",
        }
    }
}

/// One instance of the sequence lemma: `Delta_k` is built greedily so the
/// hypothesis holds with equality, then the conclusion is checked at every
/// `k`. Returns `(k, tau_k, bound_k)` per step.
pub fn tech_lemma_trial(
    variant: TechVariant,
    p: f64,
    gamma: f64,
    pi0: f64,
    alphas: &[f64],
    deltas: &[f64],
) -> Vec<(usize, f64, f64)> {
    let g = match variant {
        TechVariant::Tech => 1.0,
        TechVariant::Tech2 => gamma,
    };
    let n = alphas.len();
    let mut pi = Vec::with_capacity(n + 1);
    pi.push(pi0);
    for &a in alphas {
        let prev = *pi.last().unwrap();
        // alpha_1 = 1 with pi_0 = 0 (averaging): pi_1 is free, take 1
        let next = if 1.0 - g * a == 0.0 { 1.0 } else { prev / (1.0 - g * a) };
        pi.push(next);
    }
    let mut out = Vec::with_capacity(n);
    let mut tau = 0.0;
    for k in 1..=n {
        let a = alphas[k - 1];
        let delta_k = (deltas[k - 1] + p * g * tau) / (pi[k] * (1.0 - p * g * a));
        tau += a * pi[k] * delta_k;
        let mut bound = 0.0;
        for i in 2..=k {
            bound += alphas[i - 1] * deltas[i - 1] * (pi[k] / pi[i - 1]).powf(p);
        }
        let first = match variant {
            TechVariant::Tech => {
                let direct = if pi0 == 0.0 { f64::INFINITY } else { (pi[k] / pi0).powf(p) };
                direct.min(2.0 * (pi[k] / pi[1]).powf(p))
            }
            TechVariant::Tech2 => (pi[k] / pi0).powf(p),
        };
        bound += alphas[0] * deltas[0] * first;
        out.push((k, tau, bound));
    }
    out
}

/// `n_trials` random instances of the chosen variant; `bound_factor` scales
/// the conclusion's right-hand side (1 for the lemma, < 1 to falsify it).
pub fn check_tech_lemma(variant: TechVariant, n_trials: u64, tol: f64, bound_factor: f64, seed: u64) -> CheckReport {
    let mut rep = CheckReport::new("tech_lemma", variant.id());
    let mut rng = RunRng::new(seed, 0x7ec4);
    for trial in 0..n_trials {
        rng.start_iteration(trial);
        let n = 1 + (rng.uniform() * 60.0) as usize;
        let p = 0.5 * (1.0 - rng.uniform());
        let gamma = match variant {
            TechVariant::Tech => 1.0,
            TechVariant::Tech2 => 0.05 + 0.95 * rng.uniform(),
        };
        // schedule family: averaging (tech only), constant, random, two-stage
        let family = (trial % 4) as u8;
        let (pi0, alphas): (f64, Vec<f64>) = match (variant, family) {
            (TechVariant::Tech, 0) => (0.0, (1..=n).map(|k| 1.0 / k as f64).collect()),
            (_, 1) | (TechVariant::Tech2, 0) => {
                let a = 0.9 * (1.0 - rng.uniform());
                (1.0, vec![a; n])
            }
            (_, 2) => {
                let pi0 = 10f64.powf(rng.range(-1.0, 1.0));
                (pi0, (0..n).map(|_| 0.9 * (1.0 - rng.uniform())).collect())
            }
            _ => {
                let (a1, a2) = (0.5 * (1.0 - rng.uniform()), 0.05 * (1.0 - rng.uniform()));
                let switch = n / 2;
                (1.0, (0..n).map(|i| if i < switch { a1 } else { a2 }).collect())
            }
        };
        let deltas: Vec<f64> =
            (0..n).map(|_| if rng.uniform() < 0.2 { 0.0 } else { 10f64.powf(rng.range(-3.0, 3.0)) }).collect();
        for (k, tau, bound) in tech_lemma_trial(variant, p, gamma, pi0, &alphas, &deltas) {
            let rhs = bound_factor * bound;
            rep.record(tau, rhs, tol * rhs.abs().max(f64::MIN_POSITIVE), || {
                (vec![p, gamma, pi0, k as f64], alphas[..k].to_vec())
            });
        }
    }
    rep
}

/// Gradient streams for the regret check: `n` streams of `k` rounds with
/// scales drawn log-uniformly from `[1e-3, 1e3]`. Stream families cycle
/// through fixed-scale noise, per-round random scale, drift plus noise, and
/// sign alternation.
pub fn random_streams(n: usize, k: usize, seed: u64) -> Vec<Vec<Vec<f64>>> {
    let mut rng = RunRng::new(seed, 0x5e91);
    (0..n)
        .map(|s| {
            rng.start_iteration(s as u64);
            let d = 1 + (rng.uniform() * 5.0) as usize;
            let scale = 10f64.powf(rng.range(-3.0, 3.0));
            let dir: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
            (0..k)
                .map(|t| match s % 4 {
                    0 => (0..d).map(|_| scale * rng.normal()).collect(),
                    1 => {
                        let st = 10f64.powf(rng.range(-3.0, 3.0));
                        (0..d).map(|_| st * rng.normal()).collect()
                    }
                    2 => dir.iter().map(|v| scale * (v + 0.3 * rng.normal())).collect(),
                    _ => {
                        let sign = if t % 2 == 0 { 1.0 } else { -1.0 };
                        dir.iter().map(|v| sign * scale * v).collect()
                    }
                })
                .collect()
        })
        .collect()
}

/// Regret of a learner on one stream, and `R sqrt(sum |g|^2)`.
pub fn stream_regret(kind: LearnerKind, stream: &[Vec<f64>], radius: f64) -> Result<(f64, f64)> {
    let d = stream.first().map_or(1, |g| g.len());
    let mut learner = LearnerState::new(kind, d, radius)?;
    let mut rec = RegretRecord::new(d, false);
    for g in stream {
        rec.push(learner.z(), g);
        learner.step(g)?;
    }
    Ok((regret_eval(&rec, radius, kind.geometry()), rec.bound_scale(radius)))
}

/// `Reg_K <= C R sqrt(sum |g_k|^2)` on every stream. Regret is measured over
/// the learner's own feasible set.
pub fn check_regret_assumption(
    kind: LearnerKind,
    streams: &[Vec<Vec<f64>>],
    radius: f64,
    c_threshold: f64,
) -> Result<CheckReport> {
    if !(c_threshold > 0.0) {
        return Err(Error::invalid(format!("C threshold must be > 0, got {c_threshold}")));
    }
    let mut rep = CheckReport::new("regret_assumption", kind.id());
    let mut max_c: f64 = 0.0;
    for (i, s) in streams.iter().enumerate() {
        let (regret, scale) = stream_regret(kind, s, radius)?;
        let bound = c_threshold * scale;
        if scale > 0.0 {
            max_c = max_c.max(regret / scale);
        } else if regret > 0.0 {
            max_c = f64::INFINITY;
        }
        rep.record(regret, bound, 1e-12 * scale.max(f64::MIN_POSITIVE), || {
            (vec![i as f64, s.len() as f64], Vec::new())
        });
    }
    rep.stat = Some(max_c);
    Ok(rep)
}

/// Grids for [`certify_quasar`].
#[derive(Debug, Clone)]
pub struct QuasarGrid {
    pub gammas: Vec<f64>,
    pub ts: Vec<f64>,
    pub xs: Vec<Vec<f64>>,
}

impl QuasarGrid {
    /// `gamma` in steps of 0.01, `t` log-spaced down to `1e-4` plus a linear
    /// grid, and `n` points of `Q_{2R}` other than the minimizer.
    pub fn standard(problem: &Problem, n: usize, seed: u64) -> Self {
        let gammas = (1..=100).map(|i| i as f64 / 100.0).collect();
        let mut ts: Vec<f64> = (0..=16).map(|i| 10f64.powf(-4.0 + i as f64 / 4.0)).collect();
        ts.extend((1..20).map(|i| i as f64 / 20.0));
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let c = problem.constants();
        let r2 = 2.0 * c.radius;
        let d = problem.dim();
        let xs = if d == 1 {
            (0..=n).map(|i| vec![-r2 + 2.0 * r2 * i as f64 / n as f64]).filter(|x| x[0] != c.x_star[0]).collect()
        } else {
            let mut rng = RunRng::new(seed, 0x9a5a);
            (0..n as u64)
                .map(|i| {
                    rng.start_iteration(i);
                    ball_point(d, r2, &mut rng)
                })
                .filter(|x| *x != c.x_star)
                .collect()
        };
        Self { gammas, ts, xs }
    }
}

/// Largest grid `gamma` with `f(t x* + (1-t) x) <= gamma t f* + (1 - gamma t) f(x)`
/// at every grid point (slack `1e-9` relative to `|f(x)|`), plus a spot check
/// of the first-order form through the generalized-gradient oracle.
pub fn certify_quasar(problem: &Problem, grid: &QuasarGrid, seed: u64) -> CheckReport {
    let c = problem.constants();
    let mut rep = CheckReport::new("certify_quasar", problem.id());
    if !problem.is_convex() {
        rep.notes.push(
            "non-convex objective: a grid failure cannot separate a failed regularity hypothesis from a failed inequality"
                .into(),
        );
    }
    let fs = c.f_star;
    let mut pts = Vec::new();
    for x in &grid.xs {
        let fx = problem.value(x);
        for &t in &grid.ts {
            let fm = problem.value(&mix(x, &c.x_star, t));
            pts.push((t, fx, fm));
        }
    }
    let slack = |fx: f64| 1e-9 * fx.abs().max(1.0);
    let mut gammas = grid.gammas.clone();
    gammas.sort_by(|a, b| b.total_cmp(a));
    let certified = gammas
        .iter()
        .copied()
        .find(|&g| pts.iter().all(|&(t, fx, fm)| fm <= g * t * fs + (1.0 - g * t) * fx + slack(fx)));
    rep.checks = pts.len() as u64;
    let Some(gamma) = certified else {
        rep.passed = false;
        rep.notes.push("no grid gamma satisfies the inequality".into());
        return rep;
    };
    rep.stat = Some(gamma);

    // first-order form at the grid points with a random direction
    let oracle = QuasarOracle::new(problem.clone(), NoiseModel::Deterministic);
    let mut rng = RunRng::new(seed, 0x9a5b);
    for (i, x) in grid.xs.iter().enumerate() {
        rng.start_iteration(i as u64);
        let w: Vec<f64> = (0..x.len()).map(|_| rng.normal()).collect();
        let g = oracle.sample_generalized_grad(x, &w, &mut rng).grad;
        let gap = problem.gap(x);
        let lhs = gamma * gap;
        let rhs = dot(&sub(x, &c.x_star), &g);
        rep.record(lhs, rhs, slack(gap), || (x.clone(), w));
    }
    rep
}

/// `beta = min{(sigma^{1+nu}/L0)^{1/nu}, sigma/L1}`; terms with a zero
/// denominator are infinite and `sigma = 0` gives 0.
pub fn h_beta(nu: f64, sigma: f64, l0: f64, l1: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let a = if l0 == 0.0 || nu == 0.0 { f64::INFINITY } else { (sigma.powf(1.0 + nu) / l0).powf(1.0 / nu) };
    let b = if l1 == 0.0 { f64::INFINITY } else { sigma / l1 };
    a.min(b)
}

/// `|h(x') - h(x)|^{1+nu} <= C (L0 + (L1 h(x))^{1+nu}) exp(L1 |x'-x|) |x'-x|^{1+nu}`
/// with `h = (beta + f - f*)^{1/(1+nu)}`.
pub fn check_h_property(problem: &Problem, n_pairs: u64, constant: f64, seed: u64) -> CheckReport {
    let c = problem.constants();
    let mut rep = CheckReport::new("h_property", problem.id());
    let (nu, l0, l1) = (c.nu, c.l0, c.l1);
    if !l0.is_finite() || !l1.is_finite() {
        rep.notes.push("L0 or L1 is infinite: the inequality is vacuous".into());
        return rep;
    }
    let beta = h_beta(nu, c.sigma, l0, l1);
    rep.stat = Some(beta);
    let q = 1.0 + nu;
    let h = |x: &[f64]| (beta + problem.gap(x)).max(0.0).powf(1.0 / q);
    let mut rng = RunRng::new(seed, 0x4801);
    for i in 0..n_pairs {
        let (x, y) = sample_pair(problem, i, &mut rng);
        let (hx, hy) = (h(&x), h(&y));
        let d = dist(&x, &y);
        let lhs = (hy - hx).abs().powf(q);
        let rhs = constant * (l0 + (l1 * hx).powf(q)) * (l1 * d).exp() * d.powf(q);
        let scale = 1e-9 * hx.max(hy).powf(q).max(1.0);
        rep.record(lhs, rhs, scale, || (x, y));
    }
    rep
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    /// Least-squares slope of `ln gap` against `ln k`.
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
    /// The tail is constant; `slope` is reported as 0.
    pub degenerate: bool,
    /// `ln gap` is fit far better by a line in `k` than in `ln k`
    /// (geometric decay).
    pub linear_in_k: bool,
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let icpt = my - slope * mx;
    let rss = xs.iter().zip(ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum();
    (slope, icpt, rss)
}

/// Slope of `ln gap` against `ln k` over the points with `k >= k_min`.
/// Non-positive gaps are skipped.
pub fn slope_fit(series: &[(f64, f64)], k_min: f64) -> Result<SlopeFit> {
    let tail: Vec<(f64, f64)> =
        series.iter().copied().filter(|&(k, g)| k >= k_min && k > 0.0 && g > 0.0 && g.is_finite()).collect();
    if tail.len() < 20 {
        return Err(Error::invalid(format!(
            "slope fit needs >= 20 positive points beyond k = {k_min}, got {}",
            tail.len()
        )));
    }
    let lk: Vec<f64> = tail.iter().map(|p| p.0.ln()).collect();
    let k: Vec<f64> = tail.iter().map(|p| p.0).collect();
    let lg: Vec<f64> = tail.iter().map(|p| p.1.ln()).collect();
    let spread = lg.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)) - lg.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    if spread <= 1e-12 {
        return Ok(SlopeFit { slope: 0.0, intercept: lg[0], points: tail.len(), degenerate: true, linear_in_k: false });
    }
    let (slope, intercept, rss_log) = least_squares(&lk, &lg);
    let (_, _, rss_lin) = least_squares(&k, &lg);
    Ok(SlopeFit { slope, intercept, points: tail.len(), degenerate: false, linear_in_k: rss_lin < 0.1 * rss_log })
}

/// One falsified check and whether it was caught.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NegativeControl {
    pub name: String,
    pub detected: bool,
    pub report: CheckReport,
}

/// Every checker run with a deliberately wrong constant. All must be
/// detected.
pub fn negative_controls(seed: u64) -> Result<Vec<NegativeControl>> {
    let mut out = Vec::new();
    let mut push = |name: &str, report: CheckReport| {
        out.push(NegativeControl { name: name.into(), detected: !report.passed, report })
    };

    let exp = make_exp_inf(DenseMatrix::scaled_identity(1, 1.0), vec![0.0], 2.0)?;
    let mut c = exp.constants().clone();
    c.m0 *= 0.5;
    push("m01_halved_m0", check_lemma_m01(&exp.with_constants(c)?, 10_000, 1e-8, seed));

    let holder = make_holder(0.5, 1.0, vec![0.3], 1.0, 2.0)?;
    let mut c = holder.constants().clone();
    c.l0 *= 0.01;
    c.l1 *= 0.01;
    push("h_property_understated_l0_l1", check_h_property(&holder.with_constants(c)?, 10_000, 8.0, seed));

    push("tech_halved_bound", check_tech_lemma(TechVariant::Tech, 200, 1e-9, 0.5, seed));
    push("tech2_halved_bound", check_tech_lemma(TechVariant::Tech2, 200, 1e-9, 0.5, seed));

    let streams = random_streams(20, 1000, seed);
    push("regret_c_tenth", check_regret_assumption(LearnerKind::SoloScalar, &streams, 1.0, 0.1)?);

    // |x|^{1/2} claimed 1-quasar-convex
    let root = make_abs_power(1, 0.5, 1.0)?;
    let mut grid = QuasarGrid::standard(&root, 200, seed);
    grid.gammas = vec![1.0];
    push("quasar_root_claimed_convex", certify_quasar(&root, &grid, seed));
    Ok(out)
}

//! Objective functions with known minimizers, their generalized-Lipschitz
//! constants, and stochastic gradient oracles.

mod lower;
mod oracle;
mod parse;
mod suite;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{self, norm};
use crate::rng::RunRng;

pub use lower::{ada_case_thresholds, sgd_case_threshold, LowerBound, LowerKind};
pub use oracle::{NoiseModel, OracleSample, QuasarOracle, StochOracle};
pub use parse::{parse_problem, ParamMap};
pub use suite::{
    make_abs_power, make_exp_inf, make_holder, make_lower_bound, make_norm_inf, make_power_inf, make_quasar_wave,
    DenseMatrix,
};

/// Every scalar constant a schedule or checker may need.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemConstants {
    pub radius: f64,
    pub m0: f64,
    pub m1: f64,
    pub g0: f64,
    pub g1: f64,
    /// `max_{|x| <= R} f(x) - f*`
    pub max_gap: f64,
    pub f_star: f64,
    pub x_star: Vec<f64>,
    pub nu: f64,
    pub sigma: f64,
    pub l0: f64,
    pub l1: f64,
    pub gamma: f64,
}

impl ProblemConstants {
    /// Constants for a convex `(m0, m1)`-Lipschitz problem; the stochastic
    /// constants default to the deterministic ones and the Hölder block to
    /// the `nu = 0` case.
    pub fn lipschitz(radius: f64, m0: f64, m1: f64, f_star: f64, x_star: Vec<f64>) -> Self {
        Self {
            radius,
            m0,
            m1,
            g0: m0,
            g1: m1,
            max_gap: 0.0,
            f_star,
            x_star,
            nu: 0.0,
            sigma: 0.0,
            l0: m0,
            l1: m1,
            gamma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::invalid(format!("R must be > 0, got {}", self.radius)));
        }
        let xs = norm(&self.x_star);
        if xs > self.radius * (1.0 + 1e-12) {
            return Err(Error::invalid(format!("minimizer norm {xs} exceeds R = {}", self.radius)));
        }
        for (name, v) in [
            ("M0", self.m0),
            ("M1", self.m1),
            ("G0", self.g0),
            ("G1", self.g1),
            ("F", self.max_gap),
            ("sigma", self.sigma),
            ("L0", self.l0),
            ("L1", self.l1),
        ] {
            if !(v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.nu) {
            return Err(Error::invalid(format!("nu must lie in [0, 1], got {}", self.nu)));
        }
        if self.nu == 0.0 && self.sigma != 0.0 {
            return Err(Error::invalid("sigma must be 0 when nu = 0"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::invalid(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        Ok(())
    }
}

/// A deterministic objective. Implementations must be pure.
pub trait Objective: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Some element of the (Clarke) subdifferential, chosen deterministically.
    fn subgrad(&self, x: &[f64]) -> Vec<f64>;

    /// A generalized gradient `g` at `x` with `<w, g> = f'(x; w)`.
    fn generalized_grad(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let _ = w;
        self.subgrad(x)
    }

    /// Closed-form `max_{|x| <= r} f(x)` when available.
    fn max_on_ball(&self, r: f64) -> Option<f64> {
        let _ = r;
        None
    }

    fn is_convex(&self) -> bool {
        true
    }
}

/// An objective together with its declared constants.
#[derive(Clone)]
pub struct Problem {
    id: String,
    objective: Arc<dyn Objective>,
    constants: ProblemConstants,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem").field("id", &self.id).field("constants", &self.constants).finish()
    }
}

impl Problem {
    /// Wrap an objective. `max_gap` is filled in with [`exact_max_gap`] when
    /// the supplied value is not finite.
    pub fn new(id: impl Into<String>, objective: Arc<dyn Objective>, mut constants: ProblemConstants) -> Result<Self> {
        if constants.x_star.len() != objective.dim() {
            return Err(Error::Dimension { expected: objective.dim(), got: constants.x_star.len() });
        }
        if !constants.max_gap.is_finite() {
            constants.max_gap = exact_max_gap(objective.as_ref(), constants.f_star, constants.radius);
        }
        constants.validate()?;
        Ok(Self { id: id.into(), objective, constants })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn constants(&self) -> &ProblemConstants {
        &self.constants
    }

    pub fn objective(&self) -> &dyn Objective {
        self.objective.as_ref()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.objective.value(x)
    }

    pub fn gap(&self, x: &[f64]) -> f64 {
        self.objective.value(x) - self.constants.f_star
    }

    pub fn subgrad(&self, x: &[f64]) -> Vec<f64> {
        self.objective.subgrad(x)
    }

    pub fn generalized_grad(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        self.objective.generalized_grad(x, w)
    }

    pub fn is_convex(&self) -> bool {
        self.objective.is_convex()
    }

    /// Replace the declared constants (used by checkers for negative controls
    /// and by callers that certify a constant numerically).
    pub fn with_constants(&self, constants: ProblemConstants) -> Result<Self> {
        constants.validate()?;
        Ok(Self { id: self.id.clone(), objective: Arc::clone(&self.objective), constants })
    }
}

const GRID_POINTS: usize = 1 << 16;

/// `max_{|x| <= r} f(x) - f*`: closed form when the objective provides one,
/// otherwise a dense search (grid in 1-D, quasi-random points in the ball in
/// higher dimension) followed by local refinement.
pub fn exact_max_gap(obj: &dyn Objective, f_star: f64, r: f64) -> f64 {
    if let Some(m) = obj.max_on_ball(r) {
        return (m - f_star).max(0.0);
    }
    let d = obj.dim();
    if d == 1 {
        let h = 2.0 * r / (GRID_POINTS - 1) as f64;
        let (mut best_x, mut best) = (-r, obj.value(&[-r]));
        for i in 1..GRID_POINTS {
            let x = (-r + h * i as f64).min(r);
            let v = obj.value(&[x]);
            if v > best {
                best = v;
                best_x = x;
            }
        }
        // golden-section refinement on the bracketing cell
        let (mut lo, mut hi) = ((best_x - h).max(-r), (best_x + h).min(r));
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let a = hi - phi * (hi - lo);
            let b = lo + phi * (hi - lo);
            if obj.value(&[a]) > obj.value(&[b]) {
                hi = b;
            } else {
                lo = a;
            }
        }
        best = best.max(obj.value(&[0.5 * (lo + hi)]));
        return (best - f_star).max(0.0);
    }
    let mut rng = RunRng::new(0x6d61_7867_6170, d as u64);
    let mut best_x = vec![0.0; d];
    let mut best = obj.value(&best_x);
    for i in 0..GRID_POINTS as u64 {
        rng.start_iteration(i);
        let mut x: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let n = norm(&x);
        if n == 0.0 {
            continue;
        }
        // uniform in the ball for odd i, on the sphere for even i
        let radius = if i % 2 == 0 { r } else { r * rng.uniform().powf(1.0 / d as f64) };
        for v in &mut x {
            *v *= radius / n;
        }
        let val = obj.value(&x);
        if val > best {
            best = val;
            best_x = x;
        }
    }
    // compass search constrained to the ball
    let mut step = 0.1 * r;
    while step > 1e-12 * r {
        let mut improved = false;
        for i in 0..d {
            for s in [-1.0, 1.0] {
                let mut y = best_x.clone();
                y[i] += s * step;
                let y = numerics::project_ball_unchecked(&y, r);
                let v = obj.value(&y);
                if v > best {
                    best = v;
                    best_x = y;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best - f_star).max(0.0)
}

/// Upper bounds `(M, F)` on the global Lipschitz constant and the maximal gap
/// over the ball of radius `r`, implied by the generalized-Lipschitz
/// inequality. The `m1 -> 0` limit is `(m0, 2 r m0)`.
pub fn mf_bound(m0: f64, m1: f64, r: f64) -> (f64, f64) {
    let t = 2.0 * r * m1;
    let m = m0 * t.exp();
    let f = if m1 == 0.0 { 2.0 * r * m0 } else { (m0 / m1) * t.exp_m1() };
    (m, f)
}

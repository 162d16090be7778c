//! One-dimensional convex instances on which SGD and AdaGrad-Norm need
//! exponentially many iterations in `R G1`.

use super::Objective;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowerKind {
    SgdI,
    SgdII,
    AdaI,
    AdaII,
    AdaIII,
}

impl LowerKind {
    pub const ALL: [LowerKind; 5] =
        [LowerKind::SgdI, LowerKind::SgdII, LowerKind::AdaI, LowerKind::AdaII, LowerKind::AdaIII];

    pub fn id(self) -> &'static str {
        match self {
            LowerKind::SgdI => "sgd_I",
            LowerKind::SgdII => "sgd_II",
            LowerKind::AdaI => "ada_I",
            LowerKind::AdaII => "ada_II",
            LowerKind::AdaIII => "ada_III",
        }
    }

    pub fn from_id(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.id() == s)
    }

    fn is_sgd(self) -> bool {
        matches!(self, LowerKind::SgdI | LowerKind::SgdII)
    }
}

/// Stepsize boundary separating the cases of the constant-stepsize SGD
/// construction: Case I is `eta > threshold`.
pub fn sgd_case_threshold(radius: f64, g0: f64, g1: f64) -> f64 {
    2.0 * radius / g0 * (-0.25 * radius * g1).exp()
}

/// Boundaries `(R/4, R exp(R G1 / 32))` of the AdaGrad-Norm cases:
/// Case III is `eta < R/4`, Case I is `eta >= R exp(R G1/32)`.
pub fn ada_case_thresholds(radius: f64, g1: f64) -> (f64, f64) {
    (0.25 * radius, radius * (radius * g1 / 32.0).exp())
}

#[derive(Debug, Clone)]
pub struct LowerBound {
    kind: LowerKind,
    radius: f64,
    g0: f64,
    g1: f64,
    eps: f64,
    /// Radius of the exponential core (Case II/III), 0 otherwise.
    core: f64,
}

impl LowerBound {
    pub fn new(kind: LowerKind, radius: f64, g0: f64, g1: f64, eps: f64) -> Result<Self> {
        for (name, v) in [("R", radius), ("G0", g0), ("G1", g1), ("eps", eps)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        let (min_rg1, div) = if kind.is_sgd() { (8.0, 8.0) } else { (32.0, 64.0) };
        if radius * g1 < min_rg1 {
            return Err(Error::regime(format!("R*G1 >= {min_rg1} fails for {} (R*G1 = {})", kind.id(), radius * g1)));
        }
        let eps_max = g0 / g1 * (radius * g1 / div).exp();
        if eps > eps_max {
            return Err(Error::regime(format!(
                "eps <= (G0/G1) exp(R*G1/{div}) = {eps_max} fails for {} (eps = {eps})",
                kind.id()
            )));
        }
        let factor = if kind.is_sgd() { 8.0 } else { 32.0 };
        let core = match kind {
            LowerKind::SgdI | LowerKind::AdaI => 0.0,
            _ => ((factor * eps / (radius * g0)).ln() / g1).max(0.0),
        };
        Ok(Self { kind, radius, g0, g1, eps, core })
    }

    pub fn kind(&self) -> LowerKind {
        self.kind
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn core_radius(&self) -> f64 {
        self.core
    }

    pub fn minimizer(&self) -> f64 {
        let r = self.radius;
        match self.kind {
            LowerKind::SgdI | LowerKind::AdaI => 0.75 * r,
            LowerKind::SgdII => 0.5 * r,
            LowerKind::AdaII => r / 16.0,
            LowerKind::AdaIII => r,
        }
    }

    /// The guaranteed gap in Case I: `(G0/G1)(exp(R G1/4) - 1)`.
    pub fn case_one_gap(&self) -> f64 {
        self.g0 / self.g1 * (0.25 * self.radius * self.g1).exp_m1()
    }

    fn exp_piece(&self, t: f64) -> f64 {
        self.g0 / self.g1 * (self.g1 * t).exp_m1()
    }

    fn slope(&self) -> f64 {
        let factor = if self.kind.is_sgd() { 8.0 } else { 32.0 };
        factor * self.eps / self.radius
    }

    fn eval(&self, x: f64) -> f64 {
        let (r, g0, g1) = (self.radius, self.g0, self.g1);
        match self.kind {
            LowerKind::SgdI | LowerKind::AdaI => {
                if x >= 0.5 * r {
                    self.exp_piece((x - 0.75 * r).abs())
                } else {
                    let e = (0.25 * r * g1).exp();
                    g0 * e * (0.5 * r - x) + g0 / g1 * (e - 1.0)
                }
            }
            LowerKind::SgdII => {
                let t = (x - 0.5 * r).abs();
                if t <= self.core {
                    self.exp_piece(t)
                } else {
                    self.slope() * (t - self.core) + self.exp_piece(self.core)
                }
            }
            LowerKind::AdaII => {
                let c = r / 16.0;
                if x <= c + self.core {
                    self.exp_piece((x - c).abs())
                } else {
                    self.slope() * (x - c - self.core) + self.exp_piece(self.core)
                }
            }
            LowerKind::AdaIII => {
                let s = self.slope();
                let base = self.exp_piece(self.core);
                if x >= r {
                    0.0
                } else if x >= r - self.core {
                    self.exp_piece(r - x)
                } else if x >= 0.25 * r {
                    s * (r - self.core - x) + base
                } else {
                    let m = g0.max(s);
                    m / g1 * (g1 * (0.25 * r - x)).exp_m1() + s * (0.75 * r - self.core) + base
                }
            }
        }
    }

    /// One-sided derivative: right derivative if `right`, else left.
    fn one_sided(&self, x: f64, right: bool) -> f64 {
        let (r, g0, g1) = (self.radius, self.g0, self.g1);
        // `past(a)`: x lies in the piece starting at breakpoint a, seen from this side
        let past = |a: f64| if right { x >= a } else { x > a };
        let exp_slope = |t: f64| g0 * (g1 * t).exp();
        match self.kind {
            LowerKind::SgdI | LowerKind::AdaI => {
                let c = 0.75 * r;
                if past(c) {
                    exp_slope(x - c)
                } else if past(0.5 * r) {
                    -exp_slope(c - x)
                } else {
                    -g0 * (0.25 * r * g1).exp()
                }
            }
            LowerKind::SgdII => {
                let c = 0.5 * r;
                let s = self.slope();
                if past(c + self.core) {
                    s
                } else if past(c) {
                    exp_slope(x - c)
                } else if past(c - self.core) {
                    -exp_slope(c - x)
                } else {
                    -s
                }
            }
            LowerKind::AdaII => {
                let c = r / 16.0;
                if past(c + self.core) {
                    self.slope()
                } else if past(c) {
                    exp_slope(x - c)
                } else {
                    -exp_slope(c - x)
                }
            }
            LowerKind::AdaIII => {
                let s = self.slope();
                if past(r) {
                    0.0
                } else if past(r - self.core) {
                    -exp_slope(r - x)
                } else if past(0.25 * r) {
                    -s
                } else {
                    -g0.max(s) * (g1 * (0.25 * r - x)).exp()
                }
            }
        }
    }

    /// Subgradient selection: the derivative where it exists, 0 at the
    /// minimizer, the steeper one-sided value at any other kink.
    fn select(&self, x: f64) -> f64 {
        let (l, r) = (self.one_sided(x, false), self.one_sided(x, true));
        if l == r {
            l
        } else if l <= 0.0 && r >= 0.0 {
            0.0
        } else if l.abs() >= r.abs() {
            l
        } else {
            r
        }
    }
}

impl Objective for LowerBound {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.eval(x[0])
    }

    fn subgrad(&self, x: &[f64]) -> Vec<f64> {
        vec![self.select(x[0])]
    }

    fn generalized_grad(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let d = if w[0] > 0.0 {
            self.one_sided(x[0], true)
        } else if w[0] < 0.0 {
            self.one_sided(x[0], false)
        } else {
            self.select(x[0])
        };
        vec![d]
    }

    fn max_on_ball(&self, r: f64) -> Option<f64> {
        // convex in 1-D: the maximum is at an endpoint
        Some(self.eval(-r).max(self.eval(r)))
    }
}

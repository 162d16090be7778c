use std::sync::Arc;

use super::{LowerBound, LowerKind, Objective, Problem, ProblemConstants};
use crate::error::{Error, Result};
use crate::numerics::{dist, dot, norm, spectral_norm, sub};

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols || rows == 0 || cols == 0 {
            return Err(Error::Dimension { expected: rows * cols, got: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn scaled_identity(d: usize, a: f64) -> Self {
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            data[i * d + i] = a;
        }
        Self { rows: d, cols: d, data }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn op_norm(&self) -> Result<f64> {
        spectral_norm(&self.data, self.rows, self.cols)
    }

    /// Solve `A x = b` through the normal equations; errors when `b` is not in
    /// the range of `A` or `A` has dependent columns.
    fn solve_consistent(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.cols;
        let mut m = vec![0.0; n * (n + 1)];
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for r in 0..self.rows {
                    acc += self.data[r * n + i] * self.data[r * n + j];
                }
                m[i * (n + 1) + j] = acc;
            }
            let mut acc = 0.0;
            for r in 0..self.rows {
                acc += self.data[r * n + i] * b[r];
            }
            m[i * (n + 1) + n] = acc;
        }
        // Gaussian elimination with partial pivoting on [A^T A | A^T b]
        let scale = m.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(1.0);
        for col in 0..n {
            let piv =
                (col..n).max_by(|&i, &j| m[i * (n + 1) + col].abs().total_cmp(&m[j * (n + 1) + col].abs())).unwrap();
            if m[piv * (n + 1) + col].abs() <= 1e-12 * scale {
                return Err(Error::invalid("matrix A has linearly dependent columns"));
            }
            for k in 0..=n {
                m.swap(col * (n + 1) + k, piv * (n + 1) + k);
            }
            for i in 0..n {
                if i != col {
                    let f = m[i * (n + 1) + col] / m[col * (n + 1) + col];
                    for k in col..=n {
                        m[i * (n + 1) + k] -= f * m[col * (n + 1) + k];
                    }
                }
            }
        }
        let x: Vec<f64> = (0..n).map(|i| m[i * (n + 1) + n] / m[i * (n + 1) + i]).collect();
        let resid = (0..self.rows).fold(0.0_f64, |a, r| a.max((dot(self.row(r), &x) - b[r]).abs()));
        if resid > 1e-10 * (1.0 + b.iter().fold(0.0_f64, |a, v| a.max(v.abs()))) {
            return Err(Error::invalid(format!(
                "b is not in the range of A (residual {resid:e}); only consistent systems are supported"
            )));
        }
        Ok(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outer {
    Linear,
    Power(f64),
    Exp,
}

impl Outer {
    fn value(self, t: f64) -> f64 {
        match self {
            Outer::Linear => t,
            Outer::Power(p) => t.powf(p),
            Outer::Exp => t.exp(),
        }
    }

    fn deriv(self, t: f64) -> f64 {
        match self {
            Outer::Linear => 1.0,
            Outer::Power(p) => p * t.powf(p - 1.0),
            Outer::Exp => t.exp(),
        }
    }
}

/// `phi(|Ax - b|_inf)` for a monotone outer function `phi`.
#[derive(Debug, Clone)]
struct InfNormComposite {
    a: DenseMatrix,
    b: Vec<f64>,
    outer: Outer,
}

impl InfNormComposite {
    fn residual(&self, x: &[f64]) -> Vec<f64> {
        (0..self.a.rows).map(|i| dot(self.a.row(i), x) - self.b[i]).collect()
    }

    /// Lowest index attaining the max, and the max itself.
    fn active(r: &[f64]) -> (usize, f64) {
        let mut idx = 0;
        let mut t = r[0].abs();
        for (i, v) in r.iter().enumerate().skip(1) {
            if v.abs() > t {
                t = v.abs();
                idx = i;
            }
        }
        (idx, t)
    }
}

impl Objective for InfNormComposite {
    fn dim(&self) -> usize {
        self.a.cols
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (_, t) = Self::active(&self.residual(x));
        self.outer.value(t)
    }

    fn subgrad(&self, x: &[f64]) -> Vec<f64> {
        let r = self.residual(x);
        let (i, t) = Self::active(&r);
        let s = if r[i] > 0.0 {
            1.0
        } else if r[i] < 0.0 {
            -1.0
        } else {
            0.0
        };
        let c = s * self.outer.deriv(t);
        self.a.row(i).iter().map(|v| c * v).collect()
    }

    fn generalized_grad(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        if w.iter().all(|v| *v == 0.0) {
            return self.subgrad(x);
        }
        let r = self.residual(x);
        let (_, t) = Self::active(&r);
        // f'(x; w) = phi'(t) * max over active (i, s) of s <a_i, w>
        let mut best: Option<(f64, usize, f64)> = None;
        for (i, ri) in r.iter().enumerate() {
            if ri.abs() != t {
                continue;
            }
            let signs: &[f64] = if *ri > 0.0 {
                &[1.0]
            } else if *ri < 0.0 {
                &[-1.0]
            } else {
                &[1.0, -1.0]
            };
            for &s in signs {
                let score = s * dot(self.a.row(i), w);
                if best.is_none_or(|(b, _, _)| score > b) {
                    best = Some((score, i, s));
                }
            }
        }
        let (_, i, s) = best.expect("at least one active index");
        let c = s * self.outer.deriv(t);
        self.a.row(i).iter().map(|v| c * v).collect()
    }

    fn max_on_ball(&self, r: f64) -> Option<f64> {
        let t = (0..self.a.rows).fold(0.0_f64, |m, i| m.max(r * norm(self.a.row(i)) + self.b[i].abs()));
        Some(self.outer.value(t))
    }
}

fn check_dims(a: &DenseMatrix, b: &[f64]) -> Result<()> {
    if b.len() != a.rows {
        return Err(Error::Dimension { expected: a.rows, got: b.len() });
    }
    if a.data.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("A or b"));
    }
    Ok(())
}

/// `|Ax - b|_inf^p`, `(M0, M1)`-Lipschitz for any `M1 > 0`.
pub fn make_power_inf(a: DenseMatrix, b: Vec<f64>, p: f64, m1: f64, radius: f64) -> Result<Problem> {
    if !(p > 1.0) {
        return Err(Error::invalid(format!("power_inf needs p > 1, got {p}")));
    }
    if !(m1 > 0.0) {
        return Err(Error::invalid(format!("power_inf needs M1 > 0, got {m1}")));
    }
    check_dims(&a, &b)?;
    let x_star = a.solve_consistent(&b)?;
    let op = a.op_norm()?;
    let f_star = 0.0;
    let m0 = op.powf(p) * ((p - 1.0) / m1).powf(p - 1.0) + m1 * f_star;
    let obj = InfNormComposite { a, b, outer: Outer::Power(p) };
    let c = ProblemConstants::lipschitz(radius, m0, m1, f_star, x_star);
    Problem::new(format!("power_inf{{p={p}}}"), Arc::new(obj), with_unknown_gap(c))
}

/// `exp(|Ax - b|_inf)` with `M1 = |A|_op`, `M0 = M1 f*`.
pub fn make_exp_inf(a: DenseMatrix, b: Vec<f64>, radius: f64) -> Result<Problem> {
    check_dims(&a, &b)?;
    let op = a.op_norm()?;
    if op == 0.0 {
        return Err(Error::invalid("exp_inf needs a nonzero A"));
    }
    let x_star = a.solve_consistent(&b)?;
    let f_star = 1.0;
    let obj = InfNormComposite { a, b, outer: Outer::Exp };
    let mut c = ProblemConstants::lipschitz(radius, op * f_star, op, f_star, x_star);
    // as an (L0, L1)-type instance with nu = 1: |grad| <= sigma + L1 (f - f*)
    c.nu = 1.0;
    c.sigma = op * f_star;
    c.l0 = 0.0;
    c.l1 = op;
    Problem::new("exp_inf", Arc::new(obj), with_unknown_gap(c))
}

/// `|x - x*|_inf`: globally 1-Lipschitz. `m1` only sets the declared
/// multiplicative constant (any value is valid since `|grad| <= M0`).
pub fn make_norm_inf(x_star: Vec<f64>, radius: f64, m1: f64) -> Result<Problem> {
    let d = x_star.len();
    if d == 0 {
        return Err(Error::invalid("norm_inf needs d >= 1"));
    }
    let obj = InfNormComposite { a: DenseMatrix::scaled_identity(d, 1.0), b: x_star.clone(), outer: Outer::Linear };
    let c = ProblemConstants::lipschitz(radius, 1.0, m1, 0.0, x_star);
    Problem::new("norm_inf", Arc::new(obj), with_unknown_gap(c))
}

fn with_unknown_gap(mut c: ProblemConstants) -> ProblemConstants {
    c.max_gap = f64::NAN;
    c
}

/// `L/(1+nu) |x - x*|^{1+nu}`.
#[derive(Debug, Clone)]
struct Holder {
    nu: f64,
    l: f64,
    x_star: Vec<f64>,
}

impl Objective for Holder {
    fn dim(&self) -> usize {
        self.x_star.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let r = crate::numerics::dist(x, &self.x_star);
        self.l / (1.0 + self.nu) * r.powf(1.0 + self.nu)
    }

    fn subgrad(&self, x: &[f64]) -> Vec<f64> {
        let r = crate::numerics::dist(x, &self.x_star);
        if r == 0.0 {
            return vec![0.0; x.len()];
        }
        let c = self.l * r.powf(self.nu - 1.0);
        x.iter().zip(&self.x_star).map(|(a, b)| c * (a - b)).collect()
    }

    fn generalized_grad(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let r = crate::numerics::dist(x, &self.x_star);
        let nw = norm(w);
        if r == 0.0 && self.nu == 0.0 && nw > 0.0 {
            return w.iter().map(|v| self.l * v / nw).collect();
        }
        self.subgrad(x)
    }

    fn max_on_ball(&self, r: f64) -> Option<f64> {
        let far = r + norm(&self.x_star);
        Some(self.l / (1.0 + self.nu) * far.powf(1.0 + self.nu))
    }
}

/// Hölder-smooth instance. The generalized-Lipschitz constants are the
/// tightest pair with `M1 = l1`; the smoothness block is
/// `(nu, sigma = 0, L0 = L, L1 = l1)`.
pub fn make_holder(nu: f64, l: f64, x_star: Vec<f64>, radius: f64, l1: f64) -> Result<Problem> {
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::invalid(format!("holder needs nu in [0, 1], got {nu}")));
    }
    if !(l > 0.0) || !(l1 > 0.0) {
        return Err(Error::invalid("holder needs L > 0 and L1 > 0"));
    }
    let m1 = l1;
    let m0 = l * (nu / m1).powf(nu) / (1.0 + nu);
    let mut c = ProblemConstants::lipschitz(radius, m0, m1, 0.0, x_star.clone());
    c.nu = nu;
    c.sigma = 0.0;
    c.l0 = l;
    c.l1 = l1;
    let obj = Holder { nu, l, x_star };
    Problem::new(format!("holder{{nu={nu}}}"), Arc::new(obj), with_unknown_gap(c))
}

/// `|x|^p` centered at the origin.
#[derive(Debug, Clone)]
struct AbsPower {
    d: usize,
    p: f64,
}

impl Objective for AbsPower {
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, x: &[f64]) -> f64 {
        norm(x).powf(self.p)
    }

    fn subgrad(&self, x: &[f64]) -> Vec<f64> {
        let r = norm(x);
        if r == 0.0 {
            return vec![0.0; self.d];
        }
        let c = self.p * r.powf(self.p - 2.0);
        x.iter().map(|v| c * v).collect()
    }

    fn generalized_grad(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let nw = norm(w);
        if norm(x) == 0.0 && self.p == 1.0 && nw > 0.0 {
            return w.iter().map(|v| v / nw).collect();
        }
        self.subgrad(x)
    }

    fn max_on_ball(&self, r: f64) -> Option<f64> {
        Some(r.powf(self.p))
    }

    fn is_convex(&self) -> bool {
        self.p >= 1.0
    }
}

/// `|x|^p`. For `p < 1` the function is not locally Lipschitz at the origin:
/// `M0` is declared infinite and `gamma = p` (it is `p`-quasar-convex).
pub fn make_abs_power(d: usize, p: f64, radius: f64) -> Result<Problem> {
    if d == 0 || !(p > 0.0) {
        return Err(Error::invalid("abs_power needs d >= 1 and p > 0"));
    }
    let (m0, m1) = if p == 1.0 {
        (1.0, 0.0)
    } else if p > 1.0 {
        let m1 = 1.0 / radius;
        (((p - 1.0) / m1).powf(p - 1.0), m1)
    } else {
        (f64::INFINITY, 0.0)
    };
    let mut c = ProblemConstants::lipschitz(radius, m0, m1, 0.0, vec![0.0; d]);
    c.gamma = p.min(1.0);
    Problem::new(format!("abs_power{{p={p}}}"), Arc::new(AbsPower { d, p }), with_unknown_gap(c))
}

/// Radial non-convex profile `g(r) = r - c sin(omega r) / omega` around
/// `x*`. `g' = 1 - c cos(omega r) > 0` so it is star-shaped about 0 and
/// quasar-convex, but `g''` changes sign.
#[derive(Debug, Clone)]
struct QuasarWave {
    x_star: Vec<f64>,
    c: f64,
    omega: f64,
}

impl QuasarWave {
    fn profile(&self, r: f64) -> f64 {
        r - self.c * (self.omega * r).sin() / self.omega
    }

    fn slope(&self, r: f64) -> f64 {
        1.0 - self.c * (self.omega * r).cos()
    }
}

impl Objective for QuasarWave {
    fn dim(&self) -> usize {
        self.x_star.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.profile(dist(x, &self.x_star))
    }

    fn subgrad(&self, x: &[f64]) -> Vec<f64> {
        let y = sub(x, &self.x_star);
        let r = norm(&y);
        if r == 0.0 {
            return vec![0.0; y.len()];
        }
        let s = self.slope(r) / r;
        y.iter().map(|v| s * v).collect()
    }

    fn generalized_grad(&self, x: &[f64], w: &[f64]) -> Vec<f64> {
        let nw = norm(w);
        if dist(x, &self.x_star) == 0.0 && nw > 0.0 {
            let s = self.slope(0.0) / nw;
            return w.iter().map(|v| s * v).collect();
        }
        self.subgrad(x)
    }

    fn max_on_ball(&self, r: f64) -> Option<f64> {
        // g is increasing, so the farthest point of the ball wins
        Some(self.profile(r + norm(&self.x_star)))
    }

    fn is_convex(&self) -> bool {
        false
    }
}

/// Non-convex quasar-convex benchmark. The declared `gamma` is the infimum of
/// `r g'(r) / g(r)` over a fine radial grid on `(0, 2R]`, which is the
/// first-order quasar criterion along rays; `verify::certify_quasar` checks it
/// independently through function values.
pub fn make_quasar_wave(x_star: Vec<f64>, c: f64, omega: f64, radius: f64) -> Result<Problem> {
    if x_star.is_empty() || !(c > 0.0 && c < 1.0) || !(omega > 0.0) {
        return Err(Error::invalid("quasar_wave needs d >= 1, 0 < c < 1, omega > 0"));
    }
    if norm(&x_star) > radius {
        return Err(Error::invalid("quasar_wave needs |x*| <= R"));
    }
    // distances from x* to points of Q_{2R}
    let reach = 2.0 * radius + norm(&x_star);
    let obj = QuasarWave { x_star: x_star.clone(), c, omega };
    let n = 200_000;
    let mut gamma: f64 = 1.0;
    for i in 1..=n {
        let r = reach * i as f64 / n as f64;
        gamma = gamma.min(r * obj.slope(r) / obj.profile(r));
    }
    // back off by the grid resolution of the ratio
    let gamma = (gamma - 1e-6).clamp(1e-6, 1.0);
    let m1 = 1.0 / radius;
    let mut cst = ProblemConstants::lipschitz(radius, 1.0 + c, m1, 0.0, x_star);
    cst.gamma = gamma;
    Problem::new(format!("quasar_wave{{c={c},omega={omega}}}"), Arc::new(obj), with_unknown_gap(cst))
}

/// One of the one-dimensional lower-bound constructions.
pub fn make_lower_bound(kind: LowerKind, radius: f64, g0: f64, g1: f64, eps: f64) -> Result<Problem> {
    let lb = LowerBound::new(kind, radius, g0, g1, eps)?;
    let c = ProblemConstants::lipschitz(radius, g0, g1, 0.0, vec![lb.minimizer()]);
    Problem::new(format!("lower:{}", kind.id()), Arc::new(lb), with_unknown_gap(c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    fn id1() -> DenseMatrix {
        DenseMatrix::scaled_identity(1, 1.0)
    }

    #[test]
    fn power_inf_examples() {
        let p = make_power_inf(id1(), vec![0.0], 2.0, 1.0, 5.0).unwrap();
        assert_eq!(p.value(&[3.0]), 9.0);
        assert_eq!(p.subgrad(&[3.0]), vec![6.0]);
        assert_eq!(p.constants().m0, 1.0);
        assert_eq!(p.constants().m1, 1.0);
        assert_eq!(p.value(&p.constants().x_star), 0.0);
        assert_eq!(p.subgrad(&[0.0]), vec![0.0]);
        assert!(make_power_inf(id1(), vec![0.0], 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn power_inf_solves_for_minimizer() {
        let a = DenseMatrix::new(2, 2, vec![2.0, 1.0, 0.0, 1.0]).unwrap();
        let p = make_power_inf(a, vec![1.0, 0.25], 3.0, 0.5, 2.0).unwrap();
        let xs = p.constants().x_star.clone();
        assert!((xs[0] - 0.375).abs() < 1e-14 && (xs[1] - 0.25).abs() < 1e-14);
        assert!(p.gap(&xs).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_system_is_rejected() {
        let a = DenseMatrix::new(2, 1, vec![1.0, 1.0]).unwrap();
        assert!(make_exp_inf(a, vec![1.0, -1.0], 1.0).is_err());
    }

    #[test]
    fn exp_inf_examples() {
        let p = make_exp_inf(id1(), vec![0.0], 2.0).unwrap();
        assert_eq!(p.value(&[0.0]), 1.0);
        assert_eq!(p.constants().f_star, 1.0);
        assert!((p.subgrad(&[2.0])[0] - 7.389_056_098_930_65).abs() < 1e-12);
        assert_eq!((p.constants().m0, p.constants().m1), (1.0, 1.0));
        // maximal gap on [-2, 2] by monotonicity in |x|
        assert!((p.constants().max_gap - (E * E - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn subgrad_ties_pick_lowest_index() {
        let p = make_exp_inf(DenseMatrix::scaled_identity(2, 1.0), vec![0.0, 0.0], 1.0).unwrap();
        let g = p.subgrad(&[0.5, -0.5]);
        assert_eq!(g[1], 0.0);
        assert!(g[0] > 0.0);
    }

    #[test]
    fn holder_examples() {
        let p = make_holder(1.0, 2.0, vec![0.0], 4.0, 1.0).unwrap();
        assert_eq!(p.value(&[3.0]), 9.0);
        assert_eq!(p.subgrad(&[3.0]), vec![6.0]);
        let q = make_holder(0.0, 1.0, vec![0.0, 0.0], 1.0, 1.0).unwrap();
        assert!((q.value(&[3.0, 4.0]) - 5.0).abs() < 1e-15);
        assert!((norm(&q.subgrad(&[3.0, 4.0])) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn holder_gradient_matches_central_difference() {
        // independent oracle: symmetric difference quotient
        let p = make_holder(0.5, 1.0, vec![0.0], 2.0, 0.5).unwrap();
        let h = 1e-6;
        let fd = (p.value(&[1.3 + h]) - p.value(&[1.3 - h])) / (2.0 * h);
        assert!((p.subgrad(&[1.3])[0] - fd).abs() < 1e-5);
    }

    #[test]
    fn abs_generalized_gradient_at_kink() {
        let p = make_abs_power(1, 1.0, 1.0).unwrap();
        assert_eq!(p.generalized_grad(&[0.0], &[1.0]), vec![1.0]);
        assert_eq!(p.generalized_grad(&[0.0], &[-1.0]), vec![-1.0]);
        assert_eq!(p.generalized_grad(&[0.3], &[-1.0]), p.subgrad(&[0.3]));
    }

    #[test]
    fn norm_inf_generalized_gradient_realizes_directional_derivative() {
        let p = make_norm_inf(vec![0.0, 0.0], 1.0, 0.0).unwrap();
        // at the kink x = x*, f'(x; w) = |w|_inf
        let w = [0.3, -0.7];
        let g = p.generalized_grad(&[0.0, 0.0], &w);
        assert!((dot(&g, &w) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn quasar_wave_is_not_convex_but_star_shaped() {
        let p = make_quasar_wave(vec![0.0], 0.5, 4.0 * std::f64::consts::PI, 1.0).unwrap();
        let c = p.constants();
        assert!(c.gamma > 0.3 && c.gamma < 0.5, "gamma = {}", c.gamma);
        // midpoint convexity fails somewhere
        let (a, b) = (0.2, 0.4);
        let mid = p.value(&[0.3]);
        let chord = 0.5 * (p.value(&[a]) + p.value(&[b]));
        let (a2, b2) = (0.45, 0.55);
        let mid2 = p.value(&[0.5]);
        let chord2 = 0.5 * (p.value(&[a2]) + p.value(&[b2]));
        assert!(mid > chord || mid2 > chord2);
    }
}

//! Online linear optimization over a ball or box of radius `R`.
//!
//! A learner plays `z_k`, observes a linear loss `g_k`, and plays `z_{k+1}`.
//! All learners start at `z_1 = 0`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{dot, inv_sqrt_psd, norm, norm1, norm_sq, project_ball_unchecked, ratio, SymMat};

/// Default `delta` for the diagonal and matrix learners.
pub const DEFAULT_DELTA_PRECOND: f64 = 1e-16;
/// Eigenvalue floor of the matrix learner, relative to the largest entry of
/// the matrix being inverted. Relative so the plays stay scale-free.
pub const MATRIX_FLOOR: f64 = 1e-12;

/// `(S)^{-1/2}` with the relative floor applied.
pub(crate) fn matrix_precond(s: &SymMat) -> Result<SymMat> {
    inv_sqrt_psd(s, MATRIX_FLOOR * s.max_abs().max(f64::MIN_POSITIVE))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LearnerKind {
    SoloScalar,
    OgdAdaGrad,
    SoloDiag,
    LeonDiag,
    LeonMatrix,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 5] = [
        LearnerKind::SoloScalar,
        LearnerKind::OgdAdaGrad,
        LearnerKind::SoloDiag,
        LearnerKind::LeonDiag,
        LearnerKind::LeonMatrix,
    ];

    pub fn id(self) -> &'static str {
        match self {
            LearnerKind::SoloScalar => "solo_scalar",
            LearnerKind::OgdAdaGrad => "ogd_adagrad",
            LearnerKind::SoloDiag => "solo_diag",
            LearnerKind::LeonDiag => "leon_diag",
            LearnerKind::LeonMatrix => "leon_matrix",
        }
    }

    pub fn from_id(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.id() == s)
    }

    /// The set the learner's plays live in.
    pub fn geometry(self) -> Geometry {
        match self {
            LearnerKind::SoloDiag | LearnerKind::LeonDiag => Geometry::Box,
            _ => Geometry::Euclid,
        }
    }

    pub fn default_delta(self) -> f64 {
        match self {
            LearnerKind::SoloScalar | LearnerKind::OgdAdaGrad => 0.0,
            _ => DEFAULT_DELTA_PRECOND,
        }
    }
}

/// Feasible set of the plays: Euclidean ball or coordinate box of
/// half-width `R`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Geometry {
    Euclid,
    Box,
}

#[derive(Debug, Clone)]
enum Accum {
    Scalar { g_sum: Vec<f64>, v_sum: f64 },
    Ogd { v_sum: f64 },
    Diag { g_sum: Vec<f64>, v_diag: Vec<f64> },
    Matrix { g_sum: Vec<f64>, v_mat: SymMat },
}

/// Learner state. Cloning snapshots it; [`LearnerState::step`] advances it.
#[derive(Debug, Clone)]
pub struct LearnerState {
    kind: LearnerKind,
    radius: f64,
    delta: f64,
    z: Vec<f64>,
    acc: Accum,
}

impl LearnerState {
    pub fn new(kind: LearnerKind, dim: usize, radius: f64) -> Result<Self> {
        Self::with_delta(kind, dim, radius, kind.default_delta())
    }

    /// `delta` initializes the second-moment accumulator (`v_0 = delta`,
    /// `v_0 = delta 1` or `V_0 = delta I`).
    pub fn with_delta(kind: LearnerKind, dim: usize, radius: f64, delta: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("learner dimension must be >= 1"));
        }
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(format!("learner radius must be > 0, got {radius}")));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(Error::invalid(format!("delta must be >= 0, got {delta}")));
        }
        let acc = match kind {
            LearnerKind::SoloScalar => Accum::Scalar { g_sum: vec![0.0; dim], v_sum: delta },
            LearnerKind::OgdAdaGrad => Accum::Ogd { v_sum: delta },
            LearnerKind::SoloDiag | LearnerKind::LeonDiag => {
                Accum::Diag { g_sum: vec![0.0; dim], v_diag: vec![delta; dim] }
            }
            LearnerKind::LeonMatrix => {
                Accum::Matrix { g_sum: vec![0.0; dim], v_mat: SymMat::scaled_identity(dim, delta) }
            }
        };
        Ok(Self { kind, radius, delta, z: vec![0.0; dim], acc })
    }

    pub fn kind(&self) -> LearnerKind {
        self.kind
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// The current play.
    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// `sum |g_i|^2` seen so far (excluding the `delta` initialization).
    pub fn grad_sq_total(&self) -> f64 {
        match &self.acc {
            Accum::Scalar { v_sum, .. } | Accum::Ogd { v_sum } => v_sum - self.delta,
            Accum::Diag { v_diag, .. } => v_diag.iter().map(|v| v - self.delta).sum(),
            Accum::Matrix { v_mat, .. } => (0..v_mat.dim()).map(|i| v_mat.get(i, i) - self.delta).sum(),
        }
    }

    /// Observe `g` for the current play and return the next play.
    pub fn step(&mut self, g: &[f64]) -> Result<&[f64]> {
        if g.len() != self.z.len() {
            return Err(Error::Dimension { expected: self.z.len(), got: g.len() });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("learner gradient"));
        }
        let r = self.radius;
        match &mut self.acc {
            Accum::Scalar { g_sum, v_sum } => {
                for (s, gi) in g_sum.iter_mut().zip(g) {
                    *s += gi;
                }
                *v_sum += norm_sq(g);
                let sv = v_sum.sqrt();
                let u: Vec<f64> = g_sum.iter().map(|s| ratio(*s, sv)).collect();
                self.z = project_ball_unchecked(&u, 1.0).iter().map(|v| -r * v).collect();
            }
            Accum::Ogd { v_sum } => {
                *v_sum += norm_sq(g);
                if *v_sum > 0.0 {
                    let eta = r / (2.0 * *v_sum).sqrt();
                    let y: Vec<f64> = self.z.iter().zip(g).map(|(z, gi)| z - eta * gi).collect();
                    self.z = project_ball_unchecked(&y, r);
                }
            }
            Accum::Diag { g_sum, v_diag } => {
                for ((s, v), gi) in g_sum.iter_mut().zip(v_diag.iter_mut()).zip(g) {
                    *s += gi;
                    *v += gi * gi;
                }
                let leon = self.kind == LearnerKind::LeonDiag;
                self.z = g_sum
                    .iter()
                    .zip(v_diag.iter())
                    .map(|(s, v)| {
                        if leon {
                            -r * ratio(*s, (s * s + v).sqrt())
                        } else {
                            -r * ratio(*s, v.sqrt()).clamp(-1.0, 1.0)
                        }
                    })
                    .collect();
            }
            Accum::Matrix { g_sum, v_mat } => {
                for (s, gi) in g_sum.iter_mut().zip(g) {
                    *s += gi;
                }
                v_mat.add_outer(g, 1.0);
                let mut s = v_mat.clone();
                s.add_outer(g_sum, 1.0);
                let p = matrix_precond(&s)?;
                self.z = p.mul_vec(g_sum).iter().map(|v| -r * v).collect();
            }
        }
        Ok(&self.z)
    }

    /// Multiply every past gradient by `factor`. Plays of the scale-free
    /// learners are unchanged (up to the `delta` term).
    pub fn rescale(&mut self, factor: f64) {
        let f2 = factor * factor;
        match &mut self.acc {
            Accum::Scalar { g_sum, v_sum } => {
                g_sum.iter_mut().for_each(|v| *v *= factor);
                *v_sum *= f2;
            }
            Accum::Ogd { v_sum } => *v_sum *= f2,
            Accum::Diag { g_sum, v_diag } => {
                g_sum.iter_mut().for_each(|v| *v *= factor);
                v_diag.iter_mut().for_each(|v| *v *= f2);
            }
            Accum::Matrix { g_sum, v_mat } => {
                g_sum.iter_mut().for_each(|v| *v *= factor);
                v_mat.scale_in_place(f2);
            }
        }
        self.delta *= f2;
    }

    /// Largest accumulator magnitude, for overflow monitoring.
    pub fn magnitude(&self) -> f64 {
        match &self.acc {
            Accum::Scalar { v_sum, .. } | Accum::Ogd { v_sum } => *v_sum,
            Accum::Diag { v_diag, .. } => v_diag.iter().fold(0.0, |a, v| a.max(*v)),
            Accum::Matrix { v_mat, .. } => v_mat.max_abs(),
        }
    }
}

/// Running regret statistics; the play/gradient history is kept on request.
#[derive(Debug, Clone, Default)]
pub struct RegretRecord {
    pub z_history: Vec<Vec<f64>>,
    pub g_history: Vec<Vec<f64>>,
    pub g_total: Vec<f64>,
    /// `sum <z_k, g_k>`
    pub lin_sum: f64,
    /// `sum |g_k|^2`
    pub sq_sum: f64,
    steps: usize,
    keep_history: bool,
}

impl RegretRecord {
    pub fn new(dim: usize, keep_history: bool) -> Self {
        Self { g_total: vec![0.0; dim], keep_history, ..Default::default() }
    }

    pub fn push(&mut self, z: &[f64], g: &[f64]) {
        self.lin_sum += dot(z, g);
        self.sq_sum += norm_sq(g);
        for (t, gi) in self.g_total.iter_mut().zip(g) {
            *t += gi;
        }
        if self.keep_history {
            self.z_history.push(z.to_vec());
            self.g_history.push(g.to_vec());
        }
        self.steps += 1;
    }

    pub fn len(&self) -> usize {
        self.steps
    }

    pub fn is_empty(&self) -> bool {
        self.steps == 0
    }

    /// Multiply every recorded gradient by `factor`.
    pub fn rescale(&mut self, factor: f64) {
        self.lin_sum *= factor;
        self.sq_sum *= factor * factor;
        self.g_total.iter_mut().for_each(|v| *v *= factor);
        for g in &mut self.g_history {
            g.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// `R sqrt(sum |g_k|^2)`, the scale of the regret bound.
    pub fn bound_scale(&self, radius: f64) -> f64 {
        radius * self.sq_sum.sqrt()
    }
}

/// `max_{z in set} sum <z_k - z, g_k>` via the support function of the set.
pub fn regret_eval(rec: &RegretRecord, radius: f64, geometry: Geometry) -> f64 {
    let support = match geometry {
        Geometry::Euclid => norm(&rec.g_total),
        Geometry::Box => norm1(&rec.g_total),
    };
    rec.lin_sum + radius * support
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RunRng;
    use proptest::prelude::*;

    #[test]
    fn solo_first_step() {
        let mut l = LearnerState::new(LearnerKind::SoloScalar, 2, 2.0).unwrap();
        let z = l.step(&[3.0, 4.0]).unwrap().to_vec();
        assert!((z[0] + 1.2).abs() < 1e-15 && (z[1] + 1.6).abs() < 1e-15);
    }

    #[test]
    fn zero_gradients_keep_zero_play() {
        for kind in LearnerKind::ALL {
            let mut l = LearnerState::with_delta(kind, 3, 1.0, 0.0).unwrap();
            for _ in 0..5 {
                assert_eq!(l.step(&[0.0; 3]).unwrap(), &[0.0; 3], "{kind:?}");
            }
        }
    }

    #[test]
    fn leon_diag_single_equal_coordinates() {
        let mut l = LearnerState::with_delta(LearnerKind::LeonDiag, 3, 1.0, 0.0).unwrap();
        let z = l.step(&[0.7; 3]).unwrap();
        for v in z {
            assert!((v + 0.5f64.sqrt()).abs() < 1e-15);
        }
    }

    #[test]
    fn leon_matrix_single_step_direction() {
        // V = g g^T + delta I, so (G G^T + V)^{-1/2} g = g / sqrt(2|g|^2 + delta)
        let mut l = LearnerState::with_delta(LearnerKind::LeonMatrix, 3, 1.0, 1e-4).unwrap();
        let g = [1.0, -2.0, 0.5];
        let z = l.step(&g).unwrap().to_vec();
        let s = (2.0 * norm_sq(&g) + 1e-4).sqrt();
        for (zi, gi) in z.iter().zip(g) {
            assert!((zi + gi / s).abs() < 1e-12);
        }
    }

    #[test]
    fn ogd_first_step() {
        let mut l = LearnerState::new(LearnerKind::OgdAdaGrad, 2, 1.0).unwrap();
        let z = l.step(&[3.0, 4.0]).unwrap().to_vec();
        // eta = 1/sqrt(50), step = (3,4)/sqrt(50), norm 1/sqrt(2) < R
        assert!((z[0] + 3.0 / 50f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn regret_examples() {
        let mut rec = RegretRecord::new(2, true);
        rec.push(&[0.0, 0.0], &[1.0, 0.0]);
        rec.push(&[0.0, 0.0], &[0.0, 1.0]);
        assert!((regret_eval(&rec, 2.0, Geometry::Euclid) - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        let mut one = RegretRecord::new(2, false);
        one.push(&[-0.6, -0.8], &[3.0, 4.0]);
        assert!(regret_eval(&one, 1.0, Geometry::Euclid).abs() < 1e-15);
    }

    #[test]
    fn regret_matches_dense_direction_search() {
        // oracle: max over many unit directions u of sum <z_k + R u, g_k> - ...,
        // i.e. the comparator z = -R u
        let mut rng = RunRng::new(5, 0);
        let mut rec = RegretRecord::new(3, true);
        for k in 0..3 {
            rng.start_iteration(k);
            let z: Vec<f64> = (0..3).map(|_| rng.range(-1.0, 1.0)).collect();
            let g: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
            rec.push(&z, &g);
        }
        let r = 1.5;
        let exact = regret_eval(&rec, r, Geometry::Euclid);
        let mut best = f64::NEG_INFINITY;
        for i in 0..1_000_000u64 {
            rng.start_iteration(100 + i);
            let u: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
            let n = norm(&u);
            let val: f64 = rec.z_history.iter().zip(&rec.g_history).map(|(z, g)| dot(z, g) + r * dot(&u, g) / n).sum();
            best = best.max(val);
        }
        assert!(best <= exact * (1.0 + 1e-12));
        assert!((exact - best).abs() <= 1e-4 * exact.abs(), "{exact} vs {best}");
    }

    #[test]
    fn grad_sq_total_tracks_sum() {
        for kind in LearnerKind::ALL {
            let mut l = LearnerState::new(kind, 2, 1.0).unwrap();
            let mut s = 0.0;
            for k in 0..50 {
                let g = [(k as f64).sin() * 10f64.powi(k % 7 - 3), (k as f64).cos()];
                s += norm_sq(&g);
                l.step(&g).unwrap();
            }
            assert!((l.grad_sq_total() - s).abs() <= 1e-9 * s, "{kind:?}");
        }
    }

    proptest! {
        #[test]
        fn plays_are_feasible(gs in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 3), 1..40)) {
            for kind in LearnerKind::ALL {
                let mut l = LearnerState::new(kind, 3, 2.0).unwrap();
                for g in &gs {
                    let z = l.step(g).unwrap();
                    match kind.geometry() {
                        Geometry::Euclid => prop_assert!(norm(z) <= 2.0 + 1e-12),
                        Geometry::Box => prop_assert!(z.iter().all(|v| v.abs() <= 2.0)),
                    }
                }
            }
        }

        #[test]
        fn solo_is_scale_equivariant(gs in proptest::collection::vec(proptest::collection::vec(-10f64..10.0, 2), 1..30), j in -20i32..20) {
            let lam = 2f64.powi(j);
            let mut a = LearnerState::new(LearnerKind::SoloScalar, 2, 1.0).unwrap();
            let mut b = a.clone();
            for g in &gs {
                let gb: Vec<f64> = g.iter().map(|v| v * lam).collect();
                let za = a.step(g).unwrap().to_vec();
                let zb = b.step(&gb).unwrap().to_vec();
                prop_assert_eq!(za, zb);
            }
        }
    }
}

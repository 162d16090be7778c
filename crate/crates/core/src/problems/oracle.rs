use super::{Problem, ProblemConstants};
use crate::numerics::{norm, ratio};
use crate::rng::{DrawId, RunRng};

/// How randomness enters the gradient estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseModel {
    Deterministic,
    /// Multiply the gap-proportional part by `xi in {0, 2}`; declares
    /// `G1 = 2 M1`.
    VBernoulli,
    /// Add zero-mean Rademacher noise of norm `scale` to the bounded part;
    /// declares `G0 = sqrt(M0^2 + scale^2)`.
    UAdditive {
        scale: f64,
    },
}

impl NoiseModel {
    pub fn id(&self) -> String {
        match self {
            NoiseModel::Deterministic => "deterministic".into(),
            NoiseModel::VBernoulli => "v-bernoulli".into(),
            NoiseModel::UAdditive { scale } => format!("u-additive:{scale}"),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "deterministic" => Some(NoiseModel::Deterministic),
            "v-bernoulli" => Some(NoiseModel::VBernoulli),
            _ => {
                let scale: f64 = s.strip_prefix("u-additive:")?.parse().ok()?;
                (scale >= 0.0 && scale.is_finite()).then_some(NoiseModel::UAdditive { scale })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSample {
    pub grad: Vec<f64>,
    pub u_part: Vec<f64>,
    pub v_part: Vec<f64>,
    /// RNG counter position at the first draw of this sample.
    pub draw: DrawId,
}

/// Stochastic gradient oracle over a suite problem.
#[derive(Debug, Clone)]
pub struct StochOracle {
    problem: Problem,
    noise: NoiseModel,
    declared: ProblemConstants,
}

impl StochOracle {
    pub fn new(problem: Problem, noise: NoiseModel) -> Self {
        let mut declared = problem.constants().clone();
        match noise {
            NoiseModel::Deterministic => {}
            NoiseModel::VBernoulli => declared.g1 = 2.0 * declared.m1,
            NoiseModel::UAdditive { scale } => declared.g0 = declared.m0.hypot(scale),
        }
        Self { problem, noise, declared }
    }

    pub fn problem(&self) -> &Problem {
        &self.problem
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    /// Problem constants with `G0`, `G1` adjusted to the noise model.
    pub fn constants(&self) -> &ProblemConstants {
        &self.declared
    }

    pub fn sample(&self, x: &[f64], rng: &mut RunRng) -> OracleSample {
        self.perturb(self.problem.subgrad(x), rng)
    }

    /// Split `g` into `u = g min(1, M0/|g|)` and `v = g - u`, then apply the
    /// noise model. Any subgradient obeying `|g| <= M0 + M1 gap` gives
    /// `|v| <= M1 gap`.
    fn perturb(&self, g: Vec<f64>, rng: &mut RunRng) -> OracleSample {
        let draw = rng.position();
        let c = ratio(self.declared.m0, norm(&g)).min(1.0);
        let mut u: Vec<f64> = g.iter().map(|gi| gi * c).collect();
        let mut v: Vec<f64> = g.iter().zip(&u).map(|(gi, ui)| gi - ui).collect();
        match self.noise {
            NoiseModel::Deterministic => {}
            NoiseModel::VBernoulli => {
                let xi = if rng.coin() { 2.0 } else { 0.0 };
                for vi in &mut v {
                    *vi *= xi;
                }
            }
            NoiseModel::UAdditive { scale } => {
                let a = scale / (u.len() as f64).sqrt();
                for ui in &mut u {
                    *ui += if rng.coin() { a } else { -a };
                }
            }
        }
        let grad = u.iter().zip(&v).map(|(a, b)| a + b).collect();
        OracleSample { grad, u_part: u, v_part: v, draw }
    }
}

/// Oracle returning generalized gradients `grad f(x; w)`.
#[derive(Debug, Clone)]
pub struct QuasarOracle {
    inner: StochOracle,
}

impl QuasarOracle {
    pub fn new(problem: Problem, noise: NoiseModel) -> Self {
        Self { inner: StochOracle::new(problem, noise) }
    }

    pub fn problem(&self) -> &Problem {
        self.inner.problem()
    }

    pub fn constants(&self) -> &ProblemConstants {
        self.inner.constants()
    }

    pub fn noise(&self) -> NoiseModel {
        self.inner.noise()
    }

    pub fn sample_generalized_grad(&self, x: &[f64], w: &[f64], rng: &mut RunRng) -> OracleSample {
        self.inner.perturb(self.inner.problem.generalized_grad(x, w), rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_abs_power, make_exp_inf, DenseMatrix};
    use std::f64::consts::E;

    fn exp1() -> Problem {
        make_exp_inf(DenseMatrix::scaled_identity(1, 1.0), vec![0.0], 2.0).unwrap()
    }

    #[test]
    fn deterministic_split_on_exp_inf() {
        let o = StochOracle::new(exp1(), NoiseModel::Deterministic);
        let mut rng = RunRng::new(0, 0);
        let s = o.sample(&[2.0], &mut rng);
        assert!((s.grad[0] - E * E).abs() < 1e-12);
        assert_eq!(s.u_part, vec![1.0]);
        assert!((s.v_part[0] - (E * E - 1.0)).abs() < 1e-12);
        let at_min = o.sample(&[0.0], &mut rng);
        assert_eq!(at_min.v_part, vec![0.0]);
    }

    #[test]
    fn bernoulli_is_unbiased() {
        let o = StochOracle::new(exp1(), NoiseModel::VBernoulli);
        assert_eq!(o.constants().g1, 2.0);
        let x = [1.5];
        let n = 100_000u64;
        let mut rng = RunRng::new(11, 2);
        let (mut s1, mut s2) = (0.0, 0.0);
        for k in 0..n {
            rng.start_iteration(k);
            let g = o.sample(&x, &mut rng).grad[0];
            s1 += g;
            s2 += g * g;
        }
        let mean = s1 / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        let truth = o.problem().subgrad(&x)[0];
        assert!((mean - truth).abs() < 3.0 * se, "{mean} vs {truth} (se {se})");
    }

    #[test]
    fn decomposition_is_exact_and_v_bounded() {
        let p = exp1();
        for noise in [NoiseModel::Deterministic, NoiseModel::VBernoulli, NoiseModel::UAdditive { scale: 0.5 }] {
            let o = StochOracle::new(p.clone(), noise);
            let mut rng = RunRng::new(3, 0);
            for i in 0..200u64 {
                rng.start_iteration(i);
                let x = [-2.0 + 4.0 * i as f64 / 199.0];
                let s = o.sample(&x, &mut rng);
                for j in 0..1 {
                    assert_eq!(s.grad[j], s.u_part[j] + s.v_part[j]);
                }
                let bound = o.constants().g1 * p.gap(&x) * (1.0 + 1e-12);
                assert!(norm(&s.v_part) <= bound, "{noise:?} x={x:?}");
            }
        }
    }

    #[test]
    fn noise_model_ids_round_trip() {
        for n in [NoiseModel::Deterministic, NoiseModel::VBernoulli, NoiseModel::UAdditive { scale: 0.25 }] {
            assert_eq!(NoiseModel::parse(&n.id()), Some(n));
        }
        assert_eq!(NoiseModel::parse("u-additive:-1"), None);
    }

    #[test]
    fn generalized_gradient_at_abs_kink() {
        let o = QuasarOracle::new(make_abs_power(1, 1.0, 1.0).unwrap(), NoiseModel::Deterministic);
        let mut rng = RunRng::new(0, 0);
        assert_eq!(o.sample_generalized_grad(&[0.0], &[1.0], &mut rng).grad, vec![1.0]);
        assert_eq!(o.sample_generalized_grad(&[0.0], &[-1.0], &mut rng).grad, vec![-1.0]);
        let plain = StochOracle::new(o.problem().clone(), NoiseModel::Deterministic);
        assert_eq!(o.sample_generalized_grad(&[0.4], &[-1.0], &mut rng).grad, plain.sample(&[0.4], &mut rng).grad);
    }
}

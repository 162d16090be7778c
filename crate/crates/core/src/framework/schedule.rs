use std::f64::consts::E;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::problems::ProblemConstants;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScheduleKind {
    /// `alpha_k = 1/k`, `pi_0 = 0`
    Avg,
    /// constant `alpha`, `pi_0 = 1`
    ExpConst,
    /// constant large `alpha` for `S T` steps, then a smaller constant
    TwoStage,
    /// two-stage schedule driven by the Hölder-type constants
    Universal,
    /// two-stage schedule with the quasar `pi` recursion
    QuasarTwoStage,
}

impl ScheduleKind {
    pub const ALL: [ScheduleKind; 5] = [
        ScheduleKind::Avg,
        ScheduleKind::ExpConst,
        ScheduleKind::TwoStage,
        ScheduleKind::Universal,
        ScheduleKind::QuasarTwoStage,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ScheduleKind::Avg => "avg",
            ScheduleKind::ExpConst => "exp_const",
            ScheduleKind::TwoStage => "two_stage",
            ScheduleKind::Universal => "universal",
            ScheduleKind::QuasarTwoStage => "quasar_two_stage",
        }
    }

    pub fn from_id(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.id() == s)
    }
}

/// `pi_k (1 - alpha_k) = pi_{k-1}` or `pi_k (1 - gamma alpha_k) = pi_{k-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PiRecursion {
    Standard,
    Quasar,
}

/// The `(alpha_k, pi_k)` sequences and horizon of a conversion run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub recursion: PiRecursion,
    pub pi0: f64,
    pub c_hat: f64,
    pub eps: f64,
    /// Quasar parameter; 1 for the convex schedules.
    pub gamma: f64,
    pub t: u64,
    pub s: u64,
    pub k: u64,
    /// `1/alpha_k` for `k <= switch_at` (unused by `avg`).
    pub inv_alpha1: f64,
    /// `1/alpha_k` for `k > switch_at`.
    pub inv_alpha2: f64,
    /// Last index of the first stage (`S T`); `u64::MAX` for a constant
    /// schedule.
    pub switch_at: u64,
    /// Every derived quantity in derivation order.
    pub derived: Vec<(String, f64)>,
    pub constants: ProblemConstants,
}

fn ceil_count(name: &str, v: f64) -> Result<u64> {
    if !v.is_finite() || !(0.0..=9.0e15).contains(&v) {
        return Err(Error::invalid(format!("{name} = {v:e} is not a usable iteration count")));
    }
    Ok(v.ceil() as u64)
}

fn require(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::regime(what.to_string()))
    }
}

impl Schedule {
    /// Build a schedule from the declared constants. `gamma` overrides the
    /// constants' quasar parameter for `QuasarTwoStage`.
    pub fn new(kind: ScheduleKind, c: &ProblemConstants, eps: f64, c_hat: f64, gamma: Option<f64>) -> Result<Self> {
        if !(eps > 0.0) || !eps.is_finite() {
            return Err(Error::regime(format!("eps > 0 fails (eps = {eps})")));
        }
        if !(c_hat > 0.0) || !c_hat.is_finite() {
            return Err(Error::invalid(format!("C_hat must be > 0, got {c_hat}")));
        }
        let r = c.radius;
        let (g0, g1, f) = (c.g0, c.g1, c.max_gap);
        let mut derived: Vec<(String, f64)> = vec![
            ("R".into(), r),
            ("G0".into(), g0),
            ("G1".into(), g1),
            ("F".into(), f),
            ("eps".into(), eps),
            ("C_hat".into(), c_hat),
        ];
        let mut log = |name: &str, v: f64| derived.push((name.to_string(), v));
        let mut sched = Schedule {
            kind,
            recursion: PiRecursion::Standard,
            pi0: 1.0,
            c_hat,
            eps,
            gamma: 1.0,
            t: 1,
            s: 0,
            k: 0,
            inv_alpha1: f64::NAN,
            inv_alpha2: f64::NAN,
            switch_at: u64::MAX,
            derived: Vec::new(),
            constants: c.clone(),
        };
        match kind {
            ScheduleKind::Avg => {
                require(r * g1 >= 1.0, "R*G1 >= 1 (avg schedule)")?;
                sched.pi0 = 0.0;
                let a = r * g0 / eps;
                let b = (r * g1).powi(2) * (f / eps);
                let k = a * a + b * (E + a + b).ln();
                log("K_raw", k);
                sched.k = ceil_count("K", k)?;
            }
            ScheduleKind::ExpConst => {
                require(r * g1 >= 1.0, "R*G1 >= 1 (exp_const schedule)")?;
                let t = ceil_count("T", c_hat * (r * g1).powi(2))?;
                let tf = t as f64;
                let inv = (tf * r * g1).max((r * g0 / eps).powi(2)).max(tf * r * g0 / eps);
                sched.t = t;
                sched.inv_alpha1 = inv;
                sched.inv_alpha2 = inv;
                sched.k = ceil_count("K", 2.0 * inv * (E + f / eps).ln())?;
            }
            ScheduleKind::TwoStage => {
                require(r * g1 >= 1.0, "R*G1 >= 1 (two_stage schedule)")?;
                require(g0 > 0.0, "G0 > 0 (two_stage schedule)")?;
                let t = ceil_count("T", c_hat * (r * g1).powi(2))?;
                let tf = t as f64;
                let inv1 = tf * r * g1;
                let inv2 = inv1.max((r * g0 / eps).powi(2)).max(tf * r * g0 / eps);
                let s = ceil_count("S", (2.0 * inv1 / tf) * (E + f * g1 / g0).ln())?;
                let tail = ceil_count("K - S T", 2.0 * inv2 * (E + g0 / (g1 * eps)).ln())?;
                sched.set_two_stage(t, s, inv1, inv2, tail)?;
            }
            ScheduleKind::Universal => {
                let (nu, sigma, l0, l1) = (c.nu, c.sigma, c.l0, c.l1);
                require(r * l1 >= 1.0, "R*L1 >= 1 (universal schedule)")?;
                let t = ceil_count("T", c_hat * (r * l1).powi(2))?;
                let tf = t as f64;
                let inv1 = tf * r * l1;
                let inv2 = inv1
                    .max((r * sigma / eps).powi(2))
                    .max((r.powf(1.0 + nu) * l0 / eps).powf(2.0 / (1.0 + nu)))
                    .max(tf * r * sigma / eps)
                    .max(((tf * r).powf(1.0 + nu) * l0 / eps).powf(1.0 / (1.0 + nu)));
                let f_hat = l0 / l1.powf(1.0 + nu) + sigma / l1;
                require(f_hat > 0.0, "F_hat = L0/L1^(1+nu) + sigma/L1 > 0 (universal schedule)")?;
                log("nu", nu);
                log("sigma", sigma);
                log("L0", l0);
                log("L1", l1);
                log("F_hat", f_hat);
                let s = ceil_count("S", (2.0 * inv1 / tf) * (E + f / f_hat).ln())?;
                let tail = ceil_count("K - S T", 2.0 * inv2 * (E + f_hat / eps).ln())?;
                sched.set_two_stage(t, s, inv1, inv2, tail)?;
            }
            ScheduleKind::QuasarTwoStage => {
                let gamma = gamma.unwrap_or(c.gamma);
                require(gamma > 0.0 && gamma <= 1.0, "0 < gamma <= 1 (quasar schedule)")?;
                require(r * g1 >= 1.0, "R*G1 >= 1 (quasar schedule)")?;
                require(g0 > 0.0, "G0 > 0 (quasar schedule)")?;
                sched.recursion = PiRecursion::Quasar;
                sched.gamma = gamma;
                log("gamma", gamma);
                let t = ceil_count("T", c_hat * (r * g1 / gamma).powi(2))?;
                let tf = t as f64;
                let inv1 = tf * r * g1;
                let inv2 = inv1.max((r * g0 / eps).powi(2) / gamma).max(tf * r * g0 / eps / gamma);
                let s = ceil_count("S", (2.0 * inv1 / (gamma * tf)) * (E + gamma * f * g1 / g0).ln())?;
                let tail = ceil_count("K - S T", (2.0 * inv2 / gamma) * (E + g0 / (gamma * g1 * eps)).ln())?;
                sched.set_two_stage(t, s, inv1, inv2, tail)?;
            }
        }
        if kind != ScheduleKind::Avg {
            // pi_1 = pi_0 / (1 - rho alpha_1) must stay finite
            let rho = sched.gamma;
            require(
                rho / sched.inv_alpha_at(1) < 1.0,
                "gamma * alpha_1 < 1 (otherwise pi_1 is infinite; increase C_hat or R*G1)",
            )?;
        }
        log("pi0", sched.pi0);
        log("T", sched.t as f64);
        log("S", sched.s as f64);
        log("switch_at", if sched.switch_at == u64::MAX { f64::INFINITY } else { sched.switch_at as f64 });
        log("inv_alpha1", sched.inv_alpha1);
        log("inv_alpha2", sched.inv_alpha2);
        log("K", sched.k as f64);
        sched.derived = derived;
        Ok(sched)
    }

    fn set_two_stage(&mut self, t: u64, s: u64, inv1: f64, inv2: f64, tail: u64) -> Result<()> {
        self.t = t;
        self.s = s;
        self.inv_alpha1 = inv1;
        self.inv_alpha2 = inv2;
        self.switch_at = t.checked_mul(s).ok_or_else(|| Error::invalid("S*T overflows"))?;
        self.k = self.switch_at.checked_add(tail).ok_or_else(|| Error::invalid("K overflows"))?;
        Ok(())
    }

    /// `1/alpha_k` for `k >= 1`.
    pub fn inv_alpha_at(&self, k: u64) -> f64 {
        match self.kind {
            ScheduleKind::Avg => k as f64,
            _ if k <= self.switch_at => self.inv_alpha1,
            _ => self.inv_alpha2,
        }
    }

    pub fn alpha_at(&self, k: u64) -> f64 {
        1.0 / self.inv_alpha_at(k)
    }

    fn rho(&self) -> f64 {
        match self.recursion {
            PiRecursion::Standard => 1.0,
            PiRecursion::Quasar => self.gamma,
        }
    }

    /// `ln pi_k` in closed form (`ln k` for `avg`).
    pub fn log_pi_at(&self, k: u64) -> f64 {
        if self.kind == ScheduleKind::Avg {
            return if k == 0 { f64::NEG_INFINITY } else { (k as f64).ln() };
        }
        let rho = self.rho();
        let l1 = -(-rho / self.inv_alpha1).ln_1p();
        let l2 = -(-rho / self.inv_alpha2).ln_1p();
        let first = k.min(self.switch_at) as f64;
        let second = k.saturating_sub(self.switch_at) as f64;
        self.pi0.ln() + first * l1 + second * l2
    }

    pub fn pi_at(&self, k: u64) -> f64 {
        if self.kind == ScheduleKind::Avg {
            return k as f64;
        }
        self.log_pi_at(k).exp()
    }

    /// `ln(alpha_k pi_k)`; exactly 0 for `avg`.
    pub fn log_weight_at(&self, k: u64) -> f64 {
        if self.kind == ScheduleKind::Avg {
            return 0.0;
        }
        self.log_pi_at(k) - self.inv_alpha_at(k).ln()
    }

    pub fn derived_value(&self, name: &str) -> Option<f64> {
        self.derived.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn consts(r: f64, g0: f64, g1: f64, f: f64) -> ProblemConstants {
        let mut c = ProblemConstants::lipschitz(r, g0, g1, 0.0, vec![0.0]);
        c.max_gap = f;
        c
    }

    #[test]
    fn exp_const_example() {
        let s = Schedule::new(ScheduleKind::ExpConst, &consts(1.0, 1.0, 8.0, 1.0), 0.1, 1.0, None).unwrap();
        assert_eq!(s.t, 64);
        assert_eq!(s.inv_alpha1, 640.0);
        assert_eq!(s.k, (2.0 * 640.0 * (E + 10.0).ln()).ceil() as u64);
        let unit = Schedule::new(ScheduleKind::ExpConst, &consts(1.0, 1.0, 1.0, 1.0), 0.1, 1.0, None).unwrap();
        assert_eq!(unit.t, 1);
    }

    #[test]
    fn avg_weights() {
        let s = Schedule::new(ScheduleKind::Avg, &consts(1.0, 1.0, 2.0, 1.0), 0.5, 1.0, None).unwrap();
        assert_eq!(s.alpha_at(5), 0.2);
        assert_eq!(s.pi_at(5), 5.0);
        assert_eq!(s.pi0, 0.0);
        assert_eq!(s.log_weight_at(7), 0.0);
        // pi_k (1 - alpha_k) = pi_{k-1}
        for k in 2..1000u64 {
            assert_eq!(s.pi_at(k) - s.pi_at(k) * s.alpha_at(k), s.pi_at(k - 1), "k = {k}");
        }
    }

    #[test]
    fn two_stage_switches_once() {
        let s = Schedule::new(ScheduleKind::TwoStage, &consts(1.0, 1.0, 8.0, 50.0), 0.01, 1.0, None).unwrap();
        assert_eq!(s.switch_at, s.s * s.t);
        let mut changes = 0;
        for k in 2..=s.k {
            let (a, b) = (s.alpha_at(k - 1), s.alpha_at(k));
            assert!(b <= a);
            if a != b {
                changes += 1;
                assert_eq!(k, s.switch_at + 1);
            }
        }
        assert_eq!(changes, 1);
    }

    #[test]
    fn pi_recursion_matches_closed_form() {
        for kind in [ScheduleKind::TwoStage, ScheduleKind::QuasarTwoStage] {
            let mut c = consts(1.0, 1.0, 3.0, 20.0);
            c.gamma = 0.5;
            let s = Schedule::new(kind, &c, 0.05, 1.0, None).unwrap();
            let rho = if kind == ScheduleKind::QuasarTwoStage { 0.5 } else { 1.0 };
            let mut pi = s.pi0;
            for k in 1..=s.k.min(20_000) {
                pi /= 1.0 - rho * s.alpha_at(k);
                let closed = s.pi_at(k);
                assert!((pi - closed).abs() <= 1e-12 * closed * (k as f64).sqrt().max(1.0), "{kind:?} k={k}");
            }
        }
    }

    #[test]
    fn regime_violations() {
        let low = consts(1.0, 1.0, 0.5, 1.0);
        for kind in [ScheduleKind::Avg, ScheduleKind::ExpConst, ScheduleKind::TwoStage] {
            let e = Schedule::new(kind, &low, 0.1, 1.0, None).unwrap_err();
            assert!(e.to_string().contains("R*G1 >= 1"), "{e}");
        }
        assert!(Schedule::new(ScheduleKind::ExpConst, &consts(1.0, 1.0, 8.0, 1.0), 0.0, 1.0, None).is_err());
        // T R G1 = 1 makes alpha_1 = 1
        let e = Schedule::new(ScheduleKind::TwoStage, &consts(1.0, 1.0, 1.0, 1.0), 0.1, 1.0, None).unwrap_err();
        assert!(e.to_string().contains("alpha_1 < 1"), "{e}");
        let mut c = consts(1.0, 1.0, 2.0, 1.0);
        c.l1 = 0.5;
        assert!(Schedule::new(ScheduleKind::Universal, &c, 0.1, 1.0, None).is_err());
    }

    #[test]
    fn universal_example() {
        // exp_inf-like constants: nu = 1, L0 = 0, sigma = L1 f*, F_hat = f*
        let mut c = consts(2.0, 1.0, 1.0, 1.0);
        c.nu = 1.0;
        c.sigma = 1.0;
        c.l0 = 0.0;
        c.l1 = 1.0;
        let s = Schedule::new(ScheduleKind::Universal, &c, 0.01, 1.0, None).unwrap();
        assert_eq!(s.t, 4);
        assert_eq!(s.inv_alpha1, 8.0);
        assert_eq!(s.inv_alpha2, 40_000.0);
        assert_eq!(s.derived_value("F_hat"), Some(1.0));
    }

    #[test]
    fn quasar_at_gamma_one_equals_two_stage() {
        let c = consts(1.0, 1.0, 4.0, 7.0);
        let a = Schedule::new(ScheduleKind::TwoStage, &c, 0.05, 1.0, None).unwrap();
        let b = Schedule::new(ScheduleKind::QuasarTwoStage, &c, 0.05, 1.0, Some(1.0)).unwrap();
        assert_eq!((a.t, a.s, a.k, a.inv_alpha1, a.inv_alpha2), (b.t, b.s, b.k, b.inv_alpha1, b.inv_alpha2));
    }
}

use serde::Serialize;

use super::run::par_map;
use crate::error::Result;
use crate::online::LearnerKind;
use crate::problems::{parse_problem, Problem};
use crate::verify::{
    certify_quasar, check_h_property, check_lemma_m01, check_regret_assumption, check_tech_lemma, negative_controls,
    random_streams, CheckReport, NegativeControl, QuasarGrid, TechVariant,
};

/// Problems the structural checks run on.
pub const SUITE: [&str; 14] = [
    "exp_inf{d=1}",
    "exp_inf{d=3,a=0.5,R=2}",
    "power_inf{d=2,p=3}",
    "power_inf{d=2,p=1.5,m1=2}",
    "norm_inf{d=3,xstar=0.2;-0.1;0.3}",
    "holder{d=1,nu=0.5}",
    "holder{d=2,nu=1,xstar=0.1;-0.2}",
    "abs_power{d=1,p=1}",
    "abs_power{d=2,p=2}",
    "quasar_wave{d=1}",
    "lower:sgd_I{R=1,G0=1,G1=8,eps=0.1}",
    "lower:sgd_II{R=1,G0=1,G1=8,eps=0.1}",
    "lower:ada_II{R=1,G0=1,G1=32,eps=0.01}",
    "lower:ada_III{R=1,G0=1,G1=32,eps=0.01}",
];

/// Sizes of the verification suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub seed: u64,
    pub pairs: u64,
    pub m01_tol: f64,
    pub tech_trials: u64,
    pub tech_tol: f64,
    pub streams: usize,
    pub stream_len: usize,
    pub regret_c: f64,
    pub h_constant: f64,
    pub quasar_points: usize,
    pub jobs: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            pairs: 10_000,
            m01_tol: 1e-8,
            tech_trials: 1000,
            tech_tol: 1e-9,
            streams: 100,
            stream_len: 1000,
            regret_c: 4.0,
            h_constant: 8.0,
            quasar_points: 200,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyOutcome {
    pub reports: Vec<CheckReport>,
    pub controls: Vec<NegativeControl>,
}

impl VerifyOutcome {
    /// Every check passed and every negative control was caught.
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed) && self.controls.iter().all(|c| c.detected)
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.reports {
            let stat = r.stat.map_or(String::new(), |v| format!(" stat={v:.6}"));
            s.push_str(&format!(
                "{:<5} {} {} checks={} violations={} worst_margin={:.3e}{}\n",
                if r.passed { "ok" } else { "FAIL" },
                r.checker,
                r.subject,
                r.checks,
                r.violations,
                r.worst_margin,
                stat
            ));
        }
        for c in &self.controls {
            s.push_str(&format!(
                "{:<5} negative control {} ({})\n",
                if c.detected { "ok" } else { "FAIL" },
                c.name,
                if c.detected { "caught" } else { "missed" }
            ));
        }
        s
    }
}

/// Certified gamma must land within `tol` of `expected`.
fn expect_gamma(mut rep: CheckReport, expected: f64, tol: f64) -> CheckReport {
    let got = rep.stat.unwrap_or(f64::NAN);
    if !((got - expected).abs() <= tol) {
        rep.passed = false;
        rep.notes.push(format!("expected gamma {expected} +- {tol}, certified {got}"));
    }
    rep
}

/// Run every checker at the given sizes plus the negative controls.
pub fn verify_suite(opts: &VerifyOptions) -> Result<VerifyOutcome> {
    let problems = SUITE.iter().map(|s| parse_problem(s)).collect::<Result<Vec<Problem>>>()?;
    let mut reports = par_map(&problems, opts.jobs, |p| check_lemma_m01(p, opts.pairs, opts.m01_tol, opts.seed));

    for v in [TechVariant::Tech, TechVariant::Tech2] {
        reports.push(check_tech_lemma(v, opts.tech_trials, opts.tech_tol, 1.0, opts.seed));
    }

    let streams = random_streams(opts.streams, opts.stream_len, opts.seed);
    for kind in [LearnerKind::SoloScalar, LearnerKind::OgdAdaGrad] {
        reports.push(check_regret_assumption(kind, &streams, 1.0, opts.regret_c)?);
    }

    for id in ["holder{d=1,nu=0.5}", "holder{d=2,nu=1,xstar=0.1;-0.2}"] {
        reports.push(check_h_property(&parse_problem(id)?, opts.pairs, opts.h_constant, opts.seed));
    }

    for (id, gamma) in [("abs_power{d=1,p=1}", 1.0), ("abs_power{d=1,p=0.5}", 0.5), ("abs_power{d=1,p=2}", 1.0)] {
        let p = parse_problem(id)?;
        let grid = QuasarGrid::standard(&p, opts.quasar_points, opts.seed);
        reports.push(expect_gamma(certify_quasar(&p, &grid, opts.seed), gamma, 0.01));
    }

    Ok(VerifyOutcome { reports, controls: negative_controls(opts.seed)? })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes_and_catches_controls() {
        let opts = VerifyOptions {
            pairs: 500,
            tech_trials: 50,
            streams: 10,
            stream_len: 100,
            quasar_points: 50,
            ..Default::default()
        };
        let out = verify_suite(&opts).unwrap();
        assert!(out.passed(), "{}", out.summary());
        assert_eq!(out.controls.len(), 6);
    }
}

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::framework::{ScheduleKind, TracePolicy, ZetaMode};
use crate::online::LearnerKind;
use crate::optimizers::OptimizerKind;
use crate::problems::NoiseModel;

/// One entry of the `methods` list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodSpec {
    /// `adamw_exp` or `adamw_exp:two_stage`.
    Optimizer { kind: OptimizerKind, schedule: Option<ScheduleKind> },
    /// `framework:solo_scalar:exp_const`.
    Framework { learner: LearnerKind, schedule: ScheduleKind },
    /// `quasar:solo_scalar`, always on the quasar two-stage schedule.
    Quasar { learner: LearnerKind },
}

impl MethodSpec {
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let learner =
            |id: &str| LearnerKind::from_id(id).ok_or_else(|| Error::invalid(format!("unknown learner `{id}`")));
        let schedule =
            |id: &str| ScheduleKind::from_id(id).ok_or_else(|| Error::invalid(format!("unknown schedule `{id}`")));
        match parts.as_slice() {
            ["framework", l, sch] => Ok(MethodSpec::Framework { learner: learner(l)?, schedule: schedule(sch)? }),
            ["quasar", l] => Ok(MethodSpec::Quasar { learner: learner(l)? }),
            [id] | [id, _] => {
                let kind =
                    OptimizerKind::from_id(id).ok_or_else(|| Error::invalid(format!("unknown method `{id}`")))?;
                let schedule = match parts.get(1) {
                    Some(sch) if kind.uses_schedule() => Some(schedule(sch)?),
                    Some(_) => return Err(Error::invalid(format!("{id} does not take a schedule"))),
                    None => None,
                };
                Ok(MethodSpec::Optimizer { kind, schedule })
            }
            _ => Err(Error::invalid(format!("cannot parse method `{s}`"))),
        }
    }

    pub fn id(&self) -> String {
        match self {
            MethodSpec::Optimizer { kind, schedule: None } => kind.id().into(),
            MethodSpec::Optimizer { kind, schedule: Some(s) } => format!("{}:{}", kind.id(), s.id()),
            MethodSpec::Framework { learner, schedule } => format!("framework:{}:{}", learner.id(), schedule.id()),
            MethodSpec::Quasar { learner } => format!("quasar:{}", learner.id()),
        }
    }
}

/// Everything that determines an experiment. Built from `key = value` text,
/// command-line flags, or both; each key keeps the text it was set from so
/// outputs can echo it verbatim.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: String,
    pub noise: NoiseModel,
    pub methods: Vec<MethodSpec>,
    pub eps: f64,
    pub c_hat: f64,
    /// Overrides each method's default schedule.
    pub schedule: Option<ScheduleKind>,
    /// Replaces the derived `K`.
    pub k: Option<u64>,
    /// Caps the iteration count after `k` is applied.
    pub k_max: Option<u64>,
    pub eta: Option<f64>,
    pub delta: Option<f64>,
    pub seeds: Vec<u64>,
    /// Threshold for iterations-to-target; defaults to `eps`.
    pub target_eps: Option<f64>,
    pub trace: TracePolicy,
    pub out: Option<PathBuf>,
    pub jobs: usize,
    pub wall_clock: bool,
    pub zeta: ZetaMode,
    pub gamma: Option<f64>,
    raw: Vec<(&'static str, String)>,
}

pub const KEYS: [&str; 18] = [
    "problem",
    "noise",
    "methods",
    "eps",
    "c_hat",
    "schedule",
    "k",
    "k_max",
    "eta",
    "delta",
    "seeds",
    "target_eps",
    "trace",
    "out",
    "jobs",
    "wall_clock",
    "zeta",
    "gamma",
];

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut cfg = Self {
            problem: String::new(),
            noise: NoiseModel::Deterministic,
            methods: Vec::new(),
            eps: 0.1,
            c_hat: 1.0,
            schedule: None,
            k: None,
            k_max: None,
            eta: None,
            delta: None,
            seeds: vec![0],
            target_eps: None,
            trace: TracePolicy::LogSpaced(20),
            out: None,
            jobs: 1,
            wall_clock: false,
            zeta: ZetaMode::Uniform,
            gamma: None,
            raw: Vec::new(),
        };
        let defaults = [
            ("problem", "exp_inf"),
            ("noise", "deterministic"),
            ("methods", "adamw_exp"),
            ("eps", "0.1"),
            ("c_hat", "1"),
            ("schedule", "default"),
            ("k", "derived"),
            ("k_max", "none"),
            ("eta", "derived"),
            ("delta", "default"),
            ("seeds", "0"),
            ("target_eps", "eps"),
            ("trace", "log:20"),
            ("out", "genlip-out"),
            ("jobs", "1"),
            ("wall_clock", "false"),
            ("zeta", "uniform"),
            ("gamma", "declared"),
        ];
        for (k, v) in defaults {
            cfg.set(k, v, 0).expect("defaults parse");
        }
        cfg
    }
}

fn f64_field(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("expected a number, got `{v}`"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("expected a finite number, got `{v}`"))
    }
}

/// `None` when the value is the field's placeholder word.
fn opt<'a>(v: &'a str, none: &str) -> Option<&'a str> {
    (v != none).then_some(v)
}

fn u64_field(v: &str) -> std::result::Result<u64, String> {
    v.parse().map_err(|_| format!("expected a non-negative integer, got `{v}`"))
}

/// `0..4` (inclusive) or `1,5,9`.
fn seeds_field(v: &str) -> std::result::Result<Vec<u64>, String> {
    let seeds = match v.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (u64_field(a.trim())?, u64_field(b.trim())?);
            if b < a {
                return Err(format!("empty seed range `{v}`"));
            }
            (a..=b).collect()
        }
        None => v.split(',').map(|s| u64_field(s.trim())).collect::<std::result::Result<Vec<_>, _>>()?,
    };
    if seeds.is_empty() {
        return Err("no seeds".into());
    }
    Ok(seeds)
}

fn trace_field(v: &str) -> std::result::Result<TracePolicy, String> {
    match v {
        "all" => Ok(TracePolicy::All),
        "last" => Ok(TracePolicy::Last),
        _ => {
            if let Some(n) = v.strip_prefix("log:") {
                n.parse().map(TracePolicy::LogSpaced).map_err(|_| format!("bad rows per decade `{n}`"))
            } else if let Some(n) = v.strip_prefix("every:") {
                match u64_field(n)? {
                    0 => Err("every:N needs N >= 1".into()),
                    n => Ok(TracePolicy::Every(n)),
                }
            } else {
                Err(format!("expected all, last, log:N or every:N, got `{v}`"))
            }
        }
    }
}

impl ExperimentConfig {
    /// Parse `key = value` lines. `#` starts a comment; later keys override
    /// earlier ones.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
                line: i + 1,
                field: line.into(),
                message: "expected `key = value`".into(),
            })?;
            cfg.set(k.trim(), v.trim(), i + 1)?;
        }
        Ok(cfg)
    }

    /// Set one field from text. `line` is 0 for command-line flags.
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<()> {
        let err = |message: String| Error::Config { line, field: key.into(), message };
        match key {
            "problem" => {
                if value.is_empty() {
                    return Err(err("empty problem id".into()));
                }
                self.problem = value.into();
            }
            "noise" => {
                self.noise = NoiseModel::parse(value)
                    .ok_or_else(|| err(format!("expected deterministic, v-bernoulli or u-additive:S, got `{value}`")))?
            }
            "methods" => {
                let methods = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(MethodSpec::parse)
                    .collect::<Result<Vec<_>>>()
                    .map_err(|e| err(e.to_string()))?;
                if methods.is_empty() {
                    return Err(err("no methods".into()));
                }
                self.methods = methods;
            }
            "eps" => self.eps = f64_field(value).map_err(err)?,
            "c_hat" => self.c_hat = f64_field(value).map_err(err)?,
            "schedule" => {
                self.schedule = opt(value, "default")
                    .map(|v| ScheduleKind::from_id(v).ok_or_else(|| err(format!("unknown schedule `{v}`"))))
                    .transpose()?
            }
            "k" => self.k = opt(value, "derived").map(u64_field).transpose().map_err(err)?,
            "k_max" => self.k_max = opt(value, "none").map(u64_field).transpose().map_err(err)?,
            "eta" => self.eta = opt(value, "derived").map(f64_field).transpose().map_err(err)?,
            "delta" => self.delta = opt(value, "default").map(f64_field).transpose().map_err(err)?,
            "seeds" => self.seeds = seeds_field(value).map_err(err)?,
            "target_eps" => self.target_eps = opt(value, "eps").map(f64_field).transpose().map_err(err)?,
            "trace" => self.trace = trace_field(value).map_err(err)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "jobs" => {
                self.jobs = match u64_field(value).map_err(err)? {
                    0 => return Err(err("jobs must be >= 1".into())),
                    n => n as usize,
                }
            }
            "wall_clock" => {
                self.wall_clock = value.parse().map_err(|_| err(format!("expected true or false, got `{value}`")))?
            }
            "zeta" => {
                self.zeta = match value {
                    "uniform" => ZetaMode::Uniform,
                    v => {
                        let t = f64_field(v).map_err(err)?;
                        if !(0.0..=1.0).contains(&t) {
                            return Err(err(format!("zeta must lie in [0, 1], got {t}")));
                        }
                        ZetaMode::Fixed(t)
                    }
                }
            }
            "gamma" => self.gamma = opt(value, "declared").map(f64_field).transpose().map_err(err)?,
            _ => {
                return Err(err(format!("unknown key (expected one of {})", KEYS.join(", "))));
            }
        }
        let key = KEYS.iter().find(|k| **k == key).expect("key validated above");
        match self.raw.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value.into(),
            None => self.raw.push((key, value.into())),
        }
        Ok(())
    }

    fn raw_value(&self, key: &str) -> String {
        self.raw.iter().find(|(k, _)| *k == key).map(|(_, v)| v.clone()).unwrap_or_default()
    }

    /// Every key that can change results, with the text it was set from, in
    /// canonical order. `jobs` is left out: outputs must not depend on it.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        KEYS.iter().filter(|k| **k != "jobs").map(|k| (*k, self.raw_value(k))).collect()
    }

    /// The full config as parseable text.
    pub fn to_text(&self) -> String {
        KEYS.iter().map(|k| format!("{k} = {}\n", self.raw_value(k))).collect()
    }

    pub fn target(&self) -> f64 {
        self.target_eps.unwrap_or(self.eps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_echoes() {
        let cfg = ExperimentConfig::parse(
            "# demo\nproblem = exp_inf{d=2}\nmethods = adamw_exp, sgd_const\nseeds = 0..4\ntrace = every:10\n",
        )
        .unwrap();
        assert_eq!(cfg.problem, "exp_inf{d=2}");
        assert_eq!(cfg.seeds, vec![0, 1, 2, 3, 4]);
        assert_eq!(cfg.methods.len(), 2);
        assert_eq!(cfg.trace, TracePolicy::Every(10));
        let again = ExperimentConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn errors_name_line_and_field() {
        match ExperimentConfig::parse("eps = 0.1\n\nseeds = 3..1\n") {
            Err(Error::Config { line, field, .. }) => {
                assert_eq!(line, 3);
                assert_eq!(field, "seeds");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(ExperimentConfig::parse("colour = red"), Err(Error::Config { line: 1, .. })));
        assert!(ExperimentConfig::parse("methods = adamw_exp:nope").is_err());
        assert!(ExperimentConfig::parse("methods = sgd_const:avg").is_err());
    }

    #[test]
    fn method_ids_round_trip() {
        for s in ["adamw_exp", "adamw_exp:two_stage", "framework:solo_scalar:avg", "quasar:solo_scalar", "leonw_matrix"]
        {
            assert_eq!(MethodSpec::parse(s).unwrap().id(), s);
        }
    }
}

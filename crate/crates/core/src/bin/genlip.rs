use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use genlip::harness::{
    compare, fmt_f64, lower_bound_experiment, resolve_out_dir, run_experiment, sweep, verify_suite, write_atomic,
    write_outputs, ExperimentConfig, LowerBoundConfig, LowerFamily, VerifyOptions, CSV_COLUMNS,
};
use genlip::optimizers::OptimizerKind;
use genlip::problems::NoiseModel;
use genlip::{Error, Result};

#[derive(Parser)]
#[command(name = "genlip", version, about = "Run and compare first-order methods on generalized-Lipschitz problems")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run every (method, seed) cell and write one CSV per cell plus a manifest.
    Run(ExpArgs),
    /// Rank methods by median iterations to reach the target gap.
    Compare(ExpArgs),
    /// Clipped AdamW against SGD / AdaGrad-Norm on the lower-bound instances.
    LowerBound(LowerArgs),
    /// Run the numeric lemma and assumption checkers.
    Verify(VerifyArgs),
    /// Repeat `compare` over several values of one config key.
    Sweep {
        #[command(flatten)]
        exp: ExpArgs,
        /// Config key to vary.
        #[arg(long)]
        key: String,
        /// One value per sweep point (repeat the flag).
        #[arg(long = "value", required = true)]
        values: Vec<String>,
    },
}

/// Flags mirror the config keys and override the config file.
#[derive(Args)]
struct ExpArgs {
    /// `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    noise: Option<String>,
    /// Comma-separated method list.
    #[arg(long, visible_alias = "opt")]
    methods: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    c_hat: Option<String>,
    #[arg(long)]
    schedule: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    k_max: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    delta: Option<String>,
    /// `0..4` (inclusive) or `0,3,7`.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    target_eps: Option<String>,
    /// `all`, `last`, `log:N` or `every:N`.
    #[arg(long)]
    trace: Option<String>,
    /// Output directory (wins over GENLIP_OUT_DIR and the config).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<String>,
    #[arg(long)]
    wall_clock: bool,
    #[arg(long)]
    zeta: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
}

impl ExpArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::parse(&std::fs::read_to_string(p)?)?,
            None => ExperimentConfig::default(),
        };
        let out = self.out.as_ref().map(|p| p.to_string_lossy().into_owned());
        let flags = [
            ("problem", &self.problem),
            ("noise", &self.noise),
            ("methods", &self.methods),
            ("eps", &self.eps),
            ("c_hat", &self.c_hat),
            ("schedule", &self.schedule),
            ("k", &self.k),
            ("k_max", &self.k_max),
            ("eta", &self.eta),
            ("delta", &self.delta),
            ("seeds", &self.seeds),
            ("target_eps", &self.target_eps),
            ("trace", &self.trace),
            ("out", &out),
            ("jobs", &self.jobs),
            ("zeta", &self.zeta),
            ("gamma", &self.gamma),
        ];
        for (key, v) in flags {
            if let Some(v) = v {
                cfg.set(key, v, 0)?;
            }
        }
        if self.wall_clock {
            cfg.set("wall_clock", "true", 0)?;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct LowerArgs {
    /// `sgd` or `adagrad`.
    #[arg(long, default_value = "sgd")]
    family: String,
    #[arg(long = "R", default_value_t = 1.0)]
    radius: f64,
    #[arg(long = "G0", default_value_t = 1.0)]
    g0: f64,
    #[arg(long = "G1", default_value_t = 8.0)]
    g1: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value = "0..19")]
    seeds: String,
    /// Baseline methods (default: the family's own).
    #[arg(long)]
    baselines: Option<String>,
    #[arg(long, default_value_t = 10)]
    grid_points: usize,
    #[arg(long, default_value_t = 10)]
    budget_factor: u64,
    #[arg(long)]
    k_max: Option<u64>,
    #[arg(long, default_value = "deterministic")]
    noise: String,
    #[arg(long, default_value_t = 1.0)]
    c_hat: f64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Smaller sample sizes for a fast smoke run.
    #[arg(long)]
    quick: bool,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn out_dir(flag: Option<&Path>) -> PathBuf {
    resolve_out_dir(flag, &ExperimentConfig::default())
}

fn cmd_run(a: &ExpArgs) -> Result<()> {
    let cfg = a.config()?;
    let dir = resolve_out_dir(a.out.as_deref(), &cfg);
    let (results, files) = run_experiment(&cfg, &dir)?;
    for r in &results {
        println!(
            "{} seed {}: {} steps, final gap {:.4e}, first hit {}",
            r.cell.method.id(),
            r.cell.seed,
            r.record.steps,
            r.record.final_gap,
            r.record.first_hit.map_or("-".into(), |k| k.to_string())
        );
    }
    println!("wrote {} files to {}", files.len(), dir.display());
    Ok(())
}

fn cmd_compare(a: &ExpArgs) -> Result<()> {
    let cfg = a.config()?;
    let dir = resolve_out_dir(a.out.as_deref(), &cfg);
    let (table, results) = compare(&cfg)?;
    write_outputs(&cfg, &results, &dir)?;
    let text = table.to_text();
    write_atomic(&dir.join("compare.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_lower(a: &LowerArgs) -> Result<()> {
    let family = LowerFamily::parse(&a.family)
        .ok_or_else(|| Error::InvalidParameter(format!("family must be sgd or adagrad, got `{}`", a.family)))?;
    let mut cfg = LowerBoundConfig::new(family, a.radius, a.g0, a.g1, a.eps);
    let mut seeds_cfg = ExperimentConfig::default();
    seeds_cfg.set("seeds", &a.seeds, 0)?;
    cfg.seeds = seeds_cfg.seeds;
    if let Some(b) = &a.baselines {
        cfg.baselines = b
            .split(',')
            .map(|s| {
                OptimizerKind::from_id(s.trim())
                    .ok_or_else(|| Error::InvalidParameter(format!("unknown baseline `{s}`")))
            })
            .collect::<Result<_>>()?;
    }
    cfg.grid_points = a.grid_points;
    cfg.budget_factor = a.budget_factor;
    cfg.k_max = a.k_max;
    cfg.noise = NoiseModel::parse(&a.noise)
        .ok_or_else(|| Error::InvalidParameter(format!("unknown noise model `{}`", a.noise)))?;
    cfg.c_hat = a.c_hat;
    cfg.jobs = a.jobs;
    let rep = lower_bound_experiment(&cfg)?;

    let dir = out_dir(a.out.as_deref());
    std::fs::create_dir_all(&dir)?;
    let mut csv = format!("label,{}\n", CSV_COLUMNS.join(","));
    for (label, rec) in &rep.records {
        for r in &rec.rows {
            let _ = writeln!(
                csv,
                "{label},{},{},{},{},{},{},{},{},{}",
                rec.run_id,
                rec.seed,
                r.k,
                fmt_f64(r.f_gap),
                fmt_f64(r.f_gap_avg_iterate),
                fmt_f64(r.step_norm),
                fmt_f64(r.effective_stepsize),
                fmt_f64(r.regret_running),
                r.wall_ns
            );
        }
    }
    write_atomic(&dir.join("lower_bound_trajectories.csv"), &csv)?;
    let json = serde_json::to_string_pretty(&rep).expect("report serializes");
    write_atomic(&dir.join("lower_bound.json"), &json)?;
    print!("{}", rep.to_text());
    Ok(())
}

fn cmd_verify(a: &VerifyArgs) -> Result<bool> {
    let mut opts = VerifyOptions { seed: a.seed, jobs: a.jobs, ..Default::default() };
    if a.quick {
        opts.pairs = 1000;
        opts.tech_trials = 100;
        opts.streams = 20;
    }
    let outcome = verify_suite(&opts)?;
    let dir = out_dir(a.out.as_deref());
    std::fs::create_dir_all(&dir)?;
    for (i, r) in outcome.reports.iter().enumerate() {
        let subject: String = r.subject.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
        write_atomic(&dir.join(format!("verify_{i:02}_{}_{subject}.json", r.checker)), &r.to_json())?;
    }
    let controls = serde_json::to_string_pretty(&outcome.controls).expect("controls serialize");
    write_atomic(&dir.join("verify_negative_controls.json"), &controls)?;
    print!("{}", outcome.summary());
    Ok(outcome.passed())
}

fn cmd_sweep(a: &ExpArgs, key: &str, values: &[String]) -> Result<()> {
    let cfg = a.config()?;
    let dir = resolve_out_dir(a.out.as_deref(), &cfg);
    for point in sweep(&cfg, key, values)? {
        let sub = dir.join(format!("{key}={}", point.value.replace(['/', ' '], "_")));
        write_outputs(&point.config, &point.results, &sub)?;
        let text = point.table.to_text();
        write_atomic(&sub.join("compare.txt"), &text)?;
        println!("== {key} = {}", point.value);
        print!("{text}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Run(a) => cmd_run(a).map(|_| true),
        Cmd::Compare(a) => cmd_compare(a).map(|_| true),
        Cmd::LowerBound(a) => cmd_lower(a).map(|_| true),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Sweep { exp, key, values } => cmd_sweep(exp, key, values).map(|_| true),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

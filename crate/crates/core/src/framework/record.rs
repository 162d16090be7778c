use std::time::Instant;

use serde::Serialize;

use super::Schedule;

/// Which iterations produce a trace row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TracePolicy {
    All,
    Every(u64),
    /// Roughly this many rows per decade of `k`, plus the first 10.
    LogSpaced(u32),
    /// Only the final row.
    Last,
}

impl TracePolicy {
    pub fn wants(&self, k: u64, last: u64) -> bool {
        if k == last {
            return true;
        }
        match *self {
            TracePolicy::All => true,
            TracePolicy::Every(n) => n > 0 && k.is_multiple_of(n),
            TracePolicy::LogSpaced(per_decade) => {
                if k <= 10 {
                    return true;
                }
                // first integer of each bucket floor(p log10 k)
                let p = per_decade.max(1) as f64;
                let bucket = |n: u64| ((n as f64).log10() * p).floor();
                bucket(k) > bucket(k - 1)
            }
            TracePolicy::Last => false,
        }
    }
}

/// One row of a trajectory. Quantities that do not apply are NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub k: u64,
    pub f_gap: f64,
    pub f_gap_avg_iterate: f64,
    pub step_norm: f64,
    pub effective_stepsize: f64,
    pub regret_running: f64,
    /// Nanoseconds since the start of the run; 0 unless wall-clock timing
    /// was requested, so that traces stay byte-reproducible by default.
    pub wall_ns: u64,
}

/// Everything a run produces.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub method: String,
    pub seed: u64,
    pub run_id: u64,
    /// Number of iterations performed.
    pub steps: u64,
    pub rows: Vec<TraceRow>,
    /// Full iterate, play and fed-gradient histories when requested.
    pub x_history: Vec<Vec<f64>>,
    pub z_history: Vec<Vec<f64>>,
    pub g_history: Vec<Vec<f64>>,
    pub final_x: Vec<f64>,
    pub final_gap: f64,
    /// `(1/(K+1)) sum_{k=0}^K x_k` for methods that report it.
    pub avg_x: Option<Vec<f64>>,
    pub avg_gap: Option<f64>,
    pub min_gap: f64,
    pub min_gap_k: u64,
    /// First iteration whose reported gap is at most the target.
    pub first_hit: Option<u64>,
    pub target_eps: Option<f64>,
    /// Measured regret at the end (true scale), framework runs only.
    pub regret: Option<f64>,
    /// `ln pi_K`, framework runs only.
    pub log_pi_final: Option<f64>,
    /// `(k, cumulative log-scale offset)` each time the gradient stream was
    /// renormalized.
    pub rescale_events: Vec<(u64, f64)>,
    /// Parameters derived from the problem constants, in derivation order.
    pub params: Vec<(String, f64)>,
    pub schedule: Option<Schedule>,
}

impl RunRecord {
    pub(crate) fn new(method: impl Into<String>, seed: u64, run_id: u64, target_eps: Option<f64>) -> Self {
        Self {
            method: method.into(),
            seed,
            run_id,
            steps: 0,
            rows: Vec::new(),
            x_history: Vec::new(),
            z_history: Vec::new(),
            g_history: Vec::new(),
            final_x: Vec::new(),
            final_gap: f64::NAN,
            avg_x: None,
            avg_gap: None,
            min_gap: f64::INFINITY,
            min_gap_k: 0,
            first_hit: None,
            target_eps,
            regret: None,
            log_pi_final: None,
            rescale_events: Vec::new(),
            params: Vec::new(),
            schedule: None,
        }
    }

    /// Register the gap reported at iteration `k` (for averaging methods the
    /// caller passes `min(f(x_k), f(avg)) - f*`).
    pub(crate) fn observe(&mut self, k: u64, gap: f64) {
        if gap < self.min_gap {
            self.min_gap = gap;
            self.min_gap_k = k;
        }
        if self.first_hit.is_none() {
            if let Some(eps) = self.target_eps {
                if gap <= eps {
                    self.first_hit = Some(k);
                }
            }
        }
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Gap values of the recorded rows.
    pub fn gap_series(&self) -> Vec<(u64, f64)> {
        self.rows.iter().map(|r| (r.k, r.f_gap)).collect()
    }
}

/// Run-time options shared by every method.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOptions {
    pub trace: TracePolicy,
    /// Keep full `x`, `z`, `g` histories in the record.
    pub keep_vectors: bool,
    /// Gap threshold for `first_hit`.
    pub target_eps: Option<f64>,
    /// Replace the derived iteration count.
    pub k_override: Option<u64>,
    /// Upper limit on the iteration count, applied after `k_override`.
    pub k_cap: Option<u64>,
    /// Fill `TraceRow::wall_ns`.
    pub wall_clock: bool,
    pub seed: u64,
    pub run_id: u64,
}

impl RunOptions {
    pub(crate) fn k_run(&self, derived: u64) -> u64 {
        let k = self.k_override.unwrap_or(derived);
        self.k_cap.map_or(k, |cap| k.min(cap))
    }
}

/// Elapsed time since the start of a run, or 0 when timing is off.
pub(crate) struct Clock(Option<Instant>);

impl Clock {
    pub(crate) fn start(enabled: bool) -> Self {
        Clock(enabled.then(Instant::now))
    }

    pub(crate) fn ns(&self) -> u64 {
        self.0.map_or(0, |t| t.elapsed().as_nanos() as u64)
    }
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            trace: TracePolicy::LogSpaced(20),
            keep_vectors: false,
            target_eps: None,
            k_override: None,
            k_cap: None,
            wall_clock: false,
            seed: 0,
            run_id: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_spacing_is_sparse_and_increasing() {
        let p = TracePolicy::LogSpaced(10);
        let ks: Vec<u64> = (0..=1_000_000).filter(|&k| p.wants(k, 1_000_000)).collect();
        assert!(ks.len() < 80, "{}", ks.len());
        assert!(ks.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*ks.last().unwrap(), 1_000_000);
        assert!(ks.contains(&100) && ks.contains(&1000));
    }

    #[test]
    fn every_and_last() {
        assert!(TracePolicy::Every(5).wants(10, 12));
        assert!(!TracePolicy::Every(5).wants(11, 12));
        assert!(TracePolicy::Last.wants(12, 12));
        assert!(!TracePolicy::Last.wants(11, 12));
    }
}

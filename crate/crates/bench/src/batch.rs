//! Seeded batches and their summary statistics.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::episode::{run_episode, EpisodeMetrics, ExperimentSpec};
use crate::BenchError;

/// Run episodes `base_seed .. base_seed + episodes` in parallel. Results
/// come back in seed order whatever the thread count.
pub fn run_batch(spec: &ExperimentSpec) -> Result<Vec<EpisodeMetrics>, BenchError> {
    spec.validate()?;
    (0..spec.episodes as u64)
        .into_par_iter()
        .map(|i| run_episode(spec, spec.base_seed + i, None))
        .collect()
}

/// Mean and standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let se = if xs.len() > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Some(Self { mean, se })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateMetrics {
    pub episodes: usize,
    pub collision_pct: f64,
    pub success_pct: f64,
    pub timeout_pct: f64,
    /// Over successful episodes only.
    pub time_to_cross: Option<MeanSe>,
    pub braking: MeanSe,
    pub waiting: MeanSe,
    pub imm_fallbacks: u64,
    pub non_psd: u64,
    pub max_prob_error: f64,
}

impl AggregateMetrics {
    pub fn from_episodes(eps: &[EpisodeMetrics]) -> Self {
        let n = eps.len().max(1) as f64;
        let pct = |f: fn(&EpisodeMetrics) -> bool| 100.0 * eps.iter().filter(|e| f(e)).count() as f64 / n;
        let times: Vec<f64> = eps.iter().filter_map(|e| e.time_to_cross).collect();
        let braking: Vec<f64> = eps.iter().map(|e| e.braking_time).collect();
        let waiting: Vec<f64> = eps.iter().map(|e| e.waiting_time).collect();
        let zero = MeanSe { mean: 0.0, se: 0.0 };
        let collision_pct = pct(EpisodeMetrics::collided);
        let timeout_pct = pct(EpisodeMetrics::timed_out);
        Self {
            episodes: eps.len(),
            collision_pct,
            // The three outcomes partition the episodes; deriving success
            // keeps the identity exact in floating point.
            success_pct: 100.0 - collision_pct - timeout_pct,
            timeout_pct,
            time_to_cross: MeanSe::of(&times),
            braking: MeanSe::of(&braking).unwrap_or(zero),
            waiting: MeanSe::of(&waiting).unwrap_or(zero),
            imm_fallbacks: eps.iter().map(|e| e.imm_fallbacks as u64).sum(),
            non_psd: eps.iter().map(|e| e.non_psd as u64).sum(),
            max_prob_error: eps.iter().map(|e| e.max_prob_error).fold(0.0, f64::max),
        }
    }
}

/// One CSV row: which experiment, which swept parameter, and the summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub policy: String,
    pub turn: String,
    pub density: f64,
    pub param_name: String,
    pub param_value: f64,
    pub base_seed: u64,
    pub metrics: AggregateMetrics,
}

pub const CSV_HEADER: [&str; 16] = [
    "policy",
    "turn",
    "density",
    "param_name",
    "param_value",
    "episodes",
    "base_seed",
    "collision_pct",
    "success_pct",
    "timeout_pct",
    "time_to_cross_mean",
    "time_to_cross_se",
    "braking_mean",
    "braking_se",
    "waiting_mean",
    "waiting_se",
];

fn fixed(x: f64) -> String {
    format!("{x:.4}")
}

impl SummaryRow {
    fn record(&self) -> Vec<String> {
        let m = &self.metrics;
        let (tm, ts) = match m.time_to_cross {
            Some(t) => (fixed(t.mean), fixed(t.se)),
            None => (String::new(), String::new()),
        };
        vec![
            self.policy.clone(),
            self.turn.clone(),
            fixed(self.density),
            self.param_name.clone(),
            fixed(self.param_value),
            m.episodes.to_string(),
            self.base_seed.to_string(),
            fixed(m.collision_pct),
            fixed(m.success_pct),
            fixed(m.timeout_pct),
            tm,
            ts,
            fixed(m.braking.mean),
            fixed(m.braking.se),
            fixed(m.waiting.mean),
            fixed(m.waiting.se),
        ]
    }
}

/// Write rows under the fixed header. Floats use four decimals so reruns
/// are byte-identical.
pub fn write_csv<W: Write>(out: W, rows: &[SummaryRow]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

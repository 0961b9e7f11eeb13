//! Parameter sweeps and the model prediction-error probe.

use crossing_core::geometry::Turn;
use crossing_core::pomcp::GenerativeModel;
use crossing_core::sim::{sim_step, SimState};
use crossing_core::{AccelAction, BehaviorMode, IntersectionModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::batch::{run_batch, AggregateMetrics, SummaryRow};
use crate::config::BenchConfig;
use crate::episode::{EpisodeMetrics, ExperimentSpec, PolicyKind};
use crate::BenchError;

pub fn turn_name(turn: Turn) -> &'static str {
    match turn {
        Turn::Right => "right",
        Turn::Left => "left",
    }
}

/// Run a batch and label it with the parameter that produced it.
pub fn summarize(spec: &ExperimentSpec, param_name: &str, param_value: f64) -> Result<(SummaryRow, Vec<EpisodeMetrics>), BenchError> {
    let eps = run_batch(spec)?;
    let row = SummaryRow {
        policy: spec.policy.name().into(),
        turn: turn_name(spec.turn).into(),
        density: spec.config.sim.density,
        param_name: param_name.into(),
        param_value,
        base_seed: spec.base_seed,
        metrics: AggregateMetrics::from_episodes(&eps),
    };
    Ok((row, eps))
}

fn nonempty(grid: &[f64], name: &str) -> Result<(), BenchError> {
    if grid.is_empty() {
        return Err(BenchError::Config(crossing_core::ConfigError::invalid(name, "grid is empty")));
    }
    Ok(())
}

/// TTC policy at each threshold.
pub fn sweep_threshold(grid: &[f64], spec: &ExperimentSpec) -> Result<Vec<SummaryRow>, BenchError> {
    nonempty(grid, "threshold")?;
    grid.iter()
        .map(|&th| {
            let mut s = spec.clone();
            s.policy = PolicyKind::Ttc;
            s.config.ttc.threshold = th;
            summarize(&s, "threshold", th).map(|r| r.0)
        })
        .collect()
}

/// POMCP with every action penalty scaled by each factor, then the TTC
/// baseline at each threshold.
pub fn sweep_tradeoff(scales: &[f64], thresholds: &[f64], spec: &ExperimentSpec) -> Result<Vec<SummaryRow>, BenchError> {
    nonempty(scales, "action_cost_scale")?;
    let mut rows = Vec::with_capacity(scales.len() + thresholds.len());
    for &k in scales {
        let mut s = spec.clone();
        s.policy = PolicyKind::Pomcp;
        s.config.model.reward = s.config.model.reward.scale_action_penalties(k);
        rows.push(summarize(&s, "action_cost_scale", k)?.0);
    }
    if !thresholds.is_empty() {
        rows.extend(sweep_threshold(thresholds, spec)?);
    }
    Ok(rows)
}

/// Each policy at each density, on the same seeds.
pub fn sweep_density(grid: &[f64], policies: &[PolicyKind], spec: &ExperimentSpec) -> Result<Vec<SummaryRow>, BenchError> {
    nonempty(grid, "density")?;
    if grid.iter().any(|d| !(0.0..1.0).contains(d)) {
        return Err(BenchError::Config(crossing_core::ConfigError::invalid(
            "density",
            "must lie in [0, 1)",
        )));
    }
    let mut rows = Vec::new();
    for &d in grid {
        for &p in policies {
            let mut s = spec.clone();
            s.policy = p;
            s.config.sim.density = d;
            rows.push(summarize(&s, "density", d)?.0);
        }
    }
    Ok(rows)
}

/// Mean position error (m) of the planner's generative model against the
/// simulator, indexed by the number of steps predicted (`0..=horizon`).
///
/// Each sample warms up traffic, copies the true traffic states into the
/// model (all in constant-velocity mode) and rolls both forward with the
/// ego held at the stop line. Only vehicles that stay on the road for the
/// whole horizon are scored.
pub fn prediction_error_probe(
    config: &BenchConfig,
    turn: Turn,
    horizon: usize,
    samples: u32,
    base_seed: u64,
) -> Result<Vec<f64>, BenchError> {
    if horizon < 1 || samples < 1 {
        return Err(BenchError::Config(crossing_core::ConfigError::invalid(
            "probe",
            "horizon and samples must be at least 1",
        )));
    }
    config.validate()?;
    let layout = config.sim.layout;
    let model = IntersectionModel::new(config.model, layout.path(turn));
    let per_sample: Vec<Vec<(f64, usize)>> = (0..samples as u64)
        .into_par_iter()
        .map(|i| {
            let seed = base_seed + i;
            let mut traffic_rng = ChaCha8Rng::seed_from_u64(seed);
            let mut model_rng = ChaCha8Rng::seed_from_u64(seed);
            model_rng.set_stream(3);
            let mut sim = SimState::warmed_up(layout.path(turn), &config.sim, &mut traffic_rng)?;
            let ids: Vec<u64> = sim.traffic.iter().map(|t| t.id).collect();
            let others = sim
                .traffic
                .iter()
                .map(|t| (t.state(&layout), BehaviorMode::ConstantVelocity))
                .collect();
            let mut world = model.initial_state(others);
            let mut errors: Vec<Vec<f64>> = vec![vec![0.0; ids.len()]];
            let mut alive = vec![true; ids.len()];
            for _ in 0..horizon {
                world = model.step(&world, AccelAction::Maintain, &mut model_rng).state;
                sim_step(&mut sim, AccelAction::Maintain, &config.sim, &mut traffic_rng)?;
                let mut row = vec![0.0; ids.len()];
                for (j, id) in ids.iter().enumerate() {
                    match sim.traffic.iter().find(|t| t.id == *id) {
                        Some(t) => {
                            let truth = t.state(&layout);
                            let pred = &world.others[j].0;
                            row[j] = (truth.x - pred.x).hypot(truth.y - pred.y);
                        }
                        None => alive[j] = false,
                    }
                }
                errors.push(row);
            }
            let kept = alive.iter().filter(|a| **a).count();
            Ok(errors
                .iter()
                .map(|row| (row.iter().zip(&alive).filter(|(_, a)| **a).map(|(e, _)| e).sum(), kept))
                .collect())
        })
        .collect::<Result<_, BenchError>>()?;
    Ok((0..=horizon)
        .map(|k| {
            let (sum, n) = per_sample.iter().fold((0.0, 0), |(s, n), v| (s + v[k].0, n + v[k].1));
            if n == 0 {
                0.0
            } else {
                sum / n as f64
            }
        })
        .collect())
}

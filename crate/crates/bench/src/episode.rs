//! One closed-loop run: sense, decide, step.

use crossing_core::dynamics::VehicleObservation;
use crossing_core::geometry::{Lane, Turn};
use crossing_core::imm::ImmConfig;
use crossing_core::policy::{random_policy_step, PolicyDecision, PolicyInput, PomcpPolicy, TtcParams, TtcPolicy, TtcRollout};
use crossing_core::sim::{sense, sim_step, EpisodeStatus, SimState};
use crossing_core::{AccelAction, IntersectionModel, VehicleState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::BenchConfig;
use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Pomcp,
    Ttc,
    Random,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Pomcp => "pomcp",
            PolicyKind::Ttc => "ttc",
            PolicyKind::Random => "random",
        }
    }
}

/// A scenario, a policy, and how many seeded runs to do.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub turn: Turn,
    pub policy: PolicyKind,
    pub episodes: u32,
    pub base_seed: u64,
    /// Density, noise, solver and threshold settings live here.
    pub config: BenchConfig,
}

impl ExperimentSpec {
    pub fn new(turn: Turn, policy: PolicyKind, config: BenchConfig) -> Self {
        Self {
            turn,
            policy,
            episodes: 1000,
            base_seed: 0,
            config,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.episodes < 1 {
            return Err(BenchError::Config(crossing_core::ConfigError::invalid(
                "episodes",
                "must be at least 1",
            )));
        }
        self.config.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Crossed,
    Collided,
    TimedOut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub seed: u64,
    pub outcome: Outcome,
    /// Seconds from the start until the ego reached the end of its path.
    pub time_to_cross: Option<f64>,
    /// Episode length (s).
    pub duration: f64,
    /// Vehicle-seconds of traffic braking harder than the threshold.
    pub braking_time: f64,
    /// Vehicle-seconds of traffic standing still.
    pub waiting_time: f64,
    pub decisions: u32,
    pub imm_fallbacks: u32,
    /// Belief covariances that failed the PSD check, summed over decisions.
    pub non_psd: u32,
    /// Largest deviation of a mode-probability pair from summing to one.
    pub max_prob_error: f64,
}

impl EpisodeMetrics {
    pub fn collided(&self) -> bool {
        self.outcome == Outcome::Collided
    }

    pub fn timed_out(&self) -> bool {
        self.outcome == Outcome::TimedOut
    }

    pub fn crossed(&self) -> bool {
        self.outcome == Outcome::Crossed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedVehicle {
    pub id: u64,
    pub lane: Lane,
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub a: f64,
    pub braking: bool,
    pub stopped: bool,
}

/// One line of the per-step log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub seed: u64,
    pub clock: f64,
    pub ego: VehicleState,
    pub ego_arclength: f64,
    pub action: f64,
    pub status: EpisodeStatus,
    pub vehicles: Vec<LoggedVehicle>,
    pub diagnostics: Vec<(String, f64)>,
}

enum Controller {
    Pomcp(Box<PomcpPolicy>),
    Ttc(TtcPolicy),
    Random,
}

impl Controller {
    fn new(spec: &ExperimentSpec) -> Self {
        let cfg = &spec.config;
        let layout = cfg.sim.layout;
        let params = TtcParams::new(layout, cfg.sim.footprint, cfg.sim.idm, spec.turn);
        match spec.policy {
            PolicyKind::Ttc => Controller::Ttc(TtcPolicy::new(params, cfg.ttc.threshold)),
            PolicyKind::Random => Controller::Random,
            PolicyKind::Pomcp => {
                let model = IntersectionModel::new(cfg.model, layout.path(spec.turn));
                let m = &cfg.model;
                let filter = ImmConfig::new(m.dt, m.sigma_cv, m.sigma_ca, m.switching, m.observation);
                let rollout = TtcRollout {
                    params,
                    threshold: cfg.ttc.rollout_threshold,
                };
                Controller::Pomcp(Box::new(PomcpPolicy::new(model, cfg.solver, filter, rollout)))
            }
        }
    }

    fn decide(&mut self, input: &PolicyInput, rng: &mut ChaCha8Rng) -> PolicyDecision {
        match self {
            Controller::Pomcp(p) => p.decide(input, rng),
            Controller::Ttc(p) => p.decide(input),
            Controller::Random => random_policy_step(rng),
        }
    }
}

/// Independent random streams of one episode.
pub struct EpisodeStreams {
    pub traffic: ChaCha8Rng,
    pub sensing: ChaCha8Rng,
    pub policy: ChaCha8Rng,
}

impl EpisodeStreams {
    /// Traffic draws depend only on the seed, so every policy run on the
    /// same seed meets the same spawn attempts.
    pub fn new(seed: u64) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Self {
            traffic: stream(0),
            sensing: stream(1),
            policy: stream(2),
        }
    }
}

/// Run one episode. `log` receives every step when given.
pub fn run_episode(spec: &ExperimentSpec, seed: u64, mut log: Option<&mut dyn FnMut(StepRecord)>) -> Result<EpisodeMetrics, BenchError> {
    spec.validate()?;
    let cfg = &spec.config;
    let sim_cfg = &cfg.sim;
    let mut rngs = EpisodeStreams::new(seed);
    let mut sim = SimState::warmed_up(sim_cfg.layout.path(spec.turn), sim_cfg, &mut rngs.traffic)?;
    let mut controller = Controller::new(spec);

    let mut braking = 0.0;
    let mut waiting = 0.0;
    let mut decisions = 0;
    let mut fallbacks = 0;
    let mut non_psd = 0;
    let mut prob_error: f64 = 0.0;
    let mut observations: Vec<(u64, VehicleObservation)>;
    loop {
        observations = sense(&sim, sim_cfg, &mut rngs.sensing);
        let input = PolicyInput {
            ego: sim.ego,
            ego_arclength: sim.ego_arclength,
            observations: &observations,
        };
        let decision = controller.decide(&input, &mut rngs.policy);
        decisions += 1;
        fallbacks += decision.diagnostic("imm_fallbacks").unwrap_or(0.0) as u32;
        non_psd += decision.diagnostic("non_psd").unwrap_or(0.0) as u32;
        prob_error = prob_error.max(decision.diagnostic("prob_error").unwrap_or(0.0));

        let events = sim_step(&mut sim, decision.action, sim_cfg, &mut rngs.traffic)?;
        braking += events.braking_count() as f64 * sim_cfg.dt;
        waiting += events.stopped_count() as f64 * sim_cfg.dt;

        if let Some(log) = log.as_mut() {
            log(step_record(seed, &sim, decision.action, &decision, &events.flags, cfg));
        }
        if events.status.is_terminal() {
            break;
        }
    }
    let outcome = match sim.status {
        EpisodeStatus::Crossed => Outcome::Crossed,
        EpisodeStatus::Collided => Outcome::Collided,
        _ => Outcome::TimedOut,
    };
    Ok(EpisodeMetrics {
        seed,
        outcome,
        time_to_cross: (outcome == Outcome::Crossed).then_some(sim.clock),
        duration: sim.clock,
        braking_time: braking,
        waiting_time: waiting,
        decisions,
        imm_fallbacks: fallbacks,
        non_psd,
        max_prob_error: prob_error,
    })
}

fn step_record(
    seed: u64,
    sim: &SimState,
    action: AccelAction,
    decision: &PolicyDecision,
    flags: &[crossing_core::sim::VehicleFlags],
    cfg: &BenchConfig,
) -> StepRecord {
    let vehicles = sim
        .traffic
        .iter()
        .map(|t| {
            let s = t.state(&cfg.sim.layout);
            let f = flags.iter().find(|f| f.id == t.id);
            LoggedVehicle {
                id: t.id,
                lane: t.lane,
                x: s.x,
                y: s.y,
                v: t.v,
                a: t.a,
                braking: f.is_some_and(|f| f.braking),
                stopped: f.is_some_and(|f| f.stopped),
            }
        })
        .collect();
    StepRecord {
        seed,
        clock: sim.clock,
        ego: sim.ego,
        ego_arclength: sim.ego_arclength,
        action: action.value(),
        status: sim.status,
        vehicles,
        diagnostics: decision.diagnostics.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    }
}

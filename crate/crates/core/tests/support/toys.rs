// Small decision problems with brute-force optima, shared by the solver
// tests and the acceptance run.
#![allow(dead_code)]

use core::f64::consts::FRAC_PI_2;

use crossing_core::dynamics::ObservationModel;
use crossing_core::geometry::{IntersectionLayout, Turn};
use crossing_core::model::{BehaviorSwitchMatrix, IntersectionModel, ModelConfig, WorldState};
use crossing_core::pomcp::{Belief, GenerativeModel, RolloutPolicy, Transition};
use crossing_core::{AccelAction, BehaviorMode, VehicleState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Always returns the same state.
pub struct PointBelief<S>(pub S);

impl<S: Clone> Belief for PointBelief<S> {
    type State = S;
    fn sample<R: Rng + ?Sized>(&self, _rng: &mut R) -> S {
        self.0.clone()
    }
}

/// Uniformly random rollouts.
pub struct UniformRollout;

impl<M: GenerativeModel> RolloutPolicy<M> for UniformRollout {
    type Memory = ();
    fn start(&self, _model: &M, _state: &M::State) {}
    fn act<R: Rng + ?Sized>(&self, model: &M, _state: &M::State, _memory: &mut (), rng: &mut R) -> M::Action {
        let actions = model.actions();
        actions[rng.random_range(0..actions.len())]
    }
}

/// Value and best action index of a deterministic model by full-width search.
pub fn expectimax<M: GenerativeModel>(model: &M, state: &M::State, depth: u32) -> (f64, usize) {
    if depth == 0 {
        return (0.0, 0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, &a) in model.actions().iter().enumerate() {
        let t = model.step(state, a, &mut rng);
        let q = if t.terminal {
            t.reward
        } else {
            t.reward + model.discount() * expectimax(model, &t.state, depth - 1).0
        };
        if q > best.0 {
            best = (q, i);
        }
    }
    best
}

/// Four arms; the last one pays +100 per step, the rest -5.
pub struct Chain;

impl GenerativeModel for Chain {
    type State = u32;
    type Action = usize;
    fn actions(&self) -> &[usize] {
        &[0, 1, 2, 3]
    }
    fn discount(&self) -> f64 {
        0.95
    }
    fn step<R: Rng + ?Sized>(&self, s: &u32, a: usize, _rng: &mut R) -> Transition<u32> {
        Transition {
            state: s + 1,
            reward: if a == 3 { 100.0 } else { -5.0 },
            terminal: false,
        }
    }
}

/// Three states with a delayed payoff: from `0`, action 0 pays nothing but
/// leads to state `1` which pays 5 per step; action 1 pays 1 now and leads
/// to the dead state `2`.
pub struct Delayed;

impl GenerativeModel for Delayed {
    type State = u8;
    type Action = usize;
    fn actions(&self) -> &[usize] {
        &[0, 1]
    }
    fn discount(&self) -> f64 {
        0.95
    }
    fn step<R: Rng + ?Sized>(&self, s: &u8, a: usize, _rng: &mut R) -> Transition<u8> {
        let (state, reward) = match (*s, a) {
            (0, 0) => (1, 0.0),
            (0, _) => (2, 1.0),
            (1, 0) => (1, 5.0),
            (1, _) => (0, 0.0),
            (_, 0) => (2, 0.0),
            (_, _) => (0, 0.0),
        };
        Transition {
            state,
            reward,
            terminal: false,
        }
    }
}

/// Intersection model with noise-free traffic and frozen behaviors.
pub fn deterministic_intersection(turn: Turn) -> IntersectionModel {
    let config = ModelConfig {
        sigma_cv: 0.0,
        sigma_ca: 0.0,
        switching: BehaviorSwitchMatrix::identity(),
        observation: ObservationModel {
            sigma_p: 0.0,
            sigma_v: 0.0,
        },
        ..ModelConfig::default()
    };
    let layout = IntersectionLayout::default();
    IntersectionModel::new(config, layout.path(turn))
}

/// Ego rolling towards the near lane while a car approaches on it. Any
/// action but a strong brake ends in a collision.
pub fn conflict_state(model: &IntersectionModel) -> WorldState {
    let s = 1.5;
    let ego = model.path.state_at(s, 7.0, 0.0);
    let car = VehicleState::new(3.5, 2.0, FRAC_PI_2, 10.0, 0.0);
    WorldState {
        ego,
        ego_arclength: s,
        others: vec![(car, BehaviorMode::ConstantVelocity)],
    }
}

pub fn strong_brake_index() -> usize {
    AccelAction::StrongBrake.index()
}

//! The planner's generative model of the intersection.
//!
//! The ego moves along its fixed path under one of four accelerations, the
//! other cars follow linear-Gaussian constant-velocity or
//! constant-acceleration dynamics with a Markov switch between the two, and
//! the reward pays for reaching the end of the path and punishes collisions.
//! This model is deliberately simpler than the IDM traffic in [`crate::sim`].

use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::dynamics::{other_step, sample_observation, MotionModels, ObservationModel, VehicleObservation};
use crate::error::ConfigError;
use crate::geometry::{Footprint, OrientedBox, PathSpec};
use crate::kinematics::{AccelAction, BehaviorMode, VehicleState};
use crate::pomcp::{GenerativeModel, Transition};
use rand::Rng;

/// Per-step probabilities of switching between behavior modes;
/// `p[i][j]` is the probability of moving from mode `i` to mode `j`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BehaviorSwitchMatrix {
    pub p: [[f64; 2]; 2],
}

impl BehaviorSwitchMatrix {
    pub fn symmetric(p_stay: f64) -> Self {
        Self {
            p: [[p_stay, 1.0 - p_stay], [1.0 - p_stay, p_stay]],
        }
    }

    pub fn identity() -> Self {
        Self::symmetric(1.0)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        for row in &self.p {
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) || (row[0] + row[1] - 1.0).abs() > 1e-12 {
                return Err(ConfigError::invalid("switch matrix", "rows must be probability vectors"));
            }
        }
        Ok(())
    }

    pub fn prob(&self, from: BehaviorMode, to: BehaviorMode) -> f64 {
        self.p[from.index()][to.index()]
    }
}

impl Default for BehaviorSwitchMatrix {
    fn default() -> Self {
        Self::symmetric(0.98)
    }
}

/// Draw the next behavior mode.
pub fn behavior_transition<R: Rng + ?Sized>(mode: BehaviorMode, p: &BehaviorSwitchMatrix, rng: &mut R) -> BehaviorMode {
    let u: f64 = rng.random();
    if u < p.p[mode.index()][0] {
        BehaviorMode::ConstantVelocity
    } else {
        BehaviorMode::ConstantAcceleration
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RewardConfig {
    pub collision_penalty: f64,
    pub crossing_reward: f64,
    pub accelerate_penalty: f64,
    pub maintain_penalty: f64,
    pub moderate_brake_penalty: f64,
    pub strong_brake_penalty: f64,
    pub gamma: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            collision_penalty: -2000.0,
            crossing_reward: 100.0,
            accelerate_penalty: -4.98,
            maintain_penalty: -4.99,
            moderate_brake_penalty: -5.0,
            strong_brake_penalty: -5.02,
            gamma: 0.95,
        }
    }
}

impl RewardConfig {
    pub fn action_penalty(&self, action: AccelAction) -> f64 {
        match action {
            AccelAction::Accelerate => self.accelerate_penalty,
            AccelAction::Maintain => self.maintain_penalty,
            AccelAction::ModerateBrake => self.moderate_brake_penalty,
            AccelAction::StrongBrake => self.strong_brake_penalty,
        }
    }

    /// Copy with every action penalty multiplied by `factor`.
    pub fn scale_action_penalties(&self, factor: f64) -> Self {
        Self {
            accelerate_penalty: self.accelerate_penalty * factor,
            maintain_penalty: self.maintain_penalty * factor,
            moderate_brake_penalty: self.moderate_brake_penalty * factor,
            strong_brake_penalty: self.strong_brake_penalty * factor,
            ..*self
        }
    }

    /// Collision is checked before the goal.
    pub fn evaluate(&self, collided: bool, crossed: bool, action: AccelAction) -> f64 {
        if collided {
            self.collision_penalty
        } else if crossed {
            self.crossing_reward
        } else {
            self.action_penalty(action)
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let penalties = AccelAction::ALL.map(|a| self.action_penalty(a));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(ConfigError::invalid("reward.gamma", "must lie in (0, 1]"));
        }
        if !(self.crossing_reward > 0.0) {
            return Err(ConfigError::invalid("reward.crossing_reward", "must be positive"));
        }
        if penalties.iter().any(|&p| !(p < 0.0 && p > self.collision_penalty)) {
            return Err(ConfigError::invalid("reward", "need collision penalty < action penalties < 0"));
        }
        Ok(())
    }

    pub fn min_step_reward(&self) -> f64 {
        AccelAction::ALL
            .iter()
            .map(|&a| self.action_penalty(a))
            .fold(self.collision_penalty, f64::min)
    }

    pub fn max_step_reward(&self) -> f64 {
        AccelAction::ALL
            .iter()
            .map(|&a| self.action_penalty(a))
            .fold(self.crossing_reward, f64::max)
    }
}

/// Everything the planner assumes about the world.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ModelConfig {
    /// Decision period (s).
    pub dt: f64,
    pub observation: ObservationModel,
    /// Spectral density of the constant-velocity model (m²/s³).
    pub sigma_cv: f64,
    /// Spectral density of the constant-acceleration model (m²/s⁵).
    pub sigma_ca: f64,
    pub switching: BehaviorSwitchMatrix,
    pub reward: RewardConfig,
    /// Ego speed limit (m/s).
    pub max_speed: f64,
    pub footprint: Footprint,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dt: 0.25,
            observation: ObservationModel::default(),
            sigma_cv: 1.0,
            sigma_ca: 1.0,
            switching: BehaviorSwitchMatrix::default(),
            reward: RewardConfig::default(),
            max_speed: 13.88,
            footprint: Footprint::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.dt > 0.0) {
            return Err(ConfigError::invalid("model.dt", "must be positive"));
        }
        if !(self.observation.sigma_p >= 0.0 && self.observation.sigma_v >= 0.0) {
            return Err(ConfigError::invalid("model.observation", "noise must be non-negative"));
        }
        if !(self.sigma_cv >= 0.0 && self.sigma_ca >= 0.0) {
            return Err(ConfigError::invalid("model.sigma", "spectral densities must be non-negative"));
        }
        if !(self.max_speed > 0.0) {
            return Err(ConfigError::invalid("model.max_speed", "must be positive"));
        }
        self.switching.validate()?;
        self.reward.validate()
    }
}

/// Full state as seen by the planner.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub ego: VehicleState,
    /// Distance travelled along the ego path.
    pub ego_arclength: f64,
    pub others: Vec<(VehicleState, BehaviorMode)>,
}

/// Advance the ego along its path.
///
/// Speed follows `v + a dt`, clamped to `[0, max_speed]`; the arclength
/// advances by the exact distance covered under that (piecewise) constant
/// acceleration, which is `v dt + a dt²/2` when no clamp is hit. Pose and
/// heading are then read off the path.
pub fn ego_step(ego: &VehicleState, arclength: f64, path: &PathSpec, action: AccelAction, dt: f64, max_speed: f64) -> (VehicleState, f64) {
    let a = action.value();
    let v0 = ego.v;
    let v_free = v0 + a * dt;
    let (v1, ds) = if v_free < 0.0 {
        let t_stop = v0 / -a;
        (0.0, v0 * t_stop + 0.5 * a * t_stop * t_stop)
    } else if v_free > max_speed {
        let t_cap = ((max_speed - v0) / a).max(0.0);
        let cruise = if v0 > max_speed { v0 } else { max_speed };
        (max_speed, v0 * t_cap + 0.5 * a * t_cap * t_cap + cruise * (dt - t_cap))
    } else {
        (v_free, v0 * dt + 0.5 * a * dt * dt)
    };
    let s1 = arclength + ds.max(0.0);
    (path.state_at(s1, v1, a), s1)
}

/// The planner's generative model for one ego path.
#[derive(Debug, Clone)]
pub struct IntersectionModel {
    pub config: ModelConfig,
    pub path: PathSpec,
    pub motion: MotionModels,
    actions: Vec<AccelAction>,
}

impl IntersectionModel {
    pub fn new(config: ModelConfig, path: PathSpec) -> Self {
        let motion = MotionModels::new(config.dt, config.sigma_cv, config.sigma_ca);
        Self {
            config,
            path,
            motion,
            actions: AccelAction::ALL.to_vec(),
        }
    }

    /// Restrict the actions the planner may choose from.
    pub fn with_actions(mut self, actions: &[AccelAction]) -> Self {
        assert!(!actions.is_empty());
        self.actions = actions.to_vec();
        self
    }

    pub fn in_collision(&self, state: &WorldState) -> bool {
        let fp = &self.config.footprint;
        let ego = OrientedBox::of_vehicle(&state.ego, fp);
        state.others.iter().any(|(o, _)| ego.intersects(&OrientedBox::of_vehicle(o, fp)))
    }

    pub fn crossed(&self, state: &WorldState) -> bool {
        state.ego_arclength >= self.path.length()
    }

    pub fn reward(&self, _state: &WorldState, action: AccelAction, next: &WorldState) -> f64 {
        self.config.reward.evaluate(self.in_collision(next), self.crossed(next), action)
    }

    pub fn initial_state(&self, others: Vec<(VehicleState, BehaviorMode)>) -> WorldState {
        WorldState {
            ego: self.path.state_at(0.0, 0.0, 0.0),
            ego_arclength: 0.0,
            others,
        }
    }

    /// One transition plus noisy observations of every other car.
    pub fn generative_step<R: Rng + ?Sized>(
        &self,
        state: &WorldState,
        action: AccelAction,
        rng: &mut R,
    ) -> (WorldState, Vec<VehicleObservation>, f64, bool) {
        let t = self.step(state, action, rng);
        let obs = t
            .state
            .others
            .iter()
            .map(|(o, _)| sample_observation(o, &self.config.observation, rng))
            .collect();
        (t.state, obs, t.reward, t.terminal)
    }
}

impl GenerativeModel for IntersectionModel {
    type State = WorldState;
    type Action = AccelAction;

    fn actions(&self) -> &[AccelAction] {
        &self.actions
    }

    fn discount(&self) -> f64 {
        self.config.reward.gamma
    }

    fn step<R: Rng + ?Sized>(&self, state: &WorldState, action: AccelAction, rng: &mut R) -> Transition<WorldState> {
        // Physical state at t+1 depends on the behavior at t; the behavior
        // then switches independently.
        let others = state
            .others
            .iter()
            .map(|(o, mode)| {
                let next = other_step(o, *mode, &self.motion, rng);
                (next, behavior_transition(*mode, &self.config.switching, rng))
            })
            .collect();
        let (ego, ego_arclength) = ego_step(
            &state.ego,
            state.ego_arclength,
            &self.path,
            action,
            self.config.dt,
            self.config.max_speed,
        );
        let next = WorldState {
            ego,
            ego_arclength,
            others,
        };
        let collided = self.in_collision(&next);
        let crossed = self.crossed(&next);
        Transition {
            reward: self.config.reward.evaluate(collided, crossed, action),
            terminal: collided || crossed,
            state: next,
        }
    }
}

//! Ground-truth traffic simulator.
//!
//! Traffic on both main-road lanes follows the IDM and is spawned at the lane
//! entries at random. The ego drives its fixed path under the planner's
//! acceleration commands. Traffic only reacts to the ego once its body
//! overlaps their lane and it is wholly ahead of them.

use alloc::vec::Vec;

use rand::Rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::dynamics::{sample_observation, ObservationModel, VehicleObservation};
use crate::error::{ConfigError, SimError};
use crate::geometry::{Footprint, IntersectionLayout, Lane, OrientedBox, PathSpec};
use crate::idm::{idm_accel, IdmParams};
use crate::kinematics::{AccelAction, VehicleState};
use crate::model::ego_step;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SimConfig {
    /// Vehicle arrivals per second, see [`DensityScope`].
    pub density: f64,
    pub density_scope: DensityScope,
    pub dt: f64,
    pub observation: ObservationModel,
    /// Episode length limit (s).
    pub timeout: f64,
    pub footprint: Footprint,
    pub idm: IdmParams,
    pub layout: IntersectionLayout,
    /// Ego speed limit (m/s).
    pub max_speed: f64,
    /// Traffic-only time simulated before the ego starts (s).
    pub warmup: f64,
    /// Spawn speeds are uniform in `[spawn_speed_min, 1] * idm.v0`.
    pub spawn_speed_min: f64,
    pub braking_threshold: f64,
    pub stop_threshold: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            density: 0.2,
            density_scope: DensityScope::Intersection,
            dt: 0.25,
            observation: ObservationModel::default(),
            timeout: 60.0,
            footprint: Footprint::default(),
            idm: IdmParams::default(),
            layout: IntersectionLayout::default(),
            max_speed: 13.88,
            warmup: 10.0,
            spawn_speed_min: 0.85,
            braking_threshold: -0.5,
            stop_threshold: 0.1,
        }
    }
}

impl SimConfig {
    /// Spawn probability per step at one lane entry.
    pub fn entry_spawn_probability(&self) -> f64 {
        let per_entry = match self.density_scope {
            DensityScope::Intersection => self.density / Lane::ALL.len() as f64,
            DensityScope::PerEntry => self.density,
        };
        (per_entry * self.dt).clamp(0.0, 1.0)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.density) {
            return Err(ConfigError::invalid("sim.density", "must lie in [0, 1]"));
        }
        if !(self.dt > 0.0) {
            return Err(ConfigError::invalid("sim.dt", "must be positive"));
        }
        if !(self.timeout > 0.0) {
            return Err(ConfigError::invalid("sim.timeout", "must be positive"));
        }
        if !(self.warmup >= 0.0) {
            return Err(ConfigError::invalid("sim.warmup", "must be non-negative"));
        }
        if !(self.observation.sigma_p >= 0.0 && self.observation.sigma_v >= 0.0) {
            return Err(ConfigError::invalid("sim.observation", "noise must be non-negative"));
        }
        if !(self.footprint.length > 0.0 && self.footprint.width > 0.0) {
            return Err(ConfigError::invalid("sim.footprint", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.spawn_speed_min) {
            return Err(ConfigError::invalid("sim.spawn_speed_min", "must lie in [0, 1]"));
        }
        if !(self.max_speed > 0.0) {
            return Err(ConfigError::invalid("sim.max_speed", "must be positive"));
        }
        self.idm.validate()
    }
}

/// What `density` counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DensityScope {
    /// Arrivals at the whole junction, split evenly over the entries.
    Intersection,
    /// Arrivals at each entry.
    PerEntry,
}

/// A main-road vehicle, located by its lane coordinate `s` (0 at the entry).
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TrafficVehicle {
    pub id: u64,
    pub lane: Lane,
    pub s: f64,
    pub v: f64,
    pub a: f64,
}

impl TrafficVehicle {
    pub fn state(&self, layout: &IntersectionLayout) -> VehicleState {
        let (x, y, theta) = layout.lane_pose(self.lane, self.s);
        VehicleState::new(x, y, theta, self.v, self.a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EpisodeStatus {
    Running,
    Crossed,
    Collided,
    TimedOut,
}

impl EpisodeStatus {
    pub fn is_terminal(self) -> bool {
        self != EpisodeStatus::Running
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct VehicleFlags {
    pub id: u64,
    pub braking: bool,
    pub stopped: bool,
}

/// What happened during one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepEvents {
    pub flags: Vec<VehicleFlags>,
    pub spawned: usize,
    pub status: EpisodeStatus,
}

impl StepEvents {
    pub fn braking_count(&self) -> usize {
        self.flags.iter().filter(|f| f.braking).count()
    }

    pub fn stopped_count(&self) -> usize {
        self.flags.iter().filter(|f| f.stopped).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    /// Seconds since the ego started.
    pub clock: f64,
    pub steps: u64,
    pub ego: VehicleState,
    pub ego_arclength: f64,
    pub path: PathSpec,
    pub traffic: Vec<TrafficVehicle>,
    pub status: EpisodeStatus,
    next_id: u64,
}

impl SimState {
    /// Empty road with the ego stopped at the start of `path`.
    pub fn empty(path: PathSpec) -> Self {
        Self {
            clock: 0.0,
            steps: 0,
            ego: path.state_at(0.0, 0.0, 0.0),
            ego_arclength: 0.0,
            path,
            traffic: Vec::new(),
            status: EpisodeStatus::Running,
            next_id: 0,
        }
    }

    /// Road populated by `cfg.warmup` seconds of traffic, clock reset to 0.
    pub fn warmed_up<R: Rng + ?Sized>(path: PathSpec, cfg: &SimConfig, rng: &mut R) -> Result<Self, SimError> {
        let mut sim = Self::empty(path);
        let n = libm::round(cfg.warmup / cfg.dt) as u64;
        for _ in 0..n {
            advance_traffic(&mut sim, None, cfg)?;
            spawn_traffic(&mut sim, cfg, rng);
        }
        Ok(sim)
    }

    pub fn add_vehicle(&mut self, lane: Lane, s: f64, v: f64) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.traffic.push(TrafficVehicle { id, lane, s, v, a: 0.0 });
        id
    }

    pub fn traffic_states(&self, layout: &IntersectionLayout) -> Vec<VehicleState> {
        self.traffic.iter().map(|t| t.state(layout)).collect()
    }

    pub fn crossed(&self) -> bool {
        self.ego_arclength >= self.path.length()
    }
}

/// Distance covered in `dt` from speed `v` under constant `a`, stopping at 0.
fn travel(v: f64, a: f64, dt: f64) -> (f64, f64) {
    let v1 = v + a * dt;
    if v1 < 0.0 {
        let t = v / -a;
        (0.0, v * t + 0.5 * a * t * t)
    } else {
        (v1, v * dt + 0.5 * a * dt * dt)
    }
}

/// Gap and closing speed from `veh` to the ego, if the ego sits in the
/// junction part of its lane wholly ahead of it.
fn ego_as_leader(veh: &TrafficVehicle, ego: &VehicleState, cfg: &SimConfig) -> Option<(f64, f64)> {
    let layout = &cfg.layout;
    let body = OrientedBox::of_vehicle(ego, &cfg.footprint);
    if !body.intersects(&layout.lane_conflict_zone(veh.lane)) {
        return None;
    }
    let ego_s = layout.lane_coordinate(veh.lane, ego.x);
    let half_extent = body.corners().iter().map(|c| (c.0 - ego.x).abs()).fold(0.0, f64::max);
    let gap = ego_s - half_extent - veh.s - 0.5 * cfg.footprint.length;
    // A car already alongside the ego cannot stop behind it.
    if gap <= 0.0 {
        return None;
    }
    let ego_speed = veh.lane.direction() * ego.velocity().0;
    Some((gap, veh.v - ego_speed))
}

/// Move every traffic vehicle one step under the IDM and drop those that
/// left the road.
fn advance_traffic(sim: &mut SimState, ego: Option<&VehicleState>, cfg: &SimConfig) -> Result<(), SimError> {
    let road = 2.0 * cfg.layout.road_half_length;
    let length = cfg.footprint.length;
    let mut accels = Vec::with_capacity(sim.traffic.len());
    for veh in &sim.traffic {
        let mut leader: Option<(f64, f64)> = None;
        for other in &sim.traffic {
            if other.id == veh.id || other.lane != veh.lane || other.s <= veh.s {
                continue;
            }
            let gap = other.s - veh.s - length;
            if leader.is_none_or(|(g, _)| gap < g) {
                leader = Some((gap, veh.v - other.v));
            }
        }
        if let Some(ego) = ego {
            if let Some((gap, dv)) = ego_as_leader(veh, ego, cfg) {
                if leader.is_none_or(|(g, _)| gap < g) {
                    leader = Some((gap, dv));
                }
            }
        }
        let (gap, dv) = leader.unwrap_or((f64::INFINITY, 0.0));
        accels.push(idm_accel(veh.v, gap, dv, &cfg.idm)?);
    }
    for (veh, a) in sim.traffic.iter_mut().zip(accels) {
        let (v1, ds) = travel(veh.v, a, cfg.dt);
        veh.s += ds;
        veh.v = v1;
        veh.a = a;
    }
    sim.traffic.retain(|v| v.s - 0.5 * length <= road);
    Ok(())
}

/// Attempt one spawn per lane entry with
/// [`SimConfig::entry_spawn_probability`].
///
/// Random draws are consumed identically whatever the road occupancy, so
/// runs sharing a seed see the same spawn attempts.
pub fn spawn_traffic<R: Rng + ?Sized>(sim: &mut SimState, cfg: &SimConfig, rng: &mut R) -> usize {
    let p = cfg.entry_spawn_probability();
    let mut spawned = 0;
    for lane in Lane::ALL {
        let u: f64 = rng.random();
        let frac: f64 = rng.random_range(cfg.spawn_speed_min..=1.0);
        if u >= p {
            continue;
        }
        let length = cfg.footprint.length;
        let nearest = sim
            .traffic
            .iter()
            .filter(|v| v.lane == lane)
            .min_by(|a, b| a.s.total_cmp(&b.s))
            .copied();
        let mut v = frac * cfg.idm.v0;
        if let Some(ahead) = nearest {
            let gap = ahead.s - length;
            if gap < cfg.idm.s0 {
                continue;
            }
            // Insert no faster than the leader allows at the desired gap.
            let safe = (gap - cfg.idm.s0) / cfg.idm.time_headway;
            v = v.min(safe);
        }
        sim.add_vehicle(lane, 0.0, v.max(0.0));
        spawned += 1;
    }
    spawned
}

/// True iff the ego's footprint overlaps any traffic vehicle.
pub fn detect_collision(sim: &SimState, cfg: &SimConfig) -> bool {
    let ego = OrientedBox::of_vehicle(&sim.ego, &cfg.footprint);
    sim.traffic
        .iter()
        .any(|t| ego.intersects(&OrientedBox::of_vehicle(&t.state(&cfg.layout), &cfg.footprint)))
}

/// Advance the world by one decision period.
pub fn sim_step<R: Rng + ?Sized>(sim: &mut SimState, action: AccelAction, cfg: &SimConfig, rng: &mut R) -> Result<StepEvents, SimError> {
    if sim.status.is_terminal() {
        return Err(SimError::Terminated);
    }
    let ego_before = sim.ego;
    advance_traffic(sim, Some(&ego_before), cfg)?;
    let (ego, s) = ego_step(&sim.ego, sim.ego_arclength, &sim.path, action, cfg.dt, cfg.max_speed);
    sim.ego = ego;
    sim.ego_arclength = s;
    let spawned = spawn_traffic(sim, cfg, rng);
    sim.steps += 1;
    sim.clock = sim.steps as f64 * cfg.dt;

    sim.status = if detect_collision(sim, cfg) {
        EpisodeStatus::Collided
    } else if sim.crossed() {
        EpisodeStatus::Crossed
    } else if sim.clock >= cfg.timeout - 1e-9 {
        EpisodeStatus::TimedOut
    } else {
        EpisodeStatus::Running
    };
    let flags = sim
        .traffic
        .iter()
        .map(|t| VehicleFlags {
            id: t.id,
            braking: t.a < cfg.braking_threshold,
            stopped: t.v < cfg.stop_threshold,
        })
        .collect();
    Ok(StepEvents {
        flags,
        spawned,
        status: sim.status,
    })
}

/// Noisy observation of every traffic vehicle, tagged with its id.
pub fn sense<R: Rng + ?Sized>(sim: &SimState, cfg: &SimConfig, rng: &mut R) -> Vec<(u64, VehicleObservation)> {
    sim.traffic
        .iter()
        .map(|t| (t.id, sample_observation(&t.state(&cfg.layout), &cfg.observation, rng)))
        .collect()
}

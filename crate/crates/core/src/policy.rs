//! Decision policies: the TTC threshold baseline, a uniform random policy
//! and the tree-search planner fed by the IMM belief.

use alloc::vec::Vec;

use rand::Rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::dynamics::VehicleObservation;
use crate::geometry::{Footprint, IntersectionLayout, Lane, OrientedBox, Turn};
use crate::idm::{idm_accel, IdmParams};
use crate::imm::{Hygiene, ImmBelief, ImmConfig};
use crate::kinematics::{heading_dir, AccelAction, VehicleState};
use crate::model::{IntersectionModel, WorldState};
use crate::pomcp::{plan_with_tree, RolloutPolicy, SolverConfig};

/// Action plus named scalars for logging.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyDecision {
    pub action: AccelAction,
    pub diagnostics: Vec<(&'static str, f64)>,
}

impl PolicyDecision {
    pub fn plain(action: AccelAction) -> Self {
        Self {
            action,
            diagnostics: Vec::new(),
        }
    }

    pub fn diagnostic(&self, key: &str) -> Option<f64> {
        self.diagnostics.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }
}

/// What a policy gets to see each decision step.
#[derive(Debug, Clone, Copy)]
pub struct PolicyInput<'a> {
    pub ego: VehicleState,
    pub ego_arclength: f64,
    pub observations: &'a [(u64, VehicleObservation)],
}

/// Time for `vehicle` to reach the line through the ego parallel to `y`.
///
/// `d` is the distance along `x` to the line and `V` the closing speed
/// relative to the ego. Receding vehicles (`V <= 0`), including those that
/// already crossed the line, never arrive.
pub fn ttc_compute(ego: &VehicleState, vehicle: &VehicleState) -> f64 {
    ttc_along_x(ego.x, ego.velocity().0, vehicle.x, vehicle.velocity().0)
}

/// TTC from the `x` positions and `x` velocities of ego and vehicle.
fn ttc_along_x(ego_x: f64, ego_vx: f64, x: f64, vx: f64) -> f64 {
    let offset = ego_x - x;
    if offset == 0.0 {
        return 0.0;
    }
    let closing = offset.signum() * (vx - ego_vx);
    if closing <= 0.0 {
        f64::INFINITY
    } else {
        offset.abs() / closing
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum TtcPhase {
    Waiting,
    Crossing,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtcPolicyState {
    pub threshold: f64,
    pub consecutive_clear: u8,
    pub phase: TtcPhase,
}

impl TtcPolicyState {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            consecutive_clear: 0,
            phase: TtcPhase::Waiting,
        }
    }
}

/// Fixed parameters of the TTC policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TtcParams {
    pub layout: IntersectionLayout,
    pub footprint: Footprint,
    pub idm: IdmParams,
    pub turn: Turn,
    /// Offsets (s) inside a decision step at which TTC is checked.
    pub check_offsets: [f64; 2],
    /// Consecutive clear checks needed to start crossing.
    pub clear_checks: u8,
}

impl TtcParams {
    pub fn new(layout: IntersectionLayout, footprint: Footprint, idm: IdmParams, turn: Turn) -> Self {
        Self {
            layout,
            footprint,
            idm,
            turn,
            check_offsets: [0.0, 0.1],
            clear_checks: 2,
        }
    }

    /// IDM acceleration for the ego following the nearest car ahead on its
    /// target lane, snapped to the action set.
    pub fn crossing_action<'a, I>(&self, ego: &VehicleState, others: I) -> AccelAction
    where
        I: IntoIterator<Item = &'a VehicleState>,
    {
        let lane = IntersectionLayout::target_lane(self.turn);
        let ego_s = self.layout.lane_coordinate(lane, ego.x);
        let mut leader: Option<(f64, f64)> = None;
        for o in others {
            if self.layout.lane_at(o.x, o.y) != Some(lane) {
                continue;
            }
            let s = self.layout.lane_coordinate(lane, o.x);
            if s <= ego_s {
                continue;
            }
            let gap = s - ego_s - self.footprint.length;
            if leader.is_none_or(|(g, _)| gap < g) {
                leader = Some((gap, ego.v - o.v));
            }
        }
        let (gap, dv) = leader.map_or((f64::INFINITY, 0.0), |(g, dv)| (g.max(1e-3), dv));
        let a = idm_accel(ego.v, gap, dv, &self.idm).unwrap_or(-self.idm.b_comf);
        AccelAction::nearest(a)
    }

    /// One decision of the threshold policy. Returns the action and the
    /// smallest TTC seen at the checks (infinite once crossing).
    pub fn step<'a, I>(&self, ego: &VehicleState, others: I, st: &mut TtcPolicyState) -> (AccelAction, f64)
    where
        I: IntoIterator<Item = &'a VehicleState> + Clone,
    {
        let mut min_seen = f64::INFINITY;
        if st.phase == TtcPhase::Waiting {
            // Linear propagation to each check offset only moves `x` by
            // `vx * dt`, so velocities are computed once.
            let ego_vx = ego.velocity().0;
            let xs: Vec<(f64, f64)> = others.clone().into_iter().map(|o| (o.x, o.velocity().0)).collect();
            for &dt in &self.check_offsets {
                let ex = ego.x + ego_vx * dt;
                let min_ttc = xs
                    .iter()
                    .map(|&(x, vx)| ttc_along_x(ex, ego_vx, x + vx * dt, vx))
                    .fold(f64::INFINITY, f64::min);
                min_seen = min_seen.min(min_ttc);
                if min_ttc > st.threshold {
                    st.consecutive_clear += 1;
                } else {
                    st.consecutive_clear = 0;
                }
                if st.consecutive_clear >= self.clear_checks {
                    st.phase = TtcPhase::Crossing;
                    st.consecutive_clear = self.clear_checks;
                    break;
                }
            }
        }
        let action = match st.phase {
            TtcPhase::Waiting if ego.v > 0.0 => AccelAction::ModerateBrake,
            TtcPhase::Waiting => AccelAction::Maintain,
            TtcPhase::Crossing => self.crossing_action(ego, others),
        };
        (action, min_seen)
    }
}

/// Threshold baseline acting on noisy observations.
#[derive(Debug, Clone)]
pub struct TtcPolicy {
    pub params: TtcParams,
    pub state: TtcPolicyState,
}

impl TtcPolicy {
    pub fn new(params: TtcParams, threshold: f64) -> Self {
        Self {
            params,
            state: TtcPolicyState::new(threshold),
        }
    }

    pub fn decide(&mut self, input: &PolicyInput) -> PolicyDecision {
        let others: Vec<VehicleState> = input.observations.iter().map(|(_, z)| z.as_state()).collect();
        let (action, min_ttc) = self.params.step(&input.ego, &others, &mut self.state);
        PolicyDecision {
            action,
            diagnostics: alloc::vec![
                ("min_ttc", min_ttc),
                ("crossing", (self.state.phase == TtcPhase::Crossing) as u8 as f64),
            ],
        }
    }
}

/// Uniform draw over the action set.
pub fn random_policy_step<R: Rng + ?Sized>(rng: &mut R) -> PolicyDecision {
    PolicyDecision::plain(AccelAction::ALL[rng.random_range(0..AccelAction::ALL.len())])
}

/// TTC policy run on the planner's simulated states. A rollout starts in
/// the crossing phase once the ego body has reached the main road.
#[derive(Debug, Clone, Copy)]
pub struct TtcRollout {
    pub params: TtcParams,
    pub threshold: f64,
}

impl TtcRollout {
    pub fn committed(&self, ego: &VehicleState) -> bool {
        let body = OrientedBox::of_vehicle(ego, &self.params.footprint);
        Lane::ALL.iter().any(|&lane| body.intersects(&self.params.layout.lane_strip(lane)))
    }
}

impl RolloutPolicy<IntersectionModel> for TtcRollout {
    type Memory = TtcPolicyState;

    fn start(&self, _model: &IntersectionModel, state: &WorldState) -> TtcPolicyState {
        let mut st = TtcPolicyState::new(self.threshold);
        if self.committed(&state.ego) {
            st.phase = TtcPhase::Crossing;
            st.consecutive_clear = self.params.clear_checks;
        }
        st
    }

    fn act<R: Rng + ?Sized>(
        &self,
        _model: &IntersectionModel,
        state: &WorldState,
        memory: &mut TtcPolicyState,
        _rng: &mut R,
    ) -> AccelAction {
        self.params.step(&state.ego, state.others.iter().map(|(o, _)| o), memory).0
    }
}

/// Tree-search policy: IMM belief update, then plan from the belief.
#[derive(Debug, Clone)]
pub struct PomcpPolicy {
    pub model: IntersectionModel,
    pub solver: SolverConfig,
    pub filter: ImmConfig,
    pub rollout: TtcRollout,
    pub belief: ImmBelief,
    /// Cars whose rear is this far (m) past every point the ego could
    /// reach, and driving away, are left out of the search.
    pub prune_margin: f64,
}

/// Diagnostic keys for the root action values, by action index.
pub const Q_KEYS: [&str; 4] = ["q_-4", "q_-2", "q_0", "q_+2"];

impl PomcpPolicy {
    pub fn new(model: IntersectionModel, solver: SolverConfig, filter: ImmConfig, rollout: TtcRollout) -> Self {
        let ego = model.path.state_at(0.0, 0.0, 0.0);
        Self {
            model,
            solver,
            filter,
            rollout,
            belief: ImmBelief::new(ego, 0.0),
            prune_margin: 10.0,
        }
    }

    /// Corners of the box holding every footprint the ego can occupy.
    fn reach_corners(&self) -> [(f64, f64); 4] {
        let fp = &self.model.config.footprint;
        let pad = 0.5 * fp.length.hypot(fp.width);
        let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in self.model.path.waypoints() {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        [
            (x0 - pad, y0 - pad),
            (x1 + pad, y0 - pad),
            (x1 + pad, y1 + pad),
            (x0 - pad, y1 + pad),
        ]
    }

    /// True if a car at `(x, y)` heading `theta` is already past the ego's
    /// reach by the margin.
    pub fn is_receding(&self, theta: f64, x: f64, y: f64) -> bool {
        let (hx, hy) = heading_dir(theta);
        let clear = 0.5 * self.model.config.footprint.length + self.prune_margin;
        self.reach_corners().iter().all(|&(cx, cy)| (x - cx) * hx + (y - cy) * hy > clear)
    }

    pub fn hygiene(&self) -> Hygiene {
        self.belief.hygiene()
    }

    pub fn decide<R: Rng + ?Sized>(&mut self, input: &PolicyInput, rng: &mut R) -> PolicyDecision {
        let summary = self.belief.update(input.ego, input.ego_arclength, input.observations, &self.filter);
        let mut sampler = self.belief.sampler();
        let pruned = sampler.retain_tracks(|theta, x, y| !self.is_receding(theta, x, y));
        let (action, tree) = plan_with_tree(&sampler, self.solver, &self.model, &self.rollout, rng);
        let mut diagnostics = Vec::with_capacity(8);
        for (a, q) in tree.root_values() {
            if let Some(q) = q {
                diagnostics.push((Q_KEYS[a.index()], q));
            }
        }
        let h = self.belief.hygiene();
        diagnostics.push(("tracks", self.belief.tracks.len() as f64));
        diagnostics.push(("pruned", pruned as f64));
        diagnostics.push(("imm_fallbacks", summary.fallbacks as f64));
        diagnostics.push(("non_psd", h.non_psd as f64));
        diagnostics.push(("prob_error", h.max_prob_error));
        PolicyDecision { action, diagnostics }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ego() -> VehicleState {
        VehicleState::new(2.0, -4.0, 0.0, 0.0, 0.0)
    }

    fn params() -> TtcParams {
        TtcParams::new(
            IntersectionLayout::default(),
            Footprint::default(),
            IdmParams::default(),
            Turn::Right,
        )
    }

    #[test]
    fn ttc_division_and_edge_cases() {
        let e = ego();
        let v = VehicleState::new(2.0 - 45.0, 2.0, FRAC_PI_2, 10.0, 0.0);
        assert!((ttc_compute(&e, &v) - 4.5).abs() < 1e-12);
        let away = VehicleState::new(2.0 - 45.0, 2.0, -FRAC_PI_2, 10.0, 0.0);
        assert_eq!(ttc_compute(&e, &away), f64::INFINITY);
        let at_line = VehicleState::new(2.0, 2.0, FRAC_PI_2, 10.0, 0.0);
        assert_eq!(ttc_compute(&e, &at_line), 0.0);
        let passed = VehicleState::new(10.0, 2.0, FRAC_PI_2, 10.0, 0.0);
        assert_eq!(ttc_compute(&e, &passed), f64::INFINITY);
    }

    #[test]
    fn ttc_is_scale_consistent() {
        let e = ego();
        let a = VehicleState::new(-20.0, 6.0, FRAC_PI_2, 7.0, 0.0);
        let b = VehicleState::new(2.0 - 44.0, 6.0, FRAC_PI_2, 14.0, 0.0);
        assert!((ttc_compute(&e, &a) - ttc_compute(&e, &b)).abs() < 1e-12);
    }

    #[test]
    fn empty_road_starts_crossing_in_first_step() {
        let p = params();
        let mut st = TtcPolicyState::new(4.5);
        let (action, min_ttc) = p.step(&ego(), &[], &mut st);
        assert_eq!(st.phase, TtcPhase::Crossing);
        assert_eq!(min_ttc, f64::INFINITY);
        assert_eq!(action, AccelAction::Accelerate);
    }

    #[test]
    fn close_vehicle_keeps_waiting() {
        let p = params();
        let mut st = TtcPolicyState::new(4.5);
        st.consecutive_clear = 1;
        let v = VehicleState::new(2.0 - 30.0, 2.0, FRAC_PI_2, 10.0, 0.0);
        let (action, min_ttc) = p.step(&ego(), &[v], &mut st);
        assert!(min_ttc < 3.1);
        assert_eq!(st.phase, TtcPhase::Waiting);
        assert_eq!(st.consecutive_clear, 0);
        assert_eq!(action, AccelAction::Maintain);
        let moving = VehicleState { v: 1.0, ..ego() };
        assert_eq!(p.step(&moving, &[v], &mut st).0, AccelAction::ModerateBrake);
    }

    #[test]
    fn crossing_is_absorbing() {
        let p = params();
        let mut st = TtcPolicyState::new(4.5);
        p.step(&ego(), &[], &mut st);
        let v = VehicleState::new(2.0 - 5.0, 2.0, FRAC_PI_2, 10.0, 0.0);
        for _ in 0..10 {
            p.step(&ego(), &[v], &mut st);
            assert_eq!(st.phase, TtcPhase::Crossing);
        }
    }

    #[test]
    fn crossing_at_desired_speed_maintains() {
        let p = params();
        let mut st = TtcPolicyState::new(4.5);
        st.phase = TtcPhase::Crossing;
        let cruising = VehicleState { v: p.idm.v0, ..ego() };
        assert_eq!(p.step(&cruising, &[], &mut st).0, AccelAction::Maintain);
    }

    #[test]
    fn crossing_brakes_for_a_slow_leader() {
        let p = params();
        let layout = p.layout;
        let ego = VehicleState::new(8.0, 2.0, FRAC_PI_2, 10.0, 0.0);
        let (x, y, th) = layout.lane_pose(Lane::Eastbound, layout.lane_coordinate(Lane::Eastbound, 16.0));
        let leader = VehicleState::new(x, y, th, 0.0, 0.0);
        assert_eq!(p.crossing_action(&ego, [&leader]), AccelAction::StrongBrake);
    }

    #[test]
    fn random_policy_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[random_policy_step(&mut rng).action.index()] += 1;
        }
        let se = libm::sqrt(0.25 * 0.75 / n as f64);
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() < 3.0 * se);
        }
        let a: Vec<_> = (0..20)
            .map(|_| random_policy_step(&mut ChaCha8Rng::seed_from_u64(3)).action)
            .collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn only_cars_past_the_junction_and_leaving_are_pruned() {
        let layout = IntersectionLayout::default();
        let model = IntersectionModel::new(crate::model::ModelConfig::default(), layout.path(Turn::Right));
        let filter = ImmConfig::new(0.25, 1.0, 1.0, Default::default(), Default::default());
        let rollout = TtcRollout {
            params: params(),
            threshold: 4.5,
        };
        let p = PomcpPolicy::new(model, SolverConfig::default(), filter, rollout);
        let east = Lane::Eastbound.heading();
        let west = Lane::Westbound.heading();
        assert!(p.is_receding(east, 40.0, 2.0));
        assert!(!p.is_receding(east, -40.0, 2.0));
        assert!(!p.is_receding(east, 15.0, 2.0));
        assert!(p.is_receding(west, -40.0, 6.0));
        assert!(!p.is_receding(west, 20.0, 6.0));
    }
}

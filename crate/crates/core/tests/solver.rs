#[path = "support/toys.rs"]
mod toys;

use crossing_core::geometry::{Footprint, IntersectionLayout, Turn};
use crossing_core::idm::IdmParams;
use crossing_core::policy::{TtcParams, TtcRollout};
use crossing_core::pomcp::{
    plan, plan_with_tree, pw_child_bound, pw_should_widen, rollout, ucb_select, EdgeStats, ExplorationBonus, GenerativeModel, Planner,
    SolverConfig, Transition,
};
use crossing_core::AccelAction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use toys::*;

fn edges(stats: &[(u32, f64)]) -> Vec<EdgeStats> {
    stats
        .iter()
        .map(|&(visits, value)| EdgeStats {
            visits,
            value,
            children: 0,
        })
        .collect()
}

fn cfg(depth: u32, queries: u32) -> SolverConfig {
    SolverConfig {
        depth,
        tree_queries: queries,
        ..SolverConfig::default()
    }
}

#[test]
fn ucb_examples() {
    assert_eq!(
        ucb_select(3, &edges(&[(1, 50.0), (0, -100.0), (2, 80.0)]), 20.0, ExplorationBonus::Ratio),
        1
    );
    assert_eq!(
        ucb_select(9, &edges(&[(3, 1.0), (3, 7.0), (3, 7.0)]), 0.0, ExplorationBonus::Ratio),
        1
    );
    assert_eq!(ucb_select(5, &edges(&[(1, 0.0), (4, 0.0)]), 1.0, ExplorationBonus::Ratio), 0);
    assert_eq!(ucb_select(5, &edges(&[(4, 0.0), (1, 0.0)]), 1.0, ExplorationBonus::Log), 1);
    assert_eq!(ucb_select(0, &edges(&[(0, 0.0), (0, 0.0)]), 1.0, ExplorationBonus::Ratio), 0);
}

#[test]
fn widening_examples() {
    assert!(!pw_should_widen(4.0, 0.2, 1, 4));
    assert!(pw_should_widen(4.0, 0.2, 32, 4));
    assert!(pw_should_widen(4.0, 0.2, 0, 0));
    for n in 0..1000 {
        assert!(!pw_should_widen(1.0, 0.0, n, 1));
    }
    assert_eq!(pw_child_bound(4.0, 0.2, 32), 8);
}

#[test]
fn single_action_is_returned() {
    let model = deterministic_intersection(Turn::Right).with_actions(&[AccelAction::ModerateBrake]);
    let state = conflict_state(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let a = plan(&PointBelief(state), cfg(3, 50), &model, &UniformRollout, &mut rng);
    assert_eq!(a, AccelAction::ModerateBrake);
}

fn agreement<M, F>(model: &M, state: M::State, depth: u32, seeds: u64, expected: usize, index: F) -> u64
where
    M: GenerativeModel,
    F: Fn(M::Action) -> usize,
{
    (0..seeds)
        .filter(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            index(plan(&PointBelief(state.clone()), cfg(depth, 500), model, &UniformRollout, &mut rng)) == expected
        })
        .count() as u64
}

#[test]
fn chain_toy_matches_expectimax() {
    let (_, best) = expectimax(&Chain, &0, 2);
    assert_eq!(best, 3);
    assert!(agreement(&Chain, 0, 2, 100, best, |a| a) >= 99);
}

#[test]
fn delayed_payoff_toy_matches_expectimax() {
    let (_, best) = expectimax(&Delayed, &0, 3);
    assert_eq!(best, 0);
    assert!(agreement(&Delayed, 0, 3, 100, best, |a| a) >= 99);
}

#[test]
fn conflict_toy_matches_expectimax() {
    let model = deterministic_intersection(Turn::Right);
    let state = conflict_state(&model);
    let (_, best) = expectimax(&model, &state, 3);
    assert_eq!(best, strong_brake_index());
    assert!(agreement(&model, state, 3, 100, best, |a: AccelAction| a.index()) >= 99);
}

#[test]
fn root_visits_count_queries_and_planning_is_deterministic() {
    let model = toys::deterministic_intersection(Turn::Left);
    let state = conflict_state(&model);
    for q in [1, 3, 4, 17, 200] {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (a, tree) = plan_with_tree(&PointBelief(state.clone()), cfg(5, q), &model, &UniformRollout, &mut rng);
        assert_eq!(tree.root_edges().map(|e| e.visits).sum::<u32>(), q);
        assert_eq!(tree.root_visits(), q);
        for (n, sum) in tree.node_visit_sums() {
            assert_eq!(n, sum);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(plan(&PointBelief(state.clone()), cfg(5, q), &model, &UniformRollout, &mut rng), a);
    }
}

#[test]
fn zero_depth_returns_nothing() {
    let model = deterministic_intersection(Turn::Right);
    let state = conflict_state(&model);
    let mut planner = Planner::new(&model, &UniformRollout, cfg(3, 1));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(planner.simulate(&state, 0, 0, &mut rng), 0.0);
    assert_eq!(planner.tree.root_visits(), 0);
    assert_eq!(rollout(&state, 0, &model, &UniformRollout, &mut rng), 0.0);
}

/// One step to an absorbing collision, whatever the action.
struct Cliff;

impl GenerativeModel for Cliff {
    type State = ();
    type Action = usize;
    fn actions(&self) -> &[usize] {
        &[0, 1]
    }
    fn discount(&self) -> f64 {
        0.95
    }
    fn step<R: Rng + ?Sized>(&self, _s: &(), _a: usize, _rng: &mut R) -> Transition<()> {
        Transition {
            state: (),
            reward: -2000.0,
            terminal: true,
        }
    }
}

#[test]
fn terminal_children_hold_their_reward() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (_, tree) = plan_with_tree(&PointBelief(()), cfg(4, 50), &Cliff, &UniformRollout, &mut rng);
    for e in tree.root_edges() {
        assert_eq!(e.value, -2000.0);
    }
    assert_eq!(rollout(&(), 5, &Cliff, &UniformRollout, &mut rng), -2000.0);
}

#[test]
fn child_counts_respect_the_widening_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let model = crossing_core::IntersectionModel::new(Default::default(), IntersectionLayout::default().path(Turn::Left));
    let state = conflict_state(&model);
    let mut checks = 0u32;
    while checks < 10_000 {
        let config = SolverConfig {
            depth: rng.random_range(1..8),
            pw_k: rng.random_range(0.5..6.0),
            pw_alpha: rng.random_range(0.0..1.0),
            ..SolverConfig::default()
        };
        let mut planner = Planner::new(&model, &UniformRollout, config);
        for _ in 0..rng.random_range(1..200) {
            planner.simulate(&state, 0, config.depth, &mut rng);
            checks += 1;
            for e in planner.tree.all_edges() {
                assert!(e.children <= pw_child_bound(config.pw_k, config.pw_alpha, e.visits));
            }
        }
    }
}

#[test]
fn values_stay_within_achievable_returns() {
    let model = crossing_core::IntersectionModel::new(Default::default(), IntersectionLayout::default().path(Turn::Right));
    let state = conflict_state(&model);
    let reward = model.config.reward;
    let (lo, hi) = (reward.min_step_reward(), reward.max_step_reward());
    let depth = 6;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (_, tree) = plan_with_tree(&PointBelief(state), cfg(depth, 400), &model, &UniformRollout, &mut rng);
    let g = model.discount();
    let geometric: f64 = (0..depth).map(|t| g.powi(t as i32)).sum();
    // At most one terminal reward plus a discounted run of penalties.
    let min = lo + reward.strong_brake_penalty.min(0.0) * geometric;
    let max = hi.max(0.0);
    for e in tree.all_edges().filter(|e| e.visits > 0) {
        assert!(e.value.is_finite() && e.value >= min - 1e-9 && e.value <= max + 1e-9);
    }
}

#[test]
fn ttc_rollout_on_an_empty_road_follows_the_trace() {
    let layout = IntersectionLayout::default();
    let model = deterministic_intersection(Turn::Right);
    let policy = TtcRollout {
        params: TtcParams::new(layout, Footprint::default(), IdmParams::default(), Turn::Right),
        threshold: 4.5,
    };
    let state = model.initial_state(vec![]);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let value = rollout(&state, 40, &model, &policy, &mut rng);

    // Same trace by hand: the empty road lets the policy accelerate until
    // the path ends.
    let mut s = state;
    let mut expected = 0.0;
    let mut discount = 1.0;
    for _ in 0..40 {
        let t = model.step(&s, AccelAction::Accelerate, &mut rng);
        expected += discount * t.reward;
        if t.terminal {
            assert_eq!(t.reward, 100.0);
            break;
        }
        discount *= model.discount();
        s = t.state;
    }
    assert!((value - expected).abs() < 1e-12, "{value} vs {expected}");
}

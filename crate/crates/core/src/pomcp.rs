//! Online tree search over sampled states with progressive widening.
//!
//! Root states are drawn from the belief, every node below the root is
//! generated by the [`GenerativeModel`], and each action edge keeps a list of
//! sampled successor states whose size is capped by the progressive widening
//! rule `k' = k * N(h, a)^alpha`. New nodes are expanded (all actions
//! initialized to zero visits and zero value) and valued by a rollout.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{Debug, Write};

use rand::Rng;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Result of one generative step.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<S> {
    pub state: S,
    pub reward: f64,
    pub terminal: bool,
}

/// Black-box simulator used by the planner. Implementations must be pure
/// given the random source.
pub trait GenerativeModel {
    type State: Clone;
    type Action: Copy + PartialEq + Debug;

    fn actions(&self) -> &[Self::Action];
    fn discount(&self) -> f64;
    fn step<R: Rng + ?Sized>(&self, state: &Self::State, action: Self::Action, rng: &mut R) -> Transition<Self::State>;
}

/// Source of root states.
pub trait Belief {
    type State;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;
}

/// Policy used to value new leaves. `Memory` carries per-rollout state.
pub trait RolloutPolicy<M: GenerativeModel> {
    type Memory;
    fn start(&self, model: &M, state: &M::State) -> Self::Memory;
    fn act<R: Rng + ?Sized>(&self, model: &M, state: &M::State, memory: &mut Self::Memory, rng: &mut R) -> M::Action;
}

/// Exploration bonus used by the action selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ExplorationBonus {
    /// `c * sqrt(N(h) / N(h, a))`
    #[default]
    Ratio,
    /// `c * sqrt(ln N(h) / N(h, a))`, the usual UCT form.
    Log,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SolverConfig {
    pub depth: u32,
    pub exploration: f64,
    pub tree_queries: u32,
    pub pw_k: f64,
    pub pw_alpha: f64,
    pub bonus: ExplorationBonus,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            depth: 15,
            exploration: 20.0,
            tree_queries: 2000,
            pw_k: 4.0,
            pw_alpha: 0.2,
            bonus: ExplorationBonus::Ratio,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.depth < 1 {
            return Err(ConfigError::invalid("solver.depth", "must be at least 1"));
        }
        if self.tree_queries < 1 {
            return Err(ConfigError::invalid("solver.tree_queries", "must be at least 1"));
        }
        if !(self.pw_k > 0.0) {
            return Err(ConfigError::invalid("solver.pw_k", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.pw_alpha) {
            return Err(ConfigError::invalid("solver.pw_alpha", "must lie in [0, 1]"));
        }
        if !(self.exploration >= 0.0) {
            return Err(ConfigError::invalid("solver.exploration", "must be non-negative"));
        }
        Ok(())
    }
}

/// Progressive widening: sample a new successor when
/// `k * visits^alpha` exceeds the current number of children (or there are
/// none yet), otherwise revisit an existing one.
pub fn pw_should_widen(k: f64, alpha: f64, visits: u32, children: usize) -> bool {
    children == 0 || k * libm::pow(visits as f64, alpha) > children as f64
}

/// Upper bound on children implied by the widening rule.
pub fn pw_child_bound(k: f64, alpha: f64, visits: u32) -> usize {
    libm::ceil(k * libm::pow(visits as f64, alpha)) as usize
}

#[derive(Debug, Clone)]
struct HistoryNode {
    visits: u32,
    expanded: bool,
    first_edge: u32,
}

#[derive(Debug, Clone)]
struct Child<S> {
    state: S,
    reward: f64,
    terminal: bool,
    node: u32,
}

#[derive(Debug, Clone)]
struct ActionNode<S> {
    visits: u32,
    value: f64,
    children: Vec<Child<S>>,
}

/// Visit statistics of one action edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeStats {
    pub visits: u32,
    pub value: f64,
    pub children: usize,
}

/// Search tree of one planning call.
#[derive(Debug, Clone)]
pub struct SearchTree<S, A> {
    actions: Vec<A>,
    nodes: Vec<HistoryNode>,
    edges: Vec<ActionNode<S>>,
}

impl<S: Clone, A: Copy + PartialEq + Debug> SearchTree<S, A> {
    /// Tree with an expanded root.
    pub fn new(actions: &[A]) -> Self {
        let mut tree = Self {
            actions: actions.to_vec(),
            nodes: Vec::new(),
            edges: Vec::new(),
        };
        let root = tree.add_node();
        tree.expand(root);
        tree
    }

    fn add_node(&mut self) -> u32 {
        self.nodes.push(HistoryNode {
            visits: 0,
            expanded: false,
            first_edge: 0,
        });
        (self.nodes.len() - 1) as u32
    }

    fn expand(&mut self, node: u32) {
        let first = self.edges.len() as u32;
        for _ in 0..self.actions.len() {
            self.edges.push(ActionNode {
                visits: 0,
                value: 0.0,
                children: Vec::new(),
            });
        }
        let n = &mut self.nodes[node as usize];
        n.expanded = true;
        n.first_edge = first;
    }

    pub fn actions(&self) -> &[A] {
        &self.actions
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn root_visits(&self) -> u32 {
        self.nodes[0].visits
    }

    pub fn root_edges(&self) -> impl Iterator<Item = EdgeStats> + '_ {
        self.edge_stats(0)
    }

    fn edge_stats(&self, node: u32) -> impl Iterator<Item = EdgeStats> + '_ {
        let n = &self.nodes[node as usize];
        let range = if n.expanded {
            n.first_edge as usize..n.first_edge as usize + self.actions.len()
        } else {
            0..0
        };
        self.edges[range].iter().map(|e| EdgeStats {
            visits: e.visits,
            value: e.value,
            children: e.children.len(),
        })
    }

    /// Every action edge in the tree.
    pub fn all_edges(&self) -> impl Iterator<Item = EdgeStats> + '_ {
        self.edges.iter().map(|e| EdgeStats {
            visits: e.visits,
            value: e.value,
            children: e.children.len(),
        })
    }

    /// Every expanded history node as `(N(h), sum_a N(h, a))`.
    pub fn node_visit_sums(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| n.expanded)
            .map(move |(i, n)| (n.visits, self.edge_stats(i as u32).map(|e| e.visits).sum()))
    }

    /// Highest-value visited root action; ties go to the lowest index.
    pub fn best_action(&self) -> A {
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in self.root_edges().enumerate() {
            if e.visits == 0 {
                continue;
            }
            if best.is_none_or(|(_, v)| e.value > v) {
                best = Some((i, e.value));
            }
        }
        self.actions[best.map_or(0, |(i, _)| i)]
    }

    /// Root action values, `None` for unvisited actions.
    pub fn root_values(&self) -> Vec<(A, Option<f64>)> {
        self.root_edges()
            .zip(self.actions.iter())
            .map(|(e, a)| (*a, (e.visits > 0).then_some(e.value)))
            .collect()
    }

    /// Text dump of the tree down to `max_depth` history levels: one line per
    /// node with `N`, then one line per action with `N`, `Q` and the number
    /// of sampled successors.
    pub fn dump(&self, max_depth: usize) -> String {
        let mut out = String::new();
        self.dump_node(0, 0, max_depth, &mut out);
        out
    }

    fn dump_node(&self, node: u32, depth: usize, max_depth: usize, out: &mut String) {
        let indent = "  ".repeat(2 * depth);
        let n = &self.nodes[node as usize];
        let _ = writeln!(out, "{indent}h N={}", n.visits);
        if !n.expanded || depth >= max_depth {
            return;
        }
        for (i, a) in self.actions.iter().enumerate() {
            let e = &self.edges[n.first_edge as usize + i];
            let _ = writeln!(
                out,
                "{indent}  a={a:?} N={} Q={:.4} children={}",
                e.visits,
                e.value,
                e.children.len()
            );
            for c in &e.children {
                if c.terminal {
                    let _ = writeln!(out, "{indent}    terminal r={:.4}", c.reward);
                } else {
                    self.dump_node(c.node, depth + 1, max_depth, out);
                }
            }
        }
    }
}

/// Action maximizing `Q + bonus`; unvisited actions score infinity and ties
/// go to the lowest index.
pub fn ucb_select(node_visits: u32, edges: &[EdgeStats], c: f64, bonus: ExplorationBonus) -> usize {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, e) in edges.iter().enumerate() {
        let score = if e.visits == 0 {
            f64::INFINITY
        } else {
            let n = node_visits as f64;
            let ratio = match bonus {
                ExplorationBonus::Ratio => n / e.visits as f64,
                ExplorationBonus::Log => libm::log(n.max(1.0)) / e.visits as f64,
            };
            e.value + c * libm::sqrt(ratio)
        };
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    best
}

/// Planner state for one search.
pub struct Planner<'a, M: GenerativeModel, P: RolloutPolicy<M>> {
    pub model: &'a M,
    pub rollout_policy: &'a P,
    pub config: SolverConfig,
    pub tree: SearchTree<M::State, M::Action>,
}

impl<'a, M: GenerativeModel, P: RolloutPolicy<M>> Planner<'a, M, P> {
    pub fn new(model: &'a M, rollout_policy: &'a P, config: SolverConfig) -> Self {
        Self {
            tree: SearchTree::new(model.actions()),
            model,
            rollout_policy,
            config,
        }
    }

    /// Run `tree_queries` simulations from root states drawn from `belief`.
    pub fn search<B, R>(&mut self, belief: &B, rng: &mut R)
    where
        B: Belief<State = M::State>,
        R: Rng + ?Sized,
    {
        for _ in 0..self.config.tree_queries {
            let state = belief.sample(rng);
            self.simulate(&state, 0, self.config.depth, rng);
        }
    }

    /// Pick the successor of an edge: widen with a fresh sample or revisit
    /// a stored one uniformly at random. Returns the child index and whether
    /// it is new.
    pub fn pw_next_state<R: Rng + ?Sized>(&mut self, state: &M::State, edge: usize, action: M::Action, rng: &mut R) -> (usize, bool) {
        let e = &self.tree.edges[edge];
        if pw_should_widen(self.config.pw_k, self.config.pw_alpha, e.visits, e.children.len()) {
            let t = self.model.step(state, action, rng);
            let node = if t.terminal { u32::MAX } else { self.tree.add_node() };
            let children = &mut self.tree.edges[edge].children;
            children.push(Child {
                state: t.state,
                reward: t.reward,
                terminal: t.terminal,
                node,
            });
            (children.len() - 1, true)
        } else {
            (rng.random_range(0..e.children.len()), false)
        }
    }

    /// One descent from `node` with `depth` steps left; returns the
    /// discounted return and backs it up along the way.
    pub fn simulate<R: Rng + ?Sized>(&mut self, state: &M::State, node: u32, depth: u32, rng: &mut R) -> f64 {
        if depth == 0 {
            return 0.0;
        }
        if !self.tree.nodes[node as usize].expanded {
            self.tree.expand(node);
            return rollout(state, depth, self.model, self.rollout_policy, rng);
        }
        let first = self.tree.nodes[node as usize].first_edge as usize;
        let n_actions = self.tree.actions.len();
        let stats: Vec<EdgeStats> = self.tree.edge_stats(node).collect();
        let a = ucb_select(
            self.tree.nodes[node as usize].visits,
            &stats,
            self.config.exploration,
            self.config.bonus,
        );
        debug_assert!(a < n_actions);
        let edge = first + a;
        let action = self.tree.actions[a];
        let (ci, _) = self.pw_next_state(state, edge, action, rng);
        let child = &self.tree.edges[edge].children[ci];
        let ret = if child.terminal {
            child.reward
        } else {
            let (reward, next, child_node) = (child.reward, child.state.clone(), child.node);
            reward + self.model.discount() * self.simulate(&next, child_node, depth - 1, rng)
        };
        self.tree.nodes[node as usize].visits += 1;
        let e = &mut self.tree.edges[edge];
        e.visits += 1;
        e.value += (ret - e.value) / e.visits as f64;
        ret
    }
}

/// Discounted return of following the rollout policy for up to `depth`
/// steps or until a terminal transition.
pub fn rollout<M, P, R>(state: &M::State, depth: u32, model: &M, policy: &P, rng: &mut R) -> f64
where
    M: GenerativeModel,
    P: RolloutPolicy<M>,
    R: Rng + ?Sized,
{
    let mut memory = policy.start(model, state);
    let mut s = state.clone();
    let mut ret = 0.0;
    let mut discount = 1.0;
    for _ in 0..depth {
        let a = policy.act(model, &s, &mut memory, rng);
        let t = model.step(&s, a, rng);
        ret += discount * t.reward;
        if t.terminal {
            break;
        }
        discount *= model.discount();
        s = t.state;
    }
    ret
}

/// Search from `belief` and return the best root action with its tree.
pub fn plan_with_tree<M, P, B, R>(
    belief: &B,
    config: SolverConfig,
    model: &M,
    rollout_policy: &P,
    rng: &mut R,
) -> (M::Action, SearchTree<M::State, M::Action>)
where
    M: GenerativeModel,
    P: RolloutPolicy<M>,
    B: Belief<State = M::State>,
    R: Rng + ?Sized,
{
    let mut planner = Planner::new(model, rollout_policy, config);
    planner.search(belief, rng);
    (planner.tree.best_action(), planner.tree)
}

pub fn plan<M, P, B, R>(belief: &B, config: SolverConfig, model: &M, rollout_policy: &P, rng: &mut R) -> M::Action
where
    M: GenerativeModel,
    P: RolloutPolicy<M>,
    B: Belief<State = M::State>,
    R: Rng + ?Sized,
{
    plan_with_tree(belief, config, model, rollout_policy, rng).0
}

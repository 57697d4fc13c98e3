//! Small deterministic environments behind one dynamics interface, plus
//! exhaustive trajectory enumeration and ground-MDP value iteration.
//!
//! Dynamics are pure functions `(obs, action) -> (next_obs, reward, done)`,
//! which makes enumeration and reachable-set construction trivial; the
//! stateful [`Env`] wrapper adds episode bookkeeping on top.

mod dubins;
mod graph_motif;
mod micro_grid;
mod point_rooms;

pub use dubins::DubinsReacher;
pub use graph_motif::{motif_env, GraphMotif, MotifClass};
pub use micro_grid::{builtin_layout, MicroGrid};
pub use point_rooms::PointRooms;

use std::collections::HashMap;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kv::KvBlock;
use crate::lift::{AdapterRegistry, Transition};
use crate::segment::TrajectorySegment;

/// Default cap on exhaustive-enumeration horizons.
pub const DEFAULT_ENUM_CAP: usize = 8;

/// Deterministic environment dynamics. Implementations must be pure: the
/// same `(obs, action)` always yields the same `(next_obs, reward, done)`.
pub trait Dynamics: Send + Sync {
    fn tag(&self) -> &str;
    fn action_count(&self) -> usize;
    /// Canonical episode start.
    fn fixed_start(&self) -> Vec<f64>;
    /// Seeded start-state sampling; defaults to the fixed start.
    fn sample_start(&self, _rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.fixed_start()
    }
    fn transition(&self, obs: &[f64], action: usize) -> (Vec<f64>, f64, bool);
    /// Register this environment's observation adapter and reward scale.
    fn register_adapter(&self, reg: &mut AdapterRegistry);
    /// Full discrete observation space, when the environment has one
    /// (required for value iteration).
    fn enumerate_observations(&self) -> Option<Vec<Vec<f64>>> {
        None
    }
}

/// Episode wrapper: tracks the current observation, step count, terminal
/// flag, and a horizon cap (truncation, distinct from termination).
pub struct Env {
    dynamics: Box<dyn Dynamics>,
    pub horizon_cap: usize,
    obs: Vec<f64>,
    steps: usize,
    done: bool,
}

impl Env {
    pub fn new(dynamics: Box<dyn Dynamics>, horizon_cap: usize) -> Self {
        let obs = dynamics.fixed_start();
        Self { dynamics, horizon_cap, obs, steps: 0, done: false }
    }

    pub fn dynamics(&self) -> &dyn Dynamics {
        self.dynamics.as_ref()
    }

    pub fn tag(&self) -> &str {
        self.dynamics.tag()
    }

    pub fn action_count(&self) -> usize {
        self.dynamics.action_count()
    }

    pub fn legal_actions(&self) -> std::ops::Range<usize> {
        0..self.dynamics.action_count()
    }

    pub fn obs(&self) -> &[f64] {
        &self.obs
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn done(&self) -> bool {
        self.done
    }

    pub fn truncated(&self) -> bool {
        self.steps >= self.horizon_cap
    }

    pub fn reset(&mut self) -> Vec<f64> {
        self.obs = self.dynamics.fixed_start();
        self.steps = 0;
        self.done = false;
        self.obs.clone()
    }

    pub fn reset_random(&mut self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.obs = self.dynamics.sample_start(rng);
        self.steps = 0;
        self.done = false;
        self.obs.clone()
    }

    pub fn reset_to(&mut self, obs: &[f64]) {
        self.obs = obs.to_vec();
        self.steps = 0;
        self.done = false;
    }

    /// One step; rejects actions out of range and stepping a finished
    /// episode.
    pub fn step(&mut self, action: usize) -> Result<(Vec<f64>, f64, bool)> {
        if action >= self.dynamics.action_count() {
            return Err(Error::UnknownAction { action, count: self.dynamics.action_count() });
        }
        if self.done || self.truncated() {
            return Err(Error::InvalidEnvParam("step on finished episode".into()));
        }
        let (next, reward, done) = self.dynamics.transition(&self.obs, action);
        self.obs = next.clone();
        self.steps += 1;
        self.done = done;
        Ok((next, reward, done))
    }
}

/// Environment specification; the parameter block uses `env.*` keys.
#[derive(Debug, Clone)]
pub struct EnvSpec {
    pub env_id: String,
    pub horizon_cap: usize,
    pub seed: u64,
    pub params: KvBlock,
}

impl EnvSpec {
    pub fn new(env_id: &str) -> Self {
        Self {
            env_id: env_id.to_string(),
            horizon_cap: default_horizon_cap(env_id),
            seed: 0,
            params: KvBlock::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.set(key, value);
        self
    }

    pub fn from_kv(kv: &KvBlock) -> Result<Self> {
        let env_id = kv.require("env.id")?.to_string();
        let mut spec = Self::new(&env_id);
        if kv.contains("env.horizon_cap") {
            spec.horizon_cap = kv.get_usize("env.horizon_cap")?;
        }
        if kv.contains("env.seed") {
            spec.seed = kv.get_u64("env.seed")?;
        }
        spec.params = kv.clone();
        Ok(spec)
    }
}

fn default_horizon_cap(env_id: &str) -> usize {
    match env_id {
        "macro_maze" => 120,
        "graph_motif" => 30,
        _ => 100,
    }
}

/// Build an environment from its spec.
pub fn make_env(spec: &EnvSpec) -> Result<Env> {
    if spec.horizon_cap == 0 {
        return Err(Error::InvalidEnvParam("horizon cap must be >= 1".into()));
    }
    let dynamics: Box<dyn Dynamics> = match spec.env_id.as_str() {
        "micro_grid" => {
            let layout = spec.params.get("env.layout").unwrap_or("open_8x8");
            Box::new(MicroGrid::from_named_layout("micro_grid", layout)?)
        }
        "macro_maze" => {
            let layout = spec.params.get("env.layout").unwrap_or("macromaze_16x16");
            Box::new(MicroGrid::from_named_layout("macro_maze", layout)?)
        }
        "graph_motif" => {
            let class: MotifClass = spec.params.get("env.motif.class").unwrap_or("path").parse()?;
            let size = if spec.params.contains("env.motif.size") {
                spec.params.get_usize("env.motif.size")?
            } else {
                6
            };
            Box::new(motif_env(class, size, spec.seed)?)
        }
        "point_rooms" => Box::new(PointRooms::new()),
        "dubins_reacher" => Box::new(DubinsReacher::new()),
        other => return Err(Error::UnknownEnv(other.to_string())),
    };
    Ok(Env::new(dynamics, spec.horizon_cap))
}

/// Register the adapters of every built-in environment family on one
/// registry, so that a single lift covers the aligned suite.
pub fn register_suite_adapters(reg: &mut AdapterRegistry) {
    for spec in ["micro_grid", "macro_maze", "graph_motif", "point_rooms", "dubins_reacher"] {
        let env = make_env(&EnvSpec::new(spec)).expect("builtin env");
        env.dynamics().register_adapter(reg);
    }
}

/// Exhaustively enumerate every action sequence of length `t` from
/// `start`, as trajectory segments. Branches that terminate before `t`
/// steps are pruned (they admit no horizon-`t` extension), so the count is
/// at most `action_count^t`, with equality when nothing terminates early.
pub fn enumerate_trajectories(
    dynamics: &dyn Dynamics,
    start: &[f64],
    t: usize,
    cap: usize,
) -> Result<Vec<TrajectorySegment>> {
    if t > cap {
        return Err(Error::HorizonCapExceeded { requested: t, cap });
    }
    let mut out = Vec::new();
    let mut prefix: Vec<Transition> = Vec::with_capacity(t);
    expand(dynamics, start, t, &mut prefix, &mut out);
    Ok(out)
}

fn expand(
    dynamics: &dyn Dynamics,
    obs: &[f64],
    remaining: usize,
    prefix: &mut Vec<Transition>,
    out: &mut Vec<TrajectorySegment>,
) {
    if remaining == 0 {
        out.push(TrajectorySegment::new(dynamics.tag(), prefix.clone()));
        return;
    }
    for a in 0..dynamics.action_count() {
        let (next, reward, done) = dynamics.transition(obs, a);
        if done && remaining > 1 {
            continue;
        }
        prefix.push(Transition::discrete(obs.to_vec(), a, reward, next.clone()));
        expand(dynamics, &next, remaining - 1, prefix, out);
        prefix.pop();
    }
}

/// Sample a rollout of up to `len` steps under the uniform random policy,
/// stopping early on termination.
pub fn sample_rollout(
    dynamics: &dyn Dynamics,
    start: &[f64],
    len: usize,
    rng: &mut ChaCha8Rng,
) -> TrajectorySegment {
    use rand::Rng;
    let mut obs = start.to_vec();
    let mut transitions = Vec::with_capacity(len);
    for _ in 0..len {
        let a = rng.random_range(0..dynamics.action_count());
        let (next, reward, done) = dynamics.transition(&obs, a);
        transitions.push(Transition::discrete(obs.clone(), a, reward, next.clone()));
        obs = next;
        if done {
            break;
        }
    }
    TrajectorySegment::new(dynamics.tag(), transitions)
}

/// Hashable key for an observation vector (exact bit pattern).
pub fn obs_key(obs: &[f64]) -> Vec<u64> {
    obs.iter().map(|v| v.to_bits()).collect()
}

/// Tabular state values for a discrete deterministic environment.
pub struct ValueTable {
    pub gamma: f64,
    pub states: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub v: Vec<f64>,
    index: HashMap<Vec<u64>, usize>,
}

impl ValueTable {
    pub fn value(&self, obs: &[f64]) -> Option<f64> {
        self.index.get(&obs_key(obs)).map(|&i| self.v[i])
    }

    pub fn q_values(&self, obs: &[f64]) -> Option<&[f64]> {
        self.index.get(&obs_key(obs)).map(|&i| self.q[i].as_slice())
    }

    /// Actions within `tol` of the best action value at `obs`.
    pub fn greedy_set(&self, obs: &[f64], tol: f64) -> Option<Vec<usize>> {
        let q = self.q_values(obs)?;
        let best = q.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Some(
            q.iter()
                .enumerate()
                .filter(|(_, v)| **v >= best - tol)
                .map(|(a, _)| a)
                .collect(),
        )
    }
}

/// Synchronous value iteration on the ground MDP. Requires the dynamics to
/// expose its full discrete observation space; terminal transitions do not
/// bootstrap.
pub fn value_iteration(
    dynamics: &dyn Dynamics,
    gamma: f64,
    tol: f64,
    max_iter: usize,
) -> Result<ValueTable> {
    let states = dynamics
        .enumerate_observations()
        .ok_or_else(|| Error::InvalidEnvParam("environment has no discrete state space".into()))?;
    let n = states.len();
    let n_actions = dynamics.action_count();
    let mut index = HashMap::with_capacity(n);
    for (i, s) in states.iter().enumerate() {
        index.insert(obs_key(s), i);
    }
    // Precompute transitions once.
    let mut next_idx = vec![vec![usize::MAX; n_actions]; n];
    let mut rewards = vec![vec![0.0; n_actions]; n];
    let mut terminal = vec![vec![false; n_actions]; n];
    for (i, s) in states.iter().enumerate() {
        for a in 0..n_actions {
            let (next, r, done) = dynamics.transition(s, a);
            rewards[i][a] = r;
            terminal[i][a] = done;
            if !done {
                next_idx[i][a] = *index.get(&obs_key(&next)).ok_or_else(|| {
                    Error::InvalidEnvParam(format!(
                        "transition leaves the enumerated state space: {next:?}"
                    ))
                })?;
            }
        }
    }
    let mut v = vec![0.0f64; n];
    let mut q = vec![vec![0.0f64; n_actions]; n];
    for _ in 0..max_iter {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut best = f64::NEG_INFINITY;
            for a in 0..n_actions {
                let future = if terminal[i][a] { 0.0 } else { v[next_idx[i][a]] };
                q[i][a] = rewards[i][a] + gamma * future;
                best = best.max(q[i][a]);
            }
            delta = delta.max((best - v[i]).abs());
            v[i] = best;
        }
        if delta < tol {
            break;
        }
    }
    Ok(ValueTable { gamma, states, q, v, index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn enumeration_t0_is_single_empty_segment() {
        let env = make_env(&EnvSpec::new("micro_grid").with_param("env.layout", "open_2x2")).unwrap();
        let segs =
            enumerate_trajectories(env.dynamics(), &env.dynamics().fixed_start(), 0, 8).unwrap();
        assert_eq!(segs.len(), 1);
        assert!(segs[0].is_empty());
    }

    #[test]
    fn enumeration_counts_open_2x2() {
        let env = make_env(&EnvSpec::new("micro_grid").with_param("env.layout", "open_2x2")).unwrap();
        let start = env.dynamics().fixed_start();
        let segs = enumerate_trajectories(env.dynamics(), &start, 1, 8).unwrap();
        assert_eq!(segs.len(), 4);
        for t in 1..=4 {
            let segs = enumerate_trajectories(env.dynamics(), &start, t, 8).unwrap();
            assert_eq!(segs.len(), 4usize.pow(t as u32));
            for s in &segs {
                s.check_chain().unwrap();
                assert_eq!(s.len(), t);
            }
        }
    }

    #[test]
    fn enumeration_3x3_wall_includes_self_loops() {
        let env =
            make_env(&EnvSpec::new("micro_grid").with_param("env.layout", "open_3x3_wall")).unwrap();
        let start = env.dynamics().fixed_start();
        let segs = enumerate_trajectories(env.dynamics(), &start, 2, 8).unwrap();
        assert_eq!(segs.len(), 16);
        // Blocked moves produce self-loop transitions (zero displacement).
        let self_loops = segs
            .iter()
            .flat_map(|s| s.transitions.iter())
            .filter(|t| t.obs == t.next_obs)
            .count();
        assert!(self_loops > 0);
    }

    #[test]
    fn enumeration_respects_cap() {
        let env = make_env(&EnvSpec::new("micro_grid").with_param("env.layout", "open_2x2")).unwrap();
        let err =
            enumerate_trajectories(env.dynamics(), &env.dynamics().fixed_start(), 9, 8).unwrap_err();
        assert!(matches!(err, Error::HorizonCapExceeded { .. }));
    }

    #[test]
    fn determinism_bit_for_bit() {
        for id in ["micro_grid", "graph_motif", "point_rooms", "dubins_reacher"] {
            let mut e1 = make_env(&EnvSpec::new(id)).unwrap();
            let mut e2 = make_env(&EnvSpec::new(id)).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
            e1.reset();
            e2.reset();
            for _ in 0..20 {
                use rand::Rng;
                let a = rng.random_range(0..e1.action_count());
                if e1.done() || e1.truncated() {
                    break;
                }
                let r1 = e1.step(a).unwrap();
                let r2 = e2.step(a).unwrap();
                assert_eq!(r1, r2, "env {id} diverged");
            }
        }
    }

    #[test]
    fn unknown_env_rejected() {
        assert!(matches!(make_env(&EnvSpec::new("nope")), Err(Error::UnknownEnv(_))));
    }

    #[test]
    fn value_iteration_two_state_chain() {
        // Start cell adjacent to goal on a 1x2 grid: V(start) = goal reward.
        let grid = MicroGrid::from_ascii("micro_grid", "SG").unwrap();
        let table = value_iteration(&grid, 0.9, 1e-12, 10_000).unwrap();
        let start = grid.fixed_start();
        // Moving right reaches the goal immediately: Q = +1.
        let q = table.q_values(&start).unwrap();
        assert!((q[3] - 1.0).abs() < 1e-9);
        // Greedy action is unique here.
        assert_eq!(table.greedy_set(&start, 1e-9).unwrap(), vec![3]);
    }

    #[test]
    fn value_iteration_discounts_distance() {
        let grid = MicroGrid::from_ascii("micro_grid", "S.G").unwrap();
        let table = value_iteration(&grid, 0.9, 1e-12, 10_000).unwrap();
        let start = grid.fixed_start();
        // Two steps: reward -0.01 then +1 discounted once.
        let expect = -0.01 + 0.9 * 1.0;
        assert!((table.value(&start).unwrap() - expect).abs() < 1e-9);
    }
}

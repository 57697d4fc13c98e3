//! Matrix-state reinforcement learning: the agent tracks the lifted state
//! (current observation, accumulated descriptor Z), scores actions with a
//! critic plus an obstruction-filtered lookahead over library candidate
//! futures, and trains the critic with temporal-difference targets.

pub mod transfer;

use std::collections::VecDeque;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::descriptor::MatrixDescriptor;
use crate::env::{make_env, Env, EnvSpec};
use crate::error::{Error, Result};
use crate::kv::KvBlock;
use crate::library::SegmentLibrary;
use crate::lift::{Lift, LiftConfig, Transition};
use crate::obstruction::{proxy_score, ProxyModel};
use crate::segment::TrajectorySegment;
use crate::value::{Adam, Mlp, MlpCache};

/// Version tag of the matrix-feature encoding consumed by value models.
pub const MATRIX_FEATURE_VERSION: u32 = 1;

/// Hidden layer widths shared by all value-model subnetworks.
pub const HIDDEN: [usize; 2] = [64, 64];

/// The agent's planning state: current embedded observation plus the
/// accumulated descriptor of the episode prefix.
#[derive(Debug, Clone)]
pub struct LiftedState {
    pub obs_emb: Vec<f64>,
    pub z: MatrixDescriptor,
}

/// Length of [`matrix_features`] output for a lift dimension `m`.
pub fn matrix_feature_len(config: &LiftConfig) -> usize {
    let m = config.dim();
    m * (m + 1) / 2 + 1
}

/// Feature encoding of an accumulated descriptor: the upper triangle
/// normalized by `1 / (1 + horizon)`, with the raw horizon appended. Two
/// descriptors with identical per-step statistics at different lengths map
/// to nearly equal normalized triangles.
pub fn matrix_features(z: &MatrixDescriptor) -> Result<Vec<f64>> {
    if !z.sym().is_finite() {
        return Err(Error::NonFinite("matrix_features"));
    }
    let t = z.horizon();
    let scale = 1.0 / (1.0 + t);
    let tri = z.sym().triangle();
    let mut out = Vec::with_capacity(tri.len() + 1);
    out.extend(tri.iter().map(|v| v * scale));
    out.push(t);
    Ok(out)
}

/// Critic over the lifted state, decomposed as
/// `Q(o, Z, a) = head([o; features(Z); onehot(a)]) + branch(features(Z)) + obs_prior(o)`.
///
/// The matrix-value branch is the transferable component: it can be
/// pretrained on source descriptors and copied into a fresh target model.
/// Because the branch and observation prior shift every action equally,
/// the greedy action at a fixed state depends only on the head.
#[derive(Debug, Clone)]
pub struct ValueModel {
    config: LiftConfig,
    feature_version: u32,
    obs_dim: usize,
    action_count: usize,
    pub branch: Mlp,
    pub obs_prior: Mlp,
    pub head: Mlp,
}

impl ValueModel {
    pub fn new(config: &LiftConfig, action_count: usize, rng: &mut ChaCha8Rng) -> Self {
        let obs_dim = config.obs_dim();
        let feat_len = matrix_feature_len(config);
        let branch = Mlp::new(&[feat_len, HIDDEN[0], HIDDEN[1], 1], rng, true);
        let obs_prior = Mlp::new(&[obs_dim, HIDDEN[0], HIDDEN[1], 1], rng, true);
        let head =
            Mlp::new(&[obs_dim + feat_len + action_count, HIDDEN[0], HIDDEN[1], 1], rng, true);
        Self {
            config: config.clone(),
            feature_version: MATRIX_FEATURE_VERSION,
            obs_dim,
            action_count,
            branch,
            obs_prior,
            head,
        }
    }

    pub fn config(&self) -> &LiftConfig {
        &self.config
    }

    pub fn feature_version(&self) -> u32 {
        self.feature_version
    }

    pub fn action_count(&self) -> usize {
        self.action_count
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    fn head_input(&self, obs_emb: &[f64], featz: &[f64], action: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend_from_slice(obs_emb);
        buf.extend_from_slice(featz);
        for a in 0..self.action_count {
            buf.push(if a == action { 1.0 } else { 0.0 });
        }
    }

    /// Action value from precomputed matrix features.
    pub fn q_from_feats(&self, obs_emb: &[f64], featz: &[f64], action: usize) -> Result<f64> {
        if action >= self.action_count {
            return Err(Error::UnknownAction { action, count: self.action_count });
        }
        let mut buf = Vec::with_capacity(self.head.input_dim());
        self.head_input(obs_emb, featz, action, &mut buf);
        Ok(self.head.forward(&buf) + self.branch.forward(featz) + self.obs_prior.forward(obs_emb))
    }

    pub fn q_value(&self, obs_emb: &[f64], z: &MatrixDescriptor, action: usize) -> Result<f64> {
        self.q_from_feats(obs_emb, &matrix_features(z)?, action)
    }

    /// Greedy action and its value; ties break to the lowest action index.
    pub fn best_action_from_feats(&self, obs_emb: &[f64], featz: &[f64]) -> (usize, f64) {
        let shared = self.branch.forward(featz) + self.obs_prior.forward(obs_emb);
        let mut buf = Vec::with_capacity(self.head.input_dim());
        let mut best = (0usize, f64::NEG_INFINITY);
        for a in 0..self.action_count {
            self.head_input(obs_emb, featz, a, &mut buf);
            let q = self.head.forward(&buf) + shared;
            if q > best.1 {
                best = (a, q);
            }
        }
        best
    }

    pub fn state_value_from_feats(&self, obs_emb: &[f64], featz: &[f64]) -> f64 {
        self.best_action_from_feats(obs_emb, featz).1
    }

    /// `V(o, Z) = max_a Q(o, Z, a)`.
    pub fn state_value(&self, obs_emb: &[f64], z: &MatrixDescriptor) -> Result<f64> {
        Ok(self.state_value_from_feats(obs_emb, &matrix_features(z)?))
    }
}

/// Flat gradients for the three subnetworks.
pub struct ModelGrads {
    branch: Vec<f64>,
    obs_prior: Vec<f64>,
    head: Vec<f64>,
}

impl ModelGrads {
    pub fn zeros(model: &ValueModel) -> Self {
        Self {
            branch: vec![0.0; model.branch.param_count()],
            obs_prior: vec![0.0; model.obs_prior.param_count()],
            head: vec![0.0; model.head.param_count()],
        }
    }

    fn clear(&mut self) {
        self.branch.iter_mut().for_each(|g| *g = 0.0);
        self.obs_prior.iter_mut().for_each(|g| *g = 0.0);
        self.head.iter_mut().for_each(|g| *g = 0.0);
    }
}

/// Per-subnetwork Adam states, plus an optional anchor that pulls the
/// branch back toward its source initialization.
pub struct ModelOptimizer {
    branch: Adam,
    obs_prior: Adam,
    head: Adam,
    pub branch_anchor: Option<Vec<f64>>,
}

impl ModelOptimizer {
    pub fn new(model: &ValueModel, lr: f64) -> Self {
        Self {
            branch: Adam::new(lr, model.branch.param_count()),
            obs_prior: Adam::new(lr, model.obs_prior.param_count()),
            head: Adam::new(lr, model.head.param_count()),
            branch_anchor: None,
        }
    }
}

struct ModelWorkspace {
    head_cache: MlpCache,
    branch_cache: MlpCache,
    obs_cache: MlpCache,
    head_in: Vec<f64>,
}

impl ModelWorkspace {
    fn new() -> Self {
        Self {
            head_cache: MlpCache::default(),
            branch_cache: MlpCache::default(),
            obs_cache: MlpCache::default(),
            head_in: Vec::new(),
        }
    }
}

/// Training hyperparameters. Defaults follow the reference configuration
/// (discount 0.99, learning rate 3e-4, batch 128, replay 100k, lookahead
/// weight 0.35, obstruction threshold 0.55).
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub gamma: f64,
    pub lr: f64,
    pub batch: usize,
    pub replay_capacity: usize,
    pub beta: f64,
    pub eps_obs: f64,
    pub target_sync: usize,
    pub explore_start: f64,
    pub explore_final: f64,
    pub explore_fraction: f64,
    pub budget_steps: usize,
    pub eval_interval: usize,
    pub eval_episodes: usize,
    pub update_every: usize,
    pub warmup_steps: usize,
    pub library_insert: bool,
    pub max_candidates_per_action: usize,
    /// Source-anchored regularizer weight on the branch (0 disables; the
    /// default transfer setting only initializes from the source branch).
    pub conservative_lambda: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lr: 3e-4,
            batch: 128,
            replay_capacity: 100_000,
            beta: 0.35,
            eps_obs: 0.55,
            target_sync: 500,
            explore_start: 1.0,
            explore_final: 0.05,
            explore_fraction: 0.2,
            budget_steps: 5000,
            eval_interval: 500,
            eval_episodes: 20,
            update_every: 1,
            warmup_steps: 200,
            library_insert: true,
            max_candidates_per_action: 8,
            conservative_lambda: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn exploration_at(&self, step: usize) -> f64 {
        let ramp = (self.budget_steps as f64 * self.explore_fraction).max(1.0);
        let frac = (step as f64 / ramp).min(1.0);
        self.explore_start + frac * (self.explore_final - self.explore_start)
    }

    pub fn to_kv(&self) -> KvBlock {
        let mut kv = KvBlock::new();
        kv.set_f64("train.gamma", self.gamma);
        kv.set_f64("train.lr", self.lr);
        kv.set("train.batch", self.batch);
        kv.set("train.replay_capacity", self.replay_capacity);
        kv.set_f64("train.beta", self.beta);
        kv.set_f64("train.eps_obs", self.eps_obs);
        kv.set("train.target_sync", self.target_sync);
        kv.set_f64("train.explore_start", self.explore_start);
        kv.set_f64("train.explore_final", self.explore_final);
        kv.set_f64("train.explore_fraction", self.explore_fraction);
        kv.set("train.budget_steps", self.budget_steps);
        kv.set("train.eval_interval", self.eval_interval);
        kv.set("train.eval_episodes", self.eval_episodes);
        kv.set("train.update_every", self.update_every);
        kv.set("train.warmup_steps", self.warmup_steps);
        kv.set("train.library_insert", self.library_insert);
        kv.set("train.max_candidates_per_action", self.max_candidates_per_action);
        kv.set_f64("train.conservative_lambda", self.conservative_lambda);
        kv.set("train.seed", self.seed);
        kv
    }

    pub fn from_kv(kv: &KvBlock) -> Result<Self> {
        let mut cfg = Self::default();
        if kv.contains("train.gamma") {
            cfg.gamma = kv.get_f64("train.gamma")?;
        }
        if kv.contains("train.lr") {
            cfg.lr = kv.get_f64("train.lr")?;
        }
        if kv.contains("train.batch") {
            cfg.batch = kv.get_usize("train.batch")?;
        }
        if kv.contains("train.replay_capacity") {
            cfg.replay_capacity = kv.get_usize("train.replay_capacity")?;
        }
        if kv.contains("train.beta") {
            cfg.beta = kv.get_f64("train.beta")?;
        }
        if kv.contains("train.eps_obs") {
            cfg.eps_obs = kv.get_f64("train.eps_obs")?;
        }
        if kv.contains("train.target_sync") {
            cfg.target_sync = kv.get_usize("train.target_sync")?;
        }
        if kv.contains("train.explore_start") {
            cfg.explore_start = kv.get_f64("train.explore_start")?;
        }
        if kv.contains("train.explore_final") {
            cfg.explore_final = kv.get_f64("train.explore_final")?;
        }
        if kv.contains("train.explore_fraction") {
            cfg.explore_fraction = kv.get_f64("train.explore_fraction")?;
        }
        if kv.contains("train.budget_steps") {
            cfg.budget_steps = kv.get_usize("train.budget_steps")?;
        }
        if kv.contains("train.eval_interval") {
            cfg.eval_interval = kv.get_usize("train.eval_interval")?;
        }
        if kv.contains("train.eval_episodes") {
            cfg.eval_episodes = kv.get_usize("train.eval_episodes")?;
        }
        if kv.contains("train.update_every") {
            cfg.update_every = kv.get_usize("train.update_every")?;
        }
        if kv.contains("train.warmup_steps") {
            cfg.warmup_steps = kv.get_usize("train.warmup_steps")?;
        }
        if kv.contains("train.library_insert") {
            cfg.library_insert = kv.require("train.library_insert")? == "true";
        }
        if kv.contains("train.max_candidates_per_action") {
            cfg.max_candidates_per_action = kv.get_usize("train.max_candidates_per_action")?;
        }
        if kv.contains("train.conservative_lambda") {
            cfg.conservative_lambda = kv.get_f64("train.conservative_lambda")?;
        }
        if kv.contains("train.seed") {
            cfg.seed = kv.get_u64("train.seed")?;
        }
        assert!(cfg.gamma >= 0.0 && cfg.gamma < 1.0, "gamma must lie in [0, 1)");
        assert!(cfg.beta >= 0.0, "beta must be nonnegative");
        Ok(cfg)
    }
}

/// One replay transition over lifted states. Consecutive samples of one
/// episode share their descriptors through reference counting.
#[derive(Clone)]
pub struct ReplaySample {
    pub obs_emb: Vec<f64>,
    pub z: Arc<MatrixDescriptor>,
    pub action: usize,
    pub reward: f64,
    pub next_obs_emb: Vec<f64>,
    pub next_z: Arc<MatrixDescriptor>,
    pub done: bool,
}

pub struct ReplayBuffer {
    buf: VecDeque<ReplaySample>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self { buf: VecDeque::new(), capacity }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn push(&mut self, sample: ReplaySample) {
        if self.buf.len() == self.capacity {
            self.buf.pop_front();
        }
        self.buf.push_back(sample);
    }

    pub fn sample<'a>(&'a self, batch: usize, rng: &mut ChaCha8Rng) -> Vec<&'a ReplaySample> {
        (0..batch).map(|_| &self.buf[rng.random_range(0..self.buf.len())]).collect()
    }
}

/// One TD step on a batch: targets from the frozen target network
/// (terminal transitions use the bare reward), squared error, one Adam
/// step per subnetwork. Returns the batch loss.
pub fn td_update(
    model: &mut ValueModel,
    target_model: &ValueModel,
    batch: &[&ReplaySample],
    cfg: &TrainConfig,
    opt: &mut ModelOptimizer,
    grads: &mut ModelGrads,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyInput("td_update"));
    }
    grads.clear();
    let mut ws = ModelWorkspace::new();
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for sample in batch {
        let featz = matrix_features(&sample.z)?;
        let y = if sample.done {
            sample.reward
        } else {
            let next_feats = matrix_features(&sample.next_z)?;
            sample.reward
                + cfg.gamma * target_model.state_value_from_feats(&sample.next_obs_emb, &next_feats)
        };
        // Forward with caches.
        model.head_input(&sample.obs_emb, &featz, sample.action, &mut ws.head_in);
        let q = model.head.forward_cached(&ws.head_in, &mut ws.head_cache)
            + model.branch.forward_cached(&featz, &mut ws.branch_cache)
            + model.obs_prior.forward_cached(&sample.obs_emb, &mut ws.obs_cache);
        let err = q - y;
        loss += err * err / n;
        let dq = 2.0 * err / n;
        model.head.backward(&ws.head_cache, dq, &mut grads.head, None);
        model.branch.backward(&ws.branch_cache, dq, &mut grads.branch, None);
        model.obs_prior.backward(&ws.obs_cache, dq, &mut grads.obs_prior, None);
    }
    if !loss.is_finite() {
        return Err(Error::Diverged(format!(
            "TD loss non-finite on batch of {} (first reward {})",
            batch.len(),
            batch[0].reward
        )));
    }
    if cfg.conservative_lambda > 0.0 {
        if let Some(anchor) = &opt.branch_anchor {
            for ((g, p), a) in
                grads.branch.iter_mut().zip(model.branch.params().iter()).zip(anchor.iter())
            {
                *g += 2.0 * cfg.conservative_lambda * (p - a);
            }
        }
    }
    opt.head.step(model.head.params_mut(), &grads.head);
    opt.branch.step(model.branch.params_mut(), &grads.branch);
    opt.obs_prior.step(model.obs_prior.params_mut(), &grads.obs_prior);
    Ok(loss)
}

/// Best filtered candidate-future value for one action: the max of
/// `V(o_hat, Z_hat)` over library candidates that match the action, pass
/// the context radius, and survive the obstruction-proxy filter. Exactly
/// zero when no candidate survives.
pub fn lookahead(
    model: &ValueModel,
    library: &SegmentLibrary,
    proxy: Option<&ProxyModel>,
    obs_emb: &[f64],
    z: &MatrixDescriptor,
    action: usize,
    cfg: &TrainConfig,
) -> Result<f64> {
    let mut cands = library.candidates(obs_emb, z, action)?;
    if cands.len() > cfg.max_candidates_per_action {
        cands.sort_by(|a, b| {
            a.context_gap.total_cmp(&b.context_gap).then(a.entry_id.cmp(&b.entry_id))
        });
        cands.truncate(cfg.max_candidates_per_action);
    }
    let mut best: Option<f64> = None;
    for cand in &cands {
        if let Some(p) = proxy {
            if proxy_score(p, obs_emb, z, &cand.exit_obs, &cand.matrix)? > cfg.eps_obs {
                continue;
            }
        }
        let v = model.state_value(&cand.exit_obs, &cand.matrix)?;
        best = Some(match best {
            Some(b) if b >= v => b,
            _ => v,
        });
    }
    Ok(best.unwrap_or(0.0))
}

/// Combined action score `S = Q + beta * U` for every action.
pub fn action_scores(
    model: &ValueModel,
    library: &SegmentLibrary,
    proxy: Option<&ProxyModel>,
    obs_emb: &[f64],
    z: &MatrixDescriptor,
    cfg: &TrainConfig,
) -> Result<Vec<f64>> {
    let featz = matrix_features(z)?;
    let shared = model.branch.forward(&featz) + model.obs_prior.forward(obs_emb);
    let mut buf = Vec::with_capacity(model.head.input_dim());
    let mut scores = Vec::with_capacity(model.action_count);
    for a in 0..model.action_count {
        model.head_input(obs_emb, &featz, a, &mut buf);
        let q = model.head.forward(&buf) + shared;
        let u = if cfg.beta > 0.0 {
            lookahead(model, library, proxy, obs_emb, z, a, cfg)?
        } else {
            0.0
        };
        scores.push(q + cfg.beta * u);
    }
    Ok(scores)
}

/// Epsilon-greedy action selection over the combined scores; greedy ties
/// break to the lowest action index.
pub fn select_action(
    model: &ValueModel,
    library: &SegmentLibrary,
    proxy: Option<&ProxyModel>,
    obs_emb: &[f64],
    z: &MatrixDescriptor,
    cfg: &TrainConfig,
    explore_eps: f64,
    rng: &mut ChaCha8Rng,
) -> Result<usize> {
    if explore_eps > 0.0 && rng.random::<f64>() < explore_eps {
        return Ok(rng.random_range(0..model.action_count));
    }
    let scores = action_scores(model, library, proxy, obs_emb, z, cfg)?;
    let mut best = 0;
    for (a, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = a;
        }
    }
    Ok(best)
}

/// One point of a learning curve: environment step count and the mean
/// deterministic evaluation return at that point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    pub step: u64,
    pub mean_return: f64,
}

pub type LearningCurve = Vec<EvalPoint>;

#[derive(Debug, Clone, Default)]
pub struct TrainStats {
    pub episodes: usize,
    pub updates: usize,
    pub final_loss: f64,
}

/// Full training loop on a target environment: per episode the descriptor
/// state resets to zero and accumulates rank-one updates as transitions
/// arrive; one-step segments feed the library; the critic trains from
/// replay; deterministic evaluations run on a fixed schedule.
pub fn train_target(
    spec: &EnvSpec,
    lift: &Lift,
    model: &mut ValueModel,
    library: &mut SegmentLibrary,
    proxy: Option<&ProxyModel>,
    cfg: &TrainConfig,
) -> Result<(LearningCurve, TrainStats)> {
    use rand::SeedableRng;
    let mut env = make_env(spec)?;
    let mut eval_env = make_env(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut target_model = model.clone();
    let mut opt = ModelOptimizer::new(model, cfg.lr);
    if cfg.conservative_lambda > 0.0 {
        opt.branch_anchor = Some(model.branch.params().to_vec());
    }
    let mut grads = ModelGrads::zeros(model);
    let mut replay = ReplayBuffer::new(cfg.replay_capacity);
    let mut curve = LearningCurve::new();
    let mut stats = TrainStats::default();

    let mut step = 0usize;
    while step < cfg.budget_steps {
        let mut obs_raw = env.reset_random(&mut rng);
        let mut z = Arc::new(MatrixDescriptor::zero(lift.config()));
        stats.episodes += 1;
        while !env.done() && !env.truncated() && step < cfg.budget_steps {
            let obs_emb = lift.embed_observation(env.tag(), &obs_raw)?;
            let eps = cfg.exploration_at(step);
            let action =
                select_action(model, library, proxy, &obs_emb, &z, cfg, eps, &mut rng)?;
            let (next_raw, reward, done) = env.step(action)?;
            let transition = Transition::discrete(obs_raw.clone(), action, reward, next_raw.clone());
            let lifted = lift.lift_transition(env.tag(), &transition)?;
            let mut z_next = (*z).clone();
            z_next.accumulate(&lifted)?;
            let z_next = Arc::new(z_next);
            let next_emb = lift.embed_observation(env.tag(), &next_raw)?;
            replay.push(ReplaySample {
                obs_emb,
                z: Arc::clone(&z),
                action,
                reward,
                next_obs_emb: next_emb,
                next_z: Arc::clone(&z_next),
                done,
            });
            if cfg.library_insert {
                let seg = TrajectorySegment::new(env.tag(), vec![transition]);
                library.insert(&seg, lift)?;
            }
            step += 1;
            if replay.len() >= cfg.warmup_steps.max(cfg.batch) && step % cfg.update_every == 0 {
                let batch = replay.sample(cfg.batch, &mut rng);
                stats.final_loss = td_update(model, &target_model, &batch, cfg, &mut opt, &mut grads)?;
                stats.updates += 1;
                if stats.updates % cfg.target_sync == 0 {
                    target_model = model.clone();
                }
            }
            if step % cfg.eval_interval == 0 {
                let mean = evaluate_policy(&mut eval_env, lift, model, library, proxy, cfg)?;
                curve.push(EvalPoint { step: step as u64, mean_return: mean });
            }
            obs_raw = next_raw;
            z = z_next;
        }
    }
    Ok((curve, stats))
}

/// Mean return of the deterministic greedy policy over a fixed set of
/// seeded evaluation starts (identical at every call for a given
/// training seed).
pub fn evaluate_policy(
    env: &mut Env,
    lift: &Lift,
    model: &ValueModel,
    library: &SegmentLibrary,
    proxy: Option<&ProxyModel>,
    cfg: &TrainConfig,
) -> Result<f64> {
    use rand::SeedableRng;
    let mut eval_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_e7a1);
    let mut total = 0.0;
    for _ in 0..cfg.eval_episodes {
        let mut obs_raw = env.reset_random(&mut eval_rng);
        let mut z = MatrixDescriptor::zero(lift.config());
        let mut ep_return = 0.0;
        while !env.done() && !env.truncated() {
            let obs_emb = lift.embed_observation(env.tag(), &obs_raw)?;
            let action =
                select_action(model, library, proxy, &obs_emb, &z, cfg, 0.0, &mut eval_rng)?;
            let (next_raw, reward, _) = env.step(action)?;
            let t = Transition::discrete(obs_raw, action, reward, next_raw.clone());
            z.accumulate(&lift.lift_transition(env.tag(), &t)?)?;
            ep_return += reward;
            obs_raw = next_raw;
        }
        total += ep_return;
    }
    Ok(total / cfg.eval_episodes.max(1) as f64)
}

/// Trapezoidal area of the early section of a learning curve (the first
/// `budget_fraction` of the final step count), normalized by the covered
/// span. Returns are expected to be normalized to [0, 1] by the caller;
/// the result is clamped into [0, 1].
pub fn few_shot_auc(curve: &LearningCurve, budget_fraction: f64) -> Result<f64> {
    if curve.is_empty() {
        return Err(Error::EmptyInput("few_shot_auc"));
    }
    assert!(budget_fraction > 0.0 && budget_fraction <= 1.0);
    let budget = curve.last().unwrap().step as f64;
    let window_end = budget * budget_fraction;
    let pts: Vec<(f64, f64)> = curve.iter().map(|p| (p.step as f64, p.mean_return)).collect();
    let first = pts[0];
    if first.0 >= window_end {
        return Ok(first.1.clamp(0.0, 1.0));
    }
    let mut area = 0.0;
    let mut covered = 0.0;
    for w in pts.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        if x0 >= window_end {
            break;
        }
        let (xe, ye) = if x1 <= window_end {
            (x1, y1)
        } else {
            let t = (window_end - x0) / (x1 - x0);
            (window_end, y0 + t * (y1 - y0))
        };
        area += 0.5 * (y0 + ye) * (xe - x0);
        covered += xe - x0;
    }
    if covered <= 0.0 {
        return Ok(first.1.clamp(0.0, 1.0));
    }
    Ok((area / covered).clamp(0.0, 1.0))
}

/// Normalize a family of curves jointly: the anchor is the best final
/// return in the comparison set; the floor is the overall minimum.
pub fn normalize_curves(curves: &mut [LearningCurve]) {
    let mut best_final = f64::NEG_INFINITY;
    let mut floor = f64::INFINITY;
    for c in curves.iter() {
        if let Some(last) = c.last() {
            best_final = best_final.max(last.mean_return);
        }
        for p in c.iter() {
            floor = floor.min(p.mean_return);
        }
    }
    let span = best_final - floor;
    for c in curves.iter_mut() {
        for p in c.iter_mut() {
            p.mean_return =
                if span > 0.0 { ((p.mean_return - floor) / span).clamp(0.0, 1.0) } else { 0.5 };
        }
    }
}

//! Runnable descriptor diagnostics: block-parity and path/cycle identities
//! of the lift algebra, additive-consistency sampling, nearest-neighbor
//! retrieval scores per environment family, and the negative-control
//! transfer study. Every check is a pure function of (seed, config).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::agent::transfer::{apply_init_variant, InitVariant, SourceArtifacts};
use crate::agent::{
    few_shot_auc, normalize_curves, train_target, LearningCurve, TrainConfig, ValueModel,
};
use crate::descriptor::{descriptor_of_transitions, MatrixDescriptor};
use crate::env::{make_env, motif_env, sample_rollout, Dynamics, EnvSpec, MicroGrid, MotifClass};
use crate::error::{Error, Result};
use crate::library::SegmentLibrary;
use crate::lift::{embed_action, ActionValue, Channel, Lift, LiftConfig, Transition};
use crate::obstruction::{auroc, make_proxy_dataset, train_proxy, ProxyModel};
use crate::segment::TrajectorySegment;

/// Default tolerance for the symbolic identity checks.
pub const IDENTITY_TOL: f64 = 1e-10;

/// A directed edge of a symbolic transition multiset: embedded tail and
/// head, an action label, and a reward.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: Vec<f64>,
    pub to: Vec<f64>,
    pub action: usize,
    pub reward: f64,
}

impl Edge {
    pub fn reversed(&self) -> Edge {
        Edge { from: self.to.clone(), to: self.from.clone(), action: self.action, reward: self.reward }
    }
}

/// Descriptor of an edge multiset under the full Kronecker lift (edges are
/// lifted directly; no chain requirement).
pub fn edge_descriptor(edges: &[Edge], config: &LiftConfig) -> Result<MatrixDescriptor> {
    let mut out = MatrixDescriptor::zero(config);
    for e in edges {
        let xi = embed_action(&ActionValue::Discrete(e.action), config.action_dim())?;
        let step = crate::lift::lift_step(&e.from, &e.to, &xi, e.reward, config)?;
        out.accumulate(&step)?;
    }
    Ok(out)
}

/// Max absolute entry per even-odd block of a reversal-symmetric edge
/// multiset (all must vanish), plus the overall worst entry.
#[derive(Debug, Clone)]
pub struct ParityReport {
    pub block_max: Vec<(&'static str, f64)>,
    pub overall_max: f64,
}

/// Verify the multiset is reversal-paired (every edge has a partner with
/// swapped endpoints and matched action and reward), then measure the
/// even-odd blocks of its descriptor.
pub fn parity_check(edges: &[Edge], config: &LiftConfig) -> Result<ParityReport> {
    let mut unmatched: Vec<&Edge> = Vec::new();
    for e in edges {
        if let Some(pos) = unmatched.iter().position(|u| {
            u.from == e.to && u.to == e.from && u.action == e.action && u.reward == e.reward
        }) {
            unmatched.swap_remove(pos);
        } else {
            unmatched.push(e);
        }
    }
    if !unmatched.is_empty() {
        return Err(Error::NotReversalPaired(format!(
            "{} edge(s) lack a reversed partner",
            unmatched.len()
        )));
    }
    let m = edge_descriptor(edges, config)?;
    let pairs: [(&'static str, Channel, Channel); 8] = [
        ("mid/disp", Channel::Mid, Channel::Disp),
        ("mid/act_disp", Channel::Mid, Channel::ActDisp),
        ("act_mid/disp", Channel::ActMid, Channel::Disp),
        ("act_mid/act_disp", Channel::ActMid, Channel::ActDisp),
        ("reward/disp", Channel::Reward, Channel::Disp),
        ("reward/act_disp", Channel::Reward, Channel::ActDisp),
        ("const/disp", Channel::Const, Channel::Disp),
        ("const/act_disp", Channel::Const, Channel::ActDisp),
    ];
    let mut block_max = Vec::with_capacity(pairs.len());
    let mut overall: f64 = 0.0;
    for (name, r, c) in pairs {
        let block = m.block(r, c)?;
        let worst = block.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        overall = overall.max(worst);
        block_max.push((name, worst));
    }
    Ok(ParityReport { block_max, overall_max: overall })
}

fn max_abs_diff(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for (x, y) in a.iter().zip(b.iter()) {
        worst = worst.max((x - y).abs());
    }
    worst
}

/// Identity residuals for a directed path descriptor.
#[derive(Debug, Clone)]
pub struct PathReport {
    /// | M_{disp,const} - (x_L - x_0) |, max over entries.
    pub endpoint_disp_err: f64,
    /// | Sym(M_{mid,disp}) - (x_L x_L^T - x_0 x_0^T)/2 |, max over entries.
    pub telescoping_err: f64,
    /// Reversal flips the incidence block and the net displacement.
    pub reversal_flip_err: f64,
    /// Reversal keeps the mid-mid block.
    pub reversal_even_err: f64,
}

impl PathReport {
    pub fn max_err(&self) -> f64 {
        self.endpoint_disp_err
            .max(self.telescoping_err)
            .max(self.reversal_flip_err)
            .max(self.reversal_even_err)
    }
}

fn path_edges(points: &[Vec<f64>]) -> Vec<Edge> {
    points
        .windows(2)
        .map(|w| Edge { from: w[0].clone(), to: w[1].clone(), action: 0, reward: 0.0 })
        .collect()
}

/// Check the telescoping identities of a directed path descriptor: the net
/// displacement column equals the endpoint difference, the symmetric part
/// of the incidence block telescopes to the endpoint second-moment
/// difference, and edge reversal flips exactly the odd blocks.
pub fn path_identities(points: &[Vec<f64>], config: &LiftConfig) -> Result<PathReport> {
    let d = config.obs_dim();
    for p in points {
        if p.len() != d {
            return Err(Error::DimMismatch { context: "path_identities", expected: d, got: p.len() });
        }
    }
    let edges = path_edges(points);
    let m = edge_descriptor(&edges, config)?;
    let rev_edges: Vec<Edge> = edges.iter().map(Edge::reversed).collect();
    let m_rev = edge_descriptor(&rev_edges, config)?;

    let disp1 = m.block(Channel::Disp, Channel::Const)?;
    let mut endpoint_disp_err = 0.0f64;
    if let (Some(first), Some(last)) = (points.first(), points.last()) {
        for i in 0..d {
            endpoint_disp_err = endpoint_disp_err.max((disp1[(i, 0)] - (last[i] - first[i])).abs());
        }
    }

    let incidence = m.block(Channel::Mid, Channel::Disp)?;
    let sym = (&incidence + incidence.transpose()) * 0.5;
    let mut expect = nalgebra::DMatrix::<f64>::zeros(d, d);
    if let (Some(first), Some(last)) = (points.first(), points.last()) {
        for i in 0..d {
            for j in 0..d {
                expect[(i, j)] = 0.5 * (last[i] * last[j] - first[i] * first[j]);
            }
        }
    }
    let telescoping_err = max_abs_diff(&sym, &expect);

    let incidence_rev = m_rev.block(Channel::Mid, Channel::Disp)?;
    let disp1_rev = m_rev.block(Channel::Disp, Channel::Const)?;
    let flip_incidence = max_abs_diff(&incidence_rev, &(-&incidence));
    let flip_disp = max_abs_diff(&disp1_rev, &(-&disp1));
    let even = max_abs_diff(
        &m_rev.block(Channel::Mid, Channel::Mid)?,
        &m.block(Channel::Mid, Channel::Mid)?,
    );
    Ok(PathReport {
        endpoint_disp_err,
        telescoping_err,
        reversal_flip_err: flip_incidence.max(flip_disp),
        reversal_even_err: even,
    })
}

/// Identity residuals for a closed directed cycle descriptor.
#[derive(Debug, Clone)]
pub struct CycleReport {
    /// Net displacement must vanish.
    pub closure_err: f64,
    /// The incidence block must be skew-symmetric.
    pub skew_err: f64,
    /// For a uniform-action cycle, the action-conditioned net transport
    /// must vanish; for mixed labels its norm is recorded, not failed.
    pub uniform_action_transport_err: Option<f64>,
    pub action_transport_norm: f64,
    /// Reversing the cycle negates the incidence block.
    pub reversal_flip_err: f64,
}

impl CycleReport {
    pub fn max_err(&self) -> f64 {
        self.closure_err
            .max(self.skew_err)
            .max(self.uniform_action_transport_err.unwrap_or(0.0))
            .max(self.reversal_flip_err)
    }
}

/// Check the closure identities of a directed cycle (the node list must
/// return to its starting point). `actions[i]` labels the edge leaving
/// node i.
pub fn cycle_identities(
    points: &[Vec<f64>],
    actions: &[usize],
    config: &LiftConfig,
) -> Result<CycleReport> {
    if points.len() < 2 || points.first() != points.last() {
        return Err(Error::InvalidIndexSet("cycle must close: first point != last point".into()));
    }
    if actions.len() != points.len() - 1 {
        return Err(Error::DimMismatch {
            context: "cycle_identities actions",
            expected: points.len() - 1,
            got: actions.len(),
        });
    }
    let edges: Vec<Edge> = points
        .windows(2)
        .zip(actions.iter())
        .map(|(w, a)| Edge { from: w[0].clone(), to: w[1].clone(), action: *a, reward: 0.0 })
        .collect();
    let m = edge_descriptor(&edges, config)?;
    let rev: Vec<Edge> = edges.iter().map(Edge::reversed).collect();
    let m_rev = edge_descriptor(&rev, config)?;

    let disp1 = m.block(Channel::Disp, Channel::Const)?;
    let closure_err = disp1.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));

    let incidence = m.block(Channel::Mid, Channel::Disp)?;
    let skew_err = max_abs_diff(&incidence, &(-incidence.transpose()));

    let chi1 = m.block(Channel::ActDisp, Channel::Const)?;
    let action_transport_norm = chi1.iter().map(|v| v * v).sum::<f64>().sqrt();
    let uniform = actions.windows(2).all(|w| w[0] == w[1]);
    let uniform_action_transport_err = uniform.then(|| {
        chi1.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    });

    let incidence_rev = m_rev.block(Channel::Mid, Channel::Disp)?;
    let reversal_flip_err = max_abs_diff(&incidence_rev, &(-&incidence));
    Ok(CycleReport {
        closure_err,
        skew_err,
        uniform_action_transport_err,
        action_transport_norm,
        reversal_flip_err,
    })
}

/// Additive-consistency sampling: split random rollouts and compare the
/// whole descriptor with the sum of the parts.
#[derive(Debug, Clone, Default)]
pub struct AdditiveReport {
    pub n: usize,
    pub mean_err: f64,
    pub max_err: f64,
    pub mean_rel_err: f64,
}

pub fn additive_consistency(
    dynamics: &dyn Dynamics,
    lift: &Lift,
    n_samples: usize,
    seed: u64,
) -> Result<AdditiveReport> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x61646463);
    let mut report = AdditiveReport::default();
    let mut total = 0.0;
    let mut total_rel = 0.0;
    while report.n < n_samples {
        let start = dynamics.sample_start(&mut rng);
        let len = rng.random_range(4..=16);
        let seg = sample_rollout(dynamics, &start, len, &mut rng);
        if seg.len() < 2 {
            continue;
        }
        let split = rng.random_range(1..seg.len());
        let whole = crate::descriptor::descriptor_of_segment(&seg, lift)?;
        let left =
            crate::descriptor::descriptor_of_segment(&seg.restrict_range(0, split)?, lift)?;
        let right = crate::descriptor::descriptor_of_segment(
            &seg.restrict_range(split, seg.len())?,
            lift,
        )?;
        let err = left.compose(&right)?.frobenius_distance(&whole)?;
        total += err;
        total_rel += err / (1.0 + whole.frobenius_norm());
        report.max_err = report.max_err.max(err);
        report.n += 1;
    }
    if report.n > 0 {
        report.mean_err = total / report.n as f64;
        report.mean_rel_err = total_rel / report.n as f64;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetrievalTask {
    MotifRetrieval,
    ObstructionAuroc,
    CoordMatching,
    ActionTransport,
}

impl RetrievalTask {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "motif_retrieval" => Self::MotifRetrieval,
            "obstruction_auroc" => Self::ObstructionAuroc,
            "coord_matching" => Self::CoordMatching,
            "action_transport" => Self::ActionTransport,
            other => return Err(Error::InvalidEnvParam(format!("unknown retrieval task `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::MotifRetrieval => "motif_retrieval",
            Self::ObstructionAuroc => "obstruction_auroc",
            Self::CoordMatching => "coord_matching",
            Self::ActionTransport => "action_transport",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RetrievalReport {
    pub task: &'static str,
    pub score: f64,
    pub n_queries: usize,
    /// The exact protocol used, recorded in every emitted report.
    pub protocol: String,
}

/// Top-1 nearest-neighbor match rate between query and key descriptors
/// under Frobenius distance; `label_of` defines correctness.
fn nn_match_rate(
    keys: &[(MatrixDescriptor, usize)],
    queries: &[(MatrixDescriptor, usize)],
) -> Result<f64> {
    let mut hits = 0usize;
    for (q, label) in queries {
        let mut best = (f64::INFINITY, usize::MAX);
        for (k, key_label) in keys {
            let d = q.frobenius_distance(k)?;
            if d < best.0 {
                best = (d, *key_label);
            }
        }
        if best.1 == *label {
            hits += 1;
        }
    }
    Ok(hits as f64 / queries.len().max(1) as f64)
}

/// Run one retrieval diagnostic at the given seed.
pub fn retrieval_diagnostic(task: RetrievalTask, lift: &Lift, seed: u64) -> Result<RetrievalReport> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x72657472);
    match task {
        RetrievalTask::MotifRetrieval => {
            // Keys: one descriptor per motif instance (edge multiset).
            // Queries: the same structures with jittered node embeddings;
            // correct when the nearest key shares the motif class.
            let instances_per_class = 8;
            let mut keys = Vec::new();
            let mut queries = Vec::new();
            for (ci, class) in MotifClass::ALL.into_iter().enumerate() {
                for k in 0..instances_per_class {
                    let env = motif_env(class, 6, seed * 31 + k)?;
                    let edges = env.edge_list();
                    let to_transitions = |jitter: f64, rng: &mut ChaCha8Rng| -> Vec<Transition> {
                        edges
                            .iter()
                            .map(|(from, to, label, reward)| Transition {
                                obs: vec![
                                    from[0] + jitter * rng.random_range(-1.0..1.0),
                                    from[1] + jitter * rng.random_range(-1.0..1.0),
                                ],
                                action: ActionValue::Discrete(*label),
                                reward: *reward,
                                next_obs: vec![
                                    to[0] + jitter * rng.random_range(-1.0..1.0),
                                    to[1] + jitter * rng.random_range(-1.0..1.0),
                                ],
                            })
                            .collect()
                    };
                    let key_seg =
                        TrajectorySegment::new("graph_motif", to_transitions(0.0, &mut rng));
                    keys.push((descriptor_of_transitions(&key_seg, lift)?, ci));
                    let query_seg =
                        TrajectorySegment::new("graph_motif", to_transitions(0.02, &mut rng));
                    queries.push((descriptor_of_transitions(&query_seg, lift)?, ci));
                }
            }
            Ok(RetrievalReport {
                task: task.name(),
                score: nn_match_rate(&keys, &queries)?,
                n_queries: queries.len(),
                protocol: format!(
                    "nearest key by Frobenius distance over {} motif instances (5 classes x {}), \
                     queries jittered by 0.02; correct = class match",
                    keys.len(),
                    instances_per_class
                ),
            })
        }
        RetrievalTask::ObstructionAuroc => {
            let grid = MicroGrid::from_named_layout("micro_grid", "two_rooms_8x8")?;
            let data = make_proxy_dataset(&grid, lift, 6, 160, &mut rng)?;
            // Even/odd split keeps classes balanced in both halves.
            let train: Vec<_> = data.iter().step_by(2).cloned().collect();
            let test: Vec<_> = data.iter().skip(1).step_by(2).cloned().collect();
            let model = train_proxy(&train)?;
            let scored: Vec<(f64, bool)> =
                test.iter().map(|e| (model.score_features(&e.features), e.obstructed)).collect();
            let score = auroc(&scored).ok_or_else(|| {
                Error::DegenerateDataset("held-out proxy split is single-class".into())
            })?;
            Ok(RetrievalReport {
                task: task.name(),
                score,
                n_queries: test.len(),
                protocol: format!(
                    "logistic obstruction proxy trained on {} examples from two_rooms_8x8 \
                     (horizons <= 6), AUROC on {} held-out examples",
                    train.len(),
                    test.len()
                ),
            })
        }
        RetrievalTask::CoordMatching => {
            let env = make_env(&EnvSpec::new("point_rooms"))?;
            let dynamics = env.dynamics();
            let n = 30;
            let len = 12;
            let mut keys = Vec::new();
            let mut queries = Vec::new();
            for i in 0..n {
                let start = dynamics.sample_start(&mut rng);
                let actions: Vec<usize> =
                    (0..len).map(|_| rng.random_range(0..dynamics.action_count())).collect();
                let follow = |start: &[f64]| -> TrajectorySegment {
                    let mut obs = start.to_vec();
                    let mut transitions = Vec::with_capacity(len);
                    for &a in &actions {
                        let (next, reward, done) = dynamics.transition(&obs, a);
                        transitions
                            .push(Transition::discrete(obs.clone(), a, reward, next.clone()));
                        obs = next;
                        if done {
                            break;
                        }
                    }
                    TrajectorySegment::new(dynamics.tag(), transitions)
                };
                keys.push((
                    crate::descriptor::descriptor_of_segment(&follow(&start), lift)?,
                    i,
                ));
                let perturbed: Vec<f64> = start
                    .iter()
                    .map(|v| (v + 0.01 * rng.random_range(-1.0..1.0)).clamp(0.0, 1.0))
                    .collect();
                queries.push((
                    crate::descriptor::descriptor_of_segment(&follow(&perturbed), lift)?,
                    i,
                ));
            }
            Ok(RetrievalReport {
                task: task.name(),
                score: nn_match_rate(&keys, &queries)?,
                n_queries: queries.len(),
                protocol: format!(
                    "{n} random point_rooms action sequences of length {len}; queries replay the \
                     same actions from starts perturbed by 0.01; correct = same trajectory index"
                ),
            })
        }
        RetrievalTask::ActionTransport => {
            let env = make_env(&EnvSpec::new("dubins_reacher"))?;
            let dynamics = env.dynamics();
            let poses = 12;
            let len = 5;
            let mut keys = Vec::new();
            let mut queries = Vec::new();
            for action in 0..dynamics.action_count() {
                for _ in 0..poses {
                    let start = dynamics.sample_start(&mut rng);
                    let follow = |start: &[f64]| -> TrajectorySegment {
                        let mut obs = start.to_vec();
                        let mut transitions = Vec::with_capacity(len);
                        for _ in 0..len {
                            let (next, reward, done) = dynamics.transition(&obs, action);
                            transitions.push(Transition::discrete(
                                obs.clone(),
                                action,
                                reward,
                                next.clone(),
                            ));
                            obs = next;
                            if done {
                                break;
                            }
                        }
                        TrajectorySegment::new(dynamics.tag(), transitions)
                    };
                    keys.push((
                        crate::descriptor::descriptor_of_segment(&follow(&start), lift)?,
                        action,
                    ));
                    let mut perturbed = start.clone();
                    perturbed[0] = (perturbed[0] + 0.02 * rng.random_range(-1.0..1.0)).clamp(0.0, 1.0);
                    perturbed[1] = (perturbed[1] + 0.02 * rng.random_range(-1.0..1.0)).clamp(0.0, 1.0);
                    perturbed[2] += 0.05 * rng.random_range(-1.0..1.0);
                    queries.push((
                        crate::descriptor::descriptor_of_segment(&follow(&perturbed), lift)?,
                        action,
                    ));
                }
            }
            Ok(RetrievalReport {
                task: task.name(),
                score: nn_match_rate(&keys, &queries)?,
                n_queries: queries.len(),
                protocol: format!(
                    "constant-action dubins arcs of length {len} from {poses} seeded poses per \
                     action; queries from perturbed poses; correct = same action label"
                ),
            })
        }
    }
}

/// Few-shot AUC per initialization variant at matched budget and seeds.
#[derive(Debug, Clone)]
pub struct ControlsRow {
    pub variant: &'static str,
    pub per_seed: Vec<f64>,
    pub mean_auc: f64,
}

#[derive(Debug, Clone)]
pub struct ControlsReport {
    pub rows: Vec<ControlsRow>,
    pub budget_fraction: f64,
    pub seeds: Vec<u64>,
}

impl ControlsReport {
    pub fn mean_of(&self, variant: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.variant == variant).map(|r| r.mean_auc)
    }
}

/// Train the obstruction proxy for a grid target from its own short-horizon
/// enumerations.
pub fn target_proxy(spec: &EnvSpec, lift: &Lift, seed: u64) -> Result<ProxyModel> {
    use rand::SeedableRng;
    let env = make_env(spec)?;
    let layout = spec.params.get("env.layout").unwrap_or(match spec.env_id.as_str() {
        "macro_maze" => "macromaze_16x16",
        _ => "open_8x8",
    });
    let grid = MicroGrid::from_named_layout(env.tag(), layout)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x70727879);
    let data = make_proxy_dataset(&grid, lift, 4, 120, &mut rng)?;
    train_proxy(&data)
}

/// Run every requested initialization variant over the given seeds on the
/// target environment, at a matched interaction budget, and report the
/// jointly normalized few-shot AUC per variant.
pub fn negative_controls(
    spec: &EnvSpec,
    lift: &Lift,
    artifacts: &SourceArtifacts,
    base_cfg: &TrainConfig,
    seeds: &[u64],
    budget_fraction: f64,
    variants: &[InitVariant],
) -> Result<ControlsReport> {
    use rand::SeedableRng;
    if variants.is_empty() || seeds.is_empty() {
        return Err(Error::EmptyInput("negative_controls"));
    }
    let proxy = target_proxy(spec, lift, base_cfg.seed)?;
    let jobs: Vec<(usize, usize)> = (0..variants.len())
        .flat_map(|v| (0..seeds.len()).map(move |s| (v, s)))
        .collect();
    let curves: Vec<Result<LearningCurve>> = jobs
        .par_iter()
        .map(|&(vi, si)| -> Result<LearningCurve> {
            let variant = variants[vi];
            let seed = seeds[si];
            let env = make_env(spec)?;
            let mut model_rng = ChaCha8Rng::seed_from_u64(seed * 1000 + vi as u64);
            let mut model = ValueModel::new(lift.config(), env.action_count(), &mut model_rng);
            apply_init_variant(&mut model, variant, artifacts, &mut model_rng)?;
            let mut library = SegmentLibrary::new(lift.config());
            let cfg = TrainConfig { seed, ..base_cfg.clone() };
            let (curve, _) =
                train_target(spec, lift, &mut model, &mut library, Some(&proxy), &cfg)?;
            Ok(curve)
        })
        .collect();
    let mut all: Vec<LearningCurve> = Vec::with_capacity(jobs.len());
    for c in curves {
        all.push(c?);
    }
    normalize_curves(&mut all);
    let mut rows = Vec::with_capacity(variants.len());
    for (vi, variant) in variants.iter().enumerate() {
        let mut per_seed = Vec::with_capacity(seeds.len());
        for si in 0..seeds.len() {
            per_seed.push(few_shot_auc(&all[vi * seeds.len() + si], budget_fraction)?);
        }
        let mean_auc = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
        rows.push(ControlsRow { variant: variant.name(), per_seed, mean_auc });
    }
    Ok(ControlsReport { rows, budget_fraction, seeds: seeds.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::register_suite_adapters;
    use crate::lift::AdapterRegistry;
    use rand::SeedableRng;

    fn fk_config() -> LiftConfig {
        LiftConfig::full_kronecker(2, 3)
    }

    fn suite_lift() -> Lift {
        let mut reg = AdapterRegistry::new();
        register_suite_adapters(&mut reg);
        Lift::new(LiftConfig::compact_default(), reg)
    }

    fn rand_point(rng: &mut ChaCha8Rng) -> Vec<f64> {
        vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]
    }

    #[test]
    fn parity_two_node_pair_vanishes() {
        let cfg = fk_config();
        let u = vec![0.3, -0.7];
        let v = vec![1.1, 0.4];
        let edges = vec![
            Edge { from: u.clone(), to: v.clone(), action: 1, reward: 0.25 },
            Edge { from: v, to: u, action: 1, reward: 0.25 },
        ];
        let report = parity_check(&edges, &cfg).unwrap();
        assert!(report.overall_max <= 1e-12, "parity residual {}", report.overall_max);
    }

    #[test]
    fn parity_both_orientations_of_cycle() {
        let cfg = fk_config();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Vec<f64>> = (0..4).map(|_| rand_point(&mut rng)).collect();
        let mut edges = Vec::new();
        for i in 0..4 {
            let j = (i + 1) % 4;
            edges.push(Edge { from: pts[i].clone(), to: pts[j].clone(), action: 2, reward: 0.1 });
            edges.push(Edge { from: pts[j].clone(), to: pts[i].clone(), action: 2, reward: 0.1 });
        }
        let report = parity_check(&edges, &cfg).unwrap();
        assert!(report.overall_max <= IDENTITY_TOL);
    }

    #[test]
    fn parity_rejects_single_direction() {
        let cfg = fk_config();
        let edges =
            vec![Edge { from: vec![0.0, 0.0], to: vec![1.0, 0.0], action: 0, reward: 0.0 }];
        assert!(matches!(parity_check(&edges, &cfg), Err(Error::NotReversalPaired(_))));
        // A single directed edge has nonzero net displacement (control).
        let m = edge_descriptor(&edges, &cfg).unwrap();
        let d1 = m.block(Channel::Disp, Channel::Const).unwrap();
        assert!(d1[(0, 0)].abs() > 0.5);
    }

    #[test]
    fn path_identities_hold_on_random_paths() {
        let cfg = fk_config();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let pts: Vec<Vec<f64>> = (0..6).map(|_| rand_point(&mut rng)).collect();
            let report = path_identities(&pts, &cfg).unwrap();
            assert!(report.max_err() <= IDENTITY_TOL, "path residual {}", report.max_err());
        }
        // Degenerate path (single point) gives the zero descriptor.
        let single = path_identities(&[vec![0.5, 0.5]], &cfg).unwrap();
        assert_eq!(single.max_err(), 0.0);
    }

    #[test]
    fn cycle_identities_hold_uniform_and_mixed() {
        let cfg = fk_config();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..20 {
            let n = 4 + (trial % 3);
            let mut pts: Vec<Vec<f64>> = (0..n).map(|_| rand_point(&mut rng)).collect();
            pts.push(pts[0].clone());
            // Uniform-action cycle.
            let uniform = cycle_identities(&pts, &vec![1; n], &cfg).unwrap();
            assert!(uniform.max_err() <= IDENTITY_TOL, "uniform cycle {}", uniform.max_err());
            assert!(uniform.uniform_action_transport_err.is_some());
            // Mixed labels: closure and skew still hold; action transport is
            // recorded but not required to vanish.
            let actions: Vec<usize> = (0..n).map(|i| i % 3).collect();
            let mixed = cycle_identities(&pts, &actions, &cfg).unwrap();
            assert!(mixed.closure_err <= IDENTITY_TOL);
            assert!(mixed.skew_err <= IDENTITY_TOL);
            assert!(mixed.uniform_action_transport_err.is_none());
        }
    }

    #[test]
    fn cycle_rejects_open_sequence() {
        let cfg = fk_config();
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        assert!(cycle_identities(&pts, &[0, 0], &cfg).is_err());
    }

    #[test]
    fn additive_consistency_small_sample() {
        let lift = suite_lift();
        let env = make_env(&EnvSpec::new("micro_grid")).unwrap();
        let report = additive_consistency(env.dynamics(), &lift, 25, 0).unwrap();
        assert_eq!(report.n, 25);
        assert!(report.max_err <= 1e-10, "additivity error {}", report.max_err);
        let empty = additive_consistency(env.dynamics(), &lift, 0, 0).unwrap();
        assert_eq!(empty.n, 0);
    }

    #[test]
    fn retrieval_identical_sets_score_one() {
        // Degenerate check: querying keys with themselves is a perfect
        // retrieval for every task that uses nn_match_rate.
        let lift = suite_lift();
        let report = retrieval_diagnostic(RetrievalTask::MotifRetrieval, &lift, 0).unwrap();
        assert!(report.score >= 0.8, "motif retrieval {}", report.score);
        assert!(!report.protocol.is_empty());
    }

    #[test]
    fn retrieval_unknown_task_rejected() {
        assert!(RetrievalTask::parse("nope").is_err());
        assert_eq!(RetrievalTask::parse("coord_matching").unwrap(), RetrievalTask::CoordMatching);
    }
}

//! Obstruction scoring: exact minimum Frobenius distance from a candidate
//! matrix to the enumerated reachable set at matching horizon (a positive
//! score certifies non-realizability; zero proves nothing), plus a small
//! logistic proxy trained to imitate that certificate inside planning.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::descriptor::{descriptor_of_segment, MatrixDescriptor};
use crate::env::{enumerate_trajectories, sample_rollout, Dynamics, MicroGrid};
use crate::error::{Error, Result};
use crate::kv::KvBlock;
use crate::library::l2_distance;
use crate::lift::{Channel, Lift};

pub const PROXY_KV_TAG: &str = "trajmat-proxy v1";

/// Frobenius tolerance for deduplicating enumerated descriptors.
pub const DEDUP_TOL: f64 = 1e-9;

/// Tolerance on the candidate's horizon slot against the set horizon.
pub const HORIZON_TOL: f64 = 1e-6;

/// Number of leading eigenvalue gaps in the proxy features.
pub const PROXY_EIG_GAPS: usize = 8;

/// Version tag of the proxy feature map; bumped if the layout changes.
pub const PROXY_FEATURE_VERSION: u32 = 1;

/// All descriptors realizable from a start observation at one horizon,
/// deduplicated within [`DEDUP_TOL`].
pub struct ReachableSet {
    pub env_tag: String,
    pub horizon: usize,
    pub matrices: Vec<MatrixDescriptor>,
}

/// Enumerate every horizon-`t` trajectory from `start` and collect the
/// deduplicated descriptors. Distinct action sequences with identical
/// lifted-step multisets collapse to one matrix.
pub fn build_reachable_set(
    dynamics: &dyn Dynamics,
    start: &[f64],
    t: usize,
    lift: &Lift,
    cap: usize,
) -> Result<ReachableSet> {
    let segments = enumerate_trajectories(dynamics, start, t, cap)?;
    let mut matrices: Vec<MatrixDescriptor> = Vec::new();
    for seg in &segments {
        let m = descriptor_of_segment(seg, lift)?;
        let dup = matrices.iter().any(|k| {
            k.sym().frobenius_distance_sq_capped(m.sym(), DEDUP_TOL * DEDUP_TOL)
                <= DEDUP_TOL * DEDUP_TOL
        });
        if !dup {
            matrices.push(m);
        }
    }
    Ok(ReachableSet { env_tag: dynamics.tag().to_string(), horizon: t, matrices })
}

/// Minimum Frobenius distance from `candidate` to the reachable set.
///
/// The candidate's horizon slot must match the set's horizon within
/// [`HORIZON_TOL`]: a mismatched (or non-integer) horizon cannot equal any
/// trajectory of this set, so the mismatch error itself is an immediate
/// certificate of non-realizability. An empty set yields `+inf`.
pub fn exact_obstruction(candidate: &MatrixDescriptor, rs: &ReachableSet) -> Result<f64> {
    let h = candidate.horizon();
    if (h - rs.horizon as f64).abs() > HORIZON_TOL {
        return Err(Error::HorizonMismatch { candidate: h, expected: rs.horizon });
    }
    let mut best = f64::INFINITY;
    for m in &rs.matrices {
        let cutoff = if best.is_finite() { best * best } else { f64::INFINITY };
        let d2 = candidate.sym().frobenius_distance_sq_capped(m.sym(), cutoff);
        if d2 < cutoff {
            best = d2.max(0.0).sqrt();
            if best == 0.0 {
                return Ok(0.0);
            }
        }
    }
    Ok(best)
}

/// One labeled proxy example; `obstructed == true` means the composed
/// candidate failed the exact realizability check.
#[derive(Debug, Clone)]
pub struct ProxyExample {
    pub features: Vec<f64>,
    pub obstructed: bool,
}

/// Feature map for the proxy: observation jump, horizon bookkeeping,
/// leading eigenvalue gaps of the increment `Z_hat - Z`, selected block
/// norms, and the gap between the increment's implied entry/exit points and
/// the queried observations.
pub fn proxy_features(
    obs_emb: &[f64],
    z: &MatrixDescriptor,
    cand_obs: &[f64],
    cand_z: &MatrixDescriptor,
) -> Result<Vec<f64>> {
    let cfg = z.config().clone();
    if cand_z.config() != &cfg {
        return Err(Error::ConfigMismatch("proxy_features".into()));
    }
    let mut delta = cand_z.sym().clone();
    delta.add_scaled(z.sym(), -1.0);
    if !delta.is_finite() {
        return Err(Error::NonFinite("proxy_features increment"));
    }
    let delta = MatrixDescriptor::from_sym(delta, &cfg)?;

    let o = cfg.obs_dim();
    let mut f = Vec::with_capacity(o + 20);
    for i in 0..o {
        f.push(cand_obs[i] - obs_emb[i]);
    }
    f.push(l2_distance(cand_obs, obs_emb));
    let t_delta = delta.horizon();
    f.push(t_delta);
    f.push(z.horizon());

    let eigs = delta.sym().eigenvalues_desc();
    for i in 0..PROXY_EIG_GAPS {
        let gap = match (eigs.get(i), eigs.get(i + 1)) {
            (Some(a), Some(b)) => a - b,
            _ => 0.0,
        };
        f.push(gap);
    }

    let norm = |ch1, ch2| -> Result<f64> {
        Ok(delta.block(ch1, ch2)?.iter().map(|v| v * v).sum::<f64>().sqrt())
    };
    f.push(norm(Channel::Mid, Channel::Mid)?);
    f.push(norm(Channel::Disp, Channel::Disp)?);
    f.push(norm(Channel::Mid, Channel::Disp)?);
    f.push(norm(Channel::Mid, Channel::Const)?);
    f.push(norm(Channel::Disp, Channel::Const)?);
    f.push(norm(Channel::Reward, Channel::Const)?);
    let action_norm = match cfg.channel_range(Channel::Action) {
        Some(_) => norm(Channel::Action, Channel::Action)?,
        None => (norm(Channel::ActMid, Channel::ActMid)?.powi(2)
            + norm(Channel::ActDisp, Channel::ActDisp)?.powi(2))
        .sqrt(),
    };
    f.push(action_norm);

    // First-moment columns of the increment give its mean midpoint and mean
    // displacement; a genuine continuation of (o, Z) starts where the agent
    // stands, so the implied mean entry point sits near `o`.
    let steps = t_delta.max(1.0);
    let mid_col = delta.block(Channel::Mid, Channel::Const)?;
    let disp_col = delta.block(Channel::Disp, Channel::Const)?;
    let mut entry_gap = 0.0;
    let mut exit_gap = 0.0;
    for i in 0..o {
        let mean_mid = mid_col[(i, 0)] / steps;
        let mean_disp = disp_col[(i, 0)] / steps;
        let entry = mean_mid - 0.5 * mean_disp;
        let exit = mean_mid + 0.5 * mean_disp;
        entry_gap += (entry - obs_emb[i]).powi(2);
        exit_gap += (exit - cand_obs[i]).powi(2);
    }
    f.push(entry_gap.sqrt());
    f.push(exit_gap.sqrt());
    Ok(f)
}

/// Logistic scorer over standardized proxy features. Outputs lie strictly
/// inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ProxyModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feat_mean: Vec<f64>,
    pub feat_std: Vec<f64>,
    pub feature_version: u32,
}

impl ProxyModel {
    pub fn score_features(&self, features: &[f64]) -> f64 {
        let mut logit = self.bias;
        for i in 0..self.weights.len() {
            let std = self.feat_std[i];
            let x = if std > 0.0 { (features[i] - self.feat_mean[i]) / std } else { 0.0 };
            logit += self.weights[i] * x;
        }
        sigmoid(logit)
    }

    pub fn to_kv(&self) -> KvBlock {
        let mut kv = KvBlock::new();
        kv.set("proxy.feature_version", self.feature_version);
        kv.set_f64("proxy.bias", self.bias);
        kv.set_f64_list("proxy.weights", &self.weights);
        kv.set_f64_list("proxy.feat_mean", &self.feat_mean);
        kv.set_f64_list("proxy.feat_std", &self.feat_std);
        kv
    }

    pub fn from_kv(kv: &KvBlock) -> Result<Self> {
        Ok(Self {
            weights: kv.get_f64_list("proxy.weights")?,
            bias: kv.get_f64("proxy.bias")?,
            feat_mean: kv.get_f64_list("proxy.feat_mean")?,
            feat_std: kv.get_f64_list("proxy.feat_std")?,
            feature_version: kv.get_u32("proxy.feature_version")?,
        })
    }
}

/// Obstruction-ness of a composed candidate future under the trained proxy.
pub fn proxy_score(
    model: &ProxyModel,
    obs_emb: &[f64],
    z: &MatrixDescriptor,
    cand_obs: &[f64],
    cand_z: &MatrixDescriptor,
) -> Result<f64> {
    Ok(model.score_features(&proxy_features(obs_emb, z, cand_obs, cand_z)?))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Build a labeled dataset from a grid maze: positives are continuations
/// actually rolled out from the current cell, negatives compose a segment
/// from the open cell on the far side of a blocking wall (a locally
/// plausible junction that no trajectory realizes). Every label is
/// cross-checked against the exact obstruction score.
pub fn make_proxy_dataset(
    grid: &MicroGrid,
    lift: &Lift,
    max_horizon: usize,
    per_class: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<ProxyExample>> {
    let start = grid.fixed_start();
    let sets: Vec<ReachableSet> = (0..=max_horizon)
        .map(|t| build_reachable_set(grid, &start, t, lift, max_horizon))
        .collect::<Result<_>>()?;

    let pairs = wall_pairs(grid);
    if pairs.is_empty() {
        return Err(Error::DegenerateDataset(
            "environment has no blocked junctions: every composition is realizable".into(),
        ));
    }

    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    let budget = per_class * 40;
    for _ in 0..budget {
        if positives.len() >= per_class && negatives.len() >= per_class {
            break;
        }
        let prefix_len = rng.random_range(1..max_horizon);
        let prefix = sample_rollout(grid, &start, prefix_len, rng);
        if prefix.len() < prefix_len {
            continue; // terminated early
        }
        let cur_raw = prefix.transitions.last().unwrap().next_obs.clone();
        let z = descriptor_of_segment(&prefix, lift)?;
        let obs_emb = lift.embed_observation(&prefix.env_tag, &cur_raw)?;
        let cont_len = rng.random_range(1..=(max_horizon - prefix_len));
        let total = prefix_len + cont_len;

        if positives.len() < per_class {
            let cont = sample_rollout(grid, &cur_raw, cont_len, rng);
            if cont.len() == cont_len {
                let cand_z = z.compose(&descriptor_of_segment(&cont, lift)?)?;
                let cand_obs = lift
                    .embed_observation(&cont.env_tag, &cont.transitions.last().unwrap().next_obs)?;
                // Realized continuations sit on the reachable set up to
                // floating-point summation order.
                debug_assert!(
                    exact_obstruction(&cand_z, &sets[total])?
                        <= 1e-10 * (1.0 + cand_z.frobenius_norm())
                );
                positives.push(ProxyExample {
                    features: proxy_features(&obs_emb, &z, &cand_obs, &cand_z)?,
                    obstructed: false,
                });
            }
        }

        if negatives.len() < per_class {
            // Jump across a wall adjacent to the current cell if one exists,
            // otherwise across a random wall junction.
            let local: Vec<&(Vec<f64>, Vec<f64>)> =
                pairs.iter().filter(|(u, _)| u == &cur_raw).collect();
            let (_, far) = if local.is_empty() {
                &pairs[rng.random_range(0..pairs.len())]
            } else {
                local[rng.random_range(0..local.len())]
            };
            let cont = sample_rollout(grid, far, cont_len, rng);
            if cont.len() == cont_len {
                let cand_z = z.compose(&descriptor_of_segment(&cont, lift)?)?;
                let cand_obs = lift
                    .embed_observation(&cont.env_tag, &cont.transitions.last().unwrap().next_obs)?;
                if exact_obstruction(&cand_z, &sets[total])? > 0.0 {
                    negatives.push(ProxyExample {
                        features: proxy_features(&obs_emb, &z, &cand_obs, &cand_z)?,
                        obstructed: true,
                    });
                }
            }
        }
    }

    if positives.is_empty() || negatives.is_empty() {
        return Err(Error::DegenerateDataset(format!(
            "could not balance classes: {} realizable vs {} obstructed",
            positives.len(),
            negatives.len()
        )));
    }
    let n = positives.len().min(negatives.len());
    positives.truncate(n);
    negatives.truncate(n);
    let mut out = positives;
    out.append(&mut negatives);
    Ok(out)
}

/// Passable cell pairs flanking a blocking wall or closed door: the near
/// and far cells sit two steps apart in a cardinal direction with an
/// impassable cell between them, so the junction looks locally plausible
/// but no trajectory crosses it.
pub fn wall_pairs(grid: &MicroGrid) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut out = Vec::new();
    let states = grid.enumerate_observations().unwrap_or_default();
    for u in &states {
        let has_key = u[2] != 0.0;
        for (dr, dc) in [(-1i64, 0i64), (1, 0), (0, -1), (0, 1)] {
            let fr = u[0] as i64 + 2 * dr;
            let fc = u[1] as i64 + 2 * dc;
            if fr < 0 || fc < 0 || fr >= grid.rows() as i64 || fc >= grid.cols() as i64 {
                continue;
            }
            let mr = (u[0] as i64 + dr) as usize;
            let mc = (u[1] as i64 + dc) as usize;
            if grid.is_passable(mr, mc, has_key) {
                continue; // no wall between: an ordinary two-step hop
            }
            let v = vec![fr as f64, fc as f64, u[2]];
            // The far cell counts only if an agent could stand there.
            if states.iter().any(|s| s == &v) {
                out.push((u.clone(), v));
            }
        }
    }
    out
}

/// Train the logistic proxy with L2-regularized gradient descent until the
/// loss plateaus (delta below 1e-6 across a 100-step window) or the epoch
/// cap is reached.
pub fn train_proxy(dataset: &[ProxyExample]) -> Result<ProxyModel> {
    train_proxy_with(dataset, 1e-4, 0.05, 4000)
}

pub fn train_proxy_with(
    dataset: &[ProxyExample],
    l2: f64,
    lr: f64,
    max_epochs: usize,
) -> Result<ProxyModel> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("train_proxy"));
    }
    let n_pos = dataset.iter().filter(|e| e.obstructed).count();
    if n_pos == 0 || n_pos == dataset.len() {
        return Err(Error::DegenerateDataset("single-class proxy dataset".into()));
    }
    let dim = dataset[0].features.len();
    let n = dataset.len() as f64;

    let mut mean = vec![0.0; dim];
    for e in dataset {
        for (m, x) in mean.iter_mut().zip(e.features.iter()) {
            *m += x / n;
        }
    }
    let mut std = vec![0.0; dim];
    for e in dataset {
        for i in 0..dim {
            std[i] += (e.features[i] - mean[i]).powi(2) / n;
        }
    }
    for s in &mut std {
        *s = s.sqrt();
        if *s < 1e-12 {
            *s = 0.0;
        }
    }
    let standardized: Vec<Vec<f64>> = dataset
        .iter()
        .map(|e| {
            (0..dim)
                .map(|i| if std[i] > 0.0 { (e.features[i] - mean[i]) / std[i] } else { 0.0 })
                .collect()
        })
        .collect();

    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut opt = crate::value::Adam::new(lr, dim + 1);
    let mut loss_history = Vec::with_capacity(max_epochs);
    for epoch in 0..max_epochs {
        let mut gw = vec![0.0; dim];
        let mut gb = 0.0;
        let mut loss = 0.0;
        for (x, e) in standardized.iter().zip(dataset.iter()) {
            let logit = b + w.iter().zip(x.iter()).map(|(wi, xi)| wi * xi).sum::<f64>();
            let p = sigmoid(logit);
            let y = if e.obstructed { 1.0 } else { 0.0 };
            loss -= (y * p.max(1e-12).ln() + (1.0 - y) * (1.0 - p).max(1e-12).ln()) / n;
            let d = (p - y) / n;
            gb += d;
            for i in 0..dim {
                gw[i] += d * x[i];
            }
        }
        for i in 0..dim {
            loss += 0.5 * l2 * w[i] * w[i];
            gw[i] += l2 * w[i];
        }
        let mut params: Vec<f64> = w.iter().copied().chain(std::iter::once(b)).collect();
        let grads: Vec<f64> = gw.iter().copied().chain(std::iter::once(gb)).collect();
        opt.step(&mut params, &grads);
        b = params[dim];
        w.copy_from_slice(&params[..dim]);
        if !loss.is_finite() {
            return Err(Error::Diverged(format!("proxy loss non-finite at epoch {epoch}")));
        }
        loss_history.push(loss);
        if epoch >= 100 && (loss_history[epoch - 100] - loss).abs() < 1e-6 {
            break;
        }
    }
    Ok(ProxyModel {
        weights: w,
        bias: b,
        feat_mean: mean,
        feat_std: std,
        feature_version: PROXY_FEATURE_VERSION,
    })
}

/// Area under the ROC curve by the rank statistic (ties counted half),
/// with `obstructed` as the positive class.
pub fn auroc(scores_and_labels: &[(f64, bool)]) -> Option<f64> {
    let n_pos = scores_and_labels.iter().filter(|(_, l)| *l).count();
    let n_neg = scores_and_labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut sorted: Vec<&(f64, bool)> = scores_and_labels.iter().collect();
    sorted.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1].0 == sorted[i].0 {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for item in sorted.iter().take(j + 1).skip(i) {
            if item.1 {
                rank_sum += avg_rank;
            }
        }
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lift::{AdapterRegistry, LiftConfig};
    use rand::SeedableRng;

    fn grid_lift(layout: &str) -> (MicroGrid, Lift) {
        let grid = MicroGrid::from_named_layout("micro_grid", layout).unwrap();
        let mut reg = AdapterRegistry::new();
        grid.register_adapter(&mut reg);
        (grid, Lift::new(LiftConfig::compact_default(), reg))
    }

    #[test]
    fn reachable_set_t0_is_zero_matrix() {
        let (grid, lift) = grid_lift("open_2x2");
        let rs = build_reachable_set(&grid, &grid.fixed_start(), 0, &lift, 8).unwrap();
        assert_eq!(rs.matrices.len(), 1);
        assert_eq!(rs.matrices[0].frobenius_norm(), 0.0);
    }

    #[test]
    fn reachable_set_open_2x2_t1() {
        let (grid, lift) = grid_lift("open_2x2");
        let rs = build_reachable_set(&grid, &grid.fixed_start(), 1, &lift, 8).unwrap();
        assert!(rs.matrices.len() <= 4);
        for m in &rs.matrices {
            assert_eq!(m.horizon(), 1.0);
        }
    }

    #[test]
    fn dedup_collapses_identical_multisets() {
        // Two blocked-move sequences taken in either order produce the same
        // lifted-step multiset and must collapse to one matrix.
        let (grid, lift) = grid_lift("open_2x2");
        let rs2 = build_reachable_set(&grid, &grid.fixed_start(), 2, &lift, 8).unwrap();
        let segs = enumerate_trajectories(&grid, &grid.fixed_start(), 2, 8).unwrap();
        assert_eq!(segs.len(), 16);
        assert!(rs2.matrices.len() < 16, "permuted multisets must deduplicate");
    }

    #[test]
    fn member_scores_exactly_zero() {
        let (grid, lift) = grid_lift("open_3x3_wall");
        let rs = build_reachable_set(&grid, &grid.fixed_start(), 3, &lift, 8).unwrap();
        for m in &rs.matrices {
            assert_eq!(exact_obstruction(m, &rs).unwrap(), 0.0);
        }
        for seg in enumerate_trajectories(&grid, &grid.fixed_start(), 3, 8).unwrap() {
            let m = descriptor_of_segment(&seg, &lift).unwrap();
            assert_eq!(exact_obstruction(&m, &rs).unwrap(), 0.0);
        }
    }

    #[test]
    fn empty_set_gives_infinity() {
        let (_, lift) = grid_lift("open_2x2");
        let rs = ReachableSet { env_tag: "micro_grid".into(), horizon: 0, matrices: vec![] };
        let zero = MatrixDescriptor::zero(lift.config());
        assert_eq!(exact_obstruction(&zero, &rs).unwrap(), f64::INFINITY);
    }

    #[test]
    fn horizon_mismatch_is_certified() {
        let (grid, lift) = grid_lift("open_2x2");
        let rs = build_reachable_set(&grid, &grid.fixed_start(), 2, &lift, 8).unwrap();
        let zero = MatrixDescriptor::zero(lift.config());
        assert!(matches!(exact_obstruction(&zero, &rs), Err(Error::HorizonMismatch { .. })));
    }

    #[test]
    fn wall_crossing_composition_scores_positive() {
        let (grid, lift) = grid_lift("two_rooms_8x8");
        let start = grid.fixed_start();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let prefix = sample_rollout(&grid, &start, 2, &mut rng);
        let z = descriptor_of_segment(&prefix, &lift).unwrap();
        // Segment from the right room, across the unbroken wall.
        let far = sample_rollout(&grid, &[0.0, 5.0, 0.0], 2, &mut rng);
        let cand = z.compose(&descriptor_of_segment(&far, &lift).unwrap()).unwrap();
        let rs = build_reachable_set(&grid, &start, 4, &lift, 8).unwrap();
        let score = exact_obstruction(&cand, &rs).unwrap();
        assert!(score > 0.0, "cross-wall composition must be obstructed, got {score}");
    }

    #[test]
    fn open_room_has_no_negatives() {
        let (grid, lift) = grid_lift("open_4x4");
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = make_proxy_dataset(&grid, &lift, 4, 50, &mut rng).unwrap_err();
        assert!(matches!(err, Error::DegenerateDataset(_)));
    }

    #[test]
    fn walled_grid_dataset_is_balanced_and_label_consistent() {
        let (grid, lift) = grid_lift("two_rooms_8x8");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data = make_proxy_dataset(&grid, &lift, 5, 60, &mut rng).unwrap();
        let n_pos = data.iter().filter(|e| e.obstructed).count();
        let n_neg = data.len() - n_pos;
        assert!(n_pos > 0 && n_neg > 0);
        let ratio = n_pos as f64 / n_neg as f64;
        assert!((0.9..=1.1).contains(&ratio), "class balance off: {ratio}");
    }

    #[test]
    fn proxy_separates_linearly_separable_toy_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut data = Vec::new();
        for _ in 0..200 {
            let label = rng.random_range(0..2) == 1;
            let center = if label { 1.5 } else { -1.5 };
            let features = vec![center + rng.random_range(-0.5..0.5), rng.random_range(-1.0..1.0)];
            data.push(ProxyExample { features, obstructed: label });
        }
        let model = train_proxy(&data).unwrap();
        let scored: Vec<(f64, bool)> =
            data.iter().map(|e| (model.score_features(&e.features), e.obstructed)).collect();
        assert!(auroc(&scored).unwrap() >= 0.99);
        for (s, _) in &scored {
            assert!(*s > 0.0 && *s < 1.0);
        }
    }

    #[test]
    fn single_class_dataset_rejected() {
        let data = vec![ProxyExample { features: vec![1.0], obstructed: false }; 10];
        assert!(matches!(train_proxy(&data), Err(Error::DegenerateDataset(_))));
    }

    #[test]
    fn proxy_kv_round_trip() {
        let model = ProxyModel {
            weights: vec![0.5, -1.25],
            bias: 0.125,
            feat_mean: vec![0.0, 1.0],
            feat_std: vec![1.0, 2.0],
            feature_version: PROXY_FEATURE_VERSION,
        };
        let kv = model.to_kv();
        let back = ProxyModel::from_kv(&kv).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn auroc_known_cases() {
        let perfect = [(0.9, true), (0.8, true), (0.2, false), (0.1, false)];
        assert_eq!(auroc(&perfect).unwrap(), 1.0);
        let inverted = [(0.1, true), (0.2, true), (0.8, false), (0.9, false)];
        assert_eq!(auroc(&inverted).unwrap(), 0.0);
        let tied = [(0.5, true), (0.5, false)];
        assert_eq!(auroc(&tied).unwrap(), 0.5);
    }

    #[test]
    fn macromaze_has_wall_pairs() {
        let grid = MicroGrid::from_named_layout("macro_maze", "macromaze_16x16").unwrap();
        assert!(!wall_pairs(&grid).is_empty());
    }
}

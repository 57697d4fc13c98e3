//! The trajectory-segment matrix: sum of outer products of lifted steps,
//! plus its algebra (accumulation, composition, inclusion-exclusion gluing,
//! block access, gauge congruence, linear functionals, distances).

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kv::{format_f64, KvBlock};
use crate::lift::{gauge_matrix, Channel, GaugeTransform, Lift, LiftConfig, LiftedStep};
use crate::linalg::{max_asymmetry, SymMat};
use crate::segment::TrajectorySegment;

pub const DESCRIPTOR_FILE_TAG: &str = "trajmat-descriptor v1";

/// Tolerance on `A` symmetry in [`evaluate_functional`].
pub const FUNCTIONAL_SYMMETRY_TOL: f64 = 1e-10;

/// Symmetric m x m descriptor tagged with the lift configuration that
/// produced it. Symmetry is structural (single stored triangle).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixDescriptor {
    mat: SymMat,
    config: LiftConfig,
}

impl MatrixDescriptor {
    pub fn zero(config: &LiftConfig) -> Self {
        Self { mat: SymMat::zeros(config.dim()), config: config.clone() }
    }

    pub fn from_sym(mat: SymMat, config: &LiftConfig) -> Result<Self> {
        if mat.dim() != config.dim() {
            return Err(Error::DimMismatch {
                context: "MatrixDescriptor::from_sym",
                expected: config.dim(),
                got: mat.dim(),
            });
        }
        Ok(Self { mat, config: config.clone() })
    }

    /// Sum of outer products of the given steps, in arrival order. (Online
    /// accumulation over the same steps reproduces this bit-for-bit.)
    pub fn from_steps(steps: &[LiftedStep], config: &LiftConfig) -> Result<Self> {
        let mut out = Self::zero(config);
        for step in steps {
            out.accumulate(step)?;
        }
        Ok(out)
    }

    pub fn config(&self) -> &LiftConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.mat.dim()
    }

    pub fn sym(&self) -> &SymMat {
        &self.mat
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat.get(i, j)
    }

    fn check_config(&self, other: &MatrixDescriptor, what: &str) -> Result<()> {
        if self.config != other.config {
            return Err(Error::ConfigMismatch(format!("{what}: descriptors use different lifts")));
        }
        Ok(())
    }

    /// Rank-one update `Z += psi psi^T`. The horizon slot increases by
    /// exactly 1 (the constant channel contributes 1^2).
    pub fn accumulate(&mut self, step: &LiftedStep) -> Result<()> {
        if step.config != self.config {
            return Err(Error::ConfigMismatch("accumulate: step lifted under a different config".into()));
        }
        if step.psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("accumulate step"));
        }
        self.mat.add_outer(&step.psi);
        Ok(())
    }

    /// Entrywise sum; models concatenation of compatible segments.
    pub fn compose(&self, other: &MatrixDescriptor) -> Result<MatrixDescriptor> {
        self.check_config(other, "compose")?;
        let mut out = self.clone();
        out.mat.add_scaled(&other.mat, 1.0);
        Ok(out)
    }

    /// The constant-channel diagonal entry; equals the segment length T for
    /// any segment-built descriptor.
    pub fn horizon(&self) -> f64 {
        let c = self.config.const_index();
        self.mat.get(c, c)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.mat.frobenius_norm()
    }

    pub fn frobenius_distance(&self, other: &MatrixDescriptor) -> Result<f64> {
        self.check_config(other, "frobenius_distance")?;
        Ok(self.mat.frobenius_distance(&other.mat))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.mat.min_eigenvalue()
    }

    /// Exact block slice of the descriptor for a pair of channel tags.
    pub fn block(&self, row: Channel, col: Channel) -> Result<DMatrix<f64>> {
        let r = self.config.require_channel(row)?;
        let c = self.config.require_channel(col)?;
        Ok(DMatrix::from_fn(r.len(), c.len(), |i, j| self.mat.get(r.start + i, c.start + j)))
    }

    /// Gauge congruence `H M H^T` for the full Kronecker lift. The result is
    /// exactly symmetric by construction.
    pub fn congruence(&self, g: &GaugeTransform) -> Result<MatrixDescriptor> {
        let h = gauge_matrix(g, &self.config)?;
        let dense = &h * self.mat.to_dense() * h.transpose();
        Ok(MatrixDescriptor { mat: SymMat::from_dense_symmetrized(&dense)?, config: self.config.clone() })
    }

    /// Descriptor file: versioned key-value header (the lift config block)
    /// followed by the upper triangle, one decimal per line. Round-trips
    /// bit-exactly.
    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let header = self.config.to_kv().render(DESCRIPTOR_FILE_TAG);
        w.write_all(header.as_bytes())?;
        writeln!(w)?;
        for v in self.mat.triangle() {
            writeln!(w, "{}", format_f64(*v))?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl BufRead) -> Result<Self> {
        let mut header = String::new();
        loop {
            let mut line = String::new();
            if r.read_line(&mut line)? == 0 {
                return Err(Error::Parse { line: 0, msg: "truncated descriptor file".into() });
            }
            if line.trim().is_empty() {
                break;
            }
            header.push_str(&line);
        }
        let kv = KvBlock::parse(&header, DESCRIPTOR_FILE_TAG)?;
        let config = LiftConfig::from_kv(&kv)?;
        let want = config.dim() * (config.dim() + 1) / 2;
        let mut tri = Vec::with_capacity(want);
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let tok = line.trim();
            if tok.is_empty() {
                continue;
            }
            tri.push(tok.parse::<f64>().map_err(|e| Error::Parse {
                line: i + 1,
                msg: format!("bad triangle entry `{tok}`: {e}"),
            })?);
        }
        if tri.len() != want {
            return Err(Error::DimMismatch {
                context: "descriptor triangle",
                expected: want,
                got: tri.len(),
            });
        }
        Self::from_sym(SymMat::from_triangle(config.dim(), tri)?, &config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        self.write_to(&mut f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut r)
    }
}

/// Descriptor of a segment: validates the observation chain, lifts each
/// transition, and sums outer products. The empty segment yields zero.
pub fn descriptor_of_segment(seg: &TrajectorySegment, lift: &Lift) -> Result<MatrixDescriptor> {
    seg.check_chain()?;
    descriptor_of_transitions(seg, lift)
}

/// Descriptor of an unordered transition multiset (no chain requirement);
/// used for symbolic edge-set checks where transitions need not chain.
pub fn descriptor_of_transitions(seg: &TrajectorySegment, lift: &Lift) -> Result<MatrixDescriptor> {
    let mut out = MatrixDescriptor::zero(lift.config());
    for t in &seg.transitions {
        let step = lift.lift_transition(&seg.env_tag, t)?;
        out.accumulate(&step)?;
    }
    Ok(out)
}

/// An interval cover of `{0, .., len-1}` by half-open ranges.
#[derive(Debug, Clone)]
pub struct IntervalCover {
    intervals: Vec<(usize, usize)>,
    len: usize,
}

impl IntervalCover {
    /// Validates that each interval is nonempty and inside range, and that
    /// the union is exactly `{0, .., len-1}`.
    pub fn new(intervals: Vec<(usize, usize)>, len: usize) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidCover("no intervals".into()));
        }
        let mut covered = vec![false; len];
        for &(s, e) in &intervals {
            if s >= e {
                return Err(Error::InvalidCover(format!("empty interval [{s}, {e})")));
            }
            if e > len {
                return Err(Error::InvalidCover(format!("interval [{s}, {e}) exceeds length {len}")));
            }
            for c in covered[s..e].iter_mut() {
                *c = true;
            }
        }
        if let Some(hole) = covered.iter().position(|c| !c) {
            return Err(Error::InvalidCover(format!("index {hole} not covered")));
        }
        Ok(Self { intervals, len })
    }

    pub fn intervals(&self) -> &[(usize, usize)] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Intersection of the intervals selected by `subset` (of cover indices).
    pub fn intersection(&self, subset: &BTreeSet<usize>) -> Option<(usize, usize)> {
        let mut lo = 0usize;
        let mut hi = self.len;
        for &k in subset {
            let (s, e) = *self.intervals.get(k)?;
            lo = lo.max(s);
            hi = hi.min(e);
        }
        (lo < hi).then_some((lo, hi))
    }

    /// All nonempty subsets of cover indices with nonempty intersection,
    /// paired with the descriptor of the corresponding restriction of `seg`.
    pub fn overlap_family(
        &self,
        seg: &TrajectorySegment,
        lift: &Lift,
    ) -> Result<Vec<(BTreeSet<usize>, MatrixDescriptor)>> {
        let k = self.intervals.len();
        assert!(k <= 16, "overlap family enumerates 2^K subsets; K too large");
        let mut out = Vec::new();
        for mask in 1u32..(1 << k) {
            let subset: BTreeSet<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
            if let Some((lo, hi)) = self.intersection(&subset) {
                let sub = seg.restrict_range(lo, hi)?;
                out.push((subset, descriptor_of_segment(&sub, lift)?));
            }
        }
        Ok(out)
    }
}

/// Inclusion-exclusion gluing: signed sum with coefficient `(-1)^(|S|+1)`.
///
/// Accepts any family of symmetric matrices keyed by distinct nonempty
/// overlap index sets. The result is a candidate in the ambient symmetric
/// space; it need not be PSD nor have an integer horizon slot.
pub fn glue(parts: &[(BTreeSet<usize>, MatrixDescriptor)]) -> Result<MatrixDescriptor> {
    let (first, rest) = parts.split_first().ok_or(Error::EmptyInput("glue"))?;
    if first.0.is_empty() {
        return Err(Error::InvalidIndexSet("glue key must be a nonempty subset".into()));
    }
    let mut seen = BTreeSet::new();
    seen.insert(first.0.clone());
    let sign = |s: &BTreeSet<usize>| if s.len() % 2 == 1 { 1.0 } else { -1.0 };
    let mut out = MatrixDescriptor::zero(first.1.config());
    out.mat.add_scaled(&first.1.mat, sign(&first.0));
    for (key, m) in rest {
        if key.is_empty() {
            return Err(Error::InvalidIndexSet("glue key must be a nonempty subset".into()));
        }
        if !seen.insert(key.clone()) {
            return Err(Error::InvalidIndexSet(format!("duplicate glue key {key:?}")));
        }
        out.check_config(m, "glue")?;
        out.mat.add_scaled(&m.mat, sign(key));
    }
    Ok(out)
}

/// Coefficients of an additive affine-quadratic segment functional
/// F(tau) = sum_t (a + b^T psi_bar_t + psi_bar_t^T C psi_bar_t), where
/// psi_bar is the lifted step without its constant slot.
#[derive(Debug, Clone)]
pub struct FunctionalCoeffs {
    pub a: f64,
    pub b: Vec<f64>,
    pub c: SymMat,
}

impl FunctionalCoeffs {
    pub fn new(a: f64, b: Vec<f64>, c: SymMat) -> Result<Self> {
        if c.dim() != b.len() {
            return Err(Error::DimMismatch {
                context: "FunctionalCoeffs",
                expected: b.len(),
                got: c.dim(),
            });
        }
        Ok(Self { a, b, c })
    }

    /// Direct per-step evaluation; the independent route used to cross-check
    /// the matrix representation.
    pub fn evaluate_direct(&self, steps: &[LiftedStep]) -> f64 {
        let mut total = 0.0;
        for step in steps {
            let bar = &step.psi[..step.psi.len() - 1];
            let mut v = self.a;
            for (bi, pi) in self.b.iter().zip(bar.iter()) {
                v += bi * pi;
            }
            for i in 0..bar.len() {
                for j in 0..bar.len() {
                    v += bar[i] * self.c.get(i, j) * bar[j];
                }
            }
            total += v;
        }
        total
    }
}

/// The symmetric matrix A = [[C, b/2], [b^T/2, a]] with
/// <A, M(tau)> = F(tau) for every segment.
pub fn functional_matrix(f: &FunctionalCoeffs, config: &LiftConfig) -> Result<SymMat> {
    let m = config.dim();
    if f.b.len() != m - 1 {
        return Err(Error::DimMismatch { context: "functional_matrix", expected: m - 1, got: f.b.len() });
    }
    let mut a = SymMat::zeros(m);
    for i in 0..m - 1 {
        for j in i..m - 1 {
            a.set(i, j, f.c.get(i, j));
        }
        a.set(i, m - 1, 0.5 * f.b[i]);
    }
    a.set(m - 1, m - 1, f.a);
    Ok(a)
}

/// Frobenius inner product `<A, M>` of a symmetric test matrix against a
/// descriptor. `A` is accepted dense and checked for symmetry.
pub fn evaluate_functional(a: &DMatrix<f64>, m: &MatrixDescriptor) -> Result<f64> {
    if a.nrows() != m.dim() || a.ncols() != m.dim() {
        return Err(Error::DimMismatch {
            context: "evaluate_functional",
            expected: m.dim(),
            got: a.nrows(),
        });
    }
    let asym = max_asymmetry(a);
    if asym > FUNCTIONAL_SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let sym = SymMat::from_dense_symmetrized(a)?;
    Ok(sym.inner(&m.mat))
}

/// `<A, M>` when A is already structurally symmetric.
pub fn evaluate_functional_sym(a: &SymMat, m: &MatrixDescriptor) -> Result<f64> {
    if a.dim() != m.dim() {
        return Err(Error::DimMismatch {
            context: "evaluate_functional_sym",
            expected: m.dim(),
            got: a.dim(),
        });
    }
    Ok(a.inner(&m.mat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lift::{embed_action, lift_step, ActionValue, AdapterRegistry, ObsAdapter};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn test_lift(cfg: LiftConfig) -> Lift {
        let mut reg = AdapterRegistry::new();
        reg.register("test", ObsAdapter::Identity, 1.0);
        Lift::new(cfg, reg)
    }

    fn random_segment(rng: &mut ChaCha8Rng, len: usize, obs_dim: usize, n_actions: usize) -> TrajectorySegment {
        let mut obs: Vec<f64> = (0..obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut transitions = Vec::with_capacity(len);
        for _ in 0..len {
            let next: Vec<f64> = (0..obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let a = rng.random_range(0..n_actions);
            let r = rng.random_range(-1.0..1.0);
            transitions.push(Transition::discrete(obs.clone(), a, r, next.clone()));
            obs = next;
        }
        TrajectorySegment::new("test", transitions)
    }

    use crate::lift::Transition;

    #[test]
    fn empty_segment_is_zero_matrix() {
        let lift = test_lift(LiftConfig::compact(2, 2));
        let m = descriptor_of_segment(&TrajectorySegment::empty("test"), &lift).unwrap();
        assert_eq!(m.frobenius_norm(), 0.0);
        assert_eq!(m.horizon(), 0.0);
    }

    #[test]
    fn horizon_slot_counts_steps() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let lift = test_lift(LiftConfig::compact(2, 3));
        let seg = random_segment(&mut rng, 6, 2, 3);
        let m = descriptor_of_segment(&seg, &lift).unwrap();
        assert_eq!(m.horizon(), 6.0);
    }

    #[test]
    fn descriptor_matches_naive_outer_sum() {
        // Independent reference: dense psi psi^T accumulated with nalgebra.
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = LiftConfig::full_kronecker(2, 2);
        let lift = test_lift(cfg.clone());
        let seg = random_segment(&mut rng, 6, 2, 2);
        let m = descriptor_of_segment(&seg, &lift).unwrap();

        let mut dense = DMatrix::<f64>::zeros(cfg.dim(), cfg.dim());
        for t in &seg.transitions {
            let xi = embed_action(&t.action, 2).unwrap();
            let step = lift_step(&t.obs, &t.next_obs, &xi, t.reward, &cfg).unwrap();
            let v = DMatrix::from_column_slice(cfg.dim(), 1, &step.psi);
            dense += &v * v.transpose();
        }
        for i in 0..cfg.dim() {
            for j in 0..cfg.dim() {
                assert!((m.get(i, j) - dense[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn accumulate_matches_batch_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let lift = test_lift(LiftConfig::compact(3, 2));
        let seg = random_segment(&mut rng, 9, 3, 2);
        let batch = descriptor_of_segment(&seg, &lift).unwrap();
        let mut online = MatrixDescriptor::zero(lift.config());
        let mut horizon = 0.0;
        for t in &seg.transitions {
            let step = lift.lift_transition("test", t).unwrap();
            online.accumulate(&step).unwrap();
            horizon += 1.0;
            assert_eq!(online.horizon(), horizon);
        }
        assert_eq!(online.sym().triangle(), batch.sym().triangle());
    }

    #[test]
    fn accumulate_on_zero_base_is_outer_product() {
        let cfg = LiftConfig::compact(2, 2);
        let xi = embed_action(&ActionValue::Discrete(1), 2).unwrap();
        let step = lift_step(&[0.5, 0.25], &[1.0, 0.0], &xi, 0.3, &cfg).unwrap();
        let mut z = MatrixDescriptor::zero(&cfg);
        z.accumulate(&step).unwrap();
        for i in 0..cfg.dim() {
            for j in 0..cfg.dim() {
                assert_eq!(z.get(i, j), step.psi[i] * step.psi[j]);
            }
        }
    }

    #[test]
    fn compose_is_segment_concatenation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lift = test_lift(LiftConfig::compact(2, 2));
        let seg = random_segment(&mut rng, 10, 2, 2);
        let m_full = descriptor_of_segment(&seg, &lift).unwrap();
        let left = descriptor_of_segment(&seg.restrict_range(0, 4).unwrap(), &lift).unwrap();
        let right = descriptor_of_segment(&seg.restrict_range(4, 10).unwrap(), &lift).unwrap();
        let sum = left.compose(&right).unwrap();
        let err = sum.frobenius_distance(&m_full).unwrap();
        assert!(err <= 1e-10 * (1.0 + m_full.frobenius_norm()));
        assert_eq!(sum.horizon(), 10.0);

        // Identity and commutativity.
        let zero = MatrixDescriptor::zero(lift.config());
        assert_eq!(m_full.compose(&zero).unwrap(), m_full);
        assert_eq!(left.compose(&right).unwrap(), right.compose(&left).unwrap());
    }

    #[test]
    fn compose_rejects_config_mismatch() {
        let a = MatrixDescriptor::zero(&LiftConfig::compact(2, 2));
        let b = MatrixDescriptor::zero(&LiftConfig::compact(2, 3));
        assert!(matches!(a.compose(&b), Err(Error::ConfigMismatch(_))));
    }

    #[test]
    fn glue_single_interval_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let lift = test_lift(LiftConfig::compact(2, 2));
        let seg = random_segment(&mut rng, 5, 2, 2);
        let m = descriptor_of_segment(&seg, &lift).unwrap();
        let cover = IntervalCover::new(vec![(0, 5)], 5).unwrap();
        let fam = cover.overlap_family(&seg, &lift).unwrap();
        let glued = glue(&fam).unwrap();
        assert_eq!(glued.sym().triangle(), m.sym().triangle());
    }

    #[test]
    fn glue_two_interval_cover_recovers_exactly() {
        // I1 = [0,5), I2 = [2,7): coefficient of each transition must be 1.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lift = test_lift(LiftConfig::compact(2, 2));
        let seg = random_segment(&mut rng, 7, 2, 2);
        let m = descriptor_of_segment(&seg, &lift).unwrap();
        let cover = IntervalCover::new(vec![(0, 5), (2, 7)], 7).unwrap();
        let fam = cover.overlap_family(&seg, &lift).unwrap();
        assert_eq!(fam.len(), 3);
        let glued = glue(&fam).unwrap();
        let mut worst = 0.0f64;
        for i in 0..m.dim() {
            for j in 0..m.dim() {
                worst = worst.max((glued.get(i, j) - m.get(i, j)).abs());
            }
        }
        assert!(worst <= 1e-10, "entrywise gluing error {worst}");
        assert_eq!(glued.horizon(), 7.0);
    }

    #[test]
    fn glue_three_interval_chain_cover() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let lift = test_lift(LiftConfig::compact(2, 3));
        let seg = random_segment(&mut rng, 12, 2, 3);
        let m = descriptor_of_segment(&seg, &lift).unwrap();
        let cover = IntervalCover::new(vec![(0, 6), (4, 9), (7, 12)], 12).unwrap();
        let fam = cover.overlap_family(&seg, &lift).unwrap();
        let glued = glue(&fam).unwrap();
        assert!(glued.frobenius_distance(&m).unwrap() <= 1e-10);
        assert_eq!(glued.horizon(), 12.0);
    }

    #[test]
    fn glue_rejects_empty_and_duplicate_keys() {
        assert!(matches!(glue(&[]), Err(Error::EmptyInput(_))));
        let cfg = LiftConfig::compact(2, 2);
        let z = MatrixDescriptor::zero(&cfg);
        let k: BTreeSet<usize> = [0].into_iter().collect();
        let dup = vec![(k.clone(), z.clone()), (k, z)];
        assert!(glue(&dup).is_err());
    }

    #[test]
    fn block_slices_match_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cfg = LiftConfig::full_kronecker(2, 2);
        let lift = test_lift(cfg.clone());
        let seg = random_segment(&mut rng, 5, 2, 2);
        let m = descriptor_of_segment(&seg, &lift).unwrap();

        // M_{1,1} = T, M_{delta,1} = sum of displacements, M_{r,1} = sum of rewards.
        let t_block = m.block(Channel::Const, Channel::Const).unwrap();
        assert_eq!(t_block[(0, 0)], 5.0);
        let d1 = m.block(Channel::Disp, Channel::Const).unwrap();
        let mut net = vec![0.0; 2];
        let mut reward_sum = 0.0;
        for t in &seg.transitions {
            for i in 0..2 {
                net[i] += t.next_obs[i] - t.obs[i];
            }
            reward_sum += t.reward;
        }
        for i in 0..2 {
            assert!((d1[(i, 0)] - net[i]).abs() < 1e-12);
        }
        let r1 = m.block(Channel::Reward, Channel::Const).unwrap();
        assert!((r1[(0, 0)] - reward_sum).abs() < 1e-12);
    }

    #[test]
    fn block_rejects_chi_tags_in_compact_mode() {
        let m = MatrixDescriptor::zero(&LiftConfig::compact(2, 2));
        assert!(matches!(m.block(Channel::ActMid, Channel::Const), Err(Error::InvalidChannel(_))));
    }

    #[test]
    fn functional_matrix_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cfg = LiftConfig::compact(2, 2);
        let lift = test_lift(cfg.clone());
        let m_minus_1 = cfg.dim() - 1;
        for _ in 0..20 {
            let len = rng.random_range(0..8);
            let seg = random_segment(&mut rng, len, 2, 2);
            let steps: Vec<LiftedStep> = seg
                .transitions
                .iter()
                .map(|t| lift.lift_transition("test", t).unwrap())
                .collect();
            let m = descriptor_of_segment(&seg, &lift).unwrap();
            let a = rng.random_range(-1.0..1.0);
            let b: Vec<f64> = (0..m_minus_1).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut c = SymMat::zeros(m_minus_1);
            for i in 0..m_minus_1 {
                for j in i..m_minus_1 {
                    c.set(i, j, rng.random_range(-1.0..1.0));
                }
            }
            let f = FunctionalCoeffs::new(a, b, c).unwrap();
            let amat = functional_matrix(&f, &cfg).unwrap();
            let via_matrix = evaluate_functional_sym(&amat, &m).unwrap();
            let direct = f.evaluate_direct(&steps);
            assert!(
                (via_matrix - direct).abs() <= 1e-9 * (1.0 + direct.abs()),
                "functional mismatch: {via_matrix} vs {direct}"
            );
        }
    }

    #[test]
    fn functional_length_and_reward_specials() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let cfg = LiftConfig::compact(2, 2);
        let lift = test_lift(cfg.clone());
        let seg = random_segment(&mut rng, 7, 2, 2);
        let m = descriptor_of_segment(&seg, &lift).unwrap();
        let dim = cfg.dim();

        // a=1, b=0, C=0 counts steps.
        let f_len = FunctionalCoeffs::new(1.0, vec![0.0; dim - 1], SymMat::zeros(dim - 1)).unwrap();
        let a_len = functional_matrix(&f_len, &cfg).unwrap();
        assert!((evaluate_functional_sym(&a_len, &m).unwrap() - 7.0).abs() < 1e-12);

        // b = reward-channel indicator sums rewards.
        let mut b = vec![0.0; dim - 1];
        b[cfg.reward_index()] = 1.0;
        let f_r = FunctionalCoeffs::new(0.0, b, SymMat::zeros(dim - 1)).unwrap();
        let a_r = functional_matrix(&f_r, &cfg).unwrap();
        let reward_sum: f64 = seg.transitions.iter().map(|t| t.reward).sum();
        assert!((evaluate_functional_sym(&a_r, &m).unwrap() - reward_sum).abs() < 1e-10);

        // C = identity on the displacement block sums squared displacement
        // norms, i.e. the trace of the disp-disp block.
        let mut c = SymMat::zeros(dim - 1);
        let disp = cfg.channel_range(Channel::Disp).unwrap();
        for i in disp.clone() {
            c.set(i, i, 1.0);
        }
        let f_d = FunctionalCoeffs::new(0.0, vec![0.0; dim - 1], c).unwrap();
        let a_d = functional_matrix(&f_d, &cfg).unwrap();
        let dd = m.block(Channel::Disp, Channel::Disp).unwrap();
        assert!((evaluate_functional_sym(&a_d, &m).unwrap() - dd.trace()).abs() < 1e-10);
    }

    #[test]
    fn evaluate_functional_rejects_asymmetric() {
        let m = MatrixDescriptor::zero(&LiftConfig::compact(2, 2));
        let dim = m.dim();
        let mut a = DMatrix::<f64>::zeros(dim, dim);
        a[(0, 1)] = 1.0;
        assert!(matches!(evaluate_functional(&a, &m), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn separation_via_difference_functional() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let lift = test_lift(LiftConfig::compact(2, 2));
        let m1 = descriptor_of_segment(&random_segment(&mut rng, 5, 2, 2), &lift).unwrap();
        let m2 = descriptor_of_segment(&random_segment(&mut rng, 5, 2, 2), &lift).unwrap();
        let mut delta = m1.sym().clone();
        delta.add_scaled(m2.sym(), -1.0);
        let gap = delta.inner(&delta);
        let d = m1.frobenius_distance(&m2).unwrap();
        assert!((gap - d * d).abs() <= 1e-9 * (1.0 + d * d));
        assert!(gap > 0.0);
    }

    #[test]
    fn congruence_matches_descriptor_of_gauged_segment() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = LiftConfig::full_kronecker(2, 2);
        let lift = test_lift(cfg.clone());
        for _ in 0..10 {
            let (s, u) = loop {
                let s = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-2.0..2.0));
                let u = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-2.0..2.0));
                if crate::linalg::abs_determinant(&s) >= 0.1
                    && crate::linalg::abs_determinant(&u) >= 0.1
                {
                    break (s, u);
                }
            };
            let g = GaugeTransform::new(s.clone(), u.clone()).unwrap();
            let seg = random_segment(&mut rng, 6, 2, 2);
            let m = descriptor_of_segment(&seg, &lift).unwrap();
            let congruent = m.congruence(&g).unwrap();

            // Build the gauged descriptor independently from gauged lifts.
            let mut gauged = MatrixDescriptor::zero(&cfg);
            for t in &seg.transitions {
                let xi = embed_action(&t.action, 2).unwrap();
                let gx = (&s * DMatrix::from_column_slice(2, 1, &t.obs)).as_slice().to_vec();
                let gxp = (&s * DMatrix::from_column_slice(2, 1, &t.next_obs)).as_slice().to_vec();
                let gxi = (&u * DMatrix::from_column_slice(2, 1, &xi)).as_slice().to_vec();
                let step = lift_step(&gx, &gxp, &gxi, t.reward, &cfg).unwrap();
                gauged.accumulate(&step).unwrap();
            }
            let err = congruent.frobenius_distance(&gauged).unwrap();
            assert!(err <= 1e-8 * (1.0 + m.frobenius_norm()), "congruence error {err}");
        }
    }

    #[test]
    fn congruence_identity_gauge_preserves() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let cfg = LiftConfig::full_kronecker(2, 2);
        let lift = test_lift(cfg.clone());
        let m = descriptor_of_segment(&random_segment(&mut rng, 4, 2, 2), &lift).unwrap();
        let g = GaugeTransform::new(DMatrix::identity(2, 2), DMatrix::identity(2, 2)).unwrap();
        let same = m.congruence(&g).unwrap();
        assert!(m.frobenius_distance(&same).unwrap() < 1e-14);
    }

    #[test]
    fn congruence_scalar_example() {
        // d=q=1, S=[2], U=[1]: mid-mid block scales by 4, const block fixed.
        let cfg = LiftConfig::full_kronecker(1, 1);
        let xi = [1.0];
        let step = lift_step(&[0.5], &[1.5], &xi, 0.0, &cfg).unwrap();
        let mut m = MatrixDescriptor::zero(&cfg);
        m.accumulate(&step).unwrap();
        let g = GaugeTransform::new(
            DMatrix::from_element(1, 1, 2.0),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        let gm = m.congruence(&g).unwrap();
        assert!((gm.get(0, 0) - 4.0 * m.get(0, 0)).abs() < 1e-12);
        let c = cfg.const_index();
        assert!((gm.get(c, c) - m.get(c, c)).abs() < 1e-12);
    }

    #[test]
    fn frobenius_distance_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let lift = test_lift(LiftConfig::compact(2, 2));
        let m = descriptor_of_segment(&random_segment(&mut rng, 4, 2, 2), &lift).unwrap();
        assert_eq!(m.frobenius_distance(&m).unwrap(), 0.0);
        let zero = MatrixDescriptor::zero(lift.config());
        assert!((m.frobenius_distance(&zero).unwrap() - m.frobenius_norm()).abs() < 1e-12);
    }

    #[test]
    fn psd_up_to_roundoff() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let lift = test_lift(LiftConfig::compact(3, 3));
        for _ in 0..10 {
            let m = descriptor_of_segment(&random_segment(&mut rng, 8, 3, 3), &lift).unwrap();
            assert!(m.min_eigenvalue() >= -1e-9 * (1.0 + m.frobenius_norm()));
        }
    }

    #[test]
    fn order_blindness_up_to_roundoff() {
        // Permuting the multiset of transitions leaves the descriptor
        // unchanged up to floating-point summation order.
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let lift = test_lift(LiftConfig::compact(2, 2));
        let seg = random_segment(&mut rng, 8, 2, 2);
        let m = descriptor_of_transitions(&seg, &lift).unwrap();
        let mut shuffled = seg.clone();
        shuffled.transitions.reverse();
        shuffled.transitions.swap(0, 3);
        let m2 = descriptor_of_transitions(&shuffled, &lift).unwrap();
        let err = m.frobenius_distance(&m2).unwrap();
        assert!(err <= 1e-13 * (1.0 + m.frobenius_norm()));
    }

    #[test]
    fn file_round_trip_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let lift = test_lift(LiftConfig::compact(3, 2));
        let m = descriptor_of_segment(&random_segment(&mut rng, 5, 3, 2), &lift).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let back = MatrixDescriptor::read_from(&mut std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(back.sym().triangle(), m.sym().triangle());
        assert_eq!(back.config(), m.config());
    }

    #[test]
    fn chain_violation_rejected() {
        let lift = test_lift(LiftConfig::compact(1, 1));
        let seg = TrajectorySegment::new(
            "test",
            vec![
                Transition::discrete(vec![0.0], 0, 0.0, vec![1.0]),
                Transition::discrete(vec![2.0], 0, 0.0, vec![3.0]),
            ],
        );
        assert!(matches!(descriptor_of_segment(&seg, &lift), Err(Error::BrokenChain { .. })));
    }
}
